//! Weighted statistics and weighted polynomial least squares.

use serde::{Deserialize, Serialize};

use crate::eigen::jacobi_eigen;
use crate::error::{Error, Result};

/// Weight sums at or below this are treated as zero.
pub const WEIGHT_EPS: f64 = 1e-12;

/// Largest tolerated condition estimate of the normal matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 3;

const DIM: usize = MAX_DEGREE + 1;

/// `sum(w_i x_i) / sum(w_i)`.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: weights.len() });
    }
    let sw: f64 = weights.iter().sum();
    if sw <= WEIGHT_EPS {
        return Err(Error::AllWeightsZero);
    }
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / sw)
}

/// Polynomial centreline `x -> (y(x), z(x))`, coefficients in increasing
/// power order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub degree: usize,
    pub coeffs_y: Vec<f64>,
    pub coeffs_z: Vec<f64>,
}

impl CurveFit {
    pub fn new(coeffs_y: Vec<f64>, coeffs_z: Vec<f64>) -> Result<Self> {
        if coeffs_y.len() != coeffs_z.len() {
            return Err(Error::LengthMismatch { left: coeffs_y.len(), right: coeffs_z.len() });
        }
        if coeffs_y.is_empty() {
            return Err(Error::Empty("curve coefficients"));
        }
        Ok(Self { degree: coeffs_y.len() - 1, coeffs_y, coeffs_z })
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        (horner(&self.coeffs_y, x), horner(&self.coeffs_z, x))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub fn evaluate_curve(fit: &CurveFit, xs: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().map(|&x| fit.eval(x)).collect()
}

/// Row `[1, x, x^2, ...]` of the Vandermonde matrix, zero padded.
pub(crate) fn vandermonde_row(x: f64, degree: usize) -> [f64; DIM] {
    let mut row = [0.0; DIM];
    let mut p = 1.0;
    for r in row.iter_mut().take(degree + 1) {
        *r = p;
        p *= x;
    }
    row
}

/// Factorised weighted normal matrix `X^T W X` for a polynomial basis.
///
/// The matrix is symmetrically equilibrated (unit diagonal) before the
/// Cholesky factorisation; the condition estimate is that of the
/// equilibrated matrix.
#[derive(Debug, Clone)]
pub(crate) struct NormalEquations {
    dim: usize,
    scale: [f64; DIM],
    chol: [[f64; DIM]; DIM],
}

impl NormalEquations {
    /// Accumulates `X^T W X` over `(x, w)` pairs.
    pub(crate) fn build(samples: impl Iterator<Item = (f64, f64)>, degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::InvalidConfig(format!("degree {degree} exceeds {MAX_DEGREE}")));
        }
        let dim = degree + 1;
        let mut m = [[0.0; DIM]; DIM];
        let mut sw = 0.0;
        for (x, w) in samples {
            sw += w;
            let row = vandermonde_row(x, degree);
            for r in 0..dim {
                for c in r..dim {
                    m[r][c] += w * row[r] * row[c];
                }
            }
        }
        if sw <= WEIGHT_EPS {
            return Err(Error::AllWeightsZero);
        }
        Self::factor(m, dim)
    }

    fn factor(mut m: [[f64; DIM]; DIM], dim: usize) -> Result<Self> {
        let mut scale = [1.0; DIM];
        for r in 0..dim {
            if !(m[r][r] > 0.0) || !m[r][r].is_finite() {
                return Err(Error::RankDeficient { condition: f64::INFINITY });
            }
            scale[r] = 1.0 / m[r][r].sqrt();
        }
        let mut eq = [[0.0; DIM]; DIM];
        for r in 0..DIM {
            eq[r][r] = 1.0;
        }
        for r in 0..dim {
            for c in r..dim {
                let v = m[r][c] * scale[r] * scale[c];
                eq[r][c] = v;
                eq[c][r] = v;
            }
        }
        let (vals, _) = jacobi_eigen(eq);
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        // Cholesky, lower triangle stored in `m`.
        for r in 0..dim {
            for c in 0..=r {
                let mut s = eq[r][c];
                for k in 0..c {
                    s -= m[r][k] * m[c][k];
                }
                if r == c {
                    if s <= 0.0 {
                        return Err(Error::RankDeficient { condition: f64::INFINITY });
                    }
                    m[r][r] = s.sqrt();
                } else {
                    m[r][c] = s / m[c][c];
                }
            }
        }
        Ok(Self { dim, scale, chol: m })
    }

    /// Solves `(X^T W X) a = b`.
    pub(crate) fn solve(&self, b: &[f64; DIM]) -> [f64; DIM] {
        let n = self.dim;
        let mut y = [0.0; DIM];
        for r in 0..n {
            let mut s = b[r] * self.scale[r];
            for k in 0..r {
                s -= self.chol[r][k] * y[k];
            }
            y[r] = s / self.chol[r][r];
        }
        let mut x = [0.0; DIM];
        for r in (0..n).rev() {
            let mut s = y[r];
            for k in (r + 1)..n {
                s -= self.chol[k][r] * x[k];
            }
            x[r] = s / self.chol[r][r];
        }
        for r in 0..n {
            x[r] *= self.scale[r];
        }
        x
    }
}

/// Solves a small symmetric positive semi-definite system through the
/// eigen-decomposition of its equilibrated form. Returns `None` when the
/// condition estimate exceeds [`MAX_CONDITION`].
pub(crate) fn solve_symmetric<const N: usize>(m: [[f64; N]; N], b: [f64; N]) -> Option<[f64; N]> {
    let mut scale = [0.0; N];
    for r in 0..N {
        if !(m[r][r] > 0.0) || !m[r][r].is_finite() {
            return None;
        }
        scale[r] = 1.0 / m[r][r].sqrt();
    }
    let mut eq = [[0.0; N]; N];
    for r in 0..N {
        for c in 0..N {
            eq[r][c] = m[r][c] * scale[r] * scale[c];
        }
    }
    let (vals, vecs) = jacobi_eigen(eq);
    let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
    let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
    if !(lo > 0.0) || !(hi / lo <= MAX_CONDITION) {
        return None;
    }
    let mut x = [0.0; N];
    for k in 0..N {
        let proj: f64 = (0..N).map(|r| vecs[r][k] * b[r] * scale[r]).sum::<f64>() / vals[k];
        for r in 0..N {
            x[r] += vecs[r][k] * proj;
        }
    }
    for r in 0..N {
        x[r] *= scale[r];
    }
    Some(x)
}

/// Weighted least-squares polynomial fit of `(y, z)` against `x`.
pub fn fit_weighted_polynomial(
    xs: &[f64],
    ys_zs: &[(f64, f64)],
    weights: &[f64],
    degree: usize,
) -> Result<CurveFit> {
    if xs.len() != ys_zs.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys_zs.len() });
    }
    if xs.len() != weights.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: weights.len() });
    }
    let normal = NormalEquations::build(xs.iter().copied().zip(weights.iter().copied()), degree)?;
    let mut by = [0.0; DIM];
    let mut bz = [0.0; DIM];
    for ((&x, &(y, z)), &w) in xs.iter().zip(ys_zs).zip(weights) {
        let row = vandermonde_row(x, degree);
        for r in 0..=degree {
            by[r] += w * row[r] * y;
            bz[r] += w * row[r] * z;
        }
    }
    let ay = normal.solve(&by);
    let az = normal.solve(&bz);
    Ok(CurveFit {
        degree,
        coeffs_y: ay[..=degree].to_vec(),
        coeffs_z: az[..=degree].to_vec(),
    })
}
