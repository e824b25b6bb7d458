//! Small dense symmetric eigen-solver and the weighted neighbourhood shape
//! descriptor built on top of it.

use crate::cloud::{dot, Point3};
use crate::error::{Error, Result};
use crate::regression::WEIGHT_EPS;

/// Eigenvalues with magnitude below this are treated as zero.
pub const EIGEN_EPS: f64 = 1e-9;

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigen-decomposition of a symmetric `N x N` matrix.
///
/// Returns the eigenvalues (unsorted) and the eigenvectors as the columns
/// of the second matrix. Only the upper triangle needs to be meaningful;
/// the matrix is symmetrised first.
pub fn jacobi_eigen<const N: usize>(mut a: [[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    for p in 0..N {
        for q in (p + 1)..N {
            let m = 0.5 * (a[p][q] + a[q][p]);
            a[p][q] = m;
            a[q][p] = m;
        }
    }
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..N)
            .flat_map(|p| ((p + 1)..N).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        if off == 0.0 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p][p], a[q][q]);
                let g = 100.0 * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p][q] = 0.0;
                    a[q][p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J with J = I + (c-1)(e_p e_p^T + e_q e_q^T) + s (e_p e_q^T - e_q e_p^T)
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut vals = [0.0; N];
    for (i, val) in vals.iter_mut().enumerate() {
        *val = a[i][i];
    }
    (vals, v)
}

/// Eigen-structure of a weighted local neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodShape {
    /// Sorted descending, clamped at zero.
    pub eigenvalues: [f64; 3],
    /// Unit eigenvectors matching `eigenvalues`, each with its
    /// largest-magnitude component made positive.
    pub eigenvectors: [Point3; 3],
    pub smallest_eigenvector: Point3,
}

impl NeighborhoodShape {
    /// `1 - l2/l1 + l3/l2`, with each ratio taken as 0 when its
    /// denominator is at or below [`EIGEN_EPS`].
    pub fn planarity_term(&self) -> f64 {
        let [l1, l2, l3] = self.eigenvalues;
        let r21 = if l1 > EIGEN_EPS { l2 / l1 } else { 0.0 };
        let r32 = if l2 > EIGEN_EPS { l3 / l2 } else { 0.0 };
        1.0 - r21 + r32
    }

    /// Partial derivatives of [`Self::planarity_term`] with respect to the
    /// three eigenvalues.
    pub(crate) fn planarity_partials(&self) -> [f64; 3] {
        let [l1, l2, l3] = self.eigenvalues;
        let mut d = [0.0; 3];
        if l1 > EIGEN_EPS {
            d[0] = l2 / (l1 * l1);
            d[1] = -1.0 / l1;
        }
        if l2 > EIGEN_EPS {
            d[1] -= l3 / (l2 * l2);
            d[2] = 1.0 / l2;
        }
        d
    }
}

/// Sorted eigen-decomposition of a symmetric 3x3 matrix.
pub fn symmetric_eigen3(m: [[f64; 3]; 3]) -> NeighborhoodShape {
    let (vals, vecs) = jacobi_eigen(m);
    let mut order = [0usize, 1, 2];
    // stable: ties keep the lower index first
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut eigenvalues = [0.0; 3];
    let mut eigenvectors = [[0.0; 3]; 3];
    for (slot, &col) in order.iter().enumerate() {
        eigenvalues[slot] = vals[col].max(0.0);
        let mut v = [vecs[0][col], vecs[1][col], vecs[2][col]];
        let norm = dot(v, v).sqrt();
        v.iter_mut().for_each(|c| *c /= norm);
        let lead = (0..3).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        eigenvectors[slot] = v;
    }
    NeighborhoodShape { eigenvalues, eigenvectors, smallest_eigenvector: eigenvectors[2] }
}

/// Weighted mean, weighted covariance (normalised by the weight sum) and
/// the weight sum of a set of points.
pub fn weighted_covariance(points: &[Point3], weights: &[f64]) -> Result<(Point3, [[f64; 3]; 3], f64)> {
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch { left: points.len(), right: weights.len() });
    }
    let sum: f64 = weights.iter().sum();
    if sum <= WEIGHT_EPS {
        return Err(Error::AllWeightsZero);
    }
    let mut mean = [0.0; 3];
    for (p, &w) in points.iter().zip(weights) {
        for d in 0..3 {
            mean[d] += w * p[d];
        }
    }
    mean.iter_mut().for_each(|m| *m /= sum);
    let mut cov = [[0.0; 3]; 3];
    for (p, &w) in points.iter().zip(weights) {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in r..3 {
                cov[r][c] += w * d[r] * d[c];
            }
        }
    }
    for r in 0..3 {
        for c in r..3 {
            cov[r][c] /= sum;
            cov[c][r] = cov[r][c];
        }
    }
    Ok((mean, cov, sum))
}

/// Eigen-analysis of the weighted covariance of a neighbourhood.
pub fn weighted_covariance_shape(points: &[Point3], weights: &[f64]) -> Result<NeighborhoodShape> {
    if points.len() < 3 {
        return Err(Error::Empty("neighbourhood needs at least 3 points"));
    }
    let (_, cov, _) = weighted_covariance(points, weights)?;
    Ok(symmetric_eigen3(cov))
}
