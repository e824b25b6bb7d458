//! The unsupervised geometric loss over per-point weights and centreline
//! vectors, with exact gradients.
//!
//! All averages are weighted by the per-point weights `w_i = sigmoid(logit_i)`
//! except the weights term itself, which uses a plain mean. Every term can
//! be evaluated on a subset of "active" points; neighbourhoods of active
//! points may reach outside the subset.

use serde::{Deserialize, Serialize};

use crate::cloud::{dot, sub, Point3, PointCloud};
use crate::eigen::{symmetric_eigen3, NeighborhoodShape};
use crate::error::{Error, Result};
use crate::knn::Neighborhoods;
use crate::regression::{vandermonde_row, NormalEquations, WEIGHT_EPS};

/// Centreline vectors at or below this length are skipped by the normal term.
pub const RHO_EPS: f64 = 1e-9;

/// Spectral gap below which eigenvector derivatives are not propagated.
pub const SPECTRAL_GAP_EPS: f64 = 1e-7;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Optimised latent variables: one weight logit and one `(y, z)`
/// centreline offset per point. The x offset is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationState {
    pub logits: Vec<f64>,
    pub rho: Vec<[f64; 2]>,
}

impl SegmentationState {
    pub fn new(logits: Vec<f64>, rho: Vec<[f64; 2]>) -> Result<Self> {
        if logits.len() != rho.len() {
            return Err(Error::LengthMismatch { left: logits.len(), right: rho.len() });
        }
        Ok(Self { logits, rho })
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| sigmoid(l)).collect()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::LengthMismatch { left: n, right: self.len() });
        }
        Ok(())
    }
}

/// Coefficients of the six loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_fit: f64,
    pub lambda_rho: f64,
    pub lambda_sigma: f64,
    pub lambda_plane: f64,
    pub lambda_n: f64,
    pub lambda_w: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_fit: 0.26,
            lambda_rho: 0.12,
            lambda_sigma: 0.18,
            lambda_plane: 0.12,
            lambda_n: 0.09,
            lambda_w: 0.23,
        }
    }
}

impl LossWeights {
    pub fn from_array(a: [f64; 6]) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(format!("loss weights must be finite and non-negative: {a:?}")));
        }
        Ok(Self {
            lambda_fit: a[0],
            lambda_rho: a[1],
            lambda_sigma: a[2],
            lambda_plane: a[3],
            lambda_n: a[4],
            lambda_w: a[5],
        })
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.lambda_fit, self.lambda_rho, self.lambda_sigma, self.lambda_plane, self.lambda_n, self.lambda_w]
    }

    /// Only `term` active, with coefficient 1.
    pub fn only(term: Term) -> Self {
        let mut a = [0.0; 6];
        a[term as usize] = 1.0;
        Self::from_array(a).expect("unit weights are valid")
    }

    /// Zero the optional terms that are switched off; the others keep their
    /// values (no renormalisation).
    pub fn with_optional(self, deviation: bool, plane: bool, normal: bool) -> Self {
        Self {
            lambda_sigma: if deviation { self.lambda_sigma } else { 0.0 },
            lambda_plane: if plane { self.lambda_plane } else { 0.0 },
            lambda_n: if normal { self.lambda_n } else { 0.0 },
            ..self
        }
    }
}

/// The six loss terms, in the order of [`LossWeights::to_array`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Fit = 0,
    Distance = 1,
    Deviation = 2,
    Plane = 3,
    Normal = 4,
    Weights = 5,
}

impl Term {
    pub const ALL: [Term; 6] = [Term::Fit, Term::Distance, Term::Deviation, Term::Plane, Term::Normal, Term::Weights];

    pub fn name(self) -> &'static str {
        match self {
            Term::Fit => "fit",
            Term::Distance => "rho",
            Term::Deviation => "sigma",
            Term::Plane => "plane",
            Term::Normal => "normal",
            Term::Weights => "weights",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub fit: f64,
    pub rho: f64,
    pub sigma: f64,
    pub plane: f64,
    pub normal: f64,
    pub weights: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn terms(&self) -> [f64; 6] {
        [self.fit, self.rho, self.sigma, self.plane, self.normal, self.weights]
    }

    pub fn term(&self, t: Term) -> f64 {
        self.terms()[t as usize]
    }

    pub fn from_terms(terms: [f64; 6], lw: &LossWeights) -> Self {
        let total = terms.iter().zip(lw.to_array()).map(|(t, l)| t * l).sum();
        Self {
            fit: terms[0],
            rho: terms[1],
            sigma: terms[2],
            plane: terms[3],
            normal: terms[4],
            weights: terms[5],
            total,
        }
    }
}

/// Gradient of the total loss with respect to logits and centreline vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub logits: Vec<f64>,
    pub rho: Vec<[f64; 2]>,
    /// Neighbourhoods whose eigenvector derivative was dropped because of a
    /// near-repeated smallest eigenvalue.
    pub degenerate_spectra: usize,
}

/// Gradient with respect to the weights themselves (before the sigmoid).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGradient {
    pub weights: Vec<f64>,
    pub rho: Vec<[f64; 2]>,
    pub degenerate_spectra: usize,
}

impl WeightGradient {
    fn zeros(n: usize) -> Self {
        Self { weights: vec![0.0; n], rho: vec![[0.0; 2]; n], degenerate_spectra: 0 }
    }

    /// Chain rule through the sigmoid.
    pub fn into_logit_gradient(self, weights: &[f64]) -> LossGradient {
        let logits = self.weights.iter().zip(weights).map(|(g, w)| g * w * (1.0 - w)).collect();
        LossGradient { logits, rho: self.rho, degenerate_spectra: self.degenerate_spectra }
    }
}

/// Local neighbourhood statistics for one centre point.
#[derive(Debug, Clone, Copy)]
struct Local {
    shape: NeighborhoodShape,
    mean: Point3,
    sum_w: f64,
}

/// One evaluation of the loss on fixed points, weights and offsets.
struct Eval<'a> {
    points: &'a [Point3],
    w: &'a [f64],
    rho: &'a [[f64; 2]],
    active: &'a [usize],
}

/// Gradient sink with a per-term scale.
struct Sink<'a> {
    g: &'a mut WeightGradient,
    scale: f64,
}

fn norm2(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

fn rho3(r: [f64; 2]) -> Point3 {
    [0.0, r[0], r[1]]
}

impl<'a> Eval<'a> {
    fn active_weight_sum(&self) -> Result<f64> {
        let s: f64 = self.active.iter().map(|&i| self.w[i]).sum();
        if s <= WEIGHT_EPS {
            return Err(Error::AllWeightsZero);
        }
        Ok(s)
    }

    fn fit(&self, degree: usize, sink: Option<Sink<'_>>) -> Result<f64> {
        let sw = self.active_weight_sum()?;
        let normal = NormalEquations::build(self.active.iter().map(|&i| (self.points[i][0], self.w[i])), degree)?;
        let centre = |i: usize| {
            let p = self.points[i];
            [p[1] + self.rho[i][0], p[2] + self.rho[i][1]]
        };
        let mut ry = [0.0; 4];
        let mut rz = [0.0; 4];
        for &i in self.active {
            let row = vandermonde_row(self.points[i][0], degree);
            let c = centre(i);
            for r in 0..=degree {
                ry[r] += self.w[i] * row[r] * c[0];
                rz[r] += self.w[i] * row[r] * c[1];
            }
        }
        let ay = normal.solve(&ry);
        let az = normal.solve(&rz);
        let residuals: Vec<[f64; 2]> = self
            .active
            .iter()
            .map(|&i| {
                let row = vandermonde_row(self.points[i][0], degree);
                let c = centre(i);
                [c[0] - dot4(&row, &ay), c[1] - dot4(&row, &az)]
            })
            .collect();
        let value = self.active.iter().zip(&residuals).map(|(&i, r)| self.w[i] * norm2(*r)).sum::<f64>() / sw;

        if let Some(sink) = sink {
            let units: Vec<[f64; 2]> = residuals
                .iter()
                .map(|r| {
                    let n = norm2(*r);
                    if n > 0.0 { [r[0] / n, r[1] / n] } else { [0.0; 2] }
                })
                .collect();
            let mut gy = [0.0; 4];
            let mut gz = [0.0; 4];
            for (&i, u) in self.active.iter().zip(&units) {
                let row = vandermonde_row(self.points[i][0], degree);
                for r in 0..=degree {
                    gy[r] += self.w[i] * row[r] * u[0];
                    gz[r] += self.w[i] * row[r] * u[1];
                }
            }
            let by = normal.solve(&gy);
            let bz = normal.solve(&gz);
            for ((&i, u), r) in self.active.iter().zip(&units).zip(&residuals) {
                let row = vandermonde_row(self.points[i][0], degree);
                let xb = [dot4(&row, &by), dot4(&row, &bz)];
                let f = sink.scale * self.w[i] / sw;
                sink.g.rho[i][0] += f * (u[0] - xb[0]);
                sink.g.rho[i][1] += f * (u[1] - xb[1]);
                let dn = norm2(*r) - (xb[0] * r[0] + xb[1] * r[1]);
                sink.g.weights[i] += sink.scale * (dn - value) / sw;
            }
        }
        Ok(value)
    }

    fn distance(&self, sink: Option<Sink<'_>>) -> Result<f64> {
        let sw = self.active_weight_sum()?;
        let value = self.active.iter().map(|&i| self.w[i] * norm2(self.rho[i])).sum::<f64>() / sw;
        if let Some(sink) = sink {
            for &i in self.active {
                let r = self.rho[i];
                let n = norm2(r);
                if n > 0.0 {
                    let f = sink.scale * self.w[i] / (sw * n);
                    sink.g.rho[i][0] += f * r[0];
                    sink.g.rho[i][1] += f * r[1];
                }
                sink.g.weights[i] += sink.scale * (n - value) / sw;
            }
        }
        Ok(value)
    }

    fn deviation(&self, sink: Option<Sink<'_>>) -> Result<f64> {
        let sw = self.active_weight_sum()?;
        let normal = NormalEquations::build(self.active.iter().map(|&i| (self.points[i][0], self.w[i])), 1)?;
        let mut b = [0.0; 4];
        for &i in self.active {
            let s = norm2(self.rho[i]);
            b[0] += self.w[i] * s;
            b[1] += self.w[i] * s * self.points[i][0];
        }
        let beta = normal.solve(&b);
        let resid: Vec<f64> = self
            .active
            .iter()
            .map(|&i| norm2(self.rho[i]) - (beta[0] + beta[1] * self.points[i][0]))
            .collect();
        let value = self.active.iter().zip(&resid).map(|(&i, e)| self.w[i] * e * e).sum::<f64>() / sw;
        // The line minimises the weighted residual sum, so its own
        // sensitivity drops out of both partial derivatives.
        if let Some(sink) = sink {
            for (&i, &e) in self.active.iter().zip(&resid) {
                let r = self.rho[i];
                let n = norm2(r);
                if n > 0.0 {
                    let f = sink.scale * 2.0 * self.w[i] * e / (sw * n);
                    sink.g.rho[i][0] += f * r[0];
                    sink.g.rho[i][1] += f * r[1];
                }
                sink.g.weights[i] += sink.scale * (e * e - value) / sw;
            }
        }
        Ok(value)
    }

    /// Members of the neighbourhood of `i`: the point itself, then its neighbours.
    fn members<'n>(&self, nb: &'n Neighborhoods, i: usize) -> impl Iterator<Item = usize> + 'n {
        std::iter::once(i).chain(nb.of(i).iter().copied())
    }

    fn locals(&self, nb: &Neighborhoods) -> Vec<Option<Local>> {
        self.active
            .iter()
            .map(|&i| {
                let mut sum_w = 0.0;
                let mut mean = [0.0; 3];
                for j in self.members(nb, i) {
                    let w = self.w[j];
                    sum_w += w;
                    for d in 0..3 {
                        mean[d] += w * self.points[j][d];
                    }
                }
                if sum_w <= WEIGHT_EPS {
                    return None;
                }
                mean.iter_mut().for_each(|m| *m /= sum_w);
                let mut cov = [[0.0; 3]; 3];
                for j in self.members(nb, i) {
                    let w = self.w[j];
                    let d = sub(self.points[j], mean);
                    for r in 0..3 {
                        for c in r..3 {
                            cov[r][c] += w * d[r] * d[c];
                        }
                    }
                }
                for r in 0..3 {
                    for c in r..3 {
                        cov[r][c] /= sum_w;
                        cov[c][r] = cov[r][c];
                    }
                }
                Some(Local { shape: symmetric_eigen3(cov), mean, sum_w })
            })
            .collect()
    }

    fn plane(&self, nb: &Neighborhoods, locals: &[Option<Local>], sink: Option<Sink<'_>>) -> Result<f64> {
        let sw = self.active_weight_sum()?;
        let terms: Vec<f64> = locals.iter().map(|l| l.map_or(1.0, |l| l.shape.planarity_term())).collect();
        let value = self.active.iter().zip(&terms).map(|(&i, t)| self.w[i] * t).sum::<f64>() / sw;
        if let Some(sink) = sink {
            for ((&i, t), local) in self.active.iter().zip(&terms).zip(locals) {
                sink.g.weights[i] += sink.scale * (t - value) / sw;
                let Some(local) = local else { continue };
                let partials = local.shape.planarity_partials();
                let coef = sink.scale * self.w[i] / sw;
                let [v1, v2, v3] = local.shape.eigenvectors;
                let lam = local.shape.eigenvalues;
                for j in self.members(nb, i) {
                    let d = sub(self.points[j], local.mean);
                    let (p1, p2, p3) = (dot(d, v1), dot(d, v2), dot(d, v3));
                    let dt = partials[0] * (p1 * p1 - lam[0])
                        + partials[1] * (p2 * p2 - lam[1])
                        + partials[2] * (p3 * p3 - lam[2]);
                    sink.g.weights[j] += coef * dt / local.sum_w;
                }
            }
        }
        Ok(value)
    }

    fn normal(&self, nb: &Neighborhoods, locals: &[Option<Local>], sink: Option<Sink<'_>>) -> Result<f64> {
        struct Entry {
            i: usize,
            local: Local,
            dotp: f64,
            len: f64,
            term: f64,
        }
        let entries: Vec<Entry> = self
            .active
            .iter()
            .zip(locals)
            .filter_map(|(&i, l)| {
                let local = (*l)?;
                let len = norm2(self.rho[i]);
                if len <= RHO_EPS {
                    return None;
                }
                let dotp = dot(rho3(self.rho[i]), local.shape.smallest_eigenvector);
                Some(Entry { i, local, dotp, len, term: 1.0 - (dotp / len).abs() })
            })
            .collect();
        if entries.is_empty() {
            return Ok(0.0);
        }
        let sw: f64 = entries.iter().map(|e| self.w[e.i]).sum();
        if sw <= WEIGHT_EPS {
            return Err(Error::AllWeightsZero);
        }
        let value = entries.iter().map(|e| self.w[e.i] * e.term).sum::<f64>() / sw;

        if let Some(sink) = sink {
            for e in &entries {
                let i = e.i;
                sink.g.weights[i] += sink.scale * (e.term - value) / sw;
                let sign = if e.dotp > 0.0 {
                    1.0
                } else if e.dotp < 0.0 {
                    -1.0
                } else {
                    continue;
                };
                let v3 = e.local.shape.smallest_eigenvector;
                let r = self.rho[i];
                let q = e.len;
                let f = sink.scale * self.w[i] / sw * -sign;
                let q3 = q * q * q;
                sink.g.rho[i][0] += f * (v3[1] / q - e.dotp * r[0] / q3);
                sink.g.rho[i][1] += f * (v3[2] / q - e.dotp * r[1] / q3);

                // d v3 = sum_a v_a (v_a^T dC v3) / (l3 - l_a)
                let lam = e.local.shape.eigenvalues;
                let coef = sink.scale * self.w[i] / sw * (-sign / q) / e.local.sum_w;
                let mut factors = [0.0; 2];
                let mut degenerate = false;
                for a in 0..2 {
                    let gap = lam[2] - lam[a];
                    if gap.abs() < SPECTRAL_GAP_EPS {
                        degenerate = true;
                        continue;
                    }
                    factors[a] = dot(rho3(r), e.local.shape.eigenvectors[a]) / gap;
                }
                if degenerate {
                    sink.g.degenerate_spectra += 1;
                }
                let [v1, v2, _] = e.local.shape.eigenvectors;
                for j in self.members(nb, i) {
                    let d = sub(self.points[j], e.local.mean);
                    let p3 = dot(d, v3);
                    let dv = factors[0] * dot(d, v1) * p3 + factors[1] * dot(d, v2) * p3;
                    sink.g.weights[j] += coef * dv;
                }
            }
        }
        Ok(value)
    }

    fn weights_term(&self, sink: Option<Sink<'_>>) -> Result<f64> {
        if self.active.is_empty() {
            return Err(Error::Empty("active point set"));
        }
        let n = self.active.len() as f64;
        let value = 1.0 - self.active.iter().map(|&i| self.w[i]).sum::<f64>() / n;
        if let Some(sink) = sink {
            for &i in self.active {
                sink.g.weights[i] -= sink.scale / n;
            }
        }
        Ok(value)
    }
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Fixed geometry of one loss problem: point positions, neighbourhoods,
/// curve degree and term coefficients.
#[derive(Debug, Clone, Copy)]
pub struct LossProblem<'a> {
    pub points: &'a [Point3],
    pub neighborhoods: &'a Neighborhoods,
    pub degree: usize,
    pub loss_weights: LossWeights,
}

impl<'a> LossProblem<'a> {
    pub fn new(cloud: &'a PointCloud, neighborhoods: &'a Neighborhoods, loss_weights: LossWeights, degree: usize) -> Self {
        Self { points: &cloud.points, neighborhoods, degree, loss_weights }
    }

    fn check(&self, w: &[f64], rho: &[[f64; 2]], active: &[usize]) -> Result<()> {
        let n = self.points.len();
        if w.len() != n || rho.len() != n {
            return Err(Error::LengthMismatch { left: n, right: w.len().min(rho.len()) });
        }
        if self.neighborhoods.len() != n {
            return Err(Error::LengthMismatch { left: n, right: self.neighborhoods.len() });
        }
        if active.is_empty() {
            return Err(Error::Empty("active point set"));
        }
        Ok(())
    }

    /// Evaluates every term with explicit weights. `active = None` means all points.
    pub fn evaluate_with_weights(&self, w: &[f64], rho: &[[f64; 2]], active: Option<&[usize]>) -> Result<LossBreakdown> {
        self.run(w, rho, active, None)
    }

    /// Loss and its gradient with respect to explicit weights and offsets.
    pub fn gradient_with_weights(
        &self,
        w: &[f64],
        rho: &[[f64; 2]],
        active: Option<&[usize]>,
    ) -> Result<(LossBreakdown, WeightGradient)> {
        let mut g = WeightGradient::zeros(self.points.len());
        let loss = self.run(w, rho, active, Some(&mut g))?;
        Ok((loss, g))
    }

    pub fn evaluate(&self, state: &SegmentationState, active: Option<&[usize]>) -> Result<LossBreakdown> {
        self.evaluate_with_weights(&state.weights(), &state.rho, active)
    }

    pub fn gradient(&self, state: &SegmentationState, active: Option<&[usize]>) -> Result<(LossBreakdown, LossGradient)> {
        let w = state.weights();
        let (loss, g) = self.gradient_with_weights(&w, &state.rho, active)?;
        Ok((loss, g.into_logit_gradient(&w)))
    }

    fn run(
        &self,
        w: &[f64],
        rho: &[[f64; 2]],
        active: Option<&[usize]>,
        mut grad: Option<&mut WeightGradient>,
    ) -> Result<LossBreakdown> {
        let all: Vec<usize>;
        let active = match active {
            Some(a) => a,
            None => {
                all = (0..self.points.len()).collect();
                &all
            }
        };
        self.check(w, rho, active)?;
        let ev = Eval { points: self.points, w, rho, active };
        let lw = self.loss_weights.to_array();
        fn sink<'g>(grad: &'g mut Option<&mut WeightGradient>, scale: f64) -> Option<Sink<'g>> {
            match grad.as_deref_mut() {
                Some(g) if scale != 0.0 => Some(Sink { g, scale }),
                _ => None,
            }
        }
        let fit = ev.fit(self.degree, sink(&mut grad, lw[Term::Fit as usize]))?;
        let dist = ev.distance(sink(&mut grad, lw[Term::Distance as usize]))?;
        let dev = ev.deviation(sink(&mut grad, lw[Term::Deviation as usize]))?;
        let locals = ev.locals(self.neighborhoods);
        let plane = ev.plane(self.neighborhoods, &locals, sink(&mut grad, lw[Term::Plane as usize]))?;
        let normal = ev.normal(self.neighborhoods, &locals, sink(&mut grad, lw[Term::Normal as usize]))?;
        let weights = ev.weights_term(sink(&mut grad, lw[Term::Weights as usize]))?;
        Ok(LossBreakdown::from_terms([fit, dist, dev, plane, normal, weights], &self.loss_weights))
    }
}

/// `c_i = p_i + (0, rho_y, rho_z)`.
pub fn centreline_points(cloud: &PointCloud, state: &SegmentationState) -> Result<Vec<Point3>> {
    state.check_len(cloud.len())?;
    Ok(cloud
        .points
        .iter()
        .zip(&state.rho)
        .map(|(p, r)| [p[0], p[1] + r[0], p[2] + r[1]])
        .collect())
}

fn single(cloud: &PointCloud, state: &SegmentationState) -> Result<(Vec<f64>, Vec<usize>)> {
    cloud.require_non_empty()?;
    state.check_len(cloud.len())?;
    Ok((state.weights(), (0..cloud.len()).collect()))
}

pub fn fit_loss(cloud: &PointCloud, state: &SegmentationState, degree: usize) -> Result<f64> {
    let (w, active) = single(cloud, state)?;
    Eval { points: &cloud.points, w: &w, rho: &state.rho, active: &active }.fit(degree, None)
}

pub fn distance_loss(state: &SegmentationState) -> Result<f64> {
    let w = state.weights();
    let sw: f64 = w.iter().sum();
    if sw <= WEIGHT_EPS {
        return Err(Error::AllWeightsZero);
    }
    Ok(w.iter().zip(&state.rho).map(|(w, r)| w * norm2(*r)).sum::<f64>() / sw)
}

pub fn deviation_loss(cloud: &PointCloud, state: &SegmentationState) -> Result<f64> {
    let (w, active) = single(cloud, state)?;
    Eval { points: &cloud.points, w: &w, rho: &state.rho, active: &active }.deviation(None)
}

pub fn plane_loss(cloud: &PointCloud, state: &SegmentationState, neighborhoods: &Neighborhoods) -> Result<f64> {
    let (w, active) = single(cloud, state)?;
    let ev = Eval { points: &cloud.points, w: &w, rho: &state.rho, active: &active };
    let locals = ev.locals(neighborhoods);
    ev.plane(neighborhoods, &locals, None)
}

pub fn normal_loss(cloud: &PointCloud, state: &SegmentationState, neighborhoods: &Neighborhoods) -> Result<f64> {
    let (w, active) = single(cloud, state)?;
    let ev = Eval { points: &cloud.points, w: &w, rho: &state.rho, active: &active };
    let locals = ev.locals(neighborhoods);
    ev.normal(neighborhoods, &locals, None)
}

pub fn weights_loss(state: &SegmentationState) -> Result<f64> {
    if state.is_empty() {
        return Err(Error::Empty("segmentation state"));
    }
    Ok(1.0 - state.weights().iter().sum::<f64>() / state.len() as f64)
}

pub fn total_loss(
    cloud: &PointCloud,
    state: &SegmentationState,
    neighborhoods: &Neighborhoods,
    loss_weights: &LossWeights,
    degree: usize,
) -> Result<LossBreakdown> {
    state.check_len(cloud.len())?;
    LossProblem::new(cloud, neighborhoods, *loss_weights, degree).evaluate(state, None)
}

pub fn total_loss_gradient(
    cloud: &PointCloud,
    state: &SegmentationState,
    neighborhoods: &Neighborhoods,
    loss_weights: &LossWeights,
    degree: usize,
) -> Result<LossGradient> {
    state.check_len(cloud.len())?;
    Ok(LossProblem::new(cloud, neighborhoods, *loss_weights, degree).gradient(state, None)?.1)
}
