//! Direct minimisation of the loss over per-point weights and centreline
//! offsets with Adam.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::knn::build_neighborhoods;
use crate::loss::{centreline_points, LossBreakdown, LossProblem, LossWeights, SegmentationState};
use crate::preprocess::median;
use crate::regression::{fit_weighted_polynomial, CurveFit, MAX_DEGREE};

/// Initial logit of every point (weight ~0.88).
pub const INITIAL_LOGIT: f64 = 2.0;

/// Number of x slices used to seed the centreline offsets.
pub const INIT_SLICES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub subsample_fraction: f64,
    pub batches_along_x: usize,
    pub seed: u64,
    pub threshold: f64,
    pub degree: usize,
    pub k: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_steps: 600,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            convergence_window: 20,
            convergence_tol: 1e-6,
            subsample_fraction: 2.0 / 3.0,
            batches_along_x: 4,
            seed: 0,
            threshold: 0.5,
            degree: 1,
            k: 256,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.max_steps == 0 || self.batches_along_x == 0 || self.k == 0 {
            return bad("max_steps, batches_along_x and k must be positive".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("Adam parameters out of range".into());
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return bad(format!("subsample_fraction must be in (0, 1], got {}", self.subsample_fraction));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must be in (0, 1), got {}", self.threshold));
        }
        if self.degree > MAX_DEGREE {
            return bad(format!("degree must be at most {MAX_DEGREE}"));
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationResult {
    pub inlier_mask: Vec<bool>,
    pub final_weights: Vec<f64>,
    pub centreline: Vec<Point3>,
    /// One entry per optimisation step (evaluated on that step's batch),
    /// followed by a final full-cloud evaluation.
    pub loss_history: Vec<LossBreakdown>,
    pub converged: bool,
    pub steps_used: usize,
    /// Neighbourhoods whose eigenvector derivative was dropped, summed over steps.
    pub degenerate_spectra: usize,
    #[serde(skip)]
    pub state: SegmentationState,
}

/// Logits at [`INITIAL_LOGIT`]; offsets point from each point to the
/// per-slice median of y and z.
pub fn initialize_state(cloud: &PointCloud) -> Result<SegmentationState> {
    cloud.require_non_empty()?;
    let slices = slice_indices(cloud, INIT_SLICES);
    let ys: Vec<f64> = cloud.points.iter().map(|p| p[1]).collect();
    let zs: Vec<f64> = cloud.points.iter().map(|p| p[2]).collect();
    let global = (median(&ys), median(&zs));
    let mut rho = vec![[0.0; 2]; cloud.len()];
    for members in &slices {
        let centre = if members.is_empty() {
            global
        } else {
            let sy: Vec<f64> = members.iter().map(|&i| ys[i]).collect();
            let sz: Vec<f64> = members.iter().map(|&i| zs[i]).collect();
            (median(&sy), median(&sz))
        };
        for &i in members {
            rho[i] = [centre.0 - ys[i], centre.1 - zs[i]];
        }
    }
    Ok(SegmentationState { logits: vec![INITIAL_LOGIT; cloud.len()], rho })
}

/// Partition of point indices into `count` equal-width x intervals.
pub fn slice_indices(cloud: &PointCloud, count: usize) -> Vec<Vec<usize>> {
    let (lo, hi) = cloud
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
    let width = (hi - lo) / count as f64;
    let mut out = vec![Vec::new(); count];
    for (i, p) in cloud.points.iter().enumerate() {
        let s = if width > 0.0 { (((p[0] - lo) / width) as usize).min(count - 1) } else { 0 };
        out[s].push(i);
    }
    out
}

/// Lengthwise batches; batches too small for the regressions are merged into
/// their left neighbour.
fn batches(cloud: &PointCloud, count: usize, degree: usize) -> Vec<Vec<usize>> {
    let min_size = 4 * (degree + 2);
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    for s in slice_indices(cloud, count) {
        pending.extend(s);
        if pending.len() >= min_size {
            out.push(std::mem::take(&mut pending));
        }
    }
    if !pending.is_empty() {
        match out.last_mut() {
            Some(last) => last.extend(pending),
            None => out.push(pending),
        }
    }
    for b in &mut out {
        b.sort_unstable();
    }
    out
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize, cfg: &OptimizerConfig) -> Self {
        Self {
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            lr: cfg.learning_rate,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

fn pack(state: &SegmentationState) -> Vec<f64> {
    let mut v = state.logits.clone();
    v.extend(state.rho.iter().flat_map(|r| r.iter().copied()));
    v
}

fn unpack(params: &[f64], state: &mut SegmentationState) {
    let n = state.logits.len();
    state.logits.copy_from_slice(&params[..n]);
    for (i, r) in state.rho.iter_mut().enumerate() {
        *r = [params[n + 2 * i], params[n + 2 * i + 1]];
    }
}

/// Tracks a cycle-averaged loss and reports when its best value stops
/// improving over a trailing window.
struct ConvergenceMonitor {
    cycle: usize,
    window: usize,
    tol: f64,
    recent: Vec<f64>,
    smoothed: Vec<f64>,
}

impl ConvergenceMonitor {
    fn push(&mut self, total: f64) -> bool {
        self.recent.push(total);
        if self.recent.len() < self.cycle {
            return false;
        }
        let tail = &self.recent[self.recent.len() - self.cycle..];
        self.smoothed.push(tail.iter().sum::<f64>() / self.cycle as f64);
        let n = self.smoothed.len();
        if self.window == 0 || n <= self.window {
            return false;
        }
        let best_before = self.smoothed[..n - self.window].iter().cloned().fold(f64::INFINITY, f64::min);
        let best_recent = self.smoothed[n - self.window..].iter().cloned().fold(f64::INFINITY, f64::min);
        best_before - best_recent < self.tol
    }
}

/// Minimises the loss for one (normalised) cloud.
pub fn segment(cloud: &PointCloud, loss_weights: &LossWeights, config: &OptimizerConfig) -> Result<SegmentationResult> {
    config.validate()?;
    cloud.require_non_empty()?;
    let n = cloud.len();
    if n < 2 {
        return Err(Error::KTooLarge { k: config.k, n });
    }
    let k = config.k.min(n - 1);
    let neighborhoods = build_neighborhoods(cloud, k)?;
    let problem = LossProblem::new(cloud, &neighborhoods, *loss_weights, config.degree);
    let batches = batches(cloud, config.batches_along_x, config.degree);

    let mut state = initialize_state(cloud)?;
    let mut params = pack(&state);
    let mut adam = Adam::new(params.len(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut monitor = ConvergenceMonitor {
        cycle: batches.len(),
        window: config.convergence_window,
        tol: config.convergence_tol,
        recent: Vec::new(),
        smoothed: Vec::new(),
    };
    let mut history = Vec::with_capacity(config.max_steps + 1);
    let mut converged = false;
    let mut degenerate_spectra = 0;
    let mut flat = vec![0.0; params.len()];
    let mut steps_used = 0;

    for step in 0..config.max_steps {
        let batch = &batches[step % batches.len()];
        let take = ((batch.len() as f64 * config.subsample_fraction).round() as usize)
            .clamp((config.degree + 2).min(batch.len()), batch.len());
        let active: Vec<usize> = if take == batch.len() {
            batch.clone()
        } else {
            let mut picked: Vec<usize> = sample(&mut rng, batch.len(), take).into_iter().map(|j| batch[j]).collect();
            picked.sort_unstable();
            picked
        };
        let (loss, grad) = problem.gradient(&state, Some(&active))?;
        let finite = loss.total.is_finite()
            && grad.logits.iter().all(|g| g.is_finite())
            && grad.rho.iter().all(|r| r[0].is_finite() && r[1].is_finite());
        if !finite {
            return Err(Error::NonFinite { step });
        }
        degenerate_spectra += grad.degenerate_spectra;
        flat[..n].copy_from_slice(&grad.logits);
        for (i, r) in grad.rho.iter().enumerate() {
            flat[n + 2 * i] = r[0];
            flat[n + 2 * i + 1] = r[1];
        }
        adam.step(&mut params, &flat);
        unpack(&params, &mut state);
        history.push(loss);
        steps_used = step + 1;
        if monitor.push(loss.total) {
            converged = true;
            break;
        }
    }

    let final_loss = problem.evaluate(&state, None)?;
    if !final_loss.total.is_finite() {
        return Err(Error::NonFinite { step: steps_used });
    }
    history.push(final_loss);
    let final_weights = state.weights();
    let inlier_mask = final_weights.iter().map(|&w| w >= config.threshold).collect();
    let centreline = centreline_points(cloud, &state)?;
    Ok(SegmentationResult {
        inlier_mask,
        final_weights,
        centreline,
        loss_history: history,
        converged,
        steps_used,
        degenerate_spectra,
        state,
    })
}

/// Weighted curve through the centreline points of the inliers.
pub fn extract_centreline(result: &SegmentationResult, cloud: &PointCloud, degree: usize) -> Result<CurveFit> {
    let idx: Vec<usize> = (0..cloud.len()).filter(|&i| result.inlier_mask[i]).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| result.centreline[i][0]).collect();
    let yz: Vec<(f64, f64)> = idx.iter().map(|&i| (result.centreline[i][1], result.centreline[i][2])).collect();
    let w: Vec<f64> = idx.iter().map(|&i| result.final_weights[i]).collect();
    fit_weighted_polynomial(&xs, &yz, &w, degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::sigmoid;

    #[test]
    fn initial_weights_are_sigmoid_two() {
        let cloud = PointCloud::unlabeled("c", vec![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [2.0, -1.0, 0.0]]).unwrap();
        let st = initialize_state(&cloud).unwrap();
        for w in st.weights() {
            assert!((w - sigmoid(2.0)).abs() < 1e-15);
            assert!((w - 0.8808).abs() < 1e-4);
        }
    }

    #[test]
    fn batches_cover_every_point_once() {
        let pts: Vec<Point3> = (0..100).map(|i| [i as f64, 0.0, 0.0]).collect();
        let cloud = PointCloud::unlabeled("c", pts).unwrap();
        let b = batches(&cloud, 4, 1);
        assert_eq!(b.len(), 4);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn tiny_batches_are_merged() {
        let mut pts: Vec<Point3> = (0..40).map(|i| [i as f64 * 0.01, 0.0, 0.0]).collect();
        pts.push([10.0, 0.0, 0.0]);
        let cloud = PointCloud::unlabeled("c", pts).unwrap();
        let b = batches(&cloud, 4, 1);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].len(), 41);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig { subsample_fraction: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }
}
