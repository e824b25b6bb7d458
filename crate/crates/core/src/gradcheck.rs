//! Central finite-difference check of the analytic loss gradients.
//!
//! The reference side only ever calls [`LossProblem::evaluate`]; it shares
//! no code with the analytic gradient path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cloud::{Point3, PointCloud};
use crate::error::Result;
use crate::knn::build_neighborhoods;
use crate::loss::{LossProblem, LossWeights, SegmentationState, Term};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub h: f64,
    pub seed: u64,
    pub degree: usize,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { n: 200, k: 16, trials: 50, h: 1e-5, seed: 0, degree: 1, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TermCheck {
    pub term: String,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub trials: usize,
    /// Trials skipped because a neighbourhood had a near-repeated smallest
    /// eigenvalue.
    pub degenerate_trials: usize,
    pub degenerate_neighborhoods: usize,
    /// One entry per loss term, then one for the weighted total.
    pub terms: Vec<TermCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.terms.iter().all(|t| t.passed)
    }
}

/// A random but non-degenerate configuration: a rough cylinder with noisy
/// centreline offsets and mixed weights.
pub fn random_configuration(n: usize, rng: &mut impl Rng) -> (PointCloud, SegmentationState) {
    let mut points: Vec<Point3> = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.gen_range(-2.0..2.0);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = rng.gen_range(0.8..1.25);
        let (y, z) = (r * theta.cos() + 0.1 * x, r * theta.sin());
        points.push([x, y, z]);
        logits.push(rng.gen_range(-2.0..2.0));
        let s = rng.gen_range(0.7..1.3);
        rho.push([-s * y + rng.gen_range(-0.2..0.2), -s * z + rng.gen_range(-0.2..0.2)]);
    }
    let cloud = PointCloud::unlabeled("gradcheck", points).expect("finite points");
    (cloud, SegmentationState { logits, rho })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn flatten(logits: &[f64], rho: &[[f64; 2]]) -> Vec<f64> {
    let mut out = logits.to_vec();
    out.extend(rho.iter().flat_map(|r| r.iter().copied()));
    out
}

/// Relative error `max|a - f| / max(max|a|, max|f|)` between an analytic
/// and a finite-difference gradient.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, f)| a - f).collect();
    let scale = max_abs(analytic).max(max_abs(numeric));
    if scale == 0.0 {
        0.0
    } else {
        max_abs(&diff) / scale
    }
}

/// Runs `config.trials` random comparisons of every term's gradient.
pub fn run_gradcheck(config: &GradcheckConfig, loss_weights: &LossWeights) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst = [0.0f64; 7];
    let mut degenerate_trials = 0;
    let mut degenerate_neighborhoods = 0;
    let mut used = 0;

    for _ in 0..config.trials {
        let (cloud, state) = random_configuration(config.n, &mut rng);
        let nb = build_neighborhoods(&cloud, config.k)?;
        let n = cloud.len();

        let mut analytic: Vec<Vec<f64>> = Vec::with_capacity(7);
        let mut degenerate = 0;
        for term in Term::ALL {
            let problem = LossProblem::new(&cloud, &nb, LossWeights::only(term), config.degree);
            let (_, g) = problem.gradient(&state, None)?;
            degenerate += g.degenerate_spectra;
            analytic.push(flatten(&g.logits, &g.rho));
        }
        let total_problem = LossProblem::new(&cloud, &nb, *loss_weights, config.degree);
        let (_, g) = total_problem.gradient(&state, None)?;
        analytic.push(flatten(&g.logits, &g.rho));
        if degenerate > 0 {
            degenerate_trials += 1;
            degenerate_neighborhoods += degenerate;
            continue;
        }

        let mut numeric = vec![vec![0.0; 3 * n]; 7];
        let mut probe = state.clone();
        for p in 0..3 * n {
            let mut values = [[0.0; 7]; 2];
            for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
                let param = if p < n { &mut probe.logits[p] } else { &mut probe.rho[(p - n) / 2][(p - n) % 2] };
                let orig = *param;
                *param = orig + sign * config.h;
                let b = total_problem.evaluate(&probe, None)?;
                let param = if p < n { &mut probe.logits[p] } else { &mut probe.rho[(p - n) / 2][(p - n) % 2] };
                *param = orig;
                values[slot][..6].copy_from_slice(&b.terms());
                values[slot][6] = b.total;
            }
            for t in 0..7 {
                numeric[t][p] = (values[0][t] - values[1][t]) / (2.0 * config.h);
            }
        }
        for t in 0..7 {
            worst[t] = worst[t].max(relative_error(&analytic[t], &numeric[t]));
        }
        used += 1;
    }

    let names = Term::ALL.iter().map(|t| t.name()).chain(std::iter::once("total"));
    let terms = names
        .zip(worst)
        .map(|(name, e)| TermCheck { term: name.to_string(), max_relative_error: e, passed: e < config.tolerance })
        .collect();
    Ok(GradcheckReport { trials: used, degenerate_trials, degenerate_neighborhoods, terms })
}
