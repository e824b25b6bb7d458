//! Independent reference implementations shared by the oracle and
//! acceptance targets.

#![allow(dead_code, clippy::needless_range_loop)]

use logseg::baseline::{dbscan, NOISE};
use logseg::eigen::weighted_covariance_shape;
use logseg::metrics::evaluate;
use logseg::regression::fit_weighted_polynomial;
use logseg::Point3;
use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(X^T W X)^{-1} X^T W Y` with an explicit dense inverse.
pub fn dense_normal_equations(xs: &[f64], ys: &[f64], ws: &[f64], degree: usize) -> Vec<f64> {
    let n = xs.len();
    let x = DMatrix::from_fn(n, degree + 1, |r, c| xs[r].powi(c as i32));
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(ws));
    let y = DMatrix::from_column_slice(n, 1, ys);
    let xtw = x.transpose() * w;
    let inv = (&xtw * &x).try_inverse().expect("invertible");
    (inv * xtw * y).column(0).iter().cloned().collect()
}

/// Largest coefficient difference against the dense oracle over `cases`
/// random weighted fits.
pub fn regression_max_error(cases: usize) -> f64 {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let degree = [2, 1, 3, 0][case % 4];
        let n = 50;
        let xs: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let yz: Vec<(f64, f64)> = (0..n).map(|_| (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0))).collect();
        let ws: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..1.0)).collect();
        let fit = fit_weighted_polynomial(&xs, &yz, &ws, degree).unwrap();
        let oy = dense_normal_equations(&xs, &yz.iter().map(|p| p.0).collect::<Vec<_>>(), &ws, degree);
        let oz = dense_normal_equations(&xs, &yz.iter().map(|p| p.1).collect::<Vec<_>>(), &ws, degree);
        for d in 0..=degree {
            worst = worst.max((fit.coeffs_y[d] - oy[d]).abs()).max((fit.coeffs_z[d] - oz[d]).abs());
        }
    }
    worst
}

/// Roots of `det(C - lambda I)` by the trigonometric cubic formula, descending.
pub fn characteristic_roots(c: &Matrix3<f64>) -> [f64; 3] {
    let tr = c.trace();
    let minors = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)] + c[(0, 0)] * c[(2, 2)] - c[(0, 2)] * c[(2, 0)]
        + c[(1, 1)] * c[(2, 2)] - c[(1, 2)] * c[(2, 1)];
    let det = c.determinant();
    // lambda^3 - tr lambda^2 + minors lambda - det = 0; shift lambda = t + tr/3
    let p = minors - tr * tr / 3.0;
    let q = -2.0 * tr.powi(3) / 27.0 + tr * minors / 3.0 - det;
    let m = 2.0 * (-p / 3.0).max(0.0).sqrt();
    let arg = if m > 0.0 { (3.0 * q / (p * m)).clamp(-1.0, 1.0) } else { 0.0 };
    let theta = arg.acos() / 3.0;
    let mut roots = [0.0; 3];
    for (k, r) in roots.iter_mut().enumerate() {
        *r = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + tr / 3.0;
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

/// Largest eigenvalue difference against the characteristic roots over
/// `cases` random weighted covariances.
pub fn eigen_max_error(cases: usize) -> f64 {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let pts: Vec<Point3> = (0..64)
            .map(|_| [r.gen_range(-1.0..1.0) * 2.0, r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0) * 0.3])
            .collect();
        let ws: Vec<f64> = (0..64).map(|_| r.gen_range(0.0..1.0)).collect();
        let shape = weighted_covariance_shape(&pts, &ws).unwrap();
        let sw: f64 = ws.iter().sum();
        let mut mean = [0.0; 3];
        for (p, w) in pts.iter().zip(&ws) {
            for d in 0..3 {
                mean[d] += w * p[d] / sw;
            }
        }
        let c = Matrix3::from_fn(|a, b| {
            pts.iter().zip(&ws).map(|(p, w)| w * (p[a] - mean[a]) * (p[b] - mean[b])).sum::<f64>() / sw
        });
        let roots = characteristic_roots(&c);
        for d in 0..3 {
            worst = worst.max((shape.eigenvalues[d] - roots[d]).abs());
        }
    }
    worst
}

/// Textbook DBSCAN with an O(n^2) region query.
pub fn naive_dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<i64> {
    const UNSEEN: i64 = -2;
    let region = |i: usize| -> Vec<usize> {
        (0..points.len())
            .filter(|&j| (points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2) <= eps * eps)
            .collect()
    };
    let mut labels = vec![UNSEEN; points.len()];
    let mut visited = vec![false; points.len()];
    let mut cluster = 0;
    for i in 0..points.len() {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let mut seeds = region(i);
        if seeds.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster;
        let mut at = 0;
        while at < seeds.len() {
            let j = seeds[at];
            at += 1;
            if !visited[j] {
                visited[j] = true;
                let more = region(j);
                if more.len() >= min_pts {
                    seeds.extend(more);
                }
            }
            if labels[j] < 0 {
                labels[j] = cluster;
            }
        }
        cluster += 1;
    }
    labels
}

/// Number of random instances whose labels differ from the naive reference.
pub fn dbscan_mismatches(cases: usize) -> usize {
    let mut r = rng(6);
    let mut bad = 0;
    for _ in 0..cases {
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for _ in 0..r.gen_range(1..5) {
            let c = [r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)];
            for _ in 0..40 {
                pts.push([c[0] + r.gen_range(-0.5..0.5), c[1] + r.gen_range(-0.5..0.5)]);
            }
        }
        while pts.len() < 200 {
            pts.push([r.gen_range(-6.0..6.0), r.gen_range(-6.0..6.0)]);
        }
        let eps = r.gen_range(0.1..0.6);
        let min_pts = r.gen_range(1..8);
        let labels = dbscan(&pts, eps, min_pts);
        if labels != naive_dbscan(&pts, eps, min_pts) || labels.iter().any(|&l| l < NOISE) {
            bad += 1;
        }
    }
    bad
}

/// Number of (prediction, truth) pairs of length 10 whose metrics differ
/// from direct bit counting.
pub fn metrics_mismatches() -> usize {
    let n = 10;
    let mut bad = 0;
    for gt_bits in [0u32, 0b1111111111, 0b1010011100, 0b0000000001, 0b0110110011] {
        for pred_bits in 0u32..(1 << n) {
            let pred: Vec<bool> = (0..n).map(|i| pred_bits >> i & 1 == 1).collect();
            let gt: Vec<bool> = (0..n).map(|i| gt_bits >> i & 1 == 1).collect();
            let m = evaluate(&pred, &gt).unwrap();
            let tp = (pred_bits & gt_bits).count_ones() as usize;
            let fp = (pred_bits & !gt_bits & 0x3ff).count_ones() as usize;
            let fn_ = (!pred_bits & gt_bits & 0x3ff).count_ones() as usize;
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let ok = (m.tp, m.fp, m.fn_, m.tn) == (tp, fp, fn_, n - tp - fp - fn_)
                && m.precision == ratio(tp, tp + fp)
                && m.recall == ratio(tp, tp + fn_)
                && m.iou == ratio(tp, tp + fp + fn_);
            bad += usize::from(!ok);
        }
    }
    bad
}
