//! Library results checked against slow, independent reference
//! implementations.

mod common;

use common::*;
use logseg::eigen::{weighted_covariance, weighted_covariance_shape};
use logseg::knn::build_neighborhoods;
use logseg::preprocess::median;
use logseg::regression::{evaluate_curve, fit_weighted_polynomial, CurveFit};
use logseg::segment::initialize_state;
use logseg::{Point3, PointCloud};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn polynomial_fit_matches_dense_normal_equations() {
    let worst = regression_max_error(100);
    assert!(worst < 1e-9, "max coefficient error {worst:e}");
}

#[test]
fn unit_weights_give_ordinary_least_squares() {
    let mut r = rng(2);
    let xs: Vec<f64> = (0..40).map(|_| r.gen_range(-3.0..3.0)).collect();
    let yz: Vec<(f64, f64)> = xs.iter().map(|&x| (0.5 * x * x - x + r.gen_range(-0.1..0.1), x + 1.0)).collect();
    let fit = fit_weighted_polynomial(&xs, &yz, &[1.0; 40], 2).unwrap();
    let x = DMatrix::from_fn(40, 3, |i, c| xs[i].powi(c as i32));
    let y = DMatrix::from_fn(40, 1, |i, _| yz[i].0);
    let ols = x.svd(true, true).solve(&y, 1e-14).unwrap();
    for d in 0..3 {
        assert!((fit.coeffs_y[d] - ols[d]).abs() < 1e-9);
    }
}

#[test]
fn curve_evaluation_matches_power_sums() {
    let mut r = rng(3);
    for _ in 0..50 {
        let degree = r.gen_range(0..=3);
        let cy: Vec<f64> = (0..=degree).map(|_| r.gen_range(-2.0..2.0)).collect();
        let cz: Vec<f64> = (0..=degree).map(|_| r.gen_range(-2.0..2.0)).collect();
        let fit = CurveFit::new(cy.clone(), cz.clone()).unwrap();
        let xs: Vec<f64> = (0..20).map(|_| r.gen_range(-2.0..2.0)).collect();
        for (x, (y, z)) in xs.iter().zip(evaluate_curve(&fit, &xs)) {
            let ny: f64 = cy.iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum();
            let nz: f64 = cz.iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum();
            assert!((y - ny).abs() < 1e-12 && (z - nz).abs() < 1e-12);
        }
    }
}

#[test]
fn covariance_eigenvalues_match_characteristic_roots() {
    let worst = eigen_max_error(100);
    assert!(worst < 1e-8, "max eigenvalue error {worst:e}");
    let mut r = rng(9);
    let pts: Vec<Point3> = (0..30).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
    let shape = weighted_covariance_shape(&pts, &[1.0; 30]).unwrap();
    let (_, cov, _) = weighted_covariance(&pts, &[1.0; 30]).unwrap();
    let trace = cov[0][0] + cov[1][1] + cov[2][2];
    assert!((shape.eigenvalues.iter().sum::<f64>() - trace).abs() < 1e-12);
}

fn brute_force_knn(points: &[Point3], k: usize) -> Vec<Vec<usize>> {
    (0..points.len())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| ((0..3).map(|c| (points[i][c] - points[j][c]).powi(2)).sum(), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

#[test]
fn knn_matches_brute_force() {
    let mut r = rng(5);
    let pts: Vec<Point3> = (0..500).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
    let cloud = PointCloud::unlabeled("u", pts.clone()).unwrap();
    let nb = build_neighborhoods(&cloud, 16).unwrap();
    for (i, expected) in brute_force_knn(&pts, 16).into_iter().enumerate() {
        assert_eq!(nb.of(i), expected.as_slice(), "point {i}");
    }
}

#[test]
fn knn_on_a_lattice_with_many_ties() {
    let pts: Vec<Point3> = (0..125).map(|i| [(i % 5) as f64, ((i / 5) % 5) as f64, (i / 25) as f64]).collect();
    let cloud = PointCloud::unlabeled("g", pts.clone()).unwrap();
    let nb = build_neighborhoods(&cloud, 10).unwrap();
    for (i, expected) in brute_force_knn(&pts, 10).into_iter().enumerate() {
        assert_eq!(nb.of(i), expected.as_slice());
    }
}

#[test]
fn dbscan_matches_naive_reference() {
    assert_eq!(dbscan_mismatches(20), 0);
}

#[test]
fn metrics_match_enumeration() {
    assert_eq!(metrics_mismatches(), 0);
}

#[test]
fn initial_offsets_match_sorted_slice_medians() {
    let mut r = rng(7);
    let pts: Vec<Point3> = (0..2000)
        .map(|_| {
            let x: f64 = r.gen_range(-2.0..2.0);
            let t: f64 = r.gen_range(0.0..std::f64::consts::TAU);
            [x, 0.3 * x + t.cos(), -0.1 + t.sin()]
        })
        .collect();
    let cloud = PointCloud::unlabeled("s", pts.clone()).unwrap();
    let state = initialize_state(&cloud).unwrap();
    let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let slices = 32;
    let sorted_median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    };
    for s in 0..slices {
        let members: Vec<usize> = (0..pts.len())
            .filter(|&i| {
                let k = (((pts[i][0] - lo) / ((hi - lo) / slices as f64)) as usize).min(slices - 1);
                k == s
            })
            .collect();
        let my = sorted_median(members.iter().map(|&i| pts[i][1]).collect());
        let mz = sorted_median(members.iter().map(|&i| pts[i][2]).collect());
        for &i in &members {
            assert_eq!(state.rho[i], [my - pts[i][1], mz - pts[i][2]]);
        }
    }
    assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
}
