//! Invariants checked on random inputs.

#![allow(clippy::needless_range_loop)]

use logseg::baseline::{dbscan, fit_circle, NOISE};
use logseg::eigen::{weighted_covariance, weighted_covariance_shape};
use logseg::io::{format_ply, format_xyz, parse_ply, parse_xyz};
use logseg::knn::build_neighborhoods;
use logseg::loss::{centreline_points, LossProblem, LossWeights, SegmentationState};
use logseg::metrics::evaluate;
use logseg::preprocess::{denormalize, normalize, pca_align, prepare, ScaleMode};
use logseg::regression::weighted_mean;
use logseg::synth::{generate, SyntheticLogSpec};
use logseg::{Point3, PointCloud};
use proptest::prelude::*;

fn point(range: f64) -> impl Strategy<Value = Point3> {
    [-range..range, -range..range, -range..range]
}

/// A rough open tube along x with random offsets and logits.
fn tube(n: usize) -> impl Strategy<Value = (Vec<Point3>, Vec<f64>, Vec<[f64; 2]>)> {
    (
        prop::collection::vec((0.0..4.0f64, 0.0..std::f64::consts::TAU, 0.8..1.2f64), n),
        prop::collection::vec(-4.0..4.0f64, n),
        prop::collection::vec([-1.5..1.5f64, -1.5..1.5f64], n),
    )
        .prop_map(|(cyl, logits, rho)| {
            let pts = cyl.into_iter().map(|(x, t, r)| [x, r * t.cos(), r * t.sin()]).collect();
            (pts, logits, rho)
        })
}

fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca, sb, cb, sc, cc) = (a.sin(), a.cos(), b.sin(), b.cos(), c.sin(), c.cos());
    [
        [cb * cc, -cb * sc, sb],
        [sa * sb * cc + ca * sc, -sa * sb * sc + ca * cc, -sa * cb],
        [-ca * sb * cc + sa * sc, ca * sb * sc + sa * cc, ca * cb],
    ]
}

fn rotate(r: &[[f64; 3]; 3], p: Point3) -> Point3 {
    [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighted_mean_ignores_weight_scale(
        vw in prop::collection::vec((-100.0..100.0f64, 0.01..10.0f64), 1..50),
        c in 0.001..1000.0f64,
    ) {
        let (v, w): (Vec<f64>, Vec<f64>) = vw.into_iter().unzip();
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        let a = weighted_mean(&v, &w).unwrap();
        let b = weighted_mean(&v, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn eigenvalues_sum_to_trace_and_survive_rotation(
        pts in prop::collection::vec(point(3.0), 4..40),
        angles in [0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64],
    ) {
        let w = vec![1.0; pts.len()];
        let shape = weighted_covariance_shape(&pts, &w).unwrap();
        let (_, cov, _) = weighted_covariance(&pts, &w).unwrap();
        let trace = cov[0][0] + cov[1][1] + cov[2][2];
        prop_assert!((shape.eigenvalues.iter().sum::<f64>() - trace).abs() < 1e-9);
        prop_assert!(shape.eigenvalues[0] >= shape.eigenvalues[1] && shape.eigenvalues[1] >= shape.eigenvalues[2]);
        prop_assert!(shape.eigenvalues[2] >= 0.0);
        let v = shape.smallest_eigenvector;
        prop_assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-9);
        let r = rotation(angles[0], angles[1], angles[2]);
        let rotated: Vec<Point3> = pts.iter().map(|&p| rotate(&r, p)).collect();
        let other = weighted_covariance_shape(&rotated, &w).unwrap();
        for d in 0..3 {
            prop_assert!((shape.eigenvalues[d] - other.eigenvalues[d]).abs() < 1e-8);
        }
    }

    #[test]
    fn neighborhoods_follow_point_permutation(
        pts in prop::collection::vec(point(1.0), 20..80),
        seed in any::<u64>(),
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let n = pts.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let permuted: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
        let a = build_neighborhoods(&PointCloud::unlabeled("a", pts).unwrap(), 6).unwrap();
        let b = build_neighborhoods(&PointCloud::unlabeled("b", permuted).unwrap(), 6).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            let mut mine: Vec<usize> = a.of(i).to_vec();
            let mut theirs: Vec<usize> = b.of(j).iter().map(|&q| perm[q]).collect();
            mine.sort_unstable();
            theirs.sort_unstable();
            prop_assert_eq!(mine, theirs);
        }
    }

    #[test]
    fn loss_terms_stay_in_range((pts, logits, rho) in tube(80)) {
        let cloud = PointCloud::unlabeled("t", pts).unwrap();
        let nb = build_neighborhoods(&cloud, 8).unwrap();
        let state = SegmentationState::new(logits, rho).unwrap();
        let b = LossProblem::new(&cloud, &nb, LossWeights::default(), 1).evaluate(&state, None).unwrap();
        prop_assert!(b.fit >= 0.0 && b.rho >= 0.0 && b.sigma >= 0.0);
        prop_assert!((0.0..=2.0).contains(&b.plane));
        prop_assert!((0.0..=1.0).contains(&b.normal));
        prop_assert!((0.0..=1.0).contains(&b.weights));
        let dot: f64 = LossWeights::default().to_array().iter().zip(b.terms()).map(|(l, t)| l * t).sum();
        prop_assert!((b.total - dot).abs() < 1e-12);
    }

    #[test]
    fn loss_scales_with_the_cloud((pts, logits, rho) in tube(60), c in 0.1..10.0f64) {
        let cloud = PointCloud::unlabeled("t", pts.clone()).unwrap();
        let scaled_cloud = PointCloud::unlabeled("s", pts.iter().map(|p| p.map(|v| v * c)).collect()).unwrap();
        let nb = build_neighborhoods(&cloud, 8).unwrap();
        let state = SegmentationState::new(logits.clone(), rho.clone()).unwrap();
        let scaled_state = SegmentationState::new(logits, rho.iter().map(|r| [r[0] * c, r[1] * c]).collect()).unwrap();
        let lw = LossWeights::default();
        let a = LossProblem::new(&cloud, &nb, lw, 1).evaluate(&state, None).unwrap();
        let b = LossProblem::new(&scaled_cloud, &nb, lw, 1).evaluate(&scaled_state, None).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
        prop_assert!(close(a.fit * c, b.fit));
        prop_assert!(close(a.rho * c, b.rho));
        prop_assert!(close(a.sigma * c * c, b.sigma));
        prop_assert!(close(a.plane, b.plane));
        prop_assert!(close(a.normal, b.normal));
        prop_assert!(close(a.weights, b.weights));
    }

    #[test]
    fn weighted_terms_ignore_weight_scale((pts, logits, rho) in tube(60), c in 0.05..0.95f64) {
        let cloud = PointCloud::unlabeled("t", pts).unwrap();
        let nb = build_neighborhoods(&cloud, 8).unwrap();
        let w: Vec<f64> = SegmentationState::new(logits, rho.clone()).unwrap().weights();
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        let problem = LossProblem::new(&cloud, &nb, LossWeights::default(), 1);
        let a = problem.evaluate_with_weights(&w, &rho, None).unwrap();
        let b = problem.evaluate_with_weights(&scaled, &rho, None).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
        prop_assert!(close(a.fit, b.fit) && close(a.rho, b.rho) && close(a.sigma, b.sigma));
        prop_assert!(close(a.plane, b.plane) && close(a.normal, b.normal));
        prop_assert!(!close(a.weights, b.weights));
    }

    #[test]
    fn centreline_offsets_only_touch_y_and_z((pts, logits, rho) in tube(30)) {
        let cloud = PointCloud::unlabeled("t", pts).unwrap();
        let state = SegmentationState::new(logits, rho).unwrap();
        for ((c, p), r) in centreline_points(&cloud, &state).unwrap().iter().zip(&cloud.points).zip(&state.rho) {
            prop_assert_eq!(*c, [p[0], p[1] + r[0], p[2] + r[1]]);
        }
    }

    #[test]
    fn circle_fit_is_translation_equivariant(
        centre in [-5.0..5.0f64, -5.0..5.0f64],
        radius in 0.5..5.0f64,
        shift in [-100.0..100.0f64, -100.0..100.0f64],
        angles in prop::collection::vec(0.0..6.3f64, 8..40),
        noise in prop::collection::vec(-0.05..0.05f64, 40),
    ) {
        let pts: Vec<[f64; 2]> = angles
            .iter()
            .zip(&noise)
            .map(|(&t, &e)| [centre[0] + (radius + e) * t.cos(), centre[1] + (radius + e) * t.sin()])
            .collect();
        let moved: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
        if let (Ok(a), Ok(b)) = (fit_circle(&pts, None), fit_circle(&moved, None)) {
            prop_assert!((a.center_y + shift[0] - b.center_y).abs() < 1e-9);
            prop_assert!((a.center_z + shift[1] - b.center_z).abs() < 1e-9);
            prop_assert!((a.radius - b.radius).abs() < 1e-9);
        }
    }

    #[test]
    fn dbscan_labels_partition_points(
        pts in prop::collection::vec([-3.0..3.0f64, -3.0..3.0f64], 0..150),
        eps in 0.05..1.0f64,
        min_pts in 1usize..8,
    ) {
        let labels = dbscan(&pts, eps, min_pts);
        prop_assert_eq!(labels.len(), pts.len());
        let max = labels.iter().copied().max().unwrap_or(NOISE);
        prop_assert!(labels.iter().all(|&l| l >= NOISE));
        for c in 0..=max {
            prop_assert!(labels.contains(&c), "cluster ids are contiguous");
        }
        if min_pts == 1 {
            prop_assert!(labels.iter().all(|&l| l != NOISE));
        }
    }

    #[test]
    fn normalisation_round_trips(
        pts in prop::collection::vec(point(50.0), 10..60),
        shift in point(1000.0),
        align in any::<bool>(),
        single in any::<bool>(),
    ) {
        let moved: Vec<Point3> = pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect();
        let cloud = PointCloud::unlabeled("n", moved.clone()).unwrap();
        let mode = if single { ScaleMode::SingleGlobalScale } else { ScaleMode::SharedRadialScale };
        let (norm, record) = prepare(&cloud, align, mode).unwrap();
        let back = denormalize(&norm.points, &record);
        let scale = moved.iter().flat_map(|p| p.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in back.iter().zip(&moved) {
            for d in 0..3 {
                prop_assert!((a[d] - b[d]).abs() <= 1e-12 * scale, "{} vs {}", a[d], b[d]);
            }
        }
    }

    #[test]
    fn normalisation_removes_translation_and_is_idempotent(
        pts in prop::collection::vec(point(10.0), 11..60),
        shift in point(100.0),
    ) {
        let base = PointCloud::unlabeled("a", pts.clone()).unwrap();
        let moved = PointCloud::unlabeled("b", pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect()).unwrap();
        let (na, _) = normalize(&base, ScaleMode::default()).unwrap();
        let (nb, _) = normalize(&moved, ScaleMode::default()).unwrap();
        for (a, b) in na.points.iter().zip(&nb.points) {
            for d in 0..3 {
                prop_assert!((a[d] - b[d]).abs() < 1e-9);
            }
        }
        let (_, again) = normalize(&na, ScaleMode::default()).unwrap();
        prop_assert!((again.s_r - 1.0).abs() < 1e-9 && (again.s_x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_alignment_decorrelates(
        pts in prop::collection::vec([-5.0..5.0f64, -1.0..1.0f64, -0.3..0.3f64], 10..80),
        angles in [0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64],
    ) {
        let r = rotation(angles[0], angles[1], angles[2]);
        let cloud = PointCloud::unlabeled("p", pts.iter().map(|&p| rotate(&r, p)).collect()).unwrap();
        let Ok((aligned, _)) = pca_align(&cloud) else { return Ok(()) };
        let (_, cov, _) = weighted_covariance(&aligned.points, &vec![1.0; aligned.len()]).unwrap();
        let trace = cov[0][0] + cov[1][1] + cov[2][2];
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    prop_assert!(cov[a][b].abs() <= 1e-6 * trace);
                }
            }
        }
        prop_assert!(cov[0][0] >= cov[1][1] && cov[1][1] >= cov[2][2] - 1e-12 * trace);
    }

    #[test]
    fn iou_never_exceeds_precision_or_recall(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200),
        seed in any::<u64>(),
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let (pred, gt): (Vec<bool>, Vec<bool>) = pairs.iter().cloned().unzip();
        let m = evaluate(&pred, &gt).unwrap();
        prop_assert!(m.iou <= m.precision && m.iou <= m.recall);
        prop_assert_eq!(m.n(), pred.len());
        let mut shuffled = pairs;
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (sp, sg): (Vec<bool>, Vec<bool>) = shuffled.into_iter().unzip();
        prop_assert_eq!(evaluate(&sp, &sg).unwrap(), m);
    }

    #[test]
    fn files_round_trip_exactly(
        pts in prop::collection::vec([any::<f64>(), any::<f64>(), any::<f64>()], 0..40),
        labels in prop::collection::vec(any::<bool>(), 40),
    ) {
        let pts: Vec<Point3> = pts.into_iter().filter(|p| p.iter().all(|v| v.is_finite())).collect();
        let mask = &labels[..pts.len()];
        let cloud = PointCloud::unlabeled("f", pts.clone()).unwrap();
        let ply = parse_ply(&format_ply(&cloud, Some(mask)).unwrap(), "f").unwrap();
        prop_assert_eq!(&ply.points, &pts);
        prop_assert_eq!(ply.labels.as_deref(), Some(mask));
        let xyz = parse_xyz(&format_xyz(&cloud, None).unwrap(), "f").unwrap();
        prop_assert_eq!(&xyz.points, &pts);
        prop_assert!(xyz.labels.is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthetic_logs_follow_their_radius_law(
        taper in 0.0..0.2f64,
        ellipticity in 1.0..1.6f64,
        coeffs in [[-0.5..0.5f64, -0.5..0.5f64], [-0.2..0.2f64, -0.2..0.2f64], [-0.05..0.05f64, -0.05..0.05f64]],
        seed in any::<u64>(),
    ) {
        let mut spec = SyntheticLogSpec::cylinder(400, 4.0, seed);
        spec.taper_rate = taper;
        spec.ellipticity = ellipticity;
        spec.centreline_coeffs = coeffs;
        let log = generate(&spec).unwrap();
        prop_assert_eq!(&generate(&spec).unwrap().cloud, &log.cloud);
        prop_assert!(log.cloud.labels.as_ref().unwrap().iter().all(|&l| l));
        for p in &log.cloud.points {
            let (cy, cz) = log.centreline.eval(p[0]);
            let (dy, dz) = (p[1] - cy, p[2] - cz);
            let theta = dz.atan2(dy);
            let expected = spec.radius_at(p[0]) * spec.ellipse_factor(theta);
            prop_assert!((dy.hypot(dz) - expected).abs() < 1e-9, "{} vs {}", dy.hypot(dz), expected);
        }
    }
}
