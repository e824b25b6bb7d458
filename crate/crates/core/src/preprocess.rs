//! Alignment and robust normalisation into the canonical frame: log along
//! x, median-centred, cross-section radius about 1.

use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::eigen::symmetric_eigen3;
use crate::error::{Error, Result};

const SCALE_EPS: f64 = 1e-12;

/// How the y/z and x coordinates are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// y and z share the radial scale, x has its own.
    #[default]
    SharedRadialScale,
    /// All three coordinates use the radial scale.
    SingleGlobalScale,
}

/// Everything needed to map normalised coordinates back to the input frame:
/// `p = R^T (u * s + medians) + centre`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub medians: [f64; 3],
    pub s_r: f64,
    pub s_x: f64,
    /// Row-major; maps input to aligned coordinates.
    pub rotation: [[f64; 3]; 3],
    /// Point the rotation was applied about.
    pub centre: [f64; 3],
    #[serde(default)]
    pub scale_mode: ScaleMode,
}

impl NormalizationRecord {
    pub fn identity() -> Self {
        Self {
            medians: [0.0; 3],
            s_r: 1.0,
            s_x: 1.0,
            rotation: IDENTITY,
            centre: [0.0; 3],
            scale_mode: ScaleMode::SharedRadialScale,
        }
    }
}

/// Rigid alignment found by PCA: `q = R (p - centre)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub rotation: [[f64; 3]; 3],
    pub centre: [f64; 3],
}

const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *hi;
    if v.len() % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

fn apply(rot: &[[f64; 3]; 3], v: Point3) -> Point3 {
    [
        rot[0][0] * v[0] + rot[0][1] * v[1] + rot[0][2] * v[2],
        rot[1][0] * v[0] + rot[1][1] * v[1] + rot[1][2] * v[2],
        rot[2][0] * v[0] + rot[2][1] * v[1] + rot[2][2] * v[2],
    ]
}

fn apply_transposed(rot: &[[f64; 3]; 3], v: Point3) -> Point3 {
    [
        rot[0][0] * v[0] + rot[1][0] * v[1] + rot[2][0] * v[2],
        rot[0][1] * v[0] + rot[1][1] * v[1] + rot[2][1] * v[2],
        rot[0][2] * v[0] + rot[1][2] * v[1] + rot[2][2] * v[2],
    ]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Rotates the centred cloud so its direction of largest variance becomes x.
///
/// The x axis is oriented so that the input point with the lowest x ends up
/// on the negative side; the frame is right-handed.
pub fn pca_align(cloud: &PointCloud) -> Result<(PointCloud, Alignment)> {
    cloud.require_non_empty()?;
    let n = cloud.len() as f64;
    let mut centre = [0.0; 3];
    for p in &cloud.points {
        for d in 0..3 {
            centre[d] += p[d] / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for p in &cloud.points {
        let d = [p[0] - centre[0], p[1] - centre[1], p[2] - centre[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[r][c] += d[r] * d[c] / n;
            }
        }
    }
    let shape = symmetric_eigen3(cov);
    let [l1, l2, _] = shape.eigenvalues;
    if !(l1 > 0.0) || l2 <= 1e-12 * l1 {
        return Err(Error::DegenerateCloud("covariance has rank below 2".into()));
    }
    let mut e1 = shape.eigenvectors[0];
    let lowest = cloud
        .points
        .iter()
        .min_by(|a, b| a[0].total_cmp(&b[0]))
        .expect("non-empty");
    let offset = [lowest[0] - centre[0], lowest[1] - centre[1], lowest[2] - centre[2]];
    if e1[0] * offset[0] + e1[1] * offset[1] + e1[2] * offset[2] > 0.0 {
        e1 = [-e1[0], -e1[1], -e1[2]];
    }
    let e2 = shape.eigenvectors[1];
    let e3 = cross(e1, e2);
    let rotation = [e1, e2, e3];
    let points = cloud
        .points
        .iter()
        .map(|p| apply(&rotation, [p[0] - centre[0], p[1] - centre[1], p[2] - centre[2]]))
        .collect();
    Ok((cloud.with_points(points), Alignment { rotation, centre }))
}

/// Median-centres the cloud and divides y/z by the median radial distance
/// from the centre line and x by the median absolute centred x.
pub fn normalize(cloud: &PointCloud, mode: ScaleMode) -> Result<(PointCloud, NormalizationRecord)> {
    normalize_aligned(cloud, mode, None)
}

fn normalize_aligned(
    cloud: &PointCloud,
    mode: ScaleMode,
    alignment: Option<Alignment>,
) -> Result<(PointCloud, NormalizationRecord)> {
    cloud.require_non_empty()?;
    let mut medians = [0.0; 3];
    for (d, m) in medians.iter_mut().enumerate() {
        let col: Vec<f64> = cloud.points.iter().map(|p| p[d]).collect();
        *m = median(&col);
    }
    let centred: Vec<Point3> = cloud
        .points
        .iter()
        .map(|p| [p[0] - medians[0], p[1] - medians[1], p[2] - medians[2]])
        .collect();
    let radial: Vec<f64> = centred.iter().map(|p| p[1].hypot(p[2])).collect();
    let s_r = median(&radial);
    if !(s_r > SCALE_EPS) {
        return Err(Error::ZeroScale("radial"));
    }
    let s_x = match mode {
        ScaleMode::SharedRadialScale => {
            let ax: Vec<f64> = centred.iter().map(|p| p[0].abs()).collect();
            let s = median(&ax);
            if !(s > SCALE_EPS) {
                return Err(Error::ZeroScale("length"));
            }
            s
        }
        ScaleMode::SingleGlobalScale => s_r,
    };
    let points = centred.iter().map(|p| [p[0] / s_x, p[1] / s_r, p[2] / s_r]).collect();
    let (rotation, centre) = match alignment {
        Some(a) => (a.rotation, a.centre),
        None => (IDENTITY, [0.0; 3]),
    };
    Ok((cloud.with_points(points), NormalizationRecord { medians, s_r, s_x, rotation, centre, scale_mode: mode }))
}

/// Optional PCA alignment followed by normalisation; the record covers both.
pub fn prepare(cloud: &PointCloud, align: bool, mode: ScaleMode) -> Result<(PointCloud, NormalizationRecord)> {
    if align {
        let (aligned, a) = pca_align(cloud)?;
        normalize_aligned(&aligned, mode, Some(a))
    } else {
        normalize_aligned(cloud, mode, None)
    }
}

/// Maps normalised coordinates back to the original frame.
pub fn denormalize(points: &[Point3], record: &NormalizationRecord) -> Vec<Point3> {
    points
        .iter()
        .map(|u| {
            let q = [
                u[0] * record.s_x + record.medians[0],
                u[1] * record.s_r + record.medians[1],
                u[2] * record.s_r + record.medians[2],
            ];
            let p = apply_transposed(&record.rotation, q);
            [p[0] + record.centre[0], p[1] + record.centre[1], p[2] + record.centre[2]]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let cloud = PointCloud::unlabeled("c", vec![[1.0, 2.0, 3.0]; 10]).unwrap();
        assert!(matches!(pca_align(&cloud), Err(Error::DegenerateCloud(_))));
        assert!(matches!(normalize(&cloud, ScaleMode::default()), Err(Error::ZeroScale(_))));
    }

    #[test]
    fn identity_record_is_identity_map() {
        let pts = vec![[1.0, -2.0, 0.5], [3.0, 4.0, -5.0]];
        assert_eq!(denormalize(&pts, &NormalizationRecord::identity()), pts);
    }

    #[test]
    fn record_json_layout() {
        let v = serde_json::to_value(NormalizationRecord::identity()).unwrap();
        assert_eq!(v["rotation"][1][1], 1.0);
        assert_eq!(v["medians"].as_array().unwrap().len(), 3);
        assert!(v.get("s_r").is_some() && v.get("s_x").is_some());
    }
}
