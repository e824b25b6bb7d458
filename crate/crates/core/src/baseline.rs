//! Classical cross-section pipeline used for comparison: slice along x,
//! keep the dominant DBSCAN cluster of each slice, fit a circle to it and
//! accept points close to that circle.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::regression::solve_symmetric;

/// Cluster label for noise points.
pub const NOISE: i64 = -1;

/// Density-based clustering in the plane.
///
/// A point is a core point when at least `min_pts` points (itself included)
/// lie within `eps`. Points are visited in index order and neighbours are
/// expanded in index order, so border points go to the first cluster that
/// reaches them.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<i64> {
    let grid = Grid::new(points, eps);
    let mut labels = vec![NOISE; points.len()];
    let mut visited = vec![false; points.len()];
    let mut cluster = 0i64;
    for i in 0..points.len() {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seeds = grid.within(points, i, eps);
        if seeds.len() < min_pts {
            continue;
        }
        labels[i] = cluster;
        let mut queue: VecDeque<usize> = seeds.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = cluster;
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nbrs = grid.within(points, j, eps);
            if nbrs.len() >= min_pts {
                queue.extend(nbrs);
            }
        }
        cluster += 1;
    }
    labels
}

struct Grid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[[f64; 2]], eps: f64) -> Self {
        let cell = if eps > 0.0 { eps } else { 1.0 };
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(cell, p)).or_default().push(i);
        }
        Self { cell, cells }
    }

    fn key(cell: f64, p: &[f64; 2]) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    /// Indices within `eps` of point `i` (itself included), ascending.
    fn within(&self, points: &[[f64; 2]], i: usize, eps: f64) -> Vec<usize> {
        let p = points[i];
        let (cx, cy) = Self::key(self.cell, &p);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(members) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &j in members {
                        let q = points[j];
                        if (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= eps * eps {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center_y: f64,
    pub center_z: f64,
    pub radius: f64,
}

/// Algebraic (Kasa) least-squares circle: minimises
/// `sum w (y^2 + z^2 + D y + E z + F)^2`.
pub fn fit_circle(points: &[[f64; 2]], weights: Option<&[f64]>) -> Result<Circle> {
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(Error::LengthMismatch { left: points.len(), right: w.len() });
        }
    }
    if points.len() < 3 {
        return Err(Error::CollinearPoints);
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..points.len()).map(weight).sum();
    if !(sw > 0.0) {
        return Err(Error::AllWeightsZero);
    }
    // centring keeps the system well conditioned far from the origin
    let mut c = [0.0; 2];
    for (i, p) in points.iter().enumerate() {
        c[0] += weight(i) * p[0] / sw;
        c[1] += weight(i) * p[1] / sw;
    }
    let mut m = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (i, p) in points.iter().enumerate() {
        let (y, z) = (p[0] - c[0], p[1] - c[1]);
        let row = [y, z, 1.0];
        let rhs = -(y * y + z * z);
        let w = weight(i);
        for r in 0..3 {
            b[r] += w * row[r] * rhs;
            for col in 0..3 {
                m[r][col] += w * row[r] * row[col];
            }
        }
    }
    let [d, e, f] = solve_symmetric(m, b).ok_or(Error::CollinearPoints)?;
    let (cy, cz) = (-d / 2.0, -e / 2.0);
    let r2 = cy * cy + cz * cz - f;
    if !(r2 > 0.0) {
        return Err(Error::CollinearPoints);
    }
    Ok(Circle { center_y: cy + c[0], center_z: cz + c[1], radius: r2.sqrt() })
}

/// Rule for picking the log's cluster in a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterStrategy {
    /// Most members.
    #[default]
    Largest,
    /// Most core points.
    HighestCoreDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub slice_width: f64,
    pub eps: f64,
    pub min_pts: usize,
    pub dist_threshold: f64,
    pub strategy: ClusterStrategy,
}

impl Default for BaselineParams {
    /// Tuned once on the default synthetic suite (normalised, ~3000 surface
    /// points per cloud) and frozen.
    fn default() -> Self {
        Self { slice_width: 0.1, eps: 0.4, min_pts: 5, dist_threshold: 0.1, strategy: ClusterStrategy::Largest }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        let finite = self.slice_width.is_finite() && self.eps.is_finite() && self.dist_threshold.is_finite();
        if !finite || !(self.slice_width > 0.0) || !(self.eps > 0.0) || self.min_pts == 0 || self.dist_threshold < 0.0 {
            return Err(Error::InvalidConfig(format!("invalid baseline parameters: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineDiagnostics {
    pub slices: usize,
    pub empty_slices: usize,
    /// Slices without a usable cluster or circle.
    pub failed_slices: usize,
    pub circles: Vec<(f64, Circle)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub mask: Vec<bool>,
    pub diagnostics: BaselineDiagnostics,
}

/// Splits the x extent into `round(extent / slice_width)` equal slices and
/// keeps, per slice, the points within `dist_threshold` of the circle fitted
/// to the chosen cluster.
pub fn baseline_segment(cloud: &PointCloud, params: &BaselineParams) -> Result<BaselineOutput> {
    params.validate()?;
    let n = cloud.len();
    let mut mask = vec![false; n];
    let mut diag = BaselineDiagnostics::default();
    if n == 0 {
        return Ok(BaselineOutput { mask, diagnostics: diag });
    }
    let lo = cloud.points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = cloud.points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    // equal slices spanning the extent, so no sliver is left at the end
    let count = ((hi - lo) / params.slice_width).round().max(1.0);
    let width = if hi > lo { (hi - lo) / count } else { params.slice_width };
    let last = count as i64 - 1;
    let mut slices: std::collections::BTreeMap<i64, Vec<usize>> = std::collections::BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        slices.entry((((p[0] - lo) / width).floor() as i64).min(last)).or_default().push(i);
    }
    diag.slices = count as usize;
    diag.empty_slices = diag.slices - slices.len();

    for (s, members) in &slices {
        let pts: Vec<[f64; 2]> = members.iter().map(|&i| [cloud.points[i][1], cloud.points[i][2]]).collect();
        let labels = dbscan(&pts, params.eps, params.min_pts);
        let Some(best) = pick_cluster(&pts, &labels, params) else {
            diag.failed_slices += 1;
            continue;
        };
        let cluster: Vec<[f64; 2]> = pts.iter().zip(&labels).filter(|(_, &l)| l == best).map(|(p, _)| *p).collect();
        let Ok(circle) = fit_circle(&cluster, None) else {
            diag.failed_slices += 1;
            continue;
        };
        for (&i, p) in members.iter().zip(&pts) {
            let d = (p[0] - circle.center_y).hypot(p[1] - circle.center_z);
            if (d - circle.radius).abs() <= params.dist_threshold {
                mask[i] = true;
            }
        }
        diag.circles.push((lo + (*s as f64 + 0.5) * width, circle));
    }
    Ok(BaselineOutput { mask, diagnostics: diag })
}

fn pick_cluster(pts: &[[f64; 2]], labels: &[i64], params: &BaselineParams) -> Option<i64> {
    let clusters = labels.iter().copied().max()?;
    if clusters < 0 {
        return None;
    }
    let mut score = vec![0usize; clusters as usize + 1];
    match params.strategy {
        ClusterStrategy::Largest => {
            for &l in labels.iter().filter(|&&l| l >= 0) {
                score[l as usize] += 1;
            }
        }
        ClusterStrategy::HighestCoreDensity => {
            let grid = Grid::new(pts, params.eps);
            for (i, &l) in labels.iter().enumerate() {
                if l >= 0 && grid.within(pts, i, params.eps).len() >= params.min_pts {
                    score[l as usize] += 1;
                }
            }
        }
    }
    // ties go to the lowest label
    let best = score.iter().enumerate().fold(0, |b, (i, &s)| if s > score[b] { i } else { b });
    Some(best as i64)
}
