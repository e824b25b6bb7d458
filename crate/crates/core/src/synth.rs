//! Labelled synthetic log point clouds.
//!
//! Surface points are drawn on a tapered, possibly elliptical and curved
//! tube; outlier models append ambient clutter, periodic railing clusters
//! under the log, or a thin shell of near-surface noise.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::regression::CurveFit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierModel {
    /// Uniform clutter in the log's bounding box grown by `inflation`
    /// base radii, kept only where it is at least `min_radial_factor` local
    /// radii away from the centreline. `fraction` is of the final cloud.
    Ambient {
        fraction: f64,
        inflation: f64,
        #[serde(default = "default_min_radial_factor")]
        min_radial_factor: f64,
    },
    /// Clusters of `cluster_size` points at every multiple of `period` along
    /// x, `offset` base radii below the surface, spread over a box of
    /// half-size `extent` base radii.
    Railing {
        period: f64,
        offset: f64,
        cluster_size: usize,
        #[serde(default = "default_railing_extent")]
        extent: f64,
    },
    /// Points `offset` base radii outside the surface. `fraction` is of the
    /// final cloud.
    NearSurface { fraction: f64, offset: f64 },
}

fn default_min_radial_factor() -> f64 {
    1.5
}

fn default_railing_extent() -> f64 {
    0.15
}

fn default_bump_width() -> f64 {
    0.1
}

fn default_coverage() -> f64 {
    360.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLogSpec {
    pub n_surface: usize,
    pub length: f64,
    pub base_radius: f64,
    /// Radius decrease per unit length.
    #[serde(default)]
    pub taper_rate: f64,
    /// `(y, z)` coefficients of the centreline for powers 0, 1, 2 of x.
    #[serde(default)]
    pub centreline_coeffs: [[f64; 2]; 3],
    /// Ratio of the cross-section axes (>= 1), area preserving.
    #[serde(default = "one")]
    pub ellipticity: f64,
    /// Uniform radial noise in `[-amp, amp]`.
    #[serde(default)]
    pub roughness_amp: f64,
    #[serde(default)]
    pub bump_count: usize,
    #[serde(default)]
    pub bump_amp: f64,
    /// Gaussian width of a bump, in base radii.
    #[serde(default = "default_bump_width")]
    pub bump_width: f64,
    /// Scanned arc in degrees, centred on +z.
    #[serde(default = "default_coverage")]
    pub angular_coverage: f64,
    #[serde(default)]
    pub outlier_models: Vec<OutlierModel>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SyntheticLogSpec {
    /// Straight unit-radius cylinder without noise or outliers.
    pub fn cylinder(n_surface: usize, length: f64, seed: u64) -> Self {
        Self {
            n_surface,
            length,
            base_radius: 1.0,
            taper_rate: 0.0,
            centreline_coeffs: [[0.0; 2]; 3],
            ellipticity: 1.0,
            roughness_amp: 0.0,
            bump_count: 0,
            bump_amp: 0.0,
            bump_width: default_bump_width(),
            angular_coverage: 360.0,
            outlier_models: Vec::new(),
            seed,
        }
    }

    /// Parses and validates a JSON spec.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_surface == 0 {
            return bad("n_surface must be positive");
        }
        if !(self.length > 0.0) || !(self.base_radius > 0.0) {
            return bad("length and base_radius must be positive");
        }
        if !(self.base_radius - self.taper_rate * self.length > 0.0) || self.taper_rate < 0.0 {
            return bad("radius must stay positive along the log (base_radius - taper_rate * length > 0)");
        }
        if !(self.ellipticity >= 1.0) {
            return bad("ellipticity must be >= 1");
        }
        if !(self.angular_coverage > 0.0 && self.angular_coverage <= 360.0) {
            return bad("angular_coverage must be in (0, 360]");
        }
        if self.roughness_amp < 0.0 || self.bump_amp < 0.0 || !(self.bump_width > 0.0) {
            return bad("roughness and bump parameters must be non-negative");
        }
        let mut total_fraction = 0.0;
        for m in &self.outlier_models {
            match *m {
                OutlierModel::Ambient { fraction, inflation, min_radial_factor } => {
                    if !(0.0..1.0).contains(&fraction) || inflation < 0.0 || min_radial_factor < 0.0 {
                        return bad("ambient outlier parameters out of range");
                    }
                    if (1.0 + inflation) * std::f64::consts::SQRT_2 <= min_radial_factor * self.ellipticity.sqrt()
                        && fraction > 0.0
                    {
                        return bad("ambient box too small for the minimum radial distance");
                    }
                    total_fraction += fraction;
                }
                OutlierModel::NearSurface { fraction, offset } => {
                    if !(0.0..1.0).contains(&fraction) || offset < 0.0 {
                        return bad("near-surface outlier parameters out of range");
                    }
                    total_fraction += fraction;
                }
                OutlierModel::Railing { period, offset, extent, .. } => {
                    if !(period > 0.0) || extent < 0.0 || offset <= extent {
                        return bad("railing needs period > 0 and offset > extent >= 0");
                    }
                    if self.length / period > 1e6 {
                        return bad("railing period too small for the log length");
                    }
                }
            }
        }
        if total_fraction >= 1.0 {
            return bad("outlier fractions must sum below 1");
        }
        Ok(())
    }

    pub fn radius_at(&self, x: f64) -> f64 {
        self.base_radius - self.taper_rate * x
    }

    /// Area-preserving ellipse factor at angle `theta`.
    pub fn ellipse_factor(&self, theta: f64) -> f64 {
        let a = self.ellipticity.sqrt();
        let b = 1.0 / a;
        a * b / ((b * theta.cos()).powi(2) + (a * theta.sin()).powi(2)).sqrt()
    }

    pub fn centreline(&self) -> CurveFit {
        let c = &self.centreline_coeffs;
        CurveFit {
            degree: 2,
            coeffs_y: vec![c[0][0], c[1][0], c[2][0]],
            coeffs_z: vec![c[0][1], c[1][1], c[2][1]],
        }
    }

    fn outlier_count(&self, fraction: f64) -> usize {
        (fraction / (1.0 - fraction) * self.n_surface as f64).round() as usize
    }
}

/// A generated cloud plus its ground-truth centreline.
#[derive(Debug, Clone)]
pub struct SyntheticLog {
    pub cloud: PointCloud,
    pub centreline: CurveFit,
}

struct Bump {
    x: f64,
    theta: f64,
}

/// Draws a labelled cloud from `spec`; fully determined by `spec.seed`.
pub fn generate(spec: &SyntheticLogSpec) -> Result<SyntheticLog> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centre = spec.centreline();
    let r0 = spec.base_radius;
    let on_axis = |x: f64, theta: f64, r: f64| -> Point3 {
        let (cy, cz) = centre.eval(x);
        [x, cy + r * theta.cos(), cz + r * theta.sin()]
    };

    let bumps: Vec<Bump> = (0..spec.bump_count)
        .map(|_| Bump { x: rng.gen_range(0.0..spec.length), theta: rng.gen_range(0.0..TAU) })
        .collect();
    let half_cov = spec.angular_coverage.to_radians() / 2.0;
    let sigma = spec.bump_width * r0;

    let mut points = Vec::with_capacity(spec.n_surface);
    let mut labels = Vec::with_capacity(spec.n_surface);
    for _ in 0..spec.n_surface {
        let x = rng.gen_range(0.0..spec.length);
        let theta = PI / 2.0 + if half_cov >= PI { rng.gen_range(-PI..PI) } else { rng.gen_range(-half_cov..=half_cov) };
        let mut r = spec.radius_at(x) * spec.ellipse_factor(theta);
        if spec.roughness_amp > 0.0 {
            r += rng.gen_range(-spec.roughness_amp..=spec.roughness_amp);
        }
        for b in &bumps {
            let dtheta = (theta - b.theta + PI).rem_euclid(TAU) - PI;
            let d2 = (x - b.x).powi(2) + (r0 * dtheta).powi(2);
            r += spec.bump_amp * (-d2 / (2.0 * sigma * sigma)).exp();
        }
        points.push(on_axis(x, theta, r));
        labels.push(true);
    }

    for model in &spec.outlier_models {
        match *model {
            OutlierModel::Ambient { fraction, inflation, min_radial_factor } => {
                let count = spec.outlier_count(fraction);
                let half = r0 * (1.0 + inflation);
                let mut made = 0;
                while made < count {
                    let x = rng.gen_range(0.0..spec.length);
                    let dy = rng.gen_range(-half..half);
                    let dz = rng.gen_range(-half..half);
                    if dy.hypot(dz) < min_radial_factor * spec.radius_at(x) * spec.ellipticity.sqrt() {
                        continue;
                    }
                    let (cy, cz) = centre.eval(x);
                    points.push([x, cy + dy, cz + dz]);
                    labels.push(false);
                    made += 1;
                }
            }
            OutlierModel::Railing { period, offset, cluster_size, extent } => {
                let mut m = 0usize;
                while (m as f64) * period <= spec.length {
                    let xc = m as f64 * period;
                    for _ in 0..cluster_size {
                        let x = xc + rng.gen_range(-extent..=extent) * r0;
                        let (cy, cz) = centre.eval(xc);
                        let bottom = spec.radius_at(xc.clamp(0.0, spec.length)) * spec.ellipse_factor(-PI / 2.0);
                        let y = cy + rng.gen_range(-extent..=extent) * r0;
                        let z = cz - bottom - offset * r0 + rng.gen_range(-extent..=extent) * r0;
                        points.push([x, y, z]);
                        labels.push(false);
                    }
                    m += 1;
                }
            }
            OutlierModel::NearSurface { fraction, offset } => {
                for _ in 0..spec.outlier_count(fraction) {
                    let x = rng.gen_range(0.0..spec.length);
                    let theta = PI / 2.0
                        + if half_cov >= PI { rng.gen_range(-PI..PI) } else { rng.gen_range(-half_cov..=half_cov) };
                    let r = spec.radius_at(x) * spec.ellipse_factor(theta) + offset * r0;
                    points.push(on_axis(x, theta, r));
                    labels.push(false);
                }
            }
        }
    }

    let cloud = PointCloud::new(format!("synth-{}", spec.seed), points, Some(labels))?;
    Ok(SyntheticLog { cloud, centreline: centre })
}

/// Outlier family of a suite member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierKind {
    None,
    Ambient,
    Railing,
    NearSurface,
}

/// One member of the default benchmark suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteMember {
    pub name: String,
    pub tapered: bool,
    pub elliptical: bool,
    pub curved: bool,
    pub outliers: OutlierKind,
    pub spec: SyntheticLogSpec,
}

/// Surface points per suite cloud.
pub const SUITE_SURFACE_POINTS: usize = 3000;

/// The 20-cloud default suite: every outlier family appears five times,
/// crossed with taper {0, 0.1}, ellipticity {1, 1.3} and a straight or
/// quadratic centreline. Seeds are 0..19.
pub fn default_suite() -> Vec<SuiteMember> {
    (0..20u64)
        .map(|seed| {
            let s = seed as usize;
            let outliers = [OutlierKind::None, OutlierKind::Ambient, OutlierKind::Railing, OutlierKind::NearSurface][s % 4];
            let tapered = (s / 4) % 2 == 1;
            let elliptical = (s / 2) % 2 == 1;
            let curved = (s / 8 + s) % 2 == 1;
            let mut spec = SyntheticLogSpec::cylinder(SUITE_SURFACE_POINTS, 4.0, seed);
            spec.taper_rate = if tapered { 0.1 } else { 0.0 };
            spec.ellipticity = if elliptical { 1.3 } else { 1.0 };
            if curved {
                // sag of 0.2 radii at mid-length, slight drift in z
                spec.centreline_coeffs = [[0.0, 0.0], [0.2, 0.05], [-0.05, 0.0]];
            }
            spec.roughness_amp = 0.01;
            spec.bump_count = 4;
            spec.bump_amp = 0.03;
            spec.outlier_models = match outliers {
                OutlierKind::None => vec![],
                OutlierKind::Ambient => vec![OutlierModel::Ambient { fraction: 0.2, inflation: 1.0, min_radial_factor: 1.5 }],
                OutlierKind::Railing => vec![OutlierModel::Railing { period: 0.5, offset: 0.3, cluster_size: 20, extent: 0.15 }],
                OutlierKind::NearSurface => vec![OutlierModel::NearSurface { fraction: 0.05, offset: 0.05 }],
            };
            let name = format!(
                "s{seed:02}-{}-{}-{}-{}",
                if tapered { "taper" } else { "notaper" },
                if elliptical { "ell" } else { "round" },
                if curved { "curved" } else { "straight" },
                match outliers {
                    OutlierKind::None => "clean",
                    OutlierKind::Ambient => "ambient",
                    OutlierKind::Railing => "railing",
                    OutlierKind::NearSurface => "nearsurface",
                }
            );
            SuiteMember { name, tapered, elliptical, curved, outliers, spec }
        })
        .collect()
}
