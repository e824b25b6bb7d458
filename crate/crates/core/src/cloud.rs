use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// An ordered set of 3D points, optionally carrying ground-truth labels
/// (`true` = log surface).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub id: String,
    pub points: Vec<Point3>,
    pub labels: Option<Vec<bool>>,
}

impl PointCloud {
    pub fn new(id: impl Into<String>, points: Vec<Point3>, labels: Option<Vec<bool>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::LengthMismatch { left: points.len(), right: l.len() });
            }
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::DegenerateCloud(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { id: id.into(), points, labels })
    }

    /// Cloud without labels.
    pub fn unlabeled(id: impl Into<String>, points: Vec<Point3>) -> Result<Self> {
        Self::new(id, points, None)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    /// Copy of this cloud with the points replaced.
    pub fn with_points(&self, points: Vec<Point3>) -> Self {
        Self { id: self.id.clone(), points, labels: self.labels.clone() }
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::Empty("point cloud"))
        } else {
            Ok(())
        }
    }
}

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn dist2(a: Point3, b: Point3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}
