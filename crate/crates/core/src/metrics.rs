//! Confusion-matrix metrics for the inlier class and suite aggregation.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::segment::{segment, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    /// Set when a ratio had a zero denominator and was reported as 0.
    pub undefined: bool,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let mut undefined = false;
        let mut ratio = |num: usize, den: usize| {
            if den == 0 {
                undefined = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let iou = ratio(tp, tp + fp + fn_);
        Self { tp, fp, fn_, tn, precision, recall, iou, undefined }
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Metrics of a predicted inlier mask against ground truth.
pub fn evaluate(pred: &[bool], gt: &[bool]) -> Result<Metrics> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: gt.len() });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

/// How per-cloud metrics are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Unweighted mean of per-cloud ratios.
    #[default]
    Macro,
    /// Ratios of the summed confusion counts.
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    pub clouds: usize,
}

pub fn aggregate(items: &[Metrics], how: Aggregation) -> MeanMetrics {
    if items.is_empty() {
        return MeanMetrics::default();
    }
    match how {
        Aggregation::Macro => {
            let n = items.len() as f64;
            MeanMetrics {
                precision: items.iter().map(|m| m.precision).sum::<f64>() / n,
                recall: items.iter().map(|m| m.recall).sum::<f64>() / n,
                iou: items.iter().map(|m| m.iou).sum::<f64>() / n,
                clouds: items.len(),
            }
        }
        Aggregation::Micro => {
            let s = items.iter().fold((0, 0, 0, 0), |a, m| (a.0 + m.tp, a.1 + m.fp, a.2 + m.fn_, a.3 + m.tn));
            let m = Metrics::from_counts(s.0, s.1, s.2, s.3);
            MeanMetrics { precision: m.precision, recall: m.recall, iou: m.iou, clouds: items.len() }
        }
    }
}

/// Per-cloud metrics plus their aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_cloud: Vec<(String, Metrics)>,
    pub aggregate: MeanMetrics,
    pub aggregation: Aggregation,
}

impl EvalReport {
    pub fn new(per_cloud: Vec<(String, Metrics)>, aggregation: Aggregation) -> Self {
        let ms: Vec<Metrics> = per_cloud.iter().map(|(_, m)| *m).collect();
        Self { aggregate: aggregate(&ms, aggregation), per_cloud, aggregation }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cloud,tp,fp,fn,tn,precision,recall,iou\n");
        for (id, m) in &self.per_cloud {
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6},{:.6}\n",
                id, m.tp, m.fp, m.fn_, m.tn, m.precision, m.recall, m.iou
            ));
        }
        out
    }
}

/// Which optional loss terms a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSwitches {
    pub deviation: bool,
    pub plane: bool,
    pub normal: bool,
}

impl TermSwitches {
    /// The 8 on/off combinations, from none to all.
    pub fn all_combinations() -> Vec<Self> {
        (0..8u8)
            .map(|b| Self { deviation: b & 4 != 0, plane: b & 2 != 0, normal: b & 1 != 0 })
            .collect()
    }

    pub fn apply(self, base: LossWeights) -> LossWeights {
        base.with_optional(self.deviation, self.plane, self.normal)
    }

    pub fn count(self) -> usize {
        usize::from(self.deviation) + usize::from(self.plane) + usize::from(self.normal)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub terms: TermSwitches,
    pub mean: MeanMetrics,
    pub converged: usize,
    pub per_cloud: Vec<(String, Metrics)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    pub aggregation: Aggregation,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, terms: TermSwitches) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.terms == terms)
    }

    /// Fixed-width text table with one check/cross column per optional term.
    pub fn to_table(&self) -> String {
        let mark = |on: bool| if on { "✓" } else { "✗" };
        let mut out = String::from("| L_sigma | L_plane | L_n | Precision | Recall | IoU    |\n");
        out.push_str("|---------|---------|-----|-----------|--------|--------|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {:^7} | {:^7} | {:^3} | {:>9.4} | {:>6.4} | {:>6.4} |\n",
                mark(r.terms.deviation),
                mark(r.terms.plane),
                mark(r.terms.normal),
                r.mean.precision,
                r.mean.recall,
                r.mean.iou
            ));
        }
        out
    }

    /// One row per cloud per combination.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("deviation,plane,normal,cloud,tp,fp,fn,tn,precision,recall,iou\n");
        for r in &self.rows {
            for (id, m) in &r.per_cloud {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}\n",
                    u8::from(r.terms.deviation),
                    u8::from(r.terms.plane),
                    u8::from(r.terms.normal),
                    id,
                    m.tp,
                    m.fp,
                    m.fn_,
                    m.tn,
                    m.precision,
                    m.recall,
                    m.iou
                ));
            }
        }
        out
    }

    /// Means per combination, without per-cloud detail.
    pub fn summary_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "deviation": r.terms.deviation,
                    "plane": r.terms.plane,
                    "normal": r.terms.normal,
                    "precision": r.mean.precision,
                    "recall": r.mean.recall,
                    "iou": r.mean.iou,
                    "clouds": r.mean.clouds,
                    "converged": r.converged,
                })
            })
            .collect();
        serde_json::json!({ "aggregation": self.aggregation, "rows": rows })
    }
}

/// Segments every labelled cloud under each of the 8 combinations of the
/// optional terms, with the same optimiser settings (and seed) throughout.
pub fn run_ablation(
    suite: &[PointCloud],
    base: &LossWeights,
    config: &OptimizerConfig,
    aggregation: Aggregation,
) -> Result<AblationTable> {
    if suite.is_empty() {
        return Err(Error::Empty("ablation suite"));
    }
    let truth: Vec<&Vec<bool>> = suite
        .iter()
        .map(|c| c.labels.as_ref().ok_or_else(|| Error::MissingProperty(format!("label (cloud {})", c.id))))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(8);
    for terms in TermSwitches::all_combinations() {
        let lw = terms.apply(*base);
        let mut per_cloud = Vec::with_capacity(suite.len());
        let mut converged = 0;
        for (cloud, gt) in suite.iter().zip(&truth) {
            let result = segment(cloud, &lw, config)?;
            converged += usize::from(result.converged);
            per_cloud.push((cloud.id.clone(), evaluate(&result.inlier_mask, gt)?));
        }
        let ms: Vec<Metrics> = per_cloud.iter().map(|(_, m)| *m).collect();
        rows.push(AblationRow { terms, mean: aggregate(&ms, aggregation), converged, per_cloud });
    }
    Ok(AblationTable { aggregation, rows })
}
