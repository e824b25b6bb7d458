//! JSON run configuration shared by the command-line tools.

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineParams;
use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::preprocess::ScaleMode;
use crate::segment::OptimizerConfig;

/// Every field is optional in the file; missing ones take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub loss_weights: LossWeights,
    pub optimizer: OptimizerConfig,
    pub pca_align: bool,
    pub scale_mode: ScaleMode,
    pub baseline: BaselineParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            loss_weights: LossWeights::default(),
            optimizer: OptimizerConfig::default(),
            pca_align: true,
            scale_mode: ScaleMode::default(),
            baseline: BaselineParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        LossWeights::from_array(self.loss_weights.to_array())?;
        self.optimizer.validate()?;
        self.baseline.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = RunConfig::from_json(r#"{"optimizer": {"seed": 9}, "loss_weights": {"lambda_n": 0.5}}"#).unwrap();
        assert_eq!(cfg.optimizer.seed, 9);
        assert_eq!(cfg.optimizer.k, OptimizerConfig::default().k);
        assert_eq!(cfg.loss_weights.lambda_n, 0.5);
        assert_eq!(cfg.loss_weights.lambda_fit, 0.26);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_json(r#"{"optimizer": {"threshold": 1.5}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"loss_weights": {"lambda_fit": -1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"unknown": 1}"#).is_err());
        assert!(RunConfig::from_json("[").is_err());
    }
}
