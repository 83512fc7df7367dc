//! Campaign configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modules excluded from every campaign by default (duplicated or
/// non-reproducible upstream).
pub const DEPRECATED_MODULES: [&str; 4] = ["Closure-63", "Closure-93", "Lang-2", "Time-21"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Weight of the action-kind Dice term in action similarity.
    pub alpha: f64,
    /// Weight of the labelled-action Dice term in action similarity.
    pub beta: f64,
    /// Blend between normalized model score and the similarity prior.
    pub p: f64,
    pub ngram_n: usize,
    /// Hard cap on emitted combined patches per bug.
    pub mc: usize,
    pub beam_size: usize,
    pub token_budget: usize,
    /// Context lines on each side of a chunk.
    pub context_width: usize,
    /// Whole-pipeline deadline per bug.
    pub timeout_seconds: u64,
    pub no_patch_optimization: bool,
    pub no_buggy_contexts: bool,
    pub excluded_module_ids: Vec<String>,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            alpha: 0.5,
            beta: 0.5,
            p: 0.5,
            ngram_n: 3,
            mc: 10_000,
            beam_size: 500,
            token_budget: 512,
            context_width: 3,
            timeout_seconds: 19_800,
            no_patch_optimization: false,
            no_buggy_contexts: false,
            excluded_module_ids: DEPRECATED_MODULES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CampaignConfig =
            toml::from_str(text).map_err(|e| Error::Other(format!("config: {e}")))?;
        validate_config(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Returns `cfg` unchanged when every field is in range.
pub fn validate_config(cfg: CampaignConfig) -> Result<CampaignConfig> {
    fn unit(field: &'static str, value: f64) -> Result<()> {
        if (0.0..=1.0).contains(&value) {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                field,
                reason: format!("must lie in [0, 1], got {value}"),
            })
        }
    }
    fn positive(field: &'static str, value: usize) -> Result<()> {
        if value >= 1 {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                field,
                reason: "must be at least 1".into(),
            })
        }
    }
    unit("alpha", cfg.alpha)?;
    unit("beta", cfg.beta)?;
    unit("p", cfg.p)?;
    if cfg.alpha + cfg.beta <= 0.0 {
        return Err(Error::InvalidConfig {
            field: "alpha",
            reason: "alpha + beta must be positive".into(),
        });
    }
    positive("ngram_n", cfg.ngram_n)?;
    positive("mc", cfg.mc)?;
    positive("beam_size", cfg.beam_size)?;
    positive("token_budget", cfg.token_budget)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_accepted() {
        let cfg = validate_config(CampaignConfig::default()).unwrap();
        assert_eq!((cfg.alpha, cfg.beta, cfg.p), (0.5, 0.5, 0.5));
        assert_eq!(cfg.ngram_n, 3);
        assert_eq!(cfg.mc, 10_000);
        assert_eq!(cfg.beam_size, 500);
        assert_eq!(cfg.token_budget, 512);
        assert_eq!(cfg.timeout_seconds, 19_800);
    }

    #[test]
    fn degenerate_but_legal_values() {
        let cfg = CampaignConfig {
            p: 0.0,
            mc: 1,
            ..Default::default()
        };
        assert_eq!(validate_config(cfg.clone()).unwrap(), cfg);
    }

    #[test]
    fn out_of_range_fields_are_named() {
        let err = validate_config(CampaignConfig {
            p: 1.5,
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "p", .. }), "{err}");

        let err = validate_config(CampaignConfig {
            mc: 0,
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "mc", .. }));

        let err = validate_config(CampaignConfig {
            beam_size: 0,
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "beam_size", .. }));

        let err = validate_config(CampaignConfig {
            alpha: -0.1,
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn toml_round_trip_and_partial_documents() {
        let cfg = CampaignConfig::from_toml("mc = 100\nno_buggy_contexts = true\n").unwrap();
        assert_eq!(cfg.mc, 100);
        assert!(cfg.no_buggy_contexts);
        assert_eq!(cfg.beam_size, 500);
        let again = CampaignConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert!(CampaignConfig::from_toml("bogus = 1").is_err());
        assert!(CampaignConfig::from_toml("p = 2.0").is_err());
    }
}
