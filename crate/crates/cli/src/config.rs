use std::path::{Path, PathBuf};

use qeep_core::{BinGrid, Error, TruncationMode};
use serde::{Deserialize, Serialize};

/// Run parameters shared by the subcommands. Missing fields take the
/// desk-scale defaults (`eps = eps' = 0.005`, `D = 5`, five seeds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub eps: f64,
    pub eps_prime: f64,
    pub d_spectrum: usize,
    pub n_override: Option<usize>,
    pub l_override: Option<usize>,
    pub seeds: Vec<u64>,
    pub moments: Vec<u32>,
    pub truncation_mode: TruncationMode,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eps: 0.005,
            eps_prime: 0.005,
            d_spectrum: 5,
            n_override: None,
            l_override: None,
            seeds: (0..5).collect(),
            moments: vec![1, 2, 4],
            truncation_mode: TruncationMode::Empirical,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> qeep_core::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> qeep_core::Result<()> {
        BinGrid::new(self.eps)?;
        if !(self.eps_prime >= 0.0 && self.eps_prime.is_finite()) {
            return Err(Error::invalid(format!("eps_prime must be non-negative, got {}", self.eps_prime)));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if self.d_spectrum == 0 {
            return Err(Error::invalid("d_spectrum must be at least 1"));
        }
        if self.n_override.is_some_and(|n| n < 2) {
            return Err(Error::invalid("n_override must be at least 2"));
        }
        Ok(())
    }

    /// `n_override` if set, else the order picked by the truncation mode.
    pub fn n_trunc(&self) -> qeep_core::Result<usize> {
        match self.n_override {
            Some(n) => Ok(n),
            None => qeep_core::filterbank::choose_truncation(self.eps, self.truncation_mode),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_trunc().unwrap(), 566);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"eps": 0.25, "seeds": [9]}"#).unwrap();
        assert_eq!(cfg.eps, 0.25);
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.moments, vec![1, 2, 4]);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = ExperimentConfig {
            eps: 0.3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.eps = 0.25;
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"epsilon": 1}"#).is_err());
    }
}
