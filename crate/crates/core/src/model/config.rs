use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel bandwidth selection for the distance density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`
    Silverman,
    Fixed(f64),
}

/// Run parameters. Every default reproduces the reference settings:
/// confidence 0.8, 10% retention of easy examples, 100 nearest neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub confidence_threshold: f64,
    pub retention_fraction: f64,
    pub knn_k: usize,
    pub seed: u64,
    pub anomalous_subsets: Vec<String>,
    pub kde_grid_points: usize,
    pub kde_bandwidth: BandwidthRule,
    /// Model-subset sizes for the ablation table. Empty means the three sizes
    /// just below the full panel.
    pub ablation_sizes: Vec<usize>,
    pub ablation_draws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            confidence_threshold: 0.8,
            retention_fraction: 0.10,
            knn_k: 100,
            seed: 0,
            anomalous_subsets: Vec::new(),
            kde_grid_points: 2048,
            kde_bandwidth: BandwidthRule::Silverman,
            ablation_sizes: Vec::new(),
            ablation_draws: 10,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let theta = self.confidence_threshold;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Config(format!(
                "confidence_threshold must lie in (0, 1), got {theta}"
            )));
        }
        let keep = self.retention_fraction;
        if !(0.0..=1.0).contains(&keep) {
            return Err(Error::Config(format!(
                "retention_fraction must lie in [0, 1], got {keep}"
            )));
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be at least 1".into()));
        }
        if self.kde_grid_points < 3 {
            return Err(Error::Config("kde_grid_points must be at least 3".into()));
        }
        if let BandwidthRule::Fixed(h) = self.kde_bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config(format!(
                    "fixed bandwidth must be positive, got {h}"
                )));
            }
        }
        if self.ablation_draws == 0 {
            return Err(Error::Config("ablation_draws must be at least 1".into()));
        }
        if self.ablation_sizes.contains(&0) {
            return Err(Error::Config("ablation sizes must be at least 1".into()));
        }
        Ok(())
    }

    /// Subset sizes to ablate for a panel of `models` models.
    pub fn ablation_sizes_for(&self, models: usize) -> Vec<usize> {
        if !self.ablation_sizes.is_empty() {
            return self.ablation_sizes.clone();
        }
        match models {
            0 => Vec::new(),
            1 => vec![1],
            n => (n.saturating_sub(3).max(1)..n).collect(),
        }
    }
}
