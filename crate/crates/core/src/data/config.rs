use super::coding::SeverityCoding;
use super::DEFAULT_HORIZON;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// How empty baseline cells are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Numeric: cohort median of observed values. Categorical: most frequent
    /// level (first declared on ties). The patient is flagged either way.
    #[default]
    Median,
    Reject,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub units: Option<String>,
    /// Inclusive normal range `[low, high]`.
    pub range: Option<[f64; 2]>,
    /// Declaring levels makes the feature categorical.
    pub levels: Option<Vec<String>>,
}

/// Cohort configuration, read from a TOML file.
///
/// ```toml
/// horizon = 180
/// missing = "median"
///
/// [severity]
/// Aki = 4.0
///
/// [features.ALT]
/// units = "U/L"
/// range = [7.0, 56.0]
///
/// [features.Sex]
/// levels = ["F", "M"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub missing: MissingPolicy,
    #[serde(default)]
    pub severity: BTreeMap<String, f64>,
    #[serde(default)]
    pub features: BTreeMap<String, FeatureConfig>,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            horizon: DEFAULT_HORIZON,
            missing: MissingPolicy::default(),
            severity: BTreeMap::new(),
            features: BTreeMap::new(),
        }
    }
}

impl CohortConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: CohortConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn coding(&self) -> Result<SeverityCoding> {
        SeverityCoding::with_overrides(&self.severity)
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        // Upper bound keeps day-indexed allocations sane on hostile input.
        if self.horizon > 100_000 {
            return Err(Error::InvalidConfig(format!("horizon {} too large", self.horizon)));
        }
        self.coding()?;
        for (name, f) in &self.features {
            if let Some([lo, hi]) = f.range {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::InvalidConfig(format!("feature `{name}`: invalid range [{lo}, {hi}]")));
                }
            }
            if let Some(levels) = &f.levels {
                if levels.is_empty() {
                    return Err(Error::InvalidConfig(format!("feature `{name}`: empty level list")));
                }
                let mut sorted = levels.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != levels.len() {
                    return Err(Error::InvalidConfig(format!("feature `{name}`: duplicate levels")));
                }
                if f.range.is_some() || f.units.is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "feature `{name}`: categorical features take no units or range"
                    )));
                }
            }
        }
        Ok(())
    }
}
