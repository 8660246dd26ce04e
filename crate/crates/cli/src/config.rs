//! Optional TOML settings file. Command-line flags take precedence over it,
//! and it takes precedence over built-in defaults.

use std::path::Path;

use anyhow::Context;
use radar_annotate::dataset::evaluate::DEFAULT_HORIZON_M;
use radar_annotate::dataset::PipelineConfig;
use radar_annotate::taxonomy::DEFAULT_EMPTY_WEIGHT;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub generate: PipelineConfig,
    pub split: SplitSection,
    pub augment: AugmentSection,
    pub stats: StatsSection,
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    /// Overrides the padding in the regions file when set.
    pub padding_m: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSection {
    pub empty_weight: f64,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            empty_weight: DEFAULT_EMPTY_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    pub horizon_m: f64,
    pub include_empty: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            horizon_m: DEFAULT_HORIZON_M,
            include_empty: false,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
