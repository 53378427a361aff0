use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Format, SplitProtocol};
use crate::error::{Error, Result};
use crate::metrics::EvalSettings;
use crate::model::ModelConfig;
use crate::training::TrainPlan;

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "INPNCF_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// A rating file, or a directory written by the `split` command.
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
    /// Largest rating; rating-valued inputs are divided by it.
    #[serde(default = "default_value_max")]
    pub value_max: f64,
    /// Replace every observed value by 1 after loading.
    #[serde(default)]
    pub implicit: bool,
}

fn default_format() -> Format {
    Format::MovielensTab
}

fn default_value_max() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub protocol: SplitProtocol,
    #[serde(default = "default_ratios")]
    pub ratios: [f64; 3],
    #[serde(default)]
    pub seed: u64,
}

fn default_ratios() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

/// One experiment, fully described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub training: TrainPlan,
    pub eval: EvalSettings,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Parses and validates a config. Relative paths are taken from the
    /// config file's directory; `INPNCF_OUTPUT_DIR` overrides the output.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.dataset.path = base.join(&config.dataset.path);
        config.output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => base.join(&config.output_dir),
        };
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !(self.dataset.value_max > 0.0) {
            return Err(Error::Config("dataset.value_max must be positive".into()));
        }
        validate_ratios(self.split.ratios)?;
        self.model.validate()?;
        self.training.validate()?;
        self.eval.validate()
    }
}

pub(crate) fn validate_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 || ratios[0] <= 0.0 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be non-negative, sum to 1 and give train a share"
        )));
    }
    Ok(())
}
