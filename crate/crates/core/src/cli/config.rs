use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact::sha256_hex;
use crate::discovery::DiscoveryConfig;
use crate::error::{Error, Result};
use crate::evaluation::{EvalConfig, GridConfig};
use crate::hyperplane::JointFitConfig;
use crate::models::ClassifierConfig;
use crate::rng::{derive_seed, tag};
use crate::world::{DatasetConfig, FACTOR_NAMES};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable that overrides `output_dir`.
pub const OUT_ENV: &str = "LATENT_BIAS_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Target attribute of the classifier.
    pub target: Option<String>,
    /// Planted biased attribute (used for data skew and evaluation only).
    pub biased: Option<String>,
    #[serde(default)]
    pub world: WorldSection,
    pub dataset: Option<DatasetSection>,
    #[serde(default)]
    pub generator: GeneratorSection,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub ground_truth: GroundTruthSection,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    /// Attributes the discovered bias must differ from; defaults to every attribute of
    /// the ground truth other than the target and the biased attribute.
    pub known: Option<Vec<String>>,
    #[serde(default)]
    pub evaluation: EvalSection,
    #[serde(default)]
    pub grid: GridConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub side: usize,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self { side: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub skewness: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSection {
    Pca {
        #[serde(default = "default_latent_dim")]
        latent_dim: usize,
    },
    Identity {
        dim: usize,
    },
}

fn default_latent_dim() -> usize {
    10
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection::Pca { latent_dim: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassifierSection {
    Mlp {
        #[serde(default)]
        hidden: Option<usize>,
        #[serde(default)]
        epochs: Option<usize>,
        #[serde(default)]
        batch_size: Option<usize>,
        #[serde(default)]
        learning_rate: Option<f64>,
    },
    /// Fixed logistic model `σ(weights · x + bias)`.
    Logistic { weights: Vec<f64>, bias: f64 },
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection::Mlp {
            hidden: None,
            epochs: None,
            batch_size: None,
            learning_rate: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GroundTruthSection {
    /// Joint fit on the encoded latents of a balanced probe set.
    Fitted {
        #[serde(default = "default_probe_size")]
        probe_size: usize,
        #[serde(default = "default_attributes")]
        attributes: Vec<String>,
        #[serde(default)]
        learning_rate: Option<f64>,
        #[serde(default)]
        iterations: Option<usize>,
    },
    /// Normals given directly (one per attribute).
    Explicit {
        names: Vec<String>,
        normals: Vec<Vec<f64>>,
        #[serde(default)]
        offsets: Option<Vec<f64>>,
    },
}

fn default_probe_size() -> usize {
    2000
}

fn default_attributes() -> Vec<String> {
    FACTOR_NAMES.iter().map(|s| s.to_string()).collect()
}

impl Default for GroundTruthSection {
    fn default() -> Self {
        GroundTruthSection::Fitted {
            probe_size: default_probe_size(),
            attributes: default_attributes(),
            learning_rate: None,
            iterations: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub batch_size: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { batch_size: 64 }
    }
}

/// A parsed configuration together with the hash of its source bytes.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    pub path: PathBuf,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let config = parse_config(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig {
        config,
        sha256: sha256_hex(&bytes),
        path: path.to_path_buf(),
    })
}

/// Parses and validates a configuration document. Errors carry line/column context.
pub fn parse_config(bytes: &[u8]) -> std::result::Result<RunConfig, String> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    match value.get("version") {
        None => return Err("missing required key `version`".into()),
        Some(v) if v.as_u64() != Some(CONFIG_VERSION as u64) => {
            return Err(format!("unsupported config version {v}, expected {CONFIG_VERSION}"))
        }
        _ => {}
    }
    let config: RunConfig = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    config.validate_sections().map_err(|e| e.to_string())?;
    Ok(config)
}

impl RunConfig {
    fn validate_sections(&self) -> Result<()> {
        self.discovery.validate()?;
        if let Some(d) = &self.dataset {
            if !(0.0..=1.0).contains(&d.skewness) {
                return Err(Error::Config(format!("dataset.skewness {} outside [0, 1]", d.skewness)));
            }
        }
        if self.evaluation.batch_size == 0 {
            return Err(Error::Config("evaluation.batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed of a pipeline stage, derived from the top-level seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, &[tag(stage)])
    }

    pub fn target(&self) -> Result<&str> {
        self.target.as_deref().ok_or_else(|| Error::Config("config is missing required key `target`".into()))
    }

    pub fn biased(&self) -> Result<&str> {
        self.biased.as_deref().ok_or_else(|| Error::Config("config is missing required key `biased`".into()))
    }

    pub fn dataset_config(&self) -> Result<DatasetConfig> {
        let d = self
            .dataset
            .as_ref()
            .ok_or_else(|| Error::Config("config is missing required key `dataset`".into()))?;
        Ok(DatasetConfig {
            target: self.target()?.to_string(),
            biased: self.biased()?.to_string(),
            skewness: d.skewness,
            n: d.n,
            side: self.world.side,
            seed: self.stage_seed("dataset"),
        })
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        let mut c = ClassifierConfig {
            seed: self.stage_seed("classifier"),
            ..ClassifierConfig::default()
        };
        if let ClassifierSection::Mlp { hidden, epochs, batch_size, learning_rate } = &self.classifier {
            c.hidden = hidden.unwrap_or(c.hidden);
            c.epochs = epochs.unwrap_or(c.epochs);
            c.batch_size = batch_size.unwrap_or(c.batch_size);
            c.learning_rate = learning_rate.unwrap_or(c.learning_rate);
        }
        c
    }

    pub fn joint_fit_config(&self) -> JointFitConfig {
        let mut c = JointFitConfig {
            seed: self.stage_seed("joint-fit"),
            ..JointFitConfig::default()
        };
        if let GroundTruthSection::Fitted { learning_rate, iterations, .. } = &self.ground_truth {
            c.learning_rate = learning_rate.unwrap_or(c.learning_rate);
            c.iterations = iterations.unwrap_or(c.iterations);
        }
        c
    }

    pub fn discovery_config(&self) -> DiscoveryConfig {
        DiscoveryConfig {
            seed: self.stage_seed("discovery"),
            ..self.discovery.clone()
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            traversal: self.discovery.traversal.clone(),
            batch_size: self.evaluation.batch_size,
            seed: self.stage_seed("evaluation"),
        }
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig {
            seed: self.seed,
            ..self.grid.clone()
        }
    }
}
