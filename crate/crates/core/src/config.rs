//! Run configuration files.
//!
//! A file names a model preset and overrides individual fields:
//!
//! ```toml
//! model = "padenet"
//! seed = 3
//! out_dir = "runs/padenet"
//!
//! [network]
//! channels = 16
//!
//! [train]
//! iterations = 2000
//!
//! [data]
//! train = "datasets/DIV2K_train"
//! val = "datasets/DIV2K_valid"
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::synth::TextureSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layers::{LowerOrder, Variant};
use crate::network::{Activation, BlockKind, Model, NetworkConfig, Placement};
use crate::training::{AugmentFlags, OptimizerKind, TrainConfig};

/// Everything that determines a trained model: the part of a run stored in
/// checkpoints and covered by the config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl Experiment {
    pub fn preset(model: Model, toy: bool) -> Self {
        let network = NetworkConfig::preset(model);
        if toy {
            Experiment {
                network: network.toy(),
                train: TrainConfig::toy(),
            }
        } else {
            Experiment {
                network,
                train: TrainConfig::default(),
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.train.validate(self.network.upscale)
    }

    /// Canonical TOML text.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("experiment serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkOverrides {
    pub blocks: Option<usize>,
    pub channels: Option<usize>,
    pub upscale: Option<usize>,
    pub degrees: Option<[usize; 2]>,
    pub variant: Option<Variant>,
    pub lower_order: Option<LowerOrder>,
    pub shift: Option<i32>,
    pub placement: Option<Placement>,
    pub block: Option<BlockKind>,
    pub width: Option<usize>,
    pub activation: Option<Activation>,
    pub pau_degrees: Option<[usize; 2]>,
    pub scaler_init: Option<f64>,
    pub kernel: Option<usize>,
    pub allow_vanilla: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub patch: Option<usize>,
    pub batch: Option<usize>,
    pub iterations: Option<u64>,
    pub lr_init: Option<f64>,
    pub lr_final: Option<f64>,
    pub loss_alpha: Option<f64>,
    pub loss_scale: Option<f64>,
    /// A negative value disables noise.
    pub noise_snr_db: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    pub augment: Option<AugmentFlags>,
    pub val_interval: Option<u64>,
}

/// Synthetic texture sets, generated in memory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticData {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub size: usize,
    pub max_freq: i32,
    pub seed: u64,
}

impl Default for SyntheticData {
    fn default() -> Self {
        let spec = TextureSpec::default();
        SyntheticData {
            train: 64,
            val: 10,
            test: 10,
            size: spec.size,
            max_freq: spec.max_freq,
            seed: 1,
        }
    }
}

impl SyntheticData {
    fn spec(&self) -> TextureSpec {
        TextureSpec {
            size: self.size,
            max_freq: self.max_freq,
            ..TextureSpec::default()
        }
    }

    // Each split has its own generator so the sets never share an image.
    pub fn train_set(&self) -> Dataset {
        Dataset::synthetic("toy_train", self.seed.wrapping_mul(3), self.train, &self.spec())
    }

    pub fn val_set(&self) -> Dataset {
        Dataset::synthetic("toy_val", self.seed.wrapping_mul(3) + 1, self.val, &self.spec())
    }

    pub fn test_set(&self) -> Dataset {
        Dataset::synthetic("toy_test", self.seed.wrapping_mul(3) + 2, self.test, &self.spec())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset root with an `HR/` directory.
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    /// Held-out set scored after training.
    pub test: Option<PathBuf>,
    pub synthetic: Option<SyntheticData>,
}

/// The on-disk run file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub model: Option<Model>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub network: NetworkOverrides,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub data: DataConfig,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies the overrides to the preset (shrunk to toy scale if `toy`).
    pub fn resolve(&self, toy: bool) -> Result<RunConfig> {
        let model = self.model.unwrap_or(Model::Padenet);
        let mut exp = Experiment::preset(model, toy);
        let n = &self.network;
        let net = &mut exp.network;
        macro_rules! apply {
            ($src:expr, $dst:expr, [$($f:ident),*]) => {
                $(if let Some(v) = $src.$f.clone() { $dst.$f = v; })*
            };
        }
        apply!(n, net, [blocks, channels, upscale, degrees, variant, lower_order, shift, placement, block, width, activation, pau_degrees, scaler_init, kernel, allow_vanilla]);
        let t = &self.train;
        let train = &mut exp.train;
        apply!(t, train, [patch, batch, iterations, lr_init, lr_final, loss_alpha, loss_scale, optimizer, augment, val_interval]);
        if let Some(snr) = t.noise_snr_db {
            train.noise_snr_db = (snr >= 0.0).then_some(snr);
        }
        if let Some(seed) = self.seed {
            train.seed = seed;
        }
        exp.validate()?;

        let data = match (&self.data.train, &self.data.synthetic) {
            (Some(train), _) => DataSource::Files {
                train: train.clone(),
                val: self.data.val.clone().unwrap_or_else(|| train.clone()),
                test: self.data.test.clone(),
            },
            (None, Some(s)) => DataSource::Synthetic(s.clone()),
            (None, None) if toy => DataSource::Synthetic(SyntheticData::default()),
            (None, None) => {
                return Err(Error::Config(
                    "no training data: set data.train, data.synthetic, or use --toy".into(),
                ))
            }
        };
        Ok(RunConfig {
            experiment: exp,
            data,
            out_dir: self.out_dir.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Files {
        train: PathBuf,
        val: PathBuf,
        test: Option<PathBuf>,
    },
    Synthetic(SyntheticData),
}

/// Loaded training, validation and (optional) held-out sets.
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Option<Dataset>,
}

impl DataSource {
    pub fn load(&self, scale: usize) -> Result<Splits> {
        match self {
            DataSource::Files { train, val, test } => Ok(Splits {
                train: Dataset::load(train, None)?,
                val: Dataset::load(val, Some(scale))?,
                test: test.as_deref().map(|t| Dataset::load(t, Some(scale))).transpose()?,
            }),
            DataSource::Synthetic(s) => Ok(Splits {
                train: s.train_set(),
                val: s.val_set(),
                test: Some(s.test_set()),
            }),
        }
    }
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub data: DataSource,
    pub out_dir: Option<PathBuf>,
}
