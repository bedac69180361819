use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Method;
use crate::error::{Error, Result};
use crate::merge::MergePolicy;
use crate::net::{Init, NetworkConfig, TrainHyper, Variant};
use crate::toy::ToyKind;

/// Upsampling ratio shared by every experiment scale.
pub const RATIO: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scale {
    pub input: usize,
    pub output: usize,
}

impl Scale {
    pub fn new(input: usize, output: usize) -> Scale {
        Scale { input, output }
    }

    /// Path-safe tag such as `64x256`.
    pub fn tag(&self) -> String {
        format!("{}x{}", self.input, self.output)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.input, self.output)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub name: String,
    /// Procedural corpus. Exactly one of `toy` and `mesh_dir` must be set.
    pub toy: Option<ToyKind>,
    /// Directory of `.off` meshes or `.xyz`/`.ply` clouds, read in name order.
    pub mesh_dir: Option<PathBuf>,
    /// Number of toy models or, for `mesh_dir`, models before the split.
    #[serde(default = "default_train_models")]
    pub train_models: usize,
    #[serde(default = "default_test_models")]
    pub test_models: usize,
}

fn default_train_models() -> usize {
    20
}

fn default_test_models() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Patches per model and AS segments K.
    pub segments: usize,
    /// Patch overlap factor (1 = exact cover of the dense cloud).
    pub overlap_factor: f64,
    /// Dense points per model. Defaults to `segments × output`, which makes the
    /// AS draw consume the whole dense cloud.
    pub dense_points: Option<usize>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            segments: 8,
            overlap_factor: 1.0,
            dense_points: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub init: Init,
    #[serde(flatten)]
    pub hyper: TrainHyper,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            init: Init::ZeroHead,
            hyper: TrainHyper::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub merge: Option<MergePolicy>,
    pub per_model: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub datasets: Vec<DatasetSource>,
    pub scales: Vec<Scale>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Original]
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut c = Self::parse(&text)?;
        // relative mesh directories are taken from the config file's location
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut c.datasets {
            if let Some(dir) = &d.mesh_dir {
                if dir.is_relative() {
                    d.mesh_dir = Some(base.join(dir));
                }
            }
        }
        Ok(c)
    }

    /// The built-in desk-scale experiment: one mixed toy corpus at 64→256.
    pub fn toy(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            jobs: None,
            out: default_out(),
            datasets: vec![DatasetSource {
                name: "toy".into(),
                toy: Some(ToyKind::Mixed),
                mesh_dir: None,
                train_models: 20,
                test_models: 4,
            }],
            scales: vec![Scale::new(64, 256)],
            methods: default_methods(),
            variants: default_variants(),
            data: DataSection::default(),
            network: NetworkConfig::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if d.toy.is_some() == d.mesh_dir.is_some() {
                return bad(format!(
                    "dataset '{}' needs exactly one of `toy` and `mesh_dir`",
                    d.name
                ));
            }
            if d.name.is_empty() || d.name.contains(['/', '\\', ',']) || d.name.contains("->") {
                return bad(format!(
                    "dataset name '{}' is not usable as a path and CSV field",
                    d.name
                ));
            }
            if !names.insert(&d.name) {
                return bad(format!("duplicate dataset '{}'", d.name));
            }
            if d.train_models == 0 {
                return bad(format!("dataset '{}' has no training models", d.name));
            }
        }
        if self.scales.is_empty() {
            return bad("no scales configured".into());
        }
        for s in &self.scales {
            if s.input == 0 || s.output != RATIO * s.input {
                return bad(format!("scale {s} must satisfy output = {RATIO} x input"));
            }
        }
        if self.methods.is_empty() || self.variants.is_empty() {
            return bad("methods and variants must be non-empty".into());
        }
        if self.data.segments == 0 || !(self.data.overlap_factor >= 1.0) {
            return bad("segments must be positive and overlap_factor at least 1".into());
        }
        if self.network.r != RATIO {
            return bad(format!("network.r must be {RATIO}"));
        }
        self.network.validate()?;
        if let Some(m) = &self.eval.merge {
            m.validate()?;
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        Ok(())
    }

    pub fn dense_points(&self, scale: Scale) -> usize {
        self.data.dense_points.unwrap_or(self.data.segments * scale.output)
    }

    /// sha256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
