//! JSON experiment configuration shared by `train` and `sweep-noise`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dwsnn_core::device::{
    fit_sigmoid, synthesize_default_models, DeviceCurve, DeviceKind, DeviceTable, MwDeviceModel,
};
use dwsnn_core::neuron::{BinaryNeuronParams, LifParams, MwNeuronParams, NeuronModel, VoltageMap};
use dwsnn_core::train::MlpConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub subset: SubsetConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_noise_grid")]
    pub noise_grid: Vec<f64>,
    /// Seed of the shared test-set corruption and evaluation sampling.
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub precision: Precision,
    /// Worker threads; `--threads` overrides it. Results do not depend on it.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Store elapsed seconds in run records (breaks byte-identical reruns).
    #[serde(default)]
    pub record_wall_clock: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// `{0, 0.25, ..., 3.0}`.
pub fn default_noise_grid() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.25).collect()
}

/// Either a directory holding the standard file names or explicit paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub dir: Option<PathBuf>,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

/// Sizes of the seeded train/validation/test subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsetConfig {
    /// Training images; `None` keeps everything not used for validation.
    pub train: Option<usize>,
    /// Validation images carved out of the training file.
    pub val: usize,
    /// Test images; `None` keeps the whole test file.
    pub test: Option<usize>,
    pub seed: u64,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        Self {
            train: None,
            val: 5000,
            test: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Architecture and optimizer knobs common to all models of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub hidden: usize,
    pub hidden_layers: usize,
    pub timesteps: usize,
    pub beta_out: f64,
    pub batch_size: usize,
    pub eval_batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub mean_field_eval: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let m = MlpConfig::default();
        Self {
            hidden: m.hidden[0],
            hidden_layers: m.hidden.len(),
            timesteps: m.timesteps,
            beta_out: m.beta_out,
            batch_size: m.batch_size,
            eval_batch_size: m.eval_batch_size,
            learning_rate: m.learning_rate,
            epochs: m.epochs,
            adam_beta1: m.adam_beta1,
            adam_beta2: m.adam_beta2,
            adam_epsilon: m.adam_epsilon,
            bn_momentum: m.bn_momentum,
            bn_epsilon: m.bn_epsilon,
            mean_field_eval: m.mean_field_eval,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronKind {
    Binary,
    Mw,
    Lif,
}

impl NeuronKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Binary => "binary",
            Self::Mw => "mw",
            Self::Lif => "lif",
        }
    }
}

/// One network variant, e.g. `binary_H200`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub kind: NeuronKind,
    /// Overrides `training.hidden`.
    #[serde(default)]
    pub hidden: Option<usize>,
    #[serde(default)]
    pub device: Option<DeviceSource>,
    #[serde(default)]
    pub vmap: Option<VoltageMap>,
    #[serde(default)]
    pub lif: Option<LifParams>,
}

/// Where a stochastic neuron's switching curves come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DeviceSource {
    /// The built-in synthetic calibration.
    Default,
    /// One curve for a binary device, four transitions for an MW device.
    Inline { curves: Vec<DeviceCurve> },
    /// Device-table JSON file.
    Table { path: PathBuf },
    /// Cycling CSVs fitted with the sigmoid MLE, one per curve.
    Csv { paths: Vec<PathBuf> },
}

impl DeviceSource {
    fn curves(&self, kind: NeuronKind) -> Result<Vec<DeviceCurve>> {
        let (binary, mw) = synthesize_default_models();
        match self {
            Self::Default => Ok(match kind {
                NeuronKind::Mw => mw.transitions().to_vec(),
                _ => vec![binary.into()],
            }),
            Self::Inline { curves } => Ok(curves.clone()),
            Self::Table { path } => {
                let table: DeviceTable = read_json(path)?;
                match (kind, table.kind) {
                    (NeuronKind::Binary, DeviceKind::Binary) => Ok(vec![table.to_binary_curve()?]),
                    (NeuronKind::Mw, DeviceKind::Mw) => {
                        Ok(table.to_mw_model()?.transitions().to_vec())
                    }
                    _ => Err(CliError::Config(format!(
                        "{}: device table kind does not match a {} neuron",
                        path.display(),
                        kind.name()
                    ))),
                }
            }
            Self::Csv { paths } => paths
                .iter()
                .map(|p| {
                    let file = std::fs::File::open(p).map_err(|e| CliError::io(p, e))?;
                    let recs = crate::cycling::read_records(std::io::BufReader::new(file))?;
                    Ok(fit_sigmoid(&recs)?.model.into())
                })
                .collect(),
        }
    }
}

impl ModelSpec {
    pub fn neuron(&self) -> Result<NeuronModel> {
        let source = self.device.clone().unwrap_or(DeviceSource::Default);
        let neuron = match self.kind {
            NeuronKind::Binary => {
                let mut curves = source.curves(self.kind)?;
                if curves.len() != 1 {
                    return Err(CliError::Config(format!(
                        "model {}: a binary neuron needs exactly one switching curve, got {}",
                        self.name,
                        curves.len()
                    )));
                }
                let curve = curves.pop().expect("one curve");
                let mut n = BinaryNeuronParams::with_default_map(curve);
                if let Some(v) = self.vmap {
                    n.vmap = v;
                }
                NeuronModel::Binary(n)
            }
            NeuronKind::Mw => {
                let device = MwDeviceModel::new(source.curves(self.kind)?)?;
                let mut n = MwNeuronParams::with_default_map(device);
                if let Some(v) = self.vmap {
                    n.vmap = v;
                }
                NeuronModel::Mw(n)
            }
            NeuronKind::Lif => {
                if self.device.is_some() || self.vmap.is_some() {
                    return Err(CliError::Config(format!(
                        "model {}: LIF neurons take no device or vmap",
                        self.name
                    )));
                }
                NeuronModel::Lif(self.lif.unwrap_or_default())
            }
        };
        if self.kind != NeuronKind::Lif && self.lif.is_some() {
            return Err(CliError::Config(format!(
                "model {}: `lif` block on a {} neuron",
                self.name,
                self.kind.name()
            )));
        }
        neuron.validate()?;
        Ok(neuron)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.models.is_empty() {
            return fail("at least one model is required".into());
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            if m.name.is_empty() || m.name.contains(['/', '\\']) || m.name.starts_with('.') {
                return fail(format!(
                    "model name `{}` is not usable as a directory name",
                    m.name
                ));
            }
            if !names.insert(m.name.as_str()) {
                return fail(format!("duplicate model name `{}`", m.name));
            }
        }
        if self.seeds.is_empty() {
            return fail("seed list is empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return fail("seed list has duplicates".into());
        }
        if self
            .noise_grid
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return fail("noise grid values must be finite and non-negative".into());
        }
        if !self.noise_grid.contains(&0.0) {
            return fail("noise grid must contain 0 (normalization anchor)".into());
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if self.training.hidden_layers == 0 {
            return fail("hidden_layers must be at least 1".into());
        }
        if self.subset.val == 0 {
            return fail("subset.val must be positive".into());
        }
        let d = &self.dataset;
        let explicit = [
            &d.train_images,
            &d.train_labels,
            &d.test_images,
            &d.test_labels,
        ];
        if d.dir.is_none() && explicit.iter().any(|p| p.is_none()) {
            return fail("dataset needs `dir` or all four explicit file paths".into());
        }
        Ok(())
    }

    /// Full network config of one model; device sources are resolved here.
    pub fn mlp_config(&self, model: &ModelSpec) -> Result<MlpConfig> {
        let t = &self.training;
        let neuron = model.neuron()?;
        let hidden = model.hidden.unwrap_or(t.hidden);
        let config = MlpConfig {
            input: 784,
            hidden: vec![hidden; t.hidden_layers],
            output: dwsnn_core::encoding::CLASSES,
            neurons: vec![neuron; t.hidden_layers],
            timesteps: t.timesteps,
            beta_out: t.beta_out,
            batch_size: t.batch_size,
            eval_batch_size: t.eval_batch_size,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_epsilon: t.adam_epsilon,
            bn_momentum: t.bn_momentum,
            bn_epsilon: t.bn_epsilon,
            mean_field_eval: t.mean_field_eval,
        };
        config
            .validate()
            .map_err(|e| CliError::Config(format!("model {}: {e}", model.name)))?;
        Ok(config)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"dataset": {"dir": "data"}, "models": [{"name": "lif", "kind": "lif"}]}"#;

    #[test]
    fn shipped_examples_parse() {
        for text in [
            include_str!("../../../docs/experiment.json"),
            include_str!("../../../docs/desk.json"),
        ] {
            let c = ExperimentConfig::from_json(text).unwrap();
            for m in &c.models {
                c.mlp_config(m).unwrap();
            }
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.noise_grid.len(), 13);
        assert_eq!(c.noise_grid[12], 3.0);
        let m = c.mlp_config(&c.models[0]).unwrap();
        assert_eq!(m.hidden, vec![200, 200]);
        assert_eq!(m.learning_rate, 1e-3);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = r#"{"dataset": {"dir": "d"}, "models": [], "learning_rat": 1}"#;
        let err = ExperimentConfig::from_json(text).unwrap_err();
        assert_eq!(err.class(), "config");
        assert!(err.to_string().contains("learning_rat"), "{err}");
        let nested =
            r#"{"dataset": {"dir": "d"}, "models": [{"name": "a", "kind": "lif", "colour": 1}]}"#;
        assert!(ExperimentConfig::from_json(nested)
            .unwrap_err()
            .to_string()
            .contains("colour"));
    }

    #[test]
    fn device_sources() {
        let text = r#"{"dataset": {"dir": "d"}, "models": [
            {"name": "b", "kind": "binary", "device": {"source": "default"}},
            {"name": "m", "kind": "mw"},
            {"name": "b2", "kind": "binary", "device": {"source": "inline", "curves": [
                {"form": "sigmoid", "v50": 1.7, "width": 0.1, "domain_lo": 1.0, "domain_hi": 2.2}]}}
        ]}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        for m in &c.models {
            assert_eq!(c.mlp_config(m).unwrap().neurons[0].name(), m.kind.name());
        }
        let bad = r#"{"dataset": {"dir": "d"}, "models": [{"name": "m", "kind": "mw", "device": {"source": "inline", "curves": []}}]}"#;
        let c = ExperimentConfig::from_json(bad).unwrap();
        assert!(c.mlp_config(&c.models[0]).is_err());
    }

    #[test]
    fn grid_needs_anchor_and_unique_names() {
        let no_anchor = r#"{"dataset": {"dir": "d"}, "models": [{"name": "a", "kind": "lif"}], "noise_grid": [0.5]}"#;
        assert!(ExperimentConfig::from_json(no_anchor).is_err());
        let dup = r#"{"dataset": {"dir": "d"}, "models": [{"name": "a", "kind": "lif"}, {"name": "a", "kind": "mw"}]}"#;
        assert!(ExperimentConfig::from_json(dup).is_err());
    }
}
