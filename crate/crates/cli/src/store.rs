//! On-disk run artifacts: records, trained parameters and metrics CSVs.

use std::path::Path;

use dwsnn_core::train::{MlpConfig, ModelParams, NoiseRow, RunRecord};
use dwsnn_core::Real;
use serde::{Deserialize, Serialize};

use crate::config::NeuronKind;
use crate::error::{CliError, Result};

/// Trained parameters together with everything needed to evaluate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredModel {
    pub model: String,
    pub kind: NeuronKind,
    pub seed: u64,
    pub final_val_acc: f64,
    pub config: MlpConfig,
    pub params: StoredParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "precision", content = "values", rename_all = "lowercase")]
pub enum StoredParams {
    F32(ModelParams<f32>),
    F64(ModelParams<f64>),
}

/// Element types that can be written into a [`StoredParams`].
pub trait Storable: Real {
    fn store(params: ModelParams<Self>) -> StoredParams;
}

impl Storable for f32 {
    fn store(params: ModelParams<Self>) -> StoredParams {
        StoredParams::F32(params)
    }
}

impl Storable for f64 {
    fn store(params: ModelParams<Self>) -> StoredParams {
        StoredParams::F64(params)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// `epoch,train_loss,val_acc`; epoch 0 is the untrained network.
pub fn epoch_csv(record: &RunRecord) -> String {
    let mut out = format!("epoch,train_loss,val_acc\n0,,{}\n", record.initial_val_acc);
    for e in &record.epochs {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_acc));
    }
    out
}

/// `sigma,raw_acc,norm_acc`.
pub fn noise_csv(rows: &[NoiseRow]) -> String {
    let mut out = String::from("sigma,raw_acc,norm_acc\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.sigma, r.raw_acc, r.norm_acc));
    }
    out
}

/// Every `runs/<model>/<seed dir>/model.json` under `dir`, sorted by path.
pub fn find_models(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let runs = dir.join("runs");
    let mut found = Vec::new();
    let list = |p: &Path| -> Result<Vec<std::path::PathBuf>> {
        let mut v: Vec<_> = std::fs::read_dir(p)
            .map_err(|e| CliError::io(p, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        v.sort();
        Ok(v)
    };
    if !runs.is_dir() {
        return Ok(found);
    }
    for model_dir in list(&runs)? {
        for run_dir in list(&model_dir)? {
            let file = run_dir.join("model.json");
            if file.is_file() {
                found.push(file);
            }
        }
    }
    Ok(found)
}
