//! `train` and `sweep-noise`: model × seed fan-out, per-run artifacts and
//! aggregate figure tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dwsnn_core::rng::{derive_key, Purpose};
use dwsnn_core::train::{evaluate, noise_sweep, train, MlpConfig, NoiseRow, RunRecord, RunStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelSpec, NeuronKind, Precision};
use crate::data::{check_files, load_splits, Splits};
use crate::error::{CliError, Result};
use crate::store::{
    create_dir, epoch_csv, find_models, noise_csv, write_json, write_text, Storable, StoredModel,
    StoredParams,
};
use crate::table::{chart_means, FigureTable};

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Directory of one run, relative to the experiment output directory.
pub fn run_dir(out: &Path, model: &str, seed: u64) -> PathBuf {
    out.join("runs").join(model).join(format!("seed{seed}"))
}

struct Job<'a> {
    spec: &'a ModelSpec,
    config: MlpConfig,
    seed: u64,
}

/// Train every (model, seed) pair. Outputs depend on the config only, not on
/// the thread count: runs are independent and aggregated in config order.
pub fn run_train(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<Vec<RunRecord>> {
    check_files(&cfg.dataset)?;
    let mut jobs = Vec::new();
    for spec in &cfg.models {
        let config = cfg.mlp_config(spec)?;
        for &seed in &cfg.seeds {
            jobs.push(Job {
                spec,
                config: config.clone(),
                seed,
            });
        }
    }
    let splits = load_splits(&cfg.dataset, &cfg.subset)?;
    create_dir(out)?;
    write_json(&out.join("config.json"), cfg)?;

    let results: Vec<Result<RunRecord>> = pool(threads)?.install(|| {
        jobs.par_iter()
            .map(|job| match cfg.precision {
                Precision::F32 => run_one::<f32>(cfg, job, &splits, out),
                Precision::F64 => run_one::<f64>(cfg, job, &splits, out),
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    write_training_tables(cfg, &records, out)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(records),
    }
}

fn run_one<S: Storable>(
    cfg: &ExperimentConfig,
    job: &Job,
    splits: &Splits,
    out: &Path,
) -> Result<RunRecord> {
    let dir = run_dir(out, &job.spec.name, job.seed);
    create_dir(&dir)?;
    let record_path = dir.join("record.json");
    let tag = format!("[{} seed {}]", job.spec.name, job.seed);
    let start = Instant::now();
    let mut write_err = None;
    let outcome = train::<S>(
        &job.config,
        &splits.train,
        &splits.val,
        job.seed,
        |partial| {
            let mut rec = partial.clone();
            rec.label = Some(job.spec.name.clone());
            eprintln!(
                "{tag} epoch {}/{} val_acc={:.4} ({:.1} s)",
                rec.epochs.len(),
                job.config.epochs,
                rec.final_val_acc,
                start.elapsed().as_secs_f64()
            );
            if let Err(e) = write_json(&record_path, &rec) {
                write_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let mut record = outcome.record;
    record.label = Some(job.spec.name.clone());
    if record.status == RunStatus::Complete && !splits.test.is_empty() {
        let eval_seed = derive_key(job.seed, Purpose::Eval, &[1]);
        record.test_acc = Some(evaluate(
            &outcome.params,
            &job.config,
            &splits.test,
            eval_seed,
        )?);
    }
    if cfg.record_wall_clock {
        record.wall_clock_s = Some(start.elapsed().as_secs_f64());
    }
    if let Some(d) = &record.diagnostic {
        eprintln!("{tag} {:?}: {d}", record.status);
    }
    write_json(&record_path, &record)?;
    write_text(&dir.join("metrics.csv"), &epoch_csv(&record))?;
    write_json(
        &dir.join("model.json"),
        &StoredModel {
            model: job.spec.name.clone(),
            kind: job.spec.kind,
            seed: job.seed,
            final_val_acc: record.final_val_acc,
            config: job.config.clone(),
            params: S::store(outcome.params),
        },
    )?;
    Ok(record)
}

/// Validation accuracy per epoch, mean ± std over seeds for each model, plus
/// a per-run summary.
fn write_training_tables(cfg: &ExperimentConfig, records: &[RunRecord], out: &Path) -> Result<()> {
    let epochs = cfg.training.epochs;
    let mut fig = FigureTable::new(
        "fig3_val_acc",
        "epoch",
        (0..=epochs).map(|e| e as f64).collect(),
    );
    for spec in &cfg.models {
        let series: Vec<Vec<f64>> = records
            .iter()
            .filter(|r| {
                r.label.as_deref() == Some(spec.name.as_str()) && r.status == RunStatus::Complete
            })
            .map(|r| {
                std::iter::once(r.initial_val_acc)
                    .chain(r.epochs.iter().map(|e| e.val_acc))
                    .collect()
            })
            .collect();
        if !series.is_empty() {
            fig.push_mean_std(&spec.name, &series)?;
        }
    }
    fig.write_csv(&out.join("fig3_val_acc.csv"))?;
    write_text(
        &out.join("fig3_val_acc.svg"),
        &chart_means(&fig, "Validation accuracy", "validation accuracy"),
    )?;

    let mut summary = String::from("model,seed,status,final_val_acc,test_acc\n");
    for r in records {
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label.as_deref().unwrap_or(""),
            r.seed,
            serde_json::to_value(r.status)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            r.final_val_acc,
            r.test_acc.map(|a| a.to_string()).unwrap_or_default()
        ));
    }
    write_text(&out.join("summary.csv"), &summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// The highest clean-validation-accuracy run of each neuron kind.
    Best,
    /// Every run; tables report mean ± std per kind.
    All,
}

/// Noise sweep of one trained run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweptRun {
    pub model: String,
    pub kind: NeuronKind,
    pub seed: u64,
    pub final_val_acc: f64,
    pub rows: Vec<NoiseRow>,
}

/// Smallest grid sigma at which a stochastic net beats LIF, and the smallest
/// from which on it never falls behind again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub kind: NeuronKind,
    pub first_above: Option<f64>,
    pub sustained_from: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub runs: Vec<SweptRun>,
    /// Per-kind mean raw and normalized accuracy over the grid.
    pub raw: BTreeMap<NeuronKind, Vec<f64>>,
    pub norm: BTreeMap<NeuronKind, Vec<f64>>,
    pub crossovers: Vec<Crossover>,
}

pub fn crossover(grid: &[f64], stochastic: &[f64], lif: &[f64], kind: NeuronKind) -> Crossover {
    let above: Vec<bool> = stochastic.iter().zip(lif).map(|(s, l)| s > l).collect();
    let first_above = grid
        .iter()
        .zip(&above)
        .find(|(&s, &a)| s > 0.0 && a)
        .map(|(&s, _)| s);
    let mut sustained_from = None;
    for i in (0..grid.len()).rev() {
        if grid[i] <= 0.0 || stochastic[i] < lif[i] {
            break;
        }
        sustained_from = Some(grid[i]);
    }
    Crossover {
        kind,
        first_above,
        sustained_from,
    }
}

/// Corrupt the configured test subset at every grid sigma (shared noise
/// seed) and evaluate the selected models.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    models_dir: &Path,
    out: &Path,
    selection: Selection,
    threads: usize,
) -> Result<SweepOutcome> {
    let files = find_models(models_dir)?;
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "no trained models found under {}",
            models_dir.join("runs").display()
        )));
    }
    check_files(&cfg.dataset)?;
    let mut models: Vec<StoredModel> = files
        .iter()
        .map(|f| crate::config::read_json(f))
        .collect::<Result<_>>()?;
    if selection == Selection::Best {
        let mut best: BTreeMap<NeuronKind, StoredModel> = BTreeMap::new();
        for m in models {
            match best.get(&m.kind) {
                Some(b) if b.final_val_acc >= m.final_val_acc => {}
                _ => {
                    best.insert(m.kind, m);
                }
            }
        }
        models = best.into_values().collect();
    }
    let test = load_splits(&cfg.dataset, &cfg.subset)?.test;
    let grid = cfg.noise_grid.clone();

    let swept: Vec<Result<SweptRun>> = pool(threads)?.install(|| {
        models
            .par_iter()
            .map(|m| {
                let rows = match &m.params {
                    StoredParams::F32(p) => {
                        noise_sweep(p, &m.config, &test, &grid, cfg.noise_seed)?
                    }
                    StoredParams::F64(p) => {
                        noise_sweep(p, &m.config, &test, &grid, cfg.noise_seed)?
                    }
                };
                eprintln!(
                    "[{} seed {}] swept {} noise levels",
                    m.model,
                    m.seed,
                    rows.len()
                );
                Ok(SweptRun {
                    model: m.model.clone(),
                    kind: m.kind,
                    seed: m.seed,
                    final_val_acc: m.final_val_acc,
                    rows,
                })
            })
            .collect()
    });
    let runs: Vec<SweptRun> = swept.into_iter().collect::<Result<_>>()?;

    create_dir(&out.join("runs"))?;
    for r in &runs {
        write_text(
            &out.join("runs")
                .join(format!("{}_seed{}.csv", r.model, r.seed)),
            &noise_csv(&r.rows),
        )?;
    }
    write_json(
        &out.join("selected.json"),
        &runs
            .iter()
            .map(|r| (&r.model, r.seed, r.final_val_acc))
            .collect::<Vec<_>>(),
    )?;

    let mut by_kind: BTreeMap<NeuronKind, Vec<&SweptRun>> = BTreeMap::new();
    for r in &runs {
        by_kind.entry(r.kind).or_default().push(r);
    }
    let mut raw_tab = FigureTable::new("fig4b_raw", "sigma", grid.clone());
    let mut norm_tab = FigureTable::new("fig4c_norm", "sigma", grid.clone());
    let mut combined = FigureTable::new("fig4", "sigma", grid.clone());
    let (mut raw, mut norm) = (BTreeMap::new(), BTreeMap::new());
    for (kind, rs) in &by_kind {
        let raws: Vec<Vec<f64>> = rs
            .iter()
            .map(|r| r.rows.iter().map(|x| x.raw_acc).collect())
            .collect();
        let norms: Vec<Vec<f64>> = rs
            .iter()
            .map(|r| r.rows.iter().map(|x| x.norm_acc).collect())
            .collect();
        raw_tab.push_mean_std(kind.name(), &raws)?;
        norm_tab.push_mean_std(kind.name(), &norms)?;
        let rm = crate::table::mean_std(&raws).0;
        let nm = crate::table::mean_std(&norms).0;
        raw.insert(*kind, rm);
        norm.insert(*kind, nm);
    }
    for (kind, v) in &raw {
        combined.push(
            &format!("{}_raw", kind.name()),
            v.iter().copied().map(Some).collect(),
        )?;
    }
    for (kind, v) in &norm {
        combined.push(
            &format!("{}_norm", kind.name()),
            v.iter().copied().map(Some).collect(),
        )?;
    }
    combined.write_csv(&out.join("fig4.csv"))?;
    raw_tab.write_csv(&out.join("fig4b_raw.csv"))?;
    norm_tab.write_csv(&out.join("fig4c_norm.csv"))?;
    write_text(
        &out.join("fig4b_raw.svg"),
        &chart_means(&raw_tab, "Raw test accuracy under noise", "accuracy"),
    )?;
    write_text(
        &out.join("fig4c_norm.svg"),
        &chart_means(
            &norm_tab,
            "Normalized test accuracy under noise",
            "accuracy / clean accuracy",
        ),
    )?;

    let mut crossovers = Vec::new();
    if let Some(lif) = raw.get(&NeuronKind::Lif) {
        for kind in [NeuronKind::Binary, NeuronKind::Mw] {
            if let Some(s) = raw.get(&kind) {
                crossovers.push(crossover(&grid, s, lif, kind));
            }
        }
    }
    write_json(&out.join("crossover.json"), &crossovers)?;
    Ok(SweepOutcome {
        runs,
        raw,
        norm,
        crossovers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossover_first_and_sustained() {
        let grid = [0.0, 0.5, 1.0, 1.5, 2.0];
        let lif = [0.9, 0.6, 0.3, 0.2, 0.1];
        let bin = [0.8, 0.65, 0.25, 0.3, 0.2];
        let c = crossover(&grid, &bin, &lif, NeuronKind::Binary);
        assert_eq!(c.first_above, Some(0.5));
        assert_eq!(c.sustained_from, Some(1.5));
        let never = crossover(&grid, &[0.0; 5], &lif, NeuronKind::Mw);
        assert_eq!((never.first_above, never.sustained_from), (None, None));
    }
}
