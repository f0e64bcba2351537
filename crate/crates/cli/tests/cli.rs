//! End-to-end runs of the `dwsnn` binary on small synthetic inputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dwsnn::idx::export_idx;
use dwsnn_core::encoding::ImageSet;
use flate2::write::GzEncoder;
use std::io::Write;

fn dwsnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwsnn"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn single_error_line(o: &Output, class: &str) {
    assert!(!o.status.success());
    let err = stderr(o);
    let last = err.trim_end().lines().last().unwrap_or("");
    assert!(last.starts_with(&format!("error[{class}]: ")), "{err}");
}

/// Ten classes, each a bright horizontal band at its own height.
fn banded_set(n: usize, offset: usize) -> ImageSet {
    let mut pixels = vec![0.0f32; n * 784];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i + offset) % 10;
        labels.push(class as u8);
        let row0 = 2 + class * 2;
        for r in row0..row0 + 3 {
            for c in 4..24 {
                pixels[i * 784 + r * 28 + c] = 0.6 + 0.4 * (((i * 31 + c) % 7) as f32 / 7.0);
            }
        }
    }
    ImageSet::new(28, 28, pixels, labels).unwrap()
}

fn write_dataset(dir: &Path) {
    let gz = |bytes: &[u8]| {
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::fast());
        enc.write_all(bytes).unwrap();
        enc.finish().unwrap()
    };
    let (ti, tl) = export_idx(&banded_set(300, 0));
    std::fs::write(dir.join("train-images-idx3-ubyte.gz"), gz(&ti)).unwrap();
    std::fs::write(dir.join("train-labels-idx1-ubyte.gz"), gz(&tl)).unwrap();
    let (ei, el) = export_idx(&banded_set(100, 3));
    std::fs::write(dir.join("t10k-images-idx3-ubyte"), ei).unwrap();
    std::fs::write(dir.join("t10k-labels-idx1-ubyte"), el).unwrap();
}

fn small_config(dir: &Path, epochs: usize, extra: &str) -> PathBuf {
    let data = dir.join("data");
    std::fs::create_dir_all(&data).unwrap();
    write_dataset(&data);
    let text = format!(
        r#"{{
  "dataset": {{"dir": "{}"}},
  "subset": {{"train": 200, "val": 100, "test": 100, "seed": 1}},
  "training": {{"hidden": 16, "timesteps": 4, "batch_size": 50, "epochs": {epochs}}},
  "models": [
    {{"name": "binary_H16", "kind": "binary"}},
    {{"name": "mw_H16", "kind": "mw"}},
    {{"name": "lif_H16", "kind": "lif"}}
  ],
  "seeds": [1, 2],
  "noise_grid": [0, 0.5, 1, 1.5, 2, 2.5, 3]{extra}
}}"#,
        data.display()
    );
    let path = dir.join("exp.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn energy_prints_paper_numbers() {
    let o = dwsnn(&[
        "energy",
        "--voltage",
        "1.8",
        "--r2pt",
        "1029",
        "--r4pt",
        "365",
        "--duration-ns",
        "40",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "v_track=0.638 V, energy=44.7 pJ");
    let zero = dwsnn(&["energy", "--voltage", "0"]);
    assert_eq!(stdout(&zero).trim(), "v_track=0.000 V, energy=0.0 pJ");
    single_error_line(
        &dwsnn(&["energy", "--r2pt", "300", "--r4pt", "365"]),
        "range",
    );
}

#[test]
fn device_sim_is_deterministic_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "device-sim".to_string(),
            "--model=default-binary".into(),
            "--voltage=1.0,1.12,1.24,1.36,1.48,1.6,1.72,1.84,1.96,2.08,2.2".into(),
            "--cycles=1000".into(),
            "--seed=7".into(),
            format!("--out={}", out.display()),
        ]
    };
    for out in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_dwsnn"))
            .args(args(out))
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(read(&a).starts_with("voltage_V,cycle_index,first_switch_pulse,max_pulses\n1.0,0,"));

    let fit = dir.path().join("fit.json");
    let o = dwsnn(&[
        "device-fit",
        "--input",
        a.to_str().unwrap(),
        "--out",
        fit.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&read(&fit)).unwrap();
    assert!(
        (v["model"]["v50"].as_f64().unwrap() - 1.8).abs() <= 0.01,
        "{v}"
    );
    assert_eq!(v["points"].as_array().unwrap().len(), 11);

    // The fitted model file is itself a valid --model.
    let o = dwsnn(&[
        "device-sim",
        "--model",
        fit.to_str().unwrap(),
        "--voltage",
        "1.8",
        "--cycles",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn certain_device_switches_on_first_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("sure.json");
    std::fs::write(
        &table,
        r#"{"kind": "binary", "voltages_V": [1.0, 2.0], "probabilities": [1.0, 1.0], "domain_V": [1.0, 2.0]}"#,
    )
    .unwrap();
    let o = dwsnn(&[
        "device-sim",
        "--model",
        table.to_str().unwrap(),
        "--voltage",
        "1.5",
        "--cycles",
        "15",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 15);
    assert!(
        rows.iter().all(|r| r.split(',').nth(2) == Some("1")),
        "{rows:?}"
    );
}

#[test]
fn device_errors_are_single_lines() {
    let dir = tempfile::tempdir().unwrap();
    single_error_line(
        &dwsnn(&["device-sim", "--model", "nonsense", "--voltage", "1.8"]),
        "usage",
    );

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = dwsnn(&["device-fit", "--input", empty.to_str().unwrap()]);
    single_error_line(&o, "non-identifiable");
    assert!(stderr(&o).contains("no records"), "{}", stderr(&o));

    let single = dir.path().join("single.csv");
    let o = dwsnn(&[
        "device-sim",
        "--voltage",
        "1.8",
        "--cycles",
        "50",
        "--out",
        single.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    single_error_line(
        &dwsnn(&["device-fit", "--input", single.to_str().unwrap()]),
        "non-identifiable",
    );

    let garbage = dir.path().join("garbage.csv");
    std::fs::write(&garbage, "a,b\n1,2\n").unwrap();
    single_error_line(
        &dwsnn(&["device-fit", "--input", garbage.to_str().unwrap()]),
        "format",
    );

    single_error_line(&dwsnn(&["energy", "--config", "x.json"]), "usage");
    single_error_line(&dwsnn(&["frobnicate"]), "usage");
}

#[test]
fn device_table_exports_both_kinds() {
    let o = dwsnn(&["device-table", "--model", "default-mw", "--points", "12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "mw");
    assert_eq!(v["domain_V"], serde_json::json!([0.0, 5.5]));
    assert_eq!(v["probabilities"].as_array().unwrap().len(), 4);
    let o = dwsnn(&["device-table"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "binary");
    assert_eq!(v["voltages_V"].as_array().unwrap().len(), 11);
}

#[test]
fn mw_ramp_simulation_writes_states() {
    let o = dwsnn(&[
        "device-sim",
        "--model",
        "default-mw",
        "--voltage",
        "0,5.5",
        "--cycles",
        "10",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("v_max_V,cycle_index,final_state,ramp_steps\n"));
    let zero_rows: Vec<&str> = text.lines().filter(|l| l.starts_with("0,")).collect();
    assert_eq!(zero_rows.len(), 10);
    assert!(zero_rows.iter().all(|r| r.split(',').nth(2) == Some("1")));
}

#[test]
fn config_errors_stop_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"dataset": {"dir": "d"}, "models": [{"name": "a", "kind": "lif"}], "epochz": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = dwsnn(&[
        "train",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    single_error_line(&o, "config");
    assert!(stderr(&o).contains("epochz"));

    let missing = dir.path().join("missing.json");
    std::fs::write(
        &missing,
        r#"{"dataset": {"dir": "/nonexistent/fashion"}, "models": [{"name": "a", "kind": "lif"}]}"#,
    )
    .unwrap();
    let o = dwsnn(&[
        "train",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    single_error_line(&o, "data");
    assert!(!out.exists());

    let cfg = small_config(dir.path(), 0, "");
    let o = dwsnn(&[
        "sweep-noise",
        "--config",
        cfg.to_str().unwrap(),
        "--models",
        out.to_str().unwrap(),
        "--out",
        dir.path().join("sw").to_str().unwrap(),
    ]);
    single_error_line(&o, "data");
}

#[test]
fn untrained_runs_produce_valid_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 0, "");
    let out = dir.path().join("run");
    let o = dwsnn(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for model in ["binary_H16", "mw_H16", "lif_H16"] {
        for seed in [1, 2] {
            let run = out.join("runs").join(model).join(format!("seed{seed}"));
            let rec: serde_json::Value =
                serde_json::from_str(&read(&run.join("record.json"))).unwrap();
            assert_eq!(rec["status"], "complete");
            assert_eq!(rec["epochs"].as_array().unwrap().len(), 0);
            // 100 balanced validation images: chance within three binomial sigma.
            let acc = rec["final_val_acc"].as_f64().unwrap();
            assert!((acc - 0.1).abs() <= 0.09, "{model}: {acc}");
            assert!(read(&run.join("metrics.csv")).starts_with("epoch,train_loss,val_acc\n0,,"));
        }
    }
    let fig = read(&out.join("fig3_val_acc.csv"));
    assert_eq!(
        fig.lines().next().unwrap(),
        "epoch,binary_H16_mean,binary_H16_std,mw_H16_mean,mw_H16_std,lif_H16_mean,lif_H16_std"
    );
    assert!(read(&out.join("fig3_val_acc.svg")).contains("<polyline"));
}

#[test]
fn train_and_sweep_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2, "");
    let out1 = dir.path().join("run1");
    let out4 = dir.path().join("run4");
    for (out, threads) in [(&out1, "1"), (&out4, "4")] {
        let o = dwsnn(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for rel in [
        "runs/binary_H16/seed1/record.json",
        "runs/mw_H16/seed2/model.json",
        "runs/lif_H16/seed1/metrics.csv",
        "fig3_val_acc.csv",
        "summary.csv",
        "config.json",
        "fig3_val_acc.svg",
    ] {
        assert_eq!(
            read(&out1.join(rel)),
            read(&out4.join(rel)),
            "{rel} differs across thread counts"
        );
    }
    let rec: serde_json::Value =
        serde_json::from_str(&read(&out1.join("runs/lif_H16/seed1/record.json"))).unwrap();
    assert_eq!(rec["epochs"].as_array().unwrap().len(), 2);
    assert!(rec["test_acc"].as_f64().is_some());
    assert_eq!(rec["config"]["learning_rate"], 0.001);

    let sweep = dir.path().join("sweep");
    let o = dwsnn(&[
        "sweep-noise",
        "--config",
        cfg.to_str().unwrap(),
        "--models",
        out1.to_str().unwrap(),
        "--out",
        sweep.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("crossover binary > lif"),
        "{}",
        stdout(&o)
    );
    let table = read(&sweep.join("fig4.csv"));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "sigma,binary_raw,mw_raw,lif_raw,binary_norm,mw_norm,lif_norm"
    );
    assert_eq!(lines.len(), 8);
    assert_eq!(
        lines[1],
        format!(
            "0,{},1,1,1",
            lines[1]
                .split(',')
                .skip(1)
                .take(3)
                .collect::<Vec<_>>()
                .join(",")
        )
    );
    let selected: serde_json::Value =
        serde_json::from_str(&read(&sweep.join("selected.json"))).unwrap();
    assert_eq!(selected.as_array().unwrap().len(), 3);

    let all = dir.path().join("sweep_all");
    let o = dwsnn(&[
        "sweep-noise",
        "--config",
        cfg.to_str().unwrap(),
        "--models",
        out1.to_str().unwrap(),
        "--out",
        all.to_str().unwrap(),
        "--select",
        "all",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(&all.join("fig4b_raw.csv"))
        .starts_with("sigma,binary_mean,binary_std,mw_mean,mw_std,lif_mean,lif_std\n"));
    assert_eq!(std::fs::read_dir(all.join("runs")).unwrap().count(), 6);
}
