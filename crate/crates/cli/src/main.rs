use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dwsnn::config::ExperimentConfig;
use dwsnn::devices::{self, DeviceRef};
use dwsnn::experiment::{run_sweep, run_train, Selection};
use dwsnn::store::{write_json, write_text};
use dwsnn::{CliError, Result};
use dwsnn_core::device::DEFAULT_RAMP_STEPS;

/// Stochastic domain-wall neuron experiments: device characterization,
/// spiking-network training and noise sweeps.
#[derive(Parser)]
#[command(name = "dwsnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config JSON (train, sweep-noise).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override: the simulation seed, the single training seed, or the
    /// noise seed of a sweep.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a switching sigmoid to a cycling-record CSV.
    DeviceFit {
        /// Cycling CSV as written by device-sim.
        #[arg(long)]
        input: PathBuf,
    },
    /// Simulate pulse cycling (binary) or voltage ramps (MW) and write CSV.
    DeviceSim {
        /// default-binary, default-mw, or a model JSON file.
        #[arg(long, default_value = "default-binary")]
        model: String,
        /// Pulse voltage(s) in volts; ramp peaks for MW models.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        voltage: Vec<f64>,
        /// Independent cycles per voltage.
        #[arg(long, default_value_t = 15)]
        cycles: usize,
        /// Pulses before a binary cycle is recorded as unswitched.
        #[arg(long, default_value_t = 64)]
        max_pulses: u32,
        /// Pulses per MW voltage ramp.
        #[arg(long, default_value_t = DEFAULT_RAMP_STEPS)]
        ramp_steps: usize,
    },
    /// Export a device model as device-table JSON.
    DeviceTable {
        /// default-binary, default-mw, or a model JSON file.
        #[arg(long, default_value = "default-binary")]
        model: String,
        /// Evenly spaced voltages across the device domain.
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
    /// Train every configured model for every seed.
    Train {
        /// Worker threads; runs are spread across them.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate trained models on Gaussian-corrupted test images.
    SweepNoise {
        /// Output directory of a `train` run.
        #[arg(long)]
        models: PathBuf,
        /// Sweep the best seed per model, or every seed.
        #[arg(long, value_enum, default_value_t = Select::Best)]
        select: Select,
        /// Worker threads; runs are spread across them.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write energy of one pulse through the track.
    Energy {
        /// Applied pulse voltage in volts.
        #[arg(long, default_value_t = 1.8)]
        voltage: f64,
        /// Two-point resistance in ohms.
        #[arg(long, default_value_t = 1029.0)]
        r2pt: f64,
        /// Four-point track resistance in ohms.
        #[arg(long, default_value_t = 365.0)]
        r4pt: f64,
        /// Pulse duration in nanoseconds.
        #[arg(long, default_value_t = 40.0)]
        duration_ns: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Select {
    Best,
    All,
}

fn reject(flag: &str, present: bool, command: &str) -> Result<()> {
    if present {
        Err(CliError::Usage(format!(
            "--{flag} is not used by {command}"
        )))
    } else {
        Ok(())
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{command} needs --{flag}")))
}

fn threads(flag: Option<usize>, cfg: &ExperimentConfig) -> usize {
    flag.or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DeviceFit { input } => {
            reject("config", cli.config.is_some(), "device-fit")?;
            reject("seed", cli.seed.is_some(), "device-fit")?;
            let fit = devices::fit_file(&input)?;
            println!(
                "v50={:.4} V, width={:.4} V, log_likelihood={:.3}",
                fit.model.v50, fit.model.width, fit.log_likelihood
            );
            for p in &fit.points {
                println!(
                    "  {} V: empirical={:.4} fitted={:.4} ({} cycles)",
                    p.voltage, p.empirical, p.fitted, p.cycles
                );
            }
            if let Some(out) = &cli.out {
                write_json(out, &fit)?;
            }
        }
        Command::DeviceSim {
            model,
            voltage,
            cycles,
            max_pulses,
            ramp_steps,
        } => {
            reject("config", cli.config.is_some(), "device-sim")?;
            let seed = cli.seed.unwrap_or(0);
            let text = match devices::resolve_model(&model)? {
                DeviceRef::Binary(curve) => {
                    let records = devices::simulate(&curve, &voltage, cycles, max_pulses, seed)?;
                    for r in &records {
                        eprintln!(
                            "{} V: empirical p={:.4}, model p={:.4}",
                            r.voltage,
                            r.empirical_probability(),
                            curve.probability(r.voltage)
                        );
                    }
                    let mut buf = Vec::new();
                    dwsnn::cycling::write_records(&mut buf, &records)?;
                    String::from_utf8(buf).expect("csv output is utf-8")
                }
                DeviceRef::Mw(m) => {
                    for &v in &voltage {
                        if !(0.0..=dwsnn_core::device::MW_DOMAIN.1).contains(&v) {
                            return Err(CliError::Range(format!(
                                "ramp peak {v} V outside the MW domain [0, 5.5] V"
                            )));
                        }
                    }
                    devices::ramp_csv(
                        &devices::simulate_ramps(&m, &voltage, cycles, ramp_steps, seed),
                        ramp_steps,
                    )
                }
            };
            match &cli.out {
                Some(out) => write_text(out, &text)?,
                None => print!("{text}"),
            }
        }
        Command::DeviceTable { model, points } => {
            reject("config", cli.config.is_some(), "device-table")?;
            reject("seed", cli.seed.is_some(), "device-table")?;
            let table = devices::device_table(&devices::resolve_model(&model)?, points)?;
            match &cli.out {
                Some(out) => write_json(out, &table)?,
                None => println!(
                    "{}",
                    serde_json::to_string_pretty(&table).expect("table serializes")
                ),
            }
        }
        Command::Train { threads: t } => {
            let mut cfg = ExperimentConfig::load(required(&cli.config, "config", "train")?)?;
            if let Some(seed) = cli.seed {
                cfg.seeds = vec![seed];
            }
            let out = required(&cli.out, "out", "train")?;
            let records = run_train(&cfg, out, threads(t, &cfg))?;
            for r in &records {
                println!(
                    "{} seed {}: {:?}, val_acc={:.4}{}",
                    r.label.as_deref().unwrap_or("?"),
                    r.seed,
                    r.status,
                    r.final_val_acc,
                    r.test_acc
                        .map(|a| format!(", test_acc={a:.4}"))
                        .unwrap_or_default()
                );
            }
        }
        Command::SweepNoise {
            models,
            select,
            threads: t,
        } => {
            let mut cfg = ExperimentConfig::load(required(&cli.config, "config", "sweep-noise")?)?;
            if let Some(seed) = cli.seed {
                cfg.noise_seed = seed;
            }
            let out = required(&cli.out, "out", "sweep-noise")?;
            let selection = match select {
                Select::Best => Selection::Best,
                Select::All => Selection::All,
            };
            let outcome = run_sweep(&cfg, &models, out, selection, threads(t, &cfg))?;
            for (kind, raw) in &outcome.raw {
                let cells: Vec<String> = raw.iter().map(|a| format!("{a:.3}")).collect();
                println!("{:>6} raw: {}", kind.name(), cells.join(" "));
            }
            for c in &outcome.crossovers {
                let show = |s: Option<f64>| s.map_or("none".to_string(), |s| format!("sigma={s}"));
                println!(
                    "crossover {} > lif: first at {}, sustained from {}",
                    c.kind.name(),
                    show(c.first_above),
                    show(c.sustained_from)
                );
            }
        }
        Command::Energy {
            voltage,
            r2pt,
            r4pt,
            duration_ns,
        } => {
            reject("config", cli.config.is_some(), "energy")?;
            reject("seed", cli.seed.is_some(), "energy")?;
            let e = devices::energy(voltage, r2pt, r4pt, duration_ns)?;
            println!("{}", devices::energy_line(&e));
            if let Some(out) = &cli.out {
                write_json(out, &e)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.class());
            ExitCode::FAILURE
        }
    }
}
