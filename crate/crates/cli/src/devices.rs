//! Device-level commands: cycling simulation, sigmoid fitting, tables and
//! the write-energy estimate.

use std::path::Path;

use dwsnn_core::device::{
    energy_per_pulse, ramp_voltage, simulate_cycling, synthesize_default_models, CyclingRecord,
    DeviceCurve, DeviceKind, DeviceTable, EnergyEstimate, EnergyParams, MwDeviceModel, SigmoidFit,
    SwitchingSigmoid, MW_STATES,
};
use dwsnn_core::rng::{bernoulli, stream, Purpose};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// A device model named on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceRef {
    Binary(DeviceCurve),
    Mw(MwDeviceModel),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelFile {
    Fit(SigmoidFit),
    Sigmoid(SwitchingSigmoid),
    Table(DeviceTable),
}

/// `default-binary`, `default-mw`, or a path to a fit, sigmoid or
/// device-table JSON file.
pub fn resolve_model(name: &str) -> Result<DeviceRef> {
    let (binary, mw) = synthesize_default_models();
    match name {
        "default-binary" => return Ok(DeviceRef::Binary(binary.into())),
        "default-mw" => return Ok(DeviceRef::Mw(mw)),
        _ => {}
    }
    let path = Path::new(name);
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "unknown model `{name}`: expected default-binary, default-mw or a model JSON file"
        )));
    }
    let file: ModelFile = crate::config::read_json(path)?;
    Ok(match file {
        ModelFile::Fit(f) => {
            f.model.validate()?;
            DeviceRef::Binary(f.model.into())
        }
        ModelFile::Sigmoid(s) => {
            s.validate()?;
            DeviceRef::Binary(s.into())
        }
        ModelFile::Table(t) => match t.kind {
            DeviceKind::Binary => DeviceRef::Binary(t.to_binary_curve()?),
            DeviceKind::Mw => DeviceRef::Mw(t.to_mw_model()?),
        },
    })
}

/// Cycling records at each voltage. Cycle `c` at voltage `v` draws from its
/// own stream keyed by `(seed, v, c)`.
pub fn simulate(
    curve: &DeviceCurve,
    voltages: &[f64],
    cycles: usize,
    max_pulses: u32,
    seed: u64,
) -> Result<Vec<CyclingRecord>> {
    if max_pulses == 0 {
        return Err(CliError::Usage("--max-pulses must be at least 1".into()));
    }
    voltages
        .iter()
        .map(|&v| {
            let pulses = (0..cycles)
                .map(|c| {
                    let mut rng = stream(seed, Purpose::Cycling, &[v.to_bits(), c as u64]);
                    simulate_cycling(curve, v, 1, max_pulses, &mut rng).first_switch_pulse[0]
                })
                .collect();
            Ok(CyclingRecord::new(v, pulses, max_pulses)?)
        })
        .collect()
}

/// Terminal notch (1-based) of each simulated ramp.
pub fn simulate_ramps(
    model: &MwDeviceModel,
    v_maxes: &[f64],
    cycles: usize,
    ramp_steps: usize,
    seed: u64,
) -> Vec<(f64, Vec<usize>)> {
    v_maxes
        .iter()
        .map(|&v_max| {
            let finals = (0..cycles)
                .map(|c| {
                    let mut rng = stream(seed, Purpose::Cycling, &[v_max.to_bits(), c as u64]);
                    let mut state = 1;
                    for j in 0..ramp_steps {
                        let v = ramp_voltage(v_max, j, ramp_steps);
                        if state < MW_STATES
                            && bernoulli(&mut rng, model.advance_probability(state, v))
                        {
                            state += 1;
                        }
                    }
                    state
                })
                .collect();
            (v_max, finals)
        })
        .collect()
}

pub fn ramp_csv(ramps: &[(f64, Vec<usize>)], ramp_steps: usize) -> String {
    let mut out = String::from("v_max_V,cycle_index,final_state,ramp_steps\n");
    for (v, finals) in ramps {
        for (c, s) in finals.iter().enumerate() {
            out.push_str(&format!("{v},{c},{s},{ramp_steps}\n"));
        }
    }
    out
}

pub fn fit_file(path: &Path) -> Result<SigmoidFit> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let records = crate::cycling::read_records(std::io::BufReader::new(file))?;
    Ok(dwsnn_core::device::fit_sigmoid(&records)?)
}

pub fn device_table(model: &DeviceRef, points: usize) -> Result<DeviceTable> {
    if points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    Ok(match model {
        DeviceRef::Binary(c) => DeviceTable::from_binary(c, points),
        DeviceRef::Mw(m) => DeviceTable::from_mw(m, points),
    })
}

pub fn energy(voltage: f64, r2pt: f64, r4pt: f64, duration_ns: f64) -> Result<EnergyEstimate> {
    if r4pt > r2pt {
        return Err(CliError::Range(format!(
            "four-point resistance {r4pt} Ω exceeds two-point resistance {r2pt} Ω"
        )));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(r4pt > 0.0 && duration_ns > 0.0) || !(voltage >= 0.0) {
        return Err(CliError::Range(
            "resistances and duration must be positive and the voltage non-negative".into(),
        ));
    }
    let params = EnergyParams::new(r2pt, r4pt, duration_ns * 1e-9)?;
    Ok(energy_per_pulse(voltage, &params)?)
}

pub fn energy_line(e: &EnergyEstimate) -> String {
    format!(
        "v_track={:.3} V, energy={:.1} pJ",
        e.v_track,
        e.joules * 1e12
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_reproduces_measurement() {
        let e = energy(1.8, 1029.0, 365.0, 40.0).unwrap();
        assert_eq!(energy_line(&e), "v_track=0.638 V, energy=44.7 pJ");
        assert!((e.joules * 1e12 / 44.9 - 1.0).abs() < 0.01);
        assert_eq!(energy(0.0, 1029.0, 365.0, 40.0).unwrap().joules, 0.0);
        let double = energy(1.8, 1029.0, 365.0, 80.0).unwrap();
        assert_eq!(double.joules, 2.0 * e.joules);
        assert_eq!(
            energy(1.8, 300.0, 365.0, 40.0).unwrap_err().class(),
            "range"
        );
    }

    #[test]
    fn unknown_model_rejected() {
        assert_eq!(
            resolve_model("default-quantum").unwrap_err().class(),
            "usage"
        );
    }

    #[test]
    fn simulation_is_keyed_per_cycle() {
        let (b, _) = synthesize_default_models();
        let c: DeviceCurve = b.into();
        let a = simulate(&c, &[1.75], 20, 64, 7).unwrap();
        let longer = simulate(&c, &[1.75], 40, 64, 7).unwrap();
        assert_eq!(
            a[0].first_switch_pulse[..],
            longer[0].first_switch_pulse[..20]
        );
        let two = simulate(&c, &[1.6, 1.75], 20, 64, 7).unwrap();
        assert_eq!(two[1], a[0]);
    }

    #[test]
    fn ramp_simulation_tracks_exact_distribution() {
        let (_, mw) = synthesize_default_models();
        let ramps = simulate_ramps(&mw, &[3.0], 20_000, 11, 3);
        let exact = mw.ramp_distribution(3.0, 11).unwrap();
        for s in 1..=MW_STATES {
            let frac = ramps[0].1.iter().filter(|&&x| x == s).count() as f64 / 20_000.0;
            let p = exact[s - 1];
            assert!(
                (frac - p).abs() <= 3.0 * (p * (1.0 - p) / 20_000.0).sqrt() + 1e-12,
                "S{s}: {frac} vs {p}"
            );
        }
    }
}
