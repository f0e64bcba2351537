//! Phenomenological models of the binary and multi-weight DW-MTJ devices.
//!
//! A binary device switches on each write pulse with a voltage-dependent
//! probability `p(V)`. Pulses are treated as independent Bernoulli trials, so
//! the pulse index of the first switch in a cycling experiment is
//! `Geometric(p(V))`. The multi-weight (MW) device is a five-state stochastic
//! integrator: a pulse moves the domain wall from notch `Sᵢ` to `Sᵢ₊₁` with
//! probability `qᵢ(V)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::rng::bernoulli;
use crate::{Error, Result};

/// Numerically stable logistic function.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + Float::exp(-z))
    } else {
        let e = Float::exp(z);
        e / (1.0 + e)
    }
}

/// Logistic switching curve `p(V) = 1 / (1 + exp(-(V - v50) / width))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingSigmoid {
    pub v50: f64,
    pub width: f64,
    pub domain_lo: f64,
    pub domain_hi: f64,
}

impl SwitchingSigmoid {
    pub fn new(v50: f64, width: f64, domain_lo: f64, domain_hi: f64) -> Result<Self> {
        let s = Self {
            v50,
            width,
            domain_lo,
            domain_hi,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sigmoid width must be positive, got {}",
                self.width
            )));
        }
        if !(self.domain_lo < self.v50 && self.v50 < self.domain_hi) {
            return Err(Error::InvalidModel(format!(
                "v50 = {} must lie inside the domain ({}, {})",
                self.v50, self.domain_lo, self.domain_hi
            )));
        }
        Ok(())
    }

    pub fn probability(&self, v: f64) -> f64 {
        logistic((v - self.v50) / self.width)
    }
}

/// Piecewise-linear lookup table of switching probability against voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingTable {
    voltages: Vec<f64>,
    probabilities: Vec<f64>,
}

impl SwitchingTable {
    pub fn new(voltages: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        let t = Self {
            voltages,
            probabilities,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let (v, p) = (&self.voltages, &self.probabilities);
        if v.len() < 2 || v.len() != p.len() {
            return Err(Error::InvalidModel(format!(
                "table needs >= 2 matching points, got {} voltages / {} probabilities",
                v.len(),
                p.len()
            )));
        }
        if v.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidModel(
                "table voltages must be strictly ascending".into(),
            ));
        }
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidModel(
                "table probabilities must lie in [0, 1]".into(),
            ));
        }
        if p.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidModel(
                "table probabilities must be non-decreasing in voltage".into(),
            ));
        }
        Ok(())
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Index `i` of the segment `[vᵢ, vᵢ₊₁]` containing `v` (already clamped).
    fn segment(&self, v: f64) -> usize {
        let n = self.voltages.len();
        let i = self.voltages.partition_point(|&x| x <= v);
        i.saturating_sub(1).min(n - 2)
    }

    pub fn probability(&self, v: f64) -> f64 {
        let n = self.voltages.len();
        let v = v.clamp(self.voltages[0], self.voltages[n - 1]);
        let i = self.segment(v);
        let (v0, v1) = (self.voltages[i], self.voltages[i + 1]);
        let (p0, p1) = (self.probabilities[i], self.probabilities[i + 1]);
        p0 + (p1 - p0) * (v - v0) / (v1 - v0)
    }

    /// Slope of the segment containing `v`; zero outside the table range.
    pub fn slope(&self, v: f64) -> f64 {
        let n = self.voltages.len();
        if v < self.voltages[0] || v > self.voltages[n - 1] {
            return 0.0;
        }
        let i = self.segment(v);
        (self.probabilities[i + 1] - self.probabilities[i])
            / (self.voltages[i + 1] - self.voltages[i])
    }
}

/// Either a fitted sigmoid or a measured lookup table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DeviceCurve {
    Sigmoid(SwitchingSigmoid),
    Table(SwitchingTable),
}

impl From<SwitchingSigmoid> for DeviceCurve {
    fn from(s: SwitchingSigmoid) -> Self {
        Self::Sigmoid(s)
    }
}

impl From<SwitchingTable> for DeviceCurve {
    fn from(t: SwitchingTable) -> Self {
        Self::Table(t)
    }
}

impl DeviceCurve {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Sigmoid(s) => s.validate(),
            Self::Table(t) => t.validate(),
        }
    }

    /// Switching probability for one pulse at `v`.
    pub fn probability(&self, v: f64) -> f64 {
        match self {
            Self::Sigmoid(s) => s.probability(v),
            Self::Table(t) => t.probability(v),
        }
    }

    /// `dp/dV` at `v`.
    pub fn dprob_dv(&self, v: f64) -> f64 {
        match self {
            Self::Sigmoid(s) => {
                let p = s.probability(v);
                p * (1.0 - p) / s.width
            }
            Self::Table(t) => t.slope(v),
        }
    }

    /// `d ln p / dV` at `v`, taken as zero where `p = 0`.
    pub fn dlogprob_dv(&self, v: f64) -> f64 {
        match self {
            Self::Sigmoid(s) => (1.0 - s.probability(v)) / s.width,
            Self::Table(t) => {
                let p = t.probability(v);
                if p > 0.0 {
                    t.slope(v) / p
                } else {
                    0.0
                }
            }
        }
    }

    /// Calibrated voltage range.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::Sigmoid(s) => (s.domain_lo, s.domain_hi),
            Self::Table(t) => (t.voltages[0], t.voltages[t.voltages.len() - 1]),
        }
    }

    /// Voltage of the 50% switching point (bisection for tables).
    pub fn midpoint(&self) -> f64 {
        match self {
            Self::Sigmoid(s) => s.v50,
            Self::Table(t) => {
                let (mut lo, mut hi) = self.domain();
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if t.probability(mid) < 0.5 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// Number of notch states of the MW device.
pub const MW_STATES: usize = 5;
/// Ramp range of the MW device experiment.
pub const MW_DOMAIN: (f64, f64) = (0.0, 5.5);

/// Five-state stochastic integrator: `transitions[i]` gives the probability
/// that a pulse advances the wall from `S(i+1)` to `S(i+2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MwDeviceModel {
    transitions: Vec<DeviceCurve>,
}

impl MwDeviceModel {
    pub fn new(transitions: Vec<DeviceCurve>) -> Result<Self> {
        let m = Self { transitions };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.len() != MW_STATES - 1 {
            return Err(Error::InvalidModel(format!(
                "MW device needs {} transitions, got {}",
                MW_STATES - 1,
                self.transitions.len()
            )));
        }
        self.transitions.iter().try_for_each(DeviceCurve::validate)
    }

    pub fn state_count(&self) -> usize {
        MW_STATES
    }

    pub fn transitions(&self) -> &[DeviceCurve] {
        &self.transitions
    }

    /// Advance probability out of notch `state` (1-based, `state < 5`).
    /// A pulse of zero amplitude never moves the wall.
    pub fn advance_probability(&self, state: usize, v: f64) -> f64 {
        if v <= 0.0 {
            0.0
        } else {
            self.transitions[state - 1].probability(v)
        }
    }

    /// Terminal-state distribution over S1..S5 after a linear voltage ramp.
    pub fn ramp_distribution(&self, v_max: f64, ramp_steps: usize) -> Result<[f64; MW_STATES]> {
        let (lo, hi) = MW_DOMAIN;
        if !(lo..=hi).contains(&v_max) {
            return Err(Error::OutOfRange {
                what: "v_max",
                value: v_max,
                lo,
                hi,
            });
        }
        let dist = ramp_distribution(&self.transitions, v_max, ramp_steps);
        let mut out = [0.0; MW_STATES];
        out.copy_from_slice(&dist);
        Ok(out)
    }
}

/// Voltage of pulse `step` (0-based) in a linear ramp from 0 to `v_max`:
/// `v_max · (step + 1) / ramp_steps`, so the last pulse is at `v_max`.
pub fn ramp_voltage(v_max: f64, step: usize, ramp_steps: usize) -> f64 {
    v_max * (step + 1) as f64 / ramp_steps as f64
}

/// Exact forward propagation of a chain of advance transitions under a linear
/// voltage ramp, starting with all mass in the first state. Returns
/// `transitions.len() + 1` probabilities. Zero-amplitude pulses apply no
/// drive.
pub fn ramp_distribution(transitions: &[DeviceCurve], v_max: f64, ramp_steps: usize) -> Vec<f64> {
    let states = transitions.len() + 1;
    let mut dist = vec![0.0; states];
    dist[0] = 1.0;
    for step in 0..ramp_steps {
        let v = ramp_voltage(v_max, step, ramp_steps);
        if v <= 0.0 {
            continue;
        }
        // Walk from the top so each pulse moves mass at most one notch.
        for i in (0..states - 1).rev() {
            let moved = dist[i] * transitions[i].probability(v);
            dist[i] -= moved;
            dist[i + 1] += moved;
        }
    }
    dist
}

/// Outcome of a pulse-cycling experiment at one voltage.
///
/// `first_switch_pulse[c]` is the 1-based pulse index at which cycle `c`
/// switched, or `None` when it never switched within `max_pulses`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclingRecord {
    pub voltage: f64,
    pub first_switch_pulse: Vec<Option<u32>>,
    pub max_pulses: u32,
}

impl CyclingRecord {
    pub fn new(
        voltage: f64,
        first_switch_pulse: Vec<Option<u32>>,
        max_pulses: u32,
    ) -> Result<Self> {
        let r = Self {
            voltage,
            first_switch_pulse,
            max_pulses,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_pulses == 0 {
            return Err(Error::InvalidModel("max_pulses must be positive".into()));
        }
        if let Some(bad) = self
            .first_switch_pulse
            .iter()
            .flatten()
            .find(|&&k| k == 0 || k > self.max_pulses)
        {
            return Err(Error::InvalidModel(format!(
                "first-switch pulse {bad} outside [1, {}]",
                self.max_pulses
            )));
        }
        Ok(())
    }

    pub fn cycles(&self) -> usize {
        self.first_switch_pulse.len()
    }

    /// `(switching pulses, non-switching pulses)` observed over all cycles.
    ///
    /// Under per-pulse independence these are the sufficient statistics of the
    /// censored geometric likelihood `p^s (1-p)^f`.
    pub fn pulse_counts(&self) -> (f64, f64) {
        let mut s = 0.0;
        let mut f = 0.0;
        for k in &self.first_switch_pulse {
            match k {
                Some(k) => {
                    s += 1.0;
                    f += (*k - 1) as f64;
                }
                None => f += self.max_pulses as f64,
            }
        }
        (s, f)
    }

    /// Maximum-likelihood per-pulse switching probability at this voltage.
    pub fn empirical_probability(&self) -> f64 {
        let (s, f) = self.pulse_counts();
        if s + f > 0.0 {
            s / (s + f)
        } else {
            0.0
        }
    }
}

/// Run `n_cycles` cycling trials at voltage `v`: each cycle applies pulses
/// until the device switches or `max_pulses` is reached.
pub fn simulate_cycling<R: RngCore + ?Sized>(
    curve: &DeviceCurve,
    v: f64,
    n_cycles: usize,
    max_pulses: u32,
    rng: &mut R,
) -> CyclingRecord {
    let p = curve.probability(v);
    let first_switch_pulse = (0..n_cycles)
        .map(|_| (1..=max_pulses).find(|_| bernoulli(rng, p)))
        .collect();
    CyclingRecord {
        voltage: v,
        first_switch_pulse,
        max_pulses,
    }
}

/// Per-voltage diagnostics of a sigmoid fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub voltage: f64,
    pub cycles: usize,
    pub empirical: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFit {
    pub model: SwitchingSigmoid,
    pub log_likelihood: f64,
    pub points: Vec<FitPoint>,
}

/// Weighted per-voltage success/failure counts for [`fit_logistic_counts`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseCounts {
    pub voltage: f64,
    pub switched: f64,
    pub failed: f64,
}

/// Maximum-likelihood logistic fit of `(v50, width)` to per-voltage pulse counts.
///
/// The log-likelihood `Σ s·ln p(v) + f·ln(1 - p(v))` is concave in the natural
/// parameters `(a, b)` of `p = σ(a + b·u)` (with `u` the standardized voltage),
/// so damped Newton iterations converge to the unique maximum whenever it
/// exists. Returns the curve and the attained log-likelihood.
pub fn fit_logistic_counts(counts: &[PulseCounts]) -> Result<(f64, f64, f64)> {
    let mut volts: Vec<f64> = counts.iter().map(|c| c.voltage).collect();
    volts.sort_by(f64::total_cmp);
    volts.dedup();
    if volts.len() < 3 {
        return Err(Error::NonIdentifiable(format!(
            "records cover {} distinct voltage(s); at least 3 are needed",
            volts.len()
        )));
    }
    let s_total: f64 = counts.iter().map(|c| c.switched).sum();
    let f_total: f64 = counts.iter().map(|c| c.failed).sum();
    if s_total <= 0.0 {
        return Err(Error::NonIdentifiable("the device never switched".into()));
    }
    if f_total <= 0.0 {
        return Err(Error::NonIdentifiable(
            "every cycle switched on the first pulse".into(),
        ));
    }

    let n: f64 = counts.iter().map(|c| c.switched + c.failed).sum();
    let mean = counts
        .iter()
        .map(|c| (c.switched + c.failed) * c.voltage)
        .sum::<f64>()
        / n;
    let var = counts
        .iter()
        .map(|c| (c.switched + c.failed) * (c.voltage - mean).powi(2))
        .sum::<f64>()
        / n;
    let sd = Float::sqrt(var);

    let log_lik = |a: f64, b: f64| -> f64 {
        counts
            .iter()
            .map(|c| {
                let z = a + b * (c.voltage - mean) / sd;
                // ln σ(z) = -softplus(-z), ln(1-σ(z)) = -softplus(z)
                -(c.switched * softplus(-z) + c.failed * softplus(z))
            })
            .sum()
    };

    let rate = s_total / (s_total + f_total);
    let mut a = Float::ln(rate / (1.0 - rate));
    let mut b = 0.0;
    let mut ll = log_lik(a, b);
    let mut converged = false;
    for _ in 0..200 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for c in counts {
            let u = (c.voltage - mean) / sd;
            let p = logistic(a + b * u);
            let w = c.switched + c.failed;
            let r = c.switched - w * p;
            let h = w * p * (1.0 - p);
            ga += r;
            gb += r * u;
            haa += h;
            hab += h * u;
            hbb += h * u * u;
        }
        let det = haa * hbb - hab * hab;
        if !(det > 0.0) || !det.is_finite() {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nll = log_lik(na, nb);
            if nll >= ll - 1e-12 * Float::abs(ll) {
                a = na;
                b = nb;
                ll = nll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted
            || Float::abs(step * da) + Float::abs(step * db) < 1e-13 * (1.0 + Float::abs(b))
        {
            converged = accepted || Float::abs(ga) + Float::abs(gb) < 1e-8 * n;
            break;
        }
        if b > 1e6 {
            break;
        }
    }
    if !converged || !(b > 0.0) || b > 1e6 {
        return Err(Error::NonIdentifiable(String::from(
            "likelihood has no finite increasing-sigmoid maximum (separable or decreasing data)",
        )));
    }
    let width = sd / b;
    let v50 = mean - a * sd / b;
    Ok((v50, width, ll))
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + Float::ln_1p(Float::exp(-z))
    } else {
        Float::ln_1p(Float::exp(z))
    }
}

/// Fit a switching sigmoid to cycling records by maximum likelihood under the
/// per-pulse-independent model; censored cycles enter through their survival
/// probability `(1 - p)^max_pulses`.
pub fn fit_sigmoid(records: &[CyclingRecord]) -> Result<SigmoidFit> {
    if records.is_empty() {
        return Err(Error::NonIdentifiable("no records".into()));
    }
    for r in records {
        r.validate()?;
    }
    let counts: Vec<PulseCounts> = records
        .iter()
        .map(|r| {
            let (switched, failed) = r.pulse_counts();
            PulseCounts {
                voltage: r.voltage,
                switched,
                failed,
            }
        })
        .collect();
    let (v50, width, log_likelihood) = fit_logistic_counts(&counts)?;
    let lo = records
        .iter()
        .map(|r| r.voltage)
        .fold(f64::INFINITY, f64::min);
    let hi = records
        .iter()
        .map(|r| r.voltage)
        .fold(f64::NEG_INFINITY, f64::max);
    let model = SwitchingSigmoid::new(v50, width, lo, hi).map_err(|_| {
        Error::NonIdentifiable(format!(
            "fitted 50% point {v50:.4} V lies outside the measured range [{lo}, {hi}] V"
        ))
    })?;

    // One diagnostic row per distinct voltage, pooling repeated records.
    let mut points: Vec<FitPoint> = Vec::new();
    let mut sorted: Vec<&CyclingRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.voltage.total_cmp(&b.voltage));
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].voltage;
        let (mut s, mut f, mut cycles) = (0.0, 0.0, 0);
        while i < sorted.len() && sorted[i].voltage == v {
            let (si, fi) = sorted[i].pulse_counts();
            s += si;
            f += fi;
            cycles += sorted[i].cycles();
            i += 1;
        }
        points.push(FitPoint {
            voltage: v,
            cycles,
            empirical: if s + f > 0.0 { s / (s + f) } else { 0.0 },
            fitted: model.probability(v),
        });
    }
    Ok(SigmoidFit {
        model,
        log_likelihood,
        points,
    })
}

/// Resistances and effective pulse length used by the write-energy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Two-point resistance of the CLK→IN path, ohms.
    pub r_2pt: f64,
    /// Four-point resistance of the domain-wall track, ohms.
    pub r_4pt: f64,
    /// Effective pulse duration, seconds.
    pub effective_duration: f64,
}

impl EnergyParams {
    pub fn new(r_2pt: f64, r_4pt: f64, effective_duration: f64) -> Result<Self> {
        if !(r_4pt > 0.0 && r_4pt <= r_2pt) {
            return Err(Error::InvalidModel(format!(
                "need 0 < r_4pt <= r_2pt, got r_4pt = {r_4pt}, r_2pt = {r_2pt}"
            )));
        }
        if !(effective_duration > 0.0) {
            return Err(Error::InvalidModel(format!(
                "effective duration must be positive, got {effective_duration}"
            )));
        }
        Ok(Self {
            r_2pt,
            r_4pt,
            effective_duration,
        })
    }

    /// 1029 Ω two-point, 365 Ω four-point, 40 ns effective pulse.
    pub fn measured() -> Self {
        Self {
            r_2pt: 1029.0,
            r_4pt: 365.0,
            effective_duration: 40e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    /// Voltage dropped across the track, volts.
    pub v_track: f64,
    /// Energy per write pulse, joules.
    pub joules: f64,
}

/// Energy dissipated in the track by one write pulse, treating the track as
/// the `r_4pt` part of a resistive divider.
pub fn energy_per_pulse(v_applied: f64, params: &EnergyParams) -> Result<EnergyEstimate> {
    if !(v_applied >= 0.0) {
        return Err(Error::OutOfRange {
            what: "v_applied",
            value: v_applied,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let v_track = v_applied * params.r_4pt / params.r_2pt;
    Ok(EnergyEstimate {
        v_track,
        joules: v_track * v_track / params.r_4pt * params.effective_duration,
    })
}

pub const DEFAULT_BINARY_V50: f64 = 1.8;
pub const DEFAULT_BINARY_WIDTH: f64 = 0.12;
pub const DEFAULT_BINARY_DOMAIN: (f64, f64) = (1.0, 2.2);
pub const DEFAULT_MW_V50S: [f64; 4] = [1.1, 2.2, 3.3, 4.4];
pub const DEFAULT_MW_WIDTH: f64 = 0.3;
/// Default number of pulses in the MW ramp protocol.
pub const DEFAULT_RAMP_STEPS: usize = 11;

/// Canonical synthetic calibration: binary sigmoid centred at 1.8 V, MW
/// transitions at 1.1/2.2/3.3/4.4 V.
pub fn synthesize_default_models() -> (SwitchingSigmoid, MwDeviceModel) {
    let (lo, hi) = DEFAULT_BINARY_DOMAIN;
    let binary = SwitchingSigmoid {
        v50: DEFAULT_BINARY_V50,
        width: DEFAULT_BINARY_WIDTH,
        domain_lo: lo,
        domain_hi: hi,
    };
    let transitions = DEFAULT_MW_V50S
        .iter()
        .map(|&v50| {
            DeviceCurve::Sigmoid(SwitchingSigmoid {
                v50,
                width: DEFAULT_MW_WIDTH,
                domain_lo: MW_DOMAIN.0,
                domain_hi: MW_DOMAIN.1,
            })
        })
        .collect();
    (binary, MwDeviceModel { transitions })
}

/// Device-table interchange document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceTable {
    pub kind: DeviceKind,
    #[serde(rename = "voltages_V")]
    pub voltages: Vec<f64>,
    pub probabilities: TableProbabilities,
    #[serde(rename = "domain_V")]
    pub domain: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Binary,
    Mw,
}

/// One probability column for binary devices, one per transition for MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableProbabilities {
    Binary(Vec<f64>),
    PerTransition(Vec<Vec<f64>>),
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

impl DeviceTable {
    /// Sample a binary curve on `points` evenly spaced voltages over its domain.
    pub fn from_binary(curve: &DeviceCurve, points: usize) -> Self {
        let (lo, hi) = curve.domain();
        let voltages = grid(lo, hi, points);
        let probabilities = voltages.iter().map(|&v| curve.probability(v)).collect();
        Self {
            kind: DeviceKind::Binary,
            voltages,
            probabilities: TableProbabilities::Binary(probabilities),
            domain: [lo, hi],
        }
    }

    pub fn from_mw(model: &MwDeviceModel, points: usize) -> Self {
        let (lo, hi) = MW_DOMAIN;
        let voltages = grid(lo, hi, points);
        let probabilities = model
            .transitions
            .iter()
            .map(|c| voltages.iter().map(|&v| c.probability(v)).collect())
            .collect();
        Self {
            kind: DeviceKind::Mw,
            voltages,
            probabilities: TableProbabilities::PerTransition(probabilities),
            domain: [lo, hi],
        }
    }

    pub fn to_binary_curve(&self) -> Result<DeviceCurve> {
        match (&self.kind, &self.probabilities) {
            (DeviceKind::Binary, TableProbabilities::Binary(p)) => {
                Ok(SwitchingTable::new(self.voltages.clone(), p.clone())?.into())
            }
            _ => Err(Error::InvalidModel(
                "expected a binary table with a single probability column".into(),
            )),
        }
    }

    pub fn to_mw_model(&self) -> Result<MwDeviceModel> {
        match (&self.kind, &self.probabilities) {
            (DeviceKind::Mw, TableProbabilities::PerTransition(cols)) => MwDeviceModel::new(
                cols.iter()
                    .map(|p| SwitchingTable::new(self.voltages.clone(), p.clone()).map(Into::into))
                    .collect::<Result<_>>()?,
            ),
            _ => Err(Error::InvalidModel(
                "expected an MW table with per-transition probability columns".into(),
            )),
        }
    }
}
