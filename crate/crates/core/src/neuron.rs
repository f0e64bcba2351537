//! Timestep updates for the three neuron types and the leaky readout.
//!
//! Every neuron type has two forward modes. `Sampled` is the physical
//! behaviour (Bernoulli switching, notch hopping, hard thresholding).
//! `MeanField` replaces each stochastic or discontinuous spike by a smooth
//! deterministic surrogate whose derivative is exactly the rule used in the
//! backward pass, which is what makes finite-difference gradient checks
//! meaningful. The backward rule is the same in both modes.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceCurve, MwDeviceModel};
use crate::rng::bernoulli;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sampled,
    MeanField,
}

/// Affine map from a batch-normalized pre-activation to a device voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageMap {
    pub v_mid: f64,
    pub v_gain: f64,
    pub lo: f64,
    pub hi: f64,
}

impl VoltageMap {
    pub fn new(v_mid: f64, v_gain: f64, lo: f64, hi: f64) -> Result<Self> {
        let m = Self {
            v_mid,
            v_gain,
            lo,
            hi,
        };
        m.validate()?;
        Ok(m)
    }

    /// Centre on `v_mid` and spread ±3 unit pre-activations over `[lo, hi]`.
    pub fn calibrated(lo: f64, hi: f64, v_mid: f64) -> Self {
        Self {
            v_mid,
            v_gain: (hi - lo) / 6.0,
            lo,
            hi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo <= self.v_mid && self.v_mid <= self.hi) || !(self.v_gain > 0.0) {
            return Err(Error::InvalidModel(alloc::format!(
                "voltage map needs lo <= v_mid <= hi and v_gain > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn drive(&self, a: f64) -> f64 {
        (self.v_mid + self.v_gain * a).clamp(self.lo, self.hi)
    }

    /// `dV/da`: the gain inside the clamp range, zero on or beyond it.
    #[inline]
    pub fn gain_at(&self, a: f64) -> f64 {
        let raw = self.v_mid + self.v_gain * a;
        if raw > self.lo && raw < self.hi {
            self.v_gain
        } else {
            0.0
        }
    }
}

/// Stateless stochastic spiker driven by a switching curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryNeuronParams {
    pub device: DeviceCurve,
    pub vmap: VoltageMap,
}

impl BinaryNeuronParams {
    pub fn new(device: DeviceCurve, vmap: VoltageMap) -> Result<Self> {
        let p = Self { device, vmap };
        p.validate()?;
        Ok(p)
    }

    /// Calibrated map: centred on the device's 50% point.
    pub fn with_default_map(device: DeviceCurve) -> Self {
        let (lo, hi) = device.domain();
        let vmap = VoltageMap::calibrated(lo, hi, device.midpoint());
        Self { device, vmap }
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.vmap.validate()?;
        let (lo, hi) = self.device.domain();
        if self.vmap.lo < lo - 1e-12 || self.vmap.hi > hi + 1e-12 {
            return Err(Error::InvalidModel(alloc::format!(
                "voltage clamp [{}, {}] exceeds device domain [{lo}, {hi}]",
                self.vmap.lo,
                self.vmap.hi
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn probability(&self, a: f64) -> f64 {
        self.device.probability(self.vmap.drive(a))
    }

    /// `dp/da` through the voltage map.
    #[inline]
    pub fn surrogate(&self, a: f64) -> f64 {
        self.probability_and_surrogate(a).1
    }

    /// `(p, dp/da)` with a single device evaluation.
    #[inline]
    pub fn probability_and_surrogate(&self, a: f64) -> (f64, f64) {
        let v = self.vmap.drive(a);
        let g = self.vmap.gain_at(a);
        match &self.device {
            DeviceCurve::Sigmoid(s) => {
                let p = s.probability(v);
                (p, p * (1.0 - p) / s.width * g)
            }
            DeviceCurve::Table(t) => {
                let p = t.probability(v);
                (p, if g == 0.0 { 0.0 } else { t.slope(v) * g })
            }
        }
    }

    pub fn step<R: RngCore + ?Sized>(&self, a: f64, rng: &mut R, mode: Mode) -> f64 {
        let p = self.probability(a);
        match mode {
            Mode::MeanField => p,
            Mode::Sampled => {
                if bernoulli(rng, p) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Multi-weight neuron: the notch index is a quantized membrane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MwNeuronParams {
    pub device: MwDeviceModel,
    pub vmap: VoltageMap,
}

impl MwNeuronParams {
    pub fn new(device: MwDeviceModel, vmap: VoltageMap) -> Result<Self> {
        device.validate()?;
        vmap.validate()?;
        Ok(Self { device, vmap })
    }

    /// Calibrated map over the 0–5.5 V ramp domain, centred at mid-range.
    pub fn with_default_map(device: MwDeviceModel) -> Self {
        let (lo, hi) = crate::device::MW_DOMAIN;
        let vmap = VoltageMap::calibrated(lo, hi, 0.5 * (lo + hi));
        Self { device, vmap }
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.vmap.validate()
    }

    /// Steady-state firing rate `q̄ / (S - 1)`, with `q̄` the geometric mean of
    /// the advance probabilities at the drive voltage.
    pub fn rate(&self, a: f64) -> f64 {
        self.rate_and_surrogate(a).0
    }

    /// `dr/da = r · mean(d ln qᵢ / dV) · dV/da`.
    pub fn surrogate(&self, a: f64) -> f64 {
        self.rate_and_surrogate(a).1
    }

    /// `(r, dr/da)` with one evaluation of each transition curve.
    pub fn rate_and_surrogate(&self, a: f64) -> (f64, f64) {
        let v = self.vmap.drive(a);
        if v <= 0.0 {
            return (0.0, 0.0);
        }
        let g = self.vmap.gain_at(a);
        let ts = self.device.transitions();
        let n = ts.len() as f64;
        let mut log_sum = 0.0;
        let mut dlog_sum = 0.0;
        for t in ts {
            let q = t.probability(v);
            if q <= 0.0 {
                return (0.0, 0.0);
            }
            log_sum += Float::ln(q);
            dlog_sum += match t {
                DeviceCurve::Sigmoid(s) => (1.0 - q) / s.width,
                DeviceCurve::Table(tab) => tab.slope(v) / q,
            };
        }
        let r = Float::exp(log_sum / n) / n;
        (r, r * dlog_sum / n * g)
    }

    /// One timestep from notch `state` (1-based). In sampled mode the wall
    /// advances with probability `q_state(V)`; reaching the last notch emits a
    /// spike and resets to S1 within the same step. Mean-field mode returns the
    /// steady-state rate and leaves the state untouched.
    pub fn step<R: RngCore + ?Sized>(
        &self,
        state: usize,
        a: f64,
        rng: &mut R,
        mode: Mode,
    ) -> Result<(f64, usize)> {
        let states = self.device.state_count();
        if state == 0 || state >= states {
            return Err(Error::StateCorruption {
                index: state,
                states,
            });
        }
        match mode {
            Mode::MeanField => Ok((self.rate(a), state)),
            Mode::Sampled => {
                let q = self.device.advance_probability(state, self.vmap.drive(a));
                if bernoulli(rng, q) {
                    if state + 1 == states {
                        Ok((1.0, 1))
                    } else {
                        Ok((0.0, state + 1))
                    }
                } else {
                    Ok((0.0, state))
                }
            }
        }
    }
}

/// Ideal leaky integrate-and-fire neuron with reset to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifParams {
    pub beta: f64,
    pub threshold: f64,
    pub surrogate_slope: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            beta: 0.9,
            threshold: 1.0,
            surrogate_slope: 10.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0)
            || !(self.threshold > 0.0)
            || !(self.surrogate_slope > 0.0)
        {
            return Err(Error::InvalidModel(alloc::format!(
                "LIF needs 0 < beta < 1, threshold > 0, surrogate_slope > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `v' = beta·v + i`; spike and reset to zero when `v' >= threshold`.
    pub fn step(&self, v: f64, i: f64) -> (f64, f64) {
        let v_pre = self.beta * v + i;
        if v_pre >= self.threshold {
            (1.0, 0.0)
        } else {
            (0.0, v_pre)
        }
    }

    /// SuperSpike surrogate `1 / (1 + k·|x|)²` at `x = v' - threshold`.
    #[inline]
    pub fn surrogate<S: Real>(&self, x: S) -> S {
        let d = S::one() + S::of(self.surrogate_slope) * x.abs();
        S::one() / (d * d)
    }

    /// Mean-field spike: the antiderivative of the surrogate, rising from 0 to
    /// `2/k`. Its exact derivative is [`Self::surrogate`].
    #[inline]
    pub fn smooth_spike<S: Real>(&self, x: S) -> S {
        let k = S::of(self.surrogate_slope);
        if x <= S::zero() {
            S::one() / (k * (S::one() - k * x))
        } else {
            S::of(2.0) / k - S::one() / (k * (S::one() + k * x))
        }
    }
}

/// Leaky readout: `m' = beta_out·m + i`, no spiking.
#[inline]
pub fn readout_step(beta_out: f64, m: f64, i: f64) -> f64 {
    beta_out * m + i
}

/// Neuron type of a hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NeuronModel {
    Binary(BinaryNeuronParams),
    Mw(MwNeuronParams),
    Lif(LifParams),
}

impl NeuronModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Binary(p) => p.validate(),
            Self::Mw(p) => p.validate(),
            Self::Lif(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Binary(_) => "binary",
            Self::Mw(_) => "mw",
            Self::Lif(_) => "lif",
        }
    }

    /// Run a whole layer over time.
    ///
    /// `pre` is laid out `[steps][width]` where `width = batch × units`. All
    /// units start from the reset state (membrane 0, notch S1). Returns the
    /// spikes and the tape needed by [`Self::backward_layer`]: the local
    /// surrogate derivative for binary and MW units, the pre-reset membrane
    /// for LIF units. With `need_tape == false` the surrogate derivatives are
    /// skipped and the tape is zero for binary and MW units.
    pub fn forward_layer<S: Real, R: RngCore + ?Sized>(
        &self,
        pre: &[S],
        steps: usize,
        mode: Mode,
        need_tape: bool,
        rng: &mut R,
    ) -> Result<(Vec<S>, Vec<S>)> {
        let width = pre.len().checked_div(steps).unwrap_or(0);
        let mut spikes = vec![S::zero(); pre.len()];
        let mut tape = vec![S::zero(); pre.len()];
        match self {
            Self::Binary(p) => {
                for ((&a, s), d) in pre.iter().zip(&mut spikes).zip(&mut tape) {
                    let (prob, dprob) = p.probability_and_surrogate(a.as_f64());
                    *s = match mode {
                        Mode::MeanField => S::of(prob),
                        Mode::Sampled if bernoulli(rng, prob) => S::one(),
                        Mode::Sampled => S::zero(),
                    };
                    if need_tape {
                        *d = S::of(dprob);
                    }
                }
            }
            Self::Mw(p) => {
                let mut state = vec![1usize; width];
                for t in 0..steps {
                    let range = t * width..(t + 1) * width;
                    for (((&a, s), d), st) in pre[range.clone()]
                        .iter()
                        .zip(&mut spikes[range.clone()])
                        .zip(&mut tape[range])
                        .zip(&mut state)
                    {
                        let a = a.as_f64();
                        let (spike, next) = p.step(*st, a, rng, mode)?;
                        *st = next;
                        *s = S::of(spike);
                        if need_tape {
                            *d = S::of(p.surrogate(a));
                        }
                    }
                }
            }
            Self::Lif(p) => {
                let beta = S::of(p.beta);
                let theta = S::of(p.threshold);
                let mut v = vec![S::zero(); width];
                for t in 0..steps {
                    let range = t * width..(t + 1) * width;
                    for (((&i, s), vp), vm) in pre[range.clone()]
                        .iter()
                        .zip(&mut spikes[range.clone()])
                        .zip(&mut tape[range])
                        .zip(&mut v)
                    {
                        let v_pre = beta * *vm + i;
                        let spike = match mode {
                            Mode::Sampled => {
                                if v_pre >= theta {
                                    S::one()
                                } else {
                                    S::zero()
                                }
                            }
                            Mode::MeanField => p.smooth_spike(v_pre - theta),
                        };
                        *vp = v_pre;
                        *s = spike;
                        *vm = v_pre * (S::one() - spike);
                    }
                }
            }
        }
        Ok((spikes, tape))
    }

    /// Gradient with respect to the layer input given the gradient with
    /// respect to its spikes.
    pub fn backward_layer<S: Real>(
        &self,
        tape: &[S],
        spikes: &[S],
        grad_out: &[S],
        steps: usize,
    ) -> Vec<S> {
        match self {
            Self::Binary(_) | Self::Mw(_) => {
                grad_out.iter().zip(tape).map(|(&g, &d)| g * d).collect()
            }
            Self::Lif(p) => {
                // v'_t = β·v_{t-1} + i_t,  s_t = f(v'_t - θ),  v_t = v'_t·(1 - s_t)
                let width = tape.len().checked_div(steps).unwrap_or(0);
                let beta = S::of(p.beta);
                let theta = S::of(p.threshold);
                let mut grad_in = vec![S::zero(); tape.len()];
                let mut g_v = vec![S::zero(); width];
                for t in (0..steps).rev() {
                    let range = t * width..(t + 1) * width;
                    for ((((&v_pre, &s), &g_s), gi), gv) in tape[range.clone()]
                        .iter()
                        .zip(&spikes[range.clone()])
                        .zip(&grad_out[range.clone()])
                        .zip(&mut grad_in[range])
                        .zip(&mut g_v)
                    {
                        let g_spike = g_s - *gv * v_pre;
                        let g_pre = *gv * (S::one() - s) + g_spike * p.surrogate(v_pre - theta);
                        *gi = g_pre;
                        *gv = beta * g_pre;
                    }
                }
                grad_in
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{synthesize_default_models, SwitchingTable};
    use crate::rng::{stream, Purpose};

    fn binary() -> BinaryNeuronParams {
        BinaryNeuronParams::with_default_map(synthesize_default_models().0.into())
    }

    #[test]
    fn drive_voltage_defaults() {
        let m = binary().vmap;
        assert!((m.v_gain - 0.2).abs() < 1e-12);
        assert_eq!(m.drive(0.0), 1.8);
        assert_eq!(m.drive(3.0), 2.2);
        assert_eq!(m.drive(-100.0), 1.0);
        assert_eq!(m.gain_at(-100.0), 0.0);
    }

    #[test]
    fn binary_mean_field_at_zero() {
        let p = binary();
        let mut rng = stream(0, Purpose::Neuron, &[]);
        assert_eq!(p.step(0.0, &mut rng, Mode::MeanField), 0.5);
    }

    #[test]
    fn binary_certain_device_always_spikes() {
        let device = SwitchingTable::new(vec![1.0, 2.2], vec![1.0, 1.0])
            .unwrap()
            .into();
        let p =
            BinaryNeuronParams::new(device, VoltageMap::new(1.8, 0.2, 1.0, 2.2).unwrap()).unwrap();
        let mut rng = stream(0, Purpose::Neuron, &[]);
        assert!((0..1000).all(|_| p.step(0.3, &mut rng, Mode::Sampled) == 1.0));
    }

    #[test]
    fn binary_surrogate_matches_finite_difference() {
        let p = binary();
        for &a in &[-2.5, -1.0, -0.3, 0.0, 0.7, 1.5] {
            let h = 1e-6;
            let fd = (p.probability(a + h) - p.probability(a - h)) / (2.0 * h);
            let an = p.surrogate(a);
            assert!((fd - an).abs() <= 1e-6 * an.abs(), "a={a}: {fd} vs {an}");
        }
    }

    #[test]
    fn binary_surrogate_zero_when_clamped() {
        assert_eq!(binary().surrogate(10.0), 0.0);
        assert_eq!(binary().surrogate(-10.0), 0.0);
    }

    fn mw_uniform(q: f64) -> MwNeuronParams {
        let t = || -> DeviceCurve {
            SwitchingTable::new(vec![0.0, 5.5], vec![q, q])
                .unwrap()
                .into()
        };
        let device = MwDeviceModel::new(vec![t(), t(), t(), t()]).unwrap();
        MwNeuronParams::with_default_map(device)
    }

    #[test]
    fn mw_deterministic_counter() {
        let p = mw_uniform(1.0);
        let mut rng = stream(0, Purpose::Neuron, &[]);
        let mut state = 1;
        for step in 1..=12 {
            let (s, next) = p.step(state, 0.0, &mut rng, Mode::Sampled).unwrap();
            state = next;
            assert_eq!(s == 1.0, step % 4 == 0, "step {step}");
        }
    }

    #[test]
    fn mw_frozen_when_impossible() {
        let p = mw_uniform(0.0);
        let mut rng = stream(0, Purpose::Neuron, &[]);
        let mut state = 1;
        for _ in 0..100 {
            let (s, next) = p.step(state, 0.0, &mut rng, Mode::Sampled).unwrap();
            assert_eq!((s, next), (0.0, 1));
            state = next;
        }
    }

    #[test]
    fn mw_rejects_bad_state() {
        let p = mw_uniform(0.5);
        let mut rng = stream(0, Purpose::Neuron, &[]);
        assert!(matches!(
            p.step(0, 0.0, &mut rng, Mode::Sampled),
            Err(Error::StateCorruption { .. })
        ));
        assert!(p.step(5, 0.0, &mut rng, Mode::Sampled).is_err());
    }

    #[test]
    fn mw_mean_field_rate_uniform() {
        assert!((mw_uniform(0.5).rate(0.0) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn mw_surrogate_matches_finite_difference() {
        let p = MwNeuronParams::with_default_map(synthesize_default_models().1);
        for &a in &[-2.0, -0.5, 0.0, 0.9, 2.2] {
            let h = 1e-6;
            let fd = (p.rate(a + h) - p.rate(a - h)) / (2.0 * h);
            let an = p.surrogate(a);
            assert!((fd - an).abs() <= 1e-6 * an.abs(), "a={a}: {fd} vs {an}");
        }
    }

    #[test]
    fn lif_examples() {
        let p = LifParams::default();
        let (s, v) = p.step(0.5, 0.0);
        assert_eq!(s, 0.0);
        assert!((v - 0.45).abs() < 1e-12);
        assert_eq!(p.step(0.5, 0.6), (1.0, 0.0));
    }

    #[test]
    fn lif_subthreshold_fixed_point() {
        let p = LifParams::default();
        let mut v = 0.0;
        for _ in 0..1000 {
            let (s, next) = p.step(v, 0.05);
            assert_eq!(s, 0.0);
            v = next;
        }
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn smooth_spike_derivative_is_surrogate() {
        let p = LifParams::default();
        for &x in &[-1.0f64, -0.2, -0.01, 0.01, 0.3, 2.0] {
            let h = 1e-7;
            let fd = (p.smooth_spike(x + h) - p.smooth_spike(x - h)) / (2.0 * h);
            assert!((fd - p.surrogate(x)).abs() < 1e-6, "x={x}");
        }
        assert!((p.smooth_spike(0.0f64) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn readout_examples() {
        assert!((readout_step(0.9, 2.0, 0.0) - 1.8).abs() < 1e-12);
        assert_eq!(readout_step(0.0, 5.0, 3.0), 3.0);
        let mut m = 0.0;
        for _ in 0..1000 {
            m = readout_step(0.9, m, 1.0);
        }
        assert!((m - 10.0).abs() < 1e-9);
    }
}
