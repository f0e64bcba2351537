//! Spiking MLP: forward/backward through time, Adam, training, evaluation and
//! the Gaussian-noise sweep.
//!
//! Every hidden layer computes `a = BN(x·W + b)` for all timesteps at once
//! (batchnorm statistics are pooled over batch × time), then runs its neurons
//! through time. The readout integrates `s·W_out + b_out` with a leaky
//! membrane and the logits are the per-channel maximum of that trace over
//! time.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::synthesize_default_models;
use crate::encoding::{add_noise, poisson_encode, ImageSet, NoiseSpec, SpikeBatch, CLASSES};
use crate::graph::{BatchStats, Graph, NodeId};
use crate::neuron::{BinaryNeuronParams, LifParams, Mode, MwNeuronParams, NeuronModel};
use crate::rng::{derive_key, stream, Purpose};
use crate::{Error, Real, Result, Tensor};

/// Network topology, neuron types and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    /// One neuron model per hidden layer.
    pub neurons: Vec<NeuronModel>,
    pub timesteps: usize,
    /// Decay of the leaky readout membrane.
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
    /// Evaluate with mean-field neurons instead of sampled ones (diagnostic).
    pub mean_field_eval: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self::with_neuron(default_neuron("binary").expect("known kind"), 200)
    }
}

/// Default neuron of a kind: `"binary"`, `"mw"` or `"lif"`, using the
/// synthetic device calibration.
pub fn default_neuron(kind: &str) -> Option<NeuronModel> {
    let (binary, mw) = synthesize_default_models();
    match kind {
        "binary" => Some(NeuronModel::Binary(BinaryNeuronParams::with_default_map(
            binary.into(),
        ))),
        "mw" => Some(NeuronModel::Mw(MwNeuronParams::with_default_map(mw))),
        "lif" => Some(NeuronModel::Lif(LifParams::default())),
        _ => None,
    }
}

impl MlpConfig {
    /// Two hidden layers of `hidden` units with the given neuron.
    pub fn with_neuron(neuron: NeuronModel, hidden: usize) -> Self {
        Self {
            input: 784,
            hidden: vec![hidden, hidden],
            output: CLASSES,
            neurons: vec![neuron.clone(), neuron],
            timesteps: 40,
            beta_out: 0.9,
            batch_size: 100,
            eval_batch_size: 100,
            learning_rate: 1e-3,
            epochs: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            bn_momentum: 0.1,
            bn_epsilon: 1e-5,
            mean_field_eval: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.input == 0 || self.output == 0 || self.hidden.is_empty() || self.hidden.contains(&0)
        {
            return fail(
                "layer sizes must be positive and there must be at least one hidden layer",
            );
        }
        if self.neurons.len() != self.hidden.len() {
            return fail("need exactly one neuron model per hidden layer");
        }
        if self.timesteps == 0 {
            return fail("timesteps must be >= 1");
        }
        if self.batch_size < 2 {
            return fail("batch_size must be >= 2 for batch normalization");
        }
        if self.eval_batch_size == 0 {
            return fail("eval_batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.beta_out) {
            return fail("beta_out must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) || !(self.bn_epsilon > 0.0) {
            return fail("bn_momentum must lie in (0, 1) and bn_epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail("Adam betas must lie in [0, 1)");
        }
        self.neurons.iter().try_for_each(NeuronModel::validate)
    }
}

/// Per-feature batchnorm scale/shift and running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct BatchNormParams<S> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
}

impl<S: Real> BatchNormParams<S> {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Tensor::full(&[features], S::one()),
            beta: Tensor::zeros(&[features]),
            running_mean: vec![S::zero(); features],
            running_var: vec![S::one(); features],
        }
    }

    /// Exponential moving average of batch statistics; the variance uses the
    /// unbiased `N/(N-1)` correction.
    pub fn update_running(&mut self, stats: &BatchStats<S>, momentum: f64) {
        let m = S::of(momentum);
        let n = stats.count as f64;
        let unbias = S::of(n / (n - 1.0));
        for (r, &b) in self.running_mean.iter_mut().zip(&stats.mean) {
            *r = (S::one() - m) * *r + m * b;
        }
        for (r, &b) in self.running_var.iter_mut().zip(&stats.var) {
            *r = (S::one() - m) * *r + m * b * unbias;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct HiddenLayer<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub bn: BatchNormParams<S>,
}

/// Trainable state of the network (the readout has no batchnorm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct ModelParams<S> {
    pub hidden: Vec<HiddenLayer<S>>,
    pub out_weight: Tensor<S>,
    pub out_bias: Tensor<S>,
}

fn kaiming_uniform<S: Real>(fan_in: usize, fan_out: usize, seed: u64, layer: u64) -> Tensor<S> {
    let bound = libm_sqrt(6.0 / fan_in as f64);
    let mut rng = stream(seed, Purpose::Init, &[layer]);
    let data = (0..fan_in * fan_out)
        .map(|_| S::of(rng.random_range(-bound..bound)))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("shape matches data")
}

fn libm_sqrt(x: f64) -> f64 {
    num_traits::Float::sqrt(x)
}

impl<S: Real> ModelParams<S> {
    /// Uniform `±√(6/fan_in)` weights, zero biases, unit-gamma batchnorm.
    pub fn init(config: &MlpConfig, seed: u64) -> Self {
        let mut fan_in = config.input;
        let mut hidden = Vec::with_capacity(config.hidden.len());
        for (l, &h) in config.hidden.iter().enumerate() {
            hidden.push(HiddenLayer {
                weight: kaiming_uniform(fan_in, h, seed, l as u64),
                bias: Tensor::zeros(&[h]),
                bn: BatchNormParams::new(h),
            });
            fan_in = h;
        }
        Self {
            out_weight: kaiming_uniform(fan_in, config.output, seed, config.hidden.len() as u64),
            out_bias: Tensor::zeros(&[config.output]),
            hidden,
        }
    }

    /// Trainable tensors in canonical order: per hidden layer
    /// `[W, b, gamma, beta]`, then `[W_out, b_out]`.
    pub fn tensors(&self) -> Vec<&Tensor<S>> {
        let mut v = Vec::new();
        for l in &self.hidden {
            v.extend([&l.weight, &l.bias, &l.bn.gamma, &l.bn.beta]);
        }
        v.extend([&self.out_weight, &self.out_bias]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut v = Vec::new();
        for l in &mut self.hidden {
            v.push(&mut l.weight);
            v.push(&mut l.bias);
            v.push(&mut l.bn.gamma);
            v.push(&mut l.bn.beta);
        }
        v.push(&mut self.out_weight);
        v.push(&mut self.out_bias);
        v
    }

    pub fn check_shapes(&self, config: &MlpConfig) -> Result<()> {
        let ok = self.hidden.len() == config.hidden.len()
            && self
                .hidden
                .iter()
                .zip(&config.hidden)
                .scan(config.input, |fan_in, (l, &h)| {
                    let good = l.weight.shape() == [*fan_in, h]
                        && l.bias.len() == h
                        && l.bn.gamma.len() == h
                        && l.bn.beta.len() == h
                        && l.bn.running_mean.len() == h
                        && l.bn.running_var.len() == h;
                    *fan_in = h;
                    Some(good)
                })
                .all(|g| g)
            && self.out_weight.shape() == [*config.hidden.last().unwrap_or(&0), config.output]
            && self.out_bias.len() == config.output;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(
                "model parameters do not match the configuration".into(),
            ))
        }
    }
}

/// Batchnorm behaviour of a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Batch statistics; parameters are differentiable.
    Train,
    /// Running statistics; nothing requires gradients.
    Infer,
}

/// A recorded forward pass.
#[derive(Debug)]
pub struct Forward<S> {
    pub graph: Graph<S>,
    /// Parameter nodes in [`ModelParams::tensors`] order (train phase only).
    pub params: Vec<NodeId>,
    /// Per-layer hidden spikes `[T·B × H]`.
    pub hidden_spikes: Vec<NodeId>,
    /// Readout membrane trace `[T·B × C]`.
    pub trace: NodeId,
    /// Max-over-time logits `[B × C]`.
    pub logits: NodeId,
    pub batch_stats: Vec<BatchStats<S>>,
}

/// Run the network over a spike batch.
///
/// Neuron state starts from reset for every call. Sampled neurons in layer
/// `l` draw from the stream `(seed, pass, l)`.
pub fn forward<S: Real>(
    params: &ModelParams<S>,
    config: &MlpConfig,
    spikes: &SpikeBatch<S>,
    mode: Mode,
    phase: Phase,
    seed: u64,
    pass: u64,
) -> Result<Forward<S>> {
    params.check_shapes(config)?;
    if spikes.units != config.input || spikes.steps != config.timesteps {
        return Err(Error::Dimension(alloc::format!(
            "spike batch is {} steps x {} units, network expects {} x {}",
            spikes.steps,
            spikes.units,
            config.timesteps,
            config.input
        )));
    }
    let steps = spikes.steps;
    let mut g = Graph::new();
    let leaf = |g: &mut Graph<S>, t: &Tensor<S>| match phase {
        Phase::Train => g.param(t.clone()),
        Phase::Infer => g.constant(t.clone()),
    };
    let mut param_ids = Vec::new();
    let mut batch_stats = Vec::new();
    let mut hidden_spikes = Vec::new();
    let eps = S::of(config.bn_epsilon);

    let mut x = g.constant(spikes.spikes.clone())?;
    for (l, (layer, neuron)) in params.hidden.iter().zip(&config.neurons).enumerate() {
        let w = leaf(&mut g, &layer.weight)?;
        let b = leaf(&mut g, &layer.bias)?;
        let gamma = leaf(&mut g, &layer.bn.gamma)?;
        let beta = leaf(&mut g, &layer.bn.beta)?;
        param_ids.extend([w, b, gamma, beta]);
        let z = g.matmul(x, w)?;
        let z = g.add_bias(z, b)?;
        let a = match phase {
            Phase::Train => {
                let (a, stats) = g.batchnorm_train(z, gamma, beta, eps)?;
                batch_stats.push(stats);
                a
            }
            Phase::Infer => g.batchnorm_infer(
                z,
                gamma,
                beta,
                &layer.bn.running_mean,
                &layer.bn.running_var,
                eps,
            )?,
        };
        let mut rng = stream(seed, Purpose::Neuron, &[pass, l as u64]);
        x = g.neuron_layer(a, neuron, steps, mode, &mut rng)?;
        hidden_spikes.push(x);
    }
    let w = leaf(&mut g, &params.out_weight)?;
    let b = leaf(&mut g, &params.out_bias)?;
    param_ids.extend([w, b]);
    let z = g.matmul(x, w)?;
    let z = g.add_bias(z, b)?;
    let trace = g.readout(z, S::of(config.beta_out), steps)?;
    let logits = g.max_over_time(trace, steps)?;
    if phase == Phase::Infer {
        param_ids.clear();
    }
    Ok(Forward {
        graph: g,
        params: param_ids,
        hidden_spikes,
        trace,
        logits,
        batch_stats,
    })
}

/// Softmax cross-entropy on the max-over-time logits and its gradient with
/// respect to every trainable tensor (canonical order).
pub fn loss_and_grad<S: Real>(
    fwd: &mut Forward<S>,
    labels: &[usize],
) -> Result<(S, Vec<Tensor<S>>)> {
    let loss = fwd.graph.softmax_cross_entropy(fwd.logits, labels)?;
    let value = fwd.graph.value(loss).data()[0];
    let mut grads = fwd.graph.backward(loss)?;
    let out = fwd
        .params
        .iter()
        .map(|&id| {
            grads
                .take(id)
                .unwrap_or_else(|| Tensor::zeros(fwd.graph.value(id).shape()))
        })
        .collect();
    Ok((value, out))
}

/// Adam moments for every trainable tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct AdamState<S> {
    pub first: Vec<Tensor<S>>,
    pub second: Vec<Tensor<S>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<S: Real> AdamState<S> {
    pub fn new(shapes: &[&[usize]], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            second: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn for_params(params: &ModelParams<S>, config: &MlpConfig) -> Self {
        let shapes: Vec<&[usize]> = params.tensors().iter().map(|t| t.shape()).collect();
        Self::new(
            &shapes,
            config.adam_beta1,
            config.adam_beta2,
            config.adam_epsilon,
        )
    }
}

/// One bias-corrected Adam step.
pub fn adam_update<S: Real>(
    params: &mut [&mut Tensor<S>],
    grads: &[Tensor<S>],
    state: &mut AdamState<S>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Dimension(
            "parameter / gradient / moment counts differ".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - num_traits::Float::powi(b1, t);
    let c2 = 1.0 - num_traits::Float::powi(b2, t);
    let (b1s, b2s) = (S::of(b1), S::of(b2));
    let (one_b1, one_b2) = (S::of(1.0 - b1), S::of(1.0 - b2));
    let step_size = S::of(lr / c1);
    let inv_c2 = S::of(1.0 / c2);
    let eps = S::of(state.epsilon);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        if p.shape() != g.shape() || m.shape() != g.shape() {
            return Err(Error::Dimension(
                "adam: parameter and gradient shapes differ".into(),
            ));
        }
        for (((w, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1s * *mi + one_b1 * gi;
            *vi = b2s * *vi + one_b2 * gi * gi;
            *w -= step_size * *mi / ((*vi * inv_c2).sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    /// Training hit a non-finite loss or gradient.
    Aborted,
    /// Written before the run finished.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub train_loss: f64,
    /// Median batch loss over the first and second half of the epoch.
    pub loss_first_half: f64,
    pub loss_second_half: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub raw_acc: f64,
    pub norm_acc: f64,
}

/// Self-describing, deterministic record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: Option<String>,
    pub config: MlpConfig,
    pub seed: u64,
    pub precision: String,
    pub status: RunStatus,
    pub diagnostic: Option<String>,
    pub train_size: usize,
    pub val_size: usize,
    /// Validation accuracy of the freshly initialized network.
    pub initial_val_acc: f64,
    pub epochs: Vec<EpochMetrics>,
    pub final_val_acc: f64,
    pub test_acc: Option<f64>,
    pub noise_sweep: Option<Vec<NoiseRow>>,
    /// Only filled in on request; timing breaks byte-identical reruns.
    pub wall_clock_s: Option<f64>,
}

/// Result of [`train`]: the record and the final parameters.
#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub record: RunRecord,
    pub params: ModelParams<S>,
}

/// Stream tag of evaluation passes, disjoint from training epochs.
const EVAL_PASS: u64 = 1 << 48;

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Train from a fresh initialization.
///
/// Each epoch visits a seeded permutation of `train` in full batches (the
/// remainder is dropped), Poisson-encodes each batch, runs a sampled-mode
/// forward/backward and applies Adam. Validation accuracy is measured after
/// every epoch with a fixed evaluation seed. `on_progress` sees the record
/// (status `Incomplete`) after initialization and after every epoch.
pub fn train<S: Real>(
    config: &MlpConfig,
    train_set: &ImageSet,
    val_set: &ImageSet,
    seed: u64,
    mut on_progress: impl FnMut(&RunRecord),
) -> Result<TrainOutcome<S>> {
    config.validate()?;
    if train_set.pixels_per_image() != config.input || val_set.pixels_per_image() != config.input {
        return Err(Error::Dimension(
            "image size does not match network input".into(),
        ));
    }
    let eval_seed = derive_key(seed, Purpose::Eval, &[]);
    let mut params = ModelParams::<S>::init(config, seed);
    let mut adam = AdamState::for_params(&params, config);
    let initial_val_acc = evaluate(&params, config, val_set, eval_seed)?;
    let mut record = RunRecord {
        label: None,
        config: config.clone(),
        seed,
        precision: S::PRECISION.to_string(),
        status: RunStatus::Incomplete,
        diagnostic: None,
        train_size: train_set.len(),
        val_size: val_set.len(),
        initial_val_acc,
        epochs: Vec::new(),
        final_val_acc: initial_val_acc,
        test_acc: None,
        noise_sweep: None,
        wall_clock_s: None,
    };
    on_progress(&record);

    let batches = train_set.len() / config.batch_size;
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        rand::seq::SliceRandom::shuffle(
            order.as_mut_slice(),
            &mut stream(seed, Purpose::Shuffle, &[epoch as u64]),
        );
        let mut losses = Vec::with_capacity(batches);
        for (bi, idx) in order.chunks_exact(config.batch_size).enumerate() {
            let pass = (epoch as u64) << 24 | bi as u64;
            let spikes = poisson_encode::<S>(train_set, idx, config.timesteps, seed, epoch as u64)?;
            let labels: Vec<usize> = idx.iter().map(|&i| train_set.label(i)).collect();
            let step = forward(
                &params,
                config,
                &spikes,
                Mode::Sampled,
                Phase::Train,
                seed,
                pass,
            )
            .and_then(|mut fwd| {
                loss_and_grad(&mut fwd, &labels).map(|(l, g)| (l, g, fwd.batch_stats))
            });
            let (loss, grads, stats) = match step {
                Ok(v) => v,
                Err(e @ Error::NonFinite(_)) => {
                    record.status = RunStatus::Aborted;
                    record.diagnostic = Some(alloc::format!("epoch {epoch}, batch {bi}: {e}"));
                    return Ok(TrainOutcome { record, params });
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                record.status = RunStatus::Aborted;
                record.diagnostic = Some(alloc::format!(
                    "epoch {epoch}, batch {bi}: non-finite loss or gradient (loss = {loss})"
                ));
                return Ok(TrainOutcome { record, params });
            }
            losses.push(loss.as_f64());
            adam_update(
                &mut params.tensors_mut(),
                &grads,
                &mut adam,
                config.learning_rate,
            )?;
            for (layer, st) in params.hidden.iter_mut().zip(&stats) {
                layer.bn.update_running(st, config.bn_momentum);
            }
        }
        let val_acc = evaluate(&params, config, val_set, eval_seed)?;
        let half = losses.len() / 2;
        let metrics = EpochMetrics {
            epoch,
            train_loss: losses.iter().sum::<f64>() / losses.len().max(1) as f64,
            loss_first_half: median(&mut losses[..half].to_vec()),
            loss_second_half: median(&mut losses[half..].to_vec()),
            val_acc,
        };
        record.final_val_acc = val_acc;
        record.epochs.push(metrics);
        on_progress(&record);
    }
    record.status = RunStatus::Complete;
    Ok(TrainOutcome { record, params })
}

/// Predicted class of every image (batchnorm in inference mode).
pub fn predict<S: Real>(
    params: &ModelParams<S>,
    config: &MlpConfig,
    set: &ImageSet,
    seed: u64,
) -> Result<Vec<usize>> {
    let mode = if config.mean_field_eval {
        Mode::MeanField
    } else {
        Mode::Sampled
    };
    let all: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for (bi, idx) in all.chunks(config.eval_batch_size).enumerate() {
        let spikes = poisson_encode::<S>(set, idx, config.timesteps, seed, EVAL_PASS)?;
        let fwd = forward(
            params,
            config,
            &spikes,
            mode,
            Phase::Infer,
            seed,
            EVAL_PASS | bi as u64,
        )?;
        let logits = fwd.graph.value(fwd.logits);
        for row in logits.data().chunks_exact(config.output) {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            out.push(best);
        }
    }
    Ok(out)
}

/// Fraction of images whose predicted class equals the label.
pub fn evaluate<S: Real>(
    params: &ModelParams<S>,
    config: &MlpConfig,
    set: &ImageSet,
    seed: u64,
) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let pred = predict(params, config, set, seed)?;
    let correct = pred
        .iter()
        .enumerate()
        .filter(|&(i, &p)| p == set.label(i))
        .count();
    Ok(correct as f64 / set.len() as f64)
}

/// Seed of the Gaussian corruption applied at noise level `sigma`.
pub fn noise_seed(seed: u64, sigma: f64) -> u64 {
    derive_key(seed, Purpose::Noise, &[sigma.to_bits()])
}

/// Accuracy on Gaussian-corrupted copies of `test` for each `sigma`.
///
/// The corruption at each sigma depends only on `(seed, sigma)`, so every
/// model swept with the same seed sees the same noisy images. Normalized
/// accuracy divides by the model's own accuracy at `sigma = 0`.
pub fn noise_sweep<S: Real>(
    params: &ModelParams<S>,
    config: &MlpConfig,
    test: &ImageSet,
    sigmas: &[f64],
    seed: u64,
) -> Result<Vec<NoiseRow>> {
    if !sigmas.contains(&0.0) {
        return Err(Error::MissingAnchor);
    }
    let mut raw = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let noisy = add_noise(test, NoiseSpec::new(sigma)?, noise_seed(seed, sigma));
        raw.push(evaluate(params, config, &noisy, seed)?);
    }
    let clean = raw[sigmas
        .iter()
        .position(|&s| s == 0.0)
        .expect("anchor checked")];
    Ok(sigmas
        .iter()
        .zip(raw)
        .map(|(&sigma, raw_acc)| NoiseRow {
            sigma,
            raw_acc,
            norm_acc: if clean > 0.0 { raw_acc / clean } else { 0.0 },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(kind: &str) -> MlpConfig {
        let mut c = MlpConfig::with_neuron(default_neuron(kind).unwrap(), 6);
        c.input = 4;
        c.timesteps = 3;
        c.batch_size = 4;
        c.eval_batch_size = 3;
        c.epochs = 1;
        c
    }

    fn tiny_set(n: usize) -> ImageSet {
        let pixels = (0..n * 4).map(|i| ((i * 7) % 11) as f32 / 10.0).collect();
        ImageSet::new(2, 2, pixels, (0..n).map(|i| (i % 10) as u8).collect()).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = tiny_config("lif");
        assert!(c.validate().is_ok());
        c.batch_size = 1;
        assert!(c.validate().is_err());
        let mut c = tiny_config("lif");
        c.neurons.pop();
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_input_lif_gives_zero_logits() {
        let c = tiny_config("lif");
        let p = ModelParams::<f64>::init(&c, 1);
        let spikes = SpikeBatch {
            steps: 3,
            batch: 2,
            units: 4,
            timestep_period: 1e-7,
            spikes: Tensor::zeros(&[6, 4]),
        };
        let fwd = forward(&p, &c, &spikes, Mode::Sampled, Phase::Train, 0, 0).unwrap();
        assert!(fwd.graph.value(fwd.logits).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adam_zero_gradient_is_null_update() {
        let mut w = Tensor::<f64>::full(&[2], 0.5);
        let mut st = AdamState::new(&[&[2]], 0.9, 0.999, 1e-8);
        adam_update(&mut [&mut w], &[Tensor::zeros(&[2])], &mut st, 1e-3).unwrap();
        assert_eq!(w.data(), &[0.5, 0.5]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_first_step_is_sign() {
        let mut w = Tensor::<f64>::zeros(&[2]);
        let mut st = AdamState::new(&[&[2]], 0.9, 0.999, 1e-8);
        let g = Tensor::new(vec![2], vec![3.0, -0.2]).unwrap();
        adam_update(&mut [&mut w], &[g], &mut st, 1e-3).unwrap();
        assert!((w.data()[0] + 1e-3).abs() < 1e-9);
        assert!((w.data()[1] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn noise_sweep_needs_anchor() {
        let c = tiny_config("binary");
        let p = ModelParams::<f32>::init(&c, 1);
        assert_eq!(
            noise_sweep(&p, &c, &tiny_set(5), &[0.5, 1.0], 1).unwrap_err(),
            Error::MissingAnchor
        );
        let rows = noise_sweep(&p, &c, &tiny_set(5), &[0.0, 1.0], 1).unwrap();
        assert_eq!(
            rows[0].norm_acc,
            if rows[0].raw_acc > 0.0 { 1.0 } else { 0.0 }
        );
    }

    #[test]
    fn train_zero_epochs_records_initial_metrics() {
        let mut c = tiny_config("mw");
        c.epochs = 0;
        let out = train::<f32>(&c, &tiny_set(12), &tiny_set(7), 3, |_| {}).unwrap();
        assert!(out.record.epochs.is_empty());
        assert_eq!(out.record.final_val_acc, out.record.initial_val_acc);
        assert_eq!(out.record.status, RunStatus::Complete);
        assert_eq!(out.record.precision, "f32");
    }

    #[test]
    fn relabelled_by_own_predictions_scores_one() {
        for kind in ["binary", "mw", "lif"] {
            let c = tiny_config(kind);
            let p = ModelParams::<f64>::init(&c, 4);
            let set = tiny_set(10);
            let pred = predict(&p, &c, &set, 9).unwrap();
            let relabelled = set
                .with_labels(pred.iter().map(|&k| k as u8).collect())
                .unwrap();
            assert_eq!(evaluate(&p, &c, &relabelled, 9).unwrap(), 1.0);
        }
    }

    #[test]
    fn train_is_deterministic() {
        let c = tiny_config("binary");
        let a = train::<f32>(&c, &tiny_set(12), &tiny_set(7), 3, |_| {}).unwrap();
        let b = train::<f32>(&c, &tiny_set(12), &tiny_set(7), 3, |_| {}).unwrap();
        assert_eq!(a.record, b.record);
        assert_eq!(a.params, b.params);
    }
}
