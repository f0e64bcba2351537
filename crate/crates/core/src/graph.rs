//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Nodes are appended in evaluation order, so the tape is a topological order
//! of the (acyclic) graph and `backward` simply walks it in reverse, visiting
//! each node once. Values are never mutated after they are recorded.
//!
//! Recurrences over time (neuron membranes, the leaky readout) are recorded
//! as single fused nodes whose backward rule runs backpropagation through time
//! internally, so a `[T·B × F]` activation is one node rather than `T`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::neuron::{Mode, NeuronModel};
use crate::tensor::{gemm_acc, gemm_tn_acc};
use crate::{Error, Real, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op<S> {
    Leaf,
    MatMul {
        a: NodeId,
        b: NodeId,
    },
    AddBias {
        x: NodeId,
        bias: NodeId,
    },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<S>,
        inv_std: Vec<S>,
        train: bool,
    },
    Neuron {
        x: NodeId,
        model: NeuronModel,
        steps: usize,
        tape: Vec<S>,
    },
    Readout {
        x: NodeId,
        beta: S,
        steps: usize,
    },
    MaxOverTime {
        x: NodeId,
        argmax: Vec<usize>,
    },
    SoftmaxCrossEntropy {
        logits: NodeId,
        probs: Vec<S>,
        labels: Vec<usize>,
    },
    Sum {
        x: NodeId,
    },
}

#[derive(Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
}

/// Per-feature batch statistics produced by a training-mode batchnorm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<S> {
    pub mean: Vec<S>,
    /// Biased (divide-by-N) variance.
    pub var: Vec<S>,
    pub count: usize,
}

#[derive(Debug, Default)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

/// Gradients of a scalar root with respect to every node that requires them.
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Real> Gradients<S> {
    /// Gradient of `id`; `None` when the node does not require gradients.
    pub fn get(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor<S>> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}

fn accumulate<S: Real>(slot: &mut Option<Tensor<S>>, shape: &[usize], f: impl FnOnce(&mut [S])) {
    let t = slot.get_or_insert_with(|| Tensor::zeros(shape));
    f(t.data_mut());
}

impl<S: Real> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(
        &mut self,
        value: Tensor<S>,
        op: Op<S>,
        requires_grad: bool,
        name: &'static str,
    ) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Constant input; no gradient is computed for it.
    pub fn constant(&mut self, value: Tensor<S>) -> Result<NodeId> {
        self.push(value, Op::Leaf, false, "constant")
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<S>) -> Result<NodeId> {
        self.push(value, Op::Leaf, true, "param")
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.requires(a) || self.requires(b);
        self.push(value, Op::MatMul { a, b }, rg, "matmul")
    }

    /// `x[N×F] + bias[F]` broadcast over rows.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (_, f) = self.value(x).dims2()?;
        if self.value(bias).len() != f {
            return Err(Error::Dimension(format!(
                "bias of length {} for {f} features",
                self.value(bias).len()
            )));
        }
        let mut value = self.value(x).clone();
        let b = self.value(bias).data().to_vec();
        for row in value.data_mut().chunks_exact_mut(f) {
            for (y, &bi) in row.iter_mut().zip(&b) {
                *y += bi;
            }
        }
        let rg = self.requires(x) || self.requires(bias);
        self.push(value, Op::AddBias { x, bias }, rg, "add_bias")
    }

    fn check_bn(&self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<(usize, usize)> {
        let (n, f) = self.value(x).dims2()?;
        if self.value(gamma).len() != f || self.value(beta).len() != f {
            return Err(Error::Dimension(format!(
                "batchnorm parameters of length {}/{} for {f} features",
                self.value(gamma).len(),
                self.value(beta).len()
            )));
        }
        Ok((n, f))
    }

    /// Training-mode batch normalization over the rows of `x`.
    pub fn batchnorm_train(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: S,
    ) -> Result<(NodeId, BatchStats<S>)> {
        let (n, f) = self.check_bn(x, gamma, beta)?;
        if n < 2 {
            return Err(Error::DegenerateBatch(n));
        }
        let xs = self.value(x).data();
        let nn = S::of(n as f64);
        let mut mean = vec![S::zero(); f];
        for row in xs.chunks_exact(f) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nn);
        let mut var = vec![S::zero(); f];
        for row in xs.chunks_exact(f) {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|s| *s /= nn);
        let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
        let mut xhat = vec![S::zero(); n * f];
        for (row, out) in xs.chunks_exact(f).zip(xhat.chunks_exact_mut(f)) {
            for (((o, &v), &m), &is) in out.iter_mut().zip(row).zip(&mean).zip(&inv_std) {
                *o = (v - m) * is;
            }
        }
        let value = self.affine(&xhat, gamma, beta, n, f)?;
        let rg = self.requires(x) || self.requires(gamma) || self.requires(beta);
        let id = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train: true,
            },
            rg,
            "batchnorm",
        )?;
        Ok((
            id,
            BatchStats {
                mean,
                var,
                count: n,
            },
        ))
    }

    /// Inference-mode batch normalization using running statistics.
    pub fn batchnorm_infer(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running_mean: &[S],
        running_var: &[S],
        eps: S,
    ) -> Result<NodeId> {
        let (n, f) = self.check_bn(x, gamma, beta)?;
        if running_mean.len() != f || running_var.len() != f {
            return Err(Error::Dimension("running statistics length".into()));
        }
        let inv_std: Vec<S> = running_var
            .iter()
            .map(|&v| S::one() / (v + eps).sqrt())
            .collect();
        let mut xhat = vec![S::zero(); n * f];
        for (row, out) in self
            .value(x)
            .data()
            .chunks_exact(f)
            .zip(xhat.chunks_exact_mut(f))
        {
            for (((o, &v), &m), &is) in out.iter_mut().zip(row).zip(running_mean).zip(&inv_std) {
                *o = (v - m) * is;
            }
        }
        let value = self.affine(&xhat, gamma, beta, n, f)?;
        let rg = self.requires(x) || self.requires(gamma) || self.requires(beta);
        self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train: false,
            },
            rg,
            "batchnorm",
        )
    }

    fn affine(
        &self,
        xhat: &[S],
        gamma: NodeId,
        beta: NodeId,
        n: usize,
        f: usize,
    ) -> Result<Tensor<S>> {
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut out = vec![S::zero(); n * f];
        for (row, o) in xhat.chunks_exact(f).zip(out.chunks_exact_mut(f)) {
            for (((y, &xh), &gi), &bi) in o.iter_mut().zip(row).zip(g).zip(b) {
                *y = gi * xh + bi;
            }
        }
        Tensor::new(vec![n, f], out)
    }

    /// Spiking layer over `steps` timesteps; `x` is `[steps·B × H]` time-major.
    pub fn neuron_layer<R: RngCore + ?Sized>(
        &mut self,
        x: NodeId,
        model: &NeuronModel,
        steps: usize,
        mode: Mode,
        rng: &mut R,
    ) -> Result<NodeId> {
        let (rows, h) = self.value(x).dims2()?;
        if steps == 0 || rows % steps != 0 {
            return Err(Error::Dimension(format!(
                "{rows} rows do not split into {steps} timesteps"
            )));
        }
        let rg = self.requires(x);
        let (spikes, tape) = model.forward_layer(self.value(x).data(), steps, mode, rg, rng)?;
        let value = Tensor::new(vec![rows, h], spikes)?;
        self.push(
            value,
            Op::Neuron {
                x,
                model: model.clone(),
                steps,
                tape,
            },
            rg,
            "neuron",
        )
    }

    /// Leaky integration `m_t = beta·m_{t-1} + x_t` from `m_{-1} = 0`; returns
    /// the whole membrane trace.
    pub fn readout(&mut self, x: NodeId, beta: S, steps: usize) -> Result<NodeId> {
        let (rows, c) = self.value(x).dims2()?;
        if steps == 0 || rows % steps != 0 {
            return Err(Error::Dimension(format!(
                "{rows} rows do not split into {steps} timesteps"
            )));
        }
        let width = rows / steps * c;
        let mut trace = self.value(x).data().to_vec();
        for t in 1..steps {
            let (prev, cur) = trace.split_at_mut(t * width);
            let prev = &prev[(t - 1) * width..];
            for (m, &p) in cur[..width].iter_mut().zip(prev) {
                *m += beta * p;
            }
        }
        let value = Tensor::new(vec![rows, c], trace)?;
        let rg = self.requires(x);
        self.push(value, Op::Readout { x, beta, steps }, rg, "readout")
    }

    /// Elementwise maximum over the time axis of a `[steps·B × C]` trace.
    /// Ties go to the earliest timestep.
    pub fn max_over_time(&mut self, x: NodeId, steps: usize) -> Result<NodeId> {
        let (rows, c) = self.value(x).dims2()?;
        if steps == 0 {
            return Err(Error::EmptyTimeAxis);
        }
        if rows % steps != 0 {
            return Err(Error::Dimension(format!(
                "{rows} rows do not split into {steps} timesteps"
            )));
        }
        let b = rows / steps;
        let width = b * c;
        let xs = self.value(x).data();
        let mut out = xs[..width].to_vec();
        let mut argmax = vec![0usize; width];
        for t in 1..steps {
            for ((o, a), &v) in out
                .iter_mut()
                .zip(&mut argmax)
                .zip(&xs[t * width..(t + 1) * width])
            {
                if v > *o {
                    *o = v;
                    *a = t;
                }
            }
        }
        let value = Tensor::new(vec![b, c], out)?;
        let rg = self.requires(x);
        self.push(value, Op::MaxOverTime { x, argmax }, rg, "max_over_time")
    }

    /// Time index selected by [`Self::max_over_time`] for each output element.
    pub fn argmax_times(&self, id: NodeId) -> Option<&[usize]> {
        match &self.nodes[id.0].op {
            Op::MaxOverTime { argmax, .. } => Some(argmax),
            _ => None,
        }
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (b, c) = self.value(logits).dims2()?;
        if labels.len() != b {
            return Err(Error::Dimension(format!(
                "{} labels for {b} rows",
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        let mut probs = vec![S::zero(); b * c];
        let mut loss = S::zero();
        for ((row, p), &label) in self
            .value(logits)
            .data()
            .chunks_exact(c)
            .zip(probs.chunks_exact_mut(c))
            .zip(labels)
        {
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let mut z = S::zero();
            for (pi, &v) in p.iter_mut().zip(row) {
                *pi = (v - max).exp();
                z += *pi;
            }
            p.iter_mut().for_each(|pi| *pi /= z);
            loss += z.ln() + max - row[label];
        }
        loss /= S::of(b as f64);
        let rg = self.requires(logits);
        self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
            },
            rg,
            "softmax_cross_entropy",
        )
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).sum();
        let rg = self.requires(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg, "sum")
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<S>> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(Error::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(root_value.shape(), S::one()));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            let gd = g.data();
            match &node.op {
                Op::Leaf => {}
                Op::MatMul { a, b } => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let (m, k) = av.dims2()?;
                    let (_, n) = bv.dims2()?;
                    if self.requires(*a) {
                        // grad_A = G · Bᵀ
                        let bt = bv.transpose()?;
                        accumulate(&mut grads[a.0], av.shape(), |ga| {
                            gemm_acc(gd, bt.data(), ga, m, n, k)
                        });
                    }
                    if self.requires(*b) {
                        // grad_B = Aᵀ · G
                        accumulate(&mut grads[b.0], bv.shape(), |gb| {
                            gemm_tn_acc(av.data(), gd, gb, m, k, n)
                        });
                    }
                }
                Op::AddBias { x, bias } => {
                    let f = self.value(*bias).len();
                    if self.requires(*x) {
                        accumulate(&mut grads[x.0], g.shape(), |gx| {
                            gx.iter_mut().zip(gd).for_each(|(a, &b)| *a += b)
                        });
                    }
                    if self.requires(*bias) {
                        accumulate(&mut grads[bias.0], self.value(*bias).shape(), |gb| {
                            for row in gd.chunks_exact(f) {
                                gb.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
                            }
                        });
                    }
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    train,
                } => {
                    let (n, f) = g.dims2()?;
                    let gam = self.value(*gamma).data();
                    let mut sum_dy = vec![S::zero(); f];
                    let mut sum_dy_xhat = vec![S::zero(); f];
                    for (dy, xh) in gd.chunks_exact(f).zip(xhat.chunks_exact(f)) {
                        for j in 0..f {
                            sum_dy[j] += dy[j];
                            sum_dy_xhat[j] += dy[j] * xh[j];
                        }
                    }
                    if self.requires(*gamma) {
                        accumulate(&mut grads[gamma.0], &[f], |gg| {
                            gg.iter_mut().zip(&sum_dy_xhat).for_each(|(a, &b)| *a += b)
                        });
                    }
                    if self.requires(*beta) {
                        accumulate(&mut grads[beta.0], &[f], |gb| {
                            gb.iter_mut().zip(&sum_dy).for_each(|(a, &b)| *a += b)
                        });
                    }
                    if self.requires(*x) {
                        let nn = S::of(n as f64);
                        accumulate(&mut grads[x.0], &[n, f], |gx| {
                            for ((gxr, dy), xh) in gx
                                .chunks_exact_mut(f)
                                .zip(gd.chunks_exact(f))
                                .zip(xhat.chunks_exact(f))
                            {
                                for j in 0..f {
                                    let dxhat = dy[j] * gam[j];
                                    gxr[j] += if *train {
                                        inv_std[j] / nn
                                            * (nn * dxhat
                                                - sum_dy[j] * gam[j]
                                                - xh[j] * sum_dy_xhat[j] * gam[j])
                                    } else {
                                        dxhat * inv_std[j]
                                    };
                                }
                            }
                        });
                    }
                }
                Op::Neuron {
                    x,
                    model,
                    steps,
                    tape,
                } => {
                    let gi = model.backward_layer(tape, node.value.data(), gd, *steps);
                    accumulate(&mut grads[x.0], node.value.shape(), |gx| {
                        gx.iter_mut().zip(&gi).for_each(|(a, &b)| *a += b)
                    });
                }
                Op::Readout { x, beta, steps } => {
                    let width = gd.len() / steps;
                    let mut gi = gd.to_vec();
                    for t in (0..steps - 1).rev() {
                        let (cur, next) = gi.split_at_mut((t + 1) * width);
                        for (c, &nx) in cur[t * width..].iter_mut().zip(&next[..width]) {
                            *c += *beta * nx;
                        }
                    }
                    accumulate(&mut grads[x.0], node.value.shape(), |gx| {
                        gx.iter_mut().zip(&gi).for_each(|(a, &b)| *a += b)
                    });
                }
                Op::MaxOverTime { x, argmax } => {
                    let width = gd.len();
                    accumulate(&mut grads[x.0], self.value(*x).shape(), |gx| {
                        for (j, (&t, &gv)) in argmax.iter().zip(gd).enumerate() {
                            gx[t * width + j] += gv;
                        }
                    });
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    labels,
                } => {
                    let (b, c) = self.value(*logits).dims2()?;
                    let scale = gd[0] / S::of(b as f64);
                    accumulate(&mut grads[logits.0], &[b, c], |gl| {
                        for ((row, p), &label) in gl
                            .chunks_exact_mut(c)
                            .zip(probs.chunks_exact(c))
                            .zip(labels)
                        {
                            for (k, (gk, &pk)) in row.iter_mut().zip(p).enumerate() {
                                let onehot = if k == label { S::one() } else { S::zero() };
                                *gk += (pk - onehot) * scale;
                            }
                        }
                    });
                }
                Op::Sum { x } => {
                    let s = gd[0];
                    accumulate(&mut grads[x.0], self.value(*x).shape(), |gx| {
                        gx.iter_mut().for_each(|a| *a += s)
                    });
                }
            }
            // Keep leaf gradients for the caller.
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn m(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_backward_column_sums() {
        let mut g = Graph::new();
        let a = g.constant(m(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
        let b = g.param(m(&[&[0.5], &[-1.0]])).unwrap();
        let y = g.matmul(a, b).unwrap();
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(b).unwrap(), &m(&[&[4.0], &[6.0]]));
        assert!(grads.get(a).is_none());
    }

    #[test]
    fn linear_gradient_is_input() {
        let mut g = Graph::new();
        let x = g.constant(m(&[&[0.3, -0.7, 2.0]])).unwrap();
        let w = g.param(m(&[&[1.0], &[1.0], &[1.0]])).unwrap();
        let y = g.matmul(x, w).unwrap();
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[0.3, -0.7, 2.0]);
    }

    #[test]
    fn disconnected_parameter_gets_zero() {
        let mut g = Graph::new();
        let x = g.constant(m(&[&[1.0, 2.0]])).unwrap();
        let w = g.param(m(&[&[1.0], &[1.0]])).unwrap();
        let unused = g.param(m(&[&[5.0]])).unwrap();
        let y = g.matmul(x, w).unwrap();
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        let gu = grads.get(unused).map_or(0.0, |t| t.data()[0]);
        assert_eq!(gu, 0.0);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut g = Graph::new();
        let x = g.param(m(&[&[1.0, 2.0]])).unwrap();
        assert!(matches!(g.backward(x), Err(Error::NonScalarRoot(_))));
    }

    #[test]
    fn batchnorm_constant_column_maps_to_beta() {
        let mut g = Graph::new();
        let x = g.constant(m(&[&[3.0], &[3.0], &[3.0]])).unwrap();
        let gamma = g.param(Tensor::full(&[1], 1.0)).unwrap();
        let beta = g.param(Tensor::full(&[1], 0.7)).unwrap();
        let (y, _) = g.batchnorm_train(x, gamma, beta, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn batchnorm_identity_on_standardized_input() {
        let mut g = Graph::new();
        let x = g.constant(m(&[&[-1.0], &[1.0], &[-1.0], &[1.0]])).unwrap();
        let gamma = g.param(Tensor::full(&[1], 1.0)).unwrap();
        let beta = g.param(Tensor::full(&[1], 0.0)).unwrap();
        let (y, stats) = g.batchnorm_train(x, gamma, beta, 1e-12).unwrap();
        assert_eq!(stats.mean, vec![0.0]);
        assert_eq!(stats.var, vec![1.0]);
        for (a, b) in g.value(y).data().iter().zip(g.value(x).data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn batchnorm_infer_formula() {
        let mut g = Graph::new();
        let x = g.constant(m(&[&[4.0]])).unwrap();
        let gamma = g.param(Tensor::full(&[1], 1.0)).unwrap();
        let beta = g.param(Tensor::full(&[1], 0.0)).unwrap();
        let y = g
            .batchnorm_infer(x, gamma, beta, &[2.0], &[4.0], 1e-5)
            .unwrap();
        assert!((g.value(y).data()[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn batchnorm_degenerate_batch() {
        let mut g = Graph::new();
        let x = g.constant(m(&[&[4.0, 1.0]])).unwrap();
        let gamma = g.param(Tensor::full(&[2], 1.0)).unwrap();
        let beta = g.param(Tensor::full(&[2], 0.0)).unwrap();
        assert_eq!(
            g.batchnorm_train(x, gamma, beta, 1e-5).unwrap_err(),
            Error::DegenerateBatch(1)
        );
    }

    #[test]
    fn max_over_time_routes_to_argmax() {
        let mut g = Graph::new();
        // steps = 3, B = 1, C = 1
        let x = g.param(m(&[&[0.1], &[0.9], &[0.4]])).unwrap();
        let y = g.max_over_time(x, 3).unwrap();
        assert_eq!(g.value(y).data(), &[0.9]);
        assert_eq!(g.argmax_times(y).unwrap(), &[1]);
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn max_over_time_tie_and_single_step() {
        let mut g = Graph::new();
        let x = g.param(m(&[&[0.5], &[0.5]])).unwrap();
        let y = g.max_over_time(x, 2).unwrap();
        assert_eq!(g.argmax_times(y).unwrap(), &[0]);
        let one = g.param(m(&[&[1.0, -2.0], &[3.0, 4.0]])).unwrap();
        let y1 = g.max_over_time(one, 1).unwrap();
        assert_eq!(g.value(y1), g.value(one));
        assert_eq!(g.max_over_time(one, 0).unwrap_err(), Error::EmptyTimeAxis);
    }

    #[test]
    fn softmax_cross_entropy_examples() {
        let mut g = Graph::<f64>::new();
        let z = g.param(Tensor::zeros(&[1, 10])).unwrap();
        let l = g.softmax_cross_entropy(z, &[0]).unwrap();
        assert!((g.value(l).data()[0] - num_traits::Float::ln(10f64)).abs() < 1e-12);
        let grads = g.backward(l).unwrap();
        let gz = grads.get(z).unwrap().data();
        assert!((gz[0] + 0.9).abs() < 1e-12);
        assert!(gz[1..].iter().all(|&v| (v - 0.1).abs() < 1e-12));

        let mut sat = vec![0.0; 10];
        sat[0] = 10.0;
        let z2 = g.param(Tensor::new(vec![1, 10], sat).unwrap()).unwrap();
        let l2 = g.softmax_cross_entropy(z2, &[0]).unwrap();
        assert!(g.value(l2).data()[0] < 1e-3);
        assert!(matches!(
            g.softmax_cross_entropy(z2, &[10]),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn readout_trace_and_gradient() {
        let mut g = Graph::new();
        let x = g.param(m(&[&[1.0], &[1.0], &[1.0]])).unwrap();
        let r = g.readout(x, 0.5, 3).unwrap();
        assert_eq!(g.value(r).data(), &[1.0, 1.5, 1.75]);
        let s = g.sum(r).unwrap();
        let grads = g.backward(s).unwrap();
        // d(sum)/dx_t = Σ_{u>=t} 0.5^{u-t}
        assert_eq!(grads.get(x).unwrap().data(), &[1.75, 1.5, 1.0]);
    }

    #[test]
    fn non_finite_rejected() {
        let mut g = Graph::<f64>::new();
        assert_eq!(
            g.param(Tensor::full(&[1], f64::NAN)).unwrap_err(),
            Error::NonFinite("param")
        );
        let _ = stream(0, Purpose::Neuron, &[]);
    }
}
