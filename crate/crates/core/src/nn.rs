//! Dense networks for the generator and the critics.
//!
//! Generators stack `dense → batch norm → activation` and end in `tanh`.
//! Discriminators stack spectrally normalized `dense → activation` and end in
//! a spectrally normalized linear unit producing one critic value per row.

use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{bilinear, Tape, Var};
use crate::error::{Error, Result, TensorError};
use crate::seed;
use crate::tensor::{kernels, Tensor};

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.9;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;
const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Tanh,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::LeakyRelu { slope: DEFAULT_LEAKY_SLOPE }
    }
}

/// Architecture of a generator or discriminator MLP.
///
/// Hidden layer `i` has `hidden_widths[i] * width_multiplier` units; the
/// multiplier is the capacity knob swept by experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub role: Role,
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub batchnorm: bool,
    #[serde(default)]
    pub spectral_norm: bool,
    pub width_multiplier: usize,
}

impl NetworkSpec {
    /// Generator with batch norm and no spectral normalization.
    pub fn generator(latent_dim: usize, data_dim: usize, width_multiplier: usize) -> Self {
        Self {
            role: Role::Generator,
            input_dim: latent_dim,
            hidden_widths: vec![1, 1],
            output_dim: data_dim,
            activation: Activation::default(),
            batchnorm: true,
            spectral_norm: false,
            width_multiplier,
        }
    }

    /// Spectrally normalized critic with a scalar output.
    pub fn discriminator(data_dim: usize, width_multiplier: usize) -> Self {
        Self {
            role: Role::Discriminator,
            input_dim: data_dim,
            hidden_widths: vec![1, 1],
            output_dim: 1,
            activation: Activation::default(),
            batchnorm: false,
            spectral_norm: true,
            width_multiplier,
        }
    }

    pub fn with_width(&self, width_multiplier: usize) -> Self {
        Self { width_multiplier, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.input_dim == 0 || self.output_dim == 0 {
            return fail(format!(
                "zero-width layer: input_dim={}, output_dim={}",
                self.input_dim, self.output_dim
            ));
        }
        if let Some(i) = self.hidden_widths.iter().position(|&w| w == 0) {
            return fail(format!("zero-width layer: hidden_widths[{i}] = 0"));
        }
        if self.width_multiplier == 0 || !self.width_multiplier.is_power_of_two() {
            return fail(format!(
                "width_multiplier must be a positive power of two, got {}",
                self.width_multiplier
            ));
        }
        if let Activation::LeakyRelu { slope } = self.activation {
            if !slope.is_finite() {
                return fail(format!("leaky_relu slope must be finite, got {slope}"));
            }
        }
        match self.role {
            Role::Discriminator => {
                if self.output_dim != 1 {
                    return fail(format!(
                        "discriminator output_dim must be 1, got {}",
                        self.output_dim
                    ));
                }
                if self.batchnorm {
                    return fail("discriminator must not use batch norm".into());
                }
            }
            Role::Generator => {
                if self.spectral_norm {
                    return fail("generator must not use spectral normalization".into());
                }
            }
        }
        Ok(())
    }

    /// `[input, hidden..., output]` unit counts.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(self.hidden_widths.iter().map(|h| h * self.width_multiplier));
        w.push(self.output_dim);
        w
    }

    /// Number of trainable scalars (weights, biases, batch-norm scale/shift).
    pub fn parameter_count(&self) -> usize {
        let widths = self.layer_widths();
        let dense: usize = widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        let norm: usize = if self.batchnorm {
            widths[1..widths.len() - 1].iter().map(|w| 2 * w).sum()
        } else {
            0
        };
        dense + norm
    }
}

/// One affine layer `y = x Wᵀ + b` with optional spectral normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `[out × in]`
    pub weight: Tensor,
    pub bias: Tensor,
    pub spectral_norm: bool,
    /// Persistent left singular vector estimate, unit norm; empty when
    /// spectral normalization is off.
    pub u: Vec<f64>,
}

/// Result of power iteration: right vector, updated left vector and `σ̂ = uᵀWv`.
#[derive(Debug, Clone)]
pub struct SingularEstimate {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub sigma: f64,
}

fn normalize_in_place(x: &mut [f64]) -> bool {
    let n = kernels::dot(x, x).sqrt();
    if n < NORM_FLOOR {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}

impl DenseLayer {
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    /// `rounds` of `v ← Wᵀu/‖Wᵀu‖, u ← Wv/‖Wv‖` starting from the stored `u`,
    /// without touching the layer. With `rounds == 0` only `v` is derived from
    /// the stored `u`. A vector whose norm vanishes is not updated, so a zero
    /// matrix keeps a unit `u` and yields `σ̂ = 0`.
    pub fn estimate_singular(&self, rounds: usize) -> SingularEstimate {
        let (r, c) = (self.out_dim(), self.in_dim());
        let w = self.weight.data();
        let right = |u: &[f64]| {
            let mut v = vec![0.0; c];
            kernels::gemm_tn(w, u, &mut v, r, c, 1);
            if !normalize_in_place(&mut v) {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
            v
        };
        let mut u = self.u.clone();
        let mut v = right(&u);
        for round in 0..rounds {
            if round > 0 {
                v = right(&u);
            }
            let mut nu = vec![0.0; r];
            kernels::gemm_nt(w, &v, &mut nu, r, c, 1);
            if normalize_in_place(&mut nu) {
                u = nu;
            }
        }
        let sigma = bilinear(w, &u, &v, r, c);
        SingularEstimate { u, v, sigma }
    }

    /// Runs `power_iters` power-iteration rounds, stores the new `u`, and
    /// returns `W/σ̂` together with `σ̂`.
    pub fn spectral_norm_apply(&mut self, power_iters: usize) -> Result<(Tensor, f64)> {
        if power_iters == 0 {
            return Err(Error::Contract("power_iters must be >= 1".into()));
        }
        if !self.spectral_norm {
            return Err(Error::Contract("layer has spectral normalization disabled".into()));
        }
        let est = self.estimate_singular(power_iters);
        self.u = est.u;
        let sigma = est.sigma.max(NORM_FLOOR);
        let data = self.weight.data().iter().map(|w| w / sigma).collect();
        Ok((Tensor::new(self.weight.shape().to_vec(), data)?, sigma))
    }
}

/// Batch-norm scale/shift and running statistics for one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Tensor::full(&[dim], 1.0),
            beta: Tensor::zeros(&[dim]),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and a power-iteration round per forward pass; state is updated.
    Train,
    /// Running statistics and the stored `u`; nothing is mutated.
    Eval,
}

/// Batch normalization on a `[batch × d]` input. In train mode the running
/// statistics are updated with momentum [`BATCHNORM_MOMENTUM`].
pub fn batchnorm_forward(
    tape: &mut Tape,
    x: Var,
    bn: &mut BatchNorm,
    mode: Mode,
    track: bool,
) -> Result<(Var, [Var; 2])> {
    let gamma = tape.leaf(bn.gamma.clone(), track);
    let beta = tape.leaf(bn.beta.clone(), track);
    let out = match mode {
        Mode::Train => {
            let n = tape.value(x).rows() as f64;
            let (out, stats) = tape.batch_norm_train(x, gamma, beta, BATCHNORM_EPS)?;
            let m = BATCHNORM_MOMENTUM;
            for j in 0..stats.mean.len() {
                let unbiased = stats.var[j] * n / (n - 1.0);
                bn.running_mean[j] = m * bn.running_mean[j] + (1.0 - m) * stats.mean[j];
                bn.running_var[j] = m * bn.running_var[j] + (1.0 - m) * unbiased;
            }
            out
        }
        Mode::Eval => tape.batch_norm_fixed(
            x,
            gamma,
            beta,
            &bn.running_mean,
            &bn.running_var,
            BATCHNORM_EPS,
        )?,
    };
    Ok((out, [gamma, beta]))
}

/// Parameters (θ) and buffers of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub spec: NetworkSpec,
    pub layers: Vec<DenseLayer>,
    /// One per hidden layer when batch norm is enabled, else empty.
    pub norms: Vec<BatchNorm>,
    pub seed: u64,
}

/// Output of a recorded forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub output: Var,
    /// Parameter leaves in [`NetworkParams::param_names`] order.
    pub params: Vec<Var>,
}

/// He-initialized network: weights ~ N(0, 2/fan_in), zero biases, random unit `u`.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams> {
    spec.validate()?;
    let mut rng = seed::rng(seed);
    let widths = spec.layer_widths();
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for pair in widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let w: Vec<f64> = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
        let u = if spec.spectral_norm {
            let mut u: Vec<f64> = (0..fan_out).map(|_| StandardNormal.sample(&mut rng)).collect();
            if !normalize_in_place(&mut u) {
                u = vec![0.0; fan_out];
                u[0] = 1.0;
            }
            u
        } else {
            Vec::new()
        };
        layers.push(DenseLayer {
            weight: Tensor::matrix(fan_out, fan_in, w)?,
            bias: Tensor::zeros(&[fan_out]),
            spectral_norm: spec.spectral_norm,
            u,
        });
    }
    let norms = if spec.batchnorm {
        widths[1..widths.len() - 1].iter().map(|&d| BatchNorm::new(d)).collect()
    } else {
        Vec::new()
    };
    Ok(NetworkParams { spec: spec.clone(), layers, norms, seed })
}

impl NetworkParams {
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.layers.len() {
            names.push(format!("layer{i}.weight"));
            names.push(format!("layer{i}.bias"));
            if i < self.norms.len() {
                names.push(format!("bn{i}.gamma"));
                names.push(format!("bn{i}.beta"));
            }
        }
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            out.push(&layer.weight);
            out.push(&layer.bias);
            if let Some(bn) = self.norms.get(i) {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        let mut norms = self.norms.iter_mut();
        for layer in self.layers.iter_mut() {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
            if let Some(bn) = norms.next() {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|t| t.numel()).sum()
    }

    /// Checksum over parameters and buffers (u vectors, running statistics).
    pub fn checksum(&self) -> u64 {
        seed::checksum(self.state_tensors().into_iter().flat_map(|(_, t)| t.into_data()))
    }

    /// Records a forward pass on `tape`.
    ///
    /// In [`Mode::Train`] each spectrally normalized layer runs one round of
    /// power iteration and batch norm uses batch statistics; both update the
    /// stored state. Parameter leaves require gradients only when `track`.
    pub fn forward(&mut self, tape: &mut Tape, x: Var, mode: Mode, track: bool) -> Result<Forward> {
        let in_dim = self.spec.input_dim;
        let xs = tape.value(x);
        if xs.shape().len() != 2 || xs.cols() != in_dim {
            return Err(TensorError::Dimension {
                op: "forward",
                lhs: xs.shape().to_vec(),
                rhs: vec![in_dim],
            }
            .into());
        }
        let n_layers = self.layers.len();
        let activation = self.spec.activation;
        let mut params = Vec::with_capacity(4 * n_layers);
        let mut h = x;
        for i in 0..n_layers {
            let layer = &mut self.layers[i];
            let w = tape.leaf(layer.weight.clone(), track);
            let b = tape.leaf(layer.bias.clone(), track);
            params.extend([w, b]);
            let w_eff = if layer.spectral_norm {
                let est = match mode {
                    Mode::Train => {
                        let est = layer.estimate_singular(1);
                        layer.u = est.u.clone();
                        est
                    }
                    Mode::Eval => layer.estimate_singular(0),
                };
                tape.spectral_normalize(w, &est.u, &est.v)?.0
            } else {
                w
            };
            h = tape.matmul_bt(h, w_eff)?;
            h = tape.add_row(h, b)?;
            if i + 1 < n_layers {
                if let Some(bn) = self.norms.get_mut(i) {
                    let (out, bn_params) = batchnorm_forward(tape, h, bn, mode, track)?;
                    params.extend(bn_params);
                    h = out;
                }
                h = match activation {
                    Activation::LeakyRelu { slope } => tape.leaky_relu(h, slope),
                    Activation::Tanh => tape.tanh(h),
                };
            } else if self.spec.role == Role::Generator {
                h = tape.tanh(h);
            }
        }
        Ok(Forward { output: h, params })
    }

    /// Evaluation-mode forward pass with no gradient tracking and no state change.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        // Eval mode never mutates, but `forward` is shared with train mode.
        let mut scratch = self.clone();
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let fwd = scratch.forward(&mut tape, xv, Mode::Eval, false)?;
        debug_assert!(scratch == *self);
        Ok(tape.value(fwd.output).clone())
    }

    /// Effective (normalized) weight of every layer as seen by an eval-mode pass.
    pub fn effective_weights(&self) -> Vec<Tensor> {
        self.layers
            .iter()
            .map(|l| {
                if l.spectral_norm {
                    let sigma = l.estimate_singular(0).sigma.max(NORM_FLOOR);
                    let data = l.weight.data().iter().map(|w| w / sigma).collect();
                    Tensor::new(l.weight.shape().to_vec(), data).expect("same shape")
                } else {
                    l.weight.clone()
                }
            })
            .collect()
    }

    /// Every tensor needed to restore the network exactly, in checkpoint order.
    fn state_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.weight"), layer.weight.clone()));
            out.push((format!("layer{i}.bias"), layer.bias.clone()));
            if layer.spectral_norm {
                out.push((format!("layer{i}.u"), Tensor::vector(layer.u.clone())));
            }
            if let Some(bn) = self.norms.get(i) {
                out.push((format!("bn{i}.gamma"), bn.gamma.clone()));
                out.push((format!("bn{i}.beta"), bn.beta.clone()));
                out.push((format!("bn{i}.running_mean"), Tensor::vector(bn.running_mean.clone())));
                out.push((format!("bn{i}.running_var"), Tensor::vector(bn.running_var.clone())));
            }
        }
        out
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"GLCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// JSON header of a checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub spec: NetworkSpec,
    pub tensors: Vec<TensorEntry>,
    pub seed: u64,
    pub step: u64,
}

/// Serializes `params` as `magic | u64 LE header length | JSON header | f64 LE payload`.
pub fn checkpoint_bytes(params: &NetworkParams, step: u64) -> Vec<u8> {
    let state = params.state_tensors();
    let header = CheckpointHeader {
        spec: params.spec.clone(),
        tensors: state
            .iter()
            .map(|(name, t)| TensorEntry { name: name.clone(), shape: t.shape().to_vec() })
            .collect(),
        seed: params.seed,
        step,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * params.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &state {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(NetworkParams, CheckpointHeader)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut params = init_network(&header.spec, header.seed)?;
    let expected = params.state_tensors();
    if expected.len() != header.tensors.len()
        || expected
            .iter()
            .zip(&header.tensors)
            .any(|((n, t), e)| *n != e.name || t.shape() != e.shape.as_slice())
    {
        return Err(bad("tensor layout does not match spec"));
    }
    let mut payload = bytes[16 + hlen..].chunks_exact(8);
    let total: usize = expected.iter().map(|(_, t)| t.numel()).sum();
    if payload.len() != total || !payload.remainder().is_empty() {
        return Err(bad("payload length mismatch"));
    }
    let mut next = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| f64::from_le_bytes(payload.next().unwrap().try_into().unwrap()))
            .collect()
    };
    let mut norms = params.norms.iter_mut();
    for layer in params.layers.iter_mut() {
        let n = layer.weight.numel();
        layer.weight.data_mut().copy_from_slice(&next(n));
        let n = layer.bias.numel();
        layer.bias.data_mut().copy_from_slice(&next(n));
        if layer.spectral_norm {
            layer.u = next(layer.u.len());
        }
        if let Some(bn) = norms.next() {
            let d = bn.running_mean.len();
            bn.gamma.data_mut().copy_from_slice(&next(d));
            bn.beta.data_mut().copy_from_slice(&next(d));
            bn.running_mean = next(d);
            bn.running_var = next(d);
        }
    }
    Ok((params, header))
}

pub fn save_checkpoint(path: &Path, params: &NetworkParams, step: u64) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&checkpoint_bytes(params, step)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(NetworkParams, CheckpointHeader)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
