//! Fast self-checks of the numerical invariants, run by `genlab verify`.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::autodiff::Tape;
use crate::data::{sample_distribution, DistributionSpec, SplitSizes};
use crate::error::Result;
use crate::metrics::{estimate_divergence, frechet_distance, DiscriminatorRole, EvalSet};
use crate::nn::{init_network, Activation, Mode, NetworkParams, NetworkSpec};
use crate::optim::{AdamConfig, AdamState};
use crate::seed;
use crate::tensor::{kernels::softplus, Tensor};
use crate::train::{gan_losses, train_gan, GanConfig, LossReduction};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn random_tensor(rng: &mut seed::Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| StandardNormal.sample(rng)).collect()).expect("sized")
}

/// `Σ tanh(net(x) · r)` and, when `grads`, its gradient for every parameter.
fn probe_loss(net: &NetworkParams, x: &Tensor, r: &Tensor, mode: Mode, grads: bool) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut net = net.clone();
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let rv = tape.constant(r.clone());
    let fwd = net.forward(&mut tape, xv, mode, grads)?;
    let proj = tape.matmul(fwd.output, rv)?;
    let squashed = tape.tanh(proj);
    let loss = tape.sum(squashed)?;
    let value = tape.value(loss).item()?;
    if !grads {
        return Ok((value, Vec::new()));
    }
    tape.backward(loss)?;
    let g = fwd.params.iter().map(|&p| tape.grad(p).map(<[f64]>::to_vec).unwrap_or_default()).collect();
    Ok((value, g))
}

/// Largest relative error between tape gradients and central differences.
pub fn max_gradient_error(net: &NetworkParams, x: &Tensor, r: &Tensor, mode: Mode, h: f64) -> Result<f64> {
    let (_, analytic) = probe_loss(net, x, r, mode, true)?;
    let mut worst: f64 = 0.0;
    for (k, grad) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let mut plus = net.clone();
            plus.params_mut()[k].data_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[k].data_mut()[i] -= h;
            let fd = (probe_loss(&plus, x, r, mode, false)?.0 - probe_loss(&minus, x, r, mode, false)?.0) / (2.0 * h);
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn gradients() -> Result<(bool, String)> {
    let mut rng = seed::rng(101);
    let mut worst: f64 = 0.0;
    for k in 0..6 {
        let (spec, mode) = if k % 2 == 0 {
            let mut s = NetworkSpec::generator(3, 2, 2);
            if k == 2 {
                s.activation = Activation::Tanh;
            }
            (s, Mode::Train)
        } else {
            (NetworkSpec::discriminator(2, 2), Mode::Eval)
        };
        let net = init_network(&spec, rng.random())?;
        let x = random_tensor(&mut rng, &[5, spec.input_dim]);
        let r = random_tensor(&mut rng, &[spec.output_dim, 1]);
        worst = worst.max(max_gradient_error(&net, &x, &r, mode, 1e-5)?);
    }
    Ok((worst < 1e-4, format!("max relative error {worst:.2e} (limit 1e-4)")))
}

fn spectral_norm() -> Result<(bool, String)> {
    let mut d = init_network(&NetworkSpec::discriminator(2, 8), 3)?;
    let x = Tensor::full(&[4, 2], 0.5);
    for _ in 0..100 {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        d.forward(&mut tape, xv, Mode::Train, false)?;
    }
    let mut worst: f64 = 0.0;
    for w in d.effective_weights() {
        let m = DMatrix::from_row_slice(w.rows(), w.cols(), w.data());
        let top = m.singular_values().max();
        worst = worst.max((top - 1.0).abs());
    }
    Ok((worst < 1e-3, format!("max |sigma_max - 1| = {worst:.2e} (limit 1e-3)")))
}

fn losses() -> Result<(bool, String)> {
    let (ld, _) = gan_losses(&[2.0, 2.0], &[1.0, 1.0], LossReduction::Sum);
    let (_, lg) = gan_losses(&[0.0], &[3.0, 3.0], LossReduction::Sum);
    let e1 = (ld - 0.126_928_011_042_972_5).abs();
    let e2 = (lg - 0.002_475_685_137_730_449_5).abs();
    let exact = softplus(0.0) == LN_2;
    Ok((e1 < 1e-12 && e2 < 1e-12 && exact, format!("errors {e1:.1e}, {e2:.1e}; softplus(0) == ln 2: {exact}")))
}

fn frechet() -> Result<(bool, String)> {
    let one = |m: f64, v: f64| (DVector::from_element(1, m), DMatrix::from_element(1, 1, v));
    let (a, va) = one(0.0, 1.0);
    let (b, _) = one(3.0, 1.0);
    let (_, v4) = one(0.0, 4.0);
    let got = [
        frechet_distance(&a, &va, &a, &va)?,
        frechet_distance(&a, &va, &b, &va)?,
        frechet_distance(&a, &va, &a, &v4)?,
    ];
    let err = got.iter().zip([0.0, 9.0, 1.0]).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    Ok((err < 1e-8, format!("closed-form cases {got:?}, max error {err:.1e}")))
}

fn random_critic() -> Result<(bool, String)> {
    let spec = DistributionSpec::default();
    let mut worst: f64 = 0.0;
    for k in 0..5u64 {
        let d = init_network(&NetworkSpec::discriminator(2, 16), 40 + k)?;
        let a = sample_distribution(&spec, 1000, 2 * k)?;
        let b = sample_distribution(&spec, 1000, 2 * k + 1)?;
        let e = estimate_divergence(&d, &a, &b, DiscriminatorRole::Independent, EvalSet::Test)?;
        worst = worst.max(e.value.abs() / e.standard_error);
    }
    Ok((worst < 3.0, format!("max |divergence| / SE = {worst:.2} (limit 3)")))
}

fn tiny_gan(aux: bool) -> GanConfig {
    GanConfig {
        split_sizes: SplitSizes { n1: 128, n2: 128, n_test: 64 },
        latent_dim: 4,
        generator_width: 8,
        discriminator_width: 8,
        total_steps: 40,
        batch_size: 16,
        eval_every: 20,
        eval_samples: 64,
        auxiliary_enabled: aux,
        ..GanConfig::default()
    }
}

fn isolation() -> Result<(bool, String)> {
    let on = train_gan(&tiny_gan(true))?;
    let off = train_gan(&tiny_gan(false))?;
    let same = on.generator.checksum() == off.generator.checksum();
    Ok((same, format!("generator checksums {:016x} / {:016x}", on.generator.checksum(), off.generator.checksum())))
}

fn determinism() -> Result<(bool, String)> {
    let a = train_gan(&tiny_gan(true))?;
    let b = train_gan(&tiny_gan(true))?;
    let same = a.generator.checksum() == b.generator.checksum() && a.history == b.history;
    Ok((same, format!("two runs identical: {same}")))
}

fn adam_step() -> Result<(bool, String)> {
    let cfg = AdamConfig::default();
    let mut worst: f64 = 0.0;
    for g in [1e-6, 0.3, -7.0, 1e4] {
        let mut w = Tensor::vector(vec![0.0]);
        AdamState::new(cfg, [1]).step(&mut [&mut w], &[&[g]], &["w".to_string()])?;
        worst = worst.max(w.data()[0].abs() / cfg.lr);
    }
    Ok((worst <= 1.0 + 1e-9, format!("max first-step |update| / lr = {worst:.6}")))
}

pub fn run_all() -> Vec<Check> {
    vec![
        check("gradients match central differences", gradients()),
        check("spectral norm reaches 1 after 100 power iterations", spectral_norm()),
        check("loss values match closed forms", losses()),
        check("Frechet distance closed forms", frechet()),
        check("random critic has zero divergence", random_critic()),
        check("auxiliary critic leaves the generator unchanged", isolation()),
        check("training is deterministic", determinism()),
        check("Adam first step is bounded by lr", adam_step()),
    ]
}
