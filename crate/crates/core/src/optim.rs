//! Adam for GAN training and plain SGD with cosine decay for independent critics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    /// lr 1e-4, β₁ 0.5, β₂ 0.999, ε 1e-8.
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-parameter moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

fn check_finite(names: &[String], grads: &[&[f64]]) -> Result<()> {
    for (i, g) in grads.iter().enumerate() {
        if g.iter().any(|x| !x.is_finite()) {
            let param = names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
            return Err(Error::NonFiniteGradient { param });
        }
    }
    Ok(())
}

fn check_shapes(params: &[&mut Tensor], grads: &[&[f64]]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Contract(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.numel() != g.len() {
            return Err(Error::Contract(format!(
                "gradient #{i} has {} entries, parameter has {}",
                g.len(),
                p.numel()
            )));
        }
    }
    Ok(())
}

impl AdamState {
    /// Zero moments for parameters of the given sizes.
    pub fn new(config: AdamConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        Self {
            config,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(config: AdamConfig, params: &[&Tensor]) -> Self {
        Self::new(config, params.iter().map(|p| p.numel()))
    }

    /// One bias-corrected Adam update, in place. Nothing is modified when any
    /// gradient is non-finite; the error names the offending parameter.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&[f64]], names: &[String]) -> Result<()> {
        check_shapes(params, grads)?;
        if self.m.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        check_finite(names, grads)?;
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (k, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                let g = grads[k][i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// `w ← w − lr·g` for every parameter. Aborts before any update on a non-finite gradient.
pub fn sgd_step(params: &mut [&mut Tensor], grads: &[&[f64]], lr: f64, names: &[String]) -> Result<()> {
    check_shapes(params, grads)?;
    check_finite(names, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (w, gi) in p.data_mut().iter_mut().zip(g.iter()) {
            *w -= lr * gi;
        }
    }
    Ok(())
}

/// Half-cosine decay from `base_lr` to `floor_lr` over `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineSchedule {
    pub base_lr: f64,
    pub total_steps: u64,
    #[serde(default)]
    pub floor_lr: f64,
}

impl CosineSchedule {
    pub fn new(base_lr: f64, total_steps: u64) -> Self {
        Self { base_lr, total_steps, floor_lr: 0.0 }
    }
}

/// Learning rate at `step`; steps past the end are clamped to `total_steps`.
pub fn cosine_lr(sched: &CosineSchedule, step: u64) -> f64 {
    if sched.total_steps == 0 {
        return sched.floor_lr;
    }
    let s = step.min(sched.total_steps) as f64;
    let frac = s / sched.total_steps as f64;
    sched.floor_lr + (sched.base_lr - sched.floor_lr) * (1.0 + (PI * frac).cos()) / 2.0
}
