//! Critic payoff estimates, under/overfitting indicators, and the Fréchet
//! distance between Gaussians fitted to (embedded) sample sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::NetworkParams;
use crate::seed;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminatorRole {
    Original,
    Auxiliary,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSet {
    Train1,
    Train2,
    Test,
    Generator,
}

/// `L_f = mean f(real) − mean f(gen)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub n_real: usize,
    pub n_gen: usize,
    pub standard_error: f64,
    pub discriminator_role: DiscriminatorRole,
    pub eval_set: EvalSet,
}

/// Anything that maps a `[n × d]` sample matrix to `n` critic values.
pub trait Critic {
    fn critic_values(&self, x: &Tensor) -> Result<Vec<f64>>;
}

impl Critic for NetworkParams {
    fn critic_values(&self, x: &Tensor) -> Result<Vec<f64>> {
        if self.spec.output_dim != 1 {
            return Err(Error::Contract(format!(
                "critic must have one output, network has {}",
                self.spec.output_dim
            )));
        }
        Ok(self.predict(x)?.into_data())
    }
}

impl<F: Fn(&[f64]) -> f64> Critic for F {
    fn critic_values(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok((0..x.rows()).map(|i| self(x.row(i))).collect())
    }
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Divergence from precomputed critic values.
pub fn estimate_from_values(
    real: &[f64],
    gen: &[f64],
    role: DiscriminatorRole,
    eval_set: EvalSet,
) -> Result<DivergenceEstimate> {
    if real.is_empty() || gen.is_empty() {
        return Err(Error::Contract(format!(
            "divergence needs nonempty sets, got {} real and {} generated",
            real.len(),
            gen.len()
        )));
    }
    let (mr, vr) = mean_and_var(real);
    let (mg, vg) = mean_and_var(gen);
    let value = mr - mg;
    if !value.is_finite() {
        return Err(Error::Contract("critic produced non-finite values".into()));
    }
    Ok(DivergenceEstimate {
        value,
        n_real: real.len(),
        n_gen: gen.len(),
        standard_error: (vr / real.len() as f64 + vg / gen.len() as f64).sqrt(),
        discriminator_role: role,
        eval_set,
    })
}

pub fn estimate_divergence<C: Critic + ?Sized>(
    f: &C,
    real: &Tensor,
    gen: &Tensor,
    role: DiscriminatorRole,
    eval_set: EvalSet,
) -> Result<DivergenceEstimate> {
    if real.rows() == 0 || gen.rows() == 0 || real.numel() == 0 || gen.numel() == 0 {
        return Err(Error::Contract("divergence needs nonempty sets".into()));
    }
    let fr = f.critic_values(real)?;
    let fg = f.critic_values(gen)?;
    estimate_from_values(&fr, &fg, role, eval_set)
}

/// True iff `l_original < l_auxiliary − margin`. Negative margins count as zero.
pub fn underfitting_indicator(l_original: f64, l_auxiliary: f64, margin: f64) -> bool {
    l_original < l_auxiliary - margin.max(0.0)
}

/// Twice the combined standard error of two independent estimates.
pub fn default_underfit_margin(se_original: f64, se_auxiliary: f64) -> f64 {
    2.0 * se_original.hypot(se_auxiliary)
}

/// Independent-critic divergence against the unseen half minus the seen half.
pub fn generator_gap(l_on_train2: f64, l_on_train1: f64) -> f64 {
    l_on_train2 - l_on_train1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub generator_gap: f64,
    pub generator_gap_se: f64,
    /// Original critic: training-set divergence minus test-set divergence.
    pub discriminator_gap: f64,
    pub underfit_flag: bool,
}

impl GapReport {
    pub fn new(
        original_train: &DivergenceEstimate,
        original_test: &DivergenceEstimate,
        auxiliary_train: &DivergenceEstimate,
        independent_train1: &DivergenceEstimate,
        independent_train2: &DivergenceEstimate,
    ) -> Self {
        let margin = default_underfit_margin(original_train.standard_error, auxiliary_train.standard_error);
        Self {
            generator_gap: generator_gap(independent_train2.value, independent_train1.value),
            generator_gap_se: independent_train1.standard_error.hypot(independent_train2.standard_error),
            discriminator_gap: original_train.value - original_test.value,
            underfit_flag: underfitting_indicator(original_train.value, auxiliary_train.value, margin),
        }
    }
}

pub const COVARIANCE_RIDGE: f64 = 1e-6;
pub const EIGEN_CLAMP_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Sample mean and unbiased covariance plus `COVARIANCE_RIDGE · I`.
pub fn fit_gaussian(samples: &Tensor) -> Result<GaussianFit> {
    let (n, d) = samples.dims2()?;
    if n < 2 {
        return Err(Error::Contract(format!("fit_gaussian needs >= 2 rows, got {n}")));
    }
    let mut mean = DVector::zeros(d);
    for i in 0..n {
        for (j, v) in samples.row(i).iter().enumerate() {
            mean[j] += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..n {
        let r = samples.row(i);
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
        cov[(a, a)] += COVARIANCE_RIDGE;
    }
    Ok(GaussianFit { mean, cov })
}

fn check_symmetric(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Contract(format!("{name} is not square")));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > SYMMETRY_TOL {
        return Err(Error::Contract(format!("{name} is asymmetric by {asym:e}")));
    }
    Ok(())
}

/// Eigen-decomposes a symmetric PSD matrix, clamping eigenvalues in
/// `[-EIGEN_CLAMP_TOL, 0)` to zero.
fn psd_eigen(name: &str, m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = SymmetricEigen::new(m);
    for l in eig.eigenvalues.iter_mut() {
        if *l < 0.0 {
            if *l < -EIGEN_CLAMP_TOL {
                return Err(Error::Contract(format!(
                    "{name} is not positive semidefinite (eigenvalue {l:e})"
                )));
            }
            *l = 0.0;
        }
    }
    Ok(eig)
}

fn psd_sqrt(name: &str, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = psd_eigen(name, m.clone())?;
    let s = eig.eigenvalues.map(f64::sqrt);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&s) * eig.eigenvectors.transpose())
}

/// `‖m1−m2‖² + tr(S1 + S2 − 2(S1 S2)^{1/2})`.
///
/// The trace term is computed as `tr((R S2 R)^{1/2})` with `R = S1^{1/2}`,
/// which has the same eigenvalues as `(S1 S2)^{1/2}` and is symmetric.
pub fn frechet_distance(
    m1: &DVector<f64>,
    s1: &DMatrix<f64>,
    m2: &DVector<f64>,
    s2: &DMatrix<f64>,
) -> Result<f64> {
    let d = m1.len();
    if m2.len() != d || s1.shape() != (d, d) || s2.shape() != (d, d) {
        return Err(Error::Contract(format!(
            "frechet_distance dimension mismatch: means {} and {}, covariances {:?} and {:?}",
            d,
            m2.len(),
            s1.shape(),
            s2.shape()
        )));
    }
    check_symmetric("S1", s1)?;
    check_symmetric("S2", s2)?;
    let root = psd_sqrt("S1", s1)?;
    let inner = &root * s2 * &root;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = psd_eigen("S1^{1/2} S2 S1^{1/2}", inner)?;
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|l| l.sqrt()).sum();
    let diff = m1 - m2;
    let value = diff.dot(&diff) + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
    Ok(value.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Embedding {
    #[default]
    Identity,
    /// `leaky_relu(x P, 0.2)` with `P ~ N(0, 1/d)` drawn from `seed`.
    FixedRandomProjection { out_dim: usize, seed: u64 },
}

pub fn embed(samples: &Tensor, embedding: &Embedding) -> Result<Tensor> {
    let (n, d) = samples.dims2()?;
    match *embedding {
        Embedding::Identity => Ok(samples.clone()),
        Embedding::FixedRandomProjection { out_dim, seed } => {
            if d == 0 || out_dim == 0 {
                return Err(Error::Contract(format!(
                    "projection needs positive dimensions, got {d} → {out_dim}"
                )));
            }
            let mut rng = seed::rng(seed);
            let normal = Normal::new(0.0, (1.0 / d as f64).sqrt()).expect("positive std");
            let p: Vec<f64> = (0..d * out_dim).map(|_| normal.sample(&mut rng)).collect();
            let mut out = vec![0.0; n * out_dim];
            crate::tensor::kernels::gemm_nn(samples.data(), &p, &mut out, n, d, out_dim);
            for v in out.iter_mut() {
                if *v < 0.0 {
                    *v *= 0.2;
                }
            }
            Ok(Tensor::matrix(n, out_dim, out)?)
        }
    }
}

/// Fréchet distance between Gaussians fitted to embedded real and generated sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetMetric {
    pub embedding: Embedding,
    pub value: f64,
    pub n_real: usize,
    pub n_gen: usize,
}

pub fn frechet_metric(real: &Tensor, gen: &Tensor, embedding: &Embedding) -> Result<FrechetMetric> {
    let a = fit_gaussian(&embed(real, embedding)?)?;
    let b = fit_gaussian(&embed(gen, embedding)?)?;
    Ok(FrechetMetric {
        embedding: *embedding,
        value: frechet_distance(&a.mean, &a.cov, &b.mean, &b.cov)?,
        n_real: real.rows(),
        n_gen: gen.rows(),
    })
}
