//! Synthetic target distributions, the three-way split, and minibatch sampling.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Key};
use crate::tensor::Tensor;

/// Checkerboard and spiral samples live in `[-EXTENT, EXTENT]²`, inside the
/// generator's tanh range.
pub const EXTENT: f64 = 0.9;

/// A 2-D target distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DistributionSpec {
    /// `components` isotropic Gaussians evenly spaced on a circle.
    GaussianRing { components: usize, radius: f64, sigma: f64 },
    /// Uniform over the dark squares of a `cells × cells` board.
    Checkerboard { cells: usize },
    /// `arms` interleaved spiral arms with Gaussian jitter.
    Spiral { arms: usize, noise: f64 },
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec::GaussianRing { components: 8, radius: 0.8, sigma: 0.02 }
    }
}

impl DistributionSpec {
    pub fn dim(&self) -> usize {
        2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        match *self {
            DistributionSpec::GaussianRing { components, radius, sigma } => {
                if components < 1 {
                    return bad("gaussian_ring needs components >= 1".into());
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("gaussian_ring sigma must be > 0, got {sigma}"));
                }
                if !(radius >= 0.0 && radius.is_finite()) {
                    return bad(format!("gaussian_ring radius must be >= 0, got {radius}"));
                }
            }
            DistributionSpec::Checkerboard { cells } => {
                if cells < 1 {
                    return bad("checkerboard needs cells >= 1".into());
                }
            }
            DistributionSpec::Spiral { arms, noise } => {
                if arms < 1 {
                    return bad("spiral needs arms >= 1".into());
                }
                if !(noise >= 0.0 && noise.is_finite()) {
                    return bad(format!("spiral noise must be >= 0, got {noise}"));
                }
            }
        }
        Ok(())
    }

    fn point(&self, rng: &mut seed::Rng) -> [f64; 2] {
        match *self {
            DistributionSpec::GaussianRing { components, radius, sigma } => {
                let k = rng.random_range(0..components);
                let angle = 2.0 * PI * k as f64 / components as f64;
                let mut normal = || -> f64 { StandardNormal.sample(rng) };
                [
                    radius * angle.cos() + sigma * normal(),
                    radius * angle.sin() + sigma * normal(),
                ]
            }
            DistributionSpec::Checkerboard { cells } => {
                let dark = cells * cells / 2 + (cells * cells) % 2;
                let pick = rng.random_range(0..dark);
                // Dark squares are those with (row + col) even, enumerated row-major.
                let (mut row, mut col) = (0, 0);
                let mut seen = 0;
                'outer: for r in 0..cells {
                    for c in 0..cells {
                        if (r + c) % 2 == 0 {
                            if seen == pick {
                                (row, col) = (r, c);
                                break 'outer;
                            }
                            seen += 1;
                        }
                    }
                }
                let cell = 2.0 * EXTENT / cells as f64;
                let x = -EXTENT + cell * (col as f64 + rng.random::<f64>());
                let y = -EXTENT + cell * (row as f64 + rng.random::<f64>());
                [x, y]
            }
            DistributionSpec::Spiral { arms, noise } => {
                let arm = rng.random_range(0..arms);
                let t: f64 = rng.random();
                let r = EXTENT * (0.1 + 0.9 * t);
                let angle = 2.0 * PI * arm as f64 / arms as f64 + 3.0 * PI * t;
                let nx: f64 = StandardNormal.sample(rng);
                let ny: f64 = StandardNormal.sample(rng);
                [r * angle.cos() + noise * nx, r * angle.sin() + noise * ny]
            }
        }
    }
}

/// Draws `n` i.i.d. points; the result is a pure function of `(spec, n, seed)`.
pub fn sample_distribution(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Tensor> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Contract("sample count must be >= 1".into()));
    }
    let mut rng = seed::rng(seed);
    let mut data = Vec::with_capacity(n * 2);
    for _ in 0..n {
        data.extend(spec.point(&mut rng));
    }
    Ok(Tensor::matrix(n, 2, data)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub n1: usize,
    pub n2: usize,
    pub n_test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self { n1: 2048, n2: 2048, n_test: 1024 }
    }
}

/// Two equal training halves and a test set, drawn from disjoint RNG streams.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train1: Tensor,
    pub train2: Tensor,
    pub test: Tensor,
    pub sizes: SplitSizes,
    pub source_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSelector {
    Train1,
    Train2,
}

impl DatasetSplit {
    pub fn select(&self, which: SplitSelector) -> &Tensor {
        match which {
            SplitSelector::Train1 => &self.train1,
            SplitSelector::Train2 => &self.train2,
        }
    }
}

pub fn make_splits(spec: &DistributionSpec, sizes: SplitSizes, seed: u64) -> Result<DatasetSplit> {
    if sizes.n1 != sizes.n2 {
        return Err(Error::Contract(format!(
            "training halves must be equal, got n1={} n2={}",
            sizes.n1, sizes.n2
        )));
    }
    let draw = |label: &str, n| sample_distribution(spec, n, seed::derive(seed, &[Key::Label(label)]));
    Ok(DatasetSplit {
        train1: draw("train1", sizes.n1)?,
        train2: draw("train2", sizes.n2)?,
        test: draw("test", sizes.n_test)?,
        sizes,
        source_seed: seed,
    })
}

/// Minibatches drawn uniformly with replacement; batch `k` depends only on
/// `(seed, k)`.
#[derive(Debug, Clone)]
pub struct BatchIter<'a> {
    data: &'a Tensor,
    batch_size: usize,
    seed: u64,
    step: u64,
}

pub fn batch_iter(data: &Tensor, batch_size: usize, seed: u64) -> Result<BatchIter<'_>> {
    let rows = data.rows();
    if data.numel() == 0 || rows == 0 {
        return Err(Error::Contract("cannot batch an empty data set".into()));
    }
    if batch_size == 0 || batch_size > rows {
        return Err(Error::Contract(format!(
            "batch size {batch_size} must be in 1..={rows}"
        )));
    }
    Ok(BatchIter { data, batch_size, seed, step: 0 })
}

impl BatchIter<'_> {
    pub fn indices_at(&self, step: u64) -> Vec<usize> {
        let mut rng = seed::stream(self.seed, &[Key::Index(step)]);
        let rows = self.data.rows();
        (0..self.batch_size).map(|_| rng.random_range(0..rows)).collect()
    }

    pub fn batch_at(&self, step: u64) -> Tensor {
        self.data.select_rows(&self.indices_at(step))
    }
}

impl Iterator for BatchIter<'_> {
    type Item = Tensor;

    fn next(&mut self) -> Option<Tensor> {
        let b = self.batch_at(self.step);
        self.step += 1;
        Some(b)
    }
}

/// Standard-normal latent codes `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatentSampler {
    pub latent_dim: usize,
    pub seed: u64,
}

impl LatentSampler {
    pub fn new(latent_dim: usize, seed: u64) -> Self {
        Self { latent_dim, seed }
    }

    /// `n × latent_dim` block for draw number `step`.
    pub fn sample(&self, n: usize, step: u64) -> Tensor {
        let mut rng = seed::stream(self.seed, &[Key::Index(step)]);
        let data = (0..n * self.latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        Tensor::matrix(n, self.latent_dim, data).expect("sized")
    }
}

/// Anything that can produce a fixed set of samples on demand.
pub trait SampleSource {
    fn draw(&self, n: usize, seed: u64) -> Result<Tensor>;

    /// Fingerprint of the source's state; must not change while it is used.
    fn fingerprint(&self) -> u64;
}

impl SampleSource for DistributionSpec {
    fn draw(&self, n: usize, seed: u64) -> Result<Tensor> {
        sample_distribution(self, n, seed)
    }

    fn fingerprint(&self) -> u64 {
        seed::derive(0, &[Key::Label(&format!("{self:?}"))])
    }
}

/// Writes a sample matrix as CSV with header `x0,...,x{d-1}`.
pub fn write_samples_csv(path: &Path, samples: &Tensor) -> Result<()> {
    let (n, d) = samples.dims2()?;
    let mut out = String::with_capacity(n * d * 24);
    let header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..n {
        for (j, v) in samples.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_samples_csv(path: &Path) -> Result<Tensor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let d = lines
        .next()
        .ok_or_else(|| Error::Contract(format!("{} is empty", path.display())))?
        .split(',')
        .count();
    let mut data = Vec::new();
    let mut n = 0;
    for (lineno, line) in lines.enumerate() {
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.parse().map_err(|_| {
                Error::Contract(format!("{}:{}: bad number {field:?}", path.display(), lineno + 2))
            })?;
            data.push(v);
        }
        if data.len() - before != d {
            return Err(Error::Contract(format!(
                "{}:{}: expected {d} fields",
                path.display(),
                lineno + 2
            )));
        }
        n += 1;
    }
    Ok(Tensor::matrix(n, d, data)?)
}
