//! Sweep configuration: strict JSON with every field defaulted.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use genlab_core::data::{DistributionSpec, SplitSizes};
use genlab_core::metrics::Embedding;
use genlab_core::optim::AdamConfig;
use genlab_core::train::{GanConfig, LossReduction};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{GenlabError, Result};

/// GAN settings shared by every cell; the critic width comes from the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanSettings {
    pub latent_dim: usize,
    pub generator_width: usize,
    pub total_steps: u64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub eval_every: u64,
    pub eval_samples: usize,
    pub reduction: LossReduction,
}

impl Default for GanSettings {
    fn default() -> Self {
        let g = GanConfig::default();
        Self {
            latent_dim: g.latent_dim,
            generator_width: g.generator_width,
            total_steps: g.total_steps,
            batch_size: g.batch_size,
            adam: g.adam,
            eval_every: g.eval_every,
            eval_samples: g.eval_samples,
            reduction: g.reduction,
        }
    }
}

/// Independent-critic settings shared by the matching and baseline critics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndependentSettings {
    pub steps: u64,
    pub batch_size: usize,
    pub base_lr: f64,
    pub floor_lr: f64,
    pub curve_every: u64,
}

impl Default for IndependentSettings {
    fn default() -> Self {
        Self { steps: 5_000, batch_size: 64, base_lr: 0.01, floor_lr: 0.0, curve_every: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub dataset: DistributionSpec,
    #[serde(alias = "widths")]
    pub width_multipliers: Vec<usize>,
    pub seeds: Vec<u64>,
    pub baseline_width: usize,
    pub master_seed: u64,
    pub split_sizes: SplitSizes,
    pub gan: GanSettings,
    pub independent: IndependentSettings,
    pub frechet_embedding: Embedding,
    pub output_dir: PathBuf,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            dataset: DistributionSpec::default(),
            width_multipliers: vec![4, 8, 16, 32, 64],
            seeds: vec![0, 1, 2],
            baseline_width: 16,
            master_seed: 0,
            split_sizes: SplitSizes::default(),
            gan: GanSettings::default(),
            independent: IndependentSettings::default(),
            frechet_embedding: Embedding::Identity,
            output_dir: PathBuf::from("genlab_out"),
        }
    }
}

fn err(key: impl Into<String>, message: impl Into<String>) -> GenlabError {
    GenlabError::config(key, message)
}

impl SweepSpec {
    /// GAN config of the cell with critic width `width` and seed `cell_seed`.
    pub fn gan_config(&self, width: usize, cell_seed: u64) -> GanConfig {
        let g = &self.gan;
        GanConfig {
            distribution: self.dataset.clone(),
            split_sizes: self.split_sizes,
            latent_dim: g.latent_dim,
            generator_width: g.generator_width,
            discriminator_width: width,
            total_steps: g.total_steps,
            batch_size: g.batch_size,
            adam: g.adam,
            eval_every: g.eval_every,
            eval_samples: g.eval_samples,
            master_seed: cell_seed,
            auxiliary_enabled: true,
            reduction: g.reduction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate().map_err(|e| err("dataset", e.to_string()))?;
        if self.width_multipliers.is_empty() {
            return Err(err("width_multipliers", "expected a nonempty list of powers of two"));
        }
        for (i, &w) in self.width_multipliers.iter().enumerate() {
            if w == 0 || !w.is_power_of_two() {
                return Err(err(format!("width_multipliers[{i}]"), format!("expected a power of two >= 1, got {w}")));
            }
        }
        if self.width_multipliers.iter().collect::<BTreeSet<_>>().len() != self.width_multipliers.len() {
            return Err(err("width_multipliers", "expected distinct widths"));
        }
        if self.seeds.is_empty() {
            return Err(err("seeds", "expected a nonempty list of seed indices"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(err("seeds", "expected distinct seed indices"));
        }
        let b = self.baseline_width;
        if b == 0 || !b.is_power_of_two() {
            return Err(err("baseline_width", format!("expected a power of two >= 1, got {b}")));
        }
        let s = self.split_sizes;
        if s.n1 != s.n2 {
            return Err(err("split_sizes", format!("expected n1 == n2, got {} and {}", s.n1, s.n2)));
        }
        if s.n1 < 2 || s.n_test < 2 {
            return Err(err("split_sizes", "expected n1, n2 and n_test >= 2"));
        }
        let g = &self.gan;
        if g.total_steps == 0 {
            return Err(err("gan.total_steps", "expected an integer >= 1"));
        }
        if g.batch_size < 2 || g.batch_size > s.n1 {
            return Err(err("gan.batch_size", format!("expected 2..={}, got {}", s.n1, g.batch_size)));
        }
        if g.eval_every == 0 {
            return Err(err("gan.eval_every", "expected an integer >= 1"));
        }
        if g.eval_samples < 2 {
            return Err(err("gan.eval_samples", "expected an integer >= 2"));
        }
        if g.latent_dim == 0 {
            return Err(err("gan.latent_dim", "expected an integer >= 1"));
        }
        if g.generator_width == 0 || !g.generator_width.is_power_of_two() {
            return Err(err("gan.generator_width", format!("expected a power of two >= 1, got {}", g.generator_width)));
        }
        let a = g.adam;
        if !(a.lr.is_finite() && a.lr > 0.0) {
            return Err(err("gan.adam.lr", format!("expected a positive number, got {}", a.lr)));
        }
        for (key, beta) in [("gan.adam.beta1", a.beta1), ("gan.adam.beta2", a.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(err(key, format!("expected a number in [0, 1), got {beta}")));
            }
        }
        if !(a.eps.is_finite() && a.eps > 0.0) {
            return Err(err("gan.adam.eps", format!("expected a positive number, got {}", a.eps)));
        }
        let ind = &self.independent;
        if ind.batch_size == 0 || ind.batch_size > s.n1 {
            return Err(err("independent.batch_size", format!("expected 1..={}, got {}", s.n1, ind.batch_size)));
        }
        if !(ind.base_lr.is_finite() && ind.base_lr >= 0.0) {
            return Err(err("independent.base_lr", format!("expected a number >= 0, got {}", ind.base_lr)));
        }
        if !(ind.floor_lr.is_finite() && (0.0..=ind.base_lr).contains(&ind.floor_lr)) {
            return Err(err("independent.floor_lr", format!("expected 0 <= floor_lr <= base_lr, got {}", ind.floor_lr)));
        }
        if let Embedding::FixedRandomProjection { out_dim: 0, .. } = self.frechet_embedding {
            return Err(err("frechet_embedding.out_dim", "expected an integer >= 1"));
        }
        // Cross-field checks not covered above.
        for &w in &self.width_multipliers {
            self.gan_config(w, 0).validate().map_err(|e| err("gan", e.to_string()))?;
        }
        Ok(())
    }
}

/// Finds the first key of `obj` that `T` rejects on its own. Works because
/// every field of `T` has a default.
fn locate<T: DeserializeOwned>(obj: &Map<String, Value>, prefix: &str) -> Option<GenlabError> {
    for (k, v) in obj {
        let single = Map::from_iter([(k.clone(), v.clone())]);
        if let Err(e) = serde_json::from_value::<T>(Value::Object(single)) {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            let nested = match (k.as_str(), v) {
                ("gan", Value::Object(m)) if prefix.is_empty() => locate::<GanSettings>(m, "gan"),
                ("independent", Value::Object(m)) if prefix.is_empty() => {
                    locate::<IndependentSettings>(m, "independent")
                }
                ("adam", Value::Object(m)) if prefix == "gan" => locate::<AdamConfig>(m, "gan.adam"),
                _ => None,
            };
            return Some(nested.unwrap_or_else(|| GenlabError::config(key, e.to_string())));
        }
    }
    None
}

pub fn parse_config_str(text: &str) -> Result<SweepSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| GenlabError::config("<root>", format!("malformed JSON: {e}")))?;
    let Value::Object(obj) = &value else {
        return Err(GenlabError::config("<root>", "expected a JSON object"));
    };
    let spec: SweepSpec = match serde_json::from_value(value.clone()) {
        Ok(s) => s,
        Err(e) => return Err(locate::<SweepSpec>(obj, "").unwrap_or_else(|| GenlabError::config("<root>", e.to_string()))),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GenlabError::config("--config", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}
