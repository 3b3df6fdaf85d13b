//! WGAN training with an observing auxiliary critic, and post-hoc training of
//! independent critics against a frozen generator.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::data::{
    batch_iter, make_splits, DatasetSplit, DistributionSpec, LatentSampler, SampleSource, SplitSelector,
    SplitSizes,
};
use crate::error::{Error, Result};
use crate::metrics::{estimate_divergence, DiscriminatorRole, DivergenceEstimate, EvalSet};
use crate::nn::{init_network, save_checkpoint, Forward, Mode, NetworkParams, NetworkSpec};
use crate::optim::{cosine_lr, sgd_step, AdamConfig, AdamState, CosineSchedule};
use crate::seed::{self, Key};
use crate::tensor::kernels::softplus;
use crate::tensor::Tensor;

/// How critic outputs are reduced over a batch inside the softplus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReduction {
    #[default]
    Mean,
    Sum,
}

impl LossReduction {
    fn reduce(self, xs: &[f64]) -> f64 {
        let s: f64 = xs.iter().sum();
        match self {
            LossReduction::Mean => s / xs.len() as f64,
            LossReduction::Sum => s,
        }
    }

    fn record(self, tape: &mut Tape, x: Var) -> Result<Var> {
        Ok(match self {
            LossReduction::Mean => tape.mean(x)?,
            LossReduction::Sum => tape.sum(x)?,
        })
    }
}

/// `(L_D, L_G)` from critic outputs on a real and a generated batch:
/// `L_D = softplus(r(D(fake)) − r(D(real)))`, `L_G = softplus(−r(D(fake)))`.
pub fn gan_losses(d_real: &[f64], d_fake: &[f64], reduction: LossReduction) -> (f64, f64) {
    let rf = reduction.reduce(d_fake);
    let rr = reduction.reduce(d_real);
    (softplus(rf - rr), softplus(-rf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub distribution: DistributionSpec,
    pub split_sizes: SplitSizes,
    pub latent_dim: usize,
    pub generator_width: usize,
    pub discriminator_width: usize,
    pub total_steps: u64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub eval_every: u64,
    /// Size of the fixed generated set used for divergence evaluation.
    pub eval_samples: usize,
    pub master_seed: u64,
    pub auxiliary_enabled: bool,
    pub reduction: LossReduction,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            distribution: DistributionSpec::default(),
            split_sizes: SplitSizes::default(),
            latent_dim: 16,
            generator_width: 64,
            discriminator_width: 16,
            total_steps: 20_000,
            batch_size: 64,
            adam: AdamConfig::default(),
            eval_every: 500,
            eval_samples: 1024,
            master_seed: 0,
            auxiliary_enabled: true,
            reduction: LossReduction::Mean,
        }
    }
}

impl GanConfig {
    pub fn generator_spec(&self) -> NetworkSpec {
        NetworkSpec::generator(self.latent_dim, self.distribution.dim(), self.generator_width)
    }

    pub fn discriminator_spec(&self) -> NetworkSpec {
        NetworkSpec::discriminator(self.distribution.dim(), self.discriminator_width)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        self.distribution.validate()?;
        if self.total_steps == 0 {
            return fail("total_steps must be >= 1".into());
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if self.batch_size > self.split_sizes.n1 {
            return fail(format!(
                "batch_size {} exceeds the training split size {}",
                self.batch_size, self.split_sizes.n1
            ));
        }
        if self.eval_every == 0 {
            return fail("eval_every must be >= 1".into());
        }
        if self.eval_samples < 2 {
            return fail(format!("eval_samples must be >= 2, got {}", self.eval_samples));
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be >= 1".into());
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.adam;
        if !(lr.is_finite() && lr > 0.0) {
            return fail(format!("adam.lr must be positive, got {lr}"));
        }
        if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2)) {
            return fail(format!("adam betas must lie in [0, 1), got {beta1} and {beta2}"));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return fail(format!("adam.eps must be positive, got {eps}"));
        }
        self.generator_spec().validate()?;
        self.discriminator_spec().validate()
    }

    /// Seed of the data split when the config is trained on its own data.
    pub fn data_seed(&self) -> u64 {
        seed::derive(self.master_seed, &[Key::Label("data")])
    }

    /// Fixed latents whose generator outputs are scored at every evaluation.
    pub fn eval_latents(&self) -> Tensor {
        LatentSampler::new(self.latent_dim, self.stream_seed("eval_latent")).sample(self.eval_samples, 0)
    }

    fn stream_seed(&self, label: &str) -> u64 {
        seed::derive(self.master_seed, &[Key::Label(label)])
    }
}

/// Critic divergences recorded at one evaluation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub step: u64,
    pub entries: Vec<DivergenceEstimate>,
}

impl DivergenceReport {
    pub fn get(&self, role: DiscriminatorRole, set: EvalSet) -> Option<&DivergenceEstimate> {
        self.entries
            .iter()
            .find(|e| e.discriminator_role == role && e.eval_set == set)
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.value.is_finite() && e.standard_error.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedBundle {
    pub generator: NetworkParams,
    pub original: NetworkParams,
    pub auxiliary: Option<NetworkParams>,
    pub history: Vec<DivergenceReport>,
    /// Divergences after the last step.
    pub final_report: DivergenceReport,
    pub config: GanConfig,
    pub d_updates: u64,
    pub g_updates: u64,
    pub wall_time_secs: f64,
}

/// Read-only view of the training state after a completed step.
pub struct StepView<'a> {
    pub step: u64,
    pub generator: &'a NetworkParams,
    pub original: &'a NetworkParams,
    pub auxiliary: Option<&'a NetworkParams>,
    pub loss_d: f64,
    pub loss_d_aux: Option<f64>,
    pub loss_g: f64,
}

pub type StepObserver<'a> = dyn FnMut(&StepView<'_>) -> Result<()> + 'a;

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Receives `run_log.ndjson` and the last-good checkpoints.
    pub run_dir: Option<&'a Path>,
    pub on_step: Option<&'a mut StepObserver<'a>>,
}

/// Runs `gen` without recording gradients. Train mode updates batch-norm statistics.
pub fn generate(gen: &mut NetworkParams, z: &Tensor, mode: Mode) -> Result<Tensor> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let out = gen.forward(&mut tape, zv, mode, false)?.output;
    Ok(tape.value(out).clone())
}

/// Records `L_D` for one real and one generated batch in a single train-mode pass.
fn critic_loss(
    tape: &mut Tape,
    disc: &mut NetworkParams,
    real: &Tensor,
    fake: &Tensor,
    reduction: LossReduction,
) -> Result<(Var, Forward)> {
    let n = real.rows();
    if n == 0 || fake.rows() != n {
        return Err(Error::Contract(format!(
            "real and generated batches must be nonempty and equal, got {} and {}",
            n,
            fake.rows()
        )));
    }
    let x = tape.constant(real.concat_rows(fake)?);
    let fwd = disc.forward(tape, x, Mode::Train, true)?;
    let d_real = tape.slice_rows(fwd.output, 0, n)?;
    let d_fake = tape.slice_rows(fwd.output, n, 2 * n)?;
    let rr = reduction.record(tape, d_real)?;
    let rf = reduction.record(tape, d_fake)?;
    let gap = tape.sub(rf, rr)?;
    Ok((tape.softplus(gap), fwd))
}

fn collect_grads(tape: &Tape, params: &[Var]) -> Vec<Vec<f64>> {
    params
        .iter()
        .map(|&p| match tape.grad(p) {
            Some(g) => g.to_vec(),
            None => vec![0.0; tape.value(p).numel()],
        })
        .collect()
}

fn finite_loss(tape: &Tape, loss: Var, step: u64, what: &str) -> Result<f64> {
    let value = tape.value(loss).item()?;
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss { step, detail: format!("{what} loss is {value}") });
    }
    Ok(value)
}

fn adam_apply(net: &mut NetworkParams, adam: &mut AdamState, grads: &[Vec<f64>]) -> Result<()> {
    let names = net.param_names();
    let refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
    adam.step(&mut net.params_mut(), &refs, &names)
}

/// One Adam step on `disc` against `L_D`. The generated batch is a plain tensor,
/// so no generator state can be touched. Returns the loss before the update.
pub fn discriminator_update_step(
    disc: &mut NetworkParams,
    adam: &mut AdamState,
    real: &Tensor,
    fake: &Tensor,
    reduction: LossReduction,
    step: u64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let (loss, fwd) = critic_loss(&mut tape, disc, real, fake, reduction)?;
    let value = finite_loss(&tape, loss, step, "discriminator")?;
    tape.backward(loss)?;
    adam_apply(disc, adam, &collect_grads(&tape, &fwd.params))?;
    Ok(value)
}

/// One Adam step on `gen` against `L_G`, differentiating through an eval-mode
/// pass of `disc`. The critic is borrowed immutably.
pub fn generator_update_step(
    gen: &mut NetworkParams,
    disc: &NetworkParams,
    adam: &mut AdamState,
    latent: &Tensor,
    reduction: LossReduction,
    step: u64,
) -> Result<f64> {
    let mut critic = disc.clone();
    let mut tape = Tape::new();
    let z = tape.constant(latent.clone());
    let g = gen.forward(&mut tape, z, Mode::Train, true)?;
    let d = critic.forward(&mut tape, g.output, Mode::Eval, false)?;
    let r = reduction.record(&mut tape, d.output)?;
    let neg = tape.negate(r);
    let loss = tape.softplus(neg);
    let value = finite_loss(&tape, loss, step, "generator")?;
    tape.backward(loss)?;
    adam_apply(gen, adam, &collect_grads(&tape, &g.params))?;
    Ok(value)
}

struct GanState {
    generator: NetworkParams,
    original: NetworkParams,
    auxiliary: Option<NetworkParams>,
    adam_g: AdamState,
    adam_o: AdamState,
    adam_a: Option<AdamState>,
}

fn adam_for(config: AdamConfig, net: &NetworkParams) -> AdamState {
    AdamState::for_params(config, &net.params())
}

fn evaluate(
    step: u64,
    split: &DatasetSplit,
    fake: &Tensor,
    original: &NetworkParams,
    auxiliary: Option<&NetworkParams>,
) -> Result<DivergenceReport> {
    let mut entries = Vec::with_capacity(4);
    let critics = [(DiscriminatorRole::Original, Some(original)), (DiscriminatorRole::Auxiliary, auxiliary)];
    for (role, net) in critics {
        let Some(net) = net else { continue };
        for (set, real) in [(EvalSet::Train1, &split.train1), (EvalSet::Test, &split.test)] {
            entries.push(estimate_divergence(net, real, fake, role, set)?);
        }
    }
    let report = DivergenceReport { step, entries };
    if !report.all_finite() {
        return Err(Error::NonFiniteLoss { step, detail: "divergence estimate is not finite".into() });
    }
    Ok(report)
}

fn save_atomic(dir: &Path, name: &str, net: &NetworkParams, step: u64) -> Result<()> {
    let tmp = dir.join(format!("{name}.ckpt.tmp"));
    let dst = dir.join(format!("{name}.ckpt"));
    save_checkpoint(&tmp, net, step)?;
    fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))
}

struct RunLog {
    dir: std::path::PathBuf,
    out: BufWriter<File>,
}

impl RunLog {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("run_log.ndjson");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self { dir: dir.to_path_buf(), out: BufWriter::new(file) })
    }

    fn record(&mut self, value: serde_json::Value) -> Result<()> {
        let path = self.dir.join("run_log.ndjson");
        writeln!(self.out, "{value}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(path, e))
    }

    fn checkpoint(&self, state: &GanState, step: u64) -> Result<()> {
        save_atomic(&self.dir, "generator", &state.generator, step)?;
        save_atomic(&self.dir, "original", &state.original, step)?;
        if let Some(aux) = &state.auxiliary {
            save_atomic(&self.dir, "auxiliary", aux, step)?;
        }
        Ok(())
    }
}

/// Trains on a freshly drawn split seeded from the config.
pub fn train_gan(config: &GanConfig) -> Result<TrainedBundle> {
    config.validate()?;
    let split = make_splits(&config.distribution, config.split_sizes, config.data_seed())?;
    train_gan_on(config, &split, TrainOptions::default())
}

/// Trains the generator, the original critic and (optionally) the auxiliary
/// critic on `split.train1`.
///
/// Each step draws one real batch and one generated batch, updates the original
/// critic, then the auxiliary critic on the same two batches, then the generator
/// against the original critic with fresh latents. Every `eval_every` steps the
/// critics are scored on train1 and test against a fixed generated set.
pub fn train_gan_on(config: &GanConfig, split: &DatasetSplit, mut options: TrainOptions<'_>) -> Result<TrainedBundle> {
    config.validate()?;
    let dim = config.distribution.dim();
    if split.train1.cols() != dim || split.test.cols() != dim {
        return Err(Error::Contract(format!("split dimension does not match distribution dimension {dim}")));
    }
    let start = Instant::now();
    let dspec = config.discriminator_spec();
    let generator = init_network(&config.generator_spec(), config.stream_seed("generator"))?;
    let original = init_network(&dspec, config.stream_seed("original"))?;
    let auxiliary = if config.auxiliary_enabled {
        Some(init_network(&dspec, config.stream_seed("auxiliary"))?)
    } else {
        None
    };
    let mut st = GanState {
        adam_g: adam_for(config.adam, &generator),
        adam_o: adam_for(config.adam, &original),
        adam_a: auxiliary.as_ref().map(|a| adam_for(config.adam, a)),
        generator,
        original,
        auxiliary,
    };
    let bs = config.batch_size;
    let batches = batch_iter(&split.train1, bs, config.stream_seed("batches"))?;
    let z_d = LatentSampler::new(config.latent_dim, config.stream_seed("latent_d"));
    let z_g = LatentSampler::new(config.latent_dim, config.stream_seed("latent_g"));
    let eval_z = config.eval_latents();
    let mut log = options.run_dir.map(RunLog::open).transpose()?;

    let mut history = Vec::new();
    let (mut d_updates, mut g_updates) = (0u64, 0u64);
    for step in 1..=config.total_steps {
        let k = step - 1;
        let outcome = (|| -> Result<(f64, Option<f64>, f64)> {
            let real = batches.batch_at(k);
            let fake = generate(&mut st.generator, &z_d.sample(bs, k), Mode::Train)?;
            let loss_d = discriminator_update_step(&mut st.original, &mut st.adam_o, &real, &fake, config.reduction, step)?;
            d_updates += 1;
            let loss_d_aux = match (st.auxiliary.as_mut(), st.adam_a.as_mut()) {
                (Some(aux), Some(adam)) => {
                    Some(discriminator_update_step(aux, adam, &real, &fake, config.reduction, step)?)
                }
                _ => None,
            };
            let loss_g = generator_update_step(
                &mut st.generator,
                &st.original,
                &mut st.adam_g,
                &z_g.sample(bs, k),
                config.reduction,
                step,
            )?;
            g_updates += 1;
            Ok((loss_d, loss_d_aux, loss_g))
        })();
        let (loss_d, loss_d_aux, loss_g) = match outcome {
            Ok(v) => v,
            Err(e) => {
                if let Some(log) = log.as_mut() {
                    log.record(serde_json::json!({ "step": step, "error": e.to_string() }))?;
                }
                return Err(e);
            }
        };
        debug_assert_eq!((d_updates, g_updates), (step, step));

        if step % config.eval_every == 0 {
            let fake = st.generator.predict(&eval_z)?;
            let report = evaluate(step, split, &fake, &st.original, st.auxiliary.as_ref())?;
            if let Some(log) = log.as_mut() {
                log.record(serde_json::json!({
                    "step": step,
                    "loss_d": loss_d,
                    "loss_d_aux": loss_d_aux,
                    "loss_g": loss_g,
                    "divergences": report.entries,
                }))?;
                log.checkpoint(&st, step)?;
            }
            history.push(report);
        }
        if let Some(cb) = options.on_step.as_mut() {
            cb(&StepView {
                step,
                generator: &st.generator,
                original: &st.original,
                auxiliary: st.auxiliary.as_ref(),
                loss_d,
                loss_d_aux,
                loss_g,
            })?;
        }
    }
    if d_updates != config.total_steps || g_updates != config.total_steps {
        return Err(Error::Contract(format!(
            "expected one critic and one generator update per step, got {d_updates} and {g_updates} over {} steps",
            config.total_steps
        )));
    }

    let final_report = match history.last() {
        Some(r) if r.step == config.total_steps => r.clone(),
        _ => {
            let fake = st.generator.predict(&eval_z)?;
            evaluate(config.total_steps, split, &fake, &st.original, st.auxiliary.as_ref())?
        }
    };
    if let Some(log) = log.as_ref() {
        log.checkpoint(&st, config.total_steps)?;
    }
    Ok(TrainedBundle {
        generator: st.generator,
        original: st.original,
        auxiliary: st.auxiliary,
        history,
        final_report,
        config: config.clone(),
        d_updates,
        g_updates,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// A trained generator used only as a sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenGenerator {
    pub params: NetworkParams,
}

impl FrozenGenerator {
    pub fn new(params: NetworkParams) -> Self {
        Self { params }
    }
}

impl SampleSource for FrozenGenerator {
    /// Eval-mode samples from `n` standard-normal latents drawn from `seed`.
    fn draw(&self, n: usize, seed: u64) -> Result<Tensor> {
        let z = LatentSampler::new(self.params.spec.input_dim, seed).sample(n, 0);
        self.params.predict(&z)
    }

    fn fingerprint(&self) -> u64 {
        self.params.checksum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependentDiscConfig {
    pub discriminator: NetworkSpec,
    pub split: SplitSelector,
    pub steps: u64,
    pub batch_size: usize,
    /// Cosine schedule from `base_lr` to `floor_lr` over `steps`.
    pub base_lr: f64,
    pub floor_lr: f64,
    /// Seeds initialization and minibatch order.
    pub seed: u64,
    /// Seeds the fixed and held-out generator draws.
    pub sample_seed: u64,
    pub generator_sample_count: usize,
    pub heldout_sample_count: usize,
    /// Record the training-set divergence every this many steps (0 disables).
    pub curve_every: u64,
    pub reduction: LossReduction,
}

impl IndependentDiscConfig {
    /// Defaults for a critic of width `width` trained on `which` half of `split`.
    pub fn for_split(split: &DatasetSplit, which: SplitSelector, width: usize, seed: u64) -> Self {
        Self {
            discriminator: NetworkSpec::discriminator(split.train1.cols(), width),
            split: which,
            steps: 5_000,
            batch_size: 64,
            base_lr: 0.01,
            floor_lr: 0.0,
            seed,
            sample_seed: seed,
            generator_sample_count: split.select(which).rows(),
            heldout_sample_count: split.test.rows(),
            curve_every: 500,
            reduction: LossReduction::Mean,
        }
    }

    pub fn schedule(&self) -> CosineSchedule {
        CosineSchedule { base_lr: self.base_lr, total_steps: self.steps, floor_lr: self.floor_lr }
    }

    pub fn validate(&self, split: &DatasetSplit) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        self.discriminator.validate()?;
        let n = split.select(self.split).rows();
        if self.generator_sample_count != n {
            return fail(format!(
                "generator_sample_count {} must equal the selected split size {n}",
                self.generator_sample_count
            ));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return fail(format!("batch_size must be in 1..={n}, got {}", self.batch_size));
        }
        if self.heldout_sample_count < 2 {
            return fail("heldout_sample_count must be >= 2".into());
        }
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.base_lr) || !ok(self.floor_lr) || self.floor_lr > self.base_lr {
            return fail(format!(
                "need 0 <= floor_lr <= base_lr, got floor_lr={} base_lr={}",
                self.floor_lr, self.base_lr
            ));
        }
        Ok(())
    }

    /// Seeds of the fixed training draw and the held-out draw from the generator.
    pub fn draw_seeds(&self) -> (u64, u64) {
        (
            seed::derive(self.sample_seed, &[Key::Label("fixed")]),
            seed::derive(self.sample_seed, &[Key::Label("heldout")]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub divergence: f64,
}

#[derive(Debug, Clone)]
pub struct IndependentResult {
    pub discriminator: NetworkParams,
    pub curve: Vec<CurvePoint>,
    /// Selected real split against the fixed generated set it was trained on.
    pub train: DivergenceEstimate,
    /// Test split against a fresh generated set.
    pub heldout: DivergenceEstimate,
    pub fixed_samples: Tensor,
    pub heldout_samples: Tensor,
}

/// Trains a fresh critic with SGD and cosine decay to separate the selected real
/// split from a fixed generated set of equal size.
pub fn train_independent_discriminator(
    gen: &dyn SampleSource,
    split: &DatasetSplit,
    cfg: &IndependentDiscConfig,
) -> Result<IndependentResult> {
    cfg.validate(split)?;
    let fingerprint = gen.fingerprint();
    let real = split.select(cfg.split);
    let (fixed_seed, heldout_seed) = cfg.draw_seeds();
    let fixed = gen.draw(cfg.generator_sample_count, fixed_seed)?;
    let heldout_samples = gen.draw(cfg.heldout_sample_count, heldout_seed)?;
    if fixed.shape() != real.shape() {
        return Err(Error::Contract(format!(
            "generator produced {:?}, real split is {:?}",
            fixed.shape(),
            real.shape()
        )));
    }
    let mut disc = init_network(&cfg.discriminator, seed::derive(cfg.seed, &[Key::Label("init")]))?;
    let real_batches = batch_iter(real, cfg.batch_size, seed::derive(cfg.seed, &[Key::Label("real")]))?;
    let gen_batches = batch_iter(&fixed, cfg.batch_size, seed::derive(cfg.seed, &[Key::Label("gen")]))?;
    let names = disc.param_names();
    let schedule = cfg.schedule();
    let set = match cfg.split {
        SplitSelector::Train1 => EvalSet::Train1,
        SplitSelector::Train2 => EvalSet::Train2,
    };
    let role = DiscriminatorRole::Independent;

    let mut curve = Vec::new();
    for k in 0..cfg.steps {
        let mut tape = Tape::new();
        let (loss, fwd) = critic_loss(
            &mut tape,
            &mut disc,
            &real_batches.batch_at(k),
            &gen_batches.batch_at(k),
            cfg.reduction,
        )?;
        finite_loss(&tape, loss, k + 1, "independent discriminator")?;
        tape.backward(loss)?;
        let grads = collect_grads(&tape, &fwd.params);
        let refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        sgd_step(&mut disc.params_mut(), &refs, cosine_lr(&schedule, k), &names)?;
        if cfg.curve_every > 0 && (k + 1) % cfg.curve_every == 0 {
            let e = estimate_divergence(&disc, real, &fixed, role, set)?;
            curve.push(CurvePoint { step: k + 1, divergence: e.value });
        }
    }
    if gen.fingerprint() != fingerprint {
        return Err(Error::Contract("generator changed while training an independent discriminator".into()));
    }
    let train = estimate_divergence(&disc, real, &fixed, role, set)?;
    let heldout = estimate_divergence(&disc, &split.test, &heldout_samples, role, EvalSet::Test)?;
    Ok(IndependentResult { discriminator: disc, curve, train, heldout, fixed_samples: fixed, heldout_samples })
}
