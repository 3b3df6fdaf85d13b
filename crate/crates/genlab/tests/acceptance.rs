//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Set `GENLAB_ACCEPTANCE_OUT=<dir>` to keep the capacity sweep outputs.

use std::f64::consts::LN_2;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use genlab::config::{GanSettings, IndependentSettings};
use genlab::{run_sweep, SweepResultRow, SweepSpec};
use genlab_core::data::{make_splits, sample_distribution, DistributionSpec, SplitSelector, SplitSizes};
use genlab_core::metrics::{estimate_divergence, frechet_distance, DiscriminatorRole, EvalSet};
use genlab_core::nn::{checkpoint_bytes, init_network, Activation, Mode, NetworkParams, NetworkSpec, Role};
use genlab_core::optim::{AdamConfig, AdamState};
use genlab_core::seed;
use genlab_core::tensor::softplus;
use genlab_core::train::{
    discriminator_update_step, gan_losses, generator_update_step, train_gan_on, train_independent_discriminator,
    GanConfig, IndependentDiscConfig, LossReduction, StepView, TrainOptions,
};
use genlab_core::{Tape, Tensor};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<(bool, String), String>;

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn normal_tensor(rng: &mut seed::Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

// ---------------------------------------------------------------- criterion 1

/// `Σ tanh(net(x)·r)` with optional parameter gradients.
fn probe(net: &NetworkParams, x: &Tensor, r: &Tensor, mode: Mode, grads: bool) -> Result<(f64, Vec<Vec<f64>>), String> {
    let mut net = net.clone();
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let rv = tape.constant(r.clone());
    let fwd = net.forward(&mut tape, xv, mode, grads).map_err(e2s)?;
    let proj = tape.matmul(fwd.output, rv).map_err(e2s)?;
    let t = tape.tanh(proj);
    let loss = tape.sum(t).map_err(e2s)?;
    let value = tape.value(loss).item().map_err(e2s)?;
    if !grads {
        return Ok((value, Vec::new()));
    }
    tape.backward(loss).map_err(e2s)?;
    let g = fwd
        .params
        .iter()
        .map(|&p| tape.grad(p).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; tape.value(p).numel()]))
        .collect();
    Ok((value, g))
}

fn random_network(rng: &mut seed::Rng, k: usize) -> Result<(NetworkParams, Mode), String> {
    let role = if k.is_multiple_of(2) { Role::Generator } else { Role::Discriminator };
    let input_dim = rng.random_range(2..=4);
    let width = [1usize, 2, 4][rng.random_range(0..3)];
    let depth = rng.random_range(1..=3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=3)).collect();
    let activation = if rng.random_bool(0.5) { Activation::Tanh } else { Activation::LeakyRelu { slope: 0.2 } };
    let (spec, mode) = match role {
        Role::Generator => {
            let mut s = NetworkSpec::generator(input_dim, 2, width);
            s.hidden_widths = hidden;
            s.activation = activation;
            s.batchnorm = rng.random_bool(0.75);
            (s, Mode::Train)
        }
        Role::Discriminator => {
            let mut s = NetworkSpec::discriminator(input_dim, width);
            s.hidden_widths = hidden;
            s.activation = activation;
            s.spectral_norm = rng.random_bool(0.75);
            (s, Mode::Eval)
        }
    };
    let mut net = init_network(&spec, rng.random()).map_err(e2s)?;
    // Move every parameter off its initial value so scale and shift gradients are generic.
    for p in net.params_mut() {
        for v in p.data_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += 0.1 * z;
        }
    }
    Ok((net, mode))
}

fn criterion_autodiff() -> Outcome {
    let h = 1e-5;
    let mut rng = seed::rng(2024);
    let mut worst = (0.0f64, 0.0, 0.0);
    let mut n_checked = 0usize;
    for k in 0..50 {
        let (net, mode) = random_network(&mut rng, k)?;
        let batch = rng.random_range(4..=8);
        let x = normal_tensor(&mut rng, &[batch, net.spec.input_dim], 1.0);
        let r = normal_tensor(&mut rng, &[net.spec.output_dim, 1], 1.0);
        let (_, analytic) = probe(&net, &x, &r, mode, true)?;
        for (pi, g) in analytic.iter().enumerate() {
            for (i, &a) in g.iter().enumerate() {
                let mut plus = net.clone();
                plus.params_mut()[pi].data_mut()[i] += h;
                let mut minus = net.clone();
                minus.params_mut()[pi].data_mut()[i] -= h;
                let fd = (probe(&plus, &x, &r, mode, false)?.0 - probe(&minus, &x, &r, mode, false)?.0) / (2.0 * h);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                if rel > worst.0 {
                    worst = (rel, a, fd);
                }
                n_checked += 1;
            }
        }
    }
    Ok((
        worst.0 < 1e-4,
        format!(
            "{n_checked} gradient entries over 50 networks, max relative error {:.2e} (analytic {:.6e}, fd {:.6e}; limit 1e-4)",
            worst.0, worst.1, worst.2
        ),
    ))
}

// ---------------------------------------------------------------- criterion 2

fn criterion_spectral() -> Outcome {
    let mut worst = 0.0f64;
    let mut n_weights = 0;
    for (i, width) in [1usize, 4, 16].into_iter().enumerate() {
        let mut d = init_network(&NetworkSpec::discriminator(2, width), 500 + i as u64).map_err(e2s)?;
        let mut adam = AdamState::for_params(AdamConfig::default(), &d.params());
        let mut rng = seed::rng(900 + i as u64);
        for step in 1..=100 {
            let real = normal_tensor(&mut rng, &[32, 2], 1.0);
            let fake = normal_tensor(&mut rng, &[32, 2], 0.5);
            discriminator_update_step(&mut d, &mut adam, &real, &fake, LossReduction::Mean, step).map_err(e2s)?;
        }
        for w in d.effective_weights() {
            let m = DMatrix::from_row_slice(w.rows(), w.cols(), w.data());
            let top = m.singular_values().max();
            worst = worst.max((top - 1.0).abs());
            n_weights += 1;
        }
    }
    Ok((worst < 1e-3, format!("{n_weights} effective weights, max |sigma_max - 1| = {worst:.2e} (limit 1e-3)")))
}

// ---------------------------------------------------------------- criterion 3

/// Critic that returns its first input coordinate.
fn coordinate_critic() -> Result<NetworkParams, String> {
    let mut spec = NetworkSpec::discriminator(2, 1);
    spec.hidden_widths.clear();
    spec.spectral_norm = false;
    let mut d = init_network(&spec, 0).map_err(e2s)?;
    d.layers[0].weight = Tensor::matrix(1, 2, vec![1.0, 0.0]).map_err(e2s)?;
    d.layers[0].bias = Tensor::vector(vec![0.0]);
    Ok(d)
}

/// Critic that returns `c` everywhere.
fn constant_critic(c: f64) -> Result<NetworkParams, String> {
    let mut d = coordinate_critic()?;
    d.layers[0].weight = Tensor::matrix(1, 2, vec![0.0, 0.0]).map_err(e2s)?;
    d.layers[0].bias = Tensor::vector(vec![c]);
    Ok(d)
}

fn criterion_losses() -> Outcome {
    // ln(1 + e^-2) and ln(1 + e^-6).
    let ld_ref = 0.126_928_011_042_972_5;
    let lg_ref = 0.002_475_685_137_730_449_5;
    let mut errs = Vec::new();

    let (ld, _) = gan_losses(&[2.0, 2.0], &[1.0, 1.0], LossReduction::Sum);
    errs.push((ld - ld_ref).abs());
    let (_, lg) = gan_losses(&[0.0, 0.0], &[3.0, 3.0], LossReduction::Sum);
    errs.push((lg - lg_ref).abs());
    let (ld0, lg0) = gan_losses(&[0.0; 4], &[0.0; 4], LossReduction::Sum);
    errs.push((ld0 - LN_2).abs());
    errs.push((lg0 - LN_2).abs());

    // The same values through the recorded training steps.
    let mut d = coordinate_critic()?;
    let mut adam = AdamState::for_params(AdamConfig::default(), &d.params());
    let real = Tensor::matrix(2, 2, vec![2.0, 0.0, 2.0, 0.0]).map_err(e2s)?;
    let fake = Tensor::matrix(2, 2, vec![1.0, 0.0, 1.0, 0.0]).map_err(e2s)?;
    let tape_ld = discriminator_update_step(&mut d, &mut adam, &real, &fake, LossReduction::Sum, 1).map_err(e2s)?;
    errs.push((tape_ld - ld_ref).abs());

    let mut gen_spec = NetworkSpec::generator(2, 2, 1);
    gen_spec.hidden_widths.clear();
    gen_spec.batchnorm = false;
    let mut g = init_network(&gen_spec, 1).map_err(e2s)?;
    let mut adam_g = AdamState::for_params(AdamConfig::default(), &g.params());
    let z = Tensor::matrix(2, 2, vec![0.3, -1.0, 1.2, 0.5]).map_err(e2s)?;
    let tape_lg = generator_update_step(&mut g, &constant_critic(3.0)?, &mut adam_g, &z, LossReduction::Sum, 1)
        .map_err(e2s)?;
    errs.push((tape_lg - lg_ref).abs());
    let tape_lg0 = generator_update_step(&mut g, &constant_critic(0.0)?, &mut adam_g, &z, LossReduction::Sum, 2)
        .map_err(e2s)?;
    errs.push((tape_lg0 - LN_2).abs());

    let exact = softplus(0.0) == LN_2;
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok((
        worst < 1e-12 && exact,
        format!("{} loss values, max error {worst:.1e} (limit 1e-12); softplus(0) == ln 2 exactly: {exact}", errs.len()),
    ))
}

// ---------------------------------------------------------------- criterion 4

fn criterion_zero_divergence() -> Outcome {
    let dists = [
        DistributionSpec::default(),
        DistributionSpec::Checkerboard { cells: 4 },
        DistributionSpec::Spiral { arms: 2, noise: 0.05 },
    ];
    let mut worst_a = 0.0f64;
    let mut worst_b = 0.0f64;
    for rep in 0..10u64 {
        let dist = &dists[rep as usize % dists.len()];
        let d = init_network(&NetworkSpec::discriminator(2, 16), 7000 + rep).map_err(e2s)?;
        let a = sample_distribution(dist, 2048, 2 * rep + 1).map_err(e2s)?;
        let b = sample_distribution(dist, 2048, 2 * rep + 2).map_err(e2s)?;
        let e = estimate_divergence(&d, &a, &b, DiscriminatorRole::Independent, EvalSet::Test).map_err(e2s)?;
        worst_a = worst_a.max(e.value.abs() / e.standard_error);

        let split = make_splits(dist, SplitSizes::default(), 100 + rep).map_err(e2s)?;
        let cfg = IndependentDiscConfig::for_split(&split, SplitSelector::Train1, 16, 8000 + rep);
        let res = train_independent_discriminator(dist, &split, &cfg).map_err(e2s)?;
        worst_b = worst_b.max(res.heldout.value.abs() / res.heldout.standard_error);
    }
    Ok((
        worst_a < 3.0 && worst_b < 3.0,
        format!(
            "10 repeats each: untrained critic max |div|/SE = {worst_a:.2}, independent critic vs real sampler (held-out) max |div|/SE = {worst_b:.2} (limit 3)"
        ),
    ))
}

// ---------------------------------------------------------------- criterion 5

fn random_spd(rng: &mut seed::Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

fn criterion_frechet() -> Outcome {
    let one = |m: f64, v: f64| (DVector::from_element(1, m), DMatrix::from_element(1, 1, v));
    let (m0, v1) = one(0.0, 1.0);
    let (m3, _) = one(3.0, 1.0);
    let (_, v4) = one(0.0, 4.0);
    let cases = [
        (frechet_distance(&m0, &v1, &m0, &v1).map_err(e2s)?, 0.0),
        (frechet_distance(&m0, &v1, &m3, &v1).map_err(e2s)?, 9.0),
        (frechet_distance(&m0, &v1, &m0, &v4).map_err(e2s)?, 1.0),
    ];
    let closed = cases.iter().map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);

    let mut rng = seed::rng(55);
    let (mut asym, mut selfd) = (0.0f64, 0.0f64);
    for k in 0..100 {
        let d = 1 + k % 6;
        let s1 = random_spd(&mut rng, d);
        let s2 = random_spd(&mut rng, d);
        let mu1 = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let mu2 = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let ab = frechet_distance(&mu1, &s1, &mu2, &s2).map_err(e2s)?;
        let ba = frechet_distance(&mu2, &s2, &mu1, &s1).map_err(e2s)?;
        asym = asym.max((ab - ba).abs());
        selfd = selfd.max(frechet_distance(&mu1, &s1, &mu1, &s1).map_err(e2s)?.abs());
    }
    Ok((
        closed < 1e-8 && asym < 1e-9 && selfd < 1e-9,
        format!(
            "closed forms {:?} max error {closed:.1e} (limit 1e-8); 100 SPD pairs: max asymmetry {asym:.1e}, max self-distance {selfd:.1e} (limit 1e-9)",
            cases.map(|c| c.0)
        ),
    ))
}

// ---------------------------------------------------------------- criterion 6

fn generator_trajectory(cfg: &GanConfig, marks: &[u64]) -> Result<Vec<Vec<u8>>, String> {
    let split = make_splits(&cfg.distribution, cfg.split_sizes, cfg.data_seed()).map_err(e2s)?;
    let mut snaps = Vec::new();
    {
        let mut cb = |v: &StepView<'_>| {
            if marks.contains(&v.step) {
                snaps.push(checkpoint_bytes(v.generator, v.step));
            }
            Ok(())
        };
        let opts = TrainOptions { run_dir: None, on_step: Some(&mut cb) };
        let bundle = train_gan_on(cfg, &split, opts).map_err(e2s)?;
        if cfg.auxiliary_enabled != bundle.auxiliary.is_some() {
            return Err("auxiliary presence does not match the configuration".into());
        }
    }
    Ok(snaps)
}

fn criterion_isolation() -> Outcome {
    let base = GanConfig {
        total_steps: 2000,
        eval_every: 500,
        eval_samples: 256,
        discriminator_width: 16,
        master_seed: 31,
        ..GanConfig::default()
    };
    let marks = [100, 1000, base.total_steps];
    let on = generator_trajectory(&GanConfig { auxiliary_enabled: true, ..base.clone() }, &marks)?;
    let off = generator_trajectory(&GanConfig { auxiliary_enabled: false, ..base }, &marks)?;
    let same: Vec<bool> = on.iter().zip(&off).map(|(a, b)| a == b).collect();
    let ok = on.len() == marks.len() && off.len() == marks.len() && same.iter().all(|&s| s);
    Ok((ok, format!("generator checkpoints at steps {marks:?} byte-identical with and without auxiliary: {same:?}")))
}

// ---------------------------------------------------------- criteria 7, 8, 10

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

struct SweepRun {
    rows: Vec<SweepResultRow>,
    secs: f64,
}

fn capacity_sweep(out: &Path) -> Result<SweepRun, String> {
    let spec = SweepSpec { width_multipliers: vec![4, 16, 64], seeds: vec![0, 1, 2], ..SweepSpec::default() };
    let start = Instant::now();
    let outcome = run_sweep(&spec, out, 1).map_err(e2s)?;
    if outcome.failed() > 0 {
        return Err(format!("{} of {} sweep cells failed", outcome.failed(), outcome.rows.len()));
    }
    Ok(SweepRun { rows: outcome.rows, secs: start.elapsed().as_secs_f64() })
}

fn criterion_capacity(run: &SweepRun) -> Outcome {
    let widths = [4usize, 16, 64];
    let med: Vec<f64> = widths
        .iter()
        .map(|&w| median(run.rows.iter().filter(|r| r.width == w).map(|r| r.l_i_base_train1).collect()))
        .collect();
    let nonincreasing = med.windows(2).all(|p| p[1] <= p[0]);
    // Reported alongside, not part of the pass condition.
    let held: Vec<f64> = widths
        .iter()
        .map(|&w| median(run.rows.iter().filter(|r| r.width == w).map(|r| r.l_i_base_test).collect()))
        .collect();
    let w4: Vec<&SweepResultRow> = run.rows.iter().filter(|r| r.width == 4).collect();
    let under = w4.iter().filter(|r| r.l_o_train1 < r.l_a_train1).count();
    let pairs: Vec<String> = w4.iter().map(|r| format!("{:.4}<{:.4}", r.l_o_train1, r.l_a_train1)).collect();
    Ok((
        nonincreasing && under >= 2 && run.secs < 900.0,
        format!(
            "median baseline divergence on train1 by width {widths:?}: [{:.5}, {:.5}, {:.5}] nonincreasing: {nonincreasing} (held-out medians for reference: [{:.5}, {:.5}, {:.5}]); width-4 L_O < L_A in {under}/3 seeds ({}); sweep took {:.0}s (target 900s)",
            med[0],
            med[1],
            med[2],
            held[0],
            held[1],
            held[2],
            pairs.join(", "),
            run.secs
        ),
    ))
}

fn criterion_gap(run: &SweepRun) -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for r in run.rows.iter().filter(|r| r.width == 16 || r.width == 64) {
        let z = r.generator_gap.abs() / r.generator_gap_se;
        worst = worst.max(z);
        parts.push(format!("w{} s{}: {:+.5} ({:.2} SE)", r.width, r.seed, r.generator_gap, z));
    }
    Ok((worst < 3.0 && parts.len() == 6, format!("max |gap|/SE = {worst:.2} (limit 3); {}", parts.join("; "))))
}

fn criterion_correlation(run: &SweepRun) -> Outcome {
    let fd: Vec<f64> = run.rows.iter().map(|r| r.frechet_train1).collect();
    let div: Vec<f64> = run.rows.iter().map(|r| r.l_i_base_train1).collect();
    let rho = spearman(&fd, &div);
    let soft = if rho > 0.5 { "met" } else { "not met" };
    Ok((rho > 0.0, format!("Spearman rho(Frechet, baseline divergence) over {} rows = {rho:.3} (> 0 required; soft target > 0.5 {soft})", fd.len())))
}

// ---------------------------------------------------------------- criterion 9

fn small_config() -> SweepSpec {
    SweepSpec {
        width_multipliers: vec![2, 4],
        seeds: vec![0, 1],
        baseline_width: 2,
        split_sizes: SplitSizes { n1: 128, n2: 128, n_test: 64 },
        gan: GanSettings {
            latent_dim: 4,
            generator_width: 4,
            total_steps: 60,
            batch_size: 16,
            eval_every: 20,
            eval_samples: 64,
            ..GanSettings::default()
        },
        independent: IndependentSettings { steps: 60, batch_size: 16, curve_every: 20, ..IndependentSettings::default() },
        ..SweepSpec::default()
    }
}

fn run_cli(config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_genlab"))
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("GENLAB_SEED")
        .status()
        .map_err(e2s)?;
    if !status.success() {
        return Err(format!("genlab run exited with {status}"));
    }
    Ok(())
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let config = dir.path().join("config.json");
    std::fs::write(&config, serde_json::to_string_pretty(&small_config()).map_err(e2s)?).map_err(e2s)?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_cli(&config, &a)?;
    run_cli(&config, &b)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a)
        .map_err(e2s)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "svg")))
        .collect();
    files.sort();
    let mut differing = Vec::new();
    for f in &files {
        let name = f.file_name().expect("file name");
        if std::fs::read(f).map_err(e2s)? != std::fs::read(b.join(name)).map_err(e2s)? {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    let has_csv = files.iter().any(|p| p.extension().is_some_and(|e| e == "csv"));
    let has_svg = files.iter().any(|p| p.extension().is_some_and(|e| e == "svg"));
    Ok((
        differing.is_empty() && has_csv && has_svg,
        format!("{} CSV/SVG files compared across two runs, differing: {differing:?}", files.len()),
    ))
}

// ---------------------------------------------------------------- driver

fn report(results: &mut Vec<bool>, id: u32, title: &str, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} {title}: {detail} [{secs:.1}s]");
    results.push(passed);
}

fn timed(limit: f64, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f()?;
    let secs = start.elapsed().as_secs_f64();
    Ok((ok && secs < limit, format!("{detail}; runtime {secs:.1}s (limit {limit}s)")))
}

fn main() {
    let mut results = Vec::new();
    report(&mut results, 1, "autodiff matches finite differences", || timed(10.0, criterion_autodiff));
    report(&mut results, 2, "spectral normalization", || timed(5.0, criterion_spectral));
    report(&mut results, 3, "loss fidelity", criterion_losses);
    report(&mut results, 4, "zero-divergence baselines", || timed(120.0, criterion_zero_divergence));
    report(&mut results, 5, "Frechet metric", criterion_frechet);
    report(&mut results, 6, "auxiliary critic gradient isolation", criterion_isolation);

    let keep = std::env::var_os("GENLAB_ACCEPTANCE_OUT").map(PathBuf::from);
    let tmp = tempfile::tempdir().expect("temp dir");
    let out = keep.unwrap_or_else(|| tmp.path().join("sweep"));
    println!("running capacity sweep (widths 4, 16, 64; seeds 0, 1, 2; 20000 steps) into {}", out.display());
    let sweep = capacity_sweep(&out);
    let on_sweep = |f: fn(&SweepRun) -> Outcome| match &sweep {
        Ok(run) => f(run),
        Err(e) => Err(e.clone()),
    };
    report(&mut results, 7, "capacity trend and width-4 underfitting", || on_sweep(criterion_capacity));
    report(&mut results, 8, "no generator overfitting", || on_sweep(criterion_gap));
    report(&mut results, 9, "CLI determinism", criterion_determinism);
    report(&mut results, 10, "Frechet and divergence rank correlation", || on_sweep(criterion_correlation));

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
