//! Width × seed sweeps: one GAN plus four independent critics per cell.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use genlab_core::data::{make_splits, write_samples_csv, DatasetSplit, SplitSelector};
use genlab_core::metrics::{frechet_metric, DiscriminatorRole, EvalSet, GapReport};
use genlab_core::nn::save_checkpoint;
use genlab_core::seed::{self, Key};
use genlab_core::train::{
    train_gan_on, train_independent_discriminator, FrozenGenerator, IndependentDiscConfig, IndependentResult,
    TrainOptions, TrainedBundle,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SweepSpec;
use crate::error::{GenlabError, Result};
use crate::report::{write_csv, write_json, CellStatus, SweepResultRow};
use crate::svg::{write_svg_plot, PlotKind};

/// Stable per-cell seed: adding widths or seeds never perturbs other cells.
pub fn cell_seed(master: u64, width: usize, seed_index: u64) -> u64 {
    seed::derive(master, &[Key::Label("cell"), Key::Index(width as u64), Key::Index(seed_index)])
}

/// Data is shared by every width at the same seed index.
pub fn data_seed(master: u64, seed_index: u64) -> u64 {
    seed::derive(master, &[Key::Label("data"), Key::Index(seed_index)])
}

pub fn cell_dir(out: &Path, width: usize, seed_index: u64) -> PathBuf {
    out.join("cells").join(format!("w{width}_s{seed_index}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CellTiming {
    pub width: usize,
    pub seed: u64,
    pub wall_time_secs: f64,
    pub gan_wall_time_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Sorted by (width, seed).
    pub rows: Vec<SweepResultRow>,
    pub timings: Vec<CellTiming>,
}

impl SweepOutcome {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Independent-critic config for one cell; `tag` separates matching from baseline.
pub fn independent_config(
    spec: &SweepSpec,
    split: &DatasetSplit,
    which: SplitSelector,
    width: usize,
    cell_seed: u64,
    tag: &str,
) -> IndependentDiscConfig {
    let ind = &spec.independent;
    IndependentDiscConfig {
        steps: ind.steps,
        batch_size: ind.batch_size,
        base_lr: ind.base_lr,
        floor_lr: ind.floor_lr,
        curve_every: ind.curve_every,
        reduction: spec.gan.reduction,
        seed: seed::derive(cell_seed, &[Key::Label("independent"), Key::Label(tag)]),
        // Every critic in a cell sees the same generated sets.
        sample_seed: seed::derive(cell_seed, &[Key::Label("generator_samples")]),
        ..IndependentDiscConfig::for_split(split, which, width, 0)
    }
}

struct CellResult {
    row: SweepResultRow,
    gan_secs: f64,
}

fn write_samples(dir: &Path, name: &str, t: &genlab_core::Tensor) -> Result<()> {
    Ok(write_samples_csv(&dir.join(name), t)?)
}

fn value(bundle: &TrainedBundle, role: DiscriminatorRole, set: EvalSet) -> Result<f64> {
    bundle
        .final_report
        .get(role, set)
        .map(|e| e.value)
        .ok_or_else(|| GenlabError::Core(genlab_core::Error::Contract(format!("missing {role:?} {set:?} estimate"))))
}

fn run_cell(spec: &SweepSpec, out: &Path, width: usize, seed_index: u64) -> Result<CellResult> {
    let cs = cell_seed(spec.master_seed, width, seed_index);
    let dir = cell_dir(out, width, seed_index);
    fs::create_dir_all(&dir).map_err(|e| GenlabError::io(&dir, e))?;
    let split = make_splits(&spec.dataset, spec.split_sizes, data_seed(spec.master_seed, seed_index))?;
    let gan_cfg = spec.gan_config(width, cs);

    let start = Instant::now();
    let bundle = train_gan_on(&gan_cfg, &split, TrainOptions { run_dir: Some(&dir), on_step: None })?;
    let gan_secs = start.elapsed().as_secs_f64();
    let generator = FrozenGenerator::new(bundle.generator.clone());

    let mut critics: Vec<(String, IndependentResult)> = Vec::with_capacity(4);
    for (tag, w) in [("matching", width), ("baseline", spec.baseline_width)] {
        for which in [SplitSelector::Train1, SplitSelector::Train2] {
            let cfg = independent_config(spec, &split, which, w, cs, tag);
            let result = train_independent_discriminator(&generator, &split, &cfg)?;
            let name = format!("independent_{tag}_{}", if which == SplitSelector::Train1 { "train1" } else { "train2" });
            save_checkpoint(&dir.join(format!("{name}.ckpt")), &result.discriminator, cfg.steps)?;
            critics.push((name, result));
        }
    }
    let [m1, m2, b1, b2] = [0, 1, 2, 3].map(|i| &critics[i].1);

    let emb = &spec.frechet_embedding;
    let frechet_train1 = frechet_metric(&split.train1, &b1.fixed_samples, emb)?.value;
    let frechet_test = frechet_metric(&split.test, &b1.heldout_samples, emb)?.value;

    write_samples(&dir, "train1.csv", &split.train1)?;
    write_samples(&dir, "train2.csv", &split.train2)?;
    write_samples(&dir, "test.csv", &split.test)?;
    write_samples(&dir, "gen_fixed.csv", &b1.fixed_samples)?;
    write_samples(&dir, "gen_heldout.csv", &b1.heldout_samples)?;
    write_samples(&dir, "gen_eval.csv", &bundle.generator.predict(&gan_cfg.eval_latents())?)?;

    let report = &bundle.final_report;
    let get = |role, set| {
        report
            .get(role, set)
            .ok_or_else(|| GenlabError::Core(genlab_core::Error::Contract(format!("missing {role:?} {set:?} estimate"))))
    };
    let gap = GapReport::new(
        get(DiscriminatorRole::Original, EvalSet::Train1)?,
        get(DiscriminatorRole::Original, EvalSet::Test)?,
        get(DiscriminatorRole::Auxiliary, EvalSet::Train1)?,
        &b1.train,
        &b2.train,
    );
    let row = SweepResultRow {
        width,
        seed: seed_index,
        status: CellStatus::Ok,
        l_o_train1: value(&bundle, DiscriminatorRole::Original, EvalSet::Train1)?,
        l_o_test: value(&bundle, DiscriminatorRole::Original, EvalSet::Test)?,
        l_a_train1: value(&bundle, DiscriminatorRole::Auxiliary, EvalSet::Train1)?,
        l_a_test: value(&bundle, DiscriminatorRole::Auxiliary, EvalSet::Test)?,
        l_i_match_train1: m1.train.value,
        l_i_match_train2: m2.train.value,
        l_i_match_test: m1.heldout.value,
        l_i_base_train1: b1.train.value,
        l_i_base_train2: b2.train.value,
        l_i_base_test: b1.heldout.value,
        generator_gap: gap.generator_gap,
        generator_gap_se: gap.generator_gap_se,
        underfit_flag: gap.underfit_flag,
        frechet_train1,
        frechet_test,
    };
    if !row.all_finite() {
        return Err(GenlabError::Core(genlab_core::Error::Contract("non-finite value in result row".into())));
    }
    let curves: Vec<_> = critics.iter().map(|(n, r)| serde_json::json!({ "critic": n, "curve": r.curve })).collect();
    let curves_path = dir.join("independent_curves.json");
    fs::write(&curves_path, serde_json::to_string_pretty(&curves).expect("serializable"))
        .map_err(|e| GenlabError::io(&curves_path, e))?;
    Ok(CellResult { row, gan_secs })
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every cell on a pool of `workers` threads, appending each finished
/// cell to `cells.ndjson`, then writes rows, plots and metadata.
pub fn run_sweep(spec: &SweepSpec, out: &Path, workers: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    if workers == 0 {
        return Err(GenlabError::Usage("--workers must be >= 1".into()));
    }
    fs::create_dir_all(out).map_err(|e| GenlabError::io(out, e))?;
    let resolved = out.join("config.resolved.json");
    fs::write(&resolved, serde_json::to_string_pretty(spec).expect("serializable") + "\n")
        .map_err(|e| GenlabError::io(&resolved, e))?;
    let ndjson = out.join("cells.ndjson");
    let log = Mutex::new(
        OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&ndjson)
            .map_err(|e| GenlabError::io(&ndjson, e))?,
    );

    let cells: Vec<(usize, u64)> = spec
        .width_multipliers
        .iter()
        .flat_map(|&w| spec.seeds.iter().map(move |&s| (w, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GenlabError::Usage(format!("cannot start {workers} workers: {e}")))?;

    let results: Vec<Result<(SweepResultRow, CellTiming)>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(width, seed)| {
                let start = Instant::now();
                let outcome = panic::catch_unwind(AssertUnwindSafe(|| run_cell(spec, out, width, seed)))
                    .unwrap_or_else(|p| Err(GenlabError::Usage(format!("cell panicked: {}", panic_message(p)))));
                let wall = start.elapsed().as_secs_f64();
                let (row, timing) = match outcome {
                    Ok(c) => (c.row, CellTiming { width, seed, wall_time_secs: wall, gan_wall_time_secs: c.gan_secs, error: None }),
                    Err(e) => (
                        SweepResultRow::failed(width, seed),
                        CellTiming { width, seed, wall_time_secs: wall, gan_wall_time_secs: 0.0, error: Some(e.to_string()) },
                    ),
                };
                eprintln!(
                    "cell width={width} seed={seed}: {} in {wall:.1}s{}",
                    row.status,
                    timing.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
                );
                let line = serde_json::json!({ "row": &row, "error": &timing.error });
                let mut f = log.lock().expect("log lock");
                writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| GenlabError::io(&ndjson, e))?;
                Ok((row, timing))
            })
            .collect()
    });

    let mut pairs = results.into_iter().collect::<Result<Vec<_>>>()?;
    pairs.sort_by_key(|(r, _)| (r.width, r.seed));
    let (rows, timings): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    write_outputs(out, &rows)?;
    let timings_path = out.join("timings.json");
    fs::write(&timings_path, serde_json::to_string_pretty(&timings).expect("serializable") + "\n")
        .map_err(|e| GenlabError::io(&timings_path, e))?;
    Ok(SweepOutcome { rows, timings })
}

/// `rows.csv`, `rows.json` and one SVG per plot kind.
pub fn write_outputs(out: &Path, rows: &[SweepResultRow]) -> Result<()> {
    write_csv(&out.join("rows.csv"), rows)?;
    write_json(&out.join("rows.json"), rows)?;
    for kind in PlotKind::ALL {
        write_svg_plot(&out.join(format!("{}.svg", kind.as_str())), rows, kind)?;
    }
    Ok(())
}
