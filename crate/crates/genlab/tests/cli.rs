//! Command-line behaviour: exit codes, seed override and plotting.

use std::path::Path;
use std::process::{Command, Output};

use genlab::config::{GanSettings, IndependentSettings};
use genlab::SweepSpec;
use genlab_core::data::SplitSizes;

fn genlab(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_genlab"));
    cmd.args(args).env_remove("GENLAB_SEED");
    if let Some(s) = seed {
        cmd.env("GENLAB_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn tiny_spec() -> SweepSpec {
    SweepSpec {
        width_multipliers: vec![2],
        seeds: vec![0],
        baseline_width: 2,
        split_sizes: SplitSizes { n1: 64, n2: 64, n_test: 32 },
        gan: GanSettings {
            latent_dim: 4,
            generator_width: 2,
            total_steps: 20,
            batch_size: 8,
            eval_every: 10,
            eval_samples: 32,
            ..GanSettings::default()
        },
        independent: IndependentSettings { steps: 20, batch_size: 8, curve_every: 10, ..IndependentSettings::default() },
        ..SweepSpec::default()
    }
}

fn write_config(dir: &Path, value: &serde_json::Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, value.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(genlab(&[], None).status.code(), Some(2));
    assert_eq!(genlab(&["run"], None).status.code(), Some(2));
    assert_eq!(genlab(&["frobnicate"], None).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(genlab(&["run", "--config", p(&missing)], None).status.code(), Some(2));

    let bad = write_config(dir.path(), &serde_json::json!({ "widths": [4], "gan": { "total_stepz": 5 } }));
    let out = genlab(&["run", "--config", &bad], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gan.total_stepz"));

    let good = write_config(dir.path(), &serde_json::to_value(tiny_spec()).unwrap());
    let out = genlab(&["run", "--config", &good, "--out", p(&dir.path().join("o"))], Some("abc"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("GENLAB_SEED"));
}

#[test]
fn failing_cells_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = serde_json::to_value(tiny_spec()).unwrap();
    spec["gan"]["adam"]["lr"] = serde_json::json!(1e300);
    let cfg = write_config(dir.path(), &spec);
    let out = genlab(&["run", "--config", &cfg, "--out", p(&dir.path().join("o"))], None);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/rows.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("failed"));
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &serde_json::to_value(tiny_spec()).unwrap());
    let run = |name: &str, seed: Option<&str>| {
        let out = dir.path().join(name);
        let o = genlab(&["run", "--config", &cfg, "--out", p(&out)], seed);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("rows.csv")).unwrap()
    };
    let base = run("a", None);
    assert_eq!(base, run("b", Some("0")));
    assert_ne!(base, run("c", Some("5")));
    let resolved = std::fs::read_to_string(dir.path().join("c/config.resolved.json")).unwrap();
    assert!(resolved.contains("\"master_seed\": 5"));
}

#[test]
fn plot_and_verify_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &serde_json::to_value(tiny_spec()).unwrap());
    let out = dir.path().join("o");
    assert_eq!(genlab(&["run", "--config", &cfg, "--out", p(&out)], None).status.code(), Some(0));
    let rows = out.join("rows.csv");
    for kind in ["divergence_vs_width", "gap_vs_width", "frechet_vs_divergence"] {
        let svg = dir.path().join(format!("{kind}.svg"));
        let o = genlab(&["plot", "--rows", p(&rows), "--kind", kind, "--out", p(&svg)], None);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    }
    let o = genlab(&["plot", "--rows", p(&rows), "--kind", "pie", "--out", p(&dir.path().join("x.svg"))], None);
    assert_eq!(o.status.code(), Some(2));
    let o = genlab(&["plot", "--rows", p(&dir.path().join("none.csv")), "--kind", "gap_vs_width", "--out", p(&dir.path().join("x.svg"))], None);
    assert_eq!(o.status.code(), Some(1));

    let o = genlab(&["verify"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 8, "{text}");
}
