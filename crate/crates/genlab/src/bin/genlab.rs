use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use genlab::error::{GenlabError, Result};
use genlab::report::read_csv;
use genlab::svg::{write_svg_plot, PlotKind};
use genlab::{parse_config, run_sweep};

/// Critic-divergence experiments on synthetic 2-D GANs.
#[derive(Parser)]
#[command(name = "genlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a width sweep described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a plot from a results CSV.
    Plot {
        #[arg(long)]
        rows: PathBuf,
        /// divergence_vs_width, gap_vs_width or frechet_vs_divergence.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant and oracle checks.
    Verify,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, workers, out } => {
            let mut spec = parse_config(&config)?;
            if let Ok(s) = std::env::var("GENLAB_SEED") {
                spec.master_seed = s
                    .trim()
                    .parse()
                    .map_err(|_| GenlabError::config("GENLAB_SEED", format!("expected an unsigned integer, got `{s}`")))?;
            }
            let out = out.unwrap_or_else(|| spec.output_dir.clone());
            let outcome = run_sweep(&spec, &out, workers)?;
            println!("wrote {} rows to {}", outcome.rows.len(), out.join("rows.csv").display());
            match outcome.failed() {
                0 => Ok(()),
                failed => Err(GenlabError::CellsFailed { failed, total: outcome.rows.len() }),
            }
        }
        Command::Plot { rows, kind, out } => {
            let kind: PlotKind = kind.parse()?;
            let rows = read_csv(&rows)?;
            write_svg_plot(&out, &rows, kind)
        }
        Command::Verify => {
            let checks = genlab_core::verify::run_all();
            let mut failed = 0;
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(GenlabError::Core(genlab_core::Error::Contract(format!("{failed} checks failed"))));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("genlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
