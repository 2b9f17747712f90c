//! `fsv` — food-security forecast verification.
//!
//! Four sequential stages, each driven by the same config file:
//! `catalog` scans the data tree, `build` constructs atoms and the
//! classification panel, `evaluate` generates and scores predictions,
//! and `report` re-renders CSV artifacts from stored metrics.
//!
//! Exit codes: 0 success (warnings allowed), 2 catalog conflicts,
//! 3 geometry failures, 4 empty evaluations, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fsv_core::baselines::PredictionSource;
use fsv_core::config::{Overrides, RunConfig};
use fsv_core::error::Error;
use fsv_core::period::PeriodRange;
use fsv_core::pipeline;

#[derive(Parser)]
#[command(
    name = "fsv",
    version,
    about = "Verify food-security forecasts against later assessments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run configuration (TOML).
    #[arg(long, short = 'c', default_value = "config.toml")]
    config: PathBuf,

    /// Override the data root (also: env FSV_DATA_ROOT).
    #[arg(long)]
    data_root: Option<PathBuf>,

    /// Restrict periods, e.g. 2019-02..2022-10 or a single 2021-06.
    #[arg(long)]
    periods: Option<String>,

    /// Comma-separated prediction sources (FEWSNET, PPS, SPLY, Max-2PP).
    #[arg(long)]
    sources: Option<String>,

    /// Sliver filter threshold in square degrees.
    #[arg(long)]
    threshold_area: Option<f64>,

    /// Minimum covered fraction for a classification to count.
    #[arg(long)]
    threshold_coverage: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the data root and write the layer catalog.
    Catalog(CommonArgs),
    /// Build the atom base and the classification panel.
    Build(CommonArgs),
    /// Generate predictions, score them, and write reports.
    Evaluate(CommonArgs),
    /// Re-render report CSVs from stored metrics.
    Report(CommonArgs),
}

impl CommonArgs {
    fn load_config(&self) -> Result<RunConfig, Error> {
        let mut overrides = Overrides {
            data_root: self.data_root.clone(),
            area_threshold: self.threshold_area,
            coverage_threshold: self.threshold_coverage,
            ..Default::default()
        };
        if let Some(spec) = &self.periods {
            overrides.periods = Some(PeriodRange::parse(spec)?);
        }
        if let Some(spec) = &self.sources {
            let sources = spec
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<PredictionSource>())
                .collect::<Result<Vec<_>, _>>()?;
            if sources.is_empty() {
                return Err(Error::Config("--sources given but empty".into()));
            }
            overrides.sources = Some(sources);
        }
        RunConfig::load(&self.config, &overrides)
    }
}

fn print_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Catalog(args) => {
            let config = args.load_config()?;
            let outcome = pipeline::run_catalog(&config)?;
            print_warnings(&outcome.warnings);
            println!(
                "catalog: {} entries -> {}",
                outcome.entries,
                outcome.path.display()
            );
        }
        Command::Build(args) => {
            let config = args.load_config()?;
            let outcome = pipeline::run_build(&config)?;
            print_warnings(&outcome.warnings);
            println!(
                "build: {} atoms, {} panel rows -> {}",
                outcome.atom_count,
                outcome.panel_rows,
                config.output_dir.display()
            );
        }
        Command::Evaluate(args) => {
            let config = args.load_config()?;
            let outcome = pipeline::run_evaluate(&config)?;
            print_warnings(&outcome.warnings);
            println!(
                "evaluate: {} predictions, {} scored pairs -> {}",
                outcome.predictions,
                outcome.scored_pairs,
                config.output_dir.join(pipeline::REPORTS_DIR).display()
            );
            if outcome.ml2_pairs > 0 {
                println!("evaluate: {} ML2 pairs scored separately", outcome.ml2_pairs);
            }
        }
        Command::Report(args) => {
            let config = args.load_config()?;
            let outcome = pipeline::run_report(&config)?;
            println!("report: {} groups re-rendered:", outcome.groups);
            for path in &outcome.rendered {
                println!("  {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
