//! Command-line front end for the pipeline: each subcommand maps to one
//! stage (or a stage list for `run`), all driven by a single TOML config
//! and a shared artifact directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zonecsi::pipeline::{self, Stage, StageAction};

#[derive(Parser)]
#[command(
    name = "zonecsi",
    version,
    about = "Scene-to-sum-rate pipeline: ray tracing, fuzzy path clustering, \
             UT zones, learned path surrogates, and hybrid precoding"
)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "zonecsi.toml")]
    config: PathBuf,

    /// Root seed override; defaults to the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Artifact directory shared by all stages.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Re-run requested stages even when their artifacts are up to date,
    /// and accept stale (but not missing) upstream artifacts.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize the scene and lay out the feasible UT locations.
    Preprocess,
    /// Trace LoS and single-reflection paths for every location.
    Trace,
    /// Select a cluster count and fit fuzzy path memberships.
    Cluster,
    /// Partition locations into zones keyed by their cluster sets.
    Zones,
    /// Train the path-existence classifier and parameter regressors.
    Train,
    /// Predict the full-area path database with the trained models.
    Predict,
    /// Sweep hybrid and fully digital sum rates over the power grid.
    Evaluate,
    /// Run several stages in order.
    Run {
        /// Comma-separated stage list.
        #[arg(
            long,
            default_value = "preprocess,trace,cluster,zones,train,predict,evaluate"
        )]
        stages: String,
    },
    /// Re-emit an artifact as a tidy plotting CSV.
    Plotdata {
        /// One of: validity, zones, sumrate, clusters.
        #[arg(long)]
        kind: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> zonecsi::Result<()> {
    if let Command::Plotdata { kind } = &cli.command {
        let path = pipeline::emit_plot_data(&cli.out_dir, kind)?;
        println!("{}", path.display());
        return Ok(());
    }

    let mut cfg = pipeline::load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let stages = match &cli.command {
        Command::Preprocess => vec![Stage::Preprocess],
        Command::Trace => vec![Stage::Trace],
        Command::Cluster => vec![Stage::Cluster],
        Command::Zones => vec![Stage::Zones],
        Command::Train => vec![Stage::Train],
        Command::Predict => vec![Stage::Predict],
        Command::Evaluate => vec![Stage::Evaluate],
        Command::Run { stages } => pipeline::parse_stages(stages)?,
        Command::Plotdata { .. } => unreachable!("handled above"),
    };
    let outcomes = pipeline::run_pipeline(&cfg, &stages, &cli.out_dir, cli.force)?;
    for o in outcomes {
        let what = match o.action {
            StageAction::Ran => "ran",
            StageAction::Skipped => "up to date",
        };
        println!("{}: {what}", o.stage);
    }
    Ok(())
}
