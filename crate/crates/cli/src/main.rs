use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcda_cli::{
    cmd_bound, cmd_generate, cmd_plot, cmd_probe, cmd_sweep_gamma, cmd_train, describe, exit_code, output_root,
    resolve, Flags, OUT_ENV,
};
use mcda_core::mcda::Method;
use mcda_core::Result;

/// Blended-target domain adaptation experiments.
#[derive(Parser, Debug)]
#[command(name = "btda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment file (`key = value` lines under `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed to run; repeat for several. Replaces the configured list.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    /// Output directory. Defaults to $BTDA_OUT, then ./btda-runs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Method to run; repeat for several.
    #[arg(long = "method", global = true)]
    methods: Vec<Method>,
    /// Entropy threshold in nats; for sweep-gamma, repeat to set the grid.
    #[arg(long = "gamma", global = true)]
    gammas: Vec<f64>,
    /// Use this dataset file instead of generating one.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the configured benchmark and save it as dataset.btda.
    Generate,
    /// Train every configured method and seed.
    Train,
    /// Retrain across entropy thresholds and report the accuracy spread.
    SweepGamma,
    /// Class-center nearest-neighbour probe on target rows.
    Probe {
        /// Probe the features of this model instead of raw inputs.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Neighbours counted around each class center (default 20).
        #[arg(long)]
        k_neighbors: Option<usize>,
    },
    /// Check the blended error bound for a trained model.
    Bound {
        /// Model to evaluate.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Draw the training curves of a run directory as SVG.
    Plot {
        /// Run directory holding log.jsonl.
        #[arg(long)]
        run: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    let flags = Flags {
        config: cli.config,
        seeds: cli.seeds,
        out: cli.out,
        methods: cli.methods,
        gammas: cli.gammas,
        dataset: cli.dataset,
    };
    let mut cfg = resolve(&flags, matches!(cli.command, Command::SweepGamma))?;
    let out = output_root(&cfg, std::env::var(OUT_ENV).ok());
    match cli.command {
        Command::Generate => {
            let (path, ds) = cmd_generate(&cfg, &out)?;
            print!("{}", describe(&ds)?);
            println!("wrote {}", path.display());
        }
        Command::Train => {
            let result = cmd_train(&cfg, &out)?;
            print!("{}", result.summary_csv());
        }
        Command::SweepGamma => {
            let sweep = cmd_sweep_gamma(&cfg, &out)?;
            print!("{}", sweep.to_csv());
        }
        Command::Probe {
            checkpoint,
            k_neighbors,
        } => {
            if let Some(k) = k_neighbors {
                cfg.k_neighbors = k;
            }
            let probe = cmd_probe(&cfg, checkpoint.as_deref(), &out)?;
            print!("{}", probe.to_csv());
            println!("mean,{}", probe.mean);
        }
        Command::Bound { checkpoint } => {
            let report = cmd_bound(&cfg, &checkpoint, &out)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Plot { run } => {
            for path in cmd_plot(&run, flags.out.as_deref().unwrap_or(&run))? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
