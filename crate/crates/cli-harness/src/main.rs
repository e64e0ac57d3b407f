//! `srulab` — one entry point for the recurrent-memory experiments:
//! spatial-temporal benchmark training, stereo depth noise, POMDP navigation
//! training/evaluation, and latent analytics. All randomness derives from the
//! `--seed` flag through purpose-named substreams, and every run writes its
//! resolved configuration next to its outputs.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "srulab", version, about = "Spatially-enhanced recurrent unit laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a recurrent cell on the landmark registration benchmark
    BenchSpatial {
        /// lstm | gru | sru-lstm | sru-gru | sru-ours
        #[arg(long)]
        cell: recurrent_cells::CellKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// override the configured epoch count
        #[arg(long)]
        epochs: Option<u64>,
        /// JSON config (defaults apply when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the stereo depth-noise pipeline to a directory of PFM/PGM images
    NoiseApply {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// override the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train navigation policies with PPO (+DML) on procedural mazes
    NavTrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained policy checkpoint on a directory of ASCII mazes
    NavEval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        mazes: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes_per_maze: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// bucket edges in meters, comma separated
        #[arg(long, default_value = "0,2,4,6,8,12")]
        edges: String,
        #[arg(long)]
        out: PathBuf,
        /// also dump per-step cross-attention weights for the first maze
        #[arg(long, default_value_t = false)]
        attention_csv: bool,
    },
    /// Latent/evaluation analytics over CSV inputs
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// PCA projection of a feature CSV
    Pca {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mahalanobis distances of query rows against a fitted feature CSV
    Md {
        #[arg(long = "in")]
        input: PathBuf,
        /// rows to score (defaults to the fit set itself)
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Success rate bucketed by start-goal distance
    SrByDist {
        /// CSV with `distance,success` columns
        #[arg(long = "in")]
        input: PathBuf,
        /// bucket edges in meters, comma separated
        #[arg(long, default_value = "0,10,20,40,80,120")]
        edges: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::BenchSpatial { cell, seed, epochs, config, out } => {
            commands::bench_spatial(cell, seed, epochs, config.as_deref(), &out)
        }
        Command::NoiseApply { input, out, config, seed } => {
            commands::noise_apply(&input, &out, &config, seed)
        }
        Command::NavTrain { config, seed, out } => commands::nav_train(&config, seed, &out),
        Command::NavEval { ckpt, mazes, episodes_per_maze, seed, edges, out, attention_csv } => {
            commands::nav_eval(&ckpt, &mazes, episodes_per_maze, seed, &edges, &out, attention_csv)
        }
        Command::Analyze { what } => match what {
            AnalyzeCommand::Pca { input, components, out } => commands::analyze_pca(&input, components, &out),
            AnalyzeCommand::Md { input, query, out } => commands::analyze_md(&input, query.as_deref(), &out),
            AnalyzeCommand::SrByDist { input, edges, out } => commands::analyze_sr(&input, &edges, &out),
        },
    };
    match code {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(1);
        }
    }
}
