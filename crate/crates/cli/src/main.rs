use std::path::PathBuf;
use std::process::ExitCode;

use amlcli::commands;
use amlcli::output::Written;
use amlcli::{Method, PipelineConfig};
use amlgraph::gstore::ReorderStrategy;
use clap::{Parser, Subcommand};

/// Synthetic AML transaction graphs: generate, screen, learn, compress.
#[derive(Parser)]
#[command(name = "amlcli", version)]
struct Cli {
    /// Pipeline config; the built-in default is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accounts, transactions and SAR labels.
    Generate,
    /// Rule-based alerts over a transaction log.
    Scan {
        /// Transaction log; defaults to the output directory's.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train a model and write its checkpoint and metrics.
    Train {
        /// gcn or fastgcn.
        #[arg(long, default_value = "gcn")]
        method: Method,
    },
    /// Reorder and difference-code an edge list.
    Compress {
        /// Edge list; defaults to the output directory's.
        #[arg(long)]
        input: Option<PathBuf>,
        /// identity, bfs or degree; defaults to the config's reorder.
        #[arg(long)]
        strategy: Option<ReorderStrategy>,
    },
    /// Time both training methods and write the comparison table.
    Bench,
    /// Score accounts, optionally after applying new transactions incrementally.
    Infer {
        /// Defaults to the GCN checkpoint in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// CSV of new transactions in the transactions.csv layout.
        #[arg(long)]
        stream: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<Vec<Written>> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), cli.seed, cli.out.as_deref())?;
    match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::Scan { input } => commands::scan_log(&cfg, input.as_deref()),
        Command::Train { method } => commands::train(&cfg, method),
        Command::Compress { input, strategy } => commands::compress_graph(&cfg, input.as_deref(), strategy),
        Command::Bench => commands::bench(&cfg),
        Command::Infer { checkpoint, stream } => {
            let ckpt = checkpoint.unwrap_or_else(|| cfg.out_dir.join(commands::checkpoint_name(Method::Gcn)));
            commands::infer(&cfg, &ckpt, stream.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                let tag = if f.deterministic { "" } else { "  (timing)" };
                println!("{}  {}{tag}", f.sha256, f.path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
