use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ipteach::session::SessionManager;
use ipteach_cli::{commands, server};

#[derive(Parser)]
#[command(name = "ipteach", version, about = "Interactive teaching engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model, domain config or scenario file.
    Validate { model: PathBuf },
    /// Choose an action by finite-horizon expectimax.
    Plan {
        model: PathBuf,
        /// Comma-separated state probabilities.
        #[arg(long)]
        belief: Option<String>,
        #[arg(long)]
        horizon: usize,
        /// Keep only the K most likely observations per node.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate one episode and write its trace as JSON Lines.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run seeds 0..N and write the per-seed table as CSV.
    Batch {
        scenario: PathBuf,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive expectimax reference values.
    Oracle {
        model: PathBuf,
        #[arg(long)]
        belief: Option<String>,
        #[arg(long)]
        horizon: usize,
    },
    /// Host live teaching sessions over WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TEACH_LOG", "error")).init();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Validate { model } => commands::validate(&model, &mut out),
        Command::Plan {
            model,
            belief,
            horizon,
            cap,
            seed,
        } => commands::plan(&model, belief.as_deref(), horizon, cap, seed, &mut out),
        Command::Simulate {
            scenario,
            seed,
            trace,
        } => {
            let t = commands::simulate(&scenario, seed)?;
            commands::write_trace(&t, trace.as_deref(), &mut out)
        }
        Command::Batch {
            scenario,
            seeds,
            out: csv,
        } => commands::batch(&scenario, seeds, &csv, &mut out),
        Command::Oracle {
            model,
            belief,
            horizon,
        } => commands::oracle(&model, belief.as_deref(), horizon, &mut out),
        Command::Serve { port, host } => {
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(server::serve(addr, Arc::new(SessionManager::new())))
        }
    }
}
