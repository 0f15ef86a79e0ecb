use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use catafinger::design_opt::DesignObjective;
use catafinger::proprio::{GenerateConfig, TrainConfig};
use catafinger_cli::commands::{cmd_eval, cmd_generate, cmd_optimize, cmd_trace, cmd_train, load_config};
use catafinger_cli::{service, LOG_ENV};
use clap::{Parser, Subcommand};

/// Folded-optics tracing, design optimization and proprioception tools.
#[derive(Debug, Parser)]
#[command(name = "catafinger", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace a scene and write <out>.svg, <out>.metrics.tsv, <out>.summary.json.
    Trace {
        /// Scene file; the shipped reference scene when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize mirror and skin control points; writes <out>.history.tsv and <out>.best.toml.
    Optimize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace this many pixels per evaluation instead of the scene's count.
        #[arg(long)]
        pixels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic proprioception pipeline.
    Proprio {
        #[command(subcommand)]
        command: ProprioCommand,
    },
    /// Serve the JSON API on localhost.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
    },
}

#[derive(Debug, Subcommand)]
enum ProprioCommand {
    /// Write a dataset directory (must not exist yet).
    Generate {
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Per-LED position jitter, pixels.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a regressor; writes <out>.model and <out>.loss.tsv.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model; writes <out>.eval.json and <out>.predictions.tsv.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Trace { config, out } => {
            let config = load_config(config.as_deref())?;
            let art = cmd_trace(&config, &out)?;
            let s = &art.report.summary;
            println!("coverage {:.4}, min imaging angle {:.3} deg", s.coverage, s.min_imaging_angle_deg);
        }
        Command::Optimize { config, budget, seed, pixels, out } => {
            let config = load_config(config.as_deref())?;
            let objective = DesignObjective { pixel_count: pixels, ..DesignObjective::default() };
            let run = cmd_optimize(&config, &objective, budget, seed, &out)?;
            println!("initial score {:.6}", run.initial_score);
            println!("final score {:.6}", run.final_score());
        }
        Command::Proprio { command } => match command {
            ProprioCommand::Generate { count, noise, seed, out } => {
                let n = cmd_generate(&GenerateConfig::new(count, noise, seed), &out)?;
                println!("{n} samples");
            }
            ProprioCommand::Train { data, epochs, batch, lr, seed, out } => {
                let cfg = TrainConfig { epochs, batch_size: batch, learning_rate: lr, seed, ..TrainConfig::default() };
                let loss = cmd_train(&data, &cfg, &out)?;
                if let Some(last) = loss.last() {
                    println!("final training loss {last:.6e}");
                }
            }
            ProprioCommand::Eval { data, model, out } => {
                let s = cmd_eval(&data, &model, &out)?;
                println!("rmse bending {:.4} N*mm, twisting {:.4} N*mm", s.rmse_bending, s.rmse_twisting);
            }
        },
        Command::Serve { config, port, host } => {
            let config = load_config(config.as_deref())?;
            tokio::runtime::Runtime::new()?.block_on(service::serve(config, SocketAddr::new(host, port)))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
