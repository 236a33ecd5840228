//! Command-line client for the assembler service.
//!
//! Every subcommand talks HTTP to a service instance: either the one named
//! with `--server`, or an embedded one spun up on an ephemeral local port
//! for the duration of the command.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use assembler_client::Client;
use assembler_core::config::SimConfig;

#[derive(Parser)]
#[command(name = "assembler", version, about = "Grid-world match runner and replay tools")]
struct Cli {
    /// Base URL of a running service; omitted: an embedded one is used.
    #[arg(long, global = true)]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a match from a config file and write the replay trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the metrics report of a trace.
    Metrics {
        #[arg(long)]
        trace: PathBuf,
        /// Output format: table or json.
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Render the world (or one agent's map) at a step of a trace.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        step: u64,
        #[arg(long)]
        agent: Option<String>,
    },
    /// Re-simulate a trace and check that it reproduces itself.
    Validate {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run the HTTP service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8017")]
        addr: String,
    },
}

#[tokio::main]
async fn main() -> Result<()> {
    let cli = Cli::parse();

    if let Command::Serve { addr } = &cli.command {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        eprintln!("serving on http://{}", listener.local_addr()?);
        assembler_service::serve(listener).await?;
        return Ok(());
    }

    let client = match &cli.server {
        Some(base) => Client::new(base.clone()),
        None => embedded_service().await?,
    };

    match cli.command {
        Command::Serve { .. } => unreachable!("handled above"),
        Command::Run { config, out } => {
            let config = load_config(&config)?;
            let trace = client.run(&config).await?;
            std::fs::write(&out, &trace)
                .with_context(|| format!("cannot write {}", out.display()))?;
            eprintln!(
                "wrote {} ({} steps)",
                out.display(),
                trace.lines().count().saturating_sub(1)
            );
        }
        Command::Metrics { trace, format } => {
            let body = read_trace(&trace)?;
            match format.as_str() {
                "table" => print!("{}", client.metrics_table(&body).await?),
                "json" => {
                    let report = client.metrics(&body).await?;
                    println!("{}", serde_json::to_string_pretty(&report)?);
                }
                other => bail!("unknown format {other:?} (expected table or json)"),
            }
        }
        Command::Render { trace, step, agent } => {
            let body = read_trace(&trace)?;
            print!("{}", client.render(&body, step, agent.as_deref()).await?);
        }
        Command::Validate { trace } => {
            let body = read_trace(&trace)?;
            let report = client.validate(&body).await?;
            if report.ok {
                println!("trace valid: {} steps reproduced", report.steps_checked);
            } else {
                eprintln!("trace INVALID ({} mismatches):", report.mismatches.len());
                for m in &report.mismatches {
                    eprintln!("  {m}");
                }
                std::process::exit(1);
            }
        }
    }
    Ok(())
}

/// Spin the service up in-process on an ephemeral port.
async fn embedded_service() -> Result<Client> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    tokio::spawn(async move {
        let _ = assembler_service::serve(listener).await;
    });
    Ok(Client::new(format!("http://{addr}")))
}

fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let config: SimConfig = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text)
            .with_context(|| format!("bad JSON config {}", path.display()))?,
        _ => toml::from_str(&text)
            .with_context(|| format!("bad TOML config {}", path.display()))?,
    };
    config.validate()?;
    Ok(config)
}

fn read_trace(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}
