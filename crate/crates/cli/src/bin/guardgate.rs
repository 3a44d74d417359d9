//! Moderation gateway server and taxonomy export.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use guardgate_cli::server;

#[derive(Parser)]
#[command(name = "guardgate", about = "Dual-filter moderation gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        /// Config file (JSON); env vars may override endpoints and thresholds.
        #[arg(long)]
        config: PathBuf,
        /// Bind address.
        #[arg(long, default_value = "127.0.0.1:8787")]
        bind: SocketAddr,
        /// Log level: error|warn|info|debug|trace.
        #[arg(long, default_value = "info")]
        log_level: String,
    },
    /// Print the versioned taxonomy document as JSON.
    Taxonomy {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt().with_env_filter(filter).init();
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Serve { config, bind, log_level } => {
            init_logging(&log_level);
            let config = server::load_config(&config)?;
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(server::serve(config, bind))
        }
        Command::Taxonomy { out } => {
            let json = guardgate_core::taxonomy::export_taxonomy_json();
            match out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
            Ok(())
        }
    }
}
