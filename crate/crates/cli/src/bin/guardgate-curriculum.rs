//! Curriculum runner, trajectory plotting, and synthetic corpus generation.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use guardgate_cli::plot;
use guardgate_cli::runspec::{self, RunSpec};

#[derive(Parser)]
#[command(name = "guardgate-curriculum", about = "Two-phase curriculum training for the toy model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run spec: first phase (optional), priority switching,
    /// error-set remediation. Writes epochs.jsonl, checkpoint.json,
    /// summary.json into the spec's output_dir.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Emit the FNR-FPR trajectory of an epoch log as SVG and CSV.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "trajectory.svg")]
        out_svg: PathBuf,
        #[arg(long, default_value = "trajectory.csv")]
        out_csv: PathBuf,
    },
    /// Generate the bundled synthetic near-boundary corpus.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let spec = RunSpec::load(&config)?;
            let summary = runspec::execute(&spec)?;
            if let Some(loss) = summary.first_phase_loss {
                println!("first phase: mean loss {loss:.4}");
            }
            if let Some((fnr, fpr)) = summary.first_phase_eval {
                println!("first phase eval: FNR {fnr:.3} FPR {fpr:.3}");
            }
            if let Some((fnr, fpr)) = summary.final_eval {
                println!("after curriculum: FNR {fnr:.3} FPR {fpr:.3}");
            }
            println!(
                "error sets: {} unsafe-predicted-benign, {} benign-predicted-unsafe",
                summary.error_sets.unsafe_predicted_benign.len(),
                summary.error_sets.benign_predicted_unsafe.len()
            );
            println!("artifacts in {}", spec.output_dir.display());
            Ok(())
        }
        Command::Plot { log, out_svg, out_csv } => {
            let records = plot::read_epoch_log(&log)?;
            std::fs::write(&out_svg, plot::trajectory_svg(&records))?;
            std::fs::write(&out_csv, plot::trajectory_csv(&records))?;
            println!("wrote {} and {}", out_svg.display(), out_csv.display());
            Ok(())
        }
        Command::Synth { seed, out_dir } => {
            runspec::write_synth_corpus(seed, &out_dir)?;
            println!("corpus written to {}", out_dir.display());
            Ok(())
        }
    }
}
