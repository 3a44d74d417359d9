//! Benchmark and red-team runner.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use guardgate_core::backend::{BackendDescriptor, FilterRole};
use guardgate_core::eval::redteam::{
    generate_redteam, run_redteam, AttackType, StockRephraser, TemplateLibrary,
};
use guardgate_core::eval::{
    load_dataset, run_benchmark, BenchmarkOptions, EvalMode, EvalSubject, FilterSubject,
    GuardSubject, HttpGuardClient,
};
use guardgate_core::gateway::{GateConfig, Guard, GuardService};

#[derive(Parser)]
#[command(name = "guardgate-eval", about = "Benchmark datasets and red-team a guard")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Prompt,
    Response,
}

#[derive(Subcommand)]
enum Command {
    /// Run a dataset benchmark against a backend or gateway.
    Run {
        /// Dataset file (canonical JSONL schema).
        #[arg(long)]
        dataset: PathBuf,
        /// Backend spec: rule-content:<rules.json>, rule-jailbreak:<rules.json>,
        /// remote-content:<url>, remote-jailbreak:<url>, gate:<config.json>,
        /// or gateway:<base-url> for a live server.
        #[arg(long)]
        backend: String,
        #[arg(long, value_enum, default_value = "prompt")]
        mode: Mode,
        /// Write the JSON report here (the text table always prints).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Reports above this failure fraction are marked invalid.
        #[arg(long, default_value_t = 0.01)]
        max_failure_rate: f64,
        /// Dataset id recorded in the report; defaults to the file stem.
        #[arg(long)]
        dataset_id: Option<String>,
    },
    /// Generate and run red-team attacks against a guard.
    Redteam {
        /// Behaviors file: one harmful behavior per line.
        #[arg(long)]
        behaviors: PathBuf,
        /// Attack type: 1 (direct), 2 (rephrased), 3 (template mutation).
        #[arg(long, value_parser = parse_attack_type)]
        r#type: AttackType,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Live gateway base URL (mutually exclusive with --gate).
        #[arg(long)]
        gateway: Option<String>,
        /// In-process gate config file (mutually exclusive with --gateway).
        #[arg(long)]
        gate: Option<PathBuf>,
        /// Template library JSON; the bundled library is used when absent.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_attack_type(s: &str) -> Result<AttackType, String> {
    s.parse::<u8>()
        .ok()
        .and_then(AttackType::from_u8)
        .ok_or_else(|| format!("attack type must be 1, 2, or 3, got {s:?}"))
}

fn load_gate_service(path: &Path) -> anyhow::Result<GuardService> {
    let text = std::fs::read_to_string(path)?;
    let config: GateConfig = serde_json::from_str(&text)?;
    Ok(GuardService::new(config)?)
}

enum Target {
    Filter(FilterSubject),
    Guard(Arc<dyn Guard>),
}

fn parse_backend(spec: &str) -> anyhow::Result<Target> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| anyhow::anyhow!("backend spec must be <kind>:<arg>, got {spec:?}"))?;
    let target = match kind {
        "rule-content" => Target::Filter(FilterSubject::from_descriptor(
            &BackendDescriptor::rule(rest.into(), FilterRole::Content),
            guardgate_core::backend::DEFAULT_TOKEN_BUDGET,
        )?),
        "rule-jailbreak" => Target::Filter(FilterSubject::from_descriptor(
            &BackendDescriptor::rule(rest.into(), FilterRole::Jailbreak),
            guardgate_core::backend::DEFAULT_TOKEN_BUDGET,
        )?),
        "remote-content" => Target::Filter(FilterSubject::from_descriptor(
            &BackendDescriptor::remote(rest.to_string(), FilterRole::Content),
            guardgate_core::backend::DEFAULT_TOKEN_BUDGET,
        )?),
        "remote-jailbreak" => Target::Filter(FilterSubject::from_descriptor(
            &BackendDescriptor::remote(rest.to_string(), FilterRole::Jailbreak),
            guardgate_core::backend::DEFAULT_TOKEN_BUDGET,
        )?),
        "gateway" => Target::Guard(Arc::new(HttpGuardClient::new(rest.to_string()))),
        "gate" => Target::Guard(Arc::new(load_gate_service(Path::new(rest))?)),
        other => anyhow::bail!("unknown backend kind {other:?}"),
    };
    Ok(target)
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { dataset, backend, mode, out, parallelism, max_failure_rate, dataset_id } => {
            let examples = load_dataset(&dataset)?;
            let id = dataset_id.unwrap_or_else(|| {
                dataset.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            let opts = BenchmarkOptions {
                mode: match mode {
                    Mode::Prompt => EvalMode::Prompt,
                    Mode::Response => EvalMode::Response,
                },
                max_failure_rate,
                parallelism,
            };
            let target = parse_backend(&backend)?;
            let report = match &target {
                Target::Filter(subject) => run_benchmark(subject, &examples, &id, &opts)?,
                Target::Guard(guard) => {
                    let subject = GuardSubject::new(guard.as_ref(), backend.clone());
                    run_benchmark(&subject as &dyn EvalSubject, &examples, &id, &opts)?
                }
            };
            print!("{}", report.format_table());
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
                eprintln!("report written to {}", path.display());
            }
            Ok(())
        }
        Command::Redteam { behaviors, r#type, seed, gateway, gate, templates, out } => {
            let text = std::fs::read_to_string(&behaviors)?;
            let behaviors: Vec<String> =
                text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();

            let library = match &templates {
                Some(path) => TemplateLibrary::from_json(&std::fs::read_to_string(path)?)?,
                None => TemplateLibrary::builtin(),
            };
            let cases = generate_redteam(
                &behaviors,
                r#type,
                Some(&library),
                Some(&StockRephraser),
                seed,
            )?;

            let guard: Arc<dyn Guard> = match (gateway, gate) {
                (Some(url), None) => Arc::new(HttpGuardClient::new(url)),
                (None, Some(path)) => Arc::new(load_gate_service(&path)?),
                _ => anyhow::bail!("exactly one of --gateway or --gate is required"),
            };
            let report = run_redteam(guard.as_ref(), &cases)?;
            for (ty, stats) in &report.per_type {
                println!(
                    "type {ty}: ASR {:.1}% ({} allowed of {})",
                    stats.asr_percent, stats.allowed, stats.cases
                );
            }
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
                eprintln!("transcript written to {}", path.display());
            }
            Ok(())
        }
    }
}
