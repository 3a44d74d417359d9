//! Curriculum run specification: one JSON file naming datasets, priorities,
//! and hyperparameters; outputs an epoch log (JSONL), a model checkpoint, and
//! a run summary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use guardgate_core::curriculum::synth::{generate_boundary_corpus, SynthSpec};
use guardgate_core::curriculum::toy::ToyModel;
use guardgate_core::curriculum::{
    first_phase_train, run_curriculum, CurriculumConfig, CurriculumOutcome, PriorityPrompts,
    TrainableModel,
};
use guardgate_core::eval::{load_dataset, write_dataset, LabeledExample};
use guardgate_core::metrics::{confusion, fnr, fpr};
use guardgate_core::taxonomy::Polarity;

fn default_feature_dim() -> usize {
    1 << 14
}

/// The curriculum run spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSpec {
    #[serde(flatten)]
    pub config: CurriculumConfig,
    pub curated_dataset: PathBuf,
    #[serde(default)]
    pub first_phase_dataset: Option<PathBuf>,
    /// Defaults to `config.learning_rate` when absent.
    #[serde(default)]
    pub first_phase_learning_rate: Option<f64>,
    #[serde(default)]
    pub eval_dataset: Option<PathBuf>,
    #[serde(default)]
    pub priorities: Option<PriorityPrompts>,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    pub output_dir: PathBuf,
}

impl RunSpec {
    pub fn load(path: &Path) -> anyhow::Result<RunSpec> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("run spec {}: {e}", path.display()))?;
        let spec: RunSpec = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("run spec {}: {e}", path.display()))?;
        spec.config.validate()?;
        Ok(spec)
    }
}

/// (FNR, FPR) at the 0.5 threshold on a labeled slice.
fn operating_point(model: &ToyModel, examples: &[LabeledExample]) -> (f64, f64) {
    let preds: Vec<Polarity> = examples.iter().map(|e| model.predict(&e.prompt).0).collect();
    let golds: Vec<Polarity> = examples.iter().map(|e| e.gold).collect();
    match confusion(&preds, &golds) {
        Ok(c) => (fnr(&c), fpr(&c)),
        Err(_) => (0.0, 0.0),
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub first_phase_loss: Option<f64>,
    pub first_phase_eval: Option<(f64, f64)>,
    pub final_eval: Option<(f64, f64)>,
    pub error_sets: guardgate_core::curriculum::ErrorSets,
    pub remediation: guardgate_core::curriculum::RemediationReport,
}

/// Execute a run spec; returns the summary after writing all artifacts.
pub fn execute(spec: &RunSpec) -> anyhow::Result<RunSummary> {
    let curated = load_dataset(&spec.curated_dataset)?;
    let eval = spec.eval_dataset.as_ref().map(|p| load_dataset(p)).transpose()?;
    let priorities = spec.priorities.clone().unwrap_or_default();

    let mut model = ToyModel::new(spec.feature_dim);
    let mut first_phase_loss = None;
    let mut first_phase_eval = None;
    if let Some(path) = &spec.first_phase_dataset {
        let first = load_dataset(path)?;
        let lr = spec.first_phase_learning_rate.unwrap_or(spec.config.learning_rate);
        first_phase_loss = Some(first_phase_train(&first, &mut model, lr)?);
        first_phase_eval = eval.as_deref().map(|e| operating_point(&model, e));
    }

    let outcome: CurriculumOutcome =
        run_curriculum(&curated, &mut model, &priorities, &spec.config)?;
    let final_eval = eval.as_deref().map(|e| operating_point(&model, e));

    std::fs::create_dir_all(&spec.output_dir)?;
    let mut epoch_log = String::new();
    for record in &outcome.run.epoch_log {
        epoch_log.push_str(&serde_json::to_string(record)?);
        epoch_log.push('\n');
    }
    std::fs::write(spec.output_dir.join("epochs.jsonl"), epoch_log)?;
    std::fs::write(spec.output_dir.join("checkpoint.json"), serde_json::to_string(&model)?)?;

    let summary = RunSummary {
        first_phase_loss,
        first_phase_eval,
        final_eval,
        error_sets: outcome.error_sets,
        remediation: outcome.remediation,
    };
    std::fs::write(spec.output_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Write the three slices of the bundled synthetic corpus as JSONL files.
pub fn write_synth_corpus(seed: u64, out_dir: &Path) -> anyhow::Result<()> {
    let corpus = generate_boundary_corpus(seed, &SynthSpec::default());
    std::fs::create_dir_all(out_dir)?;
    write_dataset(&out_dir.join("first_phase.jsonl"), &corpus.first_phase)?;
    write_dataset(&out_dir.join("curated.jsonl"), &corpus.curated)?;
    write_dataset(&out_dir.join("eval.jsonl"), &corpus.eval)?;
    Ok(())
}
