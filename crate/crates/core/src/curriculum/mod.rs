//! Two-phase training curriculum with priority switching and label-noise
//! injection, plus error-set tracking and remedial training.
//!
//! Phase one fits the model on a large uncurated corpus for exactly one
//! epoch, no prompts, no noise. Phase two alternates a helpfulness/safety
//! priority prompt per epoch over a small curated set, injecting a small
//! rate of label noise whose direction depends on the active priority, so
//! the model sees near-boundary data from both perspectives instead of
//! memorizing it. Examples the held-out slice keeps getting wrong are
//! grouped into two error sets and trained once more with amplified loss.

pub mod synth;
pub mod toy;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::LabeledExample;
use crate::metrics::{confusion, fnr, fpr};
use crate::taxonomy::Polarity;
use crate::util::{derive_seed, fnv1a};

/// Paper-faithful default for single-epoch bulk training of a content
/// classifier; desk-scale toy runs override it in their run spec.
pub const CONTENT_PHASE_LEARNING_RATE: f64 = 3e-5;
/// Paper-faithful default for both curriculum phases.
pub const CURRICULUM_LEARNING_RATE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("noise rate {name} = {value} outside (0, 0.1]")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("invalid curriculum config: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
}

/// The two training priorities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    Help,
    Safe,
}

impl Priority {
    pub fn opposite(self) -> Priority {
        match self {
            Priority::Help => Priority::Safe,
            Priority::Safe => Priority::Help,
        }
    }
}

/// The two instruction prefixes prepended to training inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityPrompts {
    pub help: String,
    pub safe: String,
}

impl Default for PriorityPrompts {
    fn default() -> PriorityPrompts {
        PriorityPrompts {
            help: "Priority: helpfulness. Lean toward treating borderline requests as benign \
                   rather than over-flagging them."
                .to_string(),
            safe: "Priority: safety. Lean toward treating borderline requests as unsafe rather \
                   than letting attacks through."
                .to_string(),
        }
    }
}

impl PriorityPrompts {
    pub fn text(&self, priority: Priority) -> &str {
        match priority {
            Priority::Help => &self.help,
            Priority::Safe => &self.safe,
        }
    }

    pub fn validate(&self) -> Result<(), CurriculumError> {
        if self.help == self.safe {
            return Err(CurriculumError::Config("priority prompt texts must differ".into()));
        }
        Ok(())
    }
}

/// Curriculum hyperparameters. `alpha`/`beta` are the noise-injection rates;
/// both must lie in (0, 0.1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurriculumConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// An example enters an error set after this many consecutive
    /// misclassified epochs on the held-out slice.
    #[serde(default = "default_error_window")]
    pub error_window: usize,
    /// Loss multiplier for remedial passes; must be > 1.
    #[serde(default = "default_remediation_weight")]
    pub remediation_weight: f64,
    /// Fraction of examples held out (by seeded hash of id).
    #[serde(default = "default_holdout_fraction")]
    pub holdout_fraction: f64,
}

fn default_alpha() -> f64 {
    0.1
}
fn default_beta() -> f64 {
    0.02
}
fn default_learning_rate() -> f64 {
    CURRICULUM_LEARNING_RATE
}
fn default_error_window() -> usize {
    2
}
fn default_remediation_weight() -> f64 {
    2.0
}
fn default_holdout_fraction() -> f64 {
    0.1
}

impl CurriculumConfig {
    pub fn new(epochs: usize, seed: u64) -> CurriculumConfig {
        CurriculumConfig {
            alpha: default_alpha(),
            beta: default_beta(),
            epochs,
            seed,
            learning_rate: default_learning_rate(),
            error_window: default_error_window(),
            remediation_weight: default_remediation_weight(),
            holdout_fraction: default_holdout_fraction(),
        }
    }

    pub fn validate(&self) -> Result<(), CurriculumError> {
        check_rate("alpha", self.alpha)?;
        check_rate("beta", self.beta)?;
        if self.epochs < 1 {
            return Err(CurriculumError::Config("epochs must be >= 1".into()));
        }
        if self.error_window < 1 {
            return Err(CurriculumError::Config("error_window must be >= 1".into()));
        }
        if self.remediation_weight <= 1.0 {
            return Err(CurriculumError::Config("remediation_weight must be > 1".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(CurriculumError::Config("holdout_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<(), CurriculumError> {
    if !(value > 0.0 && value <= 0.1) {
        return Err(CurriculumError::InvalidRate { name, value });
    }
    Ok(())
}

/// One training row handed to a trainable model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRow {
    pub text: String,
    pub label: Polarity,
    pub weight: f64,
}

/// The trainer interface the curriculum drives. A real fine-tuning job plugs
/// in here; [`toy::ToyModel`] is the bundled reference implementation.
pub trait TrainableModel {
    /// Deterministic for fixed state.
    fn predict(&self, input: &str) -> (Polarity, f64);
    /// One pass over the rows in order; returns the mean pre-update loss.
    fn fit_epoch(&mut self, rows: &[TrainRow], learning_rate: f64) -> f64;
}

// ---------------------------------------------------------------------------
// Noise injection
// ---------------------------------------------------------------------------

/// A noise-injected copy of a dataset plus the flip provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoisyDataset {
    pub examples: Vec<LabeledExample>,
    /// Ids whose label was flipped, in dataset order.
    pub flipped_ids: Vec<String>,
}

/// Flip a small, exactly-counted portion of labels, direction chosen by the
/// active priority: under `Help`, `round(alpha·|unsafe|)` unsafe examples
/// become benign and `round(beta·|benign|)` benign become unsafe; under
/// `Safe` the rates swap. The input is never modified; the flipped subset is
/// drawn by seeded sampling without replacement.
pub fn noise_injection(
    dataset: &[LabeledExample],
    priority: Priority,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<NoisyDataset, CurriculumError> {
    check_rate("alpha", alpha)?;
    check_rate("beta", beta)?;
    let (unsafe_rate, benign_rate) = match priority {
        Priority::Help => (alpha, beta),
        Priority::Safe => (beta, alpha),
    };

    let unsafe_indices: Vec<usize> =
        dataset.iter().enumerate().filter(|(_, e)| e.gold.is_unsafe()).map(|(i, _)| i).collect();
    let benign_indices: Vec<usize> =
        dataset.iter().enumerate().filter(|(_, e)| !e.gold.is_unsafe()).map(|(i, _)| i).collect();

    let unsafe_flips = (unsafe_rate * unsafe_indices.len() as f64).round() as usize;
    let benign_flips = (benign_rate * benign_indices.len() as f64).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut to_flip: BTreeSet<usize> = BTreeSet::new();
    to_flip.extend(sample_without_replacement(&mut rng, &unsafe_indices, unsafe_flips));
    to_flip.extend(sample_without_replacement(&mut rng, &benign_indices, benign_flips));

    let mut examples = dataset.to_vec();
    let mut flipped_ids = Vec::with_capacity(to_flip.len());
    for &i in &to_flip {
        let example = &mut examples[i];
        example.gold = match example.gold {
            Polarity::Safe => Polarity::Unsafe,
            Polarity::Unsafe => Polarity::Safe,
        };
        // A flipped label invalidates any category annotation.
        example.category = None;
        flipped_ids.push(example.id.clone());
    }
    Ok(NoisyDataset { examples, flipped_ids })
}

fn sample_without_replacement(
    rng: &mut ChaCha8Rng,
    pool: &[usize],
    amount: usize,
) -> Vec<usize> {
    let amount = amount.min(pool.len());
    rand::seq::index::sample(rng, pool.len(), amount).into_iter().map(|i| pool[i]).collect()
}

// ---------------------------------------------------------------------------
// Schedules and logs
// ---------------------------------------------------------------------------

/// Priority sequence for K epochs: `[Help, Safe, Help, ...]` — epoch 1 runs
/// under `Help`, every later epoch under the alternative of its predecessor.
pub fn priority_schedule(epochs: usize) -> Vec<Priority> {
    let mut schedule = Vec::with_capacity(epochs);
    let mut current = Priority::Help;
    for _ in 0..epochs {
        schedule.push(current);
        current = current.opposite();
    }
    schedule
}

/// Per-epoch log entry, serialized as JSONL by the runner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub priority: Priority,
    pub flipped_ids: Vec<String>,
    pub loss: f64,
    pub held_out_fnr: f64,
    pub held_out_fpr: f64,
}

/// Predictions on the held-out slice after one epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutEpoch {
    pub epoch: usize,
    pub predictions: Vec<HoldoutPrediction>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutPrediction {
    pub id: String,
    pub gold: Polarity,
    pub predicted: Polarity,
}

/// The two error-set directions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSets {
    pub unsafe_predicted_benign: BTreeSet<String>,
    pub benign_predicted_unsafe: BTreeSet<String>,
}

impl ErrorSets {
    pub fn is_empty(&self) -> bool {
        self.unsafe_predicted_benign.is_empty() && self.benign_predicted_unsafe.is_empty()
    }
}

/// Collect examples misclassified in each of the last `window` consecutive
/// epochs; the gold label picks the set. Histories shorter than the window
/// yield empty sets.
pub fn track_error_sets(history: &[HoldoutEpoch], window: usize) -> ErrorSets {
    let mut sets = ErrorSets::default();
    if window == 0 || history.len() < window {
        return sets;
    }
    let recent = &history[history.len() - window..];
    let mut wrong_counts: std::collections::BTreeMap<&str, (Polarity, usize)> =
        std::collections::BTreeMap::new();
    for epoch in recent {
        for p in &epoch.predictions {
            if p.predicted != p.gold {
                wrong_counts.entry(&p.id).or_insert((p.gold, 0)).1 += 1;
            }
        }
    }
    for (id, (gold, count)) in wrong_counts {
        if count == window {
            match gold {
                Polarity::Unsafe => sets.unsafe_predicted_benign.insert(id.to_string()),
                Polarity::Safe => sets.benign_predicted_unsafe.insert(id.to_string()),
            };
        }
    }
    sets
}

// ---------------------------------------------------------------------------
// Training drivers
// ---------------------------------------------------------------------------

fn render_row(priorities: &PriorityPrompts, priority: Priority, example: &LabeledExample) -> String {
    format!("{}\n{}", priorities.text(priority), example.prompt)
}

fn is_holdout(id: &str, seed: u64, fraction: f64) -> bool {
    let h = fnv1a(format!("{seed}:{id}").as_bytes());
    ((h % 10_000) as f64) < fraction * 10_000.0
}

/// Split a dataset into (train, holdout) by seeded hash of example id.
pub fn holdout_split<'a>(
    dataset: &'a [LabeledExample],
    cfg: &CurriculumConfig,
) -> (Vec<&'a LabeledExample>, Vec<&'a LabeledExample>) {
    let split_seed = derive_seed(cfg.seed, "holdout");
    dataset.iter().partition(|e| !is_holdout(&e.id, split_seed, cfg.holdout_fraction))
}

fn holdout_epoch<M: TrainableModel + ?Sized>(
    model: &M,
    epoch: usize,
    holdout: &[&LabeledExample],
) -> (HoldoutEpoch, f64, f64) {
    let predictions: Vec<HoldoutPrediction> = holdout
        .iter()
        .map(|e| {
            let (predicted, _) = model.predict(&e.prompt);
            HoldoutPrediction { id: e.id.clone(), gold: e.gold, predicted }
        })
        .collect();
    let preds: Vec<Polarity> = predictions.iter().map(|p| p.predicted).collect();
    let golds: Vec<Polarity> = predictions.iter().map(|p| p.gold).collect();
    let (held_fnr, held_fpr) = match confusion(&preds, &golds) {
        Ok(c) => (fnr(&c), fpr(&c)),
        Err(_) => (0.0, 0.0),
    };
    (HoldoutEpoch { epoch, predictions }, held_fnr, held_fpr)
}

/// Result of a priority-switching run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurriculumRun {
    pub epoch_log: Vec<EpochRecord>,
    pub holdout_history: Vec<HoldoutEpoch>,
}

/// Second-phase training: epoch 1 under `Help`, later epochs alternating,
/// each with fresh noise injection seeded from (config seed, epoch).
pub fn train_with_priority_switching<M: TrainableModel + ?Sized>(
    dataset: &[LabeledExample],
    model: &mut M,
    priorities: &PriorityPrompts,
    cfg: &CurriculumConfig,
) -> Result<CurriculumRun, CurriculumError> {
    cfg.validate()?;
    priorities.validate()?;
    if dataset.is_empty() {
        return Err(CurriculumError::EmptyDataset);
    }

    let (train, holdout) = holdout_split(dataset, cfg);
    let train_owned: Vec<LabeledExample> = train.into_iter().cloned().collect();
    if train_owned.is_empty() {
        return Err(CurriculumError::EmptyDataset);
    }

    let mut epoch_log = Vec::with_capacity(cfg.epochs);
    let mut holdout_history = Vec::with_capacity(cfg.epochs);
    for (i, priority) in priority_schedule(cfg.epochs).into_iter().enumerate() {
        let epoch = i + 1;
        let noisy = noise_injection(
            &train_owned,
            priority,
            cfg.alpha,
            cfg.beta,
            derive_seed(cfg.seed, &format!("noise-epoch-{epoch}")),
        )?;
        let mut rows: Vec<TrainRow> = noisy
            .examples
            .iter()
            .map(|e| TrainRow {
                text: render_row(priorities, priority, e),
                label: e.gold,
                weight: 1.0,
            })
            .collect();
        let mut order_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("shuffle-epoch-{epoch}")));
        rows.shuffle(&mut order_rng);

        let loss = model.fit_epoch(&rows, cfg.learning_rate);
        let (holdout_preds, held_fnr, held_fpr) = holdout_epoch(model, epoch, &holdout);
        holdout_history.push(holdout_preds);
        epoch_log.push(EpochRecord {
            epoch,
            priority,
            flipped_ids: noisy.flipped_ids,
            loss,
            held_out_fnr: held_fnr,
            held_out_fpr: held_fpr,
        });
    }
    Ok(CurriculumRun { epoch_log, holdout_history })
}

/// Which examples each remedial pass trained on.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RemediationReport {
    /// Unsafe-predicted-benign ids, trained under the Help priority.
    pub help_pass_ids: Vec<String>,
    /// Benign-predicted-unsafe ids, trained under the Safe priority.
    pub safe_pass_ids: Vec<String>,
}

/// One extra pass per non-empty error set with amplified loss: missed-unsafe
/// examples train under `Help`, over-flagged benign examples under `Safe`.
/// No noise is injected during remediation. Empty sets are a no-op.
pub fn remedial_training<M: TrainableModel + ?Sized>(
    model: &mut M,
    error_sets: &ErrorSets,
    dataset: &[LabeledExample],
    priorities: &PriorityPrompts,
    cfg: &CurriculumConfig,
) -> Result<RemediationReport, CurriculumError> {
    cfg.validate()?;
    let mut report = RemediationReport::default();
    if error_sets.is_empty() {
        return Ok(report);
    }
    let by_id: std::collections::BTreeMap<&str, &LabeledExample> =
        dataset.iter().map(|e| (e.id.as_str(), e)).collect();

    for (ids, priority, trained) in [
        (&error_sets.unsafe_predicted_benign, Priority::Help, &mut report.help_pass_ids),
        (&error_sets.benign_predicted_unsafe, Priority::Safe, &mut report.safe_pass_ids),
    ] {
        let rows: Vec<TrainRow> = ids
            .iter()
            .filter_map(|id| by_id.get(id.as_str()))
            .map(|e| TrainRow {
                text: render_row(priorities, priority, e),
                label: e.gold,
                weight: cfg.remediation_weight,
            })
            .collect();
        if !rows.is_empty() {
            model.fit_epoch(&rows, cfg.learning_rate);
            trained.extend(ids.iter().cloned());
        }
    }
    Ok(report)
}

/// First-phase training: exactly one epoch over the (possibly uncurated)
/// dataset, no noise injection, no priority prompts. Returns the mean loss.
pub fn first_phase_train<M: TrainableModel + ?Sized>(
    dataset: &[LabeledExample],
    model: &mut M,
    learning_rate: f64,
) -> Result<f64, CurriculumError> {
    if dataset.is_empty() {
        return Err(CurriculumError::EmptyDataset);
    }
    let rows: Vec<TrainRow> = dataset
        .iter()
        .map(|e| TrainRow { text: e.prompt.clone(), label: e.gold, weight: 1.0 })
        .collect();
    Ok(model.fit_epoch(&rows, learning_rate))
}

/// Full second-phase pipeline: priority switching, error-set tracking over
/// the configured window, then one remediation pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurriculumOutcome {
    pub run: CurriculumRun,
    pub error_sets: ErrorSets,
    pub remediation: RemediationReport,
}

pub fn run_curriculum<M: TrainableModel + ?Sized>(
    dataset: &[LabeledExample],
    model: &mut M,
    priorities: &PriorityPrompts,
    cfg: &CurriculumConfig,
) -> Result<CurriculumOutcome, CurriculumError> {
    let run = train_with_priority_switching(dataset, model, priorities, cfg)?;
    let error_sets = track_error_sets(&run.holdout_history, cfg.error_window);
    let remediation = remedial_training(model, &error_sets, dataset, priorities, cfg)?;
    Ok(CurriculumOutcome { run, error_sets, remediation })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(unsafe_count: usize, benign_count: usize) -> Vec<LabeledExample> {
        let mut out = Vec::new();
        for i in 0..unsafe_count {
            out.push(LabeledExample {
                id: format!("u{i}"),
                language: "en".into(),
                prompt: format!("unsafe prompt {i}"),
                response: None,
                gold: Polarity::Unsafe,
                category: None,
                source: "unit".into(),
                split: "train".into(),
            });
        }
        for i in 0..benign_count {
            out.push(LabeledExample {
                id: format!("b{i}"),
                language: "en".into(),
                prompt: format!("benign prompt {i}"),
                response: None,
                gold: Polarity::Safe,
                category: None,
                source: "unit".into(),
                split: "train".into(),
            });
        }
        out
    }

    #[test]
    fn noise_counts_match_rates_exactly() {
        let ds = dataset(100, 100);
        let noisy = noise_injection(&ds, Priority::Help, 0.1, 0.02, 7).unwrap();
        let unsafe_flips =
            noisy.examples.iter().zip(&ds).filter(|(n, o)| o.gold.is_unsafe() && n.gold != o.gold).count();
        let benign_flips =
            noisy.examples.iter().zip(&ds).filter(|(n, o)| !o.gold.is_unsafe() && n.gold != o.gold).count();
        assert_eq!((unsafe_flips, benign_flips), (10, 2));

        let noisy = noise_injection(&ds, Priority::Safe, 0.1, 0.02, 7).unwrap();
        let unsafe_flips =
            noisy.examples.iter().zip(&ds).filter(|(n, o)| o.gold.is_unsafe() && n.gold != o.gold).count();
        let benign_flips =
            noisy.examples.iter().zip(&ds).filter(|(n, o)| !o.gold.is_unsafe() && n.gold != o.gold).count();
        assert_eq!((unsafe_flips, benign_flips), (2, 10));
    }

    #[test]
    fn noise_leaves_input_unmodified_and_records_flips() {
        let ds = dataset(10, 10);
        let before = ds.clone();
        let noisy = noise_injection(&ds, Priority::Help, 0.1, 0.1, 3).unwrap();
        assert_eq!(ds, before, "input dataset must not change");
        let flipped: Vec<&str> = noisy
            .examples
            .iter()
            .zip(&ds)
            .filter(|(n, o)| n.gold != o.gold)
            .map(|(n, _)| n.id.as_str())
            .collect();
        assert_eq!(noisy.flipped_ids, flipped);
        assert_eq!(flipped.len(), 2); // round(0.1·10) on each side
    }

    #[test]
    fn tiny_classes_round_to_zero_flips() {
        let ds = dataset(10, 10);
        // round(0.01 · 10) = 0 on both sides: dataset unchanged.
        let noisy = noise_injection(&ds, Priority::Help, 0.01, 0.01, 11).unwrap();
        assert!(noisy.flipped_ids.is_empty());
        assert_eq!(noisy.examples, ds);
    }

    #[test]
    fn invalid_rates_rejected() {
        let ds = dataset(5, 5);
        assert!(matches!(
            noise_injection(&ds, Priority::Help, 0.0, 0.02, 1),
            Err(CurriculumError::InvalidRate { name: "alpha", .. })
        ));
        assert!(matches!(
            noise_injection(&ds, Priority::Help, 0.1, 0.11, 1),
            Err(CurriculumError::InvalidRate { name: "beta", .. })
        ));
    }

    #[test]
    fn schedule_is_strict_alternation() {
        assert_eq!(priority_schedule(1), [Priority::Help]);
        assert_eq!(priority_schedule(3), [Priority::Help, Priority::Safe, Priority::Help]);
        for k in 1..=6 {
            let schedule = priority_schedule(k);
            assert_eq!(schedule.len(), k);
            assert_eq!(schedule[0], Priority::Help);
            for pair in schedule.windows(2) {
                assert_eq!(pair[1], pair[0].opposite());
            }
        }
    }

    #[test]
    fn error_sets_require_consecutive_misses() {
        let p = |id: &str, gold: Polarity, predicted: Polarity| HoldoutPrediction {
            id: id.into(),
            gold,
            predicted,
        };
        let history = vec![
            HoldoutEpoch {
                epoch: 1,
                predictions: vec![
                    p("a", Polarity::Unsafe, Polarity::Unsafe),
                    p("b", Polarity::Safe, Polarity::Unsafe),
                ],
            },
            HoldoutEpoch {
                epoch: 2,
                predictions: vec![
                    p("a", Polarity::Unsafe, Polarity::Safe), // wrong, but only once
                    p("b", Polarity::Safe, Polarity::Unsafe), // wrong twice in a row
                ],
            },
        ];
        let sets = track_error_sets(&history, 2);
        assert!(sets.unsafe_predicted_benign.is_empty());
        assert_eq!(sets.benign_predicted_unsafe.iter().collect::<Vec<_>>(), ["b"]);
        // Wrong only in the second-to-last epoch counts for nothing.
        let history3 = {
            let mut h = history.clone();
            h.push(HoldoutEpoch {
                epoch: 3,
                predictions: vec![
                    p("a", Polarity::Unsafe, Polarity::Unsafe),
                    p("b", Polarity::Safe, Polarity::Safe),
                ],
            });
            h
        };
        assert!(track_error_sets(&history3, 2).is_empty());
        assert!(track_error_sets(&[], 2).is_empty());
    }

    /// Trainer double that records what it saw.
    #[derive(Default)]
    struct RecordingModel {
        epochs: Vec<Vec<TrainRow>>,
    }

    impl TrainableModel for RecordingModel {
        fn predict(&self, _input: &str) -> (Polarity, f64) {
            (Polarity::Safe, 0.5)
        }
        fn fit_epoch(&mut self, rows: &[TrainRow], _lr: f64) -> f64 {
            self.epochs.push(rows.to_vec());
            0.0
        }
    }

    #[test]
    fn first_phase_visits_each_example_exactly_once() {
        let ds = dataset(3, 3);
        let mut model = RecordingModel::default();
        first_phase_train(&ds, &mut model, 1e-5).unwrap();
        assert_eq!(model.epochs.len(), 1);
        assert_eq!(model.epochs[0].len(), 6);
        // Bare text: no priority prefix, no reordering.
        for (row, ex) in model.epochs[0].iter().zip(&ds) {
            assert_eq!(row.text, ex.prompt);
            assert_eq!(row.weight, 1.0);
        }
        assert!(matches!(
            first_phase_train(&[], &mut model, 1e-5),
            Err(CurriculumError::EmptyDataset)
        ));
    }

    #[test]
    fn priority_switching_logs_the_alternation() {
        let ds = dataset(40, 40);
        let mut model = RecordingModel::default();
        let mut cfg = CurriculumConfig::new(3, 99);
        cfg.holdout_fraction = 0.1;
        let run =
            train_with_priority_switching(&ds, &mut model, &PriorityPrompts::default(), &cfg)
                .unwrap();
        let priorities: Vec<Priority> = run.epoch_log.iter().map(|e| e.priority).collect();
        assert_eq!(priorities, [Priority::Help, Priority::Safe, Priority::Help]);
        assert_eq!(run.epoch_log.len(), 3);
        assert_eq!(run.holdout_history.len(), 3);
        // Every training row carries the epoch's priority prefix.
        let prompts = PriorityPrompts::default();
        for (rows, priority) in model.epochs.iter().zip(priorities) {
            assert!(rows.iter().all(|r| r.text.starts_with(prompts.text(priority))));
        }
    }

    #[test]
    fn fresh_noise_per_epoch() {
        let ds = dataset(50, 50);
        let mut model = RecordingModel::default();
        let cfg = CurriculumConfig::new(3, 5);
        let run =
            train_with_priority_switching(&ds, &mut model, &PriorityPrompts::default(), &cfg)
                .unwrap();
        // Epochs 1 and 3 share the priority but not the flip set (fresh seeds).
        assert_ne!(run.epoch_log[0].flipped_ids, run.epoch_log[2].flipped_ids);
    }

    #[test]
    fn remediation_routes_sets_to_their_priorities() {
        let ds = dataset(4, 4);
        let mut sets = ErrorSets::default();
        sets.unsafe_predicted_benign.insert("u1".into());
        sets.benign_predicted_unsafe.insert("b2".into());
        let mut model = RecordingModel::default();
        let cfg = CurriculumConfig::new(1, 0);
        let prompts = PriorityPrompts::default();
        let report = remedial_training(&mut model, &sets, &ds, &prompts, &cfg).unwrap();
        assert_eq!(report.help_pass_ids, ["u1"]);
        assert_eq!(report.safe_pass_ids, ["b2"]);
        assert_eq!(model.epochs.len(), 2);
        assert!(model.epochs[0][0].text.starts_with(&prompts.help));
        assert_eq!(model.epochs[0][0].weight, 2.0);
        assert!(model.epochs[1][0].text.starts_with(&prompts.safe));

        // Empty sets: strict no-op.
        let mut untouched = RecordingModel::default();
        let report =
            remedial_training(&mut untouched, &ErrorSets::default(), &ds, &prompts, &cfg).unwrap();
        assert!(untouched.epochs.is_empty());
        assert!(report.help_pass_ids.is_empty() && report.safe_pass_ids.is_empty());
    }

    #[test]
    fn holdout_split_is_deterministic_and_near_fraction() {
        let ds = dataset(500, 500);
        let cfg = CurriculumConfig::new(1, 42);
        let (train_a, hold_a) = holdout_split(&ds, &cfg);
        let (train_b, hold_b) = holdout_split(&ds, &cfg);
        assert_eq!(
            train_a.iter().map(|e| &e.id).collect::<Vec<_>>(),
            train_b.iter().map(|e| &e.id).collect::<Vec<_>>()
        );
        assert_eq!(hold_a.len(), hold_b.len());
        let fraction = hold_a.len() as f64 / ds.len() as f64;
        assert!((0.05..=0.15).contains(&fraction), "holdout fraction {fraction}");
    }
}
