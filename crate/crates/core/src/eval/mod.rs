//! Benchmark execution over the canonical JSONL datasets.
//!
//! A benchmark classifies every example through an [`EvalSubject`] — a filter
//! backend, the in-process guard service, or a live gateway over HTTP — then
//! computes discrete metrics from the flags and ranking metrics from the
//! scores. Backend failures are a third outcome class, counted and reported,
//! never silently dropped or folded into safe/unsafe.

pub mod dataset;
pub mod redteam;

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::remote::RemoteClient;
use crate::backend::rules::RuleTable;
use crate::backend::{
    parse_content_generation, parse_jailbreak_generation, render_content_prompt,
    render_jailbreak_prompt, BackendDescriptor, BackendKind, FilterRole, ScreenItem,
};
use crate::gateway::{api::DecisionBody, GateDecision, GatewayError, Guard};
use crate::metrics::{
    auprc, confusion, f1, fnr, fpr, pauroc_normalized, ConfusionCounts, MetricValue,
    MetricsError, ScoredSample,
};
use crate::taxonomy::Polarity;

pub use dataset::{load_dataset, parse_dataset, write_dataset, LabeledExample};

/// FPR range for the partial AUROC reported in benchmarks.
pub const PAUROC_FPR_MAX: f64 = 0.1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{path} line {line}: {reason}")]
    DatasetLine { path: String, line: usize, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("behavior list is empty")]
    EmptyBehaviors,
    #[error("attack type 2 requires a rephraser")]
    MissingRephraser,
    #[error("attack type 3 requires a template library")]
    MissingTemplates,
    #[error("subject failure on example {id}: {reason}")]
    Subject { id: String, reason: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Whether the benchmark screens prompts or prompt+response pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Prompt,
    Response,
}

/// One classified example: a discrete flag plus a ranking score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub flag: Polarity,
    pub score: f64,
}

/// Anything a benchmark can be run against.
pub trait EvalSubject: Send + Sync {
    fn assess(&self, example: &LabeledExample, mode: EvalMode) -> Result<Assessment, String>;
    /// Short description recorded in reports.
    fn descriptor(&self) -> String;
}

fn item_for(example: &LabeledExample, mode: EvalMode) -> Result<ScreenItem, String> {
    let mut item = match mode {
        EvalMode::Prompt => ScreenItem::prompt_only(example.prompt.clone()),
        EvalMode::Response => {
            let response =
                example.response.clone().ok_or("example has no response in response mode")?;
            ScreenItem::with_response(example.prompt.clone(), response)
        }
    };
    item.language = example.language.clone();
    Ok(item)
}

/// A single filter backend evaluated directly, without gateway composition.
pub enum FilterSubject {
    RuleContent(RuleTable),
    RuleJailbreak(RuleTable),
    RemoteContent { client: RemoteClient, token_budget: usize },
    RemoteJailbreak { client: RemoteClient, token_budget: usize },
}

impl FilterSubject {
    pub fn from_descriptor(desc: &BackendDescriptor, token_budget: usize) -> Result<FilterSubject, EvalError> {
        desc.validate().map_err(GatewayError::from)?;
        Ok(match (desc.kind, desc.filter_role) {
            (BackendKind::Rule, FilterRole::Content) => {
                FilterSubject::RuleContent(RuleTable::load(desc.rule_file.as_ref().unwrap()).map_err(GatewayError::from)?)
            }
            (BackendKind::Rule, FilterRole::Jailbreak) => {
                FilterSubject::RuleJailbreak(RuleTable::load(desc.rule_file.as_ref().unwrap()).map_err(GatewayError::from)?)
            }
            (BackendKind::Remote, FilterRole::Content) => FilterSubject::RemoteContent {
                client: RemoteClient::new(desc).map_err(GatewayError::from)?,
                token_budget,
            },
            (BackendKind::Remote, FilterRole::Jailbreak) => FilterSubject::RemoteJailbreak {
                client: RemoteClient::new(desc).map_err(GatewayError::from)?,
                token_budget,
            },
        })
    }
}

impl EvalSubject for FilterSubject {
    fn assess(&self, example: &LabeledExample, mode: EvalMode) -> Result<Assessment, String> {
        let item = item_for(example, mode)?;
        match self {
            FilterSubject::RuleContent(table) => {
                let v = parse_content_generation(&table.classify(&item, FilterRole::Content))
                    .map_err(|e| e.to_string())?;
                Ok(Assessment { flag: v.overall(), score: v.max_confidence() })
            }
            FilterSubject::RuleJailbreak(table) => {
                let v = parse_jailbreak_generation(&table.classify(&item, FilterRole::Jailbreak))
                    .map_err(|e| e.to_string())?;
                Ok(Assessment { flag: v.flag, score: v.confidence })
            }
            FilterSubject::RemoteContent { client, token_budget } => {
                let rendered =
                    render_content_prompt(&item, *token_budget).map_err(|e| e.to_string())?;
                let v = parse_content_generation(&client.classify(&rendered).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                Ok(Assessment { flag: v.overall(), score: v.max_confidence() })
            }
            FilterSubject::RemoteJailbreak { client, token_budget } => {
                let rendered =
                    render_jailbreak_prompt(&item, *token_budget).map_err(|e| e.to_string())?;
                let v = parse_jailbreak_generation(&client.classify(&rendered).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                Ok(Assessment { flag: v.flag, score: v.confidence })
            }
        }
    }

    fn descriptor(&self) -> String {
        match self {
            FilterSubject::RuleContent(t) => format!("rule-content(fingerprint={:016x})", t.fingerprint()),
            FilterSubject::RuleJailbreak(t) => {
                format!("rule-jailbreak(fingerprint={:016x})", t.fingerprint())
            }
            FilterSubject::RemoteContent { .. } => "remote-content".to_string(),
            FilterSubject::RemoteJailbreak { .. } => "remote-jailbreak".to_string(),
        }
    }
}

/// Evaluate a full guard (both filters composed): block counts as the unsafe
/// prediction; the score is the strongest available confidence.
pub struct GuardSubject<'a> {
    pub guard: &'a dyn Guard,
    pub name: String,
}

impl<'a> GuardSubject<'a> {
    pub fn new(guard: &'a dyn Guard, name: impl Into<String>) -> GuardSubject<'a> {
        GuardSubject { guard, name: name.into() }
    }
}

fn decision_score(d: &GateDecision) -> f64 {
    let content = d.content_verdict.as_ref().map(|v| v.max_confidence()).unwrap_or(0.0);
    let jailbreak = d.jailbreak_verdict.map(|v| v.confidence).unwrap_or(0.0);
    content.max(jailbreak)
}

impl EvalSubject for GuardSubject<'_> {
    fn assess(&self, example: &LabeledExample, mode: EvalMode) -> Result<Assessment, String> {
        let decision = match mode {
            EvalMode::Prompt => self.guard.screen_prompt(&example.prompt),
            EvalMode::Response => {
                let response =
                    example.response.as_deref().ok_or("example has no response in response mode")?;
                self.guard.screen_response(&example.prompt, response)
            }
        }
        .map_err(|e| e.to_string())?;
        let flag = if decision.blocked() { Polarity::Unsafe } else { Polarity::Safe };
        Ok(Assessment { flag, score: decision_score(&decision) })
    }

    fn descriptor(&self) -> String {
        self.name.clone()
    }
}

/// HTTP client for a live gateway, speaking the `/v1/guard/*` API.
pub struct HttpGuardClient {
    agent: ureq::Agent,
    base: String,
    bearer: Option<String>,
}

impl HttpGuardClient {
    pub fn new(base: impl Into<String>) -> HttpGuardClient {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(30)))
            .build()
            .into();
        HttpGuardClient { agent, base: base.into(), bearer: None }
    }

    pub fn with_bearer(mut self, token: impl Into<String>) -> HttpGuardClient {
        self.bearer = Some(token.into());
        self
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<GateDecision, GatewayError> {
        let url = format!("{}{path}", self.base.trim_end_matches('/'));
        let mut request = self.agent.post(&url);
        if let Some(token) = &self.bearer {
            request = request.header("authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) => {
                GatewayError::Backend(crate::backend::BackendError::HttpStatus(code))
            }
            ureq::Error::Timeout(_) => GatewayError::Backend(crate::backend::BackendError::Timeout),
            other => GatewayError::Backend(crate::backend::BackendError::Transport(other.to_string())),
        })?;
        let decision_body: DecisionBody = response.body_mut().read_json().map_err(|e| {
            GatewayError::Backend(crate::backend::BackendError::Schema(e.to_string()))
        })?;
        decision_body.into_decision()
    }

    /// Probe `/healthz`; returns the raw body on success.
    pub fn health(&self) -> Result<String, GatewayError> {
        let url = format!("{}/healthz", self.base.trim_end_matches('/'));
        let mut response = self.agent.get(&url).call().map_err(|e| {
            GatewayError::Backend(crate::backend::BackendError::Transport(e.to_string()))
        })?;
        response.body_mut().read_to_string().map_err(|e| {
            GatewayError::Backend(crate::backend::BackendError::Transport(e.to_string()))
        })
    }
}

impl Guard for HttpGuardClient {
    fn screen_prompt(&self, text: &str) -> Result<GateDecision, GatewayError> {
        self.post("/v1/guard/prompt", serde_json::json!({ "text": text }))
    }

    fn screen_response(&self, prompt: &str, response: &str) -> Result<GateDecision, GatewayError> {
        self.post(
            "/v1/guard/response",
            serde_json::json!({ "prompt": prompt, "response": response }),
        )
    }
}

/// Outcome of classifying one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionOutcome {
    Classified { flag: Polarity, score: f64 },
    Failed { reason: String },
}

/// Raw per-example record persisted alongside the metrics so every report is
/// recomputable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPrediction {
    pub id: String,
    pub language: String,
    pub gold: Polarity,
    #[serde(flatten)]
    pub outcome: PredictionOutcome,
}

/// Metrics for one language slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSlice {
    pub confusion: ConfusionCounts,
    pub f1: f64,
    pub fnr: f64,
    pub fpr: f64,
}

/// A benchmark report: metrics plus the raw predictions they derive from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub subject: String,
    pub mode: EvalMode,
    pub timestamp_unix_s: u64,
    pub total: u64,
    pub failures: u64,
    /// False when the failure rate exceeded the configured maximum.
    pub valid: bool,
    pub confusion: ConfusionCounts,
    pub f1: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub auprc: Option<f64>,
    pub pauroc: Option<f64>,
    pub per_language: BTreeMap<String, LanguageSlice>,
    pub predictions: Vec<RawPrediction>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub mode: EvalMode,
    /// Reports with a higher failure fraction are marked invalid.
    pub max_failure_rate: f64,
    /// Fan-out width for classification; 1 = sequential.
    pub parallelism: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> BenchmarkOptions {
        BenchmarkOptions { mode: EvalMode::Prompt, max_failure_rate: 0.01, parallelism: 1 }
    }
}

/// Derived metric set, recomputable from raw predictions alone.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedMetrics {
    pub confusion: ConfusionCounts,
    pub f1: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub auprc: Option<f64>,
    pub pauroc: Option<f64>,
    pub per_language: BTreeMap<String, LanguageSlice>,
}

/// Recompute all metrics from raw predictions. `run_benchmark` itself goes
/// through this function, so replaying a persisted report reproduces the
/// stored values bit for bit.
pub fn derive_metrics(predictions: &[RawPrediction]) -> DerivedMetrics {
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    let mut samples = Vec::new();
    let mut by_language: BTreeMap<String, (Vec<Polarity>, Vec<Polarity>)> = BTreeMap::new();
    for p in predictions {
        if let PredictionOutcome::Classified { flag, score } = &p.outcome {
            preds.push(*flag);
            golds.push(p.gold);
            samples.push(ScoredSample::new(*score, p.gold));
            let slot = by_language.entry(p.language.clone()).or_default();
            slot.0.push(*flag);
            slot.1.push(p.gold);
        }
    }
    let counts = confusion(&preds, &golds).expect("equal lengths by construction");
    let per_language = by_language
        .into_iter()
        .map(|(lang, (p, g))| {
            let c = confusion(&p, &g).expect("equal lengths");
            (lang, LanguageSlice { confusion: c, f1: f1(&c), fnr: fnr(&c), fpr: fpr(&c) })
        })
        .collect();
    DerivedMetrics {
        confusion: counts,
        f1: f1(&counts),
        fnr: fnr(&counts),
        fpr: fpr(&counts),
        auprc: auprc(&samples).ok(),
        pauroc: pauroc_normalized(&samples, PAUROC_FPR_MAX).ok(),
        per_language,
    }
}

/// Classify every example and assemble the report.
pub fn run_benchmark(
    subject: &dyn EvalSubject,
    examples: &[LabeledExample],
    dataset_id: &str,
    opts: &BenchmarkOptions,
) -> Result<EvalReport, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }

    let outcomes = classify_all(subject, examples, opts);
    let predictions: Vec<RawPrediction> = examples
        .iter()
        .zip(outcomes)
        .map(|(ex, outcome)| RawPrediction {
            id: ex.id.clone(),
            language: ex.language.clone(),
            gold: ex.gold,
            outcome,
        })
        .collect();

    let failures =
        predictions.iter().filter(|p| matches!(p.outcome, PredictionOutcome::Failed { .. })).count()
            as u64;
    let total = predictions.len() as u64;
    let derived = derive_metrics(&predictions);
    Ok(EvalReport {
        dataset_id: dataset_id.to_string(),
        subject: subject.descriptor(),
        mode: opts.mode,
        timestamp_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_secs(),
        total,
        failures,
        valid: (failures as f64) <= opts.max_failure_rate * total as f64,
        confusion: derived.confusion,
        f1: derived.f1,
        fnr: derived.fnr,
        fpr: derived.fpr,
        auprc: derived.auprc,
        pauroc: derived.pauroc,
        per_language: derived.per_language,
        predictions,
    })
}

fn classify_all(
    subject: &dyn EvalSubject,
    examples: &[LabeledExample],
    opts: &BenchmarkOptions,
) -> Vec<PredictionOutcome> {
    let to_outcome = |ex: &LabeledExample| match subject.assess(ex, opts.mode) {
        Ok(a) => PredictionOutcome::Classified { flag: a.flag, score: a.score },
        Err(reason) => PredictionOutcome::Failed { reason },
    };
    if opts.parallelism <= 1 || examples.len() <= 1 {
        return examples.iter().map(to_outcome).collect();
    }
    // Chunked fan-out over scoped threads; aggregation stays order-stable
    // because each chunk writes its own slice of the result.
    let chunk = examples.len().div_ceil(opts.parallelism);
    let mut out: Vec<Option<PredictionOutcome>> = vec![None; examples.len()];
    std::thread::scope(|scope| {
        for (slot, input) in out.chunks_mut(chunk).zip(examples.chunks(chunk)) {
            scope.spawn(move || {
                for (o, ex) in slot.iter_mut().zip(input) {
                    *o = Some(to_outcome(ex));
                }
            });
        }
    });
    out.into_iter().map(|o| o.expect("all chunks filled")).collect()
}

impl EvalReport {
    pub fn metric_values(&self) -> Vec<MetricValue> {
        let classified = self.total - self.failures;
        let mut out = vec![
            MetricValue::new("f1", self.f1, classified),
            MetricValue::new("fnr", self.fnr, classified),
            MetricValue::new("fpr", self.fpr, classified),
        ];
        if let Some(v) = self.auprc {
            out.push(MetricValue::new("auprc", v, classified));
        }
        if let Some(v) = self.pauroc {
            out.push(MetricValue::new("pauroc", v, classified));
        }
        out
    }

    /// Plain-text table in the "F1 / FNR / FPR" cell layout.
    pub fn format_table(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>6}  {:^21}  {:>6}  {:>6}  {:>8}\n",
            "dataset", "n", "F1 / FNR / FPR", "AUPRC", "pAUROC", "failures"
        ));
        out.push_str(&format!(
            "{:<24} {:>6}  {:>5.3} / {:>5.3} / {:>5.3}  {:>6}  {:>6}  {:>8}{}\n",
            self.dataset_id,
            self.total,
            self.f1,
            self.fnr,
            self.fpr,
            fmt_opt(self.auprc),
            fmt_opt(self.pauroc),
            self.failures,
            if self.valid { "" } else { "  [INVALID]" },
        ));
        for (lang, slice) in &self.per_language {
            out.push_str(&format!(
                "{:<24} {:>6}  {:>5.3} / {:>5.3} / {:>5.3}\n",
                format!("  [{lang}]"),
                slice.confusion.total(),
                slice.f1,
                slice.fnr,
                slice.fpr,
            ));
        }
        out
    }
}
