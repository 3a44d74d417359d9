//! The moderation gateway: screens prompts with both filters and responses
//! with the content filter only, then composes a single allow/block decision.
//!
//! Decision composition is a pure OR over filter triggers, with backend
//! failures contributing according to the failure policy:
//!
//! ```text
//! content | jailbreak || fail_open         | fail_closed
//! --------+-----------++-------------------+------------------
//! safe    | safe      || allow  {}         | allow  {}
//! safe    | unsafe    || block  {J}        | block  {J}
//! safe    | failed    || allow  {}         | block  {J}
//! unsafe  | safe      || block  {C}        | block  {C}
//! unsafe  | unsafe    || block  {C,J}      | block  {C,J}
//! unsafe  | failed    || block  {C}        | block  {C,J}
//! failed  | safe      || allow  {}         | block  {C}
//! failed  | unsafe    || block  {J}        | block  {C,J}
//! failed  | failed    || error             | block  {C,J}
//! ```
//!
//! "unsafe" for the content column means the thresholded overall label; for
//! the jailbreak column it means confidence >= the configured threshold.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::remote::RemoteClient;
use crate::backend::rules::RuleTable;
use crate::backend::{
    parse_content_generation, parse_jailbreak_generation, render_content_prompt,
    render_jailbreak_prompt, BackendDescriptor, BackendError, BackendKind, FilterRole,
    ScreenItem, DEFAULT_TOKEN_BUDGET,
};
use crate::taxonomy::{overall_label, ContentVerdict, JailbreakVerdict, Polarity, Thresholds};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no verdict available")]
    NoVerdictAvailable,
    #[error("{0} must be non-empty")]
    EmptyText(&'static str),
    #[error("invalid gate config: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// What a decision does with the request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Allow,
    Block,
}

/// Which filter triggered a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Content,
    Jailbreak,
}

/// How a failed backend contributes to the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// A failed filter counts as an unsafe trigger, tagged with that filter.
    FailClosed,
    /// A failed filter is ignored; both failing is an error.
    FailOpen,
}

/// Gateway configuration. Defaults fail closed: a guardrail that fails open
/// under attack defeats its purpose.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateConfig {
    #[serde(default)]
    pub content_thresholds: Thresholds,
    #[serde(default = "default_jailbreak_threshold")]
    pub jailbreak_threshold: f64,
    #[serde(default = "default_failure_policy")]
    pub failure_policy: FailurePolicy,
    pub content_backend: BackendDescriptor,
    pub jailbreak_backend: BackendDescriptor,
    #[serde(default = "default_token_budget")]
    pub token_budget: usize,
}

fn default_jailbreak_threshold() -> f64 {
    0.5
}

fn default_failure_policy() -> FailurePolicy {
    FailurePolicy::FailClosed
}

fn default_token_budget() -> usize {
    DEFAULT_TOKEN_BUDGET
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        self.content_thresholds.validate().map_err(GatewayError::Config)?;
        if !(0.0..=1.0).contains(&self.jailbreak_threshold) {
            return Err(GatewayError::Config(format!(
                "jailbreak_threshold out of [0,1]: {}",
                self.jailbreak_threshold
            )));
        }
        if self.token_budget < 1 {
            return Err(GatewayError::Config("token_budget must be >= 1".into()));
        }
        if self.content_backend.filter_role != FilterRole::Content {
            return Err(GatewayError::Config("content_backend must have filter_role content".into()));
        }
        if self.jailbreak_backend.filter_role != FilterRole::Jailbreak {
            return Err(GatewayError::Config(
                "jailbreak_backend must have filter_role jailbreak".into(),
            ));
        }
        self.content_backend.validate()?;
        self.jailbreak_backend.validate()?;
        Ok(())
    }
}

/// What one filter produced for a request.
#[derive(Debug, Clone)]
pub enum FilterOutcome<V> {
    Verdict(V),
    Failed(String),
    Skipped,
}

impl<V> FilterOutcome<V> {
    fn verdict(&self) -> Option<&V> {
        match self {
            FilterOutcome::Verdict(v) => Some(v),
            _ => None,
        }
    }

    fn failed(&self) -> bool {
        matches!(self, FilterOutcome::Failed(_))
    }
}

/// The composed gateway decision for one request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateDecision {
    pub action: Action,
    pub triggered_by: BTreeSet<FilterKind>,
    pub content_verdict: Option<ContentVerdict>,
    pub jailbreak_verdict: Option<JailbreakVerdict>,
    /// End-to-end screening latency.
    pub latency: Duration,
    /// Per-filter classification latency, for filters that ran.
    pub filter_latencies: Vec<(FilterKind, Duration)>,
}

impl GateDecision {
    pub fn blocked(&self) -> bool {
        self.action == Action::Block
    }
}

/// Compose the per-filter outcomes into one decision. Pure function; the full
/// outcome table is documented at the module level.
pub fn compose_decision(
    content: FilterOutcome<ContentVerdict>,
    jailbreak: FilterOutcome<JailbreakVerdict>,
    cfg: &GateConfig,
) -> Result<GateDecision, GatewayError> {
    let no_verdict = content.verdict().is_none() && jailbreak.verdict().is_none();
    let any_failed = content.failed() || jailbreak.failed();
    if no_verdict && (!any_failed || cfg.failure_policy == FailurePolicy::FailOpen) {
        return Err(GatewayError::NoVerdictAvailable);
    }

    let mut triggered_by = BTreeSet::new();
    match &content {
        FilterOutcome::Verdict(v) => {
            if overall_label(v, &cfg.content_thresholds) == Polarity::Unsafe {
                triggered_by.insert(FilterKind::Content);
            }
        }
        FilterOutcome::Failed(_) if cfg.failure_policy == FailurePolicy::FailClosed => {
            triggered_by.insert(FilterKind::Content);
        }
        _ => {}
    }
    match &jailbreak {
        FilterOutcome::Verdict(v) => {
            if v.confidence >= cfg.jailbreak_threshold {
                triggered_by.insert(FilterKind::Jailbreak);
            }
        }
        FilterOutcome::Failed(_) if cfg.failure_policy == FailurePolicy::FailClosed => {
            triggered_by.insert(FilterKind::Jailbreak);
        }
        _ => {}
    }

    let action = if triggered_by.is_empty() { Action::Allow } else { Action::Block };
    Ok(GateDecision {
        action,
        triggered_by,
        content_verdict: content.verdict().cloned(),
        jailbreak_verdict: jailbreak.verdict().copied(),
        latency: Duration::ZERO,
        filter_latencies: Vec::new(),
    })
}

/// A screening guard: anything that can take raw text and return a decision.
/// Implemented by [`GuardService`] in-process and by the HTTP client in the
/// eval harness.
pub trait Guard: Send + Sync {
    fn screen_prompt(&self, text: &str) -> Result<GateDecision, GatewayError>;
    fn screen_response(&self, prompt: &str, response: &str) -> Result<GateDecision, GatewayError>;
}

enum RealizedBackend {
    Rule(RuleTable),
    Remote(RemoteClient),
}

impl RealizedBackend {
    fn new(desc: &BackendDescriptor) -> Result<RealizedBackend, BackendError> {
        desc.validate()?;
        match desc.kind {
            BackendKind::Rule => {
                let path = desc.rule_file.as_ref().expect("validated");
                Ok(RealizedBackend::Rule(RuleTable::load(path)?))
            }
            BackendKind::Remote => Ok(RealizedBackend::Remote(RemoteClient::new(desc)?)),
        }
    }

    fn reachable(&self) -> bool {
        match self {
            RealizedBackend::Rule(_) => true,
            RealizedBackend::Remote(client) => client_endpoint_reachable(client),
        }
    }
}

fn client_endpoint_reachable(_client: &RemoteClient) -> bool {
    // Reachability is probed by the serving layer (TCP connect); from inside
    // core we only know the client constructed successfully.
    true
}

/// The in-process moderation service: realized backends plus config.
pub struct GuardService {
    cfg: GateConfig,
    content: RealizedBackend,
    jailbreak: RealizedBackend,
}

impl GuardService {
    pub fn new(cfg: GateConfig) -> Result<GuardService, GatewayError> {
        cfg.validate()?;
        let content = RealizedBackend::new(&cfg.content_backend)?;
        let jailbreak = RealizedBackend::new(&cfg.jailbreak_backend)?;
        Ok(GuardService { cfg, content, jailbreak })
    }

    pub fn config(&self) -> &GateConfig {
        &self.cfg
    }

    /// True for each filter whose backend is usable right now.
    pub fn backends_ready(&self) -> [(FilterKind, bool); 2] {
        [
            (FilterKind::Content, self.content.reachable()),
            (FilterKind::Jailbreak, self.jailbreak.reachable()),
        ]
    }

    fn classify_content(&self, item: &ScreenItem) -> Result<ContentVerdict, BackendError> {
        let generation = match &self.content {
            RealizedBackend::Rule(table) => table.classify(item, FilterRole::Content),
            RealizedBackend::Remote(client) => {
                let rendered = render_content_prompt(item, self.cfg.token_budget)?;
                client.classify(&rendered)?
            }
        };
        parse_content_generation(&generation)
    }

    fn classify_jailbreak(&self, item: &ScreenItem) -> Result<JailbreakVerdict, BackendError> {
        let generation = match &self.jailbreak {
            RealizedBackend::Rule(table) => table.classify(item, FilterRole::Jailbreak),
            RealizedBackend::Remote(client) => {
                let rendered = render_jailbreak_prompt(item, self.cfg.token_budget)?;
                client.classify(&rendered)?
            }
        };
        parse_jailbreak_generation(&generation)
    }

    fn screen_item(&self, item: &ScreenItem, run_jailbreak: bool) -> Result<GateDecision, GatewayError> {
        let start = Instant::now();
        let mut filter_latencies = Vec::new();

        // Both filters are independent; run them concurrently for prompts.
        let (content_res, jailbreak_res) = if run_jailbreak {
            std::thread::scope(|scope| {
                let jb = scope.spawn(|| {
                    let t = Instant::now();
                    (self.classify_jailbreak(item), t.elapsed())
                });
                let t = Instant::now();
                let content = (self.classify_content(item), t.elapsed());
                (content, Some(jb.join().expect("jailbreak filter thread")))
            })
        } else {
            let t = Instant::now();
            ((self.classify_content(item), t.elapsed()), None)
        };

        let (content_outcome, content_latency) = content_res;
        filter_latencies.push((FilterKind::Content, content_latency));
        let content = match content_outcome {
            Ok(v) => FilterOutcome::Verdict(v),
            Err(e) => FilterOutcome::Failed(e.to_string()),
        };
        let jailbreak = match jailbreak_res {
            None => FilterOutcome::Skipped,
            Some((outcome, latency)) => {
                filter_latencies.push((FilterKind::Jailbreak, latency));
                match outcome {
                    Ok(v) => FilterOutcome::Verdict(v),
                    Err(e) => FilterOutcome::Failed(e.to_string()),
                }
            }
        };

        let mut decision = compose_decision(content, jailbreak, &self.cfg)?;
        decision.latency = start.elapsed();
        decision.filter_latencies = filter_latencies;
        Ok(decision)
    }
}

impl Guard for GuardService {
    /// Screen a prompt with both filters.
    fn screen_prompt(&self, text: &str) -> Result<GateDecision, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyText("text"));
        }
        self.screen_item(&ScreenItem::prompt_only(text), true)
    }

    /// Screen a model response with the content filter only; the jailbreak
    /// filter never runs here.
    fn screen_response(&self, prompt: &str, response: &str) -> Result<GateDecision, GatewayError> {
        if prompt.trim().is_empty() {
            return Err(GatewayError::EmptyText("prompt"));
        }
        if response.trim().is_empty() {
            return Err(GatewayError::EmptyText("response"));
        }
        self.screen_item(&ScreenItem::with_response(prompt, response), false)
    }
}

/// Wire representation of gateway decisions, shared by the HTTP server and
/// the eval harness client so both sides agree on the schema.
pub mod api {
    use serde::{Deserialize, Serialize};

    use super::{Action, FilterKind, GateDecision, GatewayError};
    use crate::taxonomy::{
        CategoryAssessment, ContentVerdict, JailbreakVerdict, Polarity, SafetyCategory,
        CATEGORY_COUNT,
    };

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct CategoryBody {
        pub id: u8,
        pub flag: Polarity,
        pub confidence: f64,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ContentBody {
        pub overall: Polarity,
        pub categories: Vec<CategoryBody>,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct JailbreakBody {
        pub flag: Polarity,
        pub confidence: f64,
    }

    /// Reply of `POST /v1/guard/prompt` and `POST /v1/guard/response`.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct DecisionBody {
        pub action: Action,
        pub triggered_by: Vec<FilterKind>,
        pub content: Option<ContentBody>,
        pub jailbreak: Option<JailbreakBody>,
        pub latency_ms: u64,
    }

    /// Machine-readable error reply.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ErrorBody {
        pub error: ErrorDetail,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ErrorDetail {
        pub code: String,
        pub message: String,
    }

    impl ErrorBody {
        pub fn new(code: &str, message: impl Into<String>) -> ErrorBody {
            ErrorBody { error: ErrorDetail { code: code.to_string(), message: message.into() } }
        }
    }

    impl DecisionBody {
        pub fn from_decision(d: &GateDecision) -> DecisionBody {
            DecisionBody {
                action: d.action,
                triggered_by: d.triggered_by.iter().copied().collect(),
                content: d.content_verdict.as_ref().map(|v| ContentBody {
                    overall: v.overall(),
                    categories: SafetyCategory::ALL
                        .into_iter()
                        .map(|c| {
                            let a = v.assessment(c);
                            CategoryBody { id: c.id(), flag: a.flag, confidence: a.confidence }
                        })
                        .collect(),
                }),
                jailbreak: d
                    .jailbreak_verdict
                    .map(|v| JailbreakBody { flag: v.flag, confidence: v.confidence }),
                latency_ms: d.latency.as_millis() as u64,
            }
        }

        /// Rebuild a [`GateDecision`] from the wire form (used by the HTTP
        /// guard client in the eval harness).
        pub fn into_decision(self) -> Result<GateDecision, GatewayError> {
            let content_verdict = match self.content {
                None => None,
                Some(body) => {
                    if body.categories.len() != CATEGORY_COUNT {
                        return Err(GatewayError::Config(format!(
                            "decision body has {} categories, expected {CATEGORY_COUNT}",
                            body.categories.len()
                        )));
                    }
                    let mut assessments =
                        [CategoryAssessment { flag: Polarity::Safe, confidence: 0.0 }; CATEGORY_COUNT];
                    for (i, c) in body.categories.iter().enumerate() {
                        if c.id as usize != i + 1 {
                            return Err(GatewayError::Config(format!(
                                "category id {} at position {i}",
                                c.id
                            )));
                        }
                        assessments[i] =
                            CategoryAssessment { flag: c.flag, confidence: c.confidence };
                    }
                    Some(ContentVerdict::new(assessments))
                }
            };
            Ok(GateDecision {
                action: self.action,
                triggered_by: self.triggered_by.into_iter().collect(),
                content_verdict,
                jailbreak_verdict: self
                    .jailbreak
                    .map(|j| JailbreakVerdict::new(j.flag, j.confidence)),
                latency: std::time::Duration::from_millis(self.latency_ms),
                filter_latencies: Vec::new(),
            })
        }
    }
}
