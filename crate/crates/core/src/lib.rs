//! Dual-filter moderation toolkit for LLM traffic.
//!
//! The crate is organized around two classifier roles — a five-category
//! content filter applied to prompts and responses, and a binary jailbreak
//! filter applied to prompts only — plus the machinery to run them as a
//! gateway, evaluate them, curate training data, and train a reference
//! model with the priority-switching curriculum.
//!
//! Modules:
//! - [`taxonomy`] — safety categories, verdicts, and the label-token scheme
//! - [`backend`] — prompt templates, generation parsing, confidence scores,
//!   the deterministic rule backend, and the remote inference client
//! - [`gateway`] — decision composition and the screening service
//! - [`metrics`] — F1/FNR/FPR, AUPRC, normalized partial AUROC, ASR
//! - [`eval`] — JSONL datasets, benchmark runs, red-team generation
//! - [`curation`] — translation refinement, benign/harmful blending,
//!   relabeling, detox, all against pluggable text clients
//! - [`curriculum`] — label-noise injection, priority switching, error-set
//!   remediation, and a toy trainable classifier

pub mod backend;
pub mod curation;
pub mod curriculum;
pub mod eval;
pub mod gateway;
pub mod metrics;
pub mod taxonomy;
pub mod util;

pub use backend::{BackendDescriptor, BackendError, BackendKind, FilterRole, Generation, ScreenItem};
pub use eval::{EvalMode, EvalReport, LabeledExample};
pub use gateway::{Action, FilterKind, GateConfig, GateDecision, GatewayError, Guard, GuardService};
pub use metrics::{ConfusionCounts, MetricsError, ScoredSample};
pub use taxonomy::{ContentVerdict, JailbreakVerdict, LabelToken, Polarity, SafetyCategory, Thresholds};
