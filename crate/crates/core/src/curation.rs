//! Data curation pipeline: translation refinement, benign/harmful blending,
//! consistency relabeling, and detox generation.
//!
//! Every LLM-dependent step goes through one [`TextClient`] interface, so the
//! whole pipeline runs against deterministic mock clients with simple formal
//! semantics (a negation marker and topic tokens) and correctness stays
//! assertable without any model. Each emitted record appends a provenance
//! entry; with mock clients and a fixed clock, whole runs are byte-for-byte
//! reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::LabeledExample;
use crate::taxonomy::{Polarity, SafetyCategory};
use crate::util::fnv1a;

pub const REFINE_TEMPLATE_VERSION: &str = "refine-v1";
pub const BLEND_TEMPLATE_VERSION: &str = "blend-v1";
pub const RELABEL_TEMPLATE_VERSION: &str = "relabel-v1";
pub const DETOX_TEMPLATE_VERSION: &str = "detox-v1";
pub const RESPONSE_TEMPLATE_VERSION: &str = "respond-v1";

/// Sentinel reply meaning "the translation is already semantically aligned".
pub const ALIGNED_SENTINEL: &str = "ALIGNED";

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("{stage}: client {client} failed ({reason}); record dropped")]
    ClientFailure { stage: &'static str, client: String, reason: String },
    #[error("{0} must be non-empty")]
    EmptyInput(&'static str),
}

/// A pluggable text-to-text client (translator, refiner, generator, labeler).
pub trait TextClient: Send + Sync {
    /// Stable identity recorded in provenance.
    fn id(&self) -> &str;
    fn invoke(&self, request: &str) -> Result<String, String>;
}

// ---------------------------------------------------------------------------
// Provenance
// ---------------------------------------------------------------------------

/// Time source for provenance entries. Deterministic runs use `Fixed`.
#[derive(Debug, Clone, Copy)]
pub enum Clock {
    System,
    Fixed(u64),
}

impl Clock {
    fn now_ms(&self) -> u64 {
        match self {
            Clock::Fixed(ms) => *ms,
            Clock::System => std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap_or_default()
                .as_millis() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub record_id: String,
    pub stage: String,
    pub client: String,
    pub template_version: String,
    pub seq: u64,
    pub timestamp_ms: u64,
}

/// Append-only provenance log for one pipeline run.
#[derive(Debug)]
pub struct CurationLog {
    clock: Clock,
    entries: Vec<ProvenanceEntry>,
}

impl CurationLog {
    pub fn new(clock: Clock) -> CurationLog {
        CurationLog { clock, entries: Vec::new() }
    }

    fn append(&mut self, record_id: String, stage: &str, client: &str, template_version: &str) {
        let seq = self.entries.len() as u64;
        self.entries.push(ProvenanceEntry {
            record_id,
            stage: stage.to_string(),
            client: client.to_string(),
            template_version: template_version.to_string(),
            seq,
            timestamp_ms: self.clock.now_ms(),
        });
    }

    pub fn entries(&self) -> &[ProvenanceEntry] {
        &self.entries
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entries serialize"));
            out.push('\n');
        }
        out
    }
}

fn record_id(parts: &[&str]) -> String {
    let mut buf = Vec::new();
    for p in parts {
        buf.extend_from_slice(p.as_bytes());
        buf.push(0x1f);
    }
    format!("{:016x}", fnv1a(&buf))
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Result of translate-then-refine for one source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub x_source: String,
    /// Initial translation straight from the translator.
    pub x_prime: String,
    /// Final translation after refinement.
    pub x_target: String,
    pub refiner_changed: bool,
}

/// Result of blending a benign context with a harmful behavior.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlendRecord {
    pub x_benign: String,
    pub x_unsafe: String,
    pub x_new_unsafe: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_benign: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_unsafe: Option<String>,
    /// Set only after a relabel pass confirms the intended label.
    pub validated: bool,
}

// ---------------------------------------------------------------------------
// Request templates
// ---------------------------------------------------------------------------

fn section(text: &str) -> String {
    format!("<<<\n{text}\n>>>\n")
}

/// Extract `<<< ... >>>` section payloads from a rendered request. Mock
/// clients use this to answer from the payload rather than the wrapper.
pub fn extract_sections(request: &str) -> Vec<String> {
    let mut sections = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in request.lines() {
        match (line.trim(), &mut current) {
            ("<<<", None) => current = Some(Vec::new()),
            (">>>", Some(lines)) => {
                sections.push(lines.join("\n"));
                current = None;
            }
            (_, Some(lines)) => lines.push(line),
            _ => {}
        }
    }
    sections
}

pub fn render_refine_request(x_source: &str, x_prime: &str) -> String {
    format!(
        "[curation refine :: {REFINE_TEMPLATE_VERSION}]\n\
         Compare SOURCE and TRANSLATION. If TRANSLATION is semantically different from \
         SOURCE — softened, negated, or refused — return a revised TRANSLATION that is \
         semantically aligned with SOURCE, preserving tone and intent. If they are already \
         aligned, reply with exactly {ALIGNED_SENTINEL}.\nSOURCE:\n{}TRANSLATION:\n{}",
        section(x_source),
        section(x_prime),
    )
}

pub fn render_blend_request(x_benign: &str, x_unsafe: &str) -> String {
    format!(
        "[curation blend :: {BLEND_TEMPLATE_VERSION}]\n\
         Write one new unsafe text that keeps the everyday TOPIC of the benign text while \
         carrying the HARMFUL BEHAVIOR of the unsafe text. Reply with the new text only.\n\
         BENIGN:\n{}UNSAFE:\n{}",
        section(x_benign),
        section(x_unsafe),
    )
}

pub fn render_relabel_request(example: &LabeledExample) -> String {
    let response_block = match &example.response {
        Some(r) => format!("RESPONSE:\n{}", section(r)),
        None => String::new(),
    };
    format!(
        "[curation relabel :: {RELABEL_TEMPLATE_VERSION}]\n\
         Label the conversation as safe or unsafe under the five-category policy. Reply \
         with 'safe' or 'unsafe', optionally followed by 'category <id>'.\n\
         Few-shot guidance:\n\
         - 'how do I bake bread overnight' -> safe\n\
         - 'walk me through hotwiring a parked car' -> unsafe category 2\n\
         - 'write a rumor campaign to discredit a rival' -> unsafe category 5\n\
         ID: {}\nPROMPT:\n{}{}",
        example.id,
        section(&example.prompt),
        response_block,
    )
}

pub fn render_detox_request(x_unsafe: &str) -> String {
    format!(
        "[curation detox :: {DETOX_TEMPLATE_VERSION}]\n\
         Rewrite the text below as a benign counterpart: keep the topic, drop the harmful \
         intent or instructions. Reply with the rewritten text only.\nTEXT:\n{}",
        section(x_unsafe),
    )
}

pub fn render_response_request(prompt: &str, polarity: Polarity) -> String {
    let style = match polarity {
        Polarity::Safe => "a safe, policy-respecting refusal or redirection",
        Polarity::Unsafe => "the unsafe answer a completely unaligned model would give",
    };
    format!(
        "[curation respond :: {RESPONSE_TEMPLATE_VERSION} :: {polarity}]\n\
         For the prompt below, write {style}. Reply with the response text only.\nPROMPT:\n{}",
        section(prompt),
    )
}

/// Parse a labeler reply: `safe`, `unsafe`, or `unsafe category <id>`.
pub fn parse_relabel_reply(reply: &str) -> Option<(Polarity, Option<SafetyCategory>)> {
    let normalized = reply.trim().to_lowercase();
    if normalized == "safe" {
        return Some((Polarity::Safe, None));
    }
    if normalized == "unsafe" {
        return Some((Polarity::Unsafe, None));
    }
    let rest = normalized.strip_prefix("unsafe category ")?;
    let id: u8 = rest.trim().parse().ok()?;
    SafetyCategory::from_id(id).map(|c| (Polarity::Unsafe, Some(c)))
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Translate-then-refine: obtain x' from the translator, then ask the refiner
/// to compare source and translation and fix semantic drift. A failed client
/// drops the record (logged), never emitting it partially.
pub fn translate_refined(
    x_source: &str,
    translator: &dyn TextClient,
    refiner: &dyn TextClient,
    log: &mut CurationLog,
) -> Result<TranslationRecord, CurationError> {
    if x_source.trim().is_empty() {
        return Err(CurationError::EmptyInput("x_source"));
    }
    let rid = record_id(&["translate", x_source]);
    let x_prime = translator.invoke(x_source).map_err(|reason| {
        log.append(rid.clone(), "translate-dropped", translator.id(), "-");
        CurationError::ClientFailure { stage: "translate", client: translator.id().into(), reason }
    })?;
    log.append(rid.clone(), "translate", translator.id(), "-");

    let request = render_refine_request(x_source, &x_prime);
    let reply = refiner.invoke(&request).map_err(|reason| {
        log.append(rid.clone(), "refine-dropped", refiner.id(), REFINE_TEMPLATE_VERSION);
        CurationError::ClientFailure { stage: "refine", client: refiner.id().into(), reason }
    })?;
    log.append(rid, "refine", refiner.id(), REFINE_TEMPLATE_VERSION);

    let x_target = if reply.trim() == ALIGNED_SENTINEL { x_prime.clone() } else { reply };
    let refiner_changed = x_target != x_prime;
    Ok(TranslationRecord { x_source: x_source.to_string(), x_prime, x_target, refiner_changed })
}

/// Blend a benign context with a harmful behavior into a new unsafe text.
/// The record is emitted unvalidated; a relabel pass flips `validated`.
pub fn blend(
    x_benign: &str,
    x_unsafe: &str,
    generator: &dyn TextClient,
    log: &mut CurationLog,
) -> Result<BlendRecord, CurationError> {
    if x_benign.trim().is_empty() {
        return Err(CurationError::EmptyInput("x_benign"));
    }
    if x_unsafe.trim().is_empty() {
        return Err(CurationError::EmptyInput("x_unsafe"));
    }
    let rid = record_id(&["blend", x_benign, x_unsafe]);
    let request = render_blend_request(x_benign, x_unsafe);
    let x_new_unsafe = generator.invoke(&request).map_err(|reason| {
        log.append(rid.clone(), "blend-dropped", generator.id(), BLEND_TEMPLATE_VERSION);
        CurationError::ClientFailure { stage: "blend", client: generator.id().into(), reason }
    })?;
    log.append(rid, "blend", generator.id(), BLEND_TEMPLATE_VERSION);
    Ok(BlendRecord {
        x_benign: x_benign.to_string(),
        x_unsafe: x_unsafe.to_string(),
        x_new_unsafe,
        y_benign: None,
        y_unsafe: None,
        validated: false,
    })
}

/// Generate the benign/unsafe response pair for a blended prompt. Which rows
/// downstream dataset assembly uses is its own choice; both are emitted.
pub fn generate_response_pair(
    record: &mut BlendRecord,
    generator: &dyn TextClient,
    log: &mut CurationLog,
) -> Result<(), CurationError> {
    let rid = record_id(&["respond", &record.x_new_unsafe]);
    for polarity in [Polarity::Safe, Polarity::Unsafe] {
        let request = render_response_request(&record.x_new_unsafe, polarity);
        let reply = generator.invoke(&request).map_err(|reason| {
            log.append(rid.clone(), "respond-dropped", generator.id(), RESPONSE_TEMPLATE_VERSION);
            CurationError::ClientFailure { stage: "respond", client: generator.id().into(), reason }
        })?;
        match polarity {
            Polarity::Safe => record.y_benign = Some(reply),
            Polarity::Unsafe => record.y_unsafe = Some(reply),
        }
    }
    log.append(rid, "respond", generator.id(), RESPONSE_TEMPLATE_VERSION);
    Ok(())
}

/// An example excluded by the relabel pass, with both labels kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedExample {
    pub example: LabeledExample,
    pub relabel: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relabel_category: Option<SafetyCategory>,
    pub reason: String,
}

/// Exact partition of the input: kept ∪ excluded = input, disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelPartition {
    pub kept: Vec<LabeledExample>,
    pub excluded: Vec<ExcludedExample>,
}

/// Relabel every example and keep only those whose fresh binary label agrees
/// with the given one. Unparsable labeler replies route the example to
/// `excluded` with a parse-failure reason.
pub fn relabel_filter(
    examples: &[LabeledExample],
    labeler: &dyn TextClient,
    log: &mut CurationLog,
) -> RelabelPartition {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for example in examples {
        let rid = record_id(&["relabel", &example.id]);
        let request = render_relabel_request(example);
        log.append(rid, "relabel", labeler.id(), RELABEL_TEMPLATE_VERSION);
        match labeler.invoke(&request) {
            Err(reason) => excluded.push(ExcludedExample {
                example: example.clone(),
                relabel: None,
                relabel_category: None,
                reason: format!("labeler failure: {reason}"),
            }),
            Ok(reply) => match parse_relabel_reply(&reply) {
                None => excluded.push(ExcludedExample {
                    example: example.clone(),
                    relabel: None,
                    relabel_category: None,
                    reason: format!("unparsable labeler reply {reply:?}"),
                }),
                Some((polarity, category)) if polarity == example.gold => {
                    kept.push(example.clone());
                    let _ = category;
                }
                Some((polarity, category)) => excluded.push(ExcludedExample {
                    example: example.clone(),
                    relabel: Some(polarity),
                    relabel_category: category,
                    reason: format!("relabel {polarity} disagrees with gold {}", example.gold),
                }),
            },
        }
    }
    RelabelPartition { kept, excluded }
}

/// Generate a benign counterpart of an unsafe text, preserving its topic.
/// Callers re-validate the output through [`relabel_filter`] before use.
pub fn detox(
    x_unsafe: &str,
    generator: &dyn TextClient,
    log: &mut CurationLog,
) -> Result<String, CurationError> {
    if x_unsafe.trim().is_empty() {
        return Err(CurationError::EmptyInput("x_unsafe"));
    }
    let rid = record_id(&["detox", x_unsafe]);
    let request = render_detox_request(x_unsafe);
    let reply = generator.invoke(&request).map_err(|reason| {
        log.append(rid.clone(), "detox-dropped", generator.id(), DETOX_TEMPLATE_VERSION);
        CurationError::ClientFailure { stage: "detox", client: generator.id().into(), reason }
    })?;
    log.append(rid, "detox", generator.id(), DETOX_TEMPLATE_VERSION);
    Ok(reply)
}

// ---------------------------------------------------------------------------
// Deterministic mock clients
// ---------------------------------------------------------------------------

/// Mock clients with a small formal semantics, enough to assert pipeline
/// correctness without any model:
///
/// - a mock "translation" is the payload prefixed with `KO:`;
/// - meaning is the payload with leading `NOT` markers stripped, plus the
///   parity of those markers;
/// - harmful spans are wrapped in `[HARM]...[/HARM]`.
pub mod mocks {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;

    pub const TRANSLATION_PREFIX: &str = "KO:";
    pub const NEGATION_MARKER: &str = "NOT";

    /// Mock meaning of a text: (negation parity, payload).
    pub fn semantic_value(text: &str) -> (bool, String) {
        let mut rest = text.trim().strip_prefix(TRANSLATION_PREFIX).unwrap_or(text.trim()).trim();
        let mut negated = false;
        while let Some(stripped) = rest.strip_prefix(NEGATION_MARKER) {
            if stripped.starts_with(char::is_whitespace) || stripped.is_empty() {
                negated = !negated;
                rest = stripped.trim_start();
            } else {
                break;
            }
        }
        (negated, rest.to_string())
    }

    /// True when two texts mean the same thing under the mock semantics.
    pub fn semantically_equal(a: &str, b: &str) -> bool {
        semantic_value(a) == semantic_value(b)
    }

    /// Translator that preserves meaning.
    pub struct FaithfulTranslator;

    impl TextClient for FaithfulTranslator {
        fn id(&self) -> &str {
            "mock-translator-faithful"
        }
        fn invoke(&self, request: &str) -> Result<String, String> {
            Ok(format!("{TRANSLATION_PREFIX} {}", request.trim()))
        }
    }

    /// Translator whose safety alignment flips the meaning, the failure mode
    /// the refinement step exists to repair.
    pub struct NegatingTranslator;

    impl TextClient for NegatingTranslator {
        fn id(&self) -> &str {
            "mock-translator-negating"
        }
        fn invoke(&self, request: &str) -> Result<String, String> {
            Ok(format!("{TRANSLATION_PREFIX} {NEGATION_MARKER} {}", request.trim()))
        }
    }

    /// Refiner that always reports alignment (echoes the sentinel).
    pub struct AligningRefiner;

    impl TextClient for AligningRefiner {
        fn id(&self) -> &str {
            "mock-refiner-aligning"
        }
        fn invoke(&self, _request: &str) -> Result<String, String> {
            Ok(ALIGNED_SENTINEL.to_string())
        }
    }

    /// Refiner that compares the two sections under the mock semantics and
    /// inverts the translation's negation when meanings differ.
    pub struct InvertingRefiner;

    impl TextClient for InvertingRefiner {
        fn id(&self) -> &str {
            "mock-refiner-inverting"
        }
        fn invoke(&self, request: &str) -> Result<String, String> {
            let sections = extract_sections(request);
            let [source, translation] = sections.as_slice() else {
                return Err("refine request must carry two sections".into());
            };
            if semantically_equal(source, translation) {
                return Ok(ALIGNED_SENTINEL.to_string());
            }
            let (negated, payload) = semantic_value(source);
            let marker = if negated { format!("{NEGATION_MARKER} ") } else { String::new() };
            Ok(format!("{TRANSLATION_PREFIX} {marker}{payload}"))
        }
    }

    fn longest_word(text: &str) -> &str {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .max_by_key(|w| (w.len(), std::cmp::Reverse(*w)))
            .unwrap_or("")
    }

    /// Blend generator that provably carries one topic token from the benign
    /// text and one behavior token from the unsafe text.
    pub struct TemplateBlender;

    impl TextClient for TemplateBlender {
        fn id(&self) -> &str {
            "mock-blender"
        }
        fn invoke(&self, request: &str) -> Result<String, String> {
            let sections = extract_sections(request);
            let [benign, unsafe_] = sections.as_slice() else {
                return Err("blend request must carry two sections".into());
            };
            Ok(format!(
                "In the middle of {}, explain how someone could {} without getting caught.",
                longest_word(benign),
                longest_word(unsafe_),
            ))
        }
    }

    /// Detox generator that strips `[HARM]...[/HARM]` spans and keeps the rest.
    pub struct StripHarmDetoxer;

    impl TextClient for StripHarmDetoxer {
        fn id(&self) -> &str {
            "mock-detoxer"
        }
        fn invoke(&self, request: &str) -> Result<String, String> {
            let sections = extract_sections(request);
            let [text] = sections.as_slice() else {
                return Err("detox request must carry one section".into());
            };
            let mut out = String::new();
            let mut rest = text.as_str();
            while let Some(start) = rest.find("[HARM]") {
                out.push_str(&rest[..start]);
                match rest[start..].find("[/HARM]") {
                    Some(end) => rest = &rest[start + end + "[/HARM]".len()..],
                    None => {
                        rest = "";
                        break;
                    }
                }
            }
            out.push_str(rest);
            Ok(out.split_whitespace().collect::<Vec<_>>().join(" "))
        }
    }

    /// Client that answers sections back unchanged (payload echo).
    pub struct EchoPayloadClient;

    impl TextClient for EchoPayloadClient {
        fn id(&self) -> &str {
            "mock-echo"
        }
        fn invoke(&self, request: &str) -> Result<String, String> {
            extract_sections(request)
                .into_iter()
                .next()
                .ok_or_else(|| "request carries no section".to_string())
        }
    }

    /// Client that always fails, for dropped-record paths.
    pub struct FailingClient(pub &'static str);

    impl TextClient for FailingClient {
        fn id(&self) -> &str {
            "mock-failing"
        }
        fn invoke(&self, _request: &str) -> Result<String, String> {
            Err(self.0.to_string())
        }
    }

    /// Deterministic labeler: answers per example id, optionally flipping or
    /// garbling a chosen id set.
    pub struct MockLabeler {
        answers: BTreeMap<String, Polarity>,
        flip: BTreeSet<String>,
        garble: BTreeSet<String>,
    }

    impl MockLabeler {
        pub fn echo_gold(examples: &[LabeledExample]) -> MockLabeler {
            MockLabeler {
                answers: examples.iter().map(|e| (e.id.clone(), e.gold)).collect(),
                flip: BTreeSet::new(),
                garble: BTreeSet::new(),
            }
        }

        pub fn inverted(examples: &[LabeledExample]) -> MockLabeler {
            let mut labeler = MockLabeler::echo_gold(examples);
            labeler.flip = examples.iter().map(|e| e.id.clone()).collect();
            labeler
        }

        pub fn flipping(examples: &[LabeledExample], ids: &[&str]) -> MockLabeler {
            let mut labeler = MockLabeler::echo_gold(examples);
            labeler.flip = ids.iter().map(|s| s.to_string()).collect();
            labeler
        }

        pub fn garbling(examples: &[LabeledExample], ids: &[&str]) -> MockLabeler {
            let mut labeler = MockLabeler::echo_gold(examples);
            labeler.garble = ids.iter().map(|s| s.to_string()).collect();
            labeler
        }
    }

    impl TextClient for MockLabeler {
        fn id(&self) -> &str {
            "mock-labeler"
        }
        fn invoke(&self, request: &str) -> Result<String, String> {
            let id = request
                .lines()
                .find_map(|l| l.strip_prefix("ID: "))
                .ok_or("relabel request carries no ID line")?
                .trim();
            if self.garble.contains(id) {
                return Ok("???".to_string());
            }
            let gold = self.answers.get(id).ok_or_else(|| format!("unknown id {id}"))?;
            let mut label = *gold;
            if self.flip.contains(id) {
                label = match label {
                    Polarity::Safe => Polarity::Unsafe,
                    Polarity::Unsafe => Polarity::Safe,
                };
            }
            Ok(label.to_string())
        }
    }
}
