//! The five-category safety taxonomy, verdict types, and the special-token
//! label encoding used as classifier output targets.
//!
//! The content filter assesses every input against all five categories and
//! emits one label token per category, in ascending category order. Ten
//! distinct token surfaces exist (five categories, safe/unsafe each); the
//! jailbreak filter uses a separate binary pair.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Schema version of the exported taxonomy document.
pub const TAXONOMY_VERSION: &str = "1";

/// Number of safety categories.
pub const CATEGORY_COUNT: usize = 5;

/// A safety risk category of the content filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SafetyCategory {
    ViolenceAndHate,
    IllegalAndCriminalActivities,
    SexualContentAndExploitation,
    PrivacyAndSensitiveInformationMisuse,
    ManipulationAndSocietalHarm,
}

impl SafetyCategory {
    /// All categories in ascending id order.
    pub const ALL: [SafetyCategory; CATEGORY_COUNT] = [
        SafetyCategory::ViolenceAndHate,
        SafetyCategory::IllegalAndCriminalActivities,
        SafetyCategory::SexualContentAndExploitation,
        SafetyCategory::PrivacyAndSensitiveInformationMisuse,
        SafetyCategory::ManipulationAndSocietalHarm,
    ];

    /// Stable numeric id, 1..=5.
    pub const fn id(self) -> u8 {
        match self {
            SafetyCategory::ViolenceAndHate => 1,
            SafetyCategory::IllegalAndCriminalActivities => 2,
            SafetyCategory::SexualContentAndExploitation => 3,
            SafetyCategory::PrivacyAndSensitiveInformationMisuse => 4,
            SafetyCategory::ManipulationAndSocietalHarm => 5,
        }
    }

    pub fn from_id(id: u8) -> Option<SafetyCategory> {
        SafetyCategory::ALL.get(id.checked_sub(1)? as usize).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            SafetyCategory::ViolenceAndHate => "Violence and Hate",
            SafetyCategory::IllegalAndCriminalActivities => "Illegal and Criminal Activities",
            SafetyCategory::SexualContentAndExploitation => "Sexual Content and Exploitation",
            SafetyCategory::PrivacyAndSensitiveInformationMisuse => {
                "Privacy and Sensitive Information Misuse"
            }
            SafetyCategory::ManipulationAndSocietalHarm => "Manipulation and Societal Harm",
        }
    }

    pub const fn definition(self) -> &'static str {
        match self {
            SafetyCategory::ViolenceAndHate => {
                "Content that promotes or praises physical or psychological harm to others, \
                 incites violence, or contains hateful, discriminatory, or harassing \
                 expressions targeting an individual or group"
            }
            SafetyCategory::IllegalAndCriminalActivities => {
                "Content that encourages or instructs others to engage in illegal behavior, \
                 supports or plans unlawful activity, or provides guidance intended to \
                 facilitate criminal conduct"
            }
            SafetyCategory::SexualContentAndExploitation => {
                "Content that includes explicit sexual descriptions or depicts sexually \
                 inappropriate material involving minors, including sexualization of minors"
            }
            SafetyCategory::PrivacyAndSensitiveInformationMisuse => {
                "Content that discloses or seeks to disclose sensitive personally identifiable \
                 information without consent that enables doxxing or unauthorized account \
                 access, leaks proprietary or confidential data, or provides unqualified \
                 guidance on health, legal, or financial matters"
            }
            SafetyCategory::ManipulationAndSocietalHarm => {
                "Content that spreads false or misleading narratives (e.g., conspiracy \
                 theories, disinformation), promotes extremist propaganda or political \
                 manipulation, or attempts to erode public trust through deception or \
                 targeted influence"
            }
        }
    }
}

impl fmt::Display for SafetyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl Serialize for SafetyCategory {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.id())
    }
}

impl<'de> Deserialize<'de> for SafetyCategory {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let id = u8::deserialize(deserializer)?;
        SafetyCategory::from_id(id)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown category id {id}")))
    }
}

/// Binary safety polarity shared by both filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Safe,
    Unsafe,
}

impl Polarity {
    pub fn is_unsafe(self) -> bool {
        matches!(self, Polarity::Unsafe)
    }

    /// Degenerate unsafe-probability for a hard label: unsafe → 1.0, safe → 0.0.
    pub fn degenerate_confidence(self) -> f64 {
        match self {
            Polarity::Safe => 0.0,
            Polarity::Unsafe => 1.0,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Safe => write!(f, "safe"),
            Polarity::Unsafe => write!(f, "unsafe"),
        }
    }
}

/// One of the ten classifier label tokens: a (category, polarity) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelToken {
    pub category: SafetyCategory,
    pub polarity: Polarity,
}

impl LabelToken {
    pub fn new(category: SafetyCategory, polarity: Polarity) -> LabelToken {
        LabelToken { category, polarity }
    }

    /// Token surface, e.g. `<|unsafe_2|>`. Surfaces are pairwise distinct and
    /// none is a substring of another, so streams parse unambiguously.
    pub fn surface(self) -> &'static str {
        const SURFACES: [[&str; 2]; CATEGORY_COUNT] = [
            ["<|safe_1|>", "<|unsafe_1|>"],
            ["<|safe_2|>", "<|unsafe_2|>"],
            ["<|safe_3|>", "<|unsafe_3|>"],
            ["<|safe_4|>", "<|unsafe_4|>"],
            ["<|safe_5|>", "<|unsafe_5|>"],
        ];
        SURFACES[self.category.id() as usize - 1][self.polarity.is_unsafe() as usize]
    }

    /// Parse a surface back into a token. Returns `None` for anything that is
    /// not one of the ten content label tokens.
    pub fn from_surface(s: &str) -> Option<LabelToken> {
        for category in SafetyCategory::ALL {
            for polarity in [Polarity::Safe, Polarity::Unsafe] {
                let token = LabelToken::new(category, polarity);
                if token.surface() == s {
                    return Some(token);
                }
            }
        }
        None
    }

    /// All ten tokens: (safe, unsafe) per category, ascending category id.
    pub fn all() -> impl Iterator<Item = LabelToken> {
        SafetyCategory::ALL.into_iter().flat_map(|c| {
            [Polarity::Safe, Polarity::Unsafe]
                .into_iter()
                .map(move |p| LabelToken::new(c, p))
        })
    }
}

/// Binary label surfaces of the jailbreak filter. Kept distinct from the ten
/// category tokens (no surface is a substring of another).
pub const JAILBREAK_SAFE_SURFACE: &str = "<|safe|>";
pub const JAILBREAK_UNSAFE_SURFACE: &str = "<|unsafe|>";

/// Per-category assessment inside a [`ContentVerdict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryAssessment {
    pub flag: Polarity,
    /// Probability assigned to the unsafe outcome for this category.
    pub confidence: f64,
}

/// Verdict of the content filter: one flag + confidence per category plus the
/// derived overall polarity.
///
/// `overall` is unsafe iff at least one category flag is unsafe; it is
/// recomputed from the flags on every construction path, including
/// deserialization. Thresholded recomputation from the confidences is
/// [`overall_label`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ContentVerdictWire")]
pub struct ContentVerdict {
    per_category: [CategoryAssessment; CATEGORY_COUNT],
    overall: Polarity,
}

#[derive(Deserialize)]
struct ContentVerdictWire {
    per_category: [CategoryAssessment; CATEGORY_COUNT],
    #[serde(default)]
    #[allow(dead_code)]
    overall: Option<Polarity>,
}

impl From<ContentVerdictWire> for ContentVerdict {
    fn from(wire: ContentVerdictWire) -> ContentVerdict {
        ContentVerdict::new(wire.per_category)
    }
}

impl ContentVerdict {
    /// Build a verdict from explicit per-category assessments (ascending
    /// category order). The overall polarity is derived from the flags.
    pub fn new(per_category: [CategoryAssessment; CATEGORY_COUNT]) -> ContentVerdict {
        let overall = if per_category.iter().any(|a| a.flag.is_unsafe()) {
            Polarity::Unsafe
        } else {
            Polarity::Safe
        };
        ContentVerdict { per_category, overall }
    }

    /// Build from hard flags with degenerate 0/1 confidences.
    pub fn from_flags(flags: [Polarity; CATEGORY_COUNT]) -> ContentVerdict {
        ContentVerdict::new(flags.map(|flag| CategoryAssessment {
            flag,
            confidence: flag.degenerate_confidence(),
        }))
    }

    /// Build from unsafe-probabilities, deriving flags by the default decision
    /// rule: unsafe iff confidence > 0.5.
    pub fn from_confidences(confidences: [f64; CATEGORY_COUNT]) -> ContentVerdict {
        ContentVerdict::new(confidences.map(|confidence| CategoryAssessment {
            flag: if confidence > 0.5 { Polarity::Unsafe } else { Polarity::Safe },
            confidence,
        }))
    }

    pub fn overall(&self) -> Polarity {
        self.overall
    }

    pub fn assessments(&self) -> &[CategoryAssessment; CATEGORY_COUNT] {
        &self.per_category
    }

    pub fn assessment(&self, category: SafetyCategory) -> CategoryAssessment {
        self.per_category[category.id() as usize - 1]
    }

    pub fn flags(&self) -> [Polarity; CATEGORY_COUNT] {
        self.per_category.map(|a| a.flag)
    }

    /// Highest per-category unsafe-probability; useful as a single ranking
    /// score for the verdict.
    pub fn max_confidence(&self) -> f64 {
        self.per_category.iter().map(|a| a.confidence).fold(0.0, f64::max)
    }
}

/// Verdict of the jailbreak filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JailbreakVerdict {
    pub flag: Polarity,
    /// Probability assigned to the unsafe (jailbreak) outcome.
    pub confidence: f64,
}

impl JailbreakVerdict {
    pub fn new(flag: Polarity, confidence: f64) -> JailbreakVerdict {
        JailbreakVerdict { flag, confidence }
    }
}

/// Errors from encoding or decoding label-token streams.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenStreamError {
    #[error("expected {expected} tokens, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("unknown label token {text:?} at position {position}")]
    UnknownToken { position: usize, text: String },
    #[error("duplicate category {category_id} at position {position}")]
    DuplicateCategory { position: usize, category_id: u8 },
    #[error("category {found} at position {position}, expected {expected} (ascending order)")]
    OutOfOrder { position: usize, expected: u8, found: u8 },
}

/// Encode a verdict as five label tokens, one per category, ascending ids.
pub fn encode_verdict(verdict: &ContentVerdict) -> [LabelToken; CATEGORY_COUNT] {
    let mut out = [LabelToken::new(SafetyCategory::ViolenceAndHate, Polarity::Safe); CATEGORY_COUNT];
    for (slot, category) in out.iter_mut().zip(SafetyCategory::ALL) {
        *slot = LabelToken::new(category, verdict.assessment(category).flag);
    }
    out
}

/// Decode five label tokens back into a verdict.
///
/// Tokens must cover each category exactly once in ascending id order.
/// `confidences`, when given, supplies the per-category unsafe-probability;
/// otherwise confidences degenerate to 1.0 for an unsafe token and 0.0 for a
/// safe one.
pub fn decode_verdict(
    tokens: &[LabelToken],
    confidences: Option<&[f64; CATEGORY_COUNT]>,
) -> Result<ContentVerdict, TokenStreamError> {
    if tokens.len() != CATEGORY_COUNT {
        return Err(TokenStreamError::WrongLength { expected: CATEGORY_COUNT, got: tokens.len() });
    }
    let mut seen = [false; CATEGORY_COUNT];
    for (position, token) in tokens.iter().enumerate() {
        let idx = token.category.id() as usize - 1;
        if seen[idx] {
            return Err(TokenStreamError::DuplicateCategory {
                position,
                category_id: token.category.id(),
            });
        }
        seen[idx] = true;
        if idx != position {
            return Err(TokenStreamError::OutOfOrder {
                position,
                expected: position as u8 + 1,
                found: token.category.id(),
            });
        }
    }
    let mut assessments = [CategoryAssessment { flag: Polarity::Safe, confidence: 0.0 }; CATEGORY_COUNT];
    for (i, token) in tokens.iter().enumerate() {
        let confidence = match confidences {
            Some(c) => c[i],
            None => token.polarity.degenerate_confidence(),
        };
        assessments[i] = CategoryAssessment { flag: token.polarity, confidence };
    }
    Ok(ContentVerdict::new(assessments))
}

/// Parse raw token texts into label tokens, reporting the first bad position.
pub fn parse_label_tokens(texts: &[String]) -> Result<Vec<LabelToken>, TokenStreamError> {
    texts
        .iter()
        .enumerate()
        .map(|(position, text)| {
            LabelToken::from_surface(text)
                .ok_or_else(|| TokenStreamError::UnknownToken { position, text: text.clone() })
        })
        .collect()
}

/// Per-category decision thresholds on the unsafe-probability, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds(pub [f64; CATEGORY_COUNT]);

impl Default for Thresholds {
    fn default() -> Thresholds {
        Thresholds([0.5; CATEGORY_COUNT])
    }
}

impl Thresholds {
    pub fn uniform(t: f64) -> Thresholds {
        Thresholds([t; CATEGORY_COUNT])
    }

    pub fn get(&self, category: SafetyCategory) -> f64 {
        self.0[category.id() as usize - 1]
    }

    pub fn validate(&self) -> Result<(), String> {
        for (i, t) in self.0.iter().enumerate() {
            if !(0.0..=1.0).contains(t) {
                return Err(format!("threshold for category {} out of [0,1]: {t}", i + 1));
            }
        }
        Ok(())
    }
}

/// Thresholded overall label: unsafe iff any category confidence reaches its
/// threshold. Monotone in every confidence.
pub fn overall_label(verdict: &ContentVerdict, thresholds: &Thresholds) -> Polarity {
    let unsafe_any = SafetyCategory::ALL
        .into_iter()
        .any(|c| verdict.assessment(c).confidence >= thresholds.get(c));
    if unsafe_any {
        Polarity::Unsafe
    } else {
        Polarity::Safe
    }
}

/// Entry of the exported taxonomy document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub id: u8,
    pub name: String,
    pub definition: String,
}

/// Versioned taxonomy document for downstream configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyDocument {
    pub version: String,
    pub categories: Vec<CategoryInfo>,
}

impl TaxonomyDocument {
    pub fn current() -> TaxonomyDocument {
        TaxonomyDocument {
            version: TAXONOMY_VERSION.to_string(),
            categories: SafetyCategory::ALL
                .into_iter()
                .map(|c| CategoryInfo {
                    id: c.id(),
                    name: c.name().to_string(),
                    definition: c.definition().to_string(),
                })
                .collect(),
        }
    }
}

/// Export the taxonomy as pretty JSON.
pub fn export_taxonomy_json() -> String {
    // BTreeMap-free: struct field order is stable under serde_json.
    serde_json::to_string_pretty(&TaxonomyDocument::current()).expect("taxonomy serializes")
}

/// Convenience: confidences keyed by category id, used in API payloads.
pub fn confidence_map(verdict: &ContentVerdict) -> BTreeMap<u8, f64> {
    SafetyCategory::ALL
        .into_iter()
        .map(|c| (c.id(), verdict.assessment(c).confidence))
        .collect()
}
