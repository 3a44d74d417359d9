//! Deterministic rule-based backend.
//!
//! A stand-in for a trained filter model: a table of substring patterns with
//! weights, matched case-insensitively against the screened text. Matched
//! weights accumulate per category (or for the jailbreak flag) and are
//! squashed to a confidence through a logistic map, so every downstream
//! contract — label tokens, log-probabilities, thresholds — can be exercised
//! without any model.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::taxonomy::{
    LabelToken, Polarity, SafetyCategory, JAILBREAK_SAFE_SURFACE, JAILBREAK_UNSAFE_SURFACE,
};
use crate::util::fnv1a;

use super::{BackendError, FilterRole, Generation, ScreenItem};

/// Weight standing in for "no rule matched": far on the safe side of the
/// logistic map (sigmoid(-4) ≈ 0.018).
pub const UNMATCHED_WEIGHT: f64 = -4.0;

/// One pattern rule. `category_id` is required for content rules and must be
/// absent for jailbreak rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rule {
    pub pattern: String,
    pub role: FilterRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_id: Option<u8>,
    pub weight: f64,
}

/// A loaded, validated rule file. Immutable after load; safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct RuleTable {
    rules: Vec<Rule>,
    lowered: Vec<String>,
    fingerprint: u64,
}

impl RuleTable {
    /// Parse the JSON array form: `[{"pattern", "role", "category_id"?, "weight"}, ...]`.
    pub fn from_json(json: &str) -> Result<RuleTable, BackendError> {
        let rules: Vec<Rule> = serde_json::from_str(json).map_err(|e| BackendError::RuleFile {
            path: "<inline>".to_string(),
            reason: e.to_string(),
        })?;
        for (index, rule) in rules.iter().enumerate() {
            if rule.pattern.is_empty() {
                return Err(BackendError::InvalidRule { index, reason: "empty pattern".into() });
            }
            if !rule.weight.is_finite() {
                return Err(BackendError::InvalidRule { index, reason: "non-finite weight".into() });
            }
            match (rule.role, rule.category_id) {
                (FilterRole::Content, None) => {
                    return Err(BackendError::InvalidRule {
                        index,
                        reason: "content rule requires category_id".into(),
                    })
                }
                (FilterRole::Content, Some(id)) if SafetyCategory::from_id(id).is_none() => {
                    return Err(BackendError::InvalidRule {
                        index,
                        reason: format!("unknown category_id {id}"),
                    })
                }
                (FilterRole::Jailbreak, Some(_)) => {
                    return Err(BackendError::InvalidRule {
                        index,
                        reason: "jailbreak rule must not set category_id".into(),
                    })
                }
                _ => {}
            }
        }
        let lowered = rules.iter().map(|r| r.pattern.to_lowercase()).collect();
        let fingerprint = fnv1a(json.as_bytes());
        Ok(RuleTable { rules, lowered, fingerprint })
    }

    pub fn load(path: &Path) -> Result<RuleTable, BackendError> {
        let json = std::fs::read_to_string(path).map_err(|e| BackendError::RuleFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        RuleTable::from_json(&json).map_err(|e| match e {
            BackendError::RuleFile { reason, .. } => {
                BackendError::RuleFile { path: path.display().to_string(), reason }
            }
            other => other,
        })
    }

    /// Content hash of the rule file, recorded for provenance.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Classify an item for one filter role, emitting label tokens plus
    /// synthetic log-probabilities. Pure function of (table, item, role).
    pub fn classify(&self, item: &ScreenItem, role: FilterRole) -> Generation {
        // The jailbreak filter screens prompts only; the content filter sees
        // the response too when present.
        let haystack = match role {
            FilterRole::Jailbreak => item.prompt.to_lowercase(),
            FilterRole::Content => match &item.response {
                Some(r) => format!("{}\n{}", item.prompt, r).to_lowercase(),
                None => item.prompt.to_lowercase(),
            },
        };

        match role {
            FilterRole::Content => {
                let mut weights: [Option<f64>; 5] = [None; 5];
                for (rule, lowered) in self.rules.iter().zip(&self.lowered) {
                    if rule.role == FilterRole::Content && haystack.contains(lowered.as_str()) {
                        let slot = &mut weights[rule.category_id.unwrap() as usize - 1];
                        *slot = Some(slot.unwrap_or(0.0) + rule.weight);
                    }
                }
                let mut tokens = Vec::with_capacity(5);
                let mut maps = Vec::with_capacity(5);
                for (category, weight) in SafetyCategory::ALL.into_iter().zip(weights) {
                    let w = weight.unwrap_or(UNMATCHED_WEIGHT);
                    let polarity = if w > 0.0 { Polarity::Unsafe } else { Polarity::Safe };
                    tokens.push(LabelToken::new(category, polarity).surface().to_string());
                    maps.push(label_pair_logprobs(
                        LabelToken::new(category, Polarity::Safe).surface(),
                        LabelToken::new(category, Polarity::Unsafe).surface(),
                        w,
                    ));
                }
                Generation { tokens, logprobs: Some(maps) }
            }
            FilterRole::Jailbreak => {
                let mut weight: Option<f64> = None;
                for (rule, lowered) in self.rules.iter().zip(&self.lowered) {
                    if rule.role == FilterRole::Jailbreak && haystack.contains(lowered.as_str()) {
                        weight = Some(weight.unwrap_or(0.0) + rule.weight);
                    }
                }
                let w = weight.unwrap_or(UNMATCHED_WEIGHT);
                let polarity = if w > 0.0 { Polarity::Unsafe } else { Polarity::Safe };
                let surface = match polarity {
                    Polarity::Safe => JAILBREAK_SAFE_SURFACE,
                    Polarity::Unsafe => JAILBREAK_UNSAFE_SURFACE,
                };
                let map =
                    label_pair_logprobs(JAILBREAK_SAFE_SURFACE, JAILBREAK_UNSAFE_SURFACE, w);
                Generation { tokens: vec![surface.to_string()], logprobs: Some(vec![map]) }
            }
        }
    }
}

/// Log-probabilities for a safe/unsafe pair whose unsafe probability is
/// sigmoid(w): ln σ(w) = -ln(1 + e^{-w}), computed without overflow.
fn label_pair_logprobs(safe_surface: &str, unsafe_surface: &str, w: f64) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    map.insert(unsafe_surface.to_string(), -(-w).exp().ln_1p());
    map.insert(safe_surface.to_string(), -w.exp().ln_1p());
    map
}
