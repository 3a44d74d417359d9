//! Classification metrics used across evaluation: F1, FNR, FPR, average
//! precision (AUPRC), normalized partial AUROC, and attack success rate.
//!
//! Unsafe is the positive class everywhere. Tie handling follows threshold
//! semantics "score >= t": all samples sharing a score enter the positive set
//! together. Zero-denominator conventions are fixed so reports are total:
//! F1 = 0 when 2tp+fp+fn = 0, FNR = 0 with no gold positives, FPR = 0 with
//! no gold negatives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::Polarity;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction/gold length mismatch: {preds} vs {golds}")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("score is not finite at index {0}")]
    NonFiniteScore(usize),
    #[error("fpr_max must be in (0, 1], got {0}")]
    InvalidFprMax(f64),
    #[error("empty input")]
    Empty,
}

/// One scored prediction: higher score = more likely unsafe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub score: f64,
    pub gold: Polarity,
}

impl ScoredSample {
    pub fn new(score: f64, gold: Polarity) -> ScoredSample {
        ScoredSample { score, gold }
    }
}

/// Binary confusion counts with unsafe as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Tally a confusion table from discrete predictions.
pub fn confusion(preds: &[Polarity], golds: &[Polarity]) -> Result<ConfusionCounts, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    let mut c = ConfusionCounts::default();
    for (p, g) in preds.iter().zip(golds) {
        match (p.is_unsafe(), g.is_unsafe()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// F1 = 2tp / (2tp + fp + fn); 0 when the denominator is 0.
pub fn f1(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    }
}

/// False negative rate = fn / (fn + tp); 0 when there are no gold positives.
pub fn fnr(c: &ConfusionCounts) -> f64 {
    let denom = c.fn_ + c.tp;
    if denom == 0 {
        0.0
    } else {
        c.fn_ as f64 / denom as f64
    }
}

/// False positive rate = fp / (fp + tn); 0 when there are no gold negatives.
pub fn fpr(c: &ConfusionCounts) -> f64 {
    let denom = c.fp + c.tn;
    if denom == 0 {
        0.0
    } else {
        c.fp as f64 / denom as f64
    }
}

fn check_finite(samples: &[ScoredSample]) -> Result<(), MetricsError> {
    for (i, s) in samples.iter().enumerate() {
        if !s.score.is_finite() {
            return Err(MetricsError::NonFiniteScore(i));
        }
    }
    Ok(())
}

/// Sort descending by score and group ties, yielding per-group (pos, neg)
/// increments in sweep order.
fn tie_groups(samples: &[ScoredSample]) -> Vec<(f64, u64, u64)> {
    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("finite scores"));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for s in sorted {
        match groups.last_mut() {
            Some((score, pos, neg)) if *score == s.score => {
                if s.gold.is_unsafe() {
                    *pos += 1;
                } else {
                    *neg += 1;
                }
            }
            _ => {
                let (pos, neg) = if s.gold.is_unsafe() { (1, 0) } else { (0, 1) };
                groups.push((s.score, pos, neg));
            }
        }
    }
    groups
}

/// Average precision: the step-wise sum AP = Σ_k (R_k − R_{k−1}) · P_k over
/// descending unique score thresholds, ties grouped at one threshold.
pub fn auprc(samples: &[ScoredSample]) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    check_finite(samples)?;
    let total_pos: u64 = samples.iter().filter(|s| s.gold.is_unsafe()).count() as u64;
    if total_pos == 0 {
        return Err(MetricsError::Undefined("AUPRC needs at least one positive"));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut recall_prev = 0.0;
    let mut ap = 0.0;
    for (_, pos, neg) in tie_groups(samples) {
        tp += pos;
        fp += neg;
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
    }
    Ok(ap)
}

/// Partial AUROC over FPR ∈ [0, `fpr_max`], divided by `fpr_max` (the maximum
/// achievable raw area). Trapezoidal, with linear interpolation to the exact
/// vertical cut at FPR = `fpr_max`.
pub fn pauroc_normalized(samples: &[ScoredSample], fpr_max: f64) -> Result<f64, MetricsError> {
    if !(fpr_max > 0.0 && fpr_max <= 1.0) {
        return Err(MetricsError::InvalidFprMax(fpr_max));
    }
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    check_finite(samples)?;
    let total_pos: u64 = samples.iter().filter(|s| s.gold.is_unsafe()).count() as u64;
    let total_neg = samples.len() as u64 - total_pos;
    if total_pos == 0 || total_neg == 0 {
        return Err(MetricsError::Undefined("pAUROC needs both classes"));
    }

    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut prev = (0.0f64, 0.0f64); // (fpr, tpr)
    let mut area = 0.0;
    for (_, pos, neg) in tie_groups(samples) {
        tp += pos;
        fp += neg;
        let point = (fp as f64 / total_neg as f64, tp as f64 / total_pos as f64);
        area += clipped_trapezoid(prev, point, fpr_max);
        if point.0 >= fpr_max {
            return Ok(area / fpr_max);
        }
        prev = point;
    }
    // fpr_max = 1.0 lands here after the final (1, 1) point is consumed.
    Ok(area / fpr_max)
}

/// Area of the ROC segment from `a` to `b` restricted to x ≤ `x_cut`.
fn clipped_trapezoid(a: (f64, f64), b: (f64, f64), x_cut: f64) -> f64 {
    let (x1, y1) = a;
    let (x2, y2) = b;
    if x1 >= x_cut || x2 <= x1 {
        // Past the cut, or a vertical/zero-width segment: no area.
        return 0.0;
    }
    if x2 <= x_cut {
        return (x2 - x1) * (y1 + y2) * 0.5;
    }
    let y_cut = y1 + (y2 - y1) * (x_cut - x1) / (x2 - x1);
    (x_cut - x1) * (y1 + y_cut) * 0.5
}

/// Attack success rate in percent: 100 · successes / total.
pub fn asr(outcomes: &[bool]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let successes = outcomes.iter().filter(|&&s| s).count();
    Ok(100.0 * successes as f64 / outcomes.len() as f64)
}

/// A named metric value with the sample count it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    pub value: f64,
    pub support: u64,
}

impl MetricValue {
    pub fn new(name: &str, value: f64, support: u64) -> MetricValue {
        MetricValue { name: name.to_string(), value, support }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(score: f64, unsafe_: bool) -> ScoredSample {
        ScoredSample::new(score, if unsafe_ { Polarity::Unsafe } else { Polarity::Safe })
    }

    #[test]
    fn confusion_trivials() {
        let c = confusion(&[Polarity::Unsafe], &[Polarity::Unsafe]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 0, tn: 0, fn_: 0 });
        let c = confusion(&[Polarity::Safe], &[Polarity::Unsafe]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 0, fp: 0, tn: 0, fn_: 1 });
        assert!(matches!(
            confusion(&[Polarity::Safe], &[]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn confusion_matches_independent_tally() {
        // Oracle: index-by-index tally with explicit counters.
        let mut preds = Vec::new();
        let mut golds = Vec::new();
        let mut state = 0x12345u64;
        for _ in 0..100 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            preds.push(if state & 1 == 0 { Polarity::Safe } else { Polarity::Unsafe });
            golds.push(if state & 2 == 0 { Polarity::Safe } else { Polarity::Unsafe });
        }
        let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..100 {
            if preds[i].is_unsafe() && golds[i].is_unsafe() {
                tp += 1;
            }
            if preds[i].is_unsafe() && !golds[i].is_unsafe() {
                fp += 1;
            }
            if !preds[i].is_unsafe() && !golds[i].is_unsafe() {
                tn += 1;
            }
            if !preds[i].is_unsafe() && golds[i].is_unsafe() {
                fn_ += 1;
            }
        }
        let c = confusion(&preds, &golds).unwrap();
        assert_eq!(c, ConfusionCounts { tp, fp, tn, fn_ });
        assert_eq!(c.total(), 100);
    }

    #[test]
    fn f1_forced_arithmetic() {
        let c = ConfusionCounts { tp: 8, fp: 2, tn: 0, fn_: 2 };
        assert_eq!(f1(&c), 0.8);
    }

    #[test]
    fn fnr_from_counts() {
        let c = ConfusionCounts { tp: 76, fp: 0, tn: 0, fn_: 24 };
        assert_eq!(fnr(&c), 0.24);
    }

    #[test]
    fn fpr_zero_on_all_safe() {
        let c = confusion(&[Polarity::Safe; 4], &[Polarity::Safe; 4]).unwrap();
        assert_eq!(fpr(&c), 0.0);
    }

    #[test]
    fn zero_denominator_conventions() {
        let empty = ConfusionCounts::default();
        assert_eq!(f1(&empty), 0.0);
        assert_eq!(fnr(&empty), 0.0);
        assert_eq!(fpr(&empty), 0.0);
        // tn-only: still F1 = 0 by convention.
        let c = ConfusionCounts { tp: 0, fp: 0, tn: 5, fn_: 0 };
        assert_eq!(f1(&c), 0.0);
    }

    #[test]
    fn auprc_perfect_separation() {
        let samples = vec![s(0.9, true), s(0.8, true), s(0.2, false), s(0.1, false)];
        assert_eq!(auprc(&samples).unwrap(), 1.0);
    }

    #[test]
    fn auprc_frozen_hand_computation() {
        // Thresholds descending: 0.5·1.0 + 0.5·(2/3) = 5/6.
        let samples = vec![s(0.9, true), s(0.8, false), s(0.7, true), s(0.6, false)];
        let ap = auprc(&samples).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12, "got {ap}");
    }

    #[test]
    fn auprc_all_tied_equals_prevalence() {
        let samples = vec![s(0.5, true), s(0.5, false), s(0.5, true), s(0.5, false)];
        assert_eq!(auprc(&samples).unwrap(), 0.5);
    }

    #[test]
    fn auprc_requires_a_positive() {
        let samples = vec![s(0.9, false), s(0.1, false)];
        assert!(matches!(auprc(&samples), Err(MetricsError::Undefined(_))));
    }

    #[test]
    fn pauroc_perfect_classifier_is_exactly_one() {
        let samples = vec![s(0.9, true), s(0.8, true), s(0.2, false), s(0.1, false)];
        assert_eq!(pauroc_normalized(&samples, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn pauroc_diagonal_roc_analytic_anchor() {
        // All scores tied: ROC is the diagonal, raw area 0.1²/2 = 0.005.
        let samples = vec![s(0.5, true), s(0.5, false), s(0.5, true), s(0.5, false)];
        let v = pauroc_normalized(&samples, 0.1).unwrap();
        assert!((v - 0.05).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn pauroc_full_range_matches_mann_whitney_auroc() {
        // Independent oracle: rank-free pairwise comparison with tie credit.
        let samples = vec![
            s(0.9, true),
            s(0.8, false),
            s(0.8, true),
            s(0.7, false),
            s(0.5, true),
            s(0.5, false),
            s(0.3, true),
            s(0.1, false),
        ];
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for p in samples.iter().filter(|x| x.gold.is_unsafe()) {
            for n in samples.iter().filter(|x| !x.gold.is_unsafe()) {
                pairs += 1.0;
                if p.score > n.score {
                    wins += 1.0;
                } else if p.score == n.score {
                    wins += 0.5;
                }
            }
        }
        let oracle = wins / pairs;
        let v = pauroc_normalized(&samples, 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
    }

    #[test]
    fn pauroc_rejects_single_class_and_bad_cut() {
        assert!(matches!(
            pauroc_normalized(&[s(0.9, true), s(0.1, true)], 0.1),
            Err(MetricsError::Undefined(_))
        ));
        assert!(matches!(
            pauroc_normalized(&[s(0.9, true), s(0.1, false)], 0.0),
            Err(MetricsError::InvalidFprMax(_))
        ));
        assert!(matches!(
            pauroc_normalized(&[s(0.9, true), s(0.1, false)], 1.5),
            Err(MetricsError::InvalidFprMax(_))
        ));
    }

    #[test]
    fn asr_cases() {
        assert_eq!(asr(&[false; 10]).unwrap(), 0.0);
        let mut outcomes = vec![true; 17];
        outcomes.extend(vec![false; 183]);
        assert_eq!(asr(&outcomes).unwrap(), 8.5);
        // Permutation invariance.
        outcomes.rotate_left(41);
        assert_eq!(asr(&outcomes).unwrap(), 8.5);
        assert!(matches!(asr(&[]), Err(MetricsError::Empty)));
    }

    prop_compose! {
        // Scores on a dyadic lattice so the monotone map below is exact in f64;
        // one forced sample per class keeps the metrics defined.
        fn samples_with_both_classes()(
            raw in proptest::collection::vec((0i32..=32, proptest::bool::ANY), 2..60),
            pos_score in 0i32..=32,
            neg_score in 0i32..=32,
        ) -> Vec<ScoredSample> {
            let mut v: Vec<ScoredSample> = raw
                .into_iter()
                .map(|(k, unsafe_)| s(k as f64 * 0.125, unsafe_))
                .collect();
            v.push(s(pos_score as f64 * 0.125, true));
            v.push(s(neg_score as f64 * 0.125, false));
            v
        }
    }

    proptest! {
        // Strictly monotone score transforms leave ranking metrics unchanged.
        // x³ + 3x is exact on the 0.125-lattice, so ties are preserved.
        #[test]
        fn rank_metrics_invariant_under_monotone_transform(samples in samples_with_both_classes()) {
            let mapped: Vec<ScoredSample> = samples
                .iter()
                .map(|x| ScoredSample::new(x.score * x.score * x.score + 3.0 * x.score, x.gold))
                .collect();
            let ap1 = auprc(&samples).unwrap();
            let ap2 = auprc(&mapped).unwrap();
            prop_assert!((ap1 - ap2).abs() < 1e-12);
            // TPR is non-decreasing along any ROC, so the normalized partial
            // area can only grow with the window.
            let mut previous = 0.0;
            for cut in [0.1, 0.5, 1.0] {
                let p1 = pauroc_normalized(&samples, cut).unwrap();
                let p2 = pauroc_normalized(&mapped, cut).unwrap();
                prop_assert!((p1 - p2).abs() < 1e-12);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&p1));
                prop_assert!(p1 + 1e-12 >= previous, "pAUROC decreased with a wider window");
                previous = p1;
            }
        }

        #[test]
        fn auprc_in_unit_interval(samples in samples_with_both_classes()) {
            let ap = auprc(&samples).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ap));
        }
    }
}
