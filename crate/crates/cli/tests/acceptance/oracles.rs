//! Independent brute-force metric oracles for the acceptance suite.
//!
//! These deliberately avoid the library's single-sweep implementations:
//! every threshold is re-scanned over the full sample list, and the partial
//! ROC area is integrated from an explicitly constructed vertex list with
//! two-sided segment clipping.

use guardgate_core::metrics::ScoredSample;

fn thresholds_descending(samples: &[ScoredSample]) -> Vec<f64> {
    let mut thresholds: Vec<f64> = samples.iter().map(|s| s.score).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    thresholds
}

fn counts_at(samples: &[ScoredSample], threshold: f64) -> (f64, f64) {
    let tp = samples.iter().filter(|s| s.score >= threshold && s.gold.is_unsafe()).count() as f64;
    let fp = samples.iter().filter(|s| s.score >= threshold && !s.gold.is_unsafe()).count() as f64;
    (tp, fp)
}

/// Step-wise average precision by per-threshold rescan (O(n²)).
pub fn auprc_bruteforce(samples: &[ScoredSample]) -> f64 {
    let total_pos = samples.iter().filter(|s| s.gold.is_unsafe()).count() as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds_descending(samples) {
        let (tp, fp) = counts_at(samples, t);
        let recall = tp / total_pos;
        let precision = tp / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// Normalized partial AUROC from an explicit ROC vertex list with per-segment
/// clipping to [0, fpr_max] and endpoint interpolation (O(n²) construction).
pub fn pauroc_bruteforce(samples: &[ScoredSample], fpr_max: f64) -> f64 {
    let total_pos = samples.iter().filter(|s| s.gold.is_unsafe()).count() as f64;
    let total_neg = samples.len() as f64 - total_pos;
    let mut points = vec![(0.0f64, 0.0f64)];
    for t in thresholds_descending(samples) {
        let (tp, fp) = counts_at(samples, t);
        points.push((fp / total_neg, tp / total_pos));
    }
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (x1, y1) = pair[0];
        let (x2, y2) = pair[1];
        if x2 <= x1 {
            continue;
        }
        let lo = x1.max(0.0);
        let hi = x2.min(fpr_max);
        if hi <= lo {
            continue;
        }
        let y_at = |x: f64| y1 + (y2 - y1) * (x - x1) / (x2 - x1);
        area += (hi - lo) * (y_at(lo) + y_at(hi)) / 2.0;
    }
    area / fpr_max
}
