//! Shared input builders for the benchmark targets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use guardgate_core::metrics::ScoredSample;
use guardgate_core::taxonomy::Polarity;

/// Scored samples with heavy ties, the shape benchmark reports feed in.
pub fn scored_samples(n: usize, seed: u64) -> Vec<ScoredSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let score = rng.random_range(0..=1000) as f64 / 1000.0;
            let gold = if rng.random_bool(0.3) { Polarity::Unsafe } else { Polarity::Safe };
            ScoredSample::new(score, gold)
        })
        .collect()
}
