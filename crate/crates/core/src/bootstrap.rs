//! Row-resampling bootstrap with per-replicate random streams.
//!
//! Replicate `b` draws its rows from [`rng::substream`]`(seed, b)`, so the
//! replicate distribution is identical whether replicates run sequentially
//! or on any number of rayon workers.

use rayon::prelude::*;

use crate::error::Result;
use crate::rng::{self, StreamRng};

/// Runs `n_boot` replicates of `f` over row resamples of size `n_rows`.
/// Results come back in replicate order. `f` also receives the replicate's
/// generator, positioned after the resampling draws, for any further
/// randomness it needs.
pub fn run_replicates<T, F>(n_rows: usize, n_boot: usize, seed: u64, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(&[usize], &mut StreamRng) -> Result<T> + Sync,
{
    (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::substream(seed, b as u64);
            let rows = rng::resample_indices(&mut r, n_rows);
            f(&rows, &mut r)
        })
        .collect()
}

/// Linearly interpolated quantile (`q` in `[0, 1]`) of already sorted data,
/// the same rule as numpy's default percentile.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    assert!((0.0..=1.0).contains(&q), "quantile level out of range");
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// The 2.5th and 97.5th percentiles.
pub fn percentile_interval(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975))
}
