use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TrajError};
use crate::types::TrajectorySample;

/// Seeded shuffle then contiguous split. Val/test sizes are floored and the
/// remainder goes to train, so 5 samples at (0.6, 0.2, 0.2) give (3, 1, 1).
pub fn split_dataset(
    samples: Vec<TrajectorySample>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(
    Vec<TrajectorySample>,
    Vec<TrajectorySample>,
    Vec<TrajectorySample>,
)> {
    if samples.is_empty() {
        return Err(TrajError::Empty("dataset".into()));
    }
    let (r_train, r_val, r_test) = ratios;
    let sum = r_train + r_val + r_test;
    if (sum - 1.0).abs() > 1e-9 || r_train < 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(TrajError::Ratios(format!("{ratios:?} does not sum to 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = samples;
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let n_val = (n as f64 * r_val).floor() as usize;
    let n_test = (n as f64 * r_test).floor() as usize;
    let n_train = n - n_val - n_test;
    let mut it = shuffled.into_iter();
    let train: Vec<_> = it.by_ref().take(n_train).collect();
    let val: Vec<_> = it.by_ref().take(n_val).collect();
    let test: Vec<_> = it.collect();
    Ok((train, val, test))
}
