//! Train/test and k-fold partitions over row indices.

use rand::seq::SliceRandom;

use crate::dataset::class_counts;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Shuffles `0..n` and takes `round(n * test_fraction)` rows for test.
/// Both index lists are returned in ascending order.
pub fn train_test_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test fraction", format!("{test_fraction} is not in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::invalid("split", format!("need at least 2 rows, have {n}")));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Partitions rows into `k` disjoint folds.
///
/// Stratified folds deal each class round-robin over shuffled rows, so every
/// fold holds `floor` or `ceil` of each class's share and fold sizes differ
/// by at most one.
pub fn kfold_indices(labels: &[bool], k: usize, seed: u64, stratified: bool) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::invalid("fold count", format!("k = {k} with {n} rows")));
    }
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![Vec::new(); k];
    if stratified {
        let (pos, neg) = class_counts(labels);
        if pos < k || neg < k {
            return Err(Error::invalid(
                "fold count",
                format!("k = {k} exceeds a class count ({pos} positive, {neg} negative)"),
            ));
        }
        let mut negatives: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
        let mut positives: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
        negatives.shuffle(&mut rng);
        positives.shuffle(&mut rng);
        // positives continue the deal where negatives stopped
        for (slot, row) in negatives.into_iter().chain(positives).enumerate() {
            folds[slot % k].push(row);
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (slot, row) in order.into_iter().enumerate() {
            folds[slot % k].push(row);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Rows outside fold `held_out`, ascending.
pub fn training_rows(folds: &[Vec<usize>], held_out: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held_out)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    rows.sort_unstable();
    rows
}
