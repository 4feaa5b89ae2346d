use ndarray::Array2;
use proptest::prelude::*;

use survpipe::models::adaboost::{best_stump, AdaBoostModel, AdaBoostParams, SortedColumns};

/// Rows of small integers (so thresholds tie often) with one binary column,
/// plus integer weights scaled by a power of two so every partial sum is
/// exact.
fn boosting_problem() -> impl Strategy<Value = (Array2<f64>, Vec<bool>, Vec<f64>)> {
    (4usize..40, 1usize..5).prop_flat_map(|(n, c)| {
        (
            prop::collection::vec(0u8..5, n * c),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(1u32..4, n),
        )
            .prop_map(move |(v, mut y, raw)| {
                let mut x = Array2::from_shape_fn((n, c + 1), |(r, j)| if j < c { f64::from(v[r * c + j]) } else { 0.0 });
                for r in 0..n {
                    x[[r, c]] = f64::from(v[r * c] % 2);
                }
                y[0] = true;
                y[1] = false;
                let total: u32 = raw.iter().sum();
                let scale = f64::from(total.next_power_of_two());
                let mut w: Vec<f64> = raw.iter().map(|&k| f64::from(k) / scale).collect();
                // give the remainder to row 0 so the weights sum to exactly one
                w[0] += f64::from(total.next_power_of_two() - total) / scale;
                (x, y, w)
            })
    })
}

/// Every (feature, midpoint, polarity) candidate in tie-break order.
fn brute_force(x: &Array2<f64>, y: &[bool], w: &[f64]) -> Option<(usize, f64, i8, f64)> {
    let mut best: Option<(usize, f64, i8, f64)> = None;
    for f in 0..x.ncols() {
        let mut values: Vec<f64> = x.column(f).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = pair[0] + (pair[1] - pair[0]) / 2.0;
            for polarity in [1i8, -1] {
                let err: f64 = (0..y.len())
                    .filter(|&r| {
                        let vote_pos = (x[[r, f]] > t) == (polarity > 0);
                        vote_pos != y[r]
                    })
                    .map(|r| w[r])
                    .sum();
                if best.is_none_or(|b| err < b.3) {
                    best = Some((f, t, polarity, err));
                }
            }
        }
    }
    best
}

proptest! {
    #[test]
    fn first_round_matches_exhaustive_search((x, y, w) in boosting_problem()) {
        let found = best_stump(x.view(), &y, &w, &SortedColumns::new(x.view()));
        let expected = brute_force(&x, &y, &w);
        match (found, expected) {
            (None, None) => {}
            (Some(c), Some((f, t, p, e))) => {
                prop_assert_eq!((c.feature, c.threshold, c.polarity), (f, t, p));
                prop_assert_eq!(c.error, e);
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn training_error_obeys_product_bound((x, y, w) in boosting_problem(), rounds in 1usize..15) {
        let params = AdaBoostParams { n_rounds: rounds };
        let (model, errors) = AdaBoostModel::fit_traced(x.view(), &y, &w, &params).unwrap();
        prop_assume!(errors.iter().all(|&e| e > 0.0));
        let bound: f64 = errors.iter().map(|e| 2.0 * (e * (1.0 - e)).sqrt()).product();
        let margins = model.margins(x.view());
        let train_error: f64 = (0..y.len())
            .filter(|&r| {
                let target = if y[r] { 1.0 } else { -1.0 };
                target * margins[r] <= 0.0
            })
            .map(|r| w[r])
            .sum();
        prop_assert!(train_error <= bound + 1e-12, "error {} bound {}", train_error, bound);
        prop_assert!(errors.iter().all(|&e| e < 0.5));
    }
}

#[test]
fn constant_columns_give_no_stump() {
    let x = Array2::from_elem((4, 2), 1.0);
    let y = [true, false, true, false];
    assert!(best_stump(x.view(), &y, &[0.25; 4], &SortedColumns::new(x.view())).is_none());
    let model = AdaBoostModel::fit(x.view(), &y, &[1.0; 4], &AdaBoostParams::default()).unwrap();
    assert!(model.stumps().is_empty());
    assert_eq!(model.predict_proba(x.view()), vec![0.5; 4]);
}

#[test]
fn rounds_stop_when_nothing_beats_chance() {
    // xor: no single split does better than 0.5
    let x = ndarray::arr2(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
    let y = [false, true, true, false];
    let (model, errors) = AdaBoostModel::fit_traced(x.view(), &y, &[1.0; 4], &AdaBoostParams { n_rounds: 10 }).unwrap();
    assert!(model.stumps().is_empty());
    assert!(errors.is_empty());
}
