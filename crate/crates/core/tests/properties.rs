use ndarray::Array2;
use proptest::prelude::*;

use survpipe::dataset::class_counts;
use survpipe::eval::{auc, confusion, evaluate, roc_points};
use survpipe::imbalance::{class_weights, undersample_indices};
use survpipe::models::{LogisticModel, MlpModel};
use survpipe::seed::rng_from_seed;

/// Scores on a coarse grid so ties are common, with both classes present.
fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..12).prop_map(|s| f64::from(s) / 11.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(s, mut y)| {
                y[0] = true;
                y[1] = false;
                (s, y)
            })
    })
}

fn problem(max_rows: usize, max_cols: usize) -> impl Strategy<Value = (Array2<f64>, Vec<bool>, Vec<f64>)> {
    (2..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        (
            prop::collection::vec(-2.0f64..2.0, r * c),
            prop::collection::vec(any::<bool>(), r),
            prop::collection::vec(0.1f64..3.0, r),
        )
            .prop_map(move |(v, y, w)| (Array2::from_shape_vec((r, c), v).unwrap(), y, w))
    })
}

fn central(params: &[f64], loss: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    d / scale.max(1e-12)
}

proptest! {
    #[test]
    fn auc_flips_with_labels((scores, labels) in scored_labels()) {
        let a = auc(&scores, &labels).unwrap();
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let b = auc(&scores, &flipped).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_rescaling((scores, labels) in scored_labels(), shift in -5.0f64..5.0) {
        let moved: Vec<f64> = scores.iter().map(|s| (s * 3.0 + shift).exp()).collect();
        prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&moved, &labels).unwrap());
    }

    #[test]
    fn auc_is_trapezoid_area((scores, labels) in scored_labels()) {
        let pts = roc_points(&scores, &labels).unwrap();
        let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        prop_assert!((area - auc(&scores, &labels).unwrap()).abs() < 1e-9);
        prop_assert_eq!(pts.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(pts.last().copied(), Some((1.0, 1.0)));
    }

    #[test]
    fn confusion_counts_partition_rows((scores, labels) in scored_labels(), t in 0.0f64..=1.0) {
        let predicted: Vec<bool> = scores.iter().map(|&s| s >= t).collect();
        let cm = confusion(&labels, &predicted).unwrap();
        prop_assert_eq!(cm.total(), labels.len());
        let m = evaluate(&scores, &labels, t).unwrap();
        prop_assert!((m.g_mean - (m.sensitivity * m.specificity).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn undersampling_keeps_minority_and_order(
        labels in prop::collection::vec(prop::bool::weighted(0.8), 4..400),
        ratio in 0.25f64..4.0,
        seed in any::<u64>(),
    ) {
        let (pos, neg) = class_counts(&labels);
        prop_assume!(pos > 0 && neg > 0);
        let minority = pos < neg;
        let (n_min, n_maj) = if minority { (pos, neg) } else { (neg, pos) };
        let rows = undersample_indices(&labels, ratio, seed).unwrap();
        prop_assert!(rows.windows(2).all(|w| w[0] < w[1]));
        let kept_min = rows.iter().filter(|&&r| labels[r] == minority).count();
        let kept_maj = rows.len() - kept_min;
        prop_assert_eq!(kept_min, n_min);
        prop_assert_eq!(kept_maj, ((n_min as f64 / ratio).round() as usize).min(n_maj));
        prop_assert_eq!(undersample_indices(&labels, ratio, seed).unwrap(), rows);
    }

    #[test]
    fn minority_weights_only_touch_minority(labels in prop::collection::vec(any::<bool>(), 2..100), factor in 1.0f64..10.0) {
        let (pos, neg) = class_counts(&labels);
        prop_assume!(pos > 0 && neg > 0);
        let minority = pos < neg;
        let w = class_weights(&labels, factor).unwrap();
        for (&l, &wi) in labels.iter().zip(w.as_slice()) {
            prop_assert_eq!(wi, if l == minority { factor } else { 1.0 });
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logistic_gradient_matches_differences((x, y, w) in problem(20, 10), l2 in 0.0f64..0.5, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng_from_seed(seed);
        let mut params: Vec<f64> = (0..=x.ncols()).map(|_| r.random_range(-1.0..1.0)).collect();
        let bias = params.pop().unwrap();
        let g = LogisticModel::new(params.clone(), bias).loss_and_gradient(x.view(), &y, &w, l2);
        let mut analytic = g.coefficients;
        analytic.push(g.bias);
        params.push(bias);
        let numeric = central(&params, |p| {
            LogisticModel::new(p[..p.len() - 1].to_vec(), p[p.len() - 1]).loss_and_gradient(x.view(), &y, &w, l2).loss
        });
        prop_assert!(rel_err(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn mlp_gradient_matches_differences((x, y, w) in problem(12, 6), hidden in prop::collection::vec(2usize..6, 1..3), seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng_from_seed(seed);
        let mut model = MlpModel::init(x.ncols(), &hidden, &mut r);
        // zero biases put every unit on the ReLU kink when x shrinks to zero
        let params: Vec<f64> = model.parameters().iter().map(|p| p + r.random_range(-0.5..0.5)).collect();
        model.set_parameters(&params).unwrap();
        let (_, analytic) = model.loss_and_gradient(x.view(), &y, &w);
        let numeric = central(&params, |p| {
            let mut m = model.clone();
            m.set_parameters(p).unwrap();
            m.loss_and_gradient(x.view(), &y, &w).0
        });
        prop_assert!(rel_err(&analytic, &numeric) < 1e-4);
    }
}
