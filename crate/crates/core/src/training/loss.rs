use crate::error::{Error, Result};

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Softmax cross-entropy `-log softmax(scores)[label]`.
pub fn loss(scores: &[f64], label: usize) -> Result<f64> {
    if label >= scores.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: scores.len(),
        });
    }
    Ok(cross_entropy(scores, label))
}

/// Unchecked cross-entropy via log-sum-exp.
#[inline]
pub(crate) fn cross_entropy(scores: &[f64], label: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    log_sum - (scores[label] - max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert!((loss(&[0.7; 10], 3).unwrap() - 10f64.ln()).abs() < 1e-15);
        assert!(loss(&[30.0, -30.0], 0).unwrap() < 1e-12);
        // -ln(e^2 / (e + e^2 + e^3))
        assert!((loss(&[1.0, 2.0, 3.0], 1).unwrap() - 1.407_605_964_444_380_3).abs() < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            loss(&[0.0, 0.0], 2),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let l = loss(&[1000.0, 0.0], 1).unwrap();
        assert!((l - 1000.0).abs() < 1e-9);
        let p = softmax(&[1000.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn shift_invariance(scores in proptest::collection::vec(-20.0f64..20.0, 2..8), shift in -50.0f64..50.0, pick in 0usize..8) {
            let label = pick % scores.len();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let a = loss(&scores, label).unwrap();
            let b = loss(&shifted, label).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn softmax_sums_to_one(scores in proptest::collection::vec(-100.0f64..100.0, 1..12)) {
            let p = softmax(&scores);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
        }
    }
}
