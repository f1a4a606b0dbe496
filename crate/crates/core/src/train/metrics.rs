//! Next-sample prediction metrics.

use crate::error::{Error, Result};
use crate::numerics::array::Array;
use crate::numerics::ops;

/// Mean over positions of -log softmax(logits[t])[target[t]], computed via
/// log-sum-exp.
pub fn cross_entropy(logits: &Array, targets: &[u8]) -> Result<f64> {
    Ok(ops::cross_entropy_parts(logits, targets)?.0)
}

/// Fraction of positions whose target level is among the k highest-scoring
/// levels. Ties are broken by ascending level index, so the selected set is
/// deterministic.
pub fn top_k_accuracy(logits: &Array, targets: &[u8], k: usize) -> Result<f64> {
    let (t, c) = logits.dims2("top_k_accuracy")?;
    if targets.len() != t {
        return Err(Error::shape("top_k_accuracy", logits.shape(), &[targets.len()]));
    }
    if k > c {
        return Err(Error::Config(format!(
            "k={k} exceeds the number of classes {c}"
        )));
    }
    let mut hits = 0usize;
    for (row, &target) in logits.data().chunks(c).zip(targets) {
        let target = target as usize;
        let lt = row[target];
        // Rank of the target under (logit desc, index asc) ordering.
        let mut rank = 0usize;
        for (j, &l) in row.iter().enumerate() {
            if l > lt || (l == lt && j < target) {
                rank += 1;
            }
        }
        if rank < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / t as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_cost_ln_256() {
        for t in [1usize, 7, 100] {
            let logits = Array::zeros(&[t, 256]);
            let targets: Vec<u8> = (0..t).map(|i| (i % 256) as u8).collect();
            let loss = cross_entropy(&logits, &targets).unwrap();
            assert!((loss - 256f64.ln()).abs() < 1e-12, "t={t}: {loss}");
        }
    }

    #[test]
    fn saturated_correct_logit_costs_nothing() {
        let mut logits = Array::zeros(&[1, 256]);
        logits.set2(0, 37, 50.0);
        let loss = cross_entropy(&logits, &[37]).unwrap();
        assert!(loss < 1e-12, "{loss}");
    }

    #[test]
    fn two_position_case_matches_hand_evaluation() {
        // Row 0: logits [1, 2, 0, 0] target 1; row 1: [0, 0, 3, -1] target 3.
        let mut logits = Array::zeros(&[2, 4]);
        logits.set2(0, 0, 1.0);
        logits.set2(0, 1, 2.0);
        logits.set2(1, 2, 3.0);
        logits.set2(1, 3, -1.0);
        let loss = cross_entropy(&logits, &[1, 3]).unwrap();
        let lse0 = (1f64.exp() + 2f64.exp() + 1.0 + 1.0).ln();
        let lse1 = (1.0 + 1.0 + 3f64.exp() + (-1f64).exp()).ln();
        let expect = ((lse0 - 2.0) + (lse1 - (-1.0))) / 2.0;
        assert!((loss - expect).abs() < 1e-12, "{loss} vs {expect}");
    }

    #[test]
    fn full_cover_k_is_always_right() {
        let mut logits = Array::zeros(&[3, 256]);
        logits.set2(0, 9, -5.0);
        let acc = top_k_accuracy(&logits, &[9, 0, 255], 256).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn sixth_largest_misses_top5_but_makes_top6() {
        let mut logits = Array::zeros(&[1, 256]);
        for (rank, level) in [10usize, 20, 30, 40, 50].iter().enumerate() {
            logits.set2(0, *level, 10.0 - rank as f64);
        }
        logits.set2(0, 77, 4.5); // strictly 6th largest
        assert_eq!(top_k_accuracy(&logits, &[77], 5).unwrap(), 0.0);
        assert_eq!(top_k_accuracy(&logits, &[77], 6).unwrap(), 1.0);
    }

    #[test]
    fn uniform_ties_select_the_lowest_levels() {
        let logits = Array::zeros(&[1, 256]);
        for target in 0u8..10 {
            let acc = top_k_accuracy(&logits, &[target], 5).unwrap();
            let expect = if target < 5 { 1.0 } else { 0.0 };
            assert_eq!(acc, expect, "target {target}");
        }
    }

    proptest! {
        #[test]
        fn accuracy_is_monotone_in_k(
            rows in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..10.0, 16), 1..6),
            targets in proptest::collection::vec(0u8..16, 6),
        ) {
            let t = rows.len();
            let data: Vec<f64> = rows.concat();
            let logits = Array::from_vec(&[t, 16], data).unwrap();
            let targets = &targets[..t];
            let mut prev = 0.0;
            for k in 1..=16 {
                let acc = top_k_accuracy(&logits, targets, k).unwrap();
                prop_assert!(acc + 1e-15 >= prev);
                prev = acc;
            }
            prop_assert_eq!(prev, 1.0);
        }
    }
}
