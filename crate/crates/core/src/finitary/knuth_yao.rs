//! Interval sampler: refine `[S_m, S_m + 2^{−m})` bit by bit until it lies in
//! one cell of the partition.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};

use super::partition::{cmp_dyadic, Partition};

pub const DEFAULT_MAX_DEPTH: u32 = 64;
/// Largest depth representable in the exact 128-bit arithmetic.
pub const MAX_DEPTH_LIMIT: u32 = 126;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KnuthYao {
    pub cell: usize,
    /// Bits consumed, `N ≥ 1`.
    pub bits: u32,
}

/// Draws a cell reading `next_bit(1), next_bit(2), …` in order, stopping as
/// soon as the decision is made. Never reads further than needed.
pub fn knuth_yao_sample(
    partition: &dyn Partition,
    mut next_bit: impl FnMut(u32) -> bool,
    max_depth: u32,
) -> Result<KnuthYao> {
    let max_depth = max_depth.min(MAX_DEPTH_LIMIT);
    let mut num: u128 = 0;
    let mut cell = 0;
    for m in 1..=max_depth {
        num = (num << 1) | next_bit(m) as u128;
        // Cells only move right as the interval shrinks.
        while cmp_dyadic(partition.threshold(cell + 1), num, m) != Ordering::Greater {
            cell += 1;
        }
        if cmp_dyadic(partition.threshold(cell + 1), num + 1, m) != Ordering::Less {
            return Ok(KnuthYao { cell, bits: m });
        }
    }
    Err(Error::DepthExceeded { depth: max_depth })
}

/// `m_k`: the number of thresholds `θ(l)` below `1 − 2^{−k}`.
pub fn thresholds_below(partition: &dyn Partition, k: u32) -> usize {
    let cut = 1.0 - 2f64.powi(-(k as i32));
    let mut l = 0;
    while partition.threshold(l) < cut {
        l += 1;
    }
    l
}

/// The bound `(m_k + 1) / 2^{k−1}` on `P[N > k]`.
pub fn tail_bound(partition: &dyn Partition, k: u32) -> f64 {
    (thresholds_below(partition, k) as f64 + 1.0) / 2f64.powi(k as i32 - 1)
}

/// Shannon entropy in bits of a law given by its probabilities.
pub fn entropy_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finitary::FinitePartition;
    use proptest::prelude::*;

    fn from_bits(bits: &[bool]) -> impl FnMut(u32) -> bool + '_ {
        move |m| bits[(m - 1) as usize]
    }

    #[test]
    fn examples() {
        let half = FinitePartition::from_weights(&[0.5, 0.5]);
        let out = knuth_yao_sample(&half, from_bits(&[true]), 64).unwrap();
        assert_eq!(out, KnuthYao { cell: 1, bits: 1 });
        let quarter = FinitePartition::from_weights(&[0.25, 0.75]);
        let out = knuth_yao_sample(&quarter, from_bits(&[false, false]), 64).unwrap();
        assert_eq!(out, KnuthYao { cell: 0, bits: 2 });
        let out = knuth_yao_sample(&quarter, from_bits(&[true]), 64).unwrap();
        assert_eq!(out, KnuthYao { cell: 1, bits: 1 });
    }

    #[test]
    fn depth_cap_is_explicit() {
        let third = FinitePartition::from_weights(&[1.0, 2.0]);
        // 1/3 = 0.010101… in binary; following its expansion never resolves.
        let mut pattern = |m: u32| m.is_multiple_of(2);
        let err = knuth_yao_sample(&third, &mut pattern, 20).unwrap_err();
        assert!(matches!(err, Error::DepthExceeded { depth: 20 }));
    }

    #[test]
    fn entropy_and_tail_helpers() {
        assert!((entropy_bits([0.5, 0.5]) - 1.0).abs() < 1e-15);
        let h = entropy_bits([1.0 / 3.0, 2.0 / 3.0]);
        assert!((h + 2.0 - 2.918).abs() < 1e-3);
        let p = FinitePartition::from_weights(&[0.5, 0.25, 0.25]);
        assert_eq!(thresholds_below(&p, 1), 1);
        assert_eq!(thresholds_below(&p, 3), 3);
    }

    proptest! {
        #[test]
        fn never_reads_past_the_decision(weights in proptest::collection::vec(0.01f64..1.0, 2..6),
                                         word in any::<u64>()) {
            let p = FinitePartition::from_weights(&weights);
            let mut read = Vec::new();
            let out = knuth_yao_sample(&p, |m| { read.push(m); (word >> (64 - m)) & 1 == 1 }, 64);
            if let Ok(out) = out {
                prop_assert_eq!(read, (1..=out.bits).collect::<Vec<_>>());
                let u = (word >> 11) as f64 / (1u64 << 53) as f64;
                if out.bits <= 53 {
                    prop_assert_eq!(out.cell, p.locate_uniform(u));
                }
            }
        }
    }
}
