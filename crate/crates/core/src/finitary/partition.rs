//! Partitions of `[0, 1)` into half-open cells `[θ(l), θ(l+1))`.
//!
//! Thresholds are `f64` values and are treated as the exact binary rationals
//! they represent, so both the uniform and the dyadic lookups are exact.

use std::cmp::Ordering;

use crate::rates::RangeLaw;

pub trait Partition {
    /// Number of cells, `None` when unbounded.
    fn cells(&self) -> Option<usize>;
    /// `θ(l)`: non-decreasing, `θ(0) = 0`, and `θ(cells) = 1`.
    fn threshold(&self, l: usize) -> f64;

    /// The cell `l` with `θ(l) ≤ u < θ(l+1)`.
    fn locate_uniform(&self, u: f64) -> usize {
        debug_assert!((0.0..1.0).contains(&u));
        let mut l = 0;
        while self.threshold(l + 1) <= u {
            l += 1;
        }
        l
    }

    /// The cell containing `num / 2^m`, by exact integer comparison.
    fn locate_dyadic(&self, num: u128, m: u32) -> usize {
        let mut l = 0;
        while cmp_dyadic(self.threshold(l + 1), num, m) != Ordering::Greater {
            l += 1;
        }
        l
    }
}

/// Exact comparison of `theta` with `num / 2^m`.
pub fn cmp_dyadic(theta: f64, num: u128, m: u32) -> Ordering {
    debug_assert!(theta >= 0.0 && theta.is_finite());
    if theta == 0.0 {
        return if num == 0 { Ordering::Equal } else { Ordering::Less };
    }
    // theta = mant * 2^exp
    let bits = theta.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if raw_exp == 0 {
        (frac as u128, -1074i64)
    } else {
        ((frac | (1u64 << 52)) as u128, raw_exp - 1075)
    };
    // Compare mant * 2^(exp + m) with num.
    let shift = exp + m as i64;
    let width = |x: u128| 128 - x.leading_zeros() as i64;
    if shift >= 0 {
        if num == 0 || width(mant) + shift > width(num) + 1 {
            return Ordering::Greater;
        }
        (mant << shift).cmp(&num)
    } else {
        let s = -shift;
        if num == 0 {
            return Ordering::Greater;
        }
        if width(num) + s > width(mant) + 1 {
            return Ordering::Less;
        }
        mant.cmp(&(num << s))
    }
}

/// A partition with finitely many explicit cells.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitePartition {
    /// `θ(0), …, θ(n)`.
    thresholds: Vec<f64>,
}

impl FinitePartition {
    /// Cells with the given widths (normalized by their sum).
    pub fn from_weights(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut thresholds = Vec::with_capacity(weights.len() + 1);
        thresholds.push(0.0);
        let mut acc = 0.0;
        for w in &weights[..weights.len() - 1] {
            acc += w.max(0.0);
            let theta = (acc / total).clamp(*thresholds.last().unwrap(), 1.0);
            thresholds.push(theta);
        }
        thresholds.push(1.0);
        FinitePartition { thresholds }
    }

    /// `n` cells of width `1/n`.
    pub fn uniform(n: usize) -> Self {
        Self::from_weights(&vec![1.0; n])
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn width(&self, l: usize) -> f64 {
        self.thresholds[l + 1] - self.thresholds[l]
    }
}

impl Partition for FinitePartition {
    fn cells(&self) -> Option<usize> {
        Some(self.thresholds.len() - 1)
    }

    fn threshold(&self, l: usize) -> f64 {
        self.thresholds[l.min(self.thresholds.len() - 1)]
    }

    fn locate_uniform(&self, u: f64) -> usize {
        // Largest l with θ(l) ≤ u, among the cells.
        let n = self.thresholds.len() - 1;
        (self.thresholds[1..n].partition_point(|&t| t <= u)).min(n - 1)
    }
}

/// The partition of a range law: cell `l` is `K = l − 1`, with
/// `θ(l) = λ([-1, l − 2])`.
#[derive(Clone, Copy, Debug)]
pub struct RangePartition<'a> {
    law: &'a dyn RangeLaw,
}

impl<'a> RangePartition<'a> {
    pub fn new(law: &'a dyn RangeLaw) -> Self {
        RangePartition { law }
    }

    pub fn range_of(cell: usize) -> i64 {
        cell as i64 - 1
    }
}

impl Partition for RangePartition<'_> {
    fn cells(&self) -> Option<usize> {
        self.law.max_range().map(|r| (r + 2) as usize)
    }

    fn threshold(&self, l: usize) -> f64 {
        if let Some(n) = self.cells() {
            if l >= n {
                return 1.0;
            }
        }
        self.law.cdf(l as i64 - 2).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{FiniteRangeLaw, GeometricTailLaw};
    use proptest::prelude::*;

    #[test]
    fn dyadic_comparisons() {
        assert_eq!(cmp_dyadic(0.5, 1, 1), Ordering::Equal);
        assert_eq!(cmp_dyadic(0.25, 1, 1), Ordering::Less);
        assert_eq!(cmp_dyadic(1.0, 3, 2), Ordering::Greater);
        assert_eq!(cmp_dyadic(1.0 / 3.0, 1 << 20, 22), Ordering::Greater);
        assert_eq!(cmp_dyadic(1.0 / 3.0, (1 << 22) / 3 + 1, 22), Ordering::Less);
        assert_eq!(cmp_dyadic(1.0, 1, 0), Ordering::Equal);
        assert_eq!(cmp_dyadic(f64::MIN_POSITIVE / 4.0, 0, 0), Ordering::Greater);
        assert_eq!(cmp_dyadic(0.0, 0, 100), Ordering::Equal);
        assert_eq!(cmp_dyadic(0.75, 0b1100 << 100, 104), Ordering::Equal);
    }

    #[test]
    fn finite_partition_cells() {
        let p = FinitePartition::from_weights(&[0.25, 0.0, 0.75]);
        assert_eq!(p.thresholds(), &[0.0, 0.25, 0.25, 1.0]);
        assert_eq!(p.locate_uniform(0.0), 0);
        assert_eq!(p.locate_uniform(0.25), 2);
        assert_eq!(p.locate_uniform(0.999), 2);
        assert_eq!(p.locate_dyadic(1, 2), 2);
        assert_eq!(p.locate_dyadic(0, 5), 0);
    }

    #[test]
    fn range_partition_thresholds() {
        let law = GeometricTailLaw::new(vec![0.875, 0.0], 0.125, 0.25).unwrap();
        let p = RangePartition::new(&law);
        assert_eq!(p.cells(), None);
        assert_eq!(p.threshold(0), 0.0);
        assert_eq!(p.threshold(1), 0.875);
        assert_eq!(p.threshold(2), 0.875);
        assert_eq!(p.locate_uniform(0.9), 2);
        assert_eq!(RangePartition::range_of(2), 1);
        let finite = FiniteRangeLaw::new(vec![0.5, 0.5]).unwrap();
        let p = RangePartition::new(&finite);
        assert_eq!(p.cells(), Some(2));
        assert_eq!(p.threshold(2), 1.0);
        assert_eq!(p.locate_uniform(0.7), 1);
    }

    proptest! {
        #[test]
        fn lookups_agree(weights in proptest::collection::vec(0.0f64..1.0, 1..8), x in any::<u64>()) {
            prop_assume!(weights.iter().sum::<f64>() > 1e-6);
            let p = FinitePartition::from_weights(&weights);
            let top = x >> 11;
            let u = top as f64 / (1u64 << 53) as f64;
            prop_assert_eq!(p.locate_uniform(u), p.locate_dyadic(top as u128, 53));
            let l = p.locate_uniform(u);
            prop_assert!(p.threshold(l) <= u && u < p.threshold(l + 1));
        }

        #[test]
        fn cmp_matches_float_when_exact(num in 0u64..(1 << 40), m in 0u32..60) {
            let value = num as f64 / 2f64.powi(m as i32);
            if value <= 1.0 {
                let theta = 0.3;
                prop_assert_eq!(cmp_dyadic(theta, num as u128, m), theta.partial_cmp(&value).unwrap());
            }
        }
    }
}
