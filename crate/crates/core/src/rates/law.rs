use std::fmt;

use crate::error::{Error, Result};
use crate::lattice::ball_volume;

use super::PROB_TOL;

/// A probability law on `{-1, 0, 1, …}` with exact tail masses.
pub trait RangeLaw: Send + Sync + fmt::Debug {
    /// `λ(k)`; zero for `k < -1`.
    fn prob(&self, k: i64) -> f64;
    /// `λ((k, ∞))`.
    fn tail_mass(&self, k: i64) -> f64;
    /// Largest `k` with `λ(k) > 0`, or `None` for unbounded support.
    fn max_range(&self) -> Option<i64>;
    /// Rigorous upper bound on `Σ_{j > k} |V(j)| λ(j)` in dimension `dim`.
    /// `None` when the law cannot bound its tail.
    fn volume_tail_bound(&self, dim: usize, k: i64) -> Option<f64>;

    fn cdf(&self, k: i64) -> f64 {
        if k < -1 {
            0.0
        } else {
            1.0 - self.tail_mass(k)
        }
    }
}

/// A law supported on `{-1, …, R}`; `probs[0]` is `λ(-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteRangeLaw {
    probs: Vec<f64>,
    suffix: Vec<f64>,
}

impl FiniteRangeLaw {
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidModel("empty range law".into()));
        }
        super::validate_probabilities(&probs, "range law")?;
        for p in probs.iter_mut() {
            *p = p.max(0.0);
        }
        while probs.len() > 1 && *probs.last().unwrap() == 0.0 {
            probs.pop();
        }
        // suffix[n] = Σ_{m > n} probs[m]
        let mut suffix = vec![0.0; probs.len()];
        for n in (0..probs.len() - 1).rev() {
            suffix[n] = suffix[n + 1] + probs[n + 1];
        }
        Ok(FiniteRangeLaw { probs, suffix })
    }

    /// `λ(-1), …, λ(R)`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl RangeLaw for FiniteRangeLaw {
    fn prob(&self, k: i64) -> f64 {
        if k < -1 {
            return 0.0;
        }
        self.probs.get((k + 1) as usize).copied().unwrap_or(0.0)
    }

    fn tail_mass(&self, k: i64) -> f64 {
        if k < -1 {
            return 1.0;
        }
        self.suffix.get((k + 1) as usize).copied().unwrap_or(0.0)
    }

    fn max_range(&self) -> Option<i64> {
        Some(self.probs.len() as i64 - 2)
    }

    fn volume_tail_bound(&self, dim: usize, k: i64) -> Option<f64> {
        let start = (k + 1).max(0);
        let end = self.probs.len() as i64 - 2;
        Some(
            (start..=end)
                .map(|j| ball_volume(dim, j) as f64 * self.prob(j))
                .sum(),
        )
    }
}

/// Explicit head `λ(-1), …, λ(H)` followed by a geometric tail
/// `λ(j) = τ (1 − ρ) ρ^{j − H − 1}` for `j > H`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricTailLaw {
    head: Vec<f64>,
    tail: f64,
    ratio: f64,
}

impl GeometricTailLaw {
    pub fn new(head: Vec<f64>, tail: f64, ratio: f64) -> Result<Self> {
        if head.is_empty() {
            return Err(Error::InvalidModel("geometric law needs λ(-1)".into()));
        }
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::InvalidModel(format!("tail ratio {ratio} not in [0, 1)")));
        }
        if !(0.0..=1.0).contains(&tail) {
            return Err(Error::InvalidModel(format!("tail mass {tail} not in [0, 1]")));
        }
        let mut all = head.clone();
        all.push(tail);
        super::validate_probabilities(&all, "range law")?;
        Ok(GeometricTailLaw { head, tail, ratio })
    }

    /// Last index of the explicit head.
    pub fn head_end(&self) -> i64 {
        self.head.len() as i64 - 2
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }
}

impl RangeLaw for GeometricTailLaw {
    fn prob(&self, k: i64) -> f64 {
        let h = self.head_end();
        if k < -1 {
            0.0
        } else if k <= h {
            self.head[(k + 1) as usize]
        } else {
            self.tail * (1.0 - self.ratio) * self.ratio.powi((k - h - 1) as i32)
        }
    }

    fn tail_mass(&self, k: i64) -> f64 {
        let h = self.head_end();
        if k < -1 {
            1.0
        } else if k >= h {
            self.tail * self.ratio.powi((k - h) as i32)
        } else {
            self.head[(k + 2) as usize..].iter().sum::<f64>() + self.tail
        }
    }

    fn max_range(&self) -> Option<i64> {
        if self.tail > 0.0 {
            None
        } else {
            let last = self.head.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            Some(last as i64 - 1)
        }
    }

    fn volume_tail_bound(&self, dim: usize, k: i64) -> Option<f64> {
        let h = self.head_end();
        let mut sum = 0.0;
        for j in (k + 1).max(0)..=h {
            sum += ball_volume(dim, j) as f64 * self.prob(j);
        }
        if self.tail == 0.0 {
            return Some(sum);
        }
        // Explicit terms until the majorant (2j+1)^d λ(j) contracts fast
        // enough, then a geometric bound on the rest.
        let d = dim as i32;
        let mut j = (k + 1).max(h + 1).max(0);
        loop {
            let term = ball_volume(dim, j) as f64 * self.prob(j);
            sum += term;
            let next = (2 * j + 3) as f64;
            let contraction = self.ratio * ((next + 2.0) / next).powi(d);
            if contraction < 1.0 {
                let rest = next.powi(d) * self.prob(j + 1) / (1.0 - contraction);
                if rest <= 1e-17 * sum.max(1e-300) || rest < 1e-300 {
                    return Some(sum + rest);
                }
            }
            j += 1;
            if j > 1_000_000 {
                return None;
            }
        }
    }
}

/// Sum of a law's probabilities, explicit head plus exact tail.
pub(crate) fn total_mass(law: &dyn RangeLaw, head: i64) -> f64 {
    (-1..=head).map(|k| law.prob(k)).sum::<f64>() + law.tail_mass(head)
}

pub(crate) fn check_normalized(law: &dyn RangeLaw) -> Result<()> {
    let total = total_mass(law, law.max_range().unwrap_or(64));
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("range law sums to {total}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_law_tails() {
        let law = FiniteRangeLaw::new(vec![0.5, 0.0, 0.25, 0.25, 0.0]).unwrap();
        assert_eq!(law.max_range(), Some(2));
        assert_eq!(law.tail_mass(-2), 1.0);
        assert_eq!(law.tail_mass(-1), 0.5);
        assert_eq!(law.tail_mass(1), 0.25);
        assert_eq!(law.tail_mass(2), 0.0);
        assert_eq!(law.cdf(5), 1.0);
        assert_eq!(law.volume_tail_bound(1, -1), Some(0.25 * 3.0 + 0.25 * 5.0));
        assert!(FiniteRangeLaw::new(vec![0.5, 0.4]).is_err());
        assert!(FiniteRangeLaw::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn geometric_law_matches_partial_sums() {
        let law = GeometricTailLaw::new(vec![0.875, 0.0], 0.125, 0.25).unwrap();
        for k in -1..20 {
            let explicit: f64 = (k + 1..200).map(|j| law.prob(j)).sum();
            assert!((explicit - law.tail_mass(k)).abs() < 1e-15, "k={k}");
        }
        assert!((total_mass(&law, 10) - 1.0).abs() < 1e-15);
        assert_eq!(law.max_range(), None);
        let bound = law.volume_tail_bound(1, -1).unwrap();
        let brute: f64 = (0..=60).map(|j| (2 * j + 1) as f64 * law.prob(j)).sum();
        assert!(bound >= brute - 1e-15 && bound - brute < 1e-14, "{bound} {brute}");
    }

    #[test]
    fn geometric_bound_is_a_majorant_in_higher_dimension() {
        let law = GeometricTailLaw::new(vec![0.6, 0.1], 0.3, 0.5).unwrap();
        for k in [-1, 0, 3, 10] {
            let bound = law.volume_tail_bound(3, k).unwrap();
            let brute: f64 = (k + 1..400)
                .map(|j| ball_volume(3, j) as f64 * law.prob(j))
                .sum();
            assert!(bound >= brute && bound - brute < 1e-12 * brute.max(1.0));
        }
    }
}
