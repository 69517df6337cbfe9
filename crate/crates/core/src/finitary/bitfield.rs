//! Random-access fair bits indexed by `(site, class, pile, depth)`.

use serde::{Deserialize, Serialize};

use crate::lattice::Site;
use crate::random::{mix64, DrawClass};

/// A field of bits `Y^v_{n,r}(j)`. Depths `r ≥ 1` are grouped in 64-bit
/// blocks, most significant bit first.
pub trait BitSource: Send + Sync {
    /// Block `b` holds depths `64 b + 1 ..= 64 b + 64`.
    fn word(&self, site: &Site, class: DrawClass, pile: u64, block: u64) -> u64;

    fn bit(&self, site: &Site, class: DrawClass, pile: u64, depth: u32) -> bool {
        debug_assert!(depth >= 1);
        let r = (depth - 1) as u64;
        (self.word(site, class, pile, r / 64) >> (63 - r % 64)) & 1 == 1
    }
}

/// Counter-based keyed hash: stateless and independent of access order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitField {
    pub seed: u64,
}

impl BitField {
    pub fn new(seed: u64) -> Self {
        BitField { seed }
    }
}

impl BitSource for BitField {
    fn word(&self, site: &Site, class: DrawClass, pile: u64, block: u64) -> u64 {
        let mut h = mix64(self.seed ^ 0xB17F_1E1D);
        h = mix64(h ^ site.dim() as u64);
        for &x in site.coords() {
            h = mix64(h ^ x as u64);
        }
        h = mix64(h ^ class.id());
        h = mix64(h ^ pile);
        mix64(h ^ block)
    }
}

/// The field translated by `shift`: reads at `j` come from `j − shift`.
pub struct ShiftedField<'a> {
    pub inner: &'a dyn BitSource,
    pub shift: Site,
}

impl BitSource for ShiftedField<'_> {
    fn word(&self, site: &Site, class: DrawClass, pile: u64, block: u64) -> u64 {
        self.inner.word(&(site - &self.shift), class, pile, block)
    }
}

/// The field with one bit inverted.
pub struct FlippedBit<'a> {
    pub inner: &'a dyn BitSource,
    pub site: Site,
    pub class: DrawClass,
    pub pile: u64,
    pub depth: u32,
}

impl BitSource for FlippedBit<'_> {
    fn word(&self, site: &Site, class: DrawClass, pile: u64, block: u64) -> u64 {
        let w = self.inner.word(site, class, pile, block);
        let r = (self.depth - 1) as u64;
        if *site == self.site && class == self.class && pile == self.pile && block == r / 64 {
            w ^ (1u64 << (63 - r % 64))
        } else {
            w
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_fair() {
        let f = BitField::new(42);
        let s = Site::new([3, -1]);
        assert_eq!(f.word(&s, DrawClass::Range, 2, 0), BitField::new(42).word(&s, DrawClass::Range, 2, 0));
        let n = 200_000u32;
        let mut ones = 0u32;
        let mut agree = 0u32;
        for pile in 0..(n / 64) as u64 {
            for depth in 1..=64 {
                let b = f.bit(&s, DrawClass::Color, pile + 1, depth);
                let c = f.bit(&s, DrawClass::Color, pile + 1, depth % 64 + 1);
                ones += b as u32;
                agree += (b == c) as u32;
            }
        }
        let total = (n / 64) * 64;
        let sd = (total as f64 * 0.25).sqrt();
        assert!(((ones as f64) - total as f64 / 2.0).abs() < 5.0 * sd);
        assert!(((agree as f64) - total as f64 / 2.0).abs() < 5.0 * sd);
    }

    #[test]
    fn depth_addressing_spans_blocks() {
        let f = BitField::new(7);
        let s = Site::new([0]);
        let w1 = f.word(&s, DrawClass::Site, 1, 1);
        assert_eq!(f.bit(&s, DrawClass::Site, 1, 65), w1 >> 63 == 1);
        assert_eq!(f.bit(&s, DrawClass::Site, 1, 128), w1 & 1 == 1);
    }

    #[test]
    fn shift_and_flip() {
        let f = BitField::new(1);
        let shifted = ShiftedField { inner: &f, shift: Site::new([5]) };
        assert_eq!(shifted.word(&Site::new([7]), DrawClass::Range, 1, 0), f.word(&Site::new([2]), DrawClass::Range, 1, 0));
        let flipped = FlippedBit { inner: &f, site: Site::new([0]), class: DrawClass::Color, pile: 3, depth: 70 };
        for depth in 1..=128 {
            let a = f.bit(&Site::new([0]), DrawClass::Color, 3, depth);
            let b = flipped.bit(&Site::new([0]), DrawClass::Color, 3, depth);
            assert_eq!(a != b, depth == 70);
        }
        assert_eq!(flipped.word(&Site::new([1]), DrawClass::Color, 3, 1), f.word(&Site::new([1]), DrawClass::Color, 3, 1));
    }
}
