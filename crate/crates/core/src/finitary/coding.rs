//! The perfect sampler driven entirely by bit piles.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;

use crate::coloring::{perfect_sample_with, PartialConfiguration};
use crate::error::Result;
use crate::lattice::{Site, SiteSet};
use crate::random::{DrawClass, DrawSource};
use crate::rates::RateModel;
use crate::sketch::SketchOptions;

use super::bitfield::{BitSource, ShiftedField};
use super::knuth_yao::{knuth_yao_sample, DEFAULT_MAX_DEPTH};
use super::partition::Partition;

/// One pile read: `bits` leading bits of pile `pile` of `class` at `site`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PileUse {
    pub site: Site,
    pub class: DrawClass,
    pub pile: u64,
    pub bits: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FinitaryReport {
    pub colors: PartialConfiguration,
    /// Sites whose piles were read.
    pub window: SiteSet,
    /// Largest pile index used at any site.
    pub max_pile: u64,
    /// Largest number of bits read from one pile.
    pub max_depth: u32,
    /// Bits consumed per class, in the order I, K, W.
    pub bits_by_class: [u64; 3],
    /// `N(j)`: bits consumed at each site of the window.
    pub bits_per_site: Vec<(Site, u64)>,
    pub n_stop: usize,
    pub footprint: Vec<PileUse>,
}

impl FinitaryReport {
    pub fn total_bits(&self) -> u64 {
        self.bits_by_class.iter().sum()
    }

    /// Whether `(site, class, pile, depth)` was read.
    pub fn contains(&self, site: &Site, class: DrawClass, pile: u64, depth: u32) -> bool {
        self.footprint
            .iter()
            .any(|u| u.site == *site && u.class == class && u.pile == pile && depth <= u.bits)
    }

    /// A random bit index the sampler did not read. Half of the picks sit
    /// just past the read depth of a used pile, the rest anywhere near the
    /// window.
    pub fn unread_bit<R: Rng>(&self, dim: usize, rng: &mut R) -> (Site, DrawClass, u64, u32) {
        loop {
            let pick = if !self.footprint.is_empty() && rng.random_bool(0.5) {
                let u = &self.footprint[rng.random_range(0..self.footprint.len())];
                (u.site.clone(), u.class, u.pile, u.bits + rng.random_range(1..=64))
            } else {
                let base = match self.window.len() {
                    0 => Site::origin(dim),
                    n => self.window.nth(rng.random_range(0..n)).unwrap().clone(),
                };
                let site = Site::new(base.coords().iter().map(|&x| x + rng.random_range(-3..=3)));
                let class = DrawClass::ALL[rng.random_range(0..3)];
                (site, class, rng.random_range(1..=self.max_pile + 2), rng.random_range(1..=128))
            };
            if !self.contains(&pick.0, pick.1, pick.2, pick.3) {
                return pick;
            }
        }
    }
}

/// Funds draws from the piles of a bit field: each `(site, class)` pair
/// uses its piles `1, 2, …` in order.
pub struct PileSource<'a> {
    field: &'a dyn BitSource,
    max_depth: u32,
    counters: BTreeMap<(Site, DrawClass), u64>,
    footprint: Vec<PileUse>,
}

impl<'a> PileSource<'a> {
    pub fn new(field: &'a dyn BitSource, max_depth: u32) -> Self {
        PileSource {
            field,
            max_depth,
            counters: BTreeMap::new(),
            footprint: Vec::new(),
        }
    }

    pub fn footprint(&self) -> &[PileUse] {
        &self.footprint
    }
}

impl DrawSource for PileSource<'_> {
    fn draw(&mut self, class: DrawClass, site: &Site, partition: &dyn Partition) -> Result<usize> {
        let counter = self.counters.entry((site.clone(), class)).or_insert(0);
        *counter += 1;
        let pile = *counter;
        let field = self.field;
        let mut block = u64::MAX;
        let mut word = 0u64;
        let out = knuth_yao_sample(
            partition,
            |m| {
                let r = (m - 1) as u64;
                if r / 64 != block {
                    block = r / 64;
                    word = field.word(site, class, pile, block);
                }
                (word >> (63 - r % 64)) & 1 == 1
            },
            self.max_depth,
        )?;
        self.footprint.push(PileUse {
            site: site.clone(),
            class,
            pile,
            bits: out.bits,
        });
        Ok(out.cell)
    }
}

/// Uniforms read from the same piles, `u = Σ_{r ≤ 53} 2^{−r} Y_r`, located by
/// floating-point comparison. Agrees with [`PileSource`] whenever the
/// interval sampler stops within 53 bits.
pub struct PileUniformSource<'a> {
    field: &'a dyn BitSource,
    counters: BTreeMap<(Site, DrawClass), u64>,
}

impl<'a> PileUniformSource<'a> {
    pub fn new(field: &'a dyn BitSource) -> Self {
        PileUniformSource {
            field,
            counters: BTreeMap::new(),
        }
    }
}

impl DrawSource for PileUniformSource<'_> {
    fn draw(&mut self, class: DrawClass, site: &Site, partition: &dyn Partition) -> Result<usize> {
        let counter = self.counters.entry((site.clone(), class)).or_insert(0);
        *counter += 1;
        let word = self.field.word(site, class, *counter, 0);
        let u = (word >> 11) as f64 / (1u64 << 53) as f64;
        Ok(partition.locate_uniform(u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FinitaryOptions {
    pub max_depth: u32,
    pub sketch: SketchOptions,
}

impl Default for FinitaryOptions {
    fn default() -> Self {
        FinitaryOptions {
            max_depth: DEFAULT_MAX_DEPTH,
            sketch: SketchOptions::default(),
        }
    }
}

/// Runs the sketch and coloring on bit piles and reports the footprint.
pub fn finitary_sample(
    model: &dyn RateModel,
    f: &SiteSet,
    field: &dyn BitSource,
    opts: FinitaryOptions,
) -> Result<FinitaryReport> {
    let mut src = PileSource::new(field, opts.max_depth);
    let (trace, colors) = perfect_sample_with(model, f, &mut src, opts.sketch)?;
    let footprint = src.footprint;
    let mut bits_by_class = [0u64; 3];
    let mut per_site: BTreeMap<Site, u64> = BTreeMap::new();
    let mut window = BTreeSet::new();
    let mut max_pile = 0;
    let mut max_depth = 0;
    for u in &footprint {
        bits_by_class[u.class.id() as usize] += u.bits as u64;
        *per_site.entry(u.site.clone()).or_insert(0) += u.bits as u64;
        window.insert(u.site.clone());
        max_pile = max_pile.max(u.pile);
        max_depth = max_depth.max(u.bits);
    }
    Ok(FinitaryReport {
        colors,
        window: window.into_iter().collect(),
        max_pile,
        max_depth,
        bits_by_class,
        bits_per_site: per_site.into_iter().collect(),
        n_stop: trace.n_stop(),
        footprint,
    })
}

/// Whether sampling `F + v` from the field shifted by `v` gives the
/// translated output of sampling `F`.
pub fn equivariance_check(
    model: &dyn RateModel,
    f: &SiteSet,
    field: &dyn BitSource,
    shift: &Site,
    opts: FinitaryOptions,
) -> Result<bool> {
    let base = finitary_sample(model, f, field, opts)?;
    let shifted_field = ShiftedField {
        inner: field,
        shift: shift.clone(),
    };
    let moved = finitary_sample(model, &f.translate(shift), &shifted_field, opts)?;
    Ok(moved.colors == base.colors.translate(shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::perfect_sample_with;
    use crate::finitary::{BitField, FlippedBit};
    use crate::rates::{example_model, spontaneous_model, Alphabet, GeometricQ};

    #[test]
    fn spontaneous_footprint() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.5, 0.5], 1.0).unwrap();
        let f = SiteSet::singleton(Site::new([0]));
        let r = finitary_sample(&m, &f, &BitField::new(3), FinitaryOptions::default()).unwrap();
        assert_eq!(r.window, f);
        assert_eq!(r.footprint.len(), 2);
        assert_eq!(r.footprint[0].class, DrawClass::Range);
        assert_eq!(r.footprint[1].class, DrawClass::Color);
        assert_eq!(r.bits_by_class, [0, 1, 1]);
        assert_eq!(r.max_pile, 1);
    }

    #[test]
    fn deterministic_and_local() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        let f: SiteSet = [0, 3].iter().map(|&x| Site::new([x])).collect();
        for seed in 0..50 {
            let field = BitField::new(seed);
            let a = finitary_sample(&m, &f, &field, FinitaryOptions::default()).unwrap();
            let b = finitary_sample(&m, &f, &field, FinitaryOptions::default()).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            // Flip the first unread bit of every used pile.
            for u in &a.footprint {
                let flipped = FlippedBit { inner: &field, site: u.site.clone(), class: u.class, pile: u.pile, depth: u.bits + 1 };
                let c = finitary_sample(&m, &f, &flipped, FinitaryOptions::default()).unwrap();
                assert_eq!(c.colors, a.colors);
            }
            assert!(equivariance_check(&m, &f, &field, &Site::new([7]), FinitaryOptions::default()).unwrap());
        }
    }

    #[test]
    fn bit_and_uniform_drivers_agree() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        let f: SiteSet = [0, 1].iter().map(|&x| Site::new([x])).collect();
        for seed in 0..300 {
            let field = BitField::new(seed);
            let mut bits = PileSource::new(&field, 53);
            let mut unif = PileUniformSource::new(&field);
            if let Ok((_, a)) = perfect_sample_with(&m, &f, &mut bits, SketchOptions::default()) {
                let (_, b) = perfect_sample_with(&m, &f, &mut unif, SketchOptions::default()).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}
