//! Bit-consumption statistics for interval sampling and the finitary coding.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::lattice::{Site, SiteSet};
use crate::random::{derive_seed, DrawClass};
use crate::rates::{RangeLaw, RateModel};

use super::bitfield::{BitField, BitSource};
use super::coding::{finitary_sample, FinitaryOptions};
use super::knuth_yao::{entropy_bits, knuth_yao_sample, tail_bound};
use super::partition::Partition;

/// Entropy in bits of a range law, summing until the tail is negligible.
pub fn law_entropy(law: &dyn RangeLaw) -> f64 {
    let mut h = 0.0;
    let mut k = -1;
    loop {
        h += entropy_bits([law.prob(k)]);
        if law.tail_mass(k) < 1e-300 || k > 100_000 {
            return h;
        }
        k += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub k: u32,
    pub frequency: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KnuthYaoStats {
    pub draws: u64,
    pub mean_bits: f64,
    pub se_bits: f64,
    pub min_bits: u32,
    pub max_bits: u32,
    /// Counts per cell, for cells `0..counts.len()`.
    pub counts: Vec<u64>,
    pub tails: Vec<TailRow>,
}

/// Runs the interval sampler `draws` times on fresh piles of a bit field.
pub fn knuth_yao_statistics(
    partition: &(dyn Partition + Sync),
    draws: u64,
    seed: u64,
    tail_ks: &[u32],
    max_depth: u32,
) -> Result<KnuthYaoStats> {
    let field = BitField::new(seed);
    let origin = Site::origin(1);
    let outs = (0..draws)
        .into_par_iter()
        .map(|n| {
            let mut block = u64::MAX;
            let mut word = 0;
            knuth_yao_sample(
                partition,
                |m| {
                    let r = (m - 1) as u64;
                    if r / 64 != block {
                        block = r / 64;
                        word = field.word(&origin, DrawClass::Range, n + 1, block);
                    }
                    (word >> (63 - r % 64)) & 1 == 1
                },
                max_depth,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let n = outs.len().max(1) as f64;
    let mean = outs.iter().map(|o| o.bits as f64).sum::<f64>() / n;
    let var = outs.iter().map(|o| (o.bits as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let cells = outs.iter().map(|o| o.cell + 1).max().unwrap_or(0);
    let mut counts = vec![0u64; cells];
    for o in &outs {
        counts[o.cell] += 1;
    }
    let tails = tail_ks
        .iter()
        .map(|&k| TailRow {
            k,
            frequency: outs.iter().filter(|o| o.bits > k).count() as f64 / n,
            bound: tail_bound(partition, k),
        })
        .collect();
    Ok(KnuthYaoStats {
        draws,
        mean_bits: mean,
        se_bits: (var / n).sqrt(),
        min_bits: outs.iter().map(|o| o.bits).min().unwrap_or(0),
        max_bits: outs.iter().map(|o| o.bits).max().unwrap_or(0),
        counts,
        tails,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PileStatistics {
    pub replicates: u64,
    /// Mean bits per range draw.
    pub mean_range_bits: f64,
    pub se_range_bits: f64,
    /// `H(λ) + 2` for the first site class.
    pub entropy_bound: f64,
    pub mean_bits_by_class: [f64; 3],
    /// Mean `N(j)` per site of the union of windows, sorted by site.
    pub mean_bits_per_site: Vec<(Site, f64)>,
    pub sup_mean_site_bits: f64,
    /// Smallest integer exceeding `sup_j E[N(j)]`.
    pub suggested_pile_size: u64,
    pub mean_window: f64,
    pub max_pile: u64,
}

/// Monte Carlo bit accounting for the finitary sampler on `F`.
pub fn pile_statistics(
    model: &dyn RateModel,
    f: &SiteSet,
    replicates: u64,
    seed: u64,
    opts: FinitaryOptions,
) -> Result<PileStatistics> {
    let reports = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let field = BitField::new(derive_seed(seed, &format!("pile-{rep}")));
            finitary_sample(model, f, &field, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = replicates.max(1) as f64;
    let range_bits: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.footprint.iter().filter(|u| u.class == DrawClass::Range).map(|u| u.bits as f64))
        .collect();
    let draws = range_bits.len().max(1) as f64;
    let mean_range = range_bits.iter().sum::<f64>() / draws;
    let var = range_bits.iter().map(|b| (b - mean_range).powi(2)).sum::<f64>() / (draws - 1.0).max(1.0);
    let mut by_class = [0u64; 3];
    let mut per_site = std::collections::BTreeMap::<Site, u64>::new();
    let mut window = 0;
    let mut max_pile = 0;
    for r in &reports {
        for (c, b) in by_class.iter_mut().zip(r.bits_by_class) {
            *c += b;
        }
        for (s, b) in &r.bits_per_site {
            *per_site.entry(s.clone()).or_insert(0) += *b;
        }
        window += r.window.len();
        max_pile = max_pile.max(r.max_pile);
    }
    let per_site: Vec<(Site, f64)> = per_site.into_iter().map(|(s, b)| (s, b as f64 / n)).collect();
    let sup = per_site.iter().map(|p| p.1).fold(0.0, f64::max);
    let law = model.site_classes().first().map(|(_, l)| law_entropy(*l)).unwrap_or(0.0);
    Ok(PileStatistics {
        replicates,
        mean_range_bits: mean_range,
        se_range_bits: (var / draws).sqrt(),
        entropy_bound: law + 2.0,
        mean_bits_by_class: by_class.map(|b| b as f64 / n),
        mean_bits_per_site: per_site,
        sup_mean_site_bits: sup,
        suggested_pile_size: sup.floor() as u64 + 1,
        mean_window: window as f64 / n,
        max_pile,
    })
}
