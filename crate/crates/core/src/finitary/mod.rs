//! Finitary coding: every random choice of the perfect sampler is funded by
//! fair bits read from site-attributed piles.

mod bitfield;
mod coding;
mod knuth_yao;
mod partition;
mod stats;

pub use bitfield::{BitField, BitSource, FlippedBit, ShiftedField};
pub use coding::{
    equivariance_check, finitary_sample, FinitaryOptions, FinitaryReport, PileSource, PileUniformSource, PileUse,
};
pub use knuth_yao::{
    entropy_bits, knuth_yao_sample, tail_bound, thresholds_below, KnuthYao, DEFAULT_MAX_DEPTH, MAX_DEPTH_LIMIT,
};
pub use partition::{cmp_dyadic, FinitePartition, Partition, RangePartition};
pub use stats::{knuth_yao_statistics, law_entropy, pile_statistics, KnuthYaoStats, PileStatistics, TailRow};
