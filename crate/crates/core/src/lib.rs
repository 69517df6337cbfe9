//! Perfect simulation of multicolor interacting particle systems on `Z^d`
//! with infinite-range interactions.
//!
//! The engine works from a mixture representation of the change rates,
//! `c_i(a, η) = M_i Σ_k λ_i(k) p_i^[k](a | η(V_i(k)))`, and builds on it:
//!
//! - [`lattice`]: sites, L1 balls and the set maps used by the backward sketch.
//! - [`rates`]: rate models, the regenerating example, heat-bath dynamics and
//!   the summability checks.
//! - [`decompose`]: computes `α`, `λ` and the local kernels from finite-range rates.
//! - [`sketch`]: backward black-and-white sketches and the reverse jump process.
//! - [`coloring`]: forward coloring, perfect samples, stationary trajectories
//!   and the coupling experiment.
//! - [`finitary`]: Knuth–Yao sampling from bit piles and the finitary coding.
//! - [`harness`]: torus oracle, statistics, configuration and experiments.

pub mod coloring;
pub mod decompose;
pub mod error;
pub mod finitary;
pub mod harness;
pub mod lattice;
pub mod random;
pub mod rates;
pub mod sketch;

pub use error::{Error, Result};
pub use lattice::{Site, SiteSet};
pub use rates::{Alphabet, Color, RateModel};
