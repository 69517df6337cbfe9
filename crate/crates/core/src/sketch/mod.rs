//! Backward black-and-white sketches.
//!
//! Starting from a finite set `F`, a sketch repeatedly picks a site `I` of the
//! current support `C` with probability `∝ M_I`, a range `K ~ λ_I`, and
//! replaces `I` by `V_I(K)`. Without deaths a spontaneous update (`K = -1`)
//! keeps `I`; with deaths it removes `I`.

mod diagnostics;
mod reverse;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finitary::{FinitePartition, Partition, RangePartition};
use crate::lattice::{apply_pi_map, Site, SiteSet};
use crate::random::{DrawClass, DrawSource, RngSource};
use crate::rates::RateModel;

pub use diagnostics::{fit_log_slope, sketch_diagnostics, DiagnosticRow, SketchDiagnostics};
pub use reverse::{simulate_reverse_process, ReverseJump, ReverseMarkedPoisson, ReversePath};

/// Default cap on sketch steps.
pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchOptions {
    pub step_budget: u64,
}

impl Default for SketchOptions {
    fn default() -> Self {
        SketchOptions {
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchRecord {
    pub site: Site,
    pub range: i64,
    /// Backward time of the update, for timed sketches.
    pub time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchTrace {
    /// The starting set `F`.
    pub initial: SiteSet,
    /// Records in backward order: `records[0]` is the update closest to the
    /// reference time.
    pub records: Vec<SketchRecord>,
    /// Final support `C`.
    pub support: SiteSet,
    /// Accumulated backward time, for timed sketches.
    pub t_stop: Option<f64>,
    /// Backward horizon of a timed sketch.
    pub horizon: Option<f64>,
    pub deaths: bool,
}

impl SketchTrace {
    pub fn n_stop(&self) -> usize {
        self.records.len()
    }

    /// Whether the last record lies at or beyond the horizon. Such a record
    /// is kept but did not change the support.
    pub fn has_overshoot(&self) -> bool {
        match (self.horizon, self.records.last()) {
            (Some(h), Some(r)) => r.time.is_some_and(|t| t >= h),
            _ => false,
        }
    }

    /// Records that act within the horizon.
    pub fn effective_records(&self) -> &[SketchRecord] {
        let n = self.records.len() - usize::from(self.has_overshoot());
        &self.records[..n]
    }

    /// Re-applies the records to `F`, checking that every `I` was in the
    /// support when chosen; returns the resulting support.
    pub fn replay(&self) -> Result<SiteSet> {
        let mut c = self.initial.clone();
        for (n, rec) in self.effective_records().iter().enumerate() {
            if !c.contains(&rec.site) {
                return Err(Error::InvalidConfig(format!(
                    "record {} chose {:?} outside the support",
                    n + 1,
                    rec.site
                )));
            }
            step_support(&mut c, &rec.site, rec.range, self.deaths);
        }
        Ok(c)
    }
}

fn step_support(c: &mut SiteSet, site: &Site, range: i64, deaths: bool) {
    if range >= 0 || deaths {
        apply_pi_map(site, range, c);
    }
}

/// Cells `[l/n, (l+1)/n)`.
pub(crate) struct EqualCells(pub usize);

impl Partition for EqualCells {
    fn cells(&self) -> Option<usize> {
        Some(self.0)
    }

    fn threshold(&self, l: usize) -> f64 {
        if l >= self.0 {
            1.0
        } else {
            l as f64 / self.0 as f64
        }
    }

    fn locate_uniform(&self, u: f64) -> usize {
        // Largest l with θ(l) ≤ u; the float guess is corrected by at most one.
        let mut l = ((u * self.0 as f64) as usize).min(self.0 - 1);
        while l > 0 && self.threshold(l) > u {
            l -= 1;
        }
        while l + 1 < self.0 && self.threshold(l + 1) <= u {
            l += 1;
        }
        l
    }
}

/// Picks `I ∈ C` with probability `∝ M_I` over the sorted support. The draw
/// is funded by the smallest member of `C` and skipped when `|C| = 1`.
pub(crate) fn choose_site<S: DrawSource>(
    model: &dyn RateModel,
    c: &SiteSet,
    src: &mut S,
) -> Result<Site> {
    let anchor = c.first().expect("non-empty support").clone();
    if c.len() == 1 {
        return Ok(anchor);
    }
    let idx = if model.is_homogeneous() {
        src.draw(DrawClass::Site, &anchor, &EqualCells(c.len()))?
    } else {
        let weights: Vec<f64> = c.iter().map(|j| model.total_rate(j)).collect();
        src.draw(DrawClass::Site, &anchor, &FinitePartition::from_weights(&weights))?
    };
    Ok(c.nth(idx).expect("cell index within support").clone())
}

pub(crate) fn choose_range<S: DrawSource>(
    model: &dyn RateModel,
    site: &Site,
    src: &mut S,
) -> Result<i64> {
    let cell = src.draw(DrawClass::Range, site, &RangePartition::new(model.range_law(site)))?;
    Ok(RangePartition::range_of(cell))
}

/// The untimed deaths sketch over an arbitrary draw source.
pub fn backward_sketch_with<S: DrawSource>(
    model: &dyn RateModel,
    f: &SiteSet,
    src: &mut S,
    opts: SketchOptions,
) -> Result<SketchTrace> {
    let mut c = f.clone();
    let mut records = Vec::new();
    while !c.is_empty() {
        if records.len() as u64 >= opts.step_budget {
            return Err(Error::BudgetExhausted {
                budget: opts.step_budget,
            });
        }
        let site = choose_site(model, &c, src)?;
        let range = choose_range(model, &site, src)?;
        step_support(&mut c, &site, range, true);
        records.push(SketchRecord {
            site,
            range,
            time: None,
        });
    }
    Ok(SketchTrace {
        initial: f.clone(),
        records,
        support: c,
        t_stop: None,
        horizon: None,
        deaths: true,
    })
}

/// The untimed sketch with deaths, run until the support is empty.
pub fn backward_sketch<R: Rng>(
    model: &dyn RateModel,
    f: &SiteSet,
    rng: &mut R,
    opts: SketchOptions,
) -> Result<SketchTrace> {
    backward_sketch_with(model, f, &mut RngSource::new(rng), opts)
}

fn total_rate_of(model: &dyn RateModel, c: &SiteSet) -> f64 {
    if model.is_homogeneous() {
        c.first().map_or(0.0, |j| model.total_rate(j)) * c.len() as f64
    } else {
        c.iter().map(|j| model.total_rate(j)).sum()
    }
}

fn timed_sketch<R: Rng>(
    model: &dyn RateModel,
    f: &SiteSet,
    horizon: f64,
    deaths: bool,
    rng: &mut R,
    opts: SketchOptions,
) -> Result<SketchTrace> {
    if horizon.is_nan() || horizon < 0.0 {
        return Err(Error::InvalidConfig(format!("horizon {horizon} must be non-negative")));
    }
    let mut c = f.clone();
    let mut records = Vec::new();
    let mut t_stop = 0.0;
    while t_stop < horizon && !c.is_empty() {
        if records.len() as u64 >= opts.step_budget {
            return Err(Error::BudgetExhausted {
                budget: opts.step_budget,
            });
        }
        let rate = total_rate_of(model, &c);
        t_stop += Exp::new(rate)
            .map_err(|e| Error::InvalidModel(e.to_string()))?
            .sample(rng);
        let mut src = RngSource::new(rng);
        let site = choose_site(model, &c, &mut src)?;
        let range = choose_range(model, &site, &mut src)?;
        if t_stop < horizon {
            step_support(&mut c, &site, range, deaths);
        }
        records.push(SketchRecord {
            site,
            range,
            time: Some(t_stop),
        });
    }
    Ok(SketchTrace {
        initial: f.clone(),
        records,
        support: c,
        t_stop: Some(t_stop),
        horizon: Some(horizon),
        deaths,
    })
}

/// Timed sketch without deaths, stopped at backward time `t`.
pub fn backward_sketch_no_deaths<R: Rng>(
    model: &dyn RateModel,
    f: &SiteSet,
    t: f64,
    rng: &mut R,
    opts: SketchOptions,
) -> Result<SketchTrace> {
    timed_sketch(model, f, t, false, rng, opts)
}

/// The timed sketch where a spontaneous update removes its site.
pub fn backward_sketch_coupling<R: Rng>(
    model: &dyn RateModel,
    f: &SiteSet,
    t: f64,
    rng: &mut R,
    opts: SketchOptions,
) -> Result<SketchTrace> {
    timed_sketch(model, f, t, true, rng, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::replicate_rng;
    use crate::rates::{example_model, spontaneous_model, Alphabet, GeometricQ};
    use crate::lattice::pi_map;

    fn set(xs: &[i64]) -> SiteSet {
        xs.iter().map(|&x| Site::new([x])).collect()
    }

    #[test]
    fn equal_cells_locate() {
        let p = EqualCells(3);
        for (u, l) in [(0.0, 0), (0.3333, 0), (1.0 / 3.0, 1), (0.9999999, 2)] {
            assert_eq!(p.locate_uniform(u), l);
            assert_eq!(p.locate_uniform(u), Partition::locate_dyadic(&p, (u * 2f64.powi(60)) as u128, 60));
        }
    }

    #[test]
    fn spontaneous_sketches() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.5, 0.5], 1.0).unwrap();
        let mut rng = replicate_rng(1, 0);
        let tr = backward_sketch(&m, &set(&[0]), &mut rng, SketchOptions::default()).unwrap();
        assert_eq!(tr.n_stop(), 1);
        assert_eq!(tr.records[0].range, -1);
        assert!(tr.support.is_empty());
        let empty = backward_sketch(&m, &SiteSet::new(), &mut rng, SketchOptions::default()).unwrap();
        assert_eq!(empty.n_stop(), 0);

        let tr = backward_sketch_no_deaths(&m, &set(&[0]), 3.0, &mut rng, SketchOptions::default()).unwrap();
        assert_eq!(tr.support, set(&[0]));
        assert!(tr.has_overshoot());
        assert!(tr.records.iter().all(|r| r.range == -1 && r.site == Site::new([0])));
        let zero = backward_sketch_no_deaths(&m, &set(&[0]), 0.0, &mut rng, SketchOptions::default()).unwrap();
        assert_eq!((zero.n_stop(), zero.t_stop), (0, Some(0.0)));
        assert_eq!(zero.support, set(&[0]));
    }

    #[test]
    fn times_increase_and_replay_matches() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        for rep in 0..200 {
            let mut rng = replicate_rng(9, rep);
            let f = set(&[0, 2]);
            let tr = backward_sketch_no_deaths(&m, &f, 2.0, &mut rng, SketchOptions::default()).unwrap();
            let times: Vec<f64> = tr.records.iter().map(|r| r.time.unwrap()).collect();
            assert!(times.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(tr.replay().unwrap(), tr.support);
            assert!(f.is_subset(&tr.support));

            let tr = backward_sketch(&m, &f, &mut rng, SketchOptions::default()).unwrap();
            assert_eq!(tr.replay().unwrap(), SiteSet::new());
            assert_eq!(tr.records.last().unwrap().range, -1);
            // Same bookkeeping through the π-maps.
            let mut c = f.clone();
            for r in &tr.records {
                c = pi_map(&r.site, r.range, &c);
            }
            assert!(c.is_empty());
        }
    }

    #[test]
    fn budget_is_enforced() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        let mut rng = replicate_rng(3, 0);
        let opts = SketchOptions { step_budget: 1 };
        let f = set(&[0, 1, 2, 3]);
        assert!(matches!(
            backward_sketch(&m, &f, &mut rng, opts),
            Err(Error::BudgetExhausted { budget: 1 })
        ));
    }
}
