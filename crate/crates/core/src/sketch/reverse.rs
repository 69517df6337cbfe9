//! The continuous-time reverse sketch driven by per-site marked Poisson
//! streams, used as an oracle for the embedded chains of the sketches.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finitary::{Partition, RangePartition};
use crate::lattice::{apply_pi_map, Site, SiteSet};
use crate::random::mix64;
use crate::rates::RateModel;

use super::SketchOptions;

struct SiteStream {
    rng: ChaCha8Rng,
    time: f64,
    mark: i64,
}

/// Lazily generated streams: each site carries i.i.d. `Exp(M_j)` gaps and
/// i.i.d. `λ_j` marks, independent across sites.
pub struct ReverseMarkedPoisson<'m> {
    model: &'m dyn RateModel,
    seed: u64,
    streams: HashMap<Site, SiteStream>,
}

impl<'m> ReverseMarkedPoisson<'m> {
    pub fn new(model: &'m dyn RateModel, seed: u64) -> Self {
        ReverseMarkedPoisson {
            model,
            seed,
            streams: HashMap::new(),
        }
    }

    fn site_seed(&self, site: &Site) -> u64 {
        site.coords()
            .iter()
            .fold(mix64(self.seed ^ 0x5eed), |h, &x| mix64(h ^ x as u64))
    }

    fn advance(model: &dyn RateModel, site: &Site, s: &mut SiteStream) -> Result<()> {
        let rate = model.total_rate(site);
        s.time += Exp::new(rate)
            .map_err(|e| Error::InvalidModel(e.to_string()))?
            .sample(&mut s.rng);
        let u: f64 = s.rng.random();
        s.mark = RangePartition::range_of(RangePartition::new(model.range_law(site)).locate_uniform(u));
        Ok(())
    }

    /// The first event of `site` strictly after time `u`.
    pub fn next_after(&mut self, site: &Site, u: f64) -> Result<(f64, i64)> {
        if !self.streams.contains_key(site) {
            let mut s = SiteStream {
                rng: ChaCha8Rng::seed_from_u64(self.site_seed(site)),
                time: 0.0,
                mark: 0,
            };
            Self::advance(self.model, site, &mut s)?;
            self.streams.insert(site.clone(), s);
        }
        let s = self.streams.get_mut(site).unwrap();
        while s.time <= u {
            Self::advance(self.model, site, s)?;
        }
        Ok((s.time, s.mark))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReverseJump {
    pub time: f64,
    pub site: Site,
    pub range: i64,
    /// `|C|` right after the jump.
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReversePath {
    pub initial: SiteSet,
    pub horizon: f64,
    pub jumps: Vec<ReverseJump>,
    pub support: SiteSet,
}

impl ReversePath {
    /// `|C_u|`.
    pub fn size_at(&self, u: f64) -> usize {
        let n = self.jumps.partition_point(|j| j.time <= u);
        if n == 0 {
            self.initial.len()
        } else {
            self.jumps[n - 1].size
        }
    }
}

/// The set-valued jump process `C_u`, `u ∈ [0, horizon]`, started from `F`:
/// at each marked event `(T, K)` of a site `j ∈ C`, `C ← π^{(j,K)}(C)`.
pub fn simulate_reverse_process(
    model: &dyn RateModel,
    f: &SiteSet,
    horizon: f64,
    seed: u64,
    opts: SketchOptions,
) -> Result<ReversePath> {
    let mut streams = ReverseMarkedPoisson::new(model, seed);
    let mut c = f.clone();
    let mut u = 0.0;
    let mut jumps = Vec::new();
    while !c.is_empty() {
        if jumps.len() as u64 >= opts.step_budget {
            return Err(Error::BudgetExhausted {
                budget: opts.step_budget,
            });
        }
        let members: Vec<Site> = c.iter().cloned().collect();
        let mut best: Option<(f64, i64, Site)> = None;
        for j in members {
            let (t, k) = streams.next_after(&j, u)?;
            if best.as_ref().is_none_or(|b| t < b.0) {
                best = Some((t, k, j));
            }
        }
        let (t, k, j) = best.unwrap();
        if t > horizon {
            break;
        }
        u = t;
        apply_pi_map(&j, k, &mut c);
        jumps.push(ReverseJump {
            time: t,
            site: j,
            range: k,
            size: c.len(),
        });
    }
    Ok(ReversePath {
        initial: f.clone(),
        horizon,
        jumps,
        support: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{spontaneous_model, Alphabet};

    #[test]
    fn pure_death_sizes_decay() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.5, 0.5], 1.5).unwrap();
        let f: SiteSet = (0..4).map(|x| Site::new([x])).collect();
        let runs = 20_000;
        let u = 0.5;
        let mut total = 0usize;
        for seed in 0..runs {
            let path = simulate_reverse_process(&m, &f, 5.0, seed, SketchOptions::default()).unwrap();
            assert!(path.jumps.windows(2).all(|w| w[0].size > w[1].size));
            total += path.size_at(u);
        }
        let mean = total as f64 / runs as f64;
        let p = (-1.5 * u).exp();
        let se = (4.0 * p * (1.0 - p) / runs as f64).sqrt();
        assert!((mean - 4.0 * p).abs() < 4.0 * se, "{mean} vs {}", 4.0 * p);
    }

    #[test]
    fn empty_start_stays_empty() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.5, 0.5], 1.0).unwrap();
        let path = simulate_reverse_process(&m, &SiteSet::new(), 3.0, 1, SketchOptions::default()).unwrap();
        assert!(path.jumps.is_empty());
        assert_eq!(path.size_at(2.0), 0);
    }

    #[test]
    fn streams_are_consistent() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.5, 0.5], 1.0).unwrap();
        let mut a = ReverseMarkedPoisson::new(&m, 4);
        let mut b = ReverseMarkedPoisson::new(&m, 4);
        let s = Site::new([3]);
        let (t1, _) = a.next_after(&s, 0.0).unwrap();
        let (t2, _) = a.next_after(&s, t1).unwrap();
        assert!(t2 > t1);
        assert_eq!(b.next_after(&s, t1).unwrap().0, t2);
    }
}
