//! Forward Gillespie simulation of finite-range rates on the torus
//! `(Z/LZ)^d`, used as an independent approximate oracle for `μ`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::coloring::cylinder_index;
use crate::error::{Error, Result};
use crate::lattice::{Site, SiteSet};
use crate::random::replicate_rng;
use crate::rates::{Color, ColorView, RawRates};

/// The configuration read with periodic wrapping.
struct TorusView<'a> {
    config: &'a [Color],
    side: i64,
}

impl TorusView<'_> {
    fn index(&self, site: &Site) -> usize {
        site.coords()
            .iter()
            .rev()
            .fold(0i64, |acc, &x| acc * self.side + x.rem_euclid(self.side)) as usize
    }
}

impl ColorView for TorusView<'_> {
    fn color_at(&self, site: &Site) -> Option<Color> {
        Some(self.config[self.index(site)])
    }
}

pub struct TorusSimulator<'a> {
    rates: &'a dyn RawRates,
    side: i64,
    dim: usize,
    config: Vec<Color>,
    time: f64,
    clock: Exp<f64>,
    rng: ChaCha8Rng,
    law: Vec<f64>,
}

/// One update: the site index and the colors before and after.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusEvent {
    pub site: usize,
    pub old: Color,
    pub new: Color,
}

impl<'a> TorusSimulator<'a> {
    /// Starts from i.i.d. uniform colors.
    pub fn new(rates: &'a dyn RawRates, side: usize, mut rng: ChaCha8Rng) -> Result<Self> {
        let range = rates.range();
        if side < 2 * range + 1 {
            return Err(Error::TorusTooSmall { side, range });
        }
        let dim = rates.dimension();
        let volume = (side as u64)
            .checked_pow(dim as u32)
            .filter(|&v| v <= 1 << 28)
            .ok_or_else(|| Error::InvalidConfig(format!("torus {side}^{dim} is too large")))?;
        let a = rates.alphabet_size();
        let config = (0..volume).map(|_| rng.random_range(0..a) as Color).collect();
        let clock = Exp::new(volume as f64 * rates.total_rate()).map_err(|e| Error::InvalidModel(e.to_string()))?;
        Ok(TorusSimulator {
            rates,
            side: side as i64,
            dim,
            config,
            time: 0.0,
            clock,
            rng,
            law: vec![0.0; a],
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn config(&self) -> &[Color] {
        &self.config
    }

    pub fn volume(&self) -> usize {
        self.config.len()
    }

    /// Event rate of the whole torus.
    pub fn total_event_rate(&self) -> f64 {
        self.volume() as f64 * self.rates.total_rate()
    }

    pub fn site_of(&self, mut index: usize) -> Site {
        let side = self.side as usize;
        Site::new((0..self.dim).map(|_| {
            let x = index % side;
            index /= side;
            x as i64
        }))
    }

    pub fn color_at(&self, site: &Site) -> Color {
        self.view().color_at(site).expect("torus is fully colored")
    }

    fn view(&self) -> TorusView<'_> {
        TorusView {
            config: &self.config,
            side: self.side,
        }
    }

    /// One update at a uniformly chosen site, redrawing its color from
    /// `c(·, η) / M`. Returns the event and advances the clock.
    pub fn step(&mut self) -> Result<TorusEvent> {
        self.time += self.clock.sample(&mut self.rng);
        self.update()
    }

    fn update(&mut self) -> Result<TorusEvent> {
        let index = self.rng.random_range(0..self.config.len());
        let site = self.site_of(index);
        let view = TorusView {
            config: &self.config,
            side: self.side,
        };
        self.rates.conditional_law(&site, &view, &mut self.law)?;
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut new = self.law.len() - 1;
        for (a, &p) in self.law.iter().enumerate() {
            acc += p;
            if u < acc {
                new = a;
                break;
            }
        }
        let old = self.config[index];
        self.config[index] = new as Color;
        Ok(TorusEvent {
            site: index,
            old,
            new: new as Color,
        })
    }

    /// Runs until the clock reaches `time + duration`. The pending waiting
    /// time is discarded at the boundary, which is exact by memorylessness.
    pub fn run_for(&mut self, duration: f64) -> Result<()> {
        self.run_with(duration, |_, _| {})
    }

    /// As [`run_for`](Self::run_for), calling `observe` after every event.
    pub fn run_with(&mut self, duration: f64, mut observe: impl FnMut(&Self, TorusEvent)) -> Result<()> {
        let target = self.time + duration;
        loop {
            let dt = self.clock.sample(&mut self.rng);
            if self.time + dt > target {
                self.time = target;
                return Ok(());
            }
            self.time += dt;
            let event = self.update()?;
            observe(self, event);
        }
    }

    pub fn colors_on(&self, sites: &SiteSet) -> Vec<Color> {
        sites.iter().map(|s| self.color_at(s)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleParams {
    pub side: usize,
    pub burn_in: f64,
    pub thinning: f64,
    pub samples: u64,
    pub chains: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            side: 64,
            burn_in: 1000.0,
            thinning: 10.0,
            samples: 100_000,
            chains: 16,
        }
    }
}

/// Cylinder counts on each requested set, from thinned snapshots of
/// independent chains after burn-in.
pub fn torus_long_run(
    rates: &dyn RawRates,
    params: &OracleParams,
    cylinders: &[SiteSet],
    seed: u64,
) -> Result<Vec<Vec<u64>>> {
    use rayon::prelude::*;
    if params.chains == 0 || params.samples == 0 {
        return Err(Error::InvalidConfig("oracle needs at least one chain and one sample".into()));
    }
    let a = rates.alphabet_size();
    let sizes: Vec<usize> = cylinders
        .iter()
        .map(|f| a.checked_pow(f.len() as u32).filter(|&n| n <= 1 << 20))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidConfig("cylinder too large to tabulate".into()))?;
    let per_chain = params.samples.div_ceil(params.chains);
    let partial = (0..params.chains)
        .into_par_iter()
        .map(|chain| {
            let mut sim = TorusSimulator::new(rates, params.side, replicate_rng(seed, chain))?;
            sim.run_for(params.burn_in)?;
            let mut counts: Vec<Vec<u64>> = sizes.iter().map(|&n| vec![0; n]).collect();
            let take = per_chain.min(params.samples.saturating_sub(chain * per_chain));
            for _ in 0..take {
                sim.run_for(params.thinning)?;
                for (f, c) in cylinders.iter().zip(counts.iter_mut()) {
                    c[cylinder_index(&sim.colors_on(f), a)] += 1;
                }
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total: Vec<Vec<u64>> = sizes.iter().map(|&n| vec![0; n]).collect();
    for counts in partial {
        for (t, c) in total.iter_mut().zip(counts) {
            for (x, y) in t.iter_mut().zip(c) {
                *x += y;
            }
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluxPair {
    pub from: usize,
    pub to: usize,
    pub forward: u64,
    pub backward: u64,
    /// `(forward − backward) / sqrt(forward + backward)`.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluxReport {
    pub pairs: Vec<FluxPair>,
    pub max_abs_z: f64,
}

/// Counts transitions between configurations of a small window in
/// stationarity. Reversible dynamics give balanced counts for every pair.
pub fn detailed_balance(
    rates: &dyn RawRates,
    side: usize,
    window: &SiteSet,
    burn_in: f64,
    duration: f64,
    seed: u64,
) -> Result<FluxReport> {
    let a = rates.alphabet_size();
    let states = a.pow(window.len() as u32);
    let mut sim = TorusSimulator::new(rates, side, replicate_rng(seed, 0))?;
    sim.run_for(burn_in)?;
    let indices: Vec<usize> = {
        let view = sim.view();
        window.iter().map(|s| view.index(s)).collect()
    };
    let mut flux = vec![0u64; states * states];
    let mut current = cylinder_index(&sim.colors_on(window), a);
    sim.run_with(duration, |s, ev| {
        if ev.old != ev.new && indices.contains(&ev.site) {
            let next = cylinder_index(&indices.iter().map(|&i| s.config[i]).collect::<Vec<_>>(), a);
            flux[current * states + next] += 1;
            current = next;
        }
    })?;
    let mut pairs = Vec::new();
    for x in 0..states {
        for y in x + 1..states {
            let (f, b) = (flux[x * states + y], flux[y * states + x]);
            if f + b > 0 {
                pairs.push(FluxPair {
                    from: x,
                    to: y,
                    forward: f,
                    backward: b,
                    z: (f as f64 - b as f64) / ((f + b) as f64).sqrt(),
                });
            }
        }
    }
    let max_abs_z = pairs.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    Ok(FluxReport { pairs, max_abs_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{HeatBathRates, MrfSpecification, TableRates};

    #[test]
    fn rejects_small_torus_and_wraps() {
        let hb = HeatBathRates::new(MrfSpecification::ising(1, 0.1).unwrap());
        let err = TorusSimulator::new(&hb, 2, replicate_rng(0, 0)).err().unwrap();
        assert!(matches!(err, Error::TorusTooSmall { side: 2, range: 1 }));
        let sim = TorusSimulator::new(&hb, 5, replicate_rng(0, 0)).unwrap();
        assert_eq!(sim.color_at(&Site::new([-1])), sim.color_at(&Site::new([4])));
        assert_eq!(sim.total_event_rate(), 5.0);
    }

    #[test]
    fn spontaneous_marginal() {
        let rates = TableRates::new(1, 2, 0, 1.0, vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let params = OracleParams {
            side: 8,
            burn_in: 10.0,
            thinning: 3.0,
            samples: 20_000,
            chains: 2,
        };
        let counts = torus_long_run(&rates, &params, &[SiteSet::singleton(Site::new([0]))], 3).unwrap();
        let p1 = counts[0][1] as f64 / 20_000.0;
        assert!((p1 - 0.7).abs() < 4.0 * (0.21f64 / 20_000.0).sqrt(), "{p1}");
    }

    #[test]
    fn heat_bath_is_reversible() {
        let hb = HeatBathRates::new(MrfSpecification::ising(1, 0.3).unwrap());
        let window: SiteSet = [0, 1].iter().map(|&x| Site::new([x])).collect();
        let report = detailed_balance(&hb, 16, &window, 20.0, 5_000.0, 9).unwrap();
        assert!(report.max_abs_z < 4.5, "{report:?}");
    }
}
