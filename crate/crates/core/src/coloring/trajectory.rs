use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{Site, SiteSet};
use crate::rates::{Color, RateModel};
use crate::sketch::{backward_sketch_no_deaths, SketchOptions, SketchTrace};

use super::{forward_coloring_with_initial, perfect_sample, PartialConfiguration};

/// A right-continuous piecewise-constant path `ξ_s(F)`, `s ∈ [0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub horizon: f64,
    pub sites: SiteSet,
    pub initial: PartialConfiguration,
    /// Update events per site, sorted by time, all in `(0, t]`.
    pub jumps: BTreeMap<Site, Vec<(f64, Color)>>,
}

impl Trajectory {
    /// `ξ_s(site)`.
    pub fn value_at(&self, site: &Site, s: f64) -> Option<Color> {
        let start = self.initial.get(site)?;
        let path = self.jumps.get(site).map_or(&[][..], |v| v.as_slice());
        let n = path.partition_point(|&(t, _)| t <= s);
        Some(if n == 0 { start } else { path[n - 1].1 })
    }

    pub fn configuration_at(&self, s: f64) -> PartialConfiguration {
        self.sites
            .iter()
            .filter_map(|j| self.value_at(j, s).map(|c| (j.clone(), c)))
            .collect()
    }

    pub fn event_count(&self) -> usize {
        self.jumps.values().map(Vec::len).sum()
    }
}

/// Assembles `ξ` on `F` from a timed trace, initial colors on its support and
/// the colors drawn for its records: record `n` acts at forward time
/// `t − T(n)`.
pub fn trajectory_from_trace(
    trace: &SketchTrace,
    initial: &PartialConfiguration,
    colors: &[Color],
) -> Result<Trajectory> {
    let t = trace
        .horizon
        .ok_or_else(|| Error::InvalidConfig("trajectory needs a timed trace".into()))?;
    let records = trace.effective_records();
    if colors.len() != records.len() {
        return Err(Error::InvalidConfig("one color per record expected".into()));
    }
    let f = &trace.initial;
    let mut jumps: BTreeMap<Site, Vec<(f64, Color)>> = BTreeMap::new();
    for (rec, &c) in records.iter().zip(colors).rev() {
        if f.contains(&rec.site) {
            let s = t - rec.time.expect("timed record");
            jumps.entry(rec.site.clone()).or_default().push((s, c));
        }
    }
    Ok(Trajectory {
        horizon: t,
        sites: f.clone(),
        initial: initial.restrict(f)?,
        jumps,
    })
}

/// A draw of the stationary process on `F` over `[0, t]`.
pub fn stationary_trajectory<R: Rng>(
    model: &dyn RateModel,
    f: &SiteSet,
    t: f64,
    rng: &mut R,
    opts: SketchOptions,
) -> Result<Trajectory> {
    let trace = backward_sketch_no_deaths(model, f, t, rng, opts)?;
    let initial = perfect_sample(model, &trace.support, rng, opts)?;
    let colors = forward_coloring_with_initial(model, &trace, &initial, rng)?;
    trajectory_from_trace(&trace, &initial, &colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::replicate_rng;
    use crate::rates::{example_model, spontaneous_model, Alphabet, GeometricQ};

    #[test]
    fn jumps_lie_in_horizon_and_start_matches() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        let f: SiteSet = [0, 1].iter().map(|&x| Site::new([x])).collect();
        for rep in 0..300 {
            let mut rng = replicate_rng(2, rep);
            let tr = stationary_trajectory(&m, &f, 1.5, &mut rng, SketchOptions::default()).unwrap();
            for path in tr.jumps.values() {
                assert!(path.iter().all(|&(s, _)| s > 0.0 && s <= 1.5));
                assert!(path.windows(2).all(|w| w[0].0 < w[1].0));
            }
            for j in f.iter() {
                assert_eq!(tr.value_at(j, 0.0), tr.initial.get(j));
                let last = tr.jumps.get(j).and_then(|p| p.last()).map(|p| p.1);
                assert_eq!(tr.value_at(j, 1.5), last.or(tr.initial.get(j)));
            }
        }
    }

    #[test]
    fn single_site_event_rate() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.5, 0.5], 2.0).unwrap();
        let f = SiteSet::singleton(Site::new([0]));
        let runs = 5_000;
        let mut events = 0;
        for rep in 0..runs {
            let mut rng = replicate_rng(8, rep);
            events += stationary_trajectory(&m, &f, 1.0, &mut rng, SketchOptions::default())
                .unwrap()
                .event_count();
        }
        let mean = events as f64 / runs as f64;
        assert!((mean - 2.0).abs() < 4.0 * (2.0 / runs as f64).sqrt(), "{mean}");
    }
}
