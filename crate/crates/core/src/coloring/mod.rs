//! Forward colorings of sketch traces, the perfect sampler and stationary
//! trajectories.

mod coupling;
mod trajectory;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finitary::FinitePartition;
use crate::lattice::{ball_offsets, Site, SiteSet};
use crate::random::{DrawClass, DrawSource, RngSource};
use crate::rates::{Color, ColorView, RateModel};
use crate::sketch::{backward_sketch_with, SketchOptions, SketchRecord, SketchTrace};

pub use coupling::{coupling_experiment, coupling_table, CouplingOutcome, CouplingRow};
pub use trajectory::{stationary_trajectory, trajectory_from_trace, Trajectory};

/// Colors on finitely many sites; absent sites are uncolored.
///
/// Serialized as a list of `(site, color)` pairs, since sites are not strings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<(Site, Color)>", from = "Vec<(Site, Color)>")]
pub struct PartialConfiguration(BTreeMap<Site, Color>);

impl From<PartialConfiguration> for Vec<(Site, Color)> {
    fn from(c: PartialConfiguration) -> Self {
        c.0.into_iter().collect()
    }
}

impl From<Vec<(Site, Color)>> for PartialConfiguration {
    fn from(v: Vec<(Site, Color)>) -> Self {
        v.into_iter().collect()
    }
}

impl PartialConfiguration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, site: &Site) -> Option<Color> {
        self.0.get(site).copied()
    }

    pub fn set(&mut self, site: Site, color: Color) {
        self.0.insert(site, color);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, Color)> + '_ {
        self.0.iter().map(|(s, &c)| (s, c))
    }

    /// The colors on `sites`, all of which must be colored.
    pub fn restrict(&self, sites: &SiteSet) -> Result<PartialConfiguration> {
        sites
            .iter()
            .map(|s| {
                self.get(s)
                    .map(|c| (s.clone(), c))
                    .ok_or(Error::UncoloredWindow {
                        site: s.clone(),
                        record: 0,
                    })
            })
            .collect::<Result<BTreeMap<_, _>>>()
            .map(PartialConfiguration)
    }

    /// Colors of `sites` in their sorted order.
    pub fn colors_on(&self, sites: &SiteSet) -> Result<Vec<Color>> {
        Ok(self.restrict(sites)?.0.into_values().collect())
    }

    pub fn translate(&self, shift: &Site) -> PartialConfiguration {
        PartialConfiguration(self.0.iter().map(|(s, &c)| (s + shift, c)).collect())
    }
}

impl FromIterator<(Site, Color)> for PartialConfiguration {
    fn from_iter<T: IntoIterator<Item = (Site, Color)>>(iter: T) -> Self {
        PartialConfiguration(iter.into_iter().collect())
    }
}

impl ColorView for PartialConfiguration {
    fn color_at(&self, site: &Site) -> Option<Color> {
        self.get(site)
    }
}

/// A deterministic infinite configuration, evaluated on demand.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InitialRule {
    Constant { color: Color },
    /// `even` where the coordinate sum is even, `odd` elsewhere.
    Checkerboard { even: Color, odd: Color },
}

impl InitialRule {
    pub fn color(&self, site: &Site) -> Color {
        match *self {
            InitialRule::Constant { color } => color,
            InitialRule::Checkerboard { even, odd } => {
                if site.coords().iter().sum::<i64>().rem_euclid(2) == 0 {
                    even
                } else {
                    odd
                }
            }
        }
    }

    pub fn on(&self, sites: &SiteSet) -> PartialConfiguration {
        sites.iter().map(|s| (s.clone(), self.color(s))).collect()
    }

    pub fn max_color(&self) -> Color {
        match *self {
            InitialRule::Constant { color } => color,
            InitialRule::Checkerboard { even, odd } => even.max(odd),
        }
    }
}

/// Replays `records` from the last to the first, drawing each new color from
/// `p_I^[K](· | ζ(V_I(K)))` and writing it into `config`. Returns the colors
/// in record order.
pub(crate) fn forward_walk<S: DrawSource>(
    model: &dyn RateModel,
    records: &[SketchRecord],
    config: &mut PartialConfiguration,
    src: &mut S,
) -> Result<Vec<Color>> {
    let a = model.alphabet().len();
    let mut buf = vec![0.0; a];
    let mut colors = vec![0; records.len()];
    for n in (0..records.len()).rev() {
        let rec = &records[n];
        for o in ball_offsets(rec.site.dim(), rec.range) {
            let j = &rec.site + &o;
            if config.get(&j).is_none() {
                return Err(Error::UncoloredWindow {
                    site: j,
                    record: n + 1,
                });
            }
        }
        model.kernel(&rec.site, rec.range, config, &mut buf)?;
        let w = src.draw(DrawClass::Color, &rec.site, &FinitePartition::from_weights(&buf))? as Color;
        config.set(rec.site.clone(), w);
        colors[n] = w;
    }
    Ok(colors)
}

/// Colors a timed no-deaths trace from initial colors on its
/// final support. The record past the horizon, if any, is not replayed.
pub fn forward_coloring_with_initial<R: Rng>(
    model: &dyn RateModel,
    trace: &SketchTrace,
    initial: &PartialConfiguration,
    rng: &mut R,
) -> Result<Vec<Color>> {
    for s in trace.support.iter() {
        if initial.get(s).is_none() {
            return Err(Error::UncoloredWindow {
                site: s.clone(),
                record: trace.n_stop(),
            });
        }
    }
    let mut config = initial.clone();
    forward_walk(
        model,
        trace.effective_records(),
        &mut config,
        &mut RngSource::new(rng),
    )
}

/// Forward coloring of an untimed trace over an arbitrary draw source.
pub fn forward_coloring_with<S: DrawSource>(
    model: &dyn RateModel,
    trace: &SketchTrace,
    src: &mut S,
) -> Result<PartialConfiguration> {
    if !trace.support.is_empty() {
        return Err(Error::InvalidConfig(
            "forward coloring needs a trace with empty final support".into(),
        ));
    }
    let mut config = PartialConfiguration::new();
    forward_walk(model, &trace.records, &mut config, src)?;
    config.restrict(&trace.initial)
}

/// Colors an untimed trace from the fully uncolored state.
pub fn forward_coloring<R: Rng>(
    model: &dyn RateModel,
    trace: &SketchTrace,
    rng: &mut R,
) -> Result<PartialConfiguration> {
    forward_coloring_with(model, trace, &mut RngSource::new(rng))
}

/// Sketch then coloring, both over `src`.
pub fn perfect_sample_with<S: DrawSource>(
    model: &dyn RateModel,
    f: &SiteSet,
    src: &mut S,
    opts: SketchOptions,
) -> Result<(SketchTrace, PartialConfiguration)> {
    let trace = backward_sketch_with(model, f, src, opts)?;
    let config = forward_coloring_with(model, &trace, src)?;
    Ok((trace, config))
}

/// An exact draw of the invariant measure on `F`.
pub fn perfect_sample<R: Rng>(
    model: &dyn RateModel,
    f: &SiteSet,
    rng: &mut R,
    opts: SketchOptions,
) -> Result<PartialConfiguration> {
    Ok(perfect_sample_with(model, f, &mut RngSource::new(rng), opts)?.1)
}

/// Index of the colors on `sites` in base `|A|`, first site least significant.
pub fn cylinder_index(colors: &[Color], alphabet: usize) -> usize {
    colors
        .iter()
        .rev()
        .fold(0, |acc, &c| acc * alphabet + c as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::EnumerationBudget;
    use crate::random::replicate_rng;
    use crate::rates::{example_model, spontaneous_model, Alphabet, GeometricQ, LocalKernel};

    #[test]
    fn rules_evaluate_lazily() {
        let rule = InitialRule::Checkerboard { even: 0, odd: 1 };
        assert_eq!(rule.color(&Site::new([3, 4])), 1);
        assert_eq!(rule.color(&Site::new([-2])), 0);
        let json = serde_json::to_string(&rule).unwrap();
        assert_eq!(json, r#"{"rule":"checkerboard","even":0,"odd":1}"#);
    }

    #[test]
    fn empty_trace_keeps_initial() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.5, 0.5], 1.0).unwrap();
        let f = SiteSet::singleton(Site::new([0]));
        let mut rng = replicate_rng(0, 0);
        let trace = crate::sketch::backward_sketch_no_deaths(&m, &f, 0.0, &mut rng, SketchOptions::default()).unwrap();
        let init: PartialConfiguration = [(Site::new([0]), 1)].into_iter().collect();
        assert!(forward_coloring_with_initial(&m, &trace, &init, &mut rng).unwrap().is_empty());
        assert!(forward_coloring_with_initial(&m, &trace, &PartialConfiguration::new(), &mut rng).is_err());
    }

    #[test]
    fn hand_built_trace() {
        // Record 2 (processed first) is spontaneous at 0; record 1 then
        // reads V_0(1) with 0 freshly colored and ±1 from the initial.
        let model = example_model(1, &GeometricQ::reference(), Some(3)).unwrap();
        let f = SiteSet::singleton(Site::new([0]));
        let support: SiteSet = [-1, 0, 1].iter().map(|&x| Site::new([x])).collect();
        let trace = SketchTrace {
            initial: f,
            records: vec![
                SketchRecord { site: Site::new([0]), range: 1, time: Some(0.2) },
                SketchRecord { site: Site::new([0]), range: -1, time: Some(0.5) },
            ],
            support: support.clone(),
            t_stop: Some(1.2),
            horizon: Some(1.0),
            deaths: false,
        };
        let init = InitialRule::Constant { color: 0 }.on(&support);
        let spont = model.law().prob(-1);
        assert!(spont > 0.0);
        let raw = crate::rates::ExampleOneRates::new(1, &GeometricQ::reference(), 3).unwrap();
        let dec = crate::decompose::decompose(&raw, EnumerationBudget::default()).unwrap();
        let mut buf = [0.0; 2];
        dec.kernel(&Site::new([0]), -1, &crate::rates::EmptyView, &mut buf).unwrap();
        let p_one = buf[1];
        let mut ones = [0usize; 2];
        let runs = 40_000;
        for rep in 0..runs {
            let mut rng = replicate_rng(11, rep);
            let v = forward_coloring_with_initial(&model, &trace, &init, &mut rng).unwrap();
            // With both neighbours 0 the range-1 kernel forces 0.
            assert_eq!(v[0], 0);
            ones[1] += v[1] as usize;
        }
        let freq = ones[1] as f64 / runs as f64;
        let se = (p_one * (1.0 - p_one) / runs as f64).sqrt();
        assert!((freq - p_one).abs() < 4.0 * se, "{freq} vs {p_one}");
    }

    #[test]
    fn cylinder_indexing() {
        assert_eq!(cylinder_index(&[1, 0, 1], 2), 5);
        assert_eq!(cylinder_index(&[2, 1], 3), 5);
        assert_eq!(cylinder_index(&[], 2), 0);
    }
}
