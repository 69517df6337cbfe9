use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finitary::Partition;
use crate::lattice::{Site, SiteSet};
use crate::random::{derive_seed, replicate_rng, DrawClass, DrawSource};
use crate::rates::{coupling_rate, RateModel};
use crate::sketch::{backward_sketch_coupling, SketchOptions};

use super::{forward_walk, InitialRule};

/// Replays a fixed list of uniforms, one per draw.
struct SharedUniforms<'a> {
    uniforms: &'a [f64],
    next: usize,
}

impl DrawSource for SharedUniforms<'_> {
    fn draw(&mut self, _: DrawClass, _: &Site, partition: &dyn Partition) -> Result<usize> {
        let u = *self
            .uniforms
            .get(self.next)
            .ok_or_else(|| Error::InvalidConfig("shared uniforms exhausted".into()))?;
        self.next += 1;
        Ok(partition.locate_uniform(u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CouplingOutcome {
    /// Whether the sketch support was non-empty at the horizon.
    pub survived: bool,
    pub disagree: bool,
}

/// Colors one deaths sketch of horizon `t` twice, from `η` and from `ζ` on
/// the surviving support, with every draw shared. Reports whether the two
/// colorings differ on `F`.
pub fn coupling_experiment<R: Rng>(
    model: &dyn RateModel,
    eta: &InitialRule,
    zeta: &InitialRule,
    f: &SiteSet,
    t: f64,
    rng: &mut R,
    opts: SketchOptions,
) -> Result<CouplingOutcome> {
    let trace = backward_sketch_coupling(model, f, t, rng, opts)?;
    if trace.support.is_empty() {
        return Ok(CouplingOutcome {
            survived: false,
            disagree: false,
        });
    }
    let records = trace.effective_records();
    let uniforms: Vec<f64> = (0..records.len()).map(|_| rng.random()).collect();
    let color = |rule: &InitialRule| -> Result<Vec<_>> {
        let mut config = rule.on(&trace.support);
        forward_walk(
            model,
            records,
            &mut config,
            &mut SharedUniforms {
                uniforms: &uniforms,
                next: 0,
            },
        )?;
        config.colors_on(f)
    };
    let a = color(eta)?;
    let b = color(zeta)?;
    Ok(CouplingOutcome {
        survived: true,
        disagree: a != b,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingRow {
    pub t: f64,
    pub runs: u64,
    pub disagreements: u64,
    pub rate: f64,
    pub se: f64,
    /// `|F| e^{−εt}`.
    pub envelope: f64,
}

/// Disagreement frequencies over a grid of horizons.
#[allow(clippy::too_many_arguments)]
pub fn coupling_table(
    model: &dyn RateModel,
    eta: &InitialRule,
    zeta: &InitialRule,
    f: &SiteSet,
    grid: &[f64],
    runs: u64,
    seed: u64,
    opts: SketchOptions,
) -> Result<Vec<CouplingRow>> {
    let eps = coupling_rate(model)
        .ok_or_else(|| Error::Inconclusive("model cannot bound its range tail".into()))?;
    grid.iter()
        .enumerate()
        .map(|(g, &t)| {
            let cell_seed = derive_seed(seed, &format!("couple-{g}"));
            let disagreements = (0..runs)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = replicate_rng(cell_seed, rep);
                    coupling_experiment(model, eta, zeta, f, t, &mut rng, opts)
                        .map(|o| u64::from(o.disagree))
                })
                .sum::<Result<u64>>()?;
            let rate = disagreements as f64 / runs as f64;
            Ok(CouplingRow {
                t,
                runs,
                disagreements,
                rate,
                se: (rate * (1.0 - rate) / runs as f64).sqrt(),
                envelope: f.len() as f64 * (-eps * t).exp(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{example_model, GeometricQ};

    #[test]
    fn equal_starts_agree_and_dead_supports_agree() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        let f = SiteSet::singleton(Site::new([0]));
        let zero = InitialRule::Constant { color: 0 };
        let one = InitialRule::Constant { color: 1 };
        for rep in 0..500 {
            let mut rng = replicate_rng(4, rep);
            let o = coupling_experiment(&m, &zero, &zero, &f, 1.0, &mut rng, SketchOptions::default()).unwrap();
            assert!(!o.disagree);
            let o = coupling_experiment(&m, &zero, &one, &f, 1.0, &mut rng, SketchOptions::default()).unwrap();
            if !o.survived {
                assert!(!o.disagree);
            }
        }
    }

    #[test]
    fn short_horizon_disagrees() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        let f = SiteSet::singleton(Site::new([0]));
        let rows = coupling_table(
            &m,
            &InitialRule::Constant { color: 0 },
            &InitialRule::Constant { color: 1 },
            &f,
            &[1e-6],
            2_000,
            1,
            SketchOptions::default(),
        )
        .unwrap();
        assert!(rows[0].rate > 0.99);
    }
}
