use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::SiteSet;
use crate::random::replicate_rng;
use crate::rates::{coupling_rate, growth_rate, RateModel};

use super::{step_support, timed_sketch, SketchOptions};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub s: f64,
    pub mean: f64,
    pub se: f64,
    /// `|F| e^{ms}` without deaths, `|F| e^{−εs}` with deaths.
    pub envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SketchDiagnostics {
    pub deaths: bool,
    /// `m` without deaths, `ε` with deaths.
    pub rate: f64,
    pub replicates: u64,
    pub rows: Vec<DiagnosticRow>,
    /// Least-squares slope of `ln E[L_s]` against `s`.
    pub fitted_slope: Option<f64>,
}

/// Support sizes of one timed sketch at each grid time.
fn sizes_on_grid(
    model: &dyn RateModel,
    f: &SiteSet,
    grid: &[f64],
    deaths: bool,
    seed: u64,
    replicate: u64,
    opts: SketchOptions,
) -> Result<Vec<usize>> {
    let horizon = grid.iter().cloned().fold(0.0, f64::max);
    let mut rng = replicate_rng(seed, replicate);
    let trace = timed_sketch(model, f, horizon, deaths, &mut rng, opts)?;
    let mut c = f.clone();
    let mut out = vec![0; grid.len()];
    let mut recs = trace.effective_records().iter().peekable();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    for g in order {
        while let Some(r) = recs.next_if(|r| r.time.unwrap() <= grid[g]) {
            step_support(&mut c, &r.site, r.range, deaths);
        }
        out[g] = c.len();
    }
    Ok(out)
}

/// Monte Carlo estimates of `E[L_s] = E|C_s|` on a grid, next to the
/// analytic envelope.
pub fn sketch_diagnostics(
    model: &dyn RateModel,
    f: &SiteSet,
    grid: &[f64],
    replicates: u64,
    deaths: bool,
    seed: u64,
    opts: SketchOptions,
) -> Result<SketchDiagnostics> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be at least 1".into()));
    }
    let rate = if deaths {
        coupling_rate(model)
    } else {
        growth_rate(model)
    }
    .ok_or_else(|| Error::Inconclusive("model cannot bound its range tail".into()))?;
    let per_rep: Vec<Vec<usize>> = (0..replicates)
        .into_par_iter()
        .map(|rep| sizes_on_grid(model, f, grid, deaths, seed, rep, opts))
        .collect::<Result<_>>()?;
    let n = replicates as f64;
    let rows: Vec<DiagnosticRow> = grid
        .iter()
        .enumerate()
        .map(|(g, &s)| {
            let sum: f64 = per_rep.iter().map(|v| v[g] as f64).sum();
            let sq: f64 = per_rep.iter().map(|v| (v[g] as f64).powi(2)).sum();
            let mean = sum / n;
            let var = if replicates > 1 {
                ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            let exponent = if deaths { -rate * s } else { rate * s };
            DiagnosticRow {
                s,
                mean,
                se: (var / n).sqrt(),
                envelope: f.len() as f64 * exponent.exp(),
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.s).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    Ok(SketchDiagnostics {
        deaths,
        rate,
        replicates,
        fitted_slope: fit_log_slope(&xs, &ys),
        rows,
    })
}

/// Slope of the least-squares line through `(x, ln y)` over positive `y`.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;
    use crate::rates::{spontaneous_model, Alphabet};

    #[test]
    fn slope_of_exact_exponential() {
        let xs = [0.0, 1.0, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| (-0.7 * x).exp()).collect();
        assert!((fit_log_slope(&xs, &ys).unwrap() + 0.7).abs() < 1e-12);
        assert_eq!(fit_log_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn single_site_death_matches_exponential() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.5, 0.5], 1.0).unwrap();
        let f = SiteSet::singleton(Site::new([0]));
        let d = sketch_diagnostics(&m, &f, &[0.5, 1.0], 20_000, true, 5, SketchOptions::default()).unwrap();
        for row in &d.rows {
            let exact = (-row.s).exp();
            assert!((exact - row.envelope).abs() < 1e-15);
            assert!((row.mean - exact).abs() < 4.0 * row.se, "{row:?}");
        }
        let grow = sketch_diagnostics(&m, &f, &[1.0], 100, false, 5, SketchOptions::default()).unwrap();
        assert_eq!(grow.rows[0].mean, 1.0);
    }
}
