//! Count comparisons and small Monte Carlo summaries.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Cells with expected count below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Empirical total-variation distance.
    pub tv: f64,
    /// Three-sigma binomial radius around `tv`.
    pub tv_radius: f64,
    /// Cells merged into the pooled cell because of small counts.
    pub pooled_cells: usize,
    pub n_a: u64,
    pub n_b: u64,
}

fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map_or(f64::NAN, |d| d.sf(statistic))
}

/// Two-sample chi-square test on counts over the same outcome space, with
/// small cells pooled, plus the empirical TV distance.
pub fn compare_distributions(a: &[u64], b: &[u64]) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(Error::InvalidConfig(format!(
            "outcome spaces differ: {} vs {} cells",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.iter().sum::<u64>(), b.iter().sum::<u64>());
    if na == 0 || nb == 0 {
        return Err(Error::InvalidConfig("empty sample".into()));
    }
    let (fa, fb) = (na as f64, nb as f64);
    let n = fa + fb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    let mut pooled_cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let total = (x + y) as f64;
        if total == 0.0 {
            continue;
        }
        // Expected counts under the pooled law are total·na/n and total·nb/n.
        if total * fa.min(fb) / n < MIN_EXPECTED {
            pooled.0 += x as f64;
            pooled.1 += y as f64;
            pooled_cells += 1;
        } else {
            cells.push((x as f64, y as f64));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    let (ka, kb) = ((fb / fa).sqrt(), (fa / fb).sqrt());
    let statistic: f64 = cells
        .iter()
        .map(|&(x, y)| (ka * x - kb * y).powi(2) / (x + y))
        .sum();
    let dof = cells.len().saturating_sub(1);
    let mut tv = 0.0;
    let mut var = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (pa, pb) = (x as f64 / fa, y as f64 / fb);
        tv += 0.5 * (pa - pb).abs();
        var += 0.5 * 3.0 * (pa * (1.0 - pa) / fa + pb * (1.0 - pb) / fb).sqrt();
    }
    Ok(ComparisonReport {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        tv,
        tv_radius: var,
        pooled_cells,
        n_a: na,
        n_b: nb,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pooled_cells: usize,
}

/// Pearson's test of counts against exact cell probabilities.
pub fn goodness_of_fit(counts: &[u64], probs: &[f64]) -> Result<GoodnessOfFit> {
    if counts.len() != probs.len() {
        return Err(Error::InvalidConfig("counts and probabilities differ in length".into()));
    }
    let n = counts.iter().sum::<u64>() as f64;
    let mut cells = Vec::new();
    let mut pooled = (0.0, 0.0);
    let mut pooled_cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = n * p;
        if e < MIN_EXPECTED {
            pooled.0 += c as f64;
            pooled.1 += e;
            pooled_cells += 1;
        } else {
            cells.push((c as f64, e));
        }
    }
    if pooled.1 > 0.0 {
        cells.push(pooled);
    } else if pooled.0 > 0.0 {
        // Observations in cells of probability zero.
        return Ok(GoodnessOfFit {
            statistic: f64::INFINITY,
            dof: cells.len(),
            p_value: 0.0,
            pooled_cells,
        });
    }
    let statistic = cells.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1);
    Ok(GoodnessOfFit {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        pooled_cells,
    })
}

/// Asymptotic Kolmogorov tail `P[K > x]`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsReport {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against `Exp(rate)`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> KsReport {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let fnn = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        d = d.max((i + 1) as f64 / fnn - cdf).max(cdf - i as f64 / fnn);
    }
    let sq = fnn.sqrt();
    KsReport {
        n,
        statistic: d,
        p_value: kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d),
    }
}

/// Sample mean and its standard error.
pub fn mean_se(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in values {
        n += 1.0;
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    if n < 2.0 {
        return (mean, 0.0);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}
