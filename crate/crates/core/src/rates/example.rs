//! The two-color model that regenerates in `1`: site `i` turns to `1` at
//! rate `q_{l_i(η)}`, where `l_i(η) + 1` is the distance to the nearest `1`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{sphere_offsets, Site};

use super::{
    Alphabet, ColorView, FiniteRangeLaw, GeometricTailLaw, HomogeneousModel, LocalKernel,
    RangeLaw, RawRates,
};

/// A non-increasing sequence `q_0 ≥ q_1 ≥ … ↓ q_∞`.
pub trait QSequence: Send + Sync {
    fn q(&self, k: usize) -> f64;
    fn limit(&self) -> f64;
    /// `(q_0 − q_∞, ρ)` when `q_k = q_∞ + (q_0 − q_∞) ρ^k`.
    fn geometric(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricQ {
    pub q0: f64,
    pub q_inf: f64,
    pub ratio: f64,
}

impl GeometricQ {
    /// `q_k = 1/2 + (1/8) 4^{-k}`.
    pub fn reference() -> Self {
        GeometricQ {
            q0: 0.625,
            q_inf: 0.5,
            ratio: 0.25,
        }
    }
}

impl QSequence for GeometricQ {
    fn q(&self, k: usize) -> f64 {
        self.q_inf + (self.q0 - self.q_inf) * self.ratio.powi(k as i32)
    }

    fn limit(&self) -> f64 {
        self.q_inf
    }

    fn geometric(&self) -> Option<(f64, f64)> {
        Some((self.q0 - self.q_inf, self.ratio))
    }
}

/// Explicit values `q_0, …, q_n`, constant after `q_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedQ(pub Vec<f64>);

impl QSequence for TabulatedQ {
    fn q(&self, k: usize) -> f64 {
        self.0[k.min(self.0.len() - 1)]
    }

    fn limit(&self) -> f64 {
        *self.0.last().unwrap()
    }
}

fn validate_q(q: &dyn QSequence, upto: usize) -> Result<()> {
    let limit = q.limit();
    let mut prev = f64::INFINITY;
    for k in 0..=upto {
        let v = q.q(k);
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidModel(format!("q_{k} = {v} not in (0, 1)")));
        }
        if v > prev || v < limit {
            return Err(Error::InvalidModel(format!("q is not non-increasing at k = {k}")));
        }
        prev = v;
    }
    if !(0.0..1.0).contains(&limit) {
        return Err(Error::InvalidModel(format!("q_inf = {limit} not in [0, 1)")));
    }
    Ok(())
}

/// Distance from `site` to the nearest site colored `1` other than itself,
/// scanning radii `1..=max`. `Ok(None)` when there is none within `max`.
fn nearest_one(site: &Site, view: &dyn ColorView, max: i64) -> Result<Option<i64>> {
    for r in 1..=max {
        for o in sphere_offsets(site.dim(), r) {
            let j = site + &o;
            match view.color_at(&j) {
                Some(1) => return Ok(Some(r)),
                Some(_) => {}
                None => return Err(Error::UncoloredWindow { site: j, record: 0 }),
            }
        }
    }
    Ok(None)
}

/// Raw rates of the truncation at `R`: `c_i(1, η) = q_{min(D − 1, R)}` with
/// `D` the distance to the nearest `1`, and `c_i(0, η) = 1 − c_i(1, η)`.
pub struct ExampleOneRates {
    dim: usize,
    truncation: usize,
    q: Vec<f64>,
}

impl ExampleOneRates {
    pub fn new(dim: usize, q: &dyn QSequence, truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidModel("truncation R must be at least 1".into()));
        }
        validate_q(q, truncation)?;
        Ok(ExampleOneRates {
            dim,
            truncation,
            q: (0..=truncation).map(|k| q.q(k)).collect(),
        })
    }

    /// The rate of turning to `1`.
    pub fn rate_to_one(&self, site: &Site, view: &dyn ColorView) -> Result<f64> {
        let d = nearest_one(site, view, self.truncation as i64 + 1)?;
        let l = d.map_or(self.truncation, |d| ((d - 1) as usize).min(self.truncation));
        Ok(self.q[l])
    }
}

impl RawRates for ExampleOneRates {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn alphabet_size(&self) -> usize {
        2
    }

    fn range(&self) -> usize {
        self.truncation + 1
    }

    fn total_rate(&self) -> f64 {
        1.0
    }

    fn off_diagonal(&self, site: &Site, view: &dyn ColorView, out: &mut [f64]) -> Result<()> {
        let up = self.rate_to_one(site, view)?;
        out[0] = 1.0 - up;
        out[1] = up;
        Ok(())
    }
}

/// Closed-form kernels: `p^[-1](1) = q_R / (1 − q_0 + q_R)`, uniform where
/// `λ(k) = 0`, and for `k ≥ 1` the color `1` exactly when some other site of
/// `V_i(k)` is colored `1`.
pub struct ExampleOneKernel {
    spontaneous_one: f64,
    law: Arc<dyn RangeLaw>,
}

impl LocalKernel for ExampleOneKernel {
    fn kernel(&self, site: &Site, k: i64, view: &dyn ColorView, out: &mut [f64]) -> Result<()> {
        if k < 0 {
            out[0] = 1.0 - self.spontaneous_one;
            out[1] = self.spontaneous_one;
        } else if self.law.prob(k) == 0.0 {
            out[0] = 0.5;
            out[1] = 0.5;
        } else if nearest_one(site, view, k)?.is_some() {
            out[0] = 0.0;
            out[1] = 1.0;
        } else {
            out[0] = 1.0;
            out[1] = 0.0;
        }
        Ok(())
    }
}

/// Builds the model in mixture form. With `truncation = None` the range law
/// has its exact geometric tail (requires a geometric `q`); with `Some(R)`
/// the truncated rates are attached as raw rates.
pub fn example_model(
    dim: usize,
    q: &dyn QSequence,
    truncation: Option<usize>,
) -> Result<HomogeneousModel> {
    let alphabet = Alphabet::new(vec!["0".into(), "1".into()])?;
    let q0 = q.q(0);
    match truncation {
        None => {
            validate_q(q, 64)?;
            let (tail, ratio) = q.geometric().ok_or_else(|| {
                Error::InvalidModel("the untruncated model needs a geometric q sequence".into())
            })?;
            let q_inf = q.limit();
            let law: Arc<dyn RangeLaw> =
                Arc::new(GeometricTailLaw::new(vec![1.0 - q0 + q_inf, 0.0], tail, ratio)?);
            let kernel = ExampleOneKernel {
                spontaneous_one: q_inf / (1.0 - q0 + q_inf),
                law: law.clone(),
            };
            Ok(HomogeneousModel::new(dim, alphabet, 1.0, law, Arc::new(kernel))?
                .with_label("example1"))
        }
        Some(r) => {
            let raw = Arc::new(ExampleOneRates::new(dim, q, r)?);
            let q_r = q.q(r);
            let mut probs = vec![1.0 - q0 + q_r, 0.0];
            probs.extend((1..=r).map(|k| q.q(k - 1) - q.q(k)));
            let law: Arc<dyn RangeLaw> = Arc::new(FiniteRangeLaw::new(probs)?);
            let kernel = ExampleOneKernel {
                spontaneous_one: q_r / (1.0 - q0 + q_r),
                law: law.clone(),
            };
            Ok(HomogeneousModel::new(dim, alphabet, 1.0, law, Arc::new(kernel))?
                .with_raw_rates(raw)
                .with_label(format!("example1-R{r}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ball_offsets;
    use crate::rates::{RateModel, Window};

    fn window_from_bits(center: &Site, radius: i64, bits: u64) -> Window {
        let n = ball_offsets(center.dim(), radius).len();
        Window::new(center.clone(), radius, (0..n).map(|b| ((bits >> b) & 1) as u8).collect())
            .unwrap()
    }

    #[test]
    fn rejects_bad_sequences() {
        let d = 1;
        assert!(example_model(d, &TabulatedQ(vec![0.6, 0.7, 0.5]), Some(2)).is_err());
        assert!(example_model(d, &TabulatedQ(vec![1.0, 0.7]), Some(1)).is_err());
        assert!(example_model(d, &TabulatedQ(vec![0.6, 0.5]), None).is_err());
        assert!(example_model(d, &GeometricQ::reference(), Some(0)).is_err());
    }

    #[test]
    fn untruncated_law_values() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        let law = m.law();
        assert!((law.cdf(-1) - 0.875).abs() < 1e-15);
        assert!((law.cdf(1) - 0.96875).abs() < 1e-15);
        assert_eq!(law.prob(0), 0.0);
        for k in 1..10 {
            assert!((law.prob(k) - 0.375 * 0.25f64.powi(k as i32)).abs() < 1e-16);
        }
    }

    #[test]
    fn raw_rate_is_q_of_distance() {
        let q = GeometricQ::reference();
        let r = 3;
        let raw = ExampleOneRates::new(1, &q, r).unwrap();
        let center = Site::new([0]);
        let radius = r as i64 + 1;
        for bits in 0..(1u64 << 9) {
            let w = window_from_bits(&center, radius, bits);
            // Independent evaluation: scan coordinates directly.
            let distance = (-radius..=radius)
                .filter(|&x| x != 0 && w.color_at(&Site::new([x])) == Some(1))
                .map(|x| x.abs())
                .min();
            let l = distance.map_or(r, |d| ((d - 1) as usize).min(r));
            assert_eq!(raw.rate_to_one(&center, &w).unwrap(), q.q(l));
        }
    }

    #[test]
    fn analytic_kernel_reads_only_its_ball() {
        let m = example_model(1, &GeometricQ::reference(), Some(3)).unwrap();
        let center = Site::new([2]);
        let view = |s: &Site| if s.coords()[0] == 3 { Some(1) } else if s.l1_distance(&Site::new([2])) <= 1 { Some(0) } else { None };
        let mut out = [0.0; 2];
        m.kernel(&center, 1, &view, &mut out).unwrap();
        assert_eq!(out, [0.0, 1.0]);
        m.kernel(&center, -1, &crate::rates::EmptyView, &mut out).unwrap();
        assert!((out[1] - q_ratio()).abs() < 1e-15);
        // With no 1 inside the colored ball, a radius-2 query must reach its uncolored shell.
        let zeros = |s: &Site| (s.l1_distance(&Site::new([2])) <= 1).then_some(0);
        assert!(m.kernel(&center, 2, &zeros, &mut out).is_err());
    }

    fn q_ratio() -> f64 {
        let q = GeometricQ::reference();
        q.q(3) / (1.0 - q.q(0) + q.q(3))
    }
}
