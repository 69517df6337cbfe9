use serde::Serialize;

use crate::lattice::ball_volume;

use super::{RangeLaw, RateModel};

/// Terms summed explicitly before falling back to a law's tail majorant.
const EXPLICIT_HEAD: i64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub strict: bool,
    /// `sup_i Σ_{k ≥ 0} |V_i(k)| λ_i(k)`, an upper bound when the tail is
    /// bounded analytically.
    pub lambda_bar: Option<f64>,
    pub verdict: Verdict,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

/// `Σ_{k ≥ 0} |V(k)| λ(k)`, explicit head plus the law's tail majorant.
pub fn volume_moment(law: &dyn RangeLaw, dim: usize) -> Option<f64> {
    let head_end = law.max_range().map_or(EXPLICIT_HEAD, |r| r.min(EXPLICIT_HEAD));
    let head: f64 = (0..=head_end)
        .map(|k| ball_volume(dim, k) as f64 * law.prob(k))
        .sum();
    let tail = law.volume_tail_bound(dim, head_end)?;
    if tail.is_finite() {
        Some(head + tail)
    } else {
        None
    }
}

fn sup_over_classes(model: &dyn RateModel, f: impl Fn(f64, &dyn RangeLaw) -> Option<f64>) -> Option<f64> {
    let mut best = f64::NEG_INFINITY;
    for (m, law) in model.site_classes() {
        best = best.max(f(m, law)?);
    }
    Some(best)
}

/// The finiteness condition (`strict = false`) or `λ̄ < 1` (`strict = true`).
pub fn check_condition(model: &dyn RateModel, strict: bool) -> ConditionReport {
    let d = model.dimension();
    let lambda_bar = sup_over_classes(model, |_, law| volume_moment(law, d));
    let verdict = match lambda_bar {
        None => Verdict::Inconclusive,
        Some(v) if !v.is_finite() => Verdict::Fails,
        Some(v) if strict && v >= 1.0 => Verdict::Fails,
        Some(_) => Verdict::Holds,
    };
    ConditionReport {
        strict,
        lambda_bar,
        verdict,
    }
}

/// `m = sup_i M_i Σ_{k ≥ 1} λ_i(k) |V_i(k)|`, the growth rate of the no-deaths sketch.
pub fn growth_rate(model: &dyn RateModel) -> Option<f64> {
    let d = model.dimension();
    sup_over_classes(model, |m, law| {
        Some(m * (volume_moment(law, d)? - law.prob(0)))
    })
}

/// `ε = inf_i M_i (λ_i(-1) − Σ_{k ≥ 1} λ_i(k) (|V_i(k)| − 1))`, the decay
/// rate of the with-deaths sketch. A lower bound when tails are majorized.
pub fn coupling_rate(model: &dyn RateModel) -> Option<f64> {
    let d = model.dimension();
    let mut worst = f64::INFINITY;
    for (m, law) in model.site_classes() {
        let grow = volume_moment(law, d)? - law.prob(0) - law.tail_mass(0);
        worst = worst.min(m * (law.prob(-1) - grow));
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{example_model, spontaneous_model, Alphabet, GeometricQ};

    #[test]
    fn reference_example_values() {
        let m = example_model(1, &GeometricQ::reference(), None).unwrap();
        let report = check_condition(&m, true);
        assert!(report.holds());
        let brute: f64 = (1..=60)
            .map(|k| (2 * k + 1) as f64 * 0.375 * 0.25f64.powi(k))
            .sum();
        let lb = report.lambda_bar.unwrap();
        assert!((lb - 11.0 / 24.0).abs() < 1e-14, "{lb}");
        assert!((lb - brute).abs() < 1e-14);
        assert!((growth_rate(&m).unwrap() - 11.0 / 24.0).abs() < 1e-14);
        assert!((coupling_rate(&m).unwrap() - 13.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn spontaneous_is_trivial() {
        let m = spontaneous_model(1, Alphabet::indexed(2).unwrap(), &[0.3, 0.7], 2.0).unwrap();
        let r = check_condition(&m, true);
        assert_eq!(r.lambda_bar, Some(0.0));
        assert!(r.holds());
        assert_eq!(coupling_rate(&m), Some(2.0));
    }
}
