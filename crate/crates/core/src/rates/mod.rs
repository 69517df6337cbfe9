//! Rate models: the mixture representation `(M_i, λ_i, p_i^[k])` consumed by
//! every sampler, plus the raw finite-range rates it is computed from.

mod condition;
mod example;
mod heat_bath;
mod law;
mod table;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decompose::{decompose, Decomposition, EnumerationBudget};
use crate::error::{Error, Result};
use crate::lattice::{ball_offsets, Site};

pub use condition::{
    check_condition, coupling_rate, growth_rate, volume_moment, ConditionReport, Verdict,
};
pub use example::{
    example_model, ExampleOneKernel, ExampleOneRates, GeometricQ, QSequence, TabulatedQ,
};
pub use heat_bath::{check_hs_condition, heat_bath_model, HeatBathRates, HsReport, MrfSpecification};
pub use law::{FiniteRangeLaw, GeometricTailLaw, RangeLaw};
pub use table::{spontaneous_model, TableRates};

/// Color index into an [`Alphabet`].
pub type Color = u8;

/// Tolerance for probability vectors supplied by callers.
pub(crate) const PROB_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet(Vec<String>);

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidModel("alphabet needs at least two colors".into()));
        }
        if labels.len() > Color::MAX as usize + 1 {
            return Err(Error::InvalidModel("alphabet too large".into()));
        }
        Ok(Alphabet(labels))
    }

    /// Colors labelled `0..n`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|c| c.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn label(&self, c: Color) -> &str {
        &self.0[c as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }
}

/// Read access to (possibly partial) configurations. `None` is the uncolored
/// placeholder.
pub trait ColorView {
    fn color_at(&self, site: &Site) -> Option<Color>;
}

/// A view with no colored sites.
pub struct EmptyView;

impl ColorView for EmptyView {
    fn color_at(&self, _: &Site) -> Option<Color> {
        None
    }
}

impl<F: Fn(&Site) -> Option<Color>> ColorView for F {
    fn color_at(&self, site: &Site) -> Option<Color> {
        self(site)
    }
}

/// Colors on `V_center(radius)`, stored in the lexicographic order of the
/// ball offsets.
#[derive(Clone, Debug)]
pub struct Window {
    center: Site,
    radius: i64,
    offsets: Arc<[Site]>,
    colors: Vec<Color>,
}

impl Window {
    pub fn new(center: Site, radius: i64, colors: Vec<Color>) -> Result<Self> {
        let offsets: Arc<[Site]> = ball_offsets(center.dim(), radius).into();
        Self::with_offsets(center, radius, offsets, colors)
    }

    pub(crate) fn with_offsets(
        center: Site,
        radius: i64,
        offsets: Arc<[Site]>,
        colors: Vec<Color>,
    ) -> Result<Self> {
        if offsets.len() != colors.len() {
            return Err(Error::InvalidModel(format!(
                "window of radius {radius} needs {} colors, got {}",
                offsets.len(),
                colors.len()
            )));
        }
        Ok(Window {
            center,
            radius,
            offsets,
            colors,
        })
    }

    pub fn center(&self) -> &Site {
        &self.center
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn offsets(&self) -> &[Site] {
        &self.offsets
    }
}

impl ColorView for Window {
    fn color_at(&self, site: &Site) -> Option<Color> {
        let offset = site - &self.center;
        self.offsets
            .binary_search(&offset)
            .ok()
            .map(|n| self.colors[n])
    }
}

/// Finite-range change rates `c_i(a, η)` with the total rate `M`.
///
/// Rates depend only on `η(V_i(range))`. The diagonal entry is fixed by
/// `c_i(η(i), η) = M − Σ_{a ≠ η(i)} c_i(a, η)`.
pub trait RawRates: Send + Sync {
    fn dimension(&self) -> usize;
    fn alphabet_size(&self) -> usize;
    fn range(&self) -> usize;
    fn total_rate(&self) -> f64;

    /// Writes `c_i(a, η)` for every `a`; the entry at the current color of
    /// `site` is ignored by callers.
    fn off_diagonal(&self, site: &Site, view: &dyn ColorView, out: &mut [f64]) -> Result<()>;

    /// `p_i(·|η) = c_i(·, η) / M` under the fixed diagonal choice.
    fn conditional_law(&self, site: &Site, view: &dyn ColorView, out: &mut [f64]) -> Result<()> {
        let current = view
            .color_at(site)
            .ok_or_else(|| Error::UncoloredWindow {
                site: site.clone(),
                record: 0,
            })? as usize;
        self.off_diagonal(site, view, out)?;
        let m = self.total_rate();
        let off: f64 = out
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != current)
            .map(|(_, &c)| c)
            .sum();
        out[current] = m - off;
        if out[current] < -1e-12 * m.max(1.0) {
            return Err(Error::InvalidModel(format!(
                "off-diagonal rates {off} exceed M = {m} at {site:?}"
            )));
        }
        for p in out.iter_mut() {
            *p = p.max(0.0) / m;
        }
        Ok(())
    }
}

/// The local kernels `p_i^[k](·|η(V_i(k)))`.
pub trait LocalKernel: Send + Sync {
    /// Writes the law of the new color at `site` for range `k`. Must not read
    /// the view outside `V_site(k)`; for `k = -1` it must not read at all.
    fn kernel(&self, site: &Site, k: i64, view: &dyn ColorView, out: &mut [f64]) -> Result<()>;
}

/// A multicolor system in mixture form.
pub trait RateModel: Send + Sync {
    fn dimension(&self) -> usize;
    fn alphabet(&self) -> &Alphabet;
    /// `M_i`.
    fn total_rate(&self, site: &Site) -> f64;
    /// `λ_i`.
    fn range_law(&self, site: &Site) -> &dyn RangeLaw;
    /// `p_i^[k]`.
    fn kernel(&self, site: &Site, k: i64, view: &dyn ColorView, out: &mut [f64]) -> Result<()>;
    /// Finite-range raw rates, when the model has them.
    fn raw_rates(&self) -> Option<&dyn RawRates> {
        None
    }
    /// The distinct `(M_i, λ_i)` pairs occurring over `Z^d`.
    fn site_classes(&self) -> Vec<(f64, &dyn RangeLaw)>;
    /// Whether the model is invariant under lattice translations.
    fn is_homogeneous(&self) -> bool;
}

/// A translation-invariant model: one `(M, λ, p^[k])` family reused at
/// every site.
#[derive(Clone)]
pub struct HomogeneousModel {
    dim: usize,
    alphabet: Alphabet,
    total_rate: f64,
    law: Arc<dyn RangeLaw>,
    kernel: Arc<dyn LocalKernel>,
    raw: Option<Arc<dyn RawRates>>,
    decomposition: Option<Arc<Decomposition>>,
    label: String,
}

impl fmt::Debug for HomogeneousModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HomogeneousModel")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("alphabet", &self.alphabet)
            .field("total_rate", &self.total_rate)
            .field("law", &self.law)
            .finish()
    }
}

impl HomogeneousModel {
    pub fn new(
        dim: usize,
        alphabet: Alphabet,
        total_rate: f64,
        law: Arc<dyn RangeLaw>,
        kernel: Arc<dyn LocalKernel>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if !(total_rate.is_finite() && total_rate > 0.0) {
            return Err(Error::InvalidModel(format!("total rate {total_rate} must be positive")));
        }
        law::check_normalized(law.as_ref())?;
        Ok(HomogeneousModel {
            dim,
            alphabet,
            total_rate,
            law,
            kernel,
            raw: None,
            decomposition: None,
            label: String::from("model"),
        })
    }

    /// Decomposes finite-range rates and uses the resulting kernel tables.
    pub fn from_raw_rates(
        alphabet: Alphabet,
        raw: Arc<dyn RawRates>,
        budget: EnumerationBudget,
    ) -> Result<Self> {
        if raw.alphabet_size() != alphabet.len() {
            return Err(Error::InvalidModel("alphabet size mismatch".into()));
        }
        let dec = Arc::new(decompose(raw.as_ref(), budget)?);
        let law: Arc<dyn RangeLaw> = Arc::new(FiniteRangeLaw::new(dec.lambda().to_vec())?);
        let mut model = Self::new(
            raw.dimension(),
            alphabet,
            raw.total_rate(),
            law,
            dec.clone() as Arc<dyn LocalKernel>,
        )?;
        model.raw = Some(raw);
        model.decomposition = Some(dec);
        Ok(model)
    }

    pub fn with_raw_rates(mut self, raw: Arc<dyn RawRates>) -> Self {
        self.raw = Some(raw);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn law(&self) -> &dyn RangeLaw {
        self.law.as_ref()
    }

    pub fn m(&self) -> f64 {
        self.total_rate
    }

    pub fn decomposition(&self) -> Option<&Decomposition> {
        self.decomposition.as_deref()
    }
}

impl RateModel for HomogeneousModel {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn total_rate(&self, _: &Site) -> f64 {
        self.total_rate
    }

    fn range_law(&self, _: &Site) -> &dyn RangeLaw {
        self.law.as_ref()
    }

    fn kernel(&self, site: &Site, k: i64, view: &dyn ColorView, out: &mut [f64]) -> Result<()> {
        self.kernel.kernel(site, k, view, out)
    }

    fn raw_rates(&self) -> Option<&dyn RawRates> {
        self.raw.as_deref()
    }

    fn site_classes(&self) -> Vec<(f64, &dyn RangeLaw)> {
        vec![(self.total_rate, self.law.as_ref())]
    }

    fn is_homogeneous(&self) -> bool {
        true
    }
}

/// Checks that `p` is a probability vector up to [`PROB_TOL`].
pub(crate) fn validate_probabilities(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < -PROB_TOL) {
        return Err(Error::InvalidModel(format!("{what}: negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("{what}: sums to {sum}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_lookup() {
        let w = Window::new(Site::new([4]), 1, vec![0, 1, 1]).unwrap();
        assert_eq!(w.color_at(&Site::new([3])), Some(0));
        assert_eq!(w.color_at(&Site::new([5])), Some(1));
        assert_eq!(w.color_at(&Site::new([6])), None);
        assert!(Window::new(Site::new([0]), 1, vec![0]).is_err());
        let empty = Window::new(Site::new([0]), -1, vec![]).unwrap();
        assert_eq!(empty.color_at(&Site::new([0])), None);
    }

    #[test]
    fn alphabet_needs_two_colors() {
        assert!(Alphabet::indexed(1).is_err());
        assert_eq!(Alphabet::indexed(3).unwrap().label(2), "2");
    }
}
