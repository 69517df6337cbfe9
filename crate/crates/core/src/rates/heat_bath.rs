//! Heat-bath dynamics of a nearest-neighbour Markov random field:
//! `c_0(a, ξ) = Q(a | ξ(∂0))` with `M = 1`.

use std::sync::Arc;

use serde::Serialize;

use crate::decompose::EnumerationBudget;
use crate::error::{Error, Result};
use crate::lattice::{sphere_offsets, Site};

use super::{validate_probabilities, Alphabet, ColorView, HomogeneousModel, RawRates};

/// Strict inequalities are decided with this margin, so that a sum equal to
/// the threshold up to rounding counts as a failure.
pub const HS_TOLERANCE: f64 = 1e-12;

/// Single-site specification `Q(a | boundary)` on `∂0 = {j : ‖j‖₁ = 1}`.
///
/// Rows are indexed by `Σ_n color(b_n) |A|^n` over the boundary sites `b_n`
/// in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct MrfSpecification {
    dim: usize,
    alphabet: Alphabet,
    table: Vec<Vec<f64>>,
}

impl MrfSpecification {
    pub fn new(dim: usize, alphabet: Alphabet, table: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        let rows = alphabet.len().checked_pow(2 * dim as u32).ok_or_else(|| {
            Error::InvalidModel("boundary table too large".into())
        })?;
        if table.len() != rows {
            return Err(Error::InvalidModel(format!(
                "specification needs {rows} boundary rows, got {}",
                table.len()
            )));
        }
        for (n, row) in table.iter().enumerate() {
            if row.len() != alphabet.len() {
                return Err(Error::InvalidModel(format!("row {n} has wrong length")));
            }
            validate_probabilities(row, &format!("specification row {n}"))?;
        }
        Ok(MrfSpecification {
            dim,
            alphabet,
            table,
        })
    }

    /// Ising heat bath: color `0` is spin `-1`, color `1` is spin `+1`, and
    /// `Q(+1 | w) = 1 / (1 + exp(−2β Σ w))`.
    pub fn ising(dim: usize, beta: f64) -> Result<Self> {
        let alphabet = Alphabet::new(vec!["-1".into(), "+1".into()])?;
        let neighbours = 2 * dim;
        let table = (0..1usize << neighbours)
            .map(|idx| {
                let field: f64 = (0..neighbours)
                    .map(|n| if (idx >> n) & 1 == 1 { 1.0 } else { -1.0 })
                    .sum();
                let up = 1.0 / (1.0 + (-2.0 * beta * field).exp());
                vec![1.0 - up, up]
            })
            .collect();
        Self::new(dim, alphabet, table)
    }

    /// `Q(a | ·) = 1/|A|`.
    pub fn uniform(dim: usize, alphabet: Alphabet) -> Result<Self> {
        let a = alphabet.len();
        let rows = a.pow(2 * dim as u32);
        Self::new(dim, alphabet, vec![vec![1.0 / a as f64; a]; rows])
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn row(&self, boundary_index: usize) -> &[f64] {
        &self.table[boundary_index]
    }
}

/// Range-one raw rates of the heat bath.
pub struct HeatBathRates {
    spec: MrfSpecification,
    boundary: Vec<Site>,
}

impl HeatBathRates {
    pub fn new(spec: MrfSpecification) -> Self {
        let boundary = sphere_offsets(spec.dim, 1);
        HeatBathRates { spec, boundary }
    }

    pub fn boundary_index(&self, site: &Site, view: &dyn ColorView) -> Result<usize> {
        let a = self.spec.alphabet.len();
        let mut idx = 0;
        for o in self.boundary.iter().rev() {
            let j = site + o;
            let c = view
                .color_at(&j)
                .ok_or(Error::UncoloredWindow { site: j, record: 0 })?;
            idx = idx * a + c as usize;
        }
        Ok(idx)
    }

    pub fn spec(&self) -> &MrfSpecification {
        &self.spec
    }
}

impl RawRates for HeatBathRates {
    fn dimension(&self) -> usize {
        self.spec.dim
    }

    fn alphabet_size(&self) -> usize {
        self.spec.alphabet.len()
    }

    fn range(&self) -> usize {
        1
    }

    fn total_rate(&self) -> f64 {
        1.0
    }

    fn off_diagonal(&self, site: &Site, view: &dyn ColorView, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(self.spec.row(self.boundary_index(site, view)?));
        Ok(())
    }
}

/// The heat-bath model, decomposed from its range-one rates.
pub fn heat_bath_model(spec: MrfSpecification) -> Result<HomogeneousModel> {
    let alphabet = spec.alphabet.clone();
    let raw = Arc::new(HeatBathRates::new(spec));
    Ok(
        HomogeneousModel::from_raw_rates(alphabet, raw, EnumerationBudget::default())?
            .with_label("heat_bath"),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HsReport {
    pub sum_of_minima: f64,
    pub threshold: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Whether `Σ_a min_w Q(a | w) > 2d / (2d + 1)`.
pub fn check_hs_condition(spec: &MrfSpecification) -> HsReport {
    let sum_of_minima: f64 = (0..spec.alphabet.len())
        .map(|a| {
            spec.table
                .iter()
                .map(|row| row[a])
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let d2 = 2.0 * spec.dim as f64;
    let threshold = d2 / (d2 + 1.0);
    let margin = sum_of_minima - threshold;
    HsReport {
        sum_of_minima,
        threshold,
        margin,
        holds: margin > HS_TOLERANCE,
    }
}
