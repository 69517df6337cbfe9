use std::sync::Arc;

use crate::decompose::EnumerationBudget;
use crate::error::{Error, Result};
use crate::lattice::{ball_offsets, Site};

use super::{Alphabet, ColorView, HomogeneousModel, RawRates};

/// Explicit finite-range rates `c_0(a, w)` for every window `w` on `V_0(range)`.
///
/// Windows are indexed by `Σ_n w(o_n) |A|^n` over the ball offsets `o_n` in
/// lexicographic order. Diagonal entries of the table are ignored.
#[derive(Clone, Debug)]
pub struct TableRates {
    dim: usize,
    alphabet_size: usize,
    range: usize,
    total_rate: f64,
    offsets: Vec<Site>,
    rates: Vec<Vec<f64>>,
}

impl TableRates {
    pub fn new(
        dim: usize,
        alphabet_size: usize,
        range: usize,
        total_rate: f64,
        rates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 || alphabet_size < 2 {
            return Err(Error::InvalidModel("need d ≥ 1 and at least two colors".into()));
        }
        let offsets = ball_offsets(dim, range as i64);
        let centre = offsets
            .iter()
            .position(|o| o.l1_norm() == 0)
            .expect("ball contains its centre");
        let rows = (alphabet_size as u128)
            .checked_pow(offsets.len() as u32)
            .filter(|&r| r <= 1 << 24)
            .ok_or_else(|| Error::InvalidModel("rate table too large".into()))?
            as usize;
        if rates.len() != rows {
            return Err(Error::InvalidModel(format!(
                "rate table needs {rows} windows, got {}",
                rates.len()
            )));
        }
        for (idx, row) in rates.iter().enumerate() {
            if row.len() != alphabet_size {
                return Err(Error::InvalidModel(format!("window {idx}: wrong row length")));
            }
            let own = (idx / alphabet_size.pow(centre as u32)) % alphabet_size;
            let mut off = 0.0;
            for (a, &c) in row.iter().enumerate() {
                if a == own {
                    continue;
                }
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::InvalidModel(format!("window {idx}: bad rate {c}")));
                }
                off += c;
            }
            if off > total_rate * (1.0 + 1e-12) {
                return Err(Error::InvalidModel(format!(
                    "window {idx}: rates sum to {off} > M = {total_rate}"
                )));
            }
        }
        Ok(TableRates {
            dim,
            alphabet_size,
            range,
            total_rate,
            offsets,
            rates,
        })
    }

    pub fn window_index(&self, site: &Site, view: &dyn ColorView) -> Result<usize> {
        let mut idx = 0;
        for o in self.offsets.iter().rev() {
            let j = site + o;
            let c = view
                .color_at(&j)
                .ok_or(Error::UncoloredWindow { site: j, record: 0 })?;
            idx = idx * self.alphabet_size + c as usize;
        }
        Ok(idx)
    }

    pub fn rates(&self) -> &[Vec<f64>] {
        &self.rates
    }
}

impl RawRates for TableRates {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    fn range(&self) -> usize {
        self.range
    }

    fn total_rate(&self) -> f64 {
        self.total_rate
    }

    fn off_diagonal(&self, site: &Site, view: &dyn ColorView, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.rates[self.window_index(site, view)?]);
        Ok(())
    }
}

/// `c(a, η) = M p(a)`: every update is spontaneous.
pub fn spontaneous_model(
    dim: usize,
    alphabet: Alphabet,
    probs: &[f64],
    total_rate: f64,
) -> Result<HomogeneousModel> {
    if probs.len() != alphabet.len() {
        return Err(Error::InvalidModel("law length differs from alphabet".into()));
    }
    super::validate_probabilities(probs, "spontaneous law")?;
    let row: Vec<f64> = probs.iter().map(|p| total_rate * p).collect();
    let rates = vec![row; alphabet.len()];
    let raw = Arc::new(TableRates::new(dim, alphabet.len(), 0, total_rate, rates)?);
    Ok(
        HomogeneousModel::from_raw_rates(alphabet, raw, EnumerationBudget::default())?
            .with_label("spontaneous"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_index_follows_offset_order() {
        let t = TableRates::new(1, 2, 1, 1.0, vec![vec![0.1, 0.1]; 8]).unwrap();
        let view = |s: &Site| Some(if s.coords()[0] == 1 { 1 } else { 0 });
        // Offsets (-1), (0), (1) at site 0: colors 0, 0, 1 → index 4.
        assert_eq!(t.window_index(&Site::new([0]), &view).unwrap(), 4);
    }

    #[test]
    fn validation() {
        assert!(TableRates::new(1, 2, 1, 1.0, vec![vec![0.1, 0.1]; 7]).is_err());
        assert!(TableRates::new(1, 2, 0, 1.0, vec![vec![0.0, 1.5], vec![0.2, 0.0]]).is_err());
        assert!(TableRates::new(1, 2, 0, 1.0, vec![vec![9.0, 1.0], vec![0.2, 9.0]]).is_ok());
    }
}
