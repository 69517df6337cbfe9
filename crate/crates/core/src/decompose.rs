//! Mixture decomposition of finite-range rates.
//!
//! From `p(a|w) = c(a, w)/M` the nested infima `r^[k](a|w(V(k)))` give the
//! increments `Δ^[k]`, their masses `λ(k, w)` and normalized laws `p̃^[k]`.
//! The global levels `α(k) = M min_w Σ_a r^[k](a|w)` define `λ(k)`, and the
//! kernels `p^[k]` reallocate the local masses onto the global intervals
//! `(α(k−1), α(k)]`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ball_offsets, Site};
use crate::rates::{ColorView, LocalKernel, RawRates, Window};

/// Maximum allowed discrepancy between the two forms of `α(k)`.
pub const ALPHA_TOLERANCE: f64 = 1e-12;

/// Upper limit on the number of radius-`R` windows enumerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct EnumerationBudget(pub u64);

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget(1 << 20)
    }
}

/// Tables for one radius `k`; windows `u` on `V_0(k)` are indexed by
/// `Σ_n u(o_n) |A|^n` with `o_n` the ball offsets in lexicographic order.
#[derive(Clone, Debug, Serialize)]
pub struct Level {
    pub radius: i64,
    pub offsets: Vec<Site>,
    /// `r^[k](a|u)`, row-major by window.
    pub r: Vec<f64>,
    /// `λ(k, u)`.
    pub lambda_cond: Vec<f64>,
    /// `p̃^[k](a|u)`.
    pub tilde_p: Vec<f64>,
    /// `M Σ_a r^[k](a|u)`.
    pub alpha_cond: Vec<f64>,
    /// `p^[k](a|u)`.
    pub p: Vec<f64>,
}

impl Level {
    pub fn windows(&self) -> usize {
        self.lambda_cond.len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    dim: usize,
    alphabet_size: usize,
    range: usize,
    total_rate: f64,
    /// `α(k)` for `k = -1..=R`.
    alpha: Vec<f64>,
    /// The literal two-term form of `α(k)`.
    alpha_literal: Vec<f64>,
    lambda: Vec<f64>,
    levels: Vec<Level>,
    #[serde(skip)]
    restrictions: Vec<Vec<Vec<usize>>>,
}

fn window_count(a: usize, sites: usize, budget: EnumerationBudget) -> Result<usize> {
    let windows = (a as u128).checked_pow(sites as u32).unwrap_or(u128::MAX);
    if windows > budget.0 as u128 {
        return Err(Error::EnumerationBudget {
            windows,
            budget: budget.0,
        });
    }
    Ok(windows as usize)
}

fn digits(mut idx: usize, a: usize, n: usize, out: &mut Vec<u8>) {
    out.clear();
    for _ in 0..n {
        out.push((idx % a) as u8);
        idx /= a;
    }
}

fn encode(digits: &[u8], positions: &[usize], a: usize) -> usize {
    positions
        .iter()
        .rev()
        .fold(0, |acc, &p| acc * a + digits[p] as usize)
}

/// Positions of the offsets of `V(inner)` inside the offsets of `V(outer)`.
fn positions(inner: &[Site], outer: &[Site]) -> Vec<usize> {
    inner
        .iter()
        .map(|o| outer.binary_search(o).expect("nested balls"))
        .collect()
}

struct RawTables {
    offsets: Vec<Site>,
    centre: usize,
    windows: usize,
    /// `p(a|w)` under the fixed choice.
    p: Vec<f64>,
    /// Off-diagonal `c(a, w)`; the diagonal entry is zero.
    c: Vec<f64>,
}

fn raw_tables(raw: &dyn RawRates, budget: EnumerationBudget) -> Result<RawTables> {
    let a = raw.alphabet_size();
    let dim = raw.dimension();
    let offsets: Arc<[Site]> = ball_offsets(dim, raw.range() as i64).into();
    let windows = window_count(a, offsets.len(), budget)?;
    let centre = offsets.iter().position(|o| o.l1_norm() == 0).unwrap();
    let origin = Site::origin(dim);
    let mut p = vec![0.0; windows * a];
    let mut c = vec![0.0; windows * a];
    let mut colors = Vec::with_capacity(offsets.len());
    for w in 0..windows {
        digits(w, a, offsets.len(), &mut colors);
        let window = Window::with_offsets(
            origin.clone(),
            raw.range() as i64,
            offsets.clone(),
            colors.clone(),
        )?;
        raw.conditional_law(&origin, &window, &mut p[w * a..(w + 1) * a])?;
        let row = &mut c[w * a..(w + 1) * a];
        raw.off_diagonal(&origin, &window, row)?;
        row[colors[centre] as usize] = 0.0;
        if row.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::InvalidModel(format!("negative rate in window {w}")));
        }
    }
    Ok(RawTables {
        offsets: offsets.to_vec(),
        centre,
        windows,
        p,
        c,
    })
}

/// `α(k)` in both forms, for `k = -1..=R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaValues {
    pub simplified: Vec<f64>,
    pub literal: Vec<f64>,
}

struct Infima {
    /// `r^[k](a|u)` per level.
    r: Vec<Vec<f64>>,
    literal: Vec<f64>,
    simplified: Vec<f64>,
    level_offsets: Vec<Vec<Site>>,
}

fn infima(raw: &dyn RawRates, t: &RawTables) -> Infima {
    let a = raw.alphabet_size();
    let m = raw.total_rate();
    let range = raw.range() as i64;
    let n = t.offsets.len();
    let mut colors = Vec::with_capacity(n);
    let mut r = Vec::new();
    let mut literal = Vec::new();
    let mut simplified = Vec::new();
    let mut level_offsets = Vec::new();

    for k in -1..=range {
        let offs = ball_offsets(raw.dimension(), k);
        let pos = positions(&offs, &t.offsets);
        let count = a.pow(offs.len() as u32);
        let mut rk = vec![f64::INFINITY; count * a];
        let mut inf_c = vec![f64::INFINITY; count * a];
        let mut sup_off = vec![f64::NEG_INFINITY; count];
        // k = -1 literal form: infima split by the centre color.
        let mut inf_c_ne = vec![f64::INFINITY; a];
        let mut sup_off_eq = vec![f64::NEG_INFINITY; a];

        for w in 0..t.windows {
            digits(w, a, n, &mut colors);
            let u = encode(&colors, &pos, a);
            let own = colors[t.centre] as usize;
            let off: f64 = t.c[w * a..(w + 1) * a].iter().sum();
            for b in 0..a {
                rk[u * a + b] = rk[u * a + b].min(t.p[w * a + b]);
                if b != own {
                    inf_c[u * a + b] = inf_c[u * a + b].min(t.c[w * a + b]);
                    inf_c_ne[b] = inf_c_ne[b].min(t.c[w * a + b]);
                }
            }
            sup_off[u] = sup_off[u].max(off);
            sup_off_eq[own] = sup_off_eq[own].max(off);
        }

        let simple = (0..count)
            .map(|u| m * rk[u * a..(u + 1) * a].iter().sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let lit = if k < 0 {
            (0..a)
                .map(|b| inf_c_ne[b].min(m - sup_off_eq[b]))
                .sum::<f64>()
        } else {
            let centre_pos = offs.iter().position(|o| o.l1_norm() == 0).unwrap();
            let mut ud = Vec::new();
            (0..count)
                .map(|u| {
                    digits(u, a, offs.len(), &mut ud);
                    let own = ud[centre_pos] as usize;
                    let infs: f64 = (0..a)
                        .filter(|&b| b != own)
                        .map(|b| inf_c[u * a + b])
                        .sum();
                    infs + m - sup_off[u]
                })
                .fold(f64::INFINITY, f64::min)
        };
        r.push(rk);
        literal.push(lit);
        simplified.push(simple);
        level_offsets.push(offs);
    }
    Infima {
        r,
        literal,
        simplified,
        level_offsets,
    }
}

/// Both forms of `α(k)`; errors when they disagree beyond [`ALPHA_TOLERANCE`].
pub fn compute_alpha(raw: &dyn RawRates, budget: EnumerationBudget) -> Result<AlphaValues> {
    let t = raw_tables(raw, budget)?;
    let inf = infima(raw, &t);
    check_alpha_forms(&inf.simplified, &inf.literal)?;
    Ok(AlphaValues {
        simplified: inf.simplified,
        literal: inf.literal,
    })
}

fn check_alpha_forms(simplified: &[f64], literal: &[f64]) -> Result<()> {
    for (n, (&s, &l)) in simplified.iter().zip(literal).enumerate() {
        if (s - l).abs() > ALPHA_TOLERANCE {
            return Err(Error::AlphaMismatch {
                range: n as i64 - 1,
                literal: l,
                simplified: s,
            });
        }
    }
    Ok(())
}

/// Runs the full construction.
pub fn decompose(raw: &dyn RawRates, budget: EnumerationBudget) -> Result<Decomposition> {
    let a = raw.alphabet_size();
    let m = raw.total_rate();
    let range = raw.range();
    let t = raw_tables(raw, budget)?;
    let inf = infima(raw, &t);
    check_alpha_forms(&inf.simplified, &inf.literal)?;

    // Global levels: monotone by construction; snap rounding-level steps and
    // saturate at M.
    let mut alpha = inf.simplified.clone();
    for n in 1..alpha.len() {
        if (alpha[n] - alpha[n - 1]).abs() <= 1e-14 * m {
            alpha[n] = alpha[n - 1];
        }
        if alpha[n] < alpha[n - 1] {
            return Err(Error::NegativeIncrement {
                range: n as i64 - 1,
                value: alpha[n] - alpha[n - 1],
            });
        }
    }
    *alpha.last_mut().unwrap() = m;
    let lambda: Vec<f64> = (0..alpha.len())
        .map(|n| {
            let below = if n == 0 { 0.0 } else { alpha[n - 1] };
            (alpha[n] - below) / m
        })
        .collect();

    // restrictions[k][l][u] = index of u (level k) restricted to level l ≤ k.
    let mut restrictions = Vec::new();
    let mut ud = Vec::new();
    for (kn, offs_k) in inf.level_offsets.iter().enumerate() {
        let count = a.pow(offs_k.len() as u32);
        let mut per_l: Vec<Vec<usize>> = Vec::new();
        for offs_l in &inf.level_offsets[..=kn] {
            let pos = positions(offs_l, offs_k);
            per_l.push(
                (0..count)
                    .map(|u| {
                        digits(u, a, offs_k.len(), &mut ud);
                        encode(&ud, &pos, a)
                    })
                    .collect(),
            );
        }
        restrictions.push(per_l);
    }

    let mut levels: Vec<Level> = Vec::new();
    for (kn, offs) in inf.level_offsets.iter().enumerate() {
        let r = inf.r[kn].clone();
        let count = r.len() / a;
        let mut lambda_cond = vec![0.0; count];
        let mut tilde_p = vec![0.0; count * a];
        let mut alpha_cond = vec![0.0; count];
        for u in 0..count {
            let prev = if kn == 0 {
                None
            } else {
                Some(restrictions[kn][kn - 1][u])
            };
            let mut mass = 0.0;
            for b in 0..a {
                let below = prev.map_or(0.0, |v| inf.r[kn - 1][v * a + b]);
                let delta = r[u * a + b] - below;
                if delta < 0.0 {
                    return Err(Error::NegativeIncrement {
                        range: kn as i64 - 1,
                        value: delta,
                    });
                }
                tilde_p[u * a + b] = delta;
                mass += delta;
            }
            lambda_cond[u] = mass;
            let row = &mut tilde_p[u * a..(u + 1) * a];
            if mass > 0.0 {
                row.iter_mut().for_each(|x| *x /= mass);
            } else {
                row.fill(1.0 / a as f64);
            }
            alpha_cond[u] = m * r[u * a..(u + 1) * a].iter().sum::<f64>();
        }
        levels.push(Level {
            radius: kn as i64 - 1,
            offsets: offs.clone(),
            r,
            lambda_cond,
            tilde_p,
            alpha_cond,
            p: Vec::new(),
        });
    }

    let mut dec = Decomposition {
        dim: raw.dimension(),
        alphabet_size: a,
        range,
        total_rate: m,
        alpha,
        alpha_literal: inf.literal,
        lambda,
        levels,
        restrictions,
    };
    for kn in 0..dec.levels.len() {
        let count = dec.levels[kn].windows();
        let mut p = vec![0.0; count * a];
        for u in 0..count {
            dec.coupling_kernel(kn as i64 - 1, u, &mut p[u * a..(u + 1) * a]);
        }
        dec.levels[kn].p = p;
    }
    Ok(dec)
}

impl Decomposition {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    /// `α(-1), …, α(R)`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_literal(&self) -> &[f64] {
        &self.alpha_literal
    }

    /// `λ(-1), …, λ(R)`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn level(&self, k: i64) -> &Level {
        &self.levels[(k + 1) as usize]
    }

    fn lambda_at(&self, k: i64) -> f64 {
        self.lambda.get((k + 1) as usize).copied().unwrap_or(0.0)
    }

    fn alpha_at(&self, k: i64) -> f64 {
        if k < -1 {
            0.0
        } else {
            self.alpha[(k + 1) as usize]
        }
    }

    /// `α(l, u(V(l)))` for a window `u` of level `k`; exactly `M` at `l = R`.
    fn local_alpha(&self, k: i64, u: usize, l: i64) -> f64 {
        if l < -1 {
            return 0.0;
        }
        if l == self.range as i64 {
            return self.total_rate;
        }
        let v = self.restrictions[(k + 1) as usize][(l + 1) as usize][u];
        self.level(l).alpha_cond[v]
    }

    fn local_tilde_p(&self, k: i64, u: usize, l: i64) -> &[f64] {
        let a = self.alphabet_size;
        let v = self.restrictions[(k + 1) as usize][(l + 1) as usize][u];
        &self.level(l).tilde_p[v * a..(v + 1) * a]
    }

    fn local_lambda(&self, k: i64, u: usize, l: i64) -> f64 {
        let v = self.restrictions[(k + 1) as usize][(l + 1) as usize][u];
        self.level(l).lambda_cond[v]
    }

    /// `p^[k](·|u)` as the average of `p̃^[l(x, u)]` over `x ∈ (α(k−1), α(k)]`,
    /// where `l(x, u) = min{l : α(l, u) ≥ x}`.
    fn coupling_kernel(&self, k: i64, u: usize, out: &mut [f64]) {
        let lam = self.lambda_at(k);
        if lam <= 0.0 {
            out.fill(1.0 / self.alphabet_size as f64);
            return;
        }
        out.fill(0.0);
        let (lo, hi) = (self.alpha_at(k - 1), self.alpha_at(k));
        for l in -1..=k {
            let seg_lo = self.local_alpha(k, u, l - 1);
            let seg_hi = self.local_alpha(k, u, l);
            let overlap = seg_hi.min(hi) - seg_lo.max(lo);
            if overlap > 0.0 {
                let w = overlap / (self.total_rate * lam);
                for (o, &t) in out.iter_mut().zip(self.local_tilde_p(k, u, l)) {
                    *o += w * t;
                }
            }
        }
        clip_and_normalize(out);
    }

    /// The kernel from the explicit indicator-sum formula, with the case of
    /// `(α(k−1), α(k)]` lying inside a single local segment included.
    pub fn indicator_kernel(&self, k: i64, u: usize) -> Vec<f64> {
        let a = self.alphabet_size;
        let lam = self.lambda_at(k);
        if k < 0 || lam <= 0.0 {
            let mut out = vec![0.0; a];
            if k < 0 && lam > 0.0 {
                out.copy_from_slice(self.local_tilde_p(k, u, -1));
            } else {
                out.fill(1.0 / a as f64);
            }
            return out;
        }
        let m = self.total_rate;
        let (lo, hi) = (self.alpha_at(k - 1), self.alpha_at(k));
        // α(-2, ·) is taken as -∞ so that a zero lower level still selects l' = -1.
        let below = |l: i64| {
            if l < -1 {
                f64::NEG_INFINITY
            } else {
                self.local_alpha(k, u, l)
            }
        };
        let mut out = vec![0.0; a];
        let add = |coef: f64, l: i64, out: &mut Vec<f64>| {
            if coef != 0.0 {
                for (o, &t) in out.iter_mut().zip(self.local_tilde_p(k, u, l)) {
                    *o += coef * t;
                }
            }
        };
        for lp in -1..k {
            if !(below(lp - 1) < lo && lo <= below(lp)) {
                continue;
            }
            if hi <= below(lp) {
                add(1.0, lp, &mut out);
            }
            for l in lp..k {
                if !(below(l) < hi && hi <= below(l + 1)) {
                    continue;
                }
                add((below(lp) - lo) / (m * lam), lp, &mut out);
                for mid in lp + 1..=l {
                    add(self.local_lambda(k, u, mid) / lam, mid, &mut out);
                }
                add((hi - below(l)) / (m * lam), l + 1, &mut out);
            }
        }
        clip_and_normalize(&mut out);
        out
    }

    /// Largest entrywise difference between the two kernel constructions.
    pub fn max_formula_discrepancy(&self) -> f64 {
        let a = self.alphabet_size;
        let mut worst = 0.0f64;
        for level in &self.levels {
            for u in 0..level.windows() {
                let ind = self.indicator_kernel(level.radius, u);
                for (x, y) in ind.iter().zip(&level.p[u * a..(u + 1) * a]) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }

    /// Index of the window seen from `site` at radius `k`.
    pub fn window_index(&self, k: i64, site: &Site, view: &dyn ColorView) -> Result<usize> {
        let a = self.alphabet_size;
        let mut idx = 0;
        for o in self.level(k).offsets.iter().rev() {
            let j = site + o;
            let c = view
                .color_at(&j)
                .ok_or(Error::UncoloredWindow { site: j, record: 0 })?;
            idx = idx * a + c as usize;
        }
        Ok(idx)
    }

    pub fn kernel_row(&self, k: i64, u: usize) -> &[f64] {
        let a = self.alphabet_size;
        &self.level(k).p[u * a..(u + 1) * a]
    }

    /// `M Σ_k λ(k) p^[k](a | w(V(k)))` for a window of radius at least `R`.
    pub fn reconstruct(&self, a: usize, site: &Site, view: &dyn ColorView) -> Result<f64> {
        let mut sum = 0.0;
        for level in &self.levels {
            let lam = self.lambda_at(level.radius);
            if lam > 0.0 {
                let u = self.window_index(level.radius, site, view)?;
                sum += lam * self.kernel_row(level.radius, u)[a];
            }
        }
        Ok(self.total_rate * sum)
    }

    /// `max_{a, w} |reconstruct(a, w) − c(a, w)|` over all radius-`R` windows,
    /// with the diagonal given by the fixed choice.
    pub fn reconstruction_error(&self, raw: &dyn RawRates, budget: EnumerationBudget) -> Result<f64> {
        let t = raw_tables(raw, budget)?;
        let a = self.alphabet_size;
        let origin = Site::origin(self.dim);
        let offsets: Arc<[Site]> = t.offsets.clone().into();
        let mut colors = Vec::new();
        let mut worst = 0.0f64;
        for w in 0..t.windows {
            digits(w, a, t.offsets.len(), &mut colors);
            let window =
                Window::with_offsets(origin.clone(), self.range as i64, offsets.clone(), colors.clone())?;
            for b in 0..a {
                let rebuilt = self.reconstruct(b, &origin, &window)?;
                worst = worst.max((rebuilt - self.total_rate * t.p[w * a + b]).abs());
            }
        }
        Ok(worst)
    }
}

fn clip_and_normalize(p: &mut [f64]) {
    for x in p.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|x| *x /= s);
    }
}

impl LocalKernel for Decomposition {
    fn kernel(&self, site: &Site, k: i64, view: &dyn ColorView, out: &mut [f64]) -> Result<()> {
        if k > self.range as i64 || self.lambda_at(k) <= 0.0 {
            out.fill(1.0 / self.alphabet_size as f64);
            return Ok(());
        }
        let u = if k < 0 {
            0
        } else {
            self.window_index(k, site, view)?
        };
        out.copy_from_slice(self.kernel_row(k, u));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{ExampleOneRates, GeometricQ, HeatBathRates, MrfSpecification, QSequence, TableRates};

    fn em1_r3() -> ExampleOneRates {
        ExampleOneRates::new(1, &GeometricQ::reference(), 3).unwrap()
    }

    #[test]
    fn example_alpha_closed_form() {
        let q = GeometricQ::reference();
        let vals = compute_alpha(&em1_r3(), EnumerationBudget::default()).unwrap();
        for k in -1..=3i64 {
            let qk = q.q(k.max(0) as usize);
            let expected = 1.0 - qk + q.q(3);
            assert!((vals.simplified[(k + 1) as usize] - expected).abs() < 1e-12, "k={k}");
        }
        assert!((vals.simplified[2] - 0.970703125).abs() < 1e-15);
        assert!((vals.simplified[5] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn example_lambda_and_reconstruction() {
        let q = GeometricQ::reference();
        let raw = em1_r3();
        let dec = decompose(&raw, EnumerationBudget::default()).unwrap();
        assert_eq!(dec.lambda()[1], 0.0);
        for k in 1..=3usize {
            assert!((dec.lambda()[k + 1] - (q.q(k - 1) - q.q(k))).abs() < 1e-12);
        }
        assert_eq!(dec.lambda()[5], 0.0);
        let err = dec.reconstruction_error(&raw, EnumerationBudget::default()).unwrap();
        assert!(err < 1e-12, "{err}");
        assert!(dec.max_formula_discrepancy() < 1e-14);
    }

    #[test]
    fn heat_bath_levels() {
        let raw = HeatBathRates::new(MrfSpecification::ising(1, 0.1).unwrap());
        let dec = decompose(&raw, EnumerationBudget::default()).unwrap();
        let a0 = 2.0 / (1.0 + 0.4f64.exp());
        assert!((dec.alpha()[0] - a0).abs() < 1e-15);
        assert!((dec.alpha()[1] - dec.alpha()[0]).abs() < 1e-12);
        assert_eq!(dec.alpha()[2], 1.0);
        assert!((dec.lambda()[2] - (1.0 - a0)).abs() < 1e-15);
        assert!(dec.reconstruction_error(&raw, EnumerationBudget::default()).unwrap() < 1e-12);
        assert!(dec.max_formula_discrepancy() < 1e-14);
    }

    #[test]
    fn budget_guard() {
        let raw = ExampleOneRates::new(1, &GeometricQ::reference(), 12).unwrap();
        match decompose(&raw, EnumerationBudget(1 << 10)) {
            Err(Error::EnumerationBudget { windows, .. }) => assert_eq!(windows, 1 << 27),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spontaneous_table() {
        let rates = vec![vec![0.6, 1.4], vec![0.6, 1.4]];
        let raw = TableRates::new(1, 2, 0, 2.0, rates).unwrap();
        let dec = decompose(&raw, EnumerationBudget::default()).unwrap();
        assert_eq!(dec.lambda(), &[1.0, 0.0]);
        assert!((dec.kernel_row(-1, 0)[1] - 0.7).abs() < 1e-15);
        assert_eq!(dec.kernel_row(0, 1), &[0.5, 0.5]);
    }
}
