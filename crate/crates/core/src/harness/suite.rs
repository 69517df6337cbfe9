//! The acceptance suite: ten self-contained criteria on the reference
//! models, each reduced to one pass/fail verdict with a short detail line.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::coloring::{coupling_table, InitialRule};
use crate::decompose::{decompose, EnumerationBudget};
use crate::error::Result;
use crate::finitary::{
    equivariance_check, finitary_sample, knuth_yao_statistics, law_entropy, BitField, FinitaryOptions,
    FinitePartition, FlippedBit, RangePartition,
};
use crate::lattice::{Site, SiteSet};
use crate::random::{derive_seed, replicate_rng};
use crate::rates::{
    example_model, heat_bath_model, spontaneous_model, Alphabet, ExampleOneRates, GeometricQ, HeatBathRates,
    HomogeneousModel, MrfSpecification, QSequence, RateModel,
};
use crate::sketch::{backward_sketch, sketch_diagnostics, simulate_reverse_process, SketchOptions};

use super::experiment::{perfect_samples, site_label, tabulate, SIGNIFICANCE};
use super::stats::{compare_distributions, goodness_of_fit, mean_se};
use super::torus::{torus_long_run, OracleParams};

/// Inverse temperature of the reference heat bath.
pub const REFERENCE_BETA: f64 = 0.1;
/// Inverse temperature of the negative control.
pub const CONTROL_BETA: f64 = 0.3;
/// Truncation used for the decomposition check of the example.
pub const CHECK_TRUNCATION: usize = 3;
/// Truncation of the example rates run on the torus.
pub const ORACLE_TRUNCATION: usize = 25;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    /// Monte Carlo sample size per statistical comparison.
    pub replicates: u64,
    /// Bit fields in the finitary mutation check.
    pub mutation_seeds: u64,
    /// Flipped bits per field.
    pub mutations: u64,
    /// Shifted pairs per model in the equivariance check.
    pub equivariance_pairs: u64,
    pub oracle: OracleParams,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            replicates: 100_000,
            mutation_seeds: 1_000,
            mutations: 1_000,
            equivariance_pairs: 1_000,
            oracle: OracleParams::default(),
            seed: 20_240_601,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "decomposition reconstructs the rates"),
    (2, "alpha values of the reference models"),
    (3, "spontaneous model samples its product law"),
    (4, "perfect samples match the torus oracle"),
    (5, "expected sketch length bound"),
    (6, "coupling disagreement envelope"),
    (7, "sketch growth and decay"),
    (8, "interval sampler bit cost"),
    (9, "finitary coding"),
    (10, "reverse process matches the sketch"),
];

fn line(out: &mut Vec<String>, ok: &mut bool, passed: bool, text: String) {
    *ok &= passed;
    out.push(format!("{}{text}", if passed { "" } else { "FAILED " }));
}

fn reference_q() -> GeometricQ {
    GeometricQ::reference()
}

fn em1() -> Result<HomogeneousModel> {
    example_model(1, &reference_q(), None)
}

fn hb1(beta: f64) -> Result<HomogeneousModel> {
    heat_bath_model(MrfSpecification::ising(1, beta)?)
}

fn sites(xs: &[i64]) -> SiteSet {
    xs.iter().map(|&x| Site::new([x])).collect()
}

fn opts() -> SketchOptions {
    SketchOptions::default()
}

fn criterion_1(_: &SuiteOptions) -> Result<(bool, String)> {
    let start = Instant::now();
    let budget = EnumerationBudget::default();
    let em = ExampleOneRates::new(1, &reference_q(), CHECK_TRUNCATION)?;
    let hb = HeatBathRates::new(MrfSpecification::ising(1, REFERENCE_BETA)?);
    let e1 = decompose(&em, budget)?.reconstruction_error(&em, budget)?;
    let e2 = decompose(&hb, budget)?.reconstruction_error(&hb, budget)?;
    let secs = start.elapsed().as_secs_f64();
    let (mut out, mut ok) = (Vec::new(), true);
    line(&mut out, &mut ok, e1 < 1e-12, format!("example R={CHECK_TRUNCATION} error {e1:.1e}"));
    line(&mut out, &mut ok, e2 < 1e-12, format!("heat bath error {e2:.1e}"));
    line(&mut out, &mut ok, secs < 10.0, format!("{secs:.2}s"));
    Ok((ok, out.join("; ")))
}

fn criterion_2(_: &SuiteOptions) -> Result<(bool, String)> {
    let budget = EnumerationBudget::default();
    let q = reference_q();
    let r = CHECK_TRUNCATION;
    let dec = decompose(&ExampleOneRates::new(1, &q, r)?, budget)?;
    let alpha = dec.alpha();
    let mut worst: f64 = (alpha[0] - (1.0 - q.q(0) + q.q(r))).abs();
    for k in 0..=r {
        worst = worst.max((alpha[k + 1] - (1.0 - q.q(k) + q.q(r))).abs());
    }
    let hb = decompose(&HeatBathRates::new(MrfSpecification::ising(1, REFERENCE_BETA)?), budget)?;
    let a = hb.alpha();
    let expected = 2.0 / (1.0 + (4.0 * REFERENCE_BETA).exp());
    let (mut out, mut ok) = (Vec::new(), true);
    line(&mut out, &mut ok, worst < 1e-12, format!("example max deviation {worst:.1e}"));
    line(&mut out, &mut ok, (a[1] - a[0]).abs() < 1e-12, format!("heat bath alpha(0) = alpha(-1) = {:.6}", a[0]));
    line(&mut out, &mut ok, (a[0] - expected).abs() < 1e-12, format!("closed form {expected:.6}"));
    Ok((ok, out.join("; ")))
}

fn criterion_3(o: &SuiteOptions) -> Result<(bool, String)> {
    let probs = [0.2, 0.3, 0.5];
    let model = spontaneous_model(1, Alphabet::indexed(3)?, &probs, 1.0)?;
    let (mut out, mut ok) = (Vec::new(), true);
    for (i, f) in [sites(&[0]), sites(&[0, 1])].iter().enumerate() {
        let seed = derive_seed(o.seed, &format!("spontaneous-{i}"));
        let samples = perfect_samples(&model, f, o.replicates, seed, opts())?;
        let n = 3usize.pow(f.len() as u32);
        let counts = tabulate(samples.iter().map(|s| s.1.as_slice()), 3, n);
        let law: Vec<f64> = (0..n).map(|c| probs[c % 3] * if f.len() == 2 { probs[c / 3] } else { 1.0 }).collect();
        let g = goodness_of_fit(&counts, &law)?;
        line(&mut out, &mut ok, g.p_value > SIGNIFICANCE, format!("|F|={} p={:.3}", f.len(), g.p_value));
    }
    Ok((ok, out.join("; ")))
}

fn criterion_4(o: &SuiteOptions) -> Result<(bool, String)> {
    let cylinders = [sites(&[0]), sites(&[0, 1]), sites(&[0, 1, 2])];
    let em_oracle = ExampleOneRates::new(1, &reference_q(), ORACLE_TRUNCATION)?;
    let hb_oracle = HeatBathRates::new(MrfSpecification::ising(1, REFERENCE_BETA)?);
    let em = em1()?;
    let hb = hb1(REFERENCE_BETA)?;
    let cases: [(&str, &dyn RateModel, &dyn crate::rates::RawRates); 2] =
        [("example", &em, &em_oracle), ("heat bath", &hb, &hb_oracle)];
    let (mut out, mut ok) = (Vec::new(), true);
    let mut hb_pair = Vec::new();
    for (name, model, raw) in cases {
        let torus = torus_long_run(raw, &o.oracle, &cylinders, derive_seed(o.seed, &format!("torus-{name}")))?;
        for (f, oracle) in cylinders.iter().zip(&torus) {
            let seed = derive_seed(o.seed, &format!("perfect-{name}-{}", f.len()));
            let samples = perfect_samples(model, f, o.replicates, seed, opts())?;
            let counts = tabulate(samples.iter().map(|s| s.1.as_slice()), 2, oracle.len());
            let r = compare_distributions(&counts, oracle)?;
            line(&mut out, &mut ok, r.p_value > SIGNIFICANCE, format!("{name} |F|={} p={:.3}", f.len(), r.p_value));
            if name == "heat bath" && f.len() == 2 {
                hb_pair = counts;
            }
        }
    }
    let control = HeatBathRates::new(MrfSpecification::ising(1, CONTROL_BETA)?);
    let pair = std::slice::from_ref(&cylinders[1]);
    let torus = torus_long_run(&control, &o.oracle, pair, derive_seed(o.seed, "torus-control"))?;
    let r = compare_distributions(&hb_pair, &torus[0])?;
    line(&mut out, &mut ok, r.p_value < 1e-6, format!("control beta={CONTROL_BETA} p={:.1e}", r.p_value));
    Ok((ok, out.join("; ")))
}

fn criterion_5(o: &SuiteOptions) -> Result<(bool, String)> {
    let model = em1()?;
    let f = sites(&[0]);
    let samples = perfect_samples(&model, &f, o.replicates, derive_seed(o.seed, "n-stop"), opts())?;
    let (mean, se) = mean_se(samples.iter().map(|s| s.0 as f64));
    let bound = 24.0 / 13.0;
    Ok((mean <= bound + 3.0 * se, format!("mean {mean:.4} ± {se:.4}, bound {bound:.4}")))
}

fn criterion_6(o: &SuiteOptions) -> Result<(bool, String)> {
    let model = em1()?;
    let grid = [1.0, 2.0, 4.0, 8.0];
    let rows = coupling_table(
        &model,
        &InitialRule::Constant { color: 0 },
        &InitialRule::Constant { color: 1 },
        &sites(&[0]),
        &grid,
        o.replicates,
        derive_seed(o.seed, "coupling"),
        opts(),
    )?;
    let (mut out, mut ok) = (Vec::new(), true);
    for r in &rows {
        line(
            &mut out,
            &mut ok,
            r.rate <= r.envelope + 3.0 * r.se,
            format!("t={} {:.4} vs {:.4}", r.t, r.rate, r.envelope),
        );
    }
    let monotone = rows.windows(2).all(|w| w[1].rate <= w[0].rate);
    line(&mut out, &mut ok, monotone, "monotone".into());
    Ok((ok, out.join("; ")))
}

fn criterion_7(o: &SuiteOptions) -> Result<(bool, String)> {
    let model = em1()?;
    let f = sites(&[0]);
    let grid = [0.5, 1.0, 2.0];
    let growth = sketch_diagnostics(&model, &f, &grid, o.replicates, false, derive_seed(o.seed, "growth"), opts())?;
    let decay = sketch_diagnostics(&model, &f, &grid, o.replicates, true, derive_seed(o.seed, "decay"), opts())?;
    let (mut out, mut ok) = (Vec::new(), true);
    for r in &growth.rows {
        line(
            &mut out,
            &mut ok,
            r.mean <= r.envelope + 3.0 * r.se,
            format!("s={} {:.4} vs {:.4}", r.s, r.mean, r.envelope),
        );
    }
    let slope = decay.fitted_slope;
    line(&mut out, &mut ok, slope.is_some_and(|s| s < 0.0), format!("decay slope {slope:.4?}"));
    Ok((ok, out.join("; ")))
}

fn criterion_8(o: &SuiteOptions) -> Result<(bool, String)> {
    let (mut out, mut ok) = (Vec::new(), true);
    let coin = knuth_yao_statistics(&FinitePartition::uniform(2), o.replicates, derive_seed(o.seed, "coin"), &[], 64)?;
    line(
        &mut out,
        &mut ok,
        coin.min_bits == 1 && coin.max_bits == 1,
        format!("fair coin bits in [{}, {}]", coin.min_bits, coin.max_bits),
    );
    let model = em1()?;
    let law = model.law();
    let h = law_entropy(law);
    let ky = knuth_yao_statistics(&RangePartition::new(law), o.replicates, derive_seed(o.seed, "range"), &[4, 8, 12], 64)?;
    line(
        &mut out,
        &mut ok,
        ky.mean_bits <= h + 2.0 + 3.0 * ky.se_bits,
        format!("range law {:.4} vs H+2 = {:.4}", ky.mean_bits, h + 2.0),
    );
    let n = o.replicates as f64;
    for t in &ky.tails {
        let slack = 3.0 * (t.bound.min(1.0) * (1.0 - t.bound.min(1.0)) / n).sqrt();
        line(
            &mut out,
            &mut ok,
            t.frequency <= t.bound + slack,
            format!("P[N>{}] {:.2e} vs {:.2e}", t.k, t.frequency, t.bound),
        );
    }
    let third = FinitePartition::from_weights(&[1.0 / 3.0, 2.0 / 3.0]);
    let h3 = -(1.0f64 / 3.0) * (1.0f64 / 3.0).log2() - (2.0f64 / 3.0) * (2.0f64 / 3.0).log2();
    let s = knuth_yao_statistics(&third, o.replicates, derive_seed(o.seed, "third"), &[], 64)?;
    line(
        &mut out,
        &mut ok,
        s.mean_bits <= h3 + 2.0 + 3.0 * s.se_bits,
        format!("1/3 split {:.4} vs {:.4}", s.mean_bits, h3 + 2.0),
    );
    Ok((ok, out.join("; ")))
}

fn criterion_9(o: &SuiteOptions) -> Result<(bool, String)> {
    let em = em1()?;
    let hb = hb1(REFERENCE_BETA)?;
    let fopts = FinitaryOptions::default();
    let f = sites(&[0, 1]);
    let shift = Site::new([7]);
    let (mut out, mut ok) = (Vec::new(), true);
    for (name, model) in [("example", &em as &dyn RateModel), ("heat bath", &hb)] {
        let base = derive_seed(o.seed, &format!("finitary-{name}"));
        let changed = (0..o.mutation_seeds)
            .into_par_iter()
            .map(|s| {
                let field = BitField::new(derive_seed(base, &format!("field-{s}")));
                let report = finitary_sample(model, &f, &field, fopts)?;
                let mut rng = replicate_rng(base, s);
                let mut changed = 0u64;
                for _ in 0..o.mutations {
                    let (site, class, pile, depth) = report.unread_bit(1, &mut rng);
                    let flipped = FlippedBit { inner: &field, site, class, pile, depth };
                    changed += u64::from(finitary_sample(model, &f, &flipped, fopts)?.colors != report.colors);
                }
                Ok(changed)
            })
            .sum::<Result<u64>>()?;
        line(
            &mut out,
            &mut ok,
            changed == 0,
            format!("{name}: {changed}/{} mutations changed", o.mutation_seeds * o.mutations),
        );
        let equivariant = (0..o.equivariance_pairs)
            .into_par_iter()
            .map(|s| {
                let field = BitField::new(derive_seed(base, &format!("shift-{s}")));
                equivariance_check(model, &f, &field, &shift, fopts).map(u64::from)
            })
            .sum::<Result<u64>>()?;
        line(
            &mut out,
            &mut ok,
            equivariant == o.equivariance_pairs,
            format!("{equivariant}/{} equivariant", o.equivariance_pairs),
        );
        let bytes = |seed: u64| -> Result<Vec<u8>> {
            let reports = (0..100)
                .map(|s| finitary_sample(model, &f, &BitField::new(derive_seed(seed, &format!("bytes-{s}"))), fopts))
                .collect::<Result<Vec<_>>>()?;
            Ok(serde_json::to_vec(&reports)?)
        };
        let identical = bytes(base)? == bytes(base)?;
        line(&mut out, &mut ok, identical, "byte-identical reruns".into());
    }
    Ok((ok, out.join("; ")))
}

/// First two steps `(I, K)` of a sketch, with `-` once the support is empty.
fn first_steps(steps: impl Iterator<Item = (Site, i64)>) -> String {
    let mut parts: Vec<String> = steps.take(2).map(|(s, k)| format!("{}/{k}", site_label(&s))).collect();
    parts.resize(2, "-".into());
    parts.join(" ")
}

fn criterion_10(o: &SuiteOptions) -> Result<(bool, String)> {
    let model = em1()?;
    let f = sites(&[0, 1]);
    let sketch_seed = derive_seed(o.seed, "sketch-steps");
    let reverse_seed = derive_seed(o.seed, "reverse-steps");
    let sketches = (0..o.replicates)
        .into_par_iter()
        .map(|rep| {
            let trace = backward_sketch(&model, &f, &mut replicate_rng(sketch_seed, rep), opts())?;
            Ok(first_steps(trace.records.into_iter().map(|r| (r.site, r.range))))
        })
        .collect::<Result<Vec<_>>>()?;
    let reverse = (0..o.replicates)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(reverse_seed, &rep.to_string());
            let path = simulate_reverse_process(&model, &f, f64::INFINITY, seed, opts())?;
            Ok(first_steps(path.jumps.into_iter().map(|j| (j.site, j.range))))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for s in sketches {
        table.entry(s).or_default().0 += 1;
    }
    for s in reverse {
        table.entry(s).or_default().1 += 1;
    }
    let (a, b): (Vec<u64>, Vec<u64>) = table.values().copied().unzip();
    let r = compare_distributions(&a, &b)?;
    Ok((
        r.p_value > SIGNIFICANCE,
        format!("{} outcomes, chi2 {:.2} on {} dof, p={:.3}", table.len(), r.statistic, r.dof, r.p_value),
    ))
}

/// Runs one criterion by number.
pub fn run_criterion(id: u32, opts: &SuiteOptions) -> CriterionResult {
    let start = Instant::now();
    let run = match id {
        1 => criterion_1,
        2 => criterion_2,
        3 => criterion_3,
        4 => criterion_4,
        5 => criterion_5,
        6 => criterion_6,
        7 => criterion_7,
        8 => criterion_8,
        9 => criterion_9,
        10 => criterion_10,
        _ => panic!("no criterion {id}"),
    };
    let (passed, detail) = run(opts).unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id,
        name: CRITERIA[(id - 1) as usize].1,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_suite(opts: &SuiteOptions) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, opts)).collect()
}
