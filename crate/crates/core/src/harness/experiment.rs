//! Experiment pipelines behind the command-line subcommands. Each pipeline
//! collects its data files and a list of named assertions; files are written
//! once at the end together with a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::coloring::{
    coupling_table, cylinder_index, forward_coloring, stationary_trajectory, PartialConfiguration,
};
use crate::error::{Error, Result};
use crate::finitary::{equivariance_check, finitary_sample, pile_statistics, BitField, FinitaryOptions, FlippedBit};
use crate::lattice::{Site, SiteSet};
use crate::random::{derive_seed, replicate_rng};
use crate::rates::{
    check_condition, check_hs_condition, coupling_rate, growth_rate, Color, EmptyView, RateModel,
};
use crate::sketch::{backward_sketch, backward_sketch_no_deaths, sketch_diagnostics, SketchOptions};

use super::config::{sha256_hex, BuiltModel, LoadedConfig};
use super::stats::{compare_distributions, goodness_of_fit, ks_exponential, mean_se};
use super::suite::{run_suite, SuiteOptions};
use super::torus::{detailed_balance, torus_long_run};

/// Significance level of the statistical assertions.
pub const SIGNIFICANCE: f64 = 0.01;
/// Largest cylinder tabulated, in cells.
const MAX_CELLS: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Validate,
    Decompose,
    Sample,
    Sketch,
    Trajectory,
    Couple,
    Finitary,
    Oracle,
    Compare,
    Suite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Validate => "validate",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::Sample => "sample",
            ExperimentKind::Sketch => "sketch",
            ExperimentKind::Trajectory => "trajectory",
            ExperimentKind::Couple => "couple",
            ExperimentKind::Finitary => "finitary",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Suite => "suite",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Run the reconstruction check after decomposing.
    pub check: bool,
    /// Output directory; overrides the configuration.
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub model: String,
    pub seed: u64,
    pub replicates: u64,
    pub assertions: Vec<Assertion>,
    pub summary: Value,
    pub files: Vec<String>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

#[derive(Default)]
struct Collector {
    assertions: Vec<Assertion>,
    files: Vec<(String, Vec<u8>)>,
}

impl Collector {
    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn file(&mut self, name: &str, content: impl Into<Vec<u8>>) {
        self.files.push((name.into(), content.into()));
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.file(name, text);
        Ok(())
    }
}

/// `x:y:…` label of a site, safe inside CSV.
pub fn site_label(site: &Site) -> String {
    site.coords().iter().map(i64::to_string).collect::<Vec<_>>().join(":")
}

fn cells(model: &dyn RateModel, f: &SiteSet) -> Result<usize> {
    model
        .alphabet()
        .len()
        .checked_pow(f.len() as u32)
        .filter(|&n| n <= MAX_CELLS)
        .ok_or_else(|| Error::InvalidConfig(format!("cylinder of {} sites is too large to tabulate", f.len())))
}

/// One perfect sample per replicate: `n_stop` and the colors on `F`.
pub fn perfect_samples(
    model: &dyn RateModel,
    f: &SiteSet,
    replicates: u64,
    seed: u64,
    opts: SketchOptions,
) -> Result<Vec<(usize, Vec<Color>)>> {
    (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let trace = backward_sketch(model, f, &mut rng, opts)?;
            let colors = forward_coloring(model, &trace, &mut rng)?;
            Ok((trace.n_stop(), colors.colors_on(f)?))
        })
        .collect()
}

/// Cylinder counts of colorings, indexed by [`cylinder_index`].
pub fn tabulate<'a>(samples: impl IntoIterator<Item = &'a [Color]>, alphabet: usize, cells: usize) -> Vec<u64> {
    let mut counts = vec![0u64; cells];
    for s in samples {
        counts[cylinder_index(s, alphabet)] += 1;
    }
    counts
}

/// The product law of `p^[−1]` over `F`, for purely spontaneous models.
fn spontaneous_product(model: &dyn RateModel, f: &SiteSet) -> Result<Option<Vec<f64>>> {
    let origin = Site::origin(model.dimension());
    if model.range_law(&origin).prob(-1) != 1.0 {
        return Ok(None);
    }
    let a = model.alphabet().len();
    let mut p = vec![0.0; a];
    let mut law = vec![1.0];
    for site in f.iter() {
        model.kernel(site, -1, &EmptyView, &mut p)?;
        // The first site is the least significant digit.
        law = (0..law.len() * a).map(|c| law[c % law.len()] * p[c / law.len()]).collect();
    }
    Ok(Some(law))
}

/// Runs one pipeline, writing its files when an output directory is set.
pub fn run_experiment(cfg: &LoadedConfig, kind: ExperimentKind, opts: &RunOptions) -> Result<ExperimentReport> {
    let mut out = Collector::default();
    let summary = match kind {
        ExperimentKind::Validate => validate(cfg, &mut out)?,
        ExperimentKind::Decompose => decompose(cfg, opts.check, &mut out)?,
        ExperimentKind::Sample => sample(cfg, &mut out)?,
        ExperimentKind::Sketch => sketch(cfg, &mut out)?,
        ExperimentKind::Trajectory => trajectory(cfg, &mut out)?,
        ExperimentKind::Couple => couple(cfg, &mut out)?,
        ExperimentKind::Finitary => finitary(cfg, &mut out)?,
        ExperimentKind::Oracle => oracle(cfg, &mut out)?,
        ExperimentKind::Compare => compare(cfg, &mut out)?,
        ExperimentKind::Suite => suite(cfg, &mut out)?,
    };
    out.json("summary.json", &summary)?;
    let mut report = ExperimentReport {
        kind,
        model: cfg.model.label().to_string(),
        seed: cfg.config.seed,
        replicates: cfg.config.replicates,
        assertions: out.assertions,
        summary,
        files: out.files.iter().map(|f| f.0.clone()).collect(),
    };
    let dir = opts.out.clone().or_else(|| cfg.config.output.as_ref().map(|p| cfg.base_dir.join(p)));
    if let Some(dir) = dir {
        write_outputs(&dir, cfg, &report, &out.files)?;
        report.files.push("manifest.json".into());
    }
    Ok(report)
}

fn write_outputs(dir: &Path, cfg: &LoadedConfig, report: &ExperimentReport, files: &[(String, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut digests = BTreeMap::new();
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes)?;
        digests.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = json!({
        "kind": report.kind,
        "model": report.model,
        "seed": cfg.config.seed,
        "replicates": cfg.config.replicates,
        "config_sha256": cfg.config_hash,
        "version": env!("CARGO_PKG_VERSION"),
        "passed": report.passed(),
        "files": digests,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn validate(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let model = cfg.model.model.as_ref();
    let weak = check_condition(model, false);
    let strict = check_condition(model, true);
    out.check("summable_ranges", weak.holds(), format!("{weak:?}"));
    out.check("strict_condition", strict.holds(), format!("lambda_bar = {:?}", strict.lambda_bar));
    let hs = cfg.model.specification.as_ref().map(check_hs_condition);
    if let Some(hs) = &hs {
        // For nearest-neighbour heat baths both conditions read α(−1) > 2d/(2d+1).
        out.check(
            "hs_matches_strict_condition",
            hs.holds == strict.holds(),
            format!("margin {}", hs.margin),
        );
    }
    let value = json!({
        "non_strict": weak,
        "strict": strict,
        "growth_rate": growth_rate(model),
        "coupling_rate": coupling_rate(model),
        "hs": hs,
    });
    out.json("validate.json", &value)?;
    Ok(value)
}

fn decompose(cfg: &LoadedConfig, check: bool, out: &mut Collector) -> Result<Value> {
    let model = cfg.model.model.as_ref();
    let raw = model.raw_rates().ok_or_else(|| {
        Error::InvalidConfig("this model has no finite-range rates to decompose; give a truncation `R`".into())
    })?;
    let budget = cfg.config.enumeration_budget;
    let dec = crate::decompose::decompose(raw, budget)?;
    out.json("decomposition.json", &dec)?;
    let mut value = json!({
        "range": dec.range(),
        "total_rate": dec.total_rate(),
        "alpha": dec.alpha(),
        "alpha_literal": dec.alpha_literal(),
        "lambda": dec.lambda(),
    });
    out.check("lambda_sums_to_one", (dec.lambda().iter().sum::<f64>() - 1.0).abs() < 1e-12, "");
    // The model may carry its own range law (analytic for the example).
    let law = model.law();
    let law_gap = (-1..=dec.range() as i64)
        .map(|k| (law.prob(k) - dec.lambda()[(k + 1) as usize]).abs())
        .fold(0.0, f64::max);
    out.check("matches_model_law", law_gap < 1e-12, format!("max |lambda - model law| {law_gap:e}"));
    if check {
        let err = dec.reconstruction_error(raw, budget)?;
        let formula = dec.max_formula_discrepancy();
        out.check("reconstruction", err < 1e-12, format!("max error {err:e}"));
        out.check("indicator_formula", formula < 1e-12, format!("max discrepancy {formula:e}"));
        value["reconstruction_error"] = json!(err);
        value["formula_discrepancy"] = json!(formula);
    }
    Ok(value)
}

fn sample(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let model = cfg.model.model.as_ref();
    let f = &cfg.sites;
    let a = model.alphabet().len();
    let n = cells(model, f)?;
    let samples = perfect_samples(model, f, cfg.config.replicates, cfg.config.seed, cfg.sketch_options())?;
    let mut csv = String::from("replicate,n_stop");
    for s in f.iter() {
        write!(csv, ",{}", site_label(s)).unwrap();
    }
    csv.push('\n');
    for (rep, (n_stop, colors)) in samples.iter().enumerate() {
        write!(csv, "{rep},{n_stop}").unwrap();
        for c in colors {
            write!(csv, ",{c}").unwrap();
        }
        csv.push('\n');
    }
    out.file("samples.csv", csv);
    let counts = tabulate(samples.iter().map(|s| s.1.as_slice()), a, n);
    let total = samples.len() as f64;
    let marginals: Vec<Vec<f64>> = (0..f.len())
        .map(|j| {
            (0..a)
                .map(|c| samples.iter().filter(|s| s.1[j] as usize == c).count() as f64 / total)
                .collect()
        })
        .collect();
    let (mean_n, se_n) = mean_se(samples.iter().map(|s| s.0 as f64));
    let mut value = json!({
        "sites": f.iter().map(site_label).collect::<Vec<_>>(),
        "alphabet": model.alphabet().labels(),
        "cylinder_counts": counts,
        "marginals": marginals,
        "mean_n_stop": mean_n,
        "se_n_stop": se_n,
    });
    if let Some(law) = spontaneous_product(model, f)? {
        let gof = goodness_of_fit(&counts, &law)?;
        out.check(
            "spontaneous_law",
            gof.p_value > SIGNIFICANCE,
            format!("chi2 {:.3} on {} dof, p = {:.4}", gof.statistic, gof.dof, gof.p_value),
        );
        value["goodness_of_fit"] = json!(gof);
    }
    out.json("marginal.json", &value)?;
    Ok(value)
}

fn sketch(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let model = cfg.model.model.as_ref();
    let f = &cfg.sites;
    let (seed, reps, opts) = (cfg.config.seed, cfg.config.replicates, cfg.sketch_options());
    let mut value = json!({ "sites": f.iter().map(site_label).collect::<Vec<_>>() });
    let rows: Vec<(usize, usize, Option<f64>)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let trace = match cfg.config.horizon {
                Some(t) => backward_sketch_no_deaths(model, f, t, &mut rng, opts)?,
                None => backward_sketch(model, f, &mut rng, opts)?,
            };
            Ok((trace.n_stop(), trace.support.len(), trace.t_stop))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("replicate,n_stop,support,t_stop\n");
    for (rep, (n, c, t)) in rows.iter().enumerate() {
        let t = t.map_or(String::new(), |t| t.to_string());
        writeln!(csv, "{rep},{n},{c},{t}").unwrap();
    }
    out.file("sketch.csv", csv);
    let (mean, se) = mean_se(rows.iter().map(|r| r.0 as f64));
    value["mean_n_stop"] = json!(mean);
    value["se_n_stop"] = json!(se);
    if cfg.config.horizon.is_none() {
        let strict = check_condition(model, true);
        if let (true, Some(lb)) = (strict.holds(), strict.lambda_bar) {
            let bound = f.len() as f64 / (1.0 - lb);
            out.check(
                "n_stop_bound",
                mean <= bound + 3.0 * se,
                format!("mean {mean:.4} ± {se:.4}, bound {bound:.4}"),
            );
            value["n_stop_bound"] = json!(bound);
        }
    }
    if !cfg.config.grid.is_empty() {
        let grid = &cfg.config.grid;
        let growth = sketch_diagnostics(model, f, grid, reps, false, derive_seed(seed, "growth"), opts)?;
        let decay = sketch_diagnostics(model, f, grid, reps, true, derive_seed(seed, "decay"), opts)?;
        let mut csv = String::from("deaths,s,mean,se,envelope\n");
        for d in [&growth, &decay] {
            for r in &d.rows {
                writeln!(csv, "{},{},{},{},{}", d.deaths, r.s, r.mean, r.se, r.envelope).unwrap();
            }
        }
        out.file("diagnostics.csv", csv);
        for r in &growth.rows {
            out.check(
                &format!("growth_envelope_s{}", r.s),
                r.mean <= r.envelope + 3.0 * r.se,
                format!("{:.4} ± {:.4} vs {:.4}", r.mean, r.se, r.envelope),
            );
        }
        if grid.len() >= 2 {
            out.check(
                "decay_slope_negative",
                decay.fitted_slope.is_some_and(|s| s < 0.0),
                format!("{:?}", decay.fitted_slope),
            );
        }
        value["growth"] = json!(growth);
        value["decay"] = json!(decay);
    }
    Ok(value)
}

fn trajectory(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let model = cfg.model.model.as_ref();
    let f = &cfg.sites;
    let t = cfg
        .config
        .horizon
        .filter(|&t| t > 0.0)
        .ok_or_else(|| Error::InvalidConfig("trajectory needs a positive `horizon`".into()))?;
    let (seed, reps, opts) = (cfg.config.seed, cfg.config.replicates, cfg.sketch_options());
    let paths = (0..reps)
        .into_par_iter()
        .map(|rep| stationary_trajectory(model, f, t, &mut replicate_rng(seed, rep), opts))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("replicate,site,time,color\n");
    let mut in_horizon = true;
    for (rep, p) in paths.iter().enumerate() {
        for (site, c) in p.initial.iter() {
            writeln!(csv, "{rep},{},0,{c}", site_label(site)).unwrap();
        }
        for (site, jumps) in &p.jumps {
            for &(s, c) in jumps {
                in_horizon &= s > 0.0 && s <= t;
                writeln!(csv, "{rep},{},{s},{c}", site_label(site)).unwrap();
            }
        }
    }
    out.file("trajectory.csv", csv);
    out.check("jumps_in_horizon", in_horizon, format!("all jumps in (0, {t}]"));
    let a = model.alphabet().len();
    let n = cells(model, f)?;
    let at = |s: f64| -> Result<Vec<u64>> {
        let cols: Vec<Vec<Color>> = paths
            .iter()
            .map(|p| p.configuration_at(s).colors_on(f))
            .collect::<Result<_>>()?;
        Ok(tabulate(cols.iter().map(Vec::as_slice), a, n))
    };
    let (start, end) = (at(0.0)?, at(t)?);
    let reference = perfect_samples(model, f, reps, derive_seed(seed, "trajectory-reference"), opts)?;
    let reference = tabulate(reference.iter().map(|s| s.1.as_slice()), a, n);
    let vs_perfect = compare_distributions(&end, &reference)?;
    let ends = compare_distributions(&start, &end)?;
    out.check("time_t_matches_perfect_sample", vs_perfect.p_value > SIGNIFICANCE, format!("p = {:.4}", vs_perfect.p_value));
    out.check("time_0_matches_time_t", ends.p_value > SIGNIFICANCE, format!("p = {:.4}", ends.p_value));
    let mut value = json!({
        "horizon": t,
        "mean_events": paths.iter().map(|p| p.event_count() as f64).sum::<f64>() / reps as f64,
        "start_counts": start,
        "end_counts": end,
        "time_t_vs_perfect": vs_perfect,
        "time_0_vs_time_t": ends,
    });
    // A single spontaneous site jumps at the events of a rate-M Poisson process.
    let origin = Site::origin(model.dimension());
    let m = model.total_rate(&origin);
    if f.len() == 1 && spontaneous_product(model, f)?.is_some() && (-m * t).exp() < 1e-9 {
        let site = f.first().unwrap();
        let gaps: Vec<f64> = paths
            .iter()
            .filter_map(|p| p.jumps.get(site).and_then(|j| j.first()).map(|j| j.0))
            .collect();
        let ks = ks_exponential(&gaps, m);
        out.check("first_jump_exponential", ks.p_value > SIGNIFICANCE, format!("KS p = {:.4}", ks.p_value));
        value["first_jump_ks"] = json!(ks);
    }
    Ok(value)
}

fn couple(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let model = cfg.model.model.as_ref();
    let grid = if cfg.config.grid.is_empty() { vec![1.0, 2.0, 4.0, 8.0] } else { cfg.config.grid.clone() };
    let c = &cfg.config.coupling;
    let max = c.eta.max_color().max(c.zeta.max_color()) as usize;
    if max >= model.alphabet().len() {
        return Err(Error::InvalidConfig("initial rule uses a color outside the alphabet".into()));
    }
    let rows = coupling_table(
        model,
        &c.eta,
        &c.zeta,
        &cfg.sites,
        &grid,
        cfg.config.replicates,
        cfg.config.seed,
        cfg.sketch_options(),
    )?;
    let mut csv = String::from("t,runs,disagreements,rate,se,envelope\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{},{},{}", r.t, r.runs, r.disagreements, r.rate, r.se, r.envelope).unwrap();
        out.check(
            &format!("envelope_t{}", r.t),
            r.rate <= r.envelope + 3.0 * r.se,
            format!("{:.5} ± {:.5} vs {:.5}", r.rate, r.se, r.envelope),
        );
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|x, y| x.t.total_cmp(&y.t));
    let monotone = sorted.windows(2).all(|w| w[1].rate <= w[0].rate);
    out.check("monotone_in_t", monotone, "disagreement rates non-increasing in t");
    out.file("coupling.csv", csv);
    Ok(json!({ "epsilon": coupling_rate(model), "rows": rows }))
}

fn finitary(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let model = cfg.model.model.as_ref();
    let f = &cfg.sites;
    let fopts = FinitaryOptions {
        max_depth: cfg.config.max_depth,
        sketch: cfg.sketch_options(),
    };
    let shift = cfg.shift();
    let (seed, reps, mutations) = (cfg.config.seed, cfg.config.replicates, cfg.config.mutations);
    let checked = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let field = BitField::new(derive_seed(seed, &format!("finitary-{rep}")));
            let report = finitary_sample(model, f, &field, fopts)?;
            let again = finitary_sample(model, f, &field, fopts)?;
            let text = serde_json::to_string(&report)?;
            let deterministic = text == serde_json::to_string(&again)?;
            let mut rng = replicate_rng(derive_seed(seed, "mutations"), rep);
            let mut changed = 0u64;
            for _ in 0..mutations {
                let (site, class, pile, depth) = report.unread_bit(model.dimension(), &mut rng);
                let flipped = FlippedBit { inner: &field, site, class, pile, depth };
                let mutated = finitary_sample(model, f, &flipped, fopts)?;
                changed += u64::from(mutated.colors != report.colors);
            }
            let equivariant = equivariance_check(model, f, &field, &shift, fopts)?;
            Ok((report, deterministic, changed, equivariant))
        })
        .collect::<Result<Vec<_>>>()?;
    let deterministic = checked.iter().filter(|c| c.1).count();
    let changed: u64 = checked.iter().map(|c| c.2).sum();
    let equivariant = checked.iter().filter(|c| c.3).count();
    out.check("deterministic", deterministic as u64 == reps, format!("{deterministic}/{reps} identical reruns"));
    out.check("finitary_property", changed == 0, format!("{changed} of {} mutations changed the output", reps * mutations));
    out.check("shift_equivariance", equivariant as u64 == reps, format!("{equivariant}/{reps} with shift {shift:?}"));
    let stats = pile_statistics(model, f, reps, seed, fopts)?;
    out.check(
        "range_entropy_bound",
        stats.mean_range_bits <= stats.entropy_bound + 3.0 * stats.se_range_bits,
        format!("{:.4} ± {:.4} vs H + 2 = {:.4}", stats.mean_range_bits, stats.se_range_bits, stats.entropy_bound),
    );
    let reports: Vec<_> = checked.into_iter().map(|c| c.0).collect();
    out.json("finitary_reports.json", &reports)?;
    let mut csv = String::from("statistic,value\n");
    let [bi, bk, bw] = stats.mean_bits_by_class;
    for (k, v) in [
        ("mean_range_bits", stats.mean_range_bits),
        ("se_range_bits", stats.se_range_bits),
        ("entropy_bound", stats.entropy_bound),
        ("mean_bits_site_class", bi),
        ("mean_bits_range_class", bk),
        ("mean_bits_color_class", bw),
        ("sup_mean_site_bits", stats.sup_mean_site_bits),
        ("suggested_pile_size", stats.suggested_pile_size as f64),
        ("mean_window", stats.mean_window),
        ("max_pile", stats.max_pile as f64),
    ] {
        writeln!(csv, "{k},{v}").unwrap();
    }
    out.file("pile_statistics.csv", csv);
    Ok(json!({ "pile_statistics": stats }))
}

fn oracle_rates(built: &BuiltModel) -> Result<&dyn crate::rates::RawRates> {
    built
        .oracle_rates
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("model has no finite-range rates for the torus".into()))
}

fn counts_csv(columns: &[(&str, &[u64])], alphabet: usize, sites: usize) -> String {
    let mut csv = String::from("cell,colors");
    for (name, _) in columns {
        write!(csv, ",{name}").unwrap();
    }
    csv.push('\n');
    for cell in 0..columns[0].1.len() {
        let colors: Vec<String> = (0..sites)
            .map(|j| ((cell / alphabet.pow(j as u32)) % alphabet).to_string())
            .collect();
        write!(csv, "{cell},{}", colors.join(":")).unwrap();
        for (_, c) in columns {
            write!(csv, ",{}", c[cell]).unwrap();
        }
        csv.push('\n');
    }
    csv
}

fn oracle(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let raw = oracle_rates(&cfg.model)?;
    let f = &cfg.sites;
    let params = cfg.oracle_params();
    let a = raw.alphabet_size();
    cells(cfg.model.model.as_ref(), f)?;
    let counts = torus_long_run(raw, &params, std::slice::from_ref(f), cfg.config.seed)?.remove(0);
    out.check("sample_count", counts.iter().sum::<u64>() == params.samples, "");
    out.file("oracle.csv", counts_csv(&[("count", &counts)], a, f.len()));
    let mut value = json!({ "params": params, "counts": counts });
    if cfg.model.specification.is_some() {
        let origin = Site::origin(raw.dimension());
        let mut e1 = vec![0; raw.dimension()];
        e1[0] = 1;
        let window: SiteSet = [origin, Site::new(e1)].into_iter().collect();
        let duration = (params.samples as f64 * params.thinning / params.chains as f64).max(100.0);
        let flux = detailed_balance(raw, params.side, &window, params.burn_in, duration, derive_seed(cfg.config.seed, "flux"))?;
        out.check("detailed_balance", flux.max_abs_z < 4.5, format!("max |z| = {:.3}", flux.max_abs_z));
        value["flux"] = json!(flux);
    }
    Ok(value)
}

fn compare(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let model = cfg.model.model.as_ref();
    let f = &cfg.sites;
    let a = model.alphabet().len();
    let n = cells(model, f)?;
    let params = cfg.oracle_params();
    let seed = cfg.config.seed;
    let samples = perfect_samples(model, f, cfg.config.replicates, seed, cfg.sketch_options())?;
    let perfect = tabulate(samples.iter().map(|s| s.1.as_slice()), a, n);
    let torus = torus_long_run(oracle_rates(&cfg.model)?, &params, std::slice::from_ref(f), derive_seed(seed, "oracle"))?.remove(0);
    let report = compare_distributions(&perfect, &torus)?;
    out.check(
        "perfect_matches_oracle",
        report.p_value > SIGNIFICANCE,
        format!("chi2 {:.3} on {} dof, p = {:.4}", report.statistic, report.dof, report.p_value),
    );
    let mut value = json!({ "params": params, "oracle": report });
    let mut columns: Vec<(&str, &[u64])> = vec![("perfect", &perfect), ("oracle", &torus)];
    let control_counts;
    if let Some(control) = &cfg.control {
        if control.model.alphabet().len() != a {
            return Err(Error::InvalidConfig("control model has a different alphabet".into()));
        }
        control_counts = torus_long_run(oracle_rates(control)?, &params, std::slice::from_ref(f), derive_seed(seed, "control"))?.remove(0);
        let neg = compare_distributions(&perfect, &control_counts)?;
        out.check("control_rejected", neg.p_value < 1e-6, format!("p = {:e}", neg.p_value));
        value["control"] = json!(neg);
        columns.push(("control", &control_counts));
    }
    out.file("compare.csv", counts_csv(&columns, a, f.len()));
    out.json("comparison.json", &value)?;
    Ok(value)
}

fn suite(cfg: &LoadedConfig, out: &mut Collector) -> Result<Value> {
    let opts = SuiteOptions {
        replicates: cfg.config.replicates,
        seed: cfg.config.seed,
        oracle: cfg.oracle_params(),
        ..SuiteOptions::default()
    };
    let results = run_suite(&opts);
    let mut csv = String::from("criterion,name,passed,detail\n");
    for r in &results {
        out.check(&format!("criterion_{}", r.id), r.passed, r.detail.clone());
        writeln!(csv, "{},{},{},\"{}\"", r.id, r.name, r.passed, r.detail.replace('"', "'")).unwrap();
    }
    out.file("suite.csv", csv);
    Ok(json!({ "criteria": results }))
}

/// Parses `"1:-2"` back into a site.
pub fn parse_site_label(label: &str) -> Result<Site> {
    label
        .split(':')
        .map(|x| x.trim().parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Site::new)
        .map_err(|e| Error::InvalidConfig(format!("bad site label {label:?}: {e}")))
}

#[doc(hidden)]
pub fn configuration_from_row(sites: &SiteSet, colors: &[Color]) -> PartialConfiguration {
    sites.iter().cloned().zip(colors.iter().copied()).collect()
}
