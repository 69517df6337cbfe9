//! Model and experiment configuration files (JSON).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coloring::InitialRule;
use crate::decompose::EnumerationBudget;
use crate::error::{Error, Result};
use crate::lattice::{Site, SiteSet};
use crate::rates::{
    example_model, heat_bath_model, Alphabet, ExampleOneRates, GeometricQ, HeatBathRates, HomogeneousModel,
    MrfSpecification, QSequence, RateModel, RawRates, TableRates,
};
use crate::sketch::{SketchOptions, DEFAULT_STEP_BUDGET};

use super::torus::OracleParams;

/// Truncation used for the oracle rates of the untruncated example: the
/// neglected range mass `(q_0 − q_∞) ρ^{R}` is below `1e−15` there.
pub const DEFAULT_ORACLE_TRUNCATION: usize = 25;

fn default_oracle_truncation() -> usize {
    DEFAULT_ORACLE_TRUNCATION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// The chain regenerating in 1, `q_k = q_∞ + (q_0 − q_∞) ρ^k`.
    #[serde(rename = "example1")]
    Example1 {
        q0: f64,
        q_inf: f64,
        ratio: f64,
        /// Truncation radius; absent for the exact infinite-range model.
        #[serde(rename = "R", default)]
        truncation: Option<usize>,
        #[serde(default = "default_oracle_truncation")]
        oracle_truncation: usize,
    },
    /// Heat-bath dynamics of a nearest-neighbour specification: either the
    /// Ising law at inverse temperature `beta` or an explicit table with one
    /// row per boundary assignment.
    HeatBath {
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        table: Option<Vec<Vec<f64>>>,
    },
    /// Explicit finite-range rates, one row per window of `V_0(range)`.
    Table {
        range: usize,
        total_rate: f64,
        rates: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dimension: usize,
    #[serde(default)]
    pub alphabet: Option<Vec<String>>,
    #[serde(flatten)]
    pub kind: ModelKind,
}

/// A model ready for simulation, with the finite-range rates the torus
/// oracle runs on.
#[derive(Clone)]
pub struct BuiltModel {
    pub model: Arc<HomogeneousModel>,
    pub oracle_rates: Option<Arc<dyn RawRates>>,
    pub specification: Option<MrfSpecification>,
}

impl BuiltModel {
    pub fn label(&self) -> &str {
        self.model.label()
    }
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn alphabet_or(&self, n: usize) -> Result<Alphabet> {
        match &self.alphabet {
            Some(labels) => Alphabet::new(labels.clone()),
            None => Alphabet::indexed(n),
        }
    }

    pub fn build(&self, budget: EnumerationBudget) -> Result<BuiltModel> {
        let d = self.dimension;
        match &self.kind {
            ModelKind::Example1 {
                q0,
                q_inf,
                ratio,
                truncation,
                oracle_truncation,
            } => {
                if self.alphabet.as_ref().is_some_and(|a| a.len() != 2) {
                    return Err(Error::InvalidConfig("example1 has exactly two colors".into()));
                }
                let q = GeometricQ {
                    q0: *q0,
                    q_inf: *q_inf,
                    ratio: *ratio,
                };
                let model = example_model(d, &q as &dyn QSequence, *truncation)?;
                let oracle: Arc<dyn RawRates> = Arc::new(ExampleOneRates::new(
                    d,
                    &q,
                    truncation.unwrap_or(*oracle_truncation),
                )?);
                Ok(BuiltModel {
                    model: Arc::new(model),
                    oracle_rates: Some(oracle),
                    specification: None,
                })
            }
            ModelKind::HeatBath { beta, table } => {
                let spec = match (beta, table) {
                    (Some(b), None) => {
                        if self.alphabet.as_ref().is_some_and(|a| a.len() != 2) {
                            return Err(Error::InvalidConfig("the Ising law has two colors".into()));
                        }
                        MrfSpecification::ising(d, *b)?
                    }
                    (None, Some(t)) => {
                        let n = t.first().map_or(0, Vec::len);
                        MrfSpecification::new(d, self.alphabet_or(n)?, t.clone())?
                    }
                    _ => {
                        return Err(Error::InvalidConfig(
                            "heat_bath needs exactly one of `beta` and `table`".into(),
                        ))
                    }
                };
                let model = heat_bath_model(spec.clone())?.with_label(match beta {
                    Some(b) => format!("heat_bath-beta{b}"),
                    None => "heat_bath".into(),
                });
                Ok(BuiltModel {
                    model: Arc::new(model),
                    oracle_rates: Some(Arc::new(HeatBathRates::new(spec.clone()))),
                    specification: Some(spec),
                })
            }
            ModelKind::Table {
                range,
                total_rate,
                rates,
            } => {
                let n = rates.first().map_or(0, Vec::len);
                let alphabet = self.alphabet_or(n)?;
                let raw: Arc<dyn RawRates> =
                    Arc::new(TableRates::new(d, alphabet.len(), *range, *total_rate, rates.clone())?);
                let model = HomogeneousModel::from_raw_rates(alphabet, raw.clone(), budget)?.with_label("table");
                Ok(BuiltModel {
                    model: Arc::new(model),
                    oracle_rates: Some(raw),
                    specification: None,
                })
            }
        }
    }
}

/// A model given inline or as a path to a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Inline(ModelSpec),
}

impl ModelRef {
    pub fn resolve(&self, base: &Path) -> Result<ModelSpec> {
        match self {
            ModelRef::Inline(spec) => Ok(spec.clone()),
            ModelRef::Path(p) => {
                let path = base.join(p);
                let text = fs::read_to_string(&path).map_err(|e| {
                    Error::InvalidConfig(format!("model file {}: {e}", path.display()))
                })?;
                ModelSpec::from_json(&text)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub side: usize,
    pub burn_in: f64,
    pub thinning: f64,
    /// Defaults to the number of replicates.
    pub samples: Option<u64>,
    pub chains: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let p = OracleParams::default();
        OracleConfig {
            side: p.side,
            burn_in: p.burn_in,
            thinning: p.thinning,
            samples: None,
            chains: p.chains,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    pub eta: InitialRule,
    pub zeta: InitialRule,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            eta: InitialRule::Constant { color: 0 },
            zeta: InitialRule::Constant { color: 1 },
        }
    }
}

/// An experiment description. Everything except `model` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelRef,
    /// The cylinder `F`, as coordinate lists. Defaults to the origin.
    #[serde(default)]
    pub sites: Vec<Vec<i64>>,
    /// Horizon `t` for trajectories and timed sketches.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Time grid for coupling and sketch diagnostics.
    #[serde(default)]
    pub grid: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    /// A second model for negative controls in `compare`.
    #[serde(default)]
    pub control: Option<ModelRef>,
    /// Lattice shift for the equivariance check.
    #[serde(default)]
    pub shift: Option<Vec<i64>>,
    /// Bit mutations per finitary sample.
    #[serde(default = "default_mutations")]
    pub mutations: u64,
    #[serde(default = "default_max_depth")]
    pub max_depth: u32,
    #[serde(default = "default_step_budget")]
    pub step_budget: u64,
    #[serde(default)]
    pub enumeration_budget: EnumerationBudget,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_replicates() -> u64 {
    1000
}

fn default_mutations() -> u64 {
    100
}

fn default_max_depth() -> u32 {
    crate::finitary::DEFAULT_MAX_DEPTH
}

fn default_step_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

/// A parsed configuration with its model built and checked.
#[derive(Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub model: BuiltModel,
    pub control: Option<BuiltModel>,
    pub sites: SiteSet,
    /// SHA-256 of the configuration text, hex encoded.
    pub config_hash: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn sketch_options(&self) -> SketchOptions {
        SketchOptions {
            step_budget: self.config.step_budget,
        }
    }

    pub fn oracle_params(&self) -> OracleParams {
        let o = &self.config.oracle;
        OracleParams {
            side: o.side,
            burn_in: o.burn_in,
            thinning: o.thinning,
            samples: o.samples.unwrap_or(self.config.replicates),
            chains: o.chains,
        }
    }

    pub fn shift(&self) -> Site {
        match &self.config.shift {
            Some(v) => Site::new(v.iter().copied()),
            None => {
                let mut v = vec![0; self.model.model.dimension()];
                v[0] = 7;
                Site::new(v)
            }
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads, resolves and validates a configuration file.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text)?.prepare(&base, sha256_hex(text.as_bytes()))
    }

    /// Builds the models and checks the invariants of the configuration.
    pub fn prepare(self, base: &Path, config_hash: String) -> Result<LoadedConfig> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        let model = self.model.resolve(base)?.build(self.enumeration_budget)?;
        let control = match &self.control {
            Some(c) => Some(c.resolve(base)?.build(self.enumeration_budget)?),
            None => None,
        };
        let d = model.model.dimension();
        let sites: SiteSet = if self.sites.is_empty() {
            SiteSet::singleton(Site::origin(d))
        } else {
            self.sites.iter().map(|c| Site::new(c.iter().copied())).collect()
        };
        if sites.iter().any(|s| s.dim() != d) {
            return Err(Error::InvalidConfig(format!("sites must have {d} coordinates")));
        }
        if let Some(v) = &self.shift {
            if v.len() != d {
                return Err(Error::InvalidConfig(format!("shift must have {d} coordinates")));
            }
        }
        for built in std::iter::once(&model).chain(control.as_ref()) {
            if let Some(raw) = &built.oracle_rates {
                if self.oracle.side < 2 * raw.range() + 1 {
                    return Err(Error::TorusTooSmall {
                        side: self.oracle.side,
                        range: raw.range(),
                    });
                }
            }
        }
        if self.horizon.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
            return Err(Error::InvalidConfig("horizon must be finite and non-negative".into()));
        }
        if self.grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidConfig("grid times must be finite and non-negative".into()));
        }
        if !(1..=crate::finitary::MAX_DEPTH_LIMIT).contains(&self.max_depth) {
            return Err(Error::InvalidConfig(format!(
                "max_depth must lie in 1..={}",
                crate::finitary::MAX_DEPTH_LIMIT
            )));
        }
        Ok(LoadedConfig {
            config: self,
            model,
            control,
            sites,
            config_hash,
            base_dir: base.to_path_buf(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_model_kind() {
        let em: ModelSpec =
            serde_json::from_str(r#"{"dimension":1,"model":"example1","q0":0.625,"q_inf":0.5,"ratio":0.25}"#).unwrap();
        let built = em.build(EnumerationBudget::default()).unwrap();
        assert_eq!(built.oracle_rates.as_ref().unwrap().range(), 26);
        assert_eq!(built.model.law().prob(-1), 0.875);

        let hb: ModelSpec = serde_json::from_str(r#"{"dimension":1,"model":"heat_bath","beta":0.1}"#).unwrap();
        let built = hb.build(EnumerationBudget::default()).unwrap();
        assert!(built.specification.is_some());
        assert!((built.model.law().prob(-1) - 2.0 / (1.0 + 0.4f64.exp())).abs() < 1e-12);

        let tb: ModelSpec = serde_json::from_str(
            r#"{"dimension":1,"alphabet":["a","b"],"model":"table","range":0,"total_rate":2.0,"rates":[[0,1],[1,0]]}"#,
        )
        .unwrap();
        let built = tb.build(EnumerationBudget::default()).unwrap();
        assert_eq!(built.model.alphabet().label(1), "b");
        assert_eq!(built.model.m(), 2.0);

        let bad = r#"{"dimension":1,"model":"heat_bath","beta":0.1,"table":[[0.5,0.5]]}"#;
        let spec: ModelSpec = serde_json::from_str(bad).unwrap();
        assert!(spec.build(EnumerationBudget::default()).is_err());
    }

    #[test]
    fn rejects_small_torus_and_empty_runs() {
        let text = r#"{"model":{"dimension":1,"model":"heat_bath","beta":0.1},"oracle":{"side":2}}"#;
        let err = ExperimentConfig::from_json(text).unwrap().prepare(Path::new("."), String::new());
        assert!(matches!(err, Err(Error::TorusTooSmall { side: 2, range: 1 })));
        let text = r#"{"model":{"dimension":1,"model":"heat_bath","beta":0.1},"replicates":0}"#;
        assert!(ExperimentConfig::from_json(text).unwrap().prepare(Path::new("."), String::new()).is_err());
        let text = r#"{"model":{"dimension":1,"model":"heat_bath","beta":0.1},"bogus":1}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn model_files_resolve_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.json"), r#"{"dimension":1,"model":"heat_bath","beta":0.2}"#).unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"model":"m.json","sites":[[0],[1]],"seed":3}"#).unwrap();
        let loaded = ExperimentConfig::load(&cfg).unwrap();
        assert_eq!(loaded.sites.len(), 2);
        assert_eq!(loaded.config_hash.len(), 64);
        assert_eq!(loaded.shift(), Site::new([7]));
        fs::write(&cfg, r#"{"model":"missing.json"}"#).unwrap();
        assert!(ExperimentConfig::load(&cfg).is_err());
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
