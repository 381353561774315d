//! Experiment configuration.
//!
//! Configs are TOML files with one section per module:
//!
//! ```toml
//! [experiment]
//! algo = "rr_v2"          # vanilla_sarah | bb_sarah | single_reg | rr_v1 | rr_v2 | ncvx
//!                         # | adagrad | modified_bb | gd | sgd
//! budget_passes = 100     # or `budget` in IFOs
//! seeds = [0, 1, 2]
//! output = "out/v2"
//!
//! [data]
//! dataset = "a3a"         # looked up in $VROPT_DATA_DIR; synthetic fallback if absent
//! loss = "logistic"       # or "sigmoidsq"
//!
//! [meta]
//! epsilon = 1e-8
//! subsolver = "sarah_fixed"
//! ```
//!
//! Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{MetaConfig, Scheme};
use crate::objective::LossKind;
use crate::optimizers::{AdaGradBatch, ModifiedBbKind, SgdSchedule, SnapshotRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    VanillaSarah,
    BbSarah,
    SingleReg,
    RrV1,
    RrV2,
    Ncvx,
    Adagrad,
    ModifiedBb,
    Gd,
    Sgd,
}

impl Algo {
    pub fn id(self) -> &'static str {
        match self {
            Algo::VanillaSarah => "vanilla_sarah",
            Algo::BbSarah => "bb_sarah",
            Algo::SingleReg => "single_reg",
            Algo::RrV1 => "rr_v1",
            Algo::RrV2 => "rr_v2",
            Algo::Ncvx => "ncvx",
            Algo::Adagrad => "adagrad",
            Algo::ModifiedBb => "modified_bb",
            Algo::Gd => "gd",
            Algo::Sgd => "sgd",
        }
    }

    pub fn scheme(self) -> Option<Scheme> {
        match self {
            Algo::SingleReg => Some(Scheme::Single),
            Algo::RrV1 => Some(Scheme::RecursiveV1),
            Algo::RrV2 => Some(Scheme::RecursiveV2),
            Algo::Ncvx => Some(Scheme::Nonconvex),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub algo: Algo,
    /// Curve name in traces and plots (default: the algorithm id).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Maximum IFOs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Budget in effective passes (`budget = passes·n`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_passes: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Every coordinate of the starting point.
    #[serde(default)]
    pub x0: f64,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Seeded synthetic categorical data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 2000,
            d: 50,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// LIBSVM file; relative paths are also tried under `$VROPT_DATA_DIR`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Dataset name looked up under `$VROPT_DATA_DIR`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Substitute the default synthetic data when `dataset` is not found.
    #[serde(default = "yes")]
    pub fallback_synthetic: bool,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Pad the feature dimension up to this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            path: None,
            dataset: None,
            synthetic: None,
            fallback_synthetic: true,
            loss: LossKind::Logistic,
            dim: None,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_loss() -> LossKind {
    LossKind::Logistic
}

/// SARAH on the objective itself (`vanilla_sarah`, `bb_sarah`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SarahSection {
    /// Step size, or the first-loop step for BB (default `0.5/L`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Inner loop length (default `5n`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub snapshot: SnapshotRule,
    /// BB scaling (default κ when the objective is strongly convex).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_kappa: Option<f64>,
    /// Stop once `‖∇f‖²` at a snapshot is at most this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModifiedBbSection {
    /// The `1/m` factor and the inner loop length (default `n`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Default `1/√m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Default: convex for logistic, nonconvex for sigmoidsq.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ModifiedBbKind>,
    /// First-loop step (default `1/(m(L+λ))`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_init: Option<f64>,
    #[serde(default)]
    pub snapshot: SnapshotRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaGradSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default)]
    pub batch: AdaGradBatch,
}

impl Default for AdaGradSection {
    fn default() -> Self {
        AdaGradSection {
            alpha: default_alpha(),
            eps0: default_eps0(),
            batch: AdaGradBatch::default(),
        }
    }
}

fn default_alpha() -> f64 {
    0.1
}

fn default_eps0() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    /// Default `1/L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
    #[serde(default)]
    pub schedule: SgdSchedule,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdSection {
    /// Default `1/L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sarah: Option<SarahSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified_bb: Option<ModifiedBbSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adagrad: Option<AdaGradSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd: Option<SgdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gd: Option<GdSection>,
}

impl ExperimentConfig {
    pub fn new(algo: Algo) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection {
                algo,
                label: None,
                budget: None,
                budget_passes: None,
                seeds: default_seeds(),
                output: default_output(),
                x0: 0.0,
            },
            data: DataSection::default(),
            sarah: None,
            meta: None,
            modified_bb: None,
            adagrad: None,
            sgd: None,
            gd: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn label(&self) -> String {
        self.experiment
            .label
            .clone()
            .unwrap_or_else(|| self.experiment.algo.id().to_string())
    }

    /// IFO budget for a dataset with `n` components.
    pub fn budget_ifo(&self, n: usize) -> Result<u64> {
        match (self.experiment.budget, self.experiment.budget_passes) {
            (Some(b), None) => Ok(b),
            (None, Some(p)) => Ok((p * n as f64).round() as u64),
            (Some(_), Some(_)) => Err(Error::Config(
                "set only one of budget and budget_passes".into(),
            )),
            (None, None) => Err(Error::Config("budget is required".into())),
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let positive = match (e.budget, e.budget_passes) {
            (Some(b), None) => b > 0,
            (None, Some(p)) => p > 0.0 && p.is_finite(),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set only one of budget and budget_passes".into(),
                ));
            }
            (None, None) => return Err(Error::Config("budget is required".into())),
        };
        if !positive {
            return Err(Error::Config("budget must be positive".into()));
        }
        if e.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        if !e.x0.is_finite() {
            return Err(Error::Config("x0 must be finite".into()));
        }
        if self.label().contains([',', '/', '\\', '"', '\n']) {
            return Err(Error::Config(
                "label must not contain , / \\ \" or newlines".into(),
            ));
        }
        let d = &self.data;
        if [d.path.is_some(), d.dataset.is_some(), d.synthetic.is_some()]
            .iter()
            .filter(|&&b| b)
            .count()
            > 1
        {
            return Err(Error::Config(
                "set at most one of data.path, data.dataset, data.synthetic".into(),
            ));
        }

        let algo = e.algo;
        let stray = |name: &str, present: bool, wanted: &[Algo]| {
            if present && !wanted.contains(&algo) {
                Err(Error::Config(format!(
                    "[{name}] does not apply to algo {}",
                    algo.id()
                )))
            } else {
                Ok(())
            }
        };
        stray(
            "sarah",
            self.sarah.is_some(),
            &[Algo::VanillaSarah, Algo::BbSarah],
        )?;
        stray(
            "meta",
            self.meta.is_some(),
            &[Algo::SingleReg, Algo::RrV1, Algo::RrV2, Algo::Ncvx],
        )?;
        stray(
            "modified_bb",
            self.modified_bb.is_some(),
            &[Algo::ModifiedBb],
        )?;
        stray("adagrad", self.adagrad.is_some(), &[Algo::Adagrad])?;
        stray("sgd", self.sgd.is_some(), &[Algo::Sgd])?;
        stray("gd", self.gd.is_some(), &[Algo::Gd])?;
        if let Some(scheme) = algo.scheme() {
            let meta = self.meta_config();
            if self.meta.as_ref().is_some_and(|m| m.ifo_budget.is_some()) {
                return Err(Error::Config(
                    "set the budget in [experiment], not [meta]".into(),
                ));
            }
            if self.meta.as_ref().is_some_and(|m| m.seed != 0) {
                return Err(Error::Config(
                    "set seeds in [experiment], not [meta]".into(),
                ));
            }
            MetaConfig { scheme, ..meta }
                .validate()
                .map_err(to_config)?;
        }
        if let Some(a) = &self.adagrad {
            if !(a.alpha > 0.0) || !(a.eps0 >= 0.0) {
                return Err(Error::Config("adagrad needs alpha > 0 and eps0 ≥ 0".into()));
            }
        }
        Ok(())
    }

    /// `[meta]` with the scheme implied by the algorithm.
    pub fn meta_config(&self) -> MetaConfig {
        let mut m = self.meta.clone().unwrap_or_default();
        if let Some(s) = self.experiment.algo.scheme() {
            m.scheme = s;
        }
        m
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    }
}

/// Sets `dotted.key = value` inside a TOML table, creating sections as needed.
pub fn set_toml_key(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("bad key {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{p} in {key:?} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[experiment]\nalgo = \"rr_v2\"\nbudget_passes = 3\n";

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.experiment.algo, Algo::RrV2);
        assert_eq!(c.experiment.seeds, vec![0]);
        assert_eq!(c.data.loss, LossKind::Logistic);
        assert!(c.data.fallback_synthetic);
        assert_eq!(c.budget_ifo(10).unwrap(), 30);
        assert_eq!(c.meta_config().scheme, Scheme::RecursiveV2);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let e = ExperimentConfig::from_toml_str("[experiment]\nalgo = \"gd\"\nbudget = 0\n")
            .unwrap_err();
        assert!(
            matches!(&e, Error::Config(m) if m == "budget must be positive"),
            "{e}"
        );
    }

    #[test]
    fn inconsistent_sections_rejected() {
        for bad in [
            "[experiment]\nalgo = \"gd\"\nbudget = 5\n[meta]\nepsilon = 1e-3\n",
            "[experiment]\nalgo = \"gd\"\nbudget = 5\nseeds = []\n",
            "[experiment]\nalgo = \"ncvx\"\nbudget = 5\n[meta]\nmu = 1.0\n",
            "[experiment]\nalgo = \"gd\"\nbudget = 5\nbudget_passes = 1\n",
            "[experiment]\nalgo = \"gd\"\nbudget = 5\nfoo = 1\n",
            "[experiment]\nalgo = \"gd\"\nbudget = 5\nlabel = \"a,b\"\n",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn json_round_trip() {
        let mut c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        c.meta = Some(MetaConfig {
            epsilon: 1e-6,
            ..MetaConfig::new(Scheme::RecursiveV2)
        });
        let s = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn dotted_override() {
        let mut t: toml::Table = toml::from_str(MINIMAL).unwrap();
        set_toml_key(&mut t, "meta.epsilon", toml::Value::Float(1e-4)).unwrap();
        let c: ExperimentConfig = t.try_into().unwrap();
        assert_eq!(c.meta.unwrap().epsilon, 1e-4);
    }
}
