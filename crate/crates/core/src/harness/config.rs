//! Experiment configuration, read from TOML.
//!
//! Ranges are inclusive `[min, max]` pairs. Matroid limits accept an
//! integer, a list, a matrix (`[robot][time]`), or one of the symbols
//! `"robots"` and `"active_times"`, which resolve to the sampled `R` and `L`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSystem, KnapsackGroup, KnapsackSpec, MatroidSpec, MatroidVariant};
use crate::envsim::GmmConfig;
use crate::error::{Error, Result};
use crate::groundset::Point2;
use crate::oracle::EnumerationBudget;
use crate::stgp::KernelParams;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "INTERMIT_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: u64,
    pub eta: f64,
    pub output_dir: PathBuf,
    pub ranges: Ranges,
    pub field: FieldConfig,
    pub robots: RobotConfig,
    pub training: TrainingConfig,
    pub kernel: KernelGrid,
    pub constraints: ConstraintConfig,
    pub oracle: OracleConfig,
    pub gmm: GmmConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ranges {
    pub grid_p: [usize; 2],
    pub grid_q: [usize; 2],
    pub horizon: [usize; 2],
    pub active_times: [usize; 2],
    pub robots: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    /// Sensing noise variance drawn uniformly from `[min, max]`.
    pub noise_variance: [f64; 2],
    /// Travel-cost weight drawn uniformly from the open interval.
    pub cost_weight: [f64; 2],
    pub depot: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// Probes drawn uniformly over the field and over times `[0, T]`.
    pub samples: usize,
    pub noise_variance: f64,
}

/// Candidate hyperparameters; the cartesian product is searched by
/// marginal likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelGrid {
    pub spatial_variance: Vec<f64>,
    pub spatial_length: Vec<f64>,
    pub temporal_variance: Vec<f64>,
    pub temporal_length: Vec<f64>,
    pub noise_variance: Vec<f64>,
}

impl KernelGrid {
    pub fn candidates(&self) -> Result<Vec<KernelParams>> {
        let mut out = Vec::new();
        for &sv in &self.spatial_variance {
            for &sl in &self.spatial_length {
                for &tv in &self.temporal_variance {
                    for &tl in &self.temporal_length {
                        for &nv in &self.noise_variance {
                            out.push(KernelParams::new(sv, sl, tv, tl, nv)?);
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::config("kernel grid has no candidates"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    #[serde(default)]
    pub matroids: Vec<MatroidEntry>,
    #[serde(default)]
    pub knapsacks: Vec<KnapsackEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatroidEntry {
    /// `I21`, `I22`, `I23`, `I31`, `I32` or `I33`.
    pub kind: String,
    pub limit: Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnapsackEntry {
    /// `X1` (per robot), `X2` (per time) or `X3` (per location).
    pub kind: String,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Limit {
    Symbol(Symbol),
    Scalar(u32),
    List(Vec<u32>),
    Matrix(Vec<Vec<u32>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symbol {
    Robots,
    ActiveTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub max_evaluations: u64,
    pub max_ground: usize,
    pub max_cardinality: usize,
    /// Prune subtrees by a provable upper bound. Does not change the optimum.
    #[serde(default = "enabled")]
    pub use_bounds: bool,
    /// Wall-clock cap in seconds. Makes results machine-dependent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_secs: Option<f64>,
}

impl OracleConfig {
    pub fn budget(&self) -> EnumerationBudget {
        EnumerationBudget {
            max_evaluations: self.max_evaluations,
            max_time: self.time_limit_secs.map(Duration::from_secs_f64),
            max_ground: self.max_ground,
            max_cardinality: self.max_cardinality,
            use_bounds: self.use_bounds,
        }
    }
}

fn enabled() -> bool {
    true
}

/// Problem dimensions drawn for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceParams {
    pub grid_p: usize,
    pub grid_q: usize,
    pub horizon: usize,
    pub active_times: usize,
    pub robots: usize,
}

impl InstanceParams {
    /// `L * R * P * Q`.
    pub fn problem_size(&self) -> usize {
        self.active_times * self.robots * self.grid_p * self.grid_q
    }

    pub fn ground_size(&self) -> usize {
        self.horizon * self.robots * self.grid_p * self.grid_q
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2019,
            trials: 100,
            eta: 0.1,
            output_dir: PathBuf::from("out"),
            ranges: Ranges {
                grid_p: [3, 5],
                grid_q: [3, 5],
                horizon: [4, 8],
                active_times: [2, 4],
                robots: [2, 4],
            },
            field: FieldConfig {
                width: 200.0,
                height: 200.0,
            },
            robots: RobotConfig {
                noise_variance: [0.01, 0.1],
                cost_weight: [0.0, 1.0],
                depot: Point2::ORIGIN,
            },
            training: TrainingConfig {
                samples: 40,
                noise_variance: 0.01,
            },
            kernel: KernelGrid {
                spatial_variance: vec![1.0, 4.0, 16.0],
                spatial_length: vec![30.0, 60.0, 120.0],
                temporal_variance: vec![1.0],
                temporal_length: vec![2.0, 5.0, 20.0],
                noise_variance: vec![0.01],
            },
            constraints: ConstraintConfig {
                matroids: vec![
                    MatroidEntry {
                        kind: "I21".into(),
                        limit: Limit::Symbol(Symbol::Robots),
                    },
                    MatroidEntry {
                        kind: "I23".into(),
                        limit: Limit::Symbol(Symbol::ActiveTimes),
                    },
                ],
                knapsacks: vec![KnapsackEntry {
                    kind: "X2".into(),
                    budget: DEFAULT_BUDGET,
                }],
            },
            oracle: OracleConfig {
                max_evaluations: 20_000_000,
                max_ground: 1000,
                max_cardinality: 16,
                use_bounds: true,
                time_limit_secs: None,
            },
            gmm: GmmConfig::default(),
        }
    }
}

/// Per-time knapsack budget. Not given by the source experiments; chosen so
/// that about half of the sampled instances are budget-bound.
pub const DEFAULT_BUDGET: f64 = 200.0;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        let r = &self.ranges;
        for (name, [lo, hi]) in [
            ("grid_p", r.grid_p),
            ("grid_q", r.grid_q),
            ("horizon", r.horizon),
            ("active_times", r.active_times),
            ("robots", r.robots),
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::config(format!("range {name} = [{lo}, {hi}] is empty or starts at 0")));
            }
        }
        if !(self.field.width > 0.0 && self.field.height > 0.0) {
            return Err(Error::config("field dimensions must be positive"));
        }
        let [nlo, nhi] = self.robots.noise_variance;
        if !(nlo > 0.0 && nlo <= nhi) {
            return Err(Error::config("robot noise variance range must be positive and ordered"));
        }
        let [wlo, whi] = self.robots.cost_weight;
        if !(wlo >= 0.0 && wlo < whi && whi <= 1.0) {
            return Err(Error::config("cost weight range must be an ordered sub-interval of (0, 1)"));
        }
        if !(self.training.noise_variance >= 0.0) {
            return Err(Error::config("training noise variance must be nonnegative"));
        }
        self.kernel.candidates()?;
        self.gmm.validate().map_err(|e| Error::config(e.to_string()))?;
        for m in &self.constraints.matroids {
            MatroidVariant::parse(&m.kind)
                .ok_or_else(|| Error::config(format!("unknown matroid kind {:?}", m.kind)))?;
        }
        for k in &self.constraints.knapsacks {
            KnapsackGroup::parse(&k.kind)
                .ok_or_else(|| Error::config(format!("unknown knapsack kind {:?}", k.kind)))?;
            if !(k.budget >= 0.0) {
                return Err(Error::config(format!("knapsack budget must be nonnegative, got {}", k.budget)));
            }
        }
        Ok(())
    }

    /// Resolves symbolic limits against one trial's dimensions.
    pub fn constraint_system(&self, inst: &InstanceParams) -> Result<ConstraintSystem> {
        let matroids = self
            .constraints
            .matroids
            .iter()
            .map(|m| resolve_matroid(m, inst))
            .collect::<Result<Vec<_>>>()?;
        let knapsacks = self
            .constraints
            .knapsacks
            .iter()
            .map(|k| {
                let group = KnapsackGroup::parse(&k.kind)
                    .ok_or_else(|| Error::config(format!("unknown knapsack kind {:?}", k.kind)))?;
                KnapsackSpec::new(group, k.budget)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstraintSystem::new(matroids, knapsacks))
    }
}

fn resolve_matroid(entry: &MatroidEntry, inst: &InstanceParams) -> Result<MatroidSpec> {
    let variant = MatroidVariant::parse(&entry.kind)
        .ok_or_else(|| Error::config(format!("unknown matroid kind {:?}", entry.kind)))?;
    let scalar = match &entry.limit {
        Limit::Symbol(Symbol::Robots) => Some(inst.robots as u32),
        Limit::Symbol(Symbol::ActiveTimes) => Some(inst.active_times as u32),
        Limit::Scalar(k) => Some(*k),
        _ => None,
    };
    let (t, r) = (inst.horizon, inst.robots);
    let bad = || Error::config(format!("limit {:?} does not fit matroid {}", entry.limit, variant));
    let per_time = || match (&entry.limit, scalar) {
        (_, Some(k)) => Ok(vec![k; t]),
        (Limit::List(v), _) => Ok(v.clone()),
        _ => Err(bad()),
    };
    let per_robot_time = || match (&entry.limit, scalar) {
        (_, Some(k)) => Ok(vec![vec![k; t]; r]),
        (Limit::Matrix(m), _) => Ok(m.clone()),
        _ => Err(bad()),
    };
    Ok(match variant {
        MatroidVariant::I21 => MatroidSpec::CountPerTime(per_time()?),
        MatroidVariant::I22 => MatroidSpec::StatusPerTime(per_time()?),
        MatroidVariant::I23 => MatroidSpec::ActiveTimes(scalar.ok_or_else(bad)?),
        MatroidVariant::I31 => MatroidSpec::CountPerRobotTime(per_robot_time()?),
        MatroidVariant::I32 => MatroidSpec::StatusPerRobotTime(per_robot_time()?),
        MatroidVariant::I33 => MatroidSpec::ActiveTimesPerRobot(match (&entry.limit, scalar) {
            (_, Some(k)) => vec![k; r],
            (Limit::List(v), _) => v.clone(),
            _ => return Err(bad()),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn symbols_resolve_per_instance() {
        let cfg = ExperimentConfig::default();
        let inst = InstanceParams {
            grid_p: 3,
            grid_q: 4,
            horizon: 5,
            active_times: 2,
            robots: 3,
        };
        let sys = cfg.constraint_system(&inst).unwrap();
        assert_eq!(sys.matroids[0], MatroidSpec::CountPerTime(vec![3; 5]));
        assert_eq!(sys.matroids[1], MatroidSpec::ActiveTimes(2));
        assert_eq!(sys.knapsacks[0].group, KnapsackGroup::PerTime);
        assert_eq!(inst.problem_size(), 72);
        assert_eq!(inst.ground_size(), 180);
    }

    #[test]
    fn limit_shapes() {
        let inst = InstanceParams {
            grid_p: 2,
            grid_q: 2,
            horizon: 2,
            active_times: 1,
            robots: 2,
        };
        let entry = |kind: &str, limit| MatroidEntry {
            kind: kind.into(),
            limit,
        };
        assert_eq!(
            resolve_matroid(&entry("I31", Limit::Scalar(1)), &inst).unwrap(),
            MatroidSpec::CountPerRobotTime(vec![vec![1, 1], vec![1, 1]])
        );
        assert_eq!(
            resolve_matroid(&entry("I33", Limit::List(vec![1, 2])), &inst).unwrap(),
            MatroidSpec::ActiveTimesPerRobot(vec![1, 2])
        );
        assert!(resolve_matroid(&entry("I23", Limit::List(vec![1])), &inst).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ExperimentConfig::default();
        cfg.eta = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default();
        cfg.constraints.matroids[0].kind = "I99".into();
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml("seed = 1").is_err());
        let text = ExperimentConfig::default().to_toml().unwrap().replace("trials = 100", "trials = 100\nbogus = 1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
