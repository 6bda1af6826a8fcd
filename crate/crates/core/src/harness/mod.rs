//! Monte Carlo comparison of the threshold greedy against exhaustive
//! enumeration on randomly drawn instances.
//!
//! Trial `k` draws everything from `ChaCha8(seed + k)`, so a trial can be
//! rerun alone and trials can run in any order.

mod config;
mod output;
mod plot;

use std::time::Duration;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSystem;
use crate::envsim::generate_training_set;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::groundset::{build_ground_set, GridSpec, RobotSpec, TravelCost};
use crate::oracle::{enumerate_optimal, optimality_ratio, OracleError, OracleResult};
use crate::solver::{optimality_bound, threshold_greedy, ProblemInstance, SolverConfig, SolverResult};
use crate::stgp::{fit_hyperparameters, ground_covariance, GpModel, KernelParams};

pub use config::{
    ConstraintConfig, ExperimentConfig, FieldConfig, InstanceParams, KernelGrid, KnapsackEntry, Limit,
    MatroidEntry, OracleConfig, Ranges, RobotConfig, Symbol, TrainingConfig, DEFAULT_BUDGET, OUTPUT_DIR_ENV,
};
pub use output::{
    emit_outputs, read_trials, write_run_summary, write_schedule, write_summary, write_trials, Manifest,
};
pub use plot::{plot_ratio, plot_utility};

pub fn trial_rng(cfg: &ExperimentConfig, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial))
}

/// One sampled planning problem and the model it was built from.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub trial: u64,
    pub params: InstanceParams,
    pub kernel: KernelParams,
    pub model: GpModel,
    pub problem: ProblemInstance,
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [usize; 2]) -> usize {
    rng.random_range(lo..=hi)
}

/// Uniform draw from the open interval `(lo, hi)`.
fn draw_open(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let x = rng.random_range(lo..hi);
        if x > lo {
            return x;
        }
    }
}

/// Draws dimensions, robots, training data, and hyperparameters for `trial`.
pub fn build_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialInstance> {
    let mut rng = trial_rng(cfg, trial);
    let r = &cfg.ranges;
    let params = InstanceParams {
        grid_p: draw(&mut rng, r.grid_p),
        grid_q: draw(&mut rng, r.grid_q),
        horizon: draw(&mut rng, r.horizon),
        active_times: draw(&mut rng, r.active_times),
        robots: draw(&mut rng, r.robots),
    };
    let [nlo, nhi] = cfg.robots.noise_variance;
    let [wlo, whi] = cfg.robots.cost_weight;
    let robots: Vec<RobotSpec> = (0..params.robots)
        .map(|_| {
            let noise = if nhi > nlo { rng.random_range(nlo..=nhi) } else { nlo };
            RobotSpec::new(noise, draw_open(&mut rng, wlo, whi), cfg.robots.depot)
        })
        .collect();
    let grid = GridSpec::new(params.grid_p, params.grid_q, cfg.field.width, cfg.field.height)?;
    let ground = build_ground_set(&grid, params.horizon, &robots, &TravelCost)?;

    let probes: Vec<[f64; 3]> = (0..cfg.training.samples)
        .map(|_| {
            [
                rng.random_range(0.0..cfg.field.width),
                rng.random_range(0.0..cfg.field.height),
                rng.random_range(0.0..=params.horizon as f64),
            ]
        })
        .collect();
    let training = generate_training_set(&cfg.gmm, &grid, &probes, cfg.training.noise_variance, &mut rng)?;
    let candidates = cfg.kernel.candidates()?;
    let kernel = if candidates.len() == 1 {
        candidates[0]
    } else {
        fit_hyperparameters(&training, &candidates)?
    };
    let model = GpModel::fit(kernel, training)?;
    let cov = ground_covariance(&model, &ground)?;
    let constraints = cfg.constraint_system(&params)?;
    let problem = ProblemInstance::new(ground, &cov, constraints)?;
    Ok(TrialInstance {
        trial,
        params,
        kernel,
        model,
        problem,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleStatus {
    Complete,
    BudgetExceeded,
    Refused,
}

/// Deterministic outcome of one trial. Column order of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub horizon: usize,
    pub active_times: usize,
    pub robots: usize,
    pub grid_p: usize,
    pub grid_q: usize,
    pub problem_size: usize,
    pub ground_size: usize,
    pub greedy_mi: f64,
    pub greedy_size: usize,
    pub optimal_mi: Option<f64>,
    pub optimal_size: Option<usize>,
    pub ratio: Option<f64>,
    pub oracle_status: OracleStatus,
    pub oracle_calls: u64,
    pub visited: u64,
    pub evaluations: u64,
    /// Whether the greedy run without knapsacks would break a budget.
    pub budget_binding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub trial: u64,
    pub greedy_seconds: f64,
    pub oracle_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub timing: TrialTiming,
    pub greedy: SolverResult,
    pub oracle: Option<OracleResult>,
}

/// Greedy and oracle on one instance. Inner loops use `execution`.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64, execution: Execution) -> Result<TrialOutcome> {
    let inst = build_trial(cfg, trial)?;
    solve_trial(cfg, &inst, execution)
}

pub fn solve_trial(cfg: &ExperimentConfig, inst: &TrialInstance, execution: Execution) -> Result<TrialOutcome> {
    let solver = SolverConfig::new(cfg.eta)?.with_execution(execution);
    let problem = &inst.problem;
    let greedy = threshold_greedy(problem, &solver)?;

    let relaxed = ProblemInstance {
        constraints: ConstraintSystem::new(problem.constraints.matroids.clone(), Vec::new()),
        ..problem.clone()
    };
    let budget_binding = !problem.constraints.knapsacks.is_empty() && {
        let free = threshold_greedy(&relaxed, &solver)?;
        !problem.constraints.within_budgets(&problem.ground, &free.deployment)
    };

    let (status, oracle, work, oracle_time) = match enumerate_optimal(problem, &cfg.oracle.budget(), execution) {
        Ok(res) => (OracleStatus::Complete, Some(res.clone()), (res.visited, res.evaluations), res.elapsed),
        Err(OracleError::BudgetExceeded { best_so_far, reason }) => {
            log::info!("trial {}: oracle stopped ({reason})", inst.trial);
            let work = (best_so_far.visited, best_so_far.evaluations);
            (OracleStatus::BudgetExceeded, None, work, best_so_far.elapsed)
        }
        Err(OracleError::Refused(reason)) => {
            log::info!("trial {}: oracle refused ({reason})", inst.trial);
            (OracleStatus::Refused, None, (0, 0), Duration::ZERO)
        }
    };
    let ratio = oracle
        .as_ref()
        .map(|o| optimality_ratio(greedy.value, o.value))
        .transpose()?;
    let p = &inst.params;
    let record = TrialRecord {
        trial: inst.trial,
        horizon: p.horizon,
        active_times: p.active_times,
        robots: p.robots,
        grid_p: p.grid_p,
        grid_q: p.grid_q,
        problem_size: p.problem_size(),
        ground_size: problem.ground.len(),
        greedy_mi: greedy.value,
        greedy_size: greedy.deployment.len(),
        optimal_mi: oracle.as_ref().map(|o| o.value),
        optimal_size: oracle.as_ref().map(|o| o.optimal.len()),
        ratio,
        oracle_status: status,
        oracle_calls: greedy.oracle_calls,
        visited: work.0,
        evaluations: work.1,
        budget_binding,
    };
    let timing = TrialTiming {
        trial: inst.trial,
        greedy_seconds: greedy.elapsed.as_secs_f64(),
        oracle_seconds: oracle_time.as_secs_f64(),
    };
    Ok(TrialOutcome {
        record,
        timing,
        greedy,
        oracle,
    })
}

/// Mean greedy MI and ratio statistics for one problem size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem_size: usize,
    pub trials: usize,
    pub mean_greedy_mi: f64,
    pub completed: usize,
    pub mean_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub records: Vec<TrialRecord>,
    pub timings: Vec<TrialTiming>,
    pub failures: Vec<TrialFailure>,
    pub summary: Vec<SummaryRow>,
    /// Theoretical lower bound on every completed ratio.
    pub bound: f64,
}

impl MonteCarlo {
    pub fn completed(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| r.oracle_status == OracleStatus::Complete)
    }

    pub fn bound_violations(&self) -> Vec<&TrialRecord> {
        self.completed()
            .filter(|r| r.ratio.is_some_and(|x| x < self.bound))
            .collect()
    }
}

pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut sizes: Vec<usize> = records.iter().map(|r| r.problem_size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|size| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.problem_size == size).collect();
            let ratios: Vec<f64> = group.iter().filter_map(|r| r.ratio).collect();
            SummaryRow {
                problem_size: size,
                trials: group.len(),
                mean_greedy_mi: group.iter().map(|r| r.greedy_mi).sum::<f64>() / group.len() as f64,
                completed: ratios.len(),
                mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
                min_ratio: ratios.iter().copied().reduce(f64::min),
            }
        })
        .collect()
}

/// Runs trials `0..cfg.trials`, one per worker when `execution` is parallel.
/// Failed trials are collected rather than aborting the sweep.
pub fn run_monte_carlo(cfg: &ExperimentConfig, execution: Execution) -> Result<MonteCarlo> {
    cfg.validate()?;
    run_trials(cfg, 0..cfg.trials, execution)
}

pub fn run_trials(cfg: &ExperimentConfig, trials: std::ops::Range<u64>, execution: Execution) -> Result<MonteCarlo> {
    let bound = optimality_bound(cfg.constraints.matroids.len(), cfg.constraints.knapsacks.len(), cfg.eta)?;
    let ids: Vec<u64> = trials.collect();
    let outcomes = execution.map(&ids, |&k| (k, run_trial(cfg, k, Execution::Sequential)));
    let mut records = Vec::new();
    let mut timings = Vec::new();
    let mut failures = Vec::new();
    for (trial, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                records.push(o.record);
                timings.push(o.timing);
            }
            Err(e) => failures.push(TrialFailure {
                trial,
                error: e.to_string(),
            }),
        }
    }
    let summary = summarize(&records);
    Ok(MonteCarlo {
        records,
        timings,
        failures,
        summary,
        bound,
    })
}

/// Runs the greedy on one trial's instance.
pub fn solve_one(cfg: &ExperimentConfig, trial: u64, execution: Execution) -> Result<(TrialInstance, SolverResult)> {
    let inst = build_trial(cfg, trial)?;
    let solver = SolverConfig::new(cfg.eta)?.with_execution(execution);
    let result = threshold_greedy(&inst.problem, &solver)?;
    Ok((inst, result))
}

/// Exhaustive optimum of one trial's instance.
pub fn oracle_one(cfg: &ExperimentConfig, trial: u64, execution: Execution) -> Result<(TrialInstance, OracleResult)> {
    let inst = build_trial(cfg, trial)?;
    let res = enumerate_optimal(&inst.problem, &cfg.oracle.budget(), execution).map_err(Error::from)?;
    Ok((inst, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.ranges = Ranges {
            grid_p: [2, 2],
            grid_q: [2, 2],
            horizon: [3, 3],
            active_times: [2, 2],
            robots: [1, 2],
        };
        cfg.trials = 4;
        cfg.training.samples = 15;
        cfg
    }

    #[test]
    fn trials_are_deterministic() {
        let cfg = tiny();
        let a = run_trial(&cfg, 1, Execution::Sequential).unwrap().record;
        let b = run_trial(&cfg, 1, Execution::Parallel).unwrap().record;
        assert_eq!(a, b);
        assert_eq!(a.oracle_status, OracleStatus::Complete);
    }

    #[test]
    fn monte_carlo_records_are_sorted_and_bounded() {
        let cfg = tiny();
        let mc = run_monte_carlo(&cfg, Execution::Parallel).unwrap();
        assert!(mc.failures.is_empty());
        let ids: Vec<u64> = mc.records.iter().map(|r| r.trial).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        assert!(mc.bound_violations().is_empty());
        for r in &mc.records {
            let ratio = r.ratio.unwrap();
            assert!(ratio >= mc.bound && ratio <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn zero_trials() {
        let mut cfg = tiny();
        cfg.trials = 0;
        let mc = run_monte_carlo(&cfg, Execution::Sequential).unwrap();
        assert!(mc.records.is_empty() && mc.summary.is_empty());
    }

    #[test]
    fn summary_groups_by_size() {
        let rec = |trial, size, mi, ratio: Option<f64>| TrialRecord {
            trial,
            horizon: 4,
            active_times: 2,
            robots: 2,
            grid_p: 3,
            grid_q: 3,
            problem_size: size,
            ground_size: 72,
            greedy_mi: mi,
            greedy_size: 2,
            optimal_mi: ratio.map(|r| mi / r),
            optimal_size: ratio.map(|_| 2),
            ratio,
            oracle_status: if ratio.is_some() {
                OracleStatus::Complete
            } else {
                OracleStatus::BudgetExceeded
            },
            oracle_calls: 10,
            visited: 5,
            evaluations: 50,
            budget_binding: false,
        };
        let records = vec![
            rec(0, 36, 1.0, Some(0.9)),
            rec(1, 36, 2.0, None),
            rec(2, 48, 3.0, Some(1.0)),
            rec(3, 36, 4.5, Some(0.5)),
        ];
        let s = summarize(&records);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].problem_size, 36);
        assert_eq!(s[0].trials, 3);
        assert!((s[0].mean_greedy_mi - 2.5).abs() < 1e-12);
        assert_eq!(s[0].completed, 2);
        assert!((s[0].mean_ratio.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(s[0].min_ratio, Some(0.5));
        assert_eq!(s[1].trials, 1);
    }
}
