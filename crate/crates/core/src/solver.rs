//! Two-threshold greedy for mutual-information maximization under `p`
//! matroid and `l` knapsack constraints.
//!
//! The outer loop sweeps a gain-per-cost threshold `rho` geometrically from
//! `d / (p + l)` to `2 d |V| / (p + l)`, where `d` is the best singleton
//! value. For each `rho`, the inner loop lowers a gain threshold `tau` from
//! `M_rho` down to `eta M_rho / |V|` and greedily adds every element that
//! keeps the set independent, clears both thresholds, and fits the budgets.
//! When an element clears the thresholds but breaks a budget, the singleton
//! and the current prefix are kept as candidates and the next `rho` starts.
//! The best candidate seen is returned.
//!
//! Knapsack costs enter the density normalized by their budgets. Elements
//! that violate a constraint on their own are discarded up front.

use std::time::{Duration, Instant};

use log::warn;

use crate::constraints::ConstraintSystem;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::groundset::{DeploymentSet, GroundSet};
use crate::stgp::{InfoObjective, PosteriorCov, Probe};

/// Ground set, objective, and constraints of one planning problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub ground: GroundSet,
    pub objective: InfoObjective,
    pub constraints: ConstraintSystem,
}

impl ProblemInstance {
    pub fn new(ground: GroundSet, cov: &PosteriorCov, constraints: ConstraintSystem) -> Result<Self> {
        if cov.len() != ground.len() {
            return Err(Error::invalid(format!(
                "covariance order {} does not match ground set size {}",
                cov.len(),
                ground.len()
            )));
        }
        constraints.validate(&ground)?;
        Ok(ProblemInstance {
            objective: InfoObjective::new(cov)?,
            ground,
            constraints,
        })
    }

    pub fn value(&self, d: &DeploymentSet) -> f64 {
        self.objective.value(d)
    }

    pub fn is_feasible(&self, d: &DeploymentSet) -> bool {
        crate::constraints::feasible(&self.constraints, &self.ground, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eta: f64,
    /// Parallel evaluation of singletons and of independent `rho` iterations.
    pub execution: Execution,
}

impl SolverConfig {
    pub fn new(eta: f64) -> Result<Self> {
        validate_eta(eta)?;
        Ok(SolverConfig {
            eta,
            execution: Execution::Sequential,
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

fn validate_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("eta must lie in (0, 1], got {eta}")))
    }
}

/// Why a set entered the candidate pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    /// Final set of a completed `rho` iteration.
    Completed,
    /// Prefix recorded when a budget stopped the iteration.
    Prefix,
    /// The element that would have broken a budget, on its own.
    Singleton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub set: DeploymentSet,
    pub value: f64,
    pub kind: CandidateKind,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoTrace {
    pub rho: f64,
    /// Best qualifying singleton value; `None` when no element qualifies and
    /// the iteration is skipped.
    pub anchor: Option<f64>,
    /// Gain thresholds visited, in order.
    pub taus: Vec<f64>,
    pub candidate_values: Vec<f64>,
    pub budget_stop: bool,
    pub oracle_calls: u64,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub deployment: DeploymentSet,
    pub value: f64,
    pub pool: Vec<Candidate>,
    pub trace: Vec<RhoTrace>,
    pub elapsed: Duration,
    pub oracle_calls: u64,
    /// Set when the matroids admit solutions larger than `|V| / 2`, where MI
    /// may decrease.
    pub monotonicity_warning: bool,
}

/// Number of marginal-gain evaluations (singletons included) made by the run.
pub fn count_oracle_calls(result: &SolverResult) -> u64 {
    result.oracle_calls
}

/// `1 / ((1 + eta)(p + 2 l + 1))`.
pub fn optimality_bound(p: usize, l: usize, eta: f64) -> Result<f64> {
    validate_eta(eta)?;
    Ok(1.0 / ((1.0 + eta) * (p + 2 * l + 1) as f64))
}

/// `O((|V| / eta^2) log^2(|V| / eta))` envelope on oracle calls.
pub fn oracle_call_envelope(ground_size: usize, eta: f64) -> f64 {
    let n = ground_size as f64;
    let log = (n / eta).ln();
    n / (eta * eta) * log * log
}

pub fn threshold_greedy(instance: &ProblemInstance, cfg: &SolverConfig) -> Result<SolverResult> {
    validate_eta(cfg.eta)?;
    let start = Instant::now();
    let ground = &instance.ground;
    let obj = &instance.objective;
    let sys = &instance.constraints;
    let n = ground.len();

    let monotonicity_warning = 2 * sys.max_cardinality(ground) > n;
    if monotonicity_warning {
        warn!(
            "constraints admit solutions of size {} > |V|/2 = {}; mutual information may decrease",
            sys.max_cardinality(ground),
            n / 2
        );
    }
    if n == 0 {
        return Ok(SolverResult {
            deployment: DeploymentSet::empty(),
            value: 0.0,
            pool: Vec::new(),
            trace: Vec::new(),
            elapsed: start.elapsed(),
            oracle_calls: 0,
            monotonicity_warning,
        });
    }

    let singletons = cfg.execution.map_range(0..n, |e| obj.singleton(e));
    let costs: Vec<f64> = (0..n).map(|e| sys.total_normalized_cost(ground, e)).collect();
    for (e, v) in singletons.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::numerical("threshold greedy", format!("singleton value of element {e} is {v}")));
        }
    }
    // Elements that are infeasible on their own can never be selected.
    let usable: Vec<bool> = (0..n)
        .map(|e| crate::constraints::feasible(sys, ground, &DeploymentSet::from_indices([e])))
        .collect();
    let usable_count = usable.iter().filter(|&&u| u).count();
    let d = (0..n)
        .filter(|&e| usable[e])
        .map(|e| singletons[e])
        .fold(f64::NEG_INFINITY, f64::max);
    let rhos = if usable_count == 0 {
        Vec::new()
    } else {
        rho_schedule(d, sys.matroid_count() + sys.knapsack_count(), usable_count, cfg.eta)
    };

    let ctx = PassContext {
        instance,
        singletons: &singletons,
        costs: &costs,
        usable: &usable,
        usable_count,
        eta: cfg.eta,
    };
    let outcomes = cfg.execution.map(&rhos, |&rho| ctx.run(rho));

    let mut pool = Vec::new();
    let mut trace = Vec::with_capacity(outcomes.len());
    let mut oracle_calls = n as u64;
    for (candidates, t) in outcomes {
        oracle_calls += t.oracle_calls;
        pool.extend(candidates);
        trace.push(t);
    }
    let best = pool
        .iter()
        .fold(None::<&Candidate>, |best, c| match best {
            Some(b) if c.value <= b.value => Some(b),
            _ => Some(c),
        })
        .cloned();
    let (deployment, value) = best.map_or((DeploymentSet::empty(), 0.0), |c| (c.set, c.value));
    Ok(SolverResult {
        deployment,
        value,
        pool,
        trace,
        elapsed: start.elapsed(),
        oracle_calls,
        monotonicity_warning,
    })
}

/// Geometric `rho` sweep. When no singleton has positive value a single
/// pass at `rho = 0` is made.
fn rho_schedule(d: f64, constraint_count: usize, n: usize, eta: f64) -> Vec<f64> {
    if !(d > 0.0) {
        return vec![0.0];
    }
    let denom = constraint_count.max(1) as f64;
    let upper = 2.0 * d * n as f64 / denom;
    let mut rhos = Vec::new();
    let mut rho = d / denom;
    while rho <= upper {
        rhos.push(rho);
        rho *= 1.0 + eta;
    }
    rhos
}

fn density(gain: f64, cost: f64) -> f64 {
    if cost == 0.0 {
        f64::INFINITY
    } else {
        gain / cost
    }
}

struct PassContext<'a> {
    instance: &'a ProblemInstance,
    singletons: &'a [f64],
    costs: &'a [f64],
    usable: &'a [bool],
    usable_count: usize,
    eta: f64,
}

impl PassContext<'_> {
    fn run(&self, rho: f64) -> (Vec<Candidate>, RhoTrace) {
        let ground = &self.instance.ground;
        let obj = &self.instance.objective;
        let n = ground.len();
        let mut trace = RhoTrace {
            rho,
            anchor: None,
            taus: Vec::new(),
            candidate_values: Vec::new(),
            budget_stop: false,
            oracle_calls: 0,
        };
        let anchor = (0..n)
            .filter(|&e| self.usable[e] && density(self.singletons[e], self.costs[e]) >= rho)
            .map(|e| self.singletons[e])
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let Some(anchor) = anchor else {
            return (Vec::new(), trace);
        };
        trace.anchor = Some(anchor);

        let mut tracker = self.instance.constraints.tracker(ground);
        let mut sel = obj.selection();
        let mut in_set = vec![false; n];
        // Gains are valid until the selection changes.
        let mut cache: Vec<Option<Probe>> = vec![None; n];
        let mut candidates = Vec::new();
        let floor = self.eta / self.usable_count as f64 * anchor;
        let mut tau = anchor;

        loop {
            trace.taus.push(tau);
            for e in 0..n {
                if in_set[e] || !self.usable[e] || !tracker.matroids_allow(e) {
                    continue;
                }
                if cache[e].is_none() {
                    cache[e] = Some(obj.probe(&sel, e));
                    trace.oracle_calls += 1;
                }
                let gain = cache[e].as_ref().map_or(f64::NEG_INFINITY, |p| p.gain);
                if gain < tau || density(gain, self.costs[e]) < rho {
                    continue;
                }
                if tracker.budgets_allow(e) {
                    let probe = cache[e].take().expect("probe cached above");
                    sel.push(e, probe);
                    tracker.push(e);
                    in_set[e] = true;
                    cache.iter_mut().for_each(|c| *c = None);
                } else {
                    let single = DeploymentSet::from_indices([e]);
                    if self.instance.constraints.within_budgets(ground, &single) {
                        candidates.push(Candidate {
                            set: single,
                            value: self.singletons[e],
                            kind: CandidateKind::Singleton,
                            rho,
                        });
                    }
                    candidates.push(Candidate {
                        set: sel.to_deployment(),
                        value: sel.value(),
                        kind: CandidateKind::Prefix,
                        rho,
                    });
                    trace.budget_stop = true;
                    trace.candidate_values = candidates.iter().map(|c| c.value).collect();
                    return (candidates, trace);
                }
            }
            let next = tau / (1.0 + self.eta);
            if !(tau > 0.0) || next < floor {
                break;
            }
            tau = next;
        }
        candidates.push(Candidate {
            set: sel.to_deployment(),
            value: sel.value(),
            kind: CandidateKind::Completed,
            rho,
        });
        trace.candidate_values = candidates.iter().map(|c| c.value).collect();
        (candidates, trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{KnapsackGroup, KnapsackSpec, MatroidSpec};
    use crate::groundset::{build_ground_set, GridSpec, Point2, RobotSpec, TravelCost};
    use nalgebra::DMatrix;

    fn instance(p: usize, q: usize, r: usize, t: usize, sys: ConstraintSystem) -> ProblemInstance {
        let grid = GridSpec::new(p, q, 200.0, 200.0).unwrap();
        let robots: Vec<_> = (0..r)
            .map(|k| RobotSpec::new(0.05 + 0.05 * k as f64, 0.4 + 0.1 * k as f64, Point2::ORIGIN))
            .collect();
        let ground = build_ground_set(&grid, t, &robots, &TravelCost).unwrap();
        let params = crate::stgp::KernelParams::new(1.0, 60.0, 1.0, 2.0, 0.05).unwrap();
        let gp = crate::stgp::GpModel::fit(params, crate::stgp::TrainingSet::empty()).unwrap();
        let cov = crate::stgp::ground_covariance(&gp, &ground).unwrap();
        ProblemInstance::new(ground, &cov, sys).unwrap()
    }

    #[test]
    fn bound_values() {
        assert!((optimality_bound(2, 1, 0.1).unwrap() - 1.0 / 5.5).abs() < 1e-15);
        assert!((optimality_bound(1, 0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((optimality_bound(0, 0, 1e-12).unwrap() - 1.0).abs() < 1e-11);
        assert!(optimality_bound(1, 1, 0.0).is_err());
        assert!(optimality_bound(1, 1, 1.5).is_err());
    }

    #[test]
    fn zero_budget_returns_empty() {
        let sys = ConstraintSystem::new(
            vec![MatroidSpec::ActiveTimes(2)],
            vec![KnapsackSpec::new(KnapsackGroup::PerTime, 0.0).unwrap()],
        );
        let inst = instance(2, 2, 2, 3, sys);
        assert!(inst.ground.elements().iter().all(|e| e.cost > 0.0));
        let res = threshold_greedy(&inst, &SolverConfig::new(0.1).unwrap()).unwrap();
        assert!(res.deployment.is_empty());
        assert_eq!(res.value, 0.0);
    }

    #[test]
    fn unaffordable_elements_do_not_block() {
        // one cheap and one expensive location per time; the expensive one
        // is more informative but never fits the budget
        let grid = GridSpec::new(2, 1, 200.0, 10.0).unwrap();
        let ground = build_ground_set(&grid, 2, &[RobotSpec::new(0.1, 0.5, Point2::ORIGIN)], &TravelCost).unwrap();
        let costs: Vec<f64> = ground.elements().iter().map(|e| e.cost).collect();
        let budget = 0.5 * (costs[0] + costs[1]);
        assert!(costs[0] < budget && costs[1] > budget);
        let cov = DMatrix::from_fn(4, 4, |i, j| match (i, j) {
            _ if i == j => 5.0,
            (1, 3) | (3, 1) => 4.0,
            _ => 0.5,
        });
        let cov = PosteriorCov::from_matrix(cov).unwrap();
        let sys = ConstraintSystem::new(vec![], vec![KnapsackSpec::new(KnapsackGroup::PerTime, budget).unwrap()]);
        let inst = ProblemInstance::new(ground, &cov, sys).unwrap();
        assert!(inst.objective.singleton(1) > inst.objective.singleton(0));
        let res = threshold_greedy(&inst, &SolverConfig::new(0.1).unwrap()).unwrap();
        assert!(!res.deployment.is_empty());
        assert!(res.deployment.indices().iter().all(|e| e % 2 == 0));
        assert!(inst.is_feasible(&res.deployment));
    }

    #[test]
    fn single_element_ground_set() {
        let grid = GridSpec::new(1, 1, 10.0, 10.0).unwrap();
        let ground = build_ground_set(&grid, 1, &[RobotSpec::new(0.1, 0.5, Point2::ORIGIN)], &TravelCost).unwrap();
        let cov = PosteriorCov::from_matrix(DMatrix::from_element(1, 1, 1.1)).unwrap();
        let inst = ProblemInstance::new(ground, &cov, ConstraintSystem::default()).unwrap();
        let res = threshold_greedy(&inst, &SolverConfig::new(0.1).unwrap()).unwrap();
        assert_eq!(res.deployment.indices(), &[0]);
        assert_eq!(res.value, inst.objective.singleton(0));
        assert!(count_oracle_calls(&res) >= 1);
    }

    #[test]
    fn result_is_feasible_and_deterministic() {
        let sys = ConstraintSystem::new(
            vec![MatroidSpec::CountPerTime(vec![2; 4]), MatroidSpec::ActiveTimes(2)],
            vec![KnapsackSpec::new(KnapsackGroup::PerTime, 120.0).unwrap()],
        );
        let inst = instance(3, 3, 2, 4, sys);
        let cfg = SolverConfig::new(0.1).unwrap();
        let a = threshold_greedy(&inst, &cfg).unwrap();
        let b = threshold_greedy(&inst, &cfg.with_execution(Execution::Parallel)).unwrap();
        assert!(inst.is_feasible(&a.deployment));
        assert!(!a.deployment.is_empty());
        assert_eq!(a.deployment, b.deployment);
        assert_eq!(a.value, b.value);
        assert_eq!(a.oracle_calls, b.oracle_calls);
        assert!((a.value - inst.value(&a.deployment)).abs() < 1e-9);
        for c in &a.pool {
            assert!(inst.constraints.is_independent(&inst.ground, &c.set));
            assert!(inst.constraints.within_budgets(&inst.ground, &c.set));
            assert!(c.value <= a.value);
        }
    }

    #[test]
    fn warns_when_constraints_allow_large_sets() {
        let inst = instance(2, 1, 1, 2, ConstraintSystem::default());
        let res = threshold_greedy(&inst, &SolverConfig::new(0.5).unwrap()).unwrap();
        assert!(res.monotonicity_warning);
    }

    #[test]
    fn rho_schedule_is_geometric() {
        let rhos = rho_schedule(1.0, 3, 10, 0.1);
        assert!((rhos[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(*rhos.last().unwrap() <= 20.0 / 3.0);
        assert!(rhos.last().unwrap() * 1.1 > 20.0 / 3.0);
        assert_eq!(rho_schedule(0.0, 3, 10, 0.1), vec![0.0]);
    }
}
