//! Exact optimum by depth-first enumeration of feasible deployment sets.
//!
//! Sets are grown in increasing index order. Feasibility is downward closed,
//! so an infeasible extension is never expanded. Each node adds one element
//! and updates M incrementally from its parent. Optionally, subtrees that
//! provably cannot beat the incumbent are skipped.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use thiserror::Error;

use crate::constraints::{FeasibilityTracker, KnapsackGroup, MatroidSpec};
use crate::exec::Execution;
use crate::groundset::DeploymentSet;
use crate::solver::ProblemInstance;
use crate::stgp::{Probe, Selection};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationBudget {
    /// Maximum number of marginal-gain evaluations, the unit of work.
    pub max_evaluations: u64,
    /// Wall-clock limit. `None` keeps the outcome independent of machine speed.
    pub max_time: Option<Duration>,
    pub max_ground: usize,
    /// Refuse when the matroids admit larger solutions than this.
    pub max_cardinality: usize,
    /// Skip subtrees whose provable upper bound is below the incumbent.
    /// The optimum is unchanged; only the work done differs.
    pub use_bounds: bool,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_evaluations: 50_000_000,
            max_time: None,
            max_ground: 200,
            max_cardinality: 16,
            use_bounds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub optimal: DeploymentSet,
    pub value: f64,
    /// Feasible non-empty sets visited.
    pub visited: u64,
    /// Marginal-gain evaluations performed.
    pub evaluations: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance refused: {0}")]
    Refused(String),
    /// Enumeration stopped early; `best_so_far` is NOT known to be optimal.
    #[error("enumeration budget exceeded after {} evaluations ({reason})", best_so_far.evaluations)]
    BudgetExceeded {
        reason: String,
        best_so_far: OracleResult,
    },
}

impl From<OracleError> for crate::Error {
    fn from(e: OracleError) -> Self {
        crate::Error::InvalidInput(e.to_string())
    }
}

struct Shared<'a> {
    instance: &'a ProblemInstance,
    budget: EnumerationBudget,
    max_depth: usize,
    lower_bound: f64,
    start: Instant,
    visited: AtomicU64,
    evaluations: AtomicU64,
    stop: AtomicBool,
    stop_reason: std::sync::Mutex<Option<String>>,
}

impl Shared<'_> {
    /// Counts one visited set. Returns false once the search must stop.
    fn tick(&self) -> bool {
        let count = self.visited.fetch_add(1, Ordering::Relaxed) + 1;
        if count % 4096 == 0 {
            if let Some(limit) = self.budget.max_time {
                if self.start.elapsed() > limit {
                    self.halt(format!("time limit {limit:?}"));
                }
            }
        }
        !self.stop.load(Ordering::Relaxed)
    }

    fn charge(&self, evaluations: u64) {
        let total = self.evaluations.fetch_add(evaluations, Ordering::Relaxed) + evaluations;
        if total > self.budget.max_evaluations {
            self.halt(format!("more than {} evaluations", self.budget.max_evaluations));
        }
    }

    fn halt(&self, reason: String) {
        if !self.stop.swap(true, Ordering::Relaxed) {
            *self.stop_reason.lock().expect("poisoned") = Some(reason);
        }
    }
}

struct Subtree {
    best: Option<(Vec<usize>, f64)>,
}

impl Subtree {
    fn best_value(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1)
    }
}

/// Children of one node with an upper bound on each child's subtree,
/// stored in reverse index order so `pop` yields the smallest index first.
struct Frame {
    children: Vec<(usize, Probe, f64)>,
}

impl Shared<'_> {
    fn incumbent(&self, out: &Subtree) -> f64 {
        let v = self.lower_bound.max(out.best_value());
        v - 1e-9 * (1.0 + v.abs())
    }

    fn frame(&self, sel: &Selection, tracker: &FeasibilityTracker<'_>, start: usize, out: &Subtree) -> Frame {
        let inst = self.instance;
        if sel.len() >= self.max_depth {
            return Frame { children: Vec::new() };
        }
        let probes: Vec<(usize, Probe)> = (start..inst.ground.len())
            .filter(|&e| tracker.allows(e))
            .map(|e| (e, inst.objective.probe(sel, e)))
            .collect();
        self.charge(probes.len() as u64);
        let mut children: Vec<(usize, Probe, f64)> = if self.budget.use_bounds && !probes.is_empty() {
            let slots = self.max_depth - sel.len();
            let (node_ub, child_ub) = subtree_bounds(inst, sel.members(), sel.value(), &probes, slots);
            let floor = self.incumbent(out);
            if node_ub < floor {
                Vec::new()
            } else {
                probes
                    .into_iter()
                    .zip(child_ub)
                    .filter(|(_, ub)| *ub >= floor)
                    .map(|((e, p), ub)| (e, p, ub))
                    .collect()
            }
        } else {
            probes.into_iter().map(|(e, p)| (e, p, f64::INFINITY)).collect()
        };
        children.reverse();
        Frame { children }
    }
}

/// Largest `k` values pushed so far and their sum.
struct TopK {
    k: usize,
    items: Vec<f64>,
    sum: f64,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            items: Vec::new(),
            sum: 0.0,
        }
    }

    fn push(&mut self, v: f64) {
        if self.k == 0 {
            return;
        }
        // ascending, smallest first
        let pos = self.items.partition_point(|&x| x < v);
        if self.items.len() < self.k {
            self.items.insert(pos, v);
            self.sum += v;
        } else if pos > 0 {
            self.sum += v - self.items[0];
            self.items.remove(0);
            self.items.insert(pos - 1, v);
        }
    }
}

fn top_sum(sorted_desc: &[f64], k: usize) -> f64 {
    sorted_desc.iter().take(k).sum()
}

/// Upper bounds on `M` over the subtree of the current node and over the
/// subtree of each child.
///
/// Hadamard's inequality applied to the conditional covariance of `E` given
/// `D`, and to the Schur complement of the precision, gives
/// `M(D + E) <= M(D) + sum of gain(e | D)` for any `E`, with no
/// submodularity assumption. The sum is then maximized over a relaxation of
/// the constraints: a size limit, per-time count limits, the active-time
/// limit, and per-time budgets (fractionally, node level only).
///
/// The ground set is t-major, so the elements that may follow child `c` are
/// the rest of `c`'s time slice plus every later slice.
fn subtree_bounds(
    inst: &ProblemInstance,
    members: &[usize],
    value: f64,
    children: &[(usize, Probe)],
    slots: usize,
) -> (f64, Vec<f64>) {
    let ground = &inst.ground;
    let horizon = ground.horizon();
    let mut count = vec![0u32; horizon];
    let mut spent = vec![0.0; horizon];
    for &m in members {
        let e = ground.get(m);
        count[e.time] += 1;
        spent[e.time] += e.cost;
    }
    let active: Vec<bool> = count.iter().map(|&c| c > 0).collect();
    let mut cap = vec![usize::MAX; horizon];
    let mut active_left = usize::MAX;
    for m in &inst.constraints.matroids {
        match m {
            MatroidSpec::CountPerTime(l) => {
                for t in 0..horizon {
                    cap[t] = cap[t].min(l[t].saturating_sub(count[t]) as usize);
                }
            }
            MatroidSpec::ActiveTimes(l) => {
                let used = active.iter().filter(|&&a| a).count();
                active_left = active_left.min((*l as usize).saturating_sub(used));
            }
            _ => {}
        }
    }
    let budgets: Vec<f64> = inst
        .constraints
        .knapsacks
        .iter()
        .filter(|k| k.group == KnapsackGroup::PerTime)
        .map(|k| k.budget)
        .collect();

    // Best gain sum achievable inside each time slice.
    let mut per_time: Vec<Vec<(f64, f64)>> = vec![Vec::new(); horizon];
    for (e, probe) in children {
        if probe.gain > 0.0 {
            let el = ground.get(*e);
            per_time[el.time].push((probe.gain, el.cost));
        }
    }
    let slice_bound: Vec<f64> = (0..horizon)
        .map(|t| {
            let items = &mut per_time[t];
            if items.is_empty() {
                return 0.0;
            }
            items.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
            let mut bound: f64 = items.iter().take(cap[t]).map(|i| i.0).sum();
            for &b in &budgets {
                bound = bound.min(fractional_knapsack(items, (b - spent[t]).max(0.0)));
            }
            bound
        })
        .collect();

    let mut gains: Vec<f64> = children.iter().map(|c| c.1.gain).filter(|&g| g > 0.0).collect();
    gains.sort_unstable_by(|a, b| b.total_cmp(a));
    let generic = top_sum(&gains, slots);
    let open: f64 = (0..horizon).filter(|&t| active[t]).map(|t| slice_bound[t]).sum();
    let mut fresh: Vec<f64> = (0..horizon).filter(|&t| !active[t]).map(|t| slice_bound[t]).collect();
    fresh.sort_unstable_by(|a, b| b.total_cmp(a));
    let node = value + generic.min(open + top_sum(&fresh, active_left));

    let mut ub = vec![0.0; children.len()];
    let mut after = TopK::new(slots.saturating_sub(1));
    let mut same = TopK::new(0);
    let mut open_later = 0.0;
    let mut fresh_later: Vec<f64> = Vec::new();
    let mut current: Option<usize> = None;
    for (i, (e, probe)) in children.iter().enumerate().rev() {
        let t = ground.get(*e).time;
        if current != Some(t) {
            if let Some(prev) = current {
                if active[prev] {
                    open_later += slice_bound[prev];
                } else {
                    let pos = fresh_later.partition_point(|&x| x > slice_bound[prev]);
                    fresh_later.insert(pos, slice_bound[prev]);
                }
            }
            same = TopK::new(cap[t].saturating_sub(1));
            current = Some(t);
        }
        let g = probe.gain;
        let fresh_slots = if active[t] {
            active_left
        } else {
            active_left.saturating_sub(1)
        };
        let structured = same.sum + open_later + top_sum(&fresh_later, fresh_slots);
        ub[i] = value + g + structured.min(after.sum);
        if g > 0.0 {
            after.push(g);
            same.push(g);
        }
    }
    (node, ub)
}

/// Fractional knapsack optimum over `(value, weight)` items.
fn fractional_knapsack(items: &[(f64, f64)], capacity: f64) -> f64 {
    let mut order: Vec<(f64, f64)> = items.to_vec();
    let density = |(v, w): (f64, f64)| if w > 0.0 { v / w } else { f64::INFINITY };
    order.sort_unstable_by(|a, b| density(*b).total_cmp(&density(*a)));
    let mut room = capacity * (1.0 + 1e-12) + 1e-12;
    let mut total = 0.0;
    for (v, w) in order {
        if w <= room {
            total += v;
            room -= w;
        } else {
            total += v * room / w;
            break;
        }
    }
    total
}

/// Explores every feasible set whose smallest element is `root`.
fn explore(shared: &Shared<'_>, root: usize) -> Subtree {
    let inst = shared.instance;
    let obj = &inst.objective;
    let mut tracker = inst.constraints.tracker(&inst.ground);
    let mut sel = obj.selection();
    let mut out = Subtree { best: None };
    if !tracker.allows(root) || !shared.tick() {
        return out;
    }
    let probe = obj.probe(&sel, root);
    shared.charge(1);
    sel.push(root, probe);
    tracker.push(root);
    consider(&mut out, &sel);

    let mut stack = vec![shared.frame(&sel, &tracker, root + 1, &out)];
    while let Some(frame) = stack.last_mut() {
        if shared.stop.load(Ordering::Relaxed) {
            break;
        }
        match frame.children.pop() {
            Some((e, probe, ub)) => {
                if ub < shared.incumbent(&out) {
                    continue;
                }
                if !shared.tick() {
                    break;
                }
                sel.push(e, probe);
                tracker.push(e);
                consider(&mut out, &sel);
                stack.push(shared.frame(&sel, &tracker, e + 1, &out));
            }
            None => {
                stack.pop();
                sel.pop();
                tracker.pop();
            }
        }
    }
    out
}

fn consider(out: &mut Subtree, sel: &Selection) {
    let v = sel.value();
    if out.best.as_ref().map_or(true, |(_, b)| v > *b) {
        out.best = Some((sel.members().to_vec(), v));
    }
}

/// Value of a plain feasible greedy, used as a starting incumbent.
fn incumbent(instance: &ProblemInstance) -> f64 {
    let obj = &instance.objective;
    let mut tracker = instance.constraints.tracker(&instance.ground);
    let mut sel = obj.selection();
    loop {
        let best = (0..instance.ground.len())
            .filter(|&e| !sel.members().contains(&e) && tracker.allows(e))
            .map(|e| (e, obj.probe(&sel, e)))
            .filter(|(_, p)| p.gain > 0.0)
            .fold(None::<(usize, Probe)>, |best, cand| match best {
                Some(b) if b.1.gain >= cand.1.gain => Some(b),
                _ => Some(cand),
            });
        match best {
            Some((e, probe)) => {
                sel.push(e, probe);
                tracker.push(e);
            }
            None => return sel.value(),
        }
    }
}

/// Exact argmax of M over all feasible sets, ties broken by enumeration
/// order. The result does not depend on `execution`.
pub fn enumerate_optimal(
    instance: &ProblemInstance,
    budget: &EnumerationBudget,
    execution: Execution,
) -> Result<OracleResult, OracleError> {
    let start = Instant::now();
    let n = instance.ground.len();
    if n > budget.max_ground {
        return Err(OracleError::Refused(format!(
            "ground set size {n} exceeds cap {}",
            budget.max_ground
        )));
    }
    let max_depth = instance.constraints.max_cardinality(&instance.ground);
    if max_depth > budget.max_cardinality {
        return Err(OracleError::Refused(format!(
            "constraints admit solutions of size {max_depth}, cap is {}",
            budget.max_cardinality
        )));
    }
    let shared = Shared {
        instance,
        budget: *budget,
        max_depth,
        lower_bound: if budget.use_bounds && max_depth > 0 {
            incumbent(instance)
        } else {
            f64::NEG_INFINITY
        },
        start,
        visited: AtomicU64::new(0),
        evaluations: AtomicU64::new(0),
        stop: AtomicBool::new(false),
        stop_reason: std::sync::Mutex::new(None),
    };
    let subtrees = if max_depth == 0 {
        Vec::new()
    } else {
        execution.map_range(0..n, |root| explore(&shared, root))
    };

    let mut optimal = DeploymentSet::empty();
    let mut value = 0.0;
    for sub in subtrees {
        if let Some((members, v)) = sub.best {
            if v > value {
                value = v;
                optimal = DeploymentSet::from_indices(members);
            }
        }
    }
    let result = OracleResult {
        optimal,
        value,
        visited: shared.visited.load(Ordering::Relaxed),
        evaluations: shared.evaluations.load(Ordering::Relaxed),
        elapsed: start.elapsed(),
    };
    if shared.stop.load(Ordering::Relaxed) {
        let reason = shared
            .stop_reason
            .lock()
            .expect("poisoned")
            .take()
            .unwrap_or_default();
        return Err(OracleError::BudgetExceeded {
            reason,
            best_so_far: result,
        });
    }
    Ok(result)
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `sum_{l=1..L} C(T, l) * C(R (N + 1), R)^l`: the number of deployment
/// patterns with at most `L` active times, each active time assigning every
/// robot to one of `N` locations or to "not deployed".
pub fn count_combinations(horizon: u64, active_limit: u64, robots: u64, locations: u64) -> BigUint {
    let per_time = binomial(robots * (locations + 1), robots);
    (1..=active_limit)
        .map(|l| binomial(horizon, l) * per_time.pow(l as u32))
        .sum()
}

/// `M(D_greedy) / M(D*)`, clamped to `[0, 1 + 1e-9]`. Both zero gives 1.
pub fn optimality_ratio(greedy_value: f64, optimal_value: f64) -> crate::Result<f64> {
    const EPS: f64 = 1e-9;
    if optimal_value.abs() <= 1e-12 {
        return if greedy_value.abs() <= 1e-12 {
            Ok(1.0)
        } else {
            Err(crate::Error::invalid(format!(
                "optimum is zero but greedy value is {greedy_value}"
            )))
        };
    }
    Ok((greedy_value / optimal_value).clamp(0.0, 1.0 + EPS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_formula_values() {
        assert_eq!(count_combinations(4, 2, 2, 9), BigUint::from(217_360u32));
        assert_eq!(count_combinations(4, 0, 2, 9), BigUint::from(0u32));
        assert_eq!(count_combinations(1, 1, 1, 1), BigUint::from(2u32));
    }

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial(20, 2), BigUint::from(190u32));
        assert_eq!(binomial(5, 0), BigUint::from(1u32));
        assert_eq!(binomial(3, 4), BigUint::from(0u32));
    }

    #[test]
    fn bounds_do_not_change_the_optimum() {
        use crate::harness::{build_trial, ExperimentConfig, Ranges};
        let mut cfg = ExperimentConfig::default();
        cfg.ranges = Ranges {
            grid_p: [2, 3],
            grid_q: [2, 2],
            horizon: [3, 4],
            active_times: [1, 3],
            robots: [1, 2],
        };
        cfg.training.samples = 12;
        for (trial, budget) in [60.0, 100.0, 180.0, 400.0].into_iter().cycle().take(12).enumerate() {
            cfg.constraints.knapsacks[0].budget = budget;
            let inst = build_trial(&cfg, trial as u64).unwrap().problem;
            let plain = EnumerationBudget {
                use_bounds: false,
                ..EnumerationBudget::default()
            };
            let a = enumerate_optimal(&inst, &plain, Execution::Sequential).unwrap();
            let b = enumerate_optimal(&inst, &EnumerationBudget::default(), Execution::Sequential).unwrap();
            let c = enumerate_optimal(&inst, &EnumerationBudget::default(), Execution::Parallel).unwrap();
            assert_eq!(a.optimal, b.optimal, "trial {trial}");
            assert_eq!(a.value, b.value);
            assert_eq!(b.optimal, c.optimal);
            assert_eq!((b.visited, b.evaluations), (c.visited, c.evaluations));
            assert!(b.visited <= a.visited);
        }
    }

    #[test]
    fn top_k_tracks_largest() {
        let mut t = TopK::new(3);
        for v in [1.0, 5.0, 2.0, 4.0, 0.5, 3.0] {
            t.push(v);
        }
        assert_eq!(t.items, vec![3.0, 4.0, 5.0]);
        assert_eq!(t.sum, 12.0);
        let mut z = TopK::new(0);
        z.push(1.0);
        assert_eq!(z.sum, 0.0);
    }

    #[test]
    fn fractional_knapsack_values() {
        let items = [(6.0, 1.0), (10.0, 2.0), (12.0, 3.0)];
        assert!((fractional_knapsack(&items, 5.0) - 24.0).abs() < 1e-9);
        assert!((fractional_knapsack(&items, 0.0)).abs() < 1e-9);
        assert!((fractional_knapsack(&[(1.0, 0.0)], 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_edges() {
        assert_eq!(optimality_ratio(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(optimality_ratio(2.0, 2.0).unwrap(), 1.0);
        assert!(optimality_ratio(1.0, 0.0).is_err());
        assert_eq!(optimality_ratio(1.0 + 1e-6, 1.0).unwrap(), 1.0 + 1e-9);
    }
}
