//! Matroid and knapsack constraint families over the deployment ground set,
//! their intersection, an incremental feasibility tracker, and an exhaustive
//! matroid-axiom verifier.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::groundset::{DeploymentSet, GroundSet};

/// Matroid constraint variants. Limit vectors are indexed by zero-based time
/// and robot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatroidSpec {
    /// At most `L(t)` elements in each time slice.
    CountPerTime(Vec<u32>),
    /// Deployment status per time: `L(t) = 0` forbids time `t`.
    StatusPerTime(Vec<u32>),
    /// At most `L` time slices with a deployment.
    ActiveTimes(u32),
    /// At most `L_r(t)` elements of robot `r` at time `t`; indexed `[r][t]`.
    CountPerRobotTime(Vec<Vec<u32>>),
    /// Deployment status per robot and time; `L_r(t) = 0` forbids it.
    StatusPerRobotTime(Vec<Vec<u32>>),
    /// At most `L_r` time slices in which robot `r` is deployed.
    ActiveTimesPerRobot(Vec<u32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatroidVariant {
    I21,
    I22,
    I23,
    I31,
    I32,
    I33,
}

impl MatroidVariant {
    pub const ALL: [MatroidVariant; 6] = [
        MatroidVariant::I21,
        MatroidVariant::I22,
        MatroidVariant::I23,
        MatroidVariant::I31,
        MatroidVariant::I32,
        MatroidVariant::I33,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MatroidVariant::I21 => "I21",
            MatroidVariant::I22 => "I22",
            MatroidVariant::I23 => "I23",
            MatroidVariant::I31 => "I31",
            MatroidVariant::I32 => "I32",
            MatroidVariant::I33 => "I33",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for MatroidVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl MatroidSpec {
    pub fn variant(&self) -> MatroidVariant {
        match self {
            MatroidSpec::CountPerTime(_) => MatroidVariant::I21,
            MatroidSpec::StatusPerTime(_) => MatroidVariant::I22,
            MatroidSpec::ActiveTimes(_) => MatroidVariant::I23,
            MatroidSpec::CountPerRobotTime(_) => MatroidVariant::I31,
            MatroidSpec::StatusPerRobotTime(_) => MatroidVariant::I32,
            MatroidSpec::ActiveTimesPerRobot(_) => MatroidVariant::I33,
        }
    }

    pub fn validate(&self, ground: &GroundSet) -> Result<()> {
        let horizon = ground.horizon();
        let robots = ground.robot_count();
        let name = self.variant();
        let check_len = |len: usize, want: usize, what: &str| {
            if len == want {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name}: expected {want} {what} limits, got {len}")))
            }
        };
        let check_status = |v: &[u32]| {
            if v.iter().all(|&x| x <= 1) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name}: status limits must be 0 or 1")))
            }
        };
        match self {
            MatroidSpec::CountPerTime(l) => check_len(l.len(), horizon, "per-time"),
            MatroidSpec::StatusPerTime(l) => {
                check_len(l.len(), horizon, "per-time")?;
                check_status(l)
            }
            MatroidSpec::ActiveTimes(_) => Ok(()),
            MatroidSpec::CountPerRobotTime(m) | MatroidSpec::StatusPerRobotTime(m) => {
                check_len(m.len(), robots, "per-robot")?;
                for row in m {
                    check_len(row.len(), horizon, "per-time")?;
                    if matches!(self, MatroidSpec::StatusPerRobotTime(_)) {
                        check_status(row)?;
                    }
                }
                Ok(())
            }
            MatroidSpec::ActiveTimesPerRobot(l) => check_len(l.len(), robots, "per-robot"),
        }
    }

    /// Largest independent-set size on `ground`.
    pub fn rank(&self, ground: &GroundSet) -> usize {
        let horizon = ground.horizon();
        let n = ground.location_count();
        let slice = n * ground.robot_count();
        match self {
            MatroidSpec::CountPerTime(l) => l.iter().map(|&x| (x as usize).min(slice)).sum(),
            MatroidSpec::StatusPerTime(l) => l.iter().filter(|&&x| x > 0).count() * slice,
            MatroidSpec::ActiveTimes(l) => (*l as usize).min(horizon) * slice,
            MatroidSpec::CountPerRobotTime(m) => {
                m.iter().flatten().map(|&x| (x as usize).min(n)).sum()
            }
            MatroidSpec::StatusPerRobotTime(m) => {
                m.iter().flatten().filter(|&&x| x > 0).count() * n
            }
            MatroidSpec::ActiveTimesPerRobot(l) => {
                l.iter().map(|&x| (x as usize).min(horizon) * n).sum()
            }
        }
    }
}

pub fn is_independent(spec: &MatroidSpec, ground: &GroundSet, s: &DeploymentSet) -> bool {
    let horizon = ground.horizon();
    let robots = ground.robot_count();
    let mut per_time = vec![0u32; horizon];
    let mut per_robot_time = vec![0u32; robots * horizon];
    for &i in s.indices() {
        let e = ground.get(i);
        per_time[e.time] += 1;
        per_robot_time[e.robot * horizon + e.time] += 1;
    }
    let active = |c: u32| u32::from(c > 0);
    match spec {
        MatroidSpec::CountPerTime(l) => per_time.iter().zip(l).all(|(c, l)| c <= l),
        MatroidSpec::StatusPerTime(l) => per_time.iter().zip(l).all(|(&c, l)| active(c) <= *l),
        MatroidSpec::ActiveTimes(l) => per_time.iter().map(|&c| active(c)).sum::<u32>() <= *l,
        MatroidSpec::CountPerRobotTime(m) => (0..robots)
            .all(|r| (0..horizon).all(|t| per_robot_time[r * horizon + t] <= m[r][t])),
        MatroidSpec::StatusPerRobotTime(m) => (0..robots)
            .all(|r| (0..horizon).all(|t| active(per_robot_time[r * horizon + t]) <= m[r][t])),
        MatroidSpec::ActiveTimesPerRobot(l) => (0..robots).all(|r| {
            (0..horizon)
                .map(|t| active(per_robot_time[r * horizon + t]))
                .sum::<u32>()
                <= l[r]
        }),
    }
}

/// Which slices of the ground set a knapsack budget applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnapsackGroup {
    /// X1: total cost of each robot.
    PerRobot,
    /// X2: total cost in each time step.
    PerTime,
    /// X3: total cost spent on each location.
    PerLocation,
}

impl KnapsackGroup {
    pub fn name(&self) -> &'static str {
        match self {
            KnapsackGroup::PerRobot => "X1",
            KnapsackGroup::PerTime => "X2",
            KnapsackGroup::PerLocation => "X3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [KnapsackGroup::PerRobot, KnapsackGroup::PerTime, KnapsackGroup::PerLocation]
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
    }

    fn group_count(&self, ground: &GroundSet) -> usize {
        match self {
            KnapsackGroup::PerRobot => ground.robot_count(),
            KnapsackGroup::PerTime => ground.horizon(),
            KnapsackGroup::PerLocation => ground.location_count(),
        }
    }

    fn key(&self, ground: &GroundSet, idx: usize) -> usize {
        let e = ground.get(idx);
        match self {
            KnapsackGroup::PerRobot => e.robot,
            KnapsackGroup::PerTime => e.time,
            KnapsackGroup::PerLocation => e.location,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnapsackSpec {
    pub group: KnapsackGroup,
    pub budget: f64,
}

impl KnapsackSpec {
    pub fn new(group: KnapsackGroup, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) {
            return Err(Error::invalid(format!("knapsack budget must be nonnegative, got {budget}")));
        }
        Ok(KnapsackSpec { group, budget })
    }

    /// Cost of `idx` in this knapsack, normalized so that the budget is 1.
    /// Zero-cost elements map to 0 even when the budget is 0.
    pub fn normalized_cost(&self, ground: &GroundSet, idx: usize) -> f64 {
        let c = ground.get(idx).cost;
        if c == 0.0 {
            0.0
        } else {
            c / self.budget
        }
    }
}

fn fits(total: f64, budget: f64) -> bool {
    total <= budget + 1e-12 * (1.0 + budget)
}

pub fn within_budget(spec: &KnapsackSpec, ground: &GroundSet, s: &DeploymentSet) -> bool {
    let mut sums = vec![0.0; spec.group.group_count(ground)];
    for &i in s.indices() {
        sums[spec.group.key(ground, i)] += ground.get(i).cost;
    }
    sums.iter().all(|&total| fits(total, spec.budget))
}

/// Intersection of `p` matroids and `l` knapsacks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSystem {
    pub matroids: Vec<MatroidSpec>,
    pub knapsacks: Vec<KnapsackSpec>,
}

impl ConstraintSystem {
    pub fn new(matroids: Vec<MatroidSpec>, knapsacks: Vec<KnapsackSpec>) -> Self {
        ConstraintSystem {
            matroids,
            knapsacks,
        }
    }

    pub fn validate(&self, ground: &GroundSet) -> Result<()> {
        self.matroids.iter().try_for_each(|m| m.validate(ground))
    }

    pub fn matroid_count(&self) -> usize {
        self.matroids.len()
    }

    pub fn knapsack_count(&self) -> usize {
        self.knapsacks.len()
    }

    pub fn is_independent(&self, ground: &GroundSet, s: &DeploymentSet) -> bool {
        self.matroids.iter().all(|m| is_independent(m, ground, s))
    }

    pub fn within_budgets(&self, ground: &GroundSet, s: &DeploymentSet) -> bool {
        self.knapsacks.iter().all(|k| within_budget(k, ground, s))
    }

    /// Upper bound on the size of any set independent in every matroid.
    ///
    /// Per-(robot, time) and per-time capacities are combined first, then
    /// the active-time limits keep only the largest capacities.
    pub fn max_cardinality(&self, ground: &GroundSet) -> usize {
        let horizon = ground.horizon();
        let robots = ground.robot_count();
        let n = ground.location_count();
        let mut cap_rt = vec![vec![n; horizon]; robots];
        for m in &self.matroids {
            match m {
                MatroidSpec::CountPerRobotTime(l) => {
                    for (r, row) in cap_rt.iter_mut().enumerate() {
                        for (t, c) in row.iter_mut().enumerate() {
                            *c = (*c).min(l[r][t] as usize);
                        }
                    }
                }
                MatroidSpec::StatusPerRobotTime(l) => {
                    for (r, row) in cap_rt.iter_mut().enumerate() {
                        for (t, c) in row.iter_mut().enumerate() {
                            if l[r][t] == 0 {
                                *c = 0;
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        let mut cap_t: Vec<usize> = (0..horizon).map(|t| cap_rt.iter().map(|row| row[t]).sum()).collect();
        for m in &self.matroids {
            match m {
                MatroidSpec::CountPerTime(l) => {
                    for (c, &l) in cap_t.iter_mut().zip(l) {
                        *c = (*c).min(l as usize);
                    }
                }
                MatroidSpec::StatusPerTime(l) => {
                    for (c, &l) in cap_t.iter_mut().zip(l) {
                        if l == 0 {
                            *c = 0;
                        }
                    }
                }
                _ => {}
            }
        }
        let largest = |mut caps: Vec<usize>, k: usize| -> usize {
            caps.sort_unstable_by(|a, b| b.cmp(a));
            caps.iter().take(k).sum()
        };
        let mut bound = cap_t.iter().sum::<usize>();
        for m in &self.matroids {
            match m {
                MatroidSpec::ActiveTimes(l) => bound = bound.min(largest(cap_t.clone(), *l as usize)),
                MatroidSpec::ActiveTimesPerRobot(l) => {
                    let b = cap_rt
                        .iter()
                        .zip(l)
                        .map(|(row, &k)| largest(row.clone(), k as usize))
                        .sum();
                    bound = bound.min(b);
                }
                _ => {}
            }
        }
        bound.min(ground.len())
    }

    /// Sum over knapsacks of the budget-normalized cost of `idx`.
    pub fn total_normalized_cost(&self, ground: &GroundSet, idx: usize) -> f64 {
        self.knapsacks.iter().map(|k| k.normalized_cost(ground, idx)).sum()
    }

    pub fn tracker<'a>(&'a self, ground: &'a GroundSet) -> FeasibilityTracker<'a> {
        FeasibilityTracker::new(self, ground)
    }
}

pub fn feasible(sys: &ConstraintSystem, ground: &GroundSet, s: &DeploymentSet) -> bool {
    sys.is_independent(ground, s) && sys.within_budgets(ground, s)
}

/// Counters for a growing set, answering "can `e` be added?" in O(p + l).
///
/// Removal is LIFO via [`FeasibilityTracker::pop`].
#[derive(Debug, Clone)]
pub struct FeasibilityTracker<'a> {
    sys: &'a ConstraintSystem,
    ground: &'a GroundSet,
    per_time: Vec<u32>,
    per_robot_time: Vec<u32>,
    active_times: u32,
    active_times_per_robot: Vec<u32>,
    sums: Vec<Vec<f64>>,
    stack: Vec<(usize, Vec<f64>)>,
}

impl<'a> FeasibilityTracker<'a> {
    fn new(sys: &'a ConstraintSystem, ground: &'a GroundSet) -> Self {
        let horizon = ground.horizon();
        let robots = ground.robot_count();
        FeasibilityTracker {
            sys,
            ground,
            per_time: vec![0; horizon],
            per_robot_time: vec![0; robots * horizon],
            active_times: 0,
            active_times_per_robot: vec![0; robots],
            sums: sys
                .knapsacks
                .iter()
                .map(|k| vec![0.0; k.group.group_count(ground)])
                .collect(),
            stack: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }

    /// Whether `S + e` is independent in every matroid.
    pub fn matroids_allow(&self, idx: usize) -> bool {
        let e = self.ground.get(idx);
        let horizon = self.ground.horizon();
        let t_count = self.per_time[e.time];
        let rt_count = self.per_robot_time[e.robot * horizon + e.time];
        self.sys.matroids.iter().all(|m| match m {
            MatroidSpec::CountPerTime(l) => t_count < l[e.time],
            MatroidSpec::StatusPerTime(l) => l[e.time] >= 1,
            MatroidSpec::ActiveTimes(l) => t_count > 0 || self.active_times < *l,
            MatroidSpec::CountPerRobotTime(m) => rt_count < m[e.robot][e.time],
            MatroidSpec::StatusPerRobotTime(m) => m[e.robot][e.time] >= 1,
            MatroidSpec::ActiveTimesPerRobot(l) => {
                rt_count > 0 || self.active_times_per_robot[e.robot] < l[e.robot]
            }
        })
    }

    /// Whether `S + e` stays within every knapsack budget.
    pub fn budgets_allow(&self, idx: usize) -> bool {
        let cost = self.ground.get(idx).cost;
        self.sys
            .knapsacks
            .iter()
            .zip(&self.sums)
            .all(|(k, sums)| fits(sums[k.group.key(self.ground, idx)] + cost, k.budget))
    }

    pub fn allows(&self, idx: usize) -> bool {
        self.matroids_allow(idx) && self.budgets_allow(idx)
    }

    pub fn push(&mut self, idx: usize) {
        let e = *self.ground.get(idx);
        let horizon = self.ground.horizon();
        if self.per_time[e.time] == 0 {
            self.active_times += 1;
        }
        self.per_time[e.time] += 1;
        let rt = e.robot * horizon + e.time;
        if self.per_robot_time[rt] == 0 {
            self.active_times_per_robot[e.robot] += 1;
        }
        self.per_robot_time[rt] += 1;
        let mut saved = Vec::with_capacity(self.sums.len());
        for (k, sums) in self.sys.knapsacks.iter().zip(self.sums.iter_mut()) {
            let key = k.group.key(self.ground, idx);
            saved.push(sums[key]);
            sums[key] += e.cost;
        }
        self.stack.push((idx, saved));
    }

    pub fn pop(&mut self) -> Option<usize> {
        let (idx, saved) = self.stack.pop()?;
        let e = *self.ground.get(idx);
        let horizon = self.ground.horizon();
        self.per_time[e.time] -= 1;
        if self.per_time[e.time] == 0 {
            self.active_times -= 1;
        }
        let rt = e.robot * horizon + e.time;
        self.per_robot_time[rt] -= 1;
        if self.per_robot_time[rt] == 0 {
            self.active_times_per_robot[e.robot] -= 1;
        }
        for ((k, sums), old) in self.sys.knapsacks.iter().zip(self.sums.iter_mut()).zip(saved) {
            sums[k.group.key(self.ground, idx)] = old;
        }
        Some(idx)
    }

    pub fn clear(&mut self) {
        while self.pop().is_some() {}
    }
}

/// Default ground-set size above which the exhaustive verifier refuses.
pub const EXHAUSTIVE_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AxiomViolation {
    EmptySetDependent,
    /// `subset` is dependent although `superset` is independent.
    NotDownwardClosed {
        subset: Vec<usize>,
        superset: Vec<usize>,
    },
    /// Both sets independent, `|smaller| < |larger|`, and no element of
    /// `larger \ smaller` can be added to `smaller`.
    Exchange {
        larger: Vec<usize>,
        smaller: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AxiomReport {
    Pass { checked_sets: usize, independent_sets: usize },
    Violation(AxiomViolation),
}

impl AxiomReport {
    pub fn is_pass(&self) -> bool {
        matches!(self, AxiomReport::Pass { .. })
    }
}

fn mask_members(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask & (1 << b) != 0).collect()
}

/// Exhaustively checks the three matroid axioms for the set system on
/// `{0..n}` whose independent sets are given by `independent`.
///
/// The exchange axiom is checked through ranks: for each independent `I`,
/// the largest set in which `I` is maximal is `I` plus every element whose
/// addition breaks independence; `I` must have full rank there.
pub fn verify_axioms_with(n: usize, independent: impl Fn(&[usize]) -> bool) -> Result<AxiomReport> {
    if n > 24 {
        return Err(Error::invalid(format!("exhaustive verification over {n} elements refused")));
    }
    let total = 1usize << n;
    let indep: Vec<bool> = (0..total as u32).map(|m| independent(&mask_members(m))).collect();
    if !indep[0] {
        return Ok(AxiomReport::Violation(AxiomViolation::EmptySetDependent));
    }
    for mask in 0..total {
        if !indep[mask] {
            continue;
        }
        for b in 0..n {
            let sub = mask & !(1 << b);
            if sub != mask && !indep[sub] {
                return Ok(AxiomReport::Violation(AxiomViolation::NotDownwardClosed {
                    subset: mask_members(sub as u32),
                    superset: mask_members(mask as u32),
                }));
            }
        }
    }
    let mut rank = vec![0u8; total];
    for mask in 1..total {
        rank[mask] = if indep[mask] {
            mask.count_ones() as u8
        } else {
            (0..n)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| rank[mask & !(1 << b)])
                .max()
                .unwrap_or(0)
        };
    }
    for mask in 0..total {
        if !indep[mask] {
            continue;
        }
        let span = (0..n)
            .filter(|b| mask & (1 << b) == 0 && !indep[mask | (1 << b)])
            .fold(mask, |acc, b| acc | (1 << b));
        if rank[span] as u32 > mask.count_ones() {
            let mut larger = span;
            while !indep[larger] {
                let b = (0..n)
                    .find(|b| larger & (1 << b) != 0 && rank[larger & !(1 << b)] == rank[larger])
                    .expect("a rank-preserving deletion exists");
                larger &= !(1 << b);
            }
            return Ok(AxiomReport::Violation(AxiomViolation::Exchange {
                larger: mask_members(larger as u32),
                smaller: mask_members(mask as u32),
            }));
        }
    }
    Ok(AxiomReport::Pass {
        checked_sets: total,
        independent_sets: indep.iter().filter(|&&b| b).count(),
    })
}

/// Exhaustive axiom check of `spec` on `ground`; refuses above `cap`.
pub fn verify_matroid_axioms(spec: &MatroidSpec, ground: &GroundSet, cap: usize) -> Result<AxiomReport> {
    spec.validate(ground)?;
    if ground.len() > cap {
        return Err(Error::invalid(format!(
            "ground set of size {} exceeds exhaustive cap {cap}; use the sampled check",
            ground.len()
        )));
    }
    verify_axioms_with(ground.len(), |members| {
        is_independent(spec, ground, &DeploymentSet::from_indices(members.iter().copied()))
    })
}

/// Elements per random restriction in [`verify_matroid_axioms_sampled`].
pub const RESTRICTION_SIZE: usize = 12;

fn relabel(v: AxiomViolation, pick: &[usize]) -> AxiomViolation {
    let map = |s: Vec<usize>| s.into_iter().map(|i| pick[i]).collect();
    match v {
        AxiomViolation::EmptySetDependent => AxiomViolation::EmptySetDependent,
        AxiomViolation::NotDownwardClosed { subset, superset } => AxiomViolation::NotDownwardClosed {
            subset: map(subset),
            superset: map(superset),
        },
        AxiomViolation::Exchange { larger, smaller } => AxiomViolation::Exchange {
            larger: map(larger),
            smaller: map(smaller),
        },
    }
}

/// Randomized check for ground sets too large to enumerate. Each sample
/// restricts the set system to [`RESTRICTION_SIZE`] random elements and
/// verifies the restriction exhaustively. A restriction of a matroid is a
/// matroid, so every reported violation is genuine; a pass is evidence only.
pub fn verify_matroid_axioms_sampled(
    spec: &MatroidSpec,
    ground: &GroundSet,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<AxiomReport> {
    spec.validate(ground)?;
    let k = ground.len().min(RESTRICTION_SIZE);
    let mut order: Vec<usize> = (0..ground.len()).collect();
    let (mut checked, mut independent) = (0, 0);
    for _ in 0..samples {
        order.shuffle(rng);
        let mut pick = order[..k].to_vec();
        pick.sort_unstable();
        let report = verify_axioms_with(k, |members| {
            is_independent(spec, ground, &DeploymentSet::from_indices(members.iter().map(|&i| pick[i])))
        })?;
        match report {
            AxiomReport::Pass {
                checked_sets,
                independent_sets,
            } => {
                checked += checked_sets;
                independent += independent_sets;
            }
            AxiomReport::Violation(v) => return Ok(AxiomReport::Violation(relabel(v, &pick))),
        }
    }
    Ok(AxiomReport::Pass {
        checked_sets: checked,
        independent_sets: independent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundset::{build_ground_set, GridSpec, Point2, RobotSpec, TravelCost};

    fn ground(p: usize, q: usize, r: usize, t: usize) -> GroundSet {
        let grid = GridSpec::new(p, q, 200.0, 200.0).unwrap();
        let robots: Vec<_> = (0..r)
            .map(|k| RobotSpec::new(0.1, 0.2 + 0.1 * k as f64, Point2::ORIGIN))
            .collect();
        build_ground_set(&grid, t, &robots, &TravelCost).unwrap()
    }

    fn all_variants(v: &GroundSet, limit: u32) -> Vec<MatroidSpec> {
        let (t, r) = (v.horizon(), v.robot_count());
        vec![
            MatroidSpec::CountPerTime(vec![limit; t]),
            MatroidSpec::StatusPerTime((0..t).map(|k| (k % 2) as u32).collect()),
            MatroidSpec::ActiveTimes(limit),
            MatroidSpec::CountPerRobotTime(vec![vec![limit; t]; r]),
            MatroidSpec::StatusPerRobotTime(vec![(0..t).map(|k| u32::from(k < 2)).collect(); r]),
            MatroidSpec::ActiveTimesPerRobot(vec![limit; r]),
        ]
    }

    #[test]
    fn empty_set_is_independent_everywhere() {
        let v = ground(2, 2, 2, 3);
        for spec in all_variants(&v, 1) {
            assert!(is_independent(&spec, &v, &DeploymentSet::empty()), "{}", spec.variant());
        }
    }

    #[test]
    fn active_times_limit() {
        let v = ground(2, 1, 1, 3);
        let s = DeploymentSet::from_indices([v.index_of(0, 0, 0), v.index_of(0, 1, 1)]);
        assert!(!is_independent(&MatroidSpec::ActiveTimes(1), &v, &s));
        assert!(is_independent(&MatroidSpec::ActiveTimes(2), &v, &s));
    }

    #[test]
    fn robot_time_window() {
        let v = ground(2, 2, 2, 4);
        // robot 0 may deploy only at the first time step
        let windows = vec![vec![1, 0, 0, 0], vec![1, 1, 1, 1]];
        let spec = MatroidSpec::StatusPerRobotTime(windows);
        let first = DeploymentSet::from_indices([v.index_of(0, 3, 0), v.index_of(0, 1, 0)]);
        let third = DeploymentSet::from_indices([v.index_of(0, 3, 2)]);
        assert!(is_independent(&spec, &v, &first));
        assert!(!is_independent(&spec, &v, &third));
    }

    #[test]
    fn status_per_time_is_weaker_than_count_per_time() {
        let v = ground(2, 1, 2, 2);
        let s = DeploymentSet::from_indices([v.index_of(0, 0, 0), v.index_of(1, 1, 0)]);
        assert!(is_independent(&MatroidSpec::StatusPerTime(vec![1, 1]), &v, &s));
        assert!(!is_independent(&MatroidSpec::CountPerTime(vec![1, 1]), &v, &s));
    }

    #[test]
    fn knapsack_examples() {
        let v = ground(3, 3, 2, 2);
        let costly = (0..v.len()).find(|&i| v.get(i).cost > 0.0).unwrap();
        let zero = KnapsackSpec::new(KnapsackGroup::PerTime, 0.0).unwrap();
        assert!(within_budget(&zero, &v, &DeploymentSet::empty()));
        assert!(!within_budget(&zero, &v, &DeploymentSet::from_indices([costly])));
        assert!(KnapsackSpec::new(KnapsackGroup::PerRobot, -1.0).is_err());
    }

    #[test]
    fn per_time_budget_checks_each_slice() {
        let v = ground(3, 3, 1, 2);
        let a = v.index_of(0, 0, 0);
        let b = v.index_of(0, 4, 1);
        let (ca, cb) = (v.get(a).cost, v.get(b).cost);
        let budget = ca.max(cb);
        let s = DeploymentSet::from_indices([a, b]);
        assert!(within_budget(&KnapsackSpec::new(KnapsackGroup::PerTime, budget).unwrap(), &v, &s));
        assert!(!within_budget(&KnapsackSpec::new(KnapsackGroup::PerRobot, budget).unwrap(), &v, &s));
    }

    #[test]
    fn one_robot_over_budget_fails() {
        let v = ground(3, 3, 2, 1);
        let cheap = v.index_of(0, 0, 0);
        let pricey = v.index_of(1, 8, 0);
        let budget = v.get(cheap).cost + 1e-3;
        assert!(v.get(pricey).cost > budget);
        let spec = KnapsackSpec::new(KnapsackGroup::PerRobot, budget).unwrap();
        assert!(within_budget(&spec, &v, &DeploymentSet::from_indices([cheap])));
        assert!(!within_budget(&spec, &v, &DeploymentSet::from_indices([cheap, pricey])));
    }

    #[test]
    fn feasible_is_a_conjunction() {
        let v = ground(2, 2, 2, 2);
        let sys = ConstraintSystem::new(
            vec![MatroidSpec::CountPerTime(vec![1, 1])],
            vec![KnapsackSpec::new(KnapsackGroup::PerTime, 1e9).unwrap()],
        );
        assert!(feasible(&sys, &v, &DeploymentSet::empty()));
        assert!(feasible(&sys, &v, &DeploymentSet::from_indices([0, 8])));
        assert!(!feasible(&sys, &v, &DeploymentSet::from_indices([0, 1])));
        let broke = ConstraintSystem::new(vec![], vec![KnapsackSpec::new(KnapsackGroup::PerTime, 0.0).unwrap()]);
        assert!(!feasible(&broke, &v, &DeploymentSet::from_indices([0])));
    }

    #[test]
    fn exhaustive_examples() {
        let v8 = ground(2, 1, 2, 2);
        assert_eq!(v8.len(), 8);
        let r = verify_matroid_axioms(&MatroidSpec::CountPerTime(vec![1, 1]), &v8, EXHAUSTIVE_CAP).unwrap();
        assert!(r.is_pass(), "{r:?}");
        let v12 = ground(2, 1, 2, 3);
        let r = verify_matroid_axioms(&MatroidSpec::CountPerRobotTime(vec![vec![1, 2, 1]; 2]), &v12, EXHAUSTIVE_CAP)
            .unwrap();
        assert!(r.is_pass(), "{r:?}");
    }

    #[test]
    fn partition_and_status_variants_pass_on_small_ground_set() {
        let v = ground(1, 2, 2, 3);
        for spec in all_variants(&v, 1).into_iter().chain(all_variants(&v, 2)) {
            if matches!(spec.variant(), MatroidVariant::I23 | MatroidVariant::I33) {
                continue;
            }
            let r = verify_matroid_axioms(&spec, &v, EXHAUSTIVE_CAP).unwrap();
            assert!(r.is_pass(), "{}: {r:?}", spec.variant());
        }
    }

    #[test]
    fn active_time_limits_break_exchange() {
        // {a} at t=0 and {b, c} at t=1 with L = 1: {b, c} cannot augment {a}.
        let v = ground(2, 1, 1, 2);
        let r = verify_matroid_axioms(&MatroidSpec::ActiveTimes(1), &v, EXHAUSTIVE_CAP).unwrap();
        assert!(matches!(r, AxiomReport::Violation(AxiomViolation::Exchange { .. })), "{r:?}");
        let r = verify_matroid_axioms(&MatroidSpec::ActiveTimesPerRobot(vec![1]), &v, EXHAUSTIVE_CAP).unwrap();
        assert!(matches!(r, AxiomReport::Violation(AxiomViolation::Exchange { .. })), "{r:?}");
    }

    #[test]
    fn active_time_limits_pass_when_degenerate() {
        // one element per time slice: uniform matroid
        let v = ground(1, 1, 1, 5);
        let r = verify_matroid_axioms(&MatroidSpec::ActiveTimes(2), &v, EXHAUSTIVE_CAP).unwrap();
        assert!(r.is_pass());
        // limit covers the whole horizon: free matroid
        let v = ground(2, 1, 2, 2);
        let r = verify_matroid_axioms(&MatroidSpec::ActiveTimesPerRobot(vec![2, 3]), &v, EXHAUSTIVE_CAP).unwrap();
        assert!(r.is_pass());
    }

    #[test]
    fn verifier_catches_broken_rules() {
        // {0,1} independent but {0} not.
        let r = verify_axioms_with(3, |s| s.is_empty() || s == [0, 1] || s == [1]).unwrap();
        assert!(matches!(r, AxiomReport::Violation(AxiomViolation::NotDownwardClosed { .. })), "{r:?}");
        // independent: subsets of {0,1} and {2}; exchange fails for A={0,1}, B={2}.
        let r = verify_axioms_with(3, |s| !s.contains(&2) || s.len() == 1).unwrap();
        match r {
            AxiomReport::Violation(AxiomViolation::Exchange { larger, smaller }) => {
                assert_eq!(smaller, vec![2]);
                assert_eq!(larger.len(), 2);
            }
            other => panic!("expected exchange violation, got {other:?}"),
        }
        let r = verify_axioms_with(2, |s| !s.is_empty()).unwrap();
        assert_eq!(r, AxiomReport::Violation(AxiomViolation::EmptySetDependent));
    }

    #[test]
    fn exhaustive_refuses_large_ground_sets() {
        let v = ground(3, 3, 1, 2);
        assert!(verify_matroid_axioms(&MatroidSpec::ActiveTimes(1), &v, EXHAUSTIVE_CAP).is_err());
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let r = verify_matroid_axioms_sampled(&MatroidSpec::CountPerTime(vec![2, 3]), &v, 50, &mut rng).unwrap();
        assert!(r.is_pass());
        let r = verify_matroid_axioms_sampled(&MatroidSpec::ActiveTimes(1), &v, 20, &mut rng).unwrap();
        assert!(!r.is_pass());
    }

    #[test]
    fn rank_matches_max_cardinality() {
        let v = ground(1, 2, 2, 3);
        for spec in all_variants(&v, 1) {
            let best = (0..1u32 << v.len())
                .map(|m| DeploymentSet::from_indices(mask_members(m)))
                .filter(|s| is_independent(&spec, &v, s))
                .map(|s| s.len())
                .max()
                .unwrap();
            assert_eq!(spec.rank(&v), best, "{}", spec.variant());
        }
    }

    #[test]
    fn intersection_cardinality_bound() {
        let v = ground(1, 2, 2, 3);
        let sys = ConstraintSystem::new(
            vec![MatroidSpec::CountPerTime(vec![2, 1, 2]), MatroidSpec::ActiveTimes(2)],
            vec![],
        );
        let brute = (0..1u32 << v.len())
            .map(|m| DeploymentSet::from_indices(mask_members(m)))
            .filter(|s| sys.is_independent(&v, s))
            .map(|s| s.len())
            .max()
            .unwrap();
        assert_eq!(brute, 4);
        assert_eq!(sys.max_cardinality(&v), 4);

        let sys = ConstraintSystem::new(
            vec![
                MatroidSpec::CountPerRobotTime(vec![vec![1, 2, 0], vec![2, 2, 1]]),
                MatroidSpec::ActiveTimesPerRobot(vec![1, 2]),
            ],
            vec![],
        );
        let brute = (0..1u32 << v.len())
            .map(|m| DeploymentSet::from_indices(mask_members(m)))
            .filter(|s| sys.is_independent(&v, s))
            .map(|s| s.len())
            .max()
            .unwrap();
        assert_eq!(sys.max_cardinality(&v), brute);
    }

    #[test]
    fn tracker_agrees_with_predicates() {
        let v = ground(2, 2, 2, 3);
        let sys = ConstraintSystem::new(
            vec![
                MatroidSpec::CountPerTime(vec![2, 1, 2]),
                MatroidSpec::ActiveTimes(2),
                MatroidSpec::ActiveTimesPerRobot(vec![1, 2]),
            ],
            vec![KnapsackSpec::new(KnapsackGroup::PerTime, 150.0).unwrap()],
        );
        let mut tracker = sys.tracker(&v);
        let mut current = DeploymentSet::empty();
        for e in [3, 10, 17, 20, 2, 9] {
            let next = current.with(e);
            assert_eq!(tracker.matroids_allow(e), sys.is_independent(&v, &next));
            assert_eq!(tracker.allows(e), feasible(&sys, &v, &next));
            if tracker.allows(e) {
                tracker.push(e);
                current = next;
            }
        }
        while tracker.pop().is_some() {}
        assert!(tracker.allows(3));
    }
}
