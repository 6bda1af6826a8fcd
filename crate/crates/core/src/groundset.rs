//! The deployment ground set: every (robot, location, time) decision a team
//! can make over the planning horizon, together with its cost and the
//! robot's sensing noise.
//!
//! Indices are zero-based in memory. CSV output uses one-based labels for
//! robots, locations and times.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// 2D point in field units.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Uniform P x Q discretization of a rectangular field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub p: usize,
    pub q: usize,
    pub width: f64,
    pub height: f64,
}

impl GridSpec {
    pub fn new(p: usize, q: usize, width: f64, height: f64) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::invalid(format!("grid must be non-empty, got {p}x{q}")));
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::invalid(format!(
                "field extent must be positive, got {width}x{height}"
            )));
        }
        Ok(GridSpec { p, q, width, height })
    }

    pub fn cell_count(&self) -> usize {
        self.p * self.q
    }

    /// Row-major cell center of location `i` (zero-based).
    pub fn cell_center(&self, i: usize) -> Point2 {
        debug_assert!(i < self.cell_count());
        let col = i % self.p;
        let row = i / self.p;
        Point2 {
            x: (col as f64 + 0.5) * self.width / self.p as f64,
            y: (row as f64 + 0.5) * self.height / self.q as f64,
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn contains(&self, pt: &Point2) -> bool {
        (0.0..=self.width).contains(&pt.x) && (0.0..=self.height).contains(&pt.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    /// Sensing noise variance per time step. A single entry applies to every
    /// time step.
    pub noise_variance: Vec<f64>,
    /// Weight in (0, 1) scaling the travel cost.
    pub cost_weight: f64,
    pub depot: Point2,
}

impl RobotSpec {
    pub fn new(noise_variance: f64, cost_weight: f64, depot: Point2) -> Self {
        RobotSpec {
            noise_variance: vec![noise_variance],
            cost_weight,
            depot,
        }
    }

    pub fn noise_at(&self, t: usize) -> f64 {
        if self.noise_variance.len() == 1 {
            self.noise_variance[0]
        } else {
            self.noise_variance[t]
        }
    }

    fn validate(&self, r: usize, horizon: usize) -> Result<()> {
        let n = self.noise_variance.len();
        if n != 1 && n != horizon {
            return Err(Error::invalid(format!(
                "robot {r}: noise schedule has {n} entries, expected 1 or {horizon}"
            )));
        }
        if let Some(v) = self.noise_variance.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::invalid(format!(
                "robot {r}: noise variance must be positive, got {v}"
            )));
        }
        if !(self.cost_weight > 0.0 && self.cost_weight < 1.0) {
            return Err(Error::invalid(format!(
                "robot {r}: cost weight must lie in (0,1), got {}",
                self.cost_weight
            )));
        }
        Ok(())
    }
}

/// Cost of robot `robot` sensing at `position` at time `t`.
pub trait CostModel {
    fn cost(&self, robot: &RobotSpec, position: Point2, t: usize) -> f64;
}

/// Weighted Euclidean distance from the robot's depot. Time-invariant.
#[derive(Debug, Clone, Copy, Default)]
pub struct TravelCost;

impl CostModel for TravelCost {
    fn cost(&self, robot: &RobotSpec, position: Point2, _t: usize) -> f64 {
        robot.cost_weight * robot.depot.distance(&position)
    }
}

/// One candidate decision: location `location` sensed by robot `robot` at
/// time `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundElement {
    pub robot: usize,
    pub location: usize,
    pub time: usize,
    pub position: Point2,
    pub cost: f64,
    pub noise_variance: f64,
}

pub fn element_cost(e: &GroundElement, robot: &RobotSpec, model: &impl CostModel) -> f64 {
    model.cost(robot, e.position, e.time)
}

#[derive(Debug, Clone)]
pub struct GroundSet {
    grid: GridSpec,
    horizon: usize,
    robots: Vec<RobotSpec>,
    elements: Vec<GroundElement>,
}

/// Builds every element in t-major, then robot, then location order.
pub fn build_ground_set(
    grid: &GridSpec,
    horizon: usize,
    robots: &[RobotSpec],
    cost_model: &impl CostModel,
) -> Result<GroundSet> {
    if grid.cell_count() == 0 {
        return Err(Error::invalid("empty grid"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if robots.is_empty() {
        return Err(Error::invalid("robot roster is empty"));
    }
    for (r, robot) in robots.iter().enumerate() {
        robot.validate(r, horizon)?;
    }
    let n = grid.cell_count();
    let mut elements = Vec::with_capacity(n * robots.len() * horizon);
    for time in 0..horizon {
        for (robot, spec) in robots.iter().enumerate() {
            for location in 0..n {
                let position = grid.cell_center(location);
                elements.push(GroundElement {
                    robot,
                    location,
                    time,
                    position,
                    cost: cost_model.cost(spec, position, time),
                    noise_variance: spec.noise_at(time),
                });
            }
        }
    }
    Ok(GroundSet {
        grid: grid.clone(),
        horizon,
        robots: robots.to_vec(),
        elements,
    })
}

impl GroundSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[GroundElement] {
        &self.elements
    }

    pub fn get(&self, idx: usize) -> &GroundElement {
        &self.elements[idx]
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn robot_count(&self) -> usize {
        self.robots.len()
    }

    pub fn location_count(&self) -> usize {
        self.grid.cell_count()
    }

    pub fn robots(&self) -> &[RobotSpec] {
        &self.robots
    }

    /// Index of the element (r, i, t).
    pub fn index_of(&self, robot: usize, location: usize, time: usize) -> usize {
        let n = self.location_count();
        (time * self.robots.len() + robot) * n + location
    }

    /// Element indices of the time slice V_t.
    pub fn time_slice(&self, t: usize) -> std::ops::Range<usize> {
        let width = self.location_count() * self.robots.len();
        t * width..(t + 1) * width
    }

    /// (x, y, t) inputs for the GP, one row per element.
    pub fn inputs(&self) -> Vec<[f64; 3]> {
        self.elements
            .iter()
            .map(|e| [e.position.x, e.position.y, (e.time + 1) as f64])
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("r,i,t,x,y,cost,noise_var\n");
        for e in &self.elements {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.robot + 1,
                e.location + 1,
                e.time + 1,
                e.position.x,
                e.position.y,
                e.cost,
                e.noise_variance
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// A candidate solution: sorted, duplicate-free element indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DeploymentSet {
    members: Vec<usize>,
}

impl DeploymentSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sorts and de-duplicates `indices`.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut members: Vec<usize> = indices.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        DeploymentSet { members }
    }

    pub fn validate(&self, ground: &GroundSet) -> Result<()> {
        match self.members.last() {
            Some(&last) if last >= ground.len() => Err(Error::invalid(format!(
                "element index {last} out of range for ground set of size {}",
                ground.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.members.binary_search(&idx).is_ok()
    }

    pub fn with(&self, idx: usize) -> Self {
        let mut next = self.clone();
        if let Err(pos) = next.members.binary_search(&idx) {
            next.members.insert(pos, idx);
        }
        next
    }

    /// V \ S.
    pub fn complement(&self, ground_len: usize) -> Self {
        let mut it = self.members.iter().peekable();
        let members = (0..ground_len)
            .filter(|i| {
                if it.peek() == Some(&i) {
                    it.next();
                    false
                } else {
                    true
                }
            })
            .collect();
        DeploymentSet { members }
    }

    pub fn total_cost(&self, ground: &GroundSet) -> f64 {
        self.members.iter().map(|&i| ground.get(i).cost).sum()
    }

    pub fn slice(&self, ground: &GroundSet, by: Selector) -> DeploymentSet {
        DeploymentSet {
            members: self
                .members
                .iter()
                .copied()
                .filter(|&i| by.matches(ground.get(i)))
                .collect(),
        }
    }
}

/// Slice key for [`DeploymentSet::slice`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Robot(usize),
    Time(usize),
    Location(usize),
}

impl Selector {
    pub fn matches(&self, e: &GroundElement) -> bool {
        match *self {
            Selector::Robot(r) => e.robot == r,
            Selector::Time(t) => e.time == t,
            Selector::Location(i) => e.location == i,
        }
    }
}
