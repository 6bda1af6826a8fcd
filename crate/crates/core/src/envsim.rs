//! Synthetic ground truth: a weighted sum of fixed Gaussian bumps whose
//! weights follow `dw/dt = A w + noise`, integrated with explicit Euler.
//!
//! The state at time `t` is the state after `floor(t / dt)` Euler steps.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundset::{GridSpec, Point2};
use crate::stgp::{Input, SampleNoise, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmConfig {
    pub centers: Vec<Point2>,
    pub widths: Vec<f64>,
    pub initial_weights: Vec<f64>,
    /// Row-major dynamics matrix `A`. Empty means `-I`.
    #[serde(default)]
    pub dynamics: Vec<Vec<f64>>,
    /// Standard deviation of the per-component process noise.
    pub process_noise_std: f64,
    /// Euler step.
    pub dt: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            centers: vec![
                Point2::new(100.0, 100.0),
                Point2::new(60.0, 80.0),
                Point2::new(40.0, 30.0),
                Point2::new(160.0, 160.0),
                Point2::new(160.0, 30.0),
            ],
            // widths, noise scale and step are not given by the source setup
            widths: vec![40.0; 5],
            initial_weights: vec![5.0, 5.0, 3.0, 8.0, 4.0],
            dynamics: Vec::new(),
            process_noise_std: 0.05,
            dt: 0.1,
        }
    }
}

impl GmmConfig {
    pub fn basis_count(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.centers.len();
        if self.widths.len() != k || self.initial_weights.len() != k {
            return Err(Error::invalid(format!(
                "GMM has {k} centers, {} widths, {} weights",
                self.widths.len(),
                self.initial_weights.len()
            )));
        }
        if self.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("GMM widths must be positive"));
        }
        if !self.dynamics.is_empty()
            && (self.dynamics.len() != k || self.dynamics.iter().any(|row| row.len() != k))
        {
            return Err(Error::invalid(format!("dynamics matrix must be {k}x{k}")));
        }
        if !(self.dt > 0.0) || !(self.process_noise_std >= 0.0) {
            return Err(Error::invalid("dt must be positive and noise std nonnegative"));
        }
        Ok(())
    }

    fn drift(&self, w: &[f64]) -> Vec<f64> {
        if self.dynamics.is_empty() {
            w.iter().map(|x| -x).collect()
        } else {
            self.dynamics
                .iter()
                .map(|row| row.iter().zip(w).map(|(a, x)| a * x).sum())
                .collect()
        }
    }

    pub fn initial_state(&self) -> FieldState {
        FieldState {
            weights: self.initial_weights.clone(),
            steps: 0,
        }
    }

    /// Euler steps covering `t` time units.
    pub fn steps_until(&self, t: f64) -> u64 {
        (t / self.dt + 1e-9).floor().max(0.0) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub weights: Vec<f64>,
    /// Euler steps taken since time 0.
    pub steps: u64,
}

impl FieldState {
    pub fn time(&self, cfg: &GmmConfig) -> f64 {
        self.steps as f64 * cfg.dt
    }
}

/// Isotropic Gaussian bump `exp(-|p - c|^2 / (2 w^2))`.
pub fn basis_value(center: Point2, width: f64, at: Point2) -> f64 {
    let d2 = (at.x - center.x).powi(2) + (at.y - center.y).powi(2);
    (-d2 / (2.0 * width * width)).exp()
}

/// One Euler step: `w + dt A w + sqrt(dt) noise`.
pub fn step_weights(state: &FieldState, cfg: &GmmConfig, rng: &mut impl Rng) -> FieldState {
    let drift = cfg.drift(&state.weights);
    let scale = cfg.dt.sqrt() * cfg.process_noise_std;
    let weights = state
        .weights
        .iter()
        .zip(drift)
        .map(|(w, a)| {
            let noise: f64 = if scale > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            w + cfg.dt * a + scale * noise
        })
        .collect();
    FieldState {
        weights,
        steps: state.steps + 1,
    }
}

pub fn field_value(state: &FieldState, cfg: &GmmConfig, at: Point2) -> f64 {
    state
        .weights
        .iter()
        .zip(cfg.centers.iter().zip(&cfg.widths))
        .map(|(w, (c, width))| w * basis_value(*c, *width, at))
        .sum()
}

pub fn sample_measurement(
    state: &FieldState,
    cfg: &GmmConfig,
    at: Point2,
    noise_var: f64,
    rng: &mut impl Rng,
) -> f64 {
    let clean = field_value(state, cfg, at);
    if noise_var > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        clean + noise_var.sqrt() * z
    } else {
        clean
    }
}

/// States at times `0, 1, .., horizon`.
pub fn simulate(cfg: &GmmConfig, horizon: usize, rng: &mut impl Rng) -> Vec<FieldState> {
    let mut state = cfg.initial_state();
    let mut out = vec![state.clone()];
    for t in 1..=horizon {
        let target = cfg.steps_until(t as f64);
        while state.steps < target {
            state = step_weights(&state, cfg, rng);
        }
        out.push(state.clone());
    }
    out
}

/// Samples the field at each `(x, y, t)` probe. Probes are visited in time
/// order (stable), so the RNG stream depends only on the schedule.
pub fn generate_training_set(
    cfg: &GmmConfig,
    grid: &GridSpec,
    probes: &[Input],
    noise_var: f64,
    rng: &mut impl Rng,
) -> Result<TrainingSet> {
    cfg.validate()?;
    for p in probes {
        if !grid.contains(&Point2::new(p[0], p[1])) || !(p[2] >= 0.0) {
            return Err(Error::invalid(format!(
                "probe ({}, {}, {}) outside the field or before time 0",
                p[0], p[1], p[2]
            )));
        }
    }
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&a, &b| probes[a][2].total_cmp(&probes[b][2]));
    let mut outputs = vec![0.0; probes.len()];
    let mut state = cfg.initial_state();
    for idx in order {
        let p = probes[idx];
        let target = cfg.steps_until(p[2]);
        while state.steps < target {
            state = step_weights(&state, cfg, rng);
        }
        outputs[idx] = sample_measurement(&state, cfg, Point2::new(p[0], p[1]), noise_var, rng);
    }
    TrainingSet::new(probes.to_vec(), outputs, SampleNoise::Ambient)
}

/// Grid CSV `i,x,y,value` of one field snapshot.
pub fn write_snapshot_csv(path: &Path, state: &FieldState, cfg: &GmmConfig, grid: &GridSpec) -> Result<()> {
    let mut out = String::from("i,x,y,value\n");
    for i in 0..grid.cell_count() {
        let c = grid.cell_center(i);
        out.push_str(&format!("{},{},{},{}\n", i + 1, c.x, c.y, field_value(state, cfg, c)));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
