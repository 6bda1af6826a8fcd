//! Fixtures and reference implementations shared by the integration tests.
//! The references avoid nalgebra decompositions on purpose.

#![allow(dead_code)]

use intermit::constraints::ConstraintSystem;
use intermit::groundset::{build_ground_set, DeploymentSet, GridSpec, GroundSet, Point2, RobotSpec, TravelCost};
use intermit::solver::ProblemInstance;
use intermit::stgp::{ground_covariance, GpModel, Input, KernelParams, PosteriorCov, SampleNoise, TrainingSet};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-major dense matrix.
pub type Dense = Vec<Vec<f64>>;

/// Gaussian elimination with partial pivoting. Returns `(log|det|, sign)`.
pub fn logdet_ge(m: &Dense) -> (f64, f64) {
    let n = m.len();
    let mut a = m.clone();
    let mut logdet = 0.0;
    let mut sign = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        if p != c {
            a.swap(p, c);
            sign = -sign;
        }
        let piv = a[c][c];
        logdet += piv.abs().ln();
        if piv < 0.0 {
            sign = -sign;
        }
        for r in c + 1..n {
            let f = a[r][c] / piv;
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    (logdet, sign)
}

/// Solves `m x = b` column by column with Gauss-Jordan elimination.
pub fn solve_ge(m: &Dense, b: &Dense) -> Dense {
    let n = m.len();
    let cols = b[0].len();
    let mut a: Dense = (0..n)
        .map(|i| m[i].iter().chain(b[i].iter()).copied().collect())
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(p, c);
        let piv = a[c][c];
        for k in 0..n + cols {
            a[c][k] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for k in 0..n + cols {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    a.into_iter().map(|row| row[n..].to_vec()).collect()
}

pub fn sub(m: &Dense, idx: &[usize]) -> Dense {
    idx.iter().map(|&i| idx.iter().map(|&j| m[i][j]).collect()).collect()
}

pub fn to_dense(cov: &PosteriorCov) -> Dense {
    let m = cov.matrix();
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Reference MI: `1/2 (log|S_D| + log|S_rest| - log|S_V|)`. The `2 pi e`
/// terms cancel.
pub fn mi_reference(cov: &Dense, d: &[usize]) -> f64 {
    let n = cov.len();
    if d.is_empty() || d.len() == n {
        return 0.0;
    }
    let rest: Vec<usize> = (0..n).filter(|i| !d.contains(i)).collect();
    0.5 * (logdet_ge(&sub(cov, d)).0 + logdet_ge(&sub(cov, &rest)).0 - logdet_ge(cov).0)
}

pub fn se(a: &Input, b: &Input, k: &KernelParams) -> f64 {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let dt2 = (a[2] - b[2]).powi(2);
    k.spatial_variance
        * (-d2 / (2.0 * k.spatial_length.powi(2))).exp()
        * k.temporal_variance
        * (-dt2 / (2.0 * k.temporal_length.powi(2))).exp()
}

pub fn random_kernel(rng: &mut ChaCha8Rng) -> KernelParams {
    KernelParams::new(
        rng.random_range(0.5..4.0),
        rng.random_range(40.0..150.0),
        rng.random_range(0.5..2.0),
        rng.random_range(1.0..6.0),
        rng.random_range(0.005..0.05),
    )
    .unwrap()
}

pub fn random_training(rng: &mut ChaCha8Rng, n: usize, horizon: usize) -> TrainingSet {
    let inputs: Vec<Input> = (0..n)
        .map(|_| {
            [
                rng.random_range(0.0..200.0),
                rng.random_range(0.0..200.0),
                rng.random_range(0.0..=horizon as f64),
            ]
        })
        .collect();
    let outputs = (0..n).map(|_| rng.random_range(-2.0..6.0)).collect();
    TrainingSet::new(inputs, outputs, SampleNoise::Ambient).unwrap()
}

pub fn robots(rng: &mut ChaCha8Rng, count: usize) -> Vec<RobotSpec> {
    (0..count)
        .map(|_| {
            RobotSpec::new(
                rng.random_range(0.01..0.1),
                rng.random_range(0.05..0.95),
                Point2::new(0.0, 0.0),
            )
        })
        .collect()
}

pub fn ground(rng: &mut ChaCha8Rng, p: usize, q: usize, horizon: usize, robot_count: usize) -> GroundSet {
    let grid = GridSpec::new(p, q, 200.0, 200.0).unwrap();
    build_ground_set(&grid, horizon, &robots(rng, robot_count), &TravelCost).unwrap()
}

/// Random ground set with a GP posterior covariance over it.
pub fn random_problem(
    seed: u64,
    dims: (usize, usize, usize, usize),
    constraints: ConstraintSystem,
) -> ProblemInstance {
    let mut rng = rng(seed);
    let (p, q, t, r) = dims;
    let g = ground(&mut rng, p, q, t, r);
    let kernel = random_kernel(&mut rng);
    let model = GpModel::fit(kernel, random_training(&mut rng, 12, t)).unwrap();
    let cov = ground_covariance(&model, &g).unwrap();
    ProblemInstance::new(g, &cov, constraints).unwrap()
}

pub fn covariance_of(problem_seed: u64, dims: (usize, usize, usize, usize)) -> (GroundSet, PosteriorCov) {
    let mut rng = rng(problem_seed);
    let (p, q, t, r) = dims;
    let g = ground(&mut rng, p, q, t, r);
    let kernel = random_kernel(&mut rng);
    let model = GpModel::fit(kernel, random_training(&mut rng, 12, t)).unwrap();
    let cov = ground_covariance(&model, &g).unwrap();
    (g, cov)
}

/// Every subset of `0..n` as sorted index lists.
pub fn power_set(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n).map(move |mask| (0..n).filter(|b| mask & (1 << b) != 0).collect())
}

pub fn deployment(idx: &[usize]) -> DeploymentSet {
    DeploymentSet::from_indices(idx.iter().copied())
}

pub fn random_inputs(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<Input> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(0.0..200.0),
                rng.random_range(0.0..200.0),
                rng.random_range(0.0..8.0),
            ]
        })
        .collect()
}

/// Posterior by explicit elimination: `m + K*x A^-1 (y - m)` and
/// `K** - K*x A^-1 Kx*`, with `A = Kxx + N`.
pub fn reference_posterior(k: &KernelParams, train: &[Input], y: &[f64], noise: &[f64], test: &[Input]) -> (Vec<f64>, Dense) {
    let n = train.len();
    let m0 = y.iter().sum::<f64>() / n as f64;
    let a: Dense = (0..n)
        .map(|i| (0..n).map(|j| se(&train[i], &train[j], k) + if i == j { noise[i] } else { 0.0 }).collect())
        .collect();
    let kx: Dense = (0..n).map(|i| test.iter().map(|t| se(&train[i], t, k)).collect()).collect();
    let resid: Dense = y.iter().map(|v| vec![v - m0]).collect();
    let alpha = solve_ge(&a, &resid);
    let w = solve_ge(&a, &kx);
    let m = test.len();
    let mean = (0..m).map(|j| m0 + (0..n).map(|i| kx[i][j] * alpha[i][0]).sum::<f64>()).collect();
    let cov = (0..m)
        .map(|p| {
            (0..m)
                .map(|q| se(&test[p], &test[q], k) - (0..n).map(|i| kx[i][p] * w[i][q]).sum::<f64>())
                .collect()
        })
        .collect();
    (mean, cov)
}
