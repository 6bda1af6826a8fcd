//! Spatiotemporal Gaussian process and the mutual-information objective.
//!
//! The kernel is separable: a squared-exponential over 2D distance times a
//! squared-exponential over time. The ambient noise variance acts as a nugget
//! on the training Gram diagonal only. Ground-set elements carry their
//! robot's sensing noise on the diagonal of the posterior covariance.
//!
//! [`mutual_information`] evaluates `M(D) = H(D) + H(V \ D) - H(V)` directly
//! from log-determinants over the full ground set. [`InfoObjective`] is the
//! fast path used by the solver and the oracle: it keeps both the covariance
//! `S` and the precision `P = S^-1` of the ground set, so that
//!
//! ```text
//! M(D)       = 1/2 (log det S_DD + log det P_DD)
//! M({e} | D) = 1/2 log( Var(e | D) / Var(e | V \ (D + e)) )
//! Var(e | D) = S_ee - S_eD S_DD^-1 S_De
//! 1 / Var(e | V \ (D + e)) = P_ee - P_eD P_DD^-1 P_De
//! ```
//!
//! and every query touches only |D|-sized systems.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::groundset::{DeploymentSet, GroundSet};
use crate::linalg::{self, GrowingCholesky};

/// GP input: (x, y, t).
pub type Input = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelParams {
    pub spatial_variance: f64,
    pub spatial_length: f64,
    pub temporal_variance: f64,
    pub temporal_length: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(
        spatial_variance: f64,
        spatial_length: f64,
        temporal_variance: f64,
        temporal_length: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        let p = KernelParams {
            spatial_variance,
            spatial_length,
            temporal_variance,
            temporal_length,
            noise_variance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("spatial_variance", self.spatial_variance),
            ("spatial_length", self.spatial_length),
            ("temporal_variance", self.temporal_variance),
            ("temporal_length", self.temporal_length),
            ("noise_variance", self.noise_variance),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("kernel {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Noise-free separable covariance `k_p(p, p') * k_t(t, t')`.
    pub fn covariance(&self, a: &Input, b: &Input) -> f64 {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        let dt = a[2] - b[2];
        let spatial = self.spatial_variance
            * (-(dx * dx + dy * dy) / (2.0 * self.spatial_length * self.spatial_length)).exp();
        let temporal = self.temporal_variance
            * (-(dt * dt) / (2.0 * self.temporal_length * self.temporal_length)).exp();
        spatial * temporal
    }

    /// Prior variance of a noise-free input.
    pub fn signal_variance(&self) -> f64 {
        self.spatial_variance * self.temporal_variance
    }
}

/// `variance * exp(-d^2 / (2 length^2))`.
pub fn kernel_se(d: f64, variance: f64, length: f64) -> Result<f64> {
    if !(variance > 0.0 && length > 0.0) {
        return Err(Error::invalid(format!(
            "SE kernel needs positive variance and length-scale, got {variance}, {length}"
        )));
    }
    Ok(variance * (-(d * d) / (2.0 * length * length)).exp())
}

/// Separable kernel with the ambient noise added when `a` and `b` are the
/// same input point.
pub fn composite_kernel(a: &Input, b: &Input, params: &KernelParams) -> f64 {
    let k = params.covariance(a, b);
    if a == b {
        k + params.noise_variance
    } else {
        k
    }
}

/// Measurement noise of training samples.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleNoise {
    /// Every sample carries the kernel's ambient noise variance.
    Ambient,
    /// Explicit per-sample variances (may be zero for exact observations).
    PerSample(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Vec<Input>,
    pub outputs: Vec<f64>,
    pub noise: SampleNoise,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Input>, outputs: Vec<f64>, noise: SampleNoise) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::invalid(format!(
                "training set has {} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        if let SampleNoise::PerSample(v) = &noise {
            if v.len() != inputs.len() {
                return Err(Error::invalid("per-sample noise length mismatch"));
            }
            if v.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::invalid("per-sample noise must be nonnegative"));
            }
        }
        Ok(TrainingSet {
            inputs,
            outputs,
            noise,
        })
    }

    pub fn empty() -> Self {
        TrainingSet {
            inputs: Vec::new(),
            outputs: Vec::new(),
            noise: SampleNoise::Ambient,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn noise_at(&self, i: usize, params: &KernelParams) -> f64 {
        match &self.noise {
            SampleNoise::Ambient => params.noise_variance,
            SampleNoise::PerSample(v) => v[i],
        }
    }

    pub fn mean_output(&self) -> f64 {
        if self.outputs.is_empty() {
            0.0
        } else {
            self.outputs.iter().sum::<f64>() / self.outputs.len() as f64
        }
    }
}

/// A trained GP: hyperparameters, data, and the cached Gram factorization.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    training: TrainingSet,
    prior_mean: f64,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    pub fn fit(params: KernelParams, training: TrainingSet) -> Result<Self> {
        params.validate()?;
        let n = training.len();
        let prior_mean = training.mean_output();
        if n == 0 {
            return Ok(GpModel {
                params,
                training,
                prior_mean,
                chol: None,
                alpha: DVector::zeros(0),
                jitter: 0.0,
            });
        }
        let gram = training_gram(&params, &training);
        let (chol, jitter) = linalg::jittered_cholesky(&gram, "training Gram matrix")?;
        let centered = DVector::from_iterator(n, training.outputs.iter().map(|z| z - prior_mean));
        let alpha = chol.solve(&centered);
        Ok(GpModel {
            params,
            training,
            prior_mean,
            chol: Some(chol),
            alpha,
            jitter,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    /// Jitter that was needed to factor the training Gram matrix.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Noise-free posterior mean and covariance at `test`.
    pub fn posterior(&self, test: &[Input]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let m = test.len();
        let mut cov = DMatrix::from_fn(m, m, |i, j| self.params.covariance(&test[i], &test[j]));
        let mut mean = DVector::from_element(m, self.prior_mean);
        if let Some(chol) = &self.chol {
            let n = self.training.len();
            let cross = DMatrix::from_fn(n, m, |i, j| {
                self.params.covariance(&self.training.inputs[i], &test[j])
            });
            mean += cross.transpose() * &self.alpha;
            let mut v = cross;
            chol.l_dirty()
                .solve_lower_triangular_mut(&mut v)
                .then_some(())
                .ok_or_else(|| Error::numerical("posterior", "singular training factor"))?;
            cov -= v.transpose() * &v;
        }
        symmetrize(&mut cov);
        Ok((mean, cov))
    }

    /// Log marginal likelihood of the training outputs.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.training.len();
        let Some(chol) = &self.chol else {
            return 0.0;
        };
        let centered = DVector::from_iterator(
            n,
            self.training.outputs.iter().map(|z| z - self.prior_mean),
        );
        -0.5 * centered.dot(&self.alpha)
            - 0.5 * linalg::chol_logdet(chol)
            - 0.5 * n as f64 * (2.0 * PI).ln()
    }
}

fn training_gram(params: &KernelParams, training: &TrainingSet) -> DMatrix<f64> {
    let n = training.len();
    let mut gram = DMatrix::from_fn(n, n, |i, j| {
        params.covariance(&training.inputs[i], &training.inputs[j])
    });
    for i in 0..n {
        gram[(i, i)] += training.noise_at(i, params);
    }
    gram
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Picks the candidate with the highest log marginal likelihood. Ties keep
/// the earliest candidate.
pub fn fit_hyperparameters(train: &TrainingSet, grid: &[KernelParams]) -> Result<KernelParams> {
    if grid.is_empty() {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    if train.is_empty() {
        return Err(Error::invalid("cannot fit hyperparameters without training data"));
    }
    let mut best: Option<(f64, KernelParams)> = None;
    for cand in grid {
        let lml = GpModel::fit(*cand, train.clone())?.log_marginal_likelihood();
        if best.map_or(true, |(b, _)| lml > b) {
            best = Some((lml, *cand));
        }
    }
    Ok(best.map(|(_, p)| p).expect("grid is non-empty"))
}

/// Posterior covariance over ground-set elements with each element's sensing
/// noise on the diagonal.
#[derive(Debug, Clone)]
pub struct PosteriorCov {
    matrix: DMatrix<f64>,
}

impl PosteriorCov {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("covariance must be square"));
        }
        let n = matrix.nrows();
        for i in 0..n {
            if !(matrix[(i, i)] > 0.0) {
                return Err(Error::invalid(format!(
                    "covariance diagonal entry {i} is not positive: {}",
                    matrix[(i, i)]
                )));
            }
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::invalid(format!("covariance not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(PosteriorCov { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        linalg::principal(&self.matrix, idx)
    }
}

pub fn ground_covariance(model: &GpModel, ground: &GroundSet) -> Result<PosteriorCov> {
    let (_, mut cov) = model.posterior(&ground.inputs())?;
    for (i, e) in ground.elements().iter().enumerate() {
        cov[(i, i)] += e.noise_variance;
    }
    PosteriorCov::from_matrix(cov)
}

/// Differential entropy `1/2 log det(2 pi e S)` of a Gaussian with covariance
/// `cov`. The empty set has entropy 0.
pub fn entropy(cov: &DMatrix<f64>) -> Result<f64> {
    let k = cov.nrows();
    if k == 0 {
        return Ok(0.0);
    }
    let logdet = linalg::logdet_spd(cov, "entropy")?;
    Ok(0.5 * (k as f64 * (2.0 * PI * E).ln() + logdet))
}

/// `M(D) = H(D) + H(V \ D) - H(V)`, evaluated from full log-determinants.
pub fn mutual_information(cov: &PosteriorCov, d: &DeploymentSet) -> Result<f64> {
    let n = cov.len();
    if let Some(&last) = d.indices().last() {
        if last >= n {
            return Err(Error::invalid("deployment set index out of range"));
        }
    }
    if d.is_empty() || d.len() == n {
        return Ok(0.0);
    }
    let rest = d.complement(n);
    let h_d = entropy(&cov.submatrix(d.indices()))?;
    let h_rest = entropy(&cov.submatrix(rest.indices()))?;
    let h_all = entropy(cov.matrix())?;
    Ok(h_d + h_rest - h_all)
}

/// Covariance and precision of the ground set, for small-system MI queries.
#[derive(Debug, Clone)]
pub struct InfoObjective {
    sigma: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl InfoObjective {
    pub fn new(cov: &PosteriorCov) -> Result<Self> {
        let sigma = cov.matrix().clone();
        let precision = if sigma.nrows() == 0 {
            DMatrix::zeros(0, 0)
        } else {
            let (chol, _) = linalg::jittered_cholesky(&sigma, "ground-set covariance")?;
            let mut p = chol.inverse();
            symmetrize(&mut p);
            p
        };
        Ok(InfoObjective { sigma, precision })
    }

    pub fn len(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.nrows() == 0
    }

    pub fn selection(&self) -> Selection {
        Selection::default()
    }

    /// Selection state holding exactly `d`.
    pub fn selection_of(&self, d: &DeploymentSet) -> Selection {
        let mut sel = self.selection();
        for &e in d.indices() {
            let probe = self.probe(&sel, e);
            sel.push(e, probe);
        }
        sel
    }

    /// `M({e})`.
    pub fn singleton(&self, e: usize) -> f64 {
        0.5 * (self.sigma[(e, e)].ln() + self.precision[(e, e)].ln())
    }

    /// Marginal gain of `e` given the current selection, plus the solved rows
    /// needed to append `e` with [`Selection::push`].
    pub fn probe(&self, sel: &Selection, e: usize) -> Probe {
        let sigma_col = self.sigma.column(e);
        let prec_col = self.precision.column(e);
        let members = &sel.members;
        let mut sigma_row = Vec::with_capacity(members.len());
        let mut prec_row = Vec::with_capacity(members.len());
        let s_norm = sel.sigma.forward_solve(|j| sigma_col[members[j]], &mut sigma_row);
        let p_norm = sel.precision.forward_solve(|j| prec_col[members[j]], &mut prec_row);
        let var_given_selected = (self.sigma[(e, e)] - s_norm).max(f64::MIN_POSITIVE);
        let inv_var_given_rest = (self.precision[(e, e)] - p_norm).max(f64::MIN_POSITIVE);
        Probe {
            gain: 0.5 * (var_given_selected.ln() + inv_var_given_rest.ln()),
            sigma_row,
            prec_row,
            var_given_selected,
            inv_var_given_rest,
        }
    }

    pub fn gain(&self, sel: &Selection, e: usize) -> f64 {
        self.probe(sel, e).gain
    }

    /// `M(D)` via the small-system identity.
    pub fn value(&self, d: &DeploymentSet) -> f64 {
        self.selection_of(d).value()
    }
}

/// Output of [`InfoObjective::probe`].
#[derive(Debug, Clone)]
pub struct Probe {
    pub gain: f64,
    sigma_row: Vec<f64>,
    prec_row: Vec<f64>,
    var_given_selected: f64,
    inv_var_given_rest: f64,
}

/// Incremental conditioning state for a growing selection.
#[derive(Debug, Clone, Default)]
pub struct Selection {
    members: Vec<usize>,
    sigma: GrowingCholesky,
    precision: GrowingCholesky,
    value: f64,
    values: Vec<f64>,
}

impl Selection {
    pub fn push(&mut self, e: usize, probe: Probe) {
        self.sigma.push(&probe.sigma_row, probe.var_given_selected);
        self.precision.push(&probe.prec_row, probe.inv_var_given_rest);
        self.members.push(e);
        self.values.push(self.value);
        self.value += probe.gain;
    }

    pub fn pop(&mut self) -> Option<usize> {
        let e = self.members.pop()?;
        self.sigma.pop();
        self.precision.pop();
        self.value = self.values.pop().unwrap_or(0.0);
        Some(e)
    }

    pub fn clear(&mut self) {
        self.members.clear();
        self.sigma.clear();
        self.precision.clear();
        self.values.clear();
        self.value = 0.0;
    }

    /// Current `M(S)`, accumulated from marginal gains.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// `M(S)` recomputed from the factor diagonals.
    pub fn value_from_factors(&self) -> f64 {
        0.5 * (self.sigma.logdet() + self.precision.logdet())
    }

    /// Members in insertion order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn to_deployment(&self) -> DeploymentSet {
        DeploymentSet::from_indices(self.members.iter().copied())
    }
}

/// `M({e} | D)` from the two conditional variances. Errors if `e` is in `D`.
pub fn marginal_gain(obj: &InfoObjective, e: usize, d: &DeploymentSet) -> Result<f64> {
    if e >= obj.len() {
        return Err(Error::invalid(format!("element {e} out of range")));
    }
    if d.contains(e) {
        return Err(Error::invalid(format!("element {e} already in the deployment set")));
    }
    Ok(obj.gain(&obj.selection_of(d), e))
}
