//! Dense factorization helpers shared by the GP and the information objective.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter tried in order before a factorization is declared failed.
pub const JITTER_SCHEDULE: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Largest jitter that may be added to a covariance diagonal.
pub const MAX_JITTER: f64 = 1e-6;

/// Cholesky factor of `m + jitter * I` for the smallest jitter in
/// [`JITTER_SCHEDULE`] that succeeds. Returns the factor and the jitter used.
pub fn jittered_cholesky(m: &DMatrix<f64>, context: &str) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for &jitter in &JITTER_SCHEDULE {
        let mut work = m.clone();
        if jitter > 0.0 {
            for i in 0..work.nrows() {
                work[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(work) {
            return Ok((chol, jitter));
        }
    }
    let min_diag = (0..m.nrows()).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min);
    Err(Error::numerical(
        context,
        format!(
            "matrix of order {} not positive definite after jitter {MAX_JITTER:e} (min diagonal {min_diag:e})",
            m.nrows()
        ),
    ))
}

/// log det from a Cholesky factor, summed over the triangular diagonal.
pub fn chol_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// log det of a symmetric positive (semi)definite matrix. Order 0 gives 0.
pub fn logdet_spd(m: &DMatrix<f64>, context: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let (chol, _) = jittered_cholesky(m, context)?;
    Ok(chol_logdet(&chol))
}

/// Principal submatrix `m[idx, idx]`.
pub fn principal(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Lower-triangular Cholesky factor grown one row at a time.
///
/// Row `k` holds `k + 1` entries in packed storage. Used to condition on a
/// small, changing subset of a large covariance without refactoring.
#[derive(Debug, Clone, Default)]
pub struct GrowingCholesky {
    packed: Vec<f64>,
    order: usize,
}

impl GrowingCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn row(&self, k: usize) -> &[f64] {
        let start = k * (k + 1) / 2;
        &self.packed[start..start + k + 1]
    }

    /// Solves `L v = b` into `out` and returns `v . v`.
    pub fn forward_solve(&self, b: impl Fn(usize) -> f64, out: &mut Vec<f64>) -> f64 {
        out.clear();
        let mut norm = 0.0;
        for j in 0..self.order {
            let row = self.row(j);
            let mut acc = b(j);
            for (l, v) in row[..j].iter().zip(out.iter()) {
                acc -= l * v;
            }
            let v = acc / row[j];
            norm += v * v;
            out.push(v);
        }
        norm
    }

    /// Appends a row given its solved off-diagonal part and the conditional
    /// variance (the squared new diagonal).
    pub fn push(&mut self, solved: &[f64], conditional_variance: f64) {
        debug_assert_eq!(solved.len(), self.order);
        self.packed.extend_from_slice(solved);
        self.packed.push(conditional_variance.max(f64::MIN_POSITIVE).sqrt());
        self.order += 1;
    }

    pub fn pop(&mut self) {
        if self.order > 0 {
            self.order -= 1;
            self.packed.truncate(self.order * (self.order + 1) / 2);
        }
    }

    pub fn clear(&mut self) {
        self.packed.clear();
        self.order = 0;
    }

    /// log det of `L L^T`.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.order).map(|k| self.row(k)[k].ln()).sum::<f64>()
    }
}
