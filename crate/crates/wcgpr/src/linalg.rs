//! Shared dense linear-algebra helpers: jittered Cholesky factorizations and
//! eigenvalue computations for Hermitian matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Diagonal jitter escalation applied when a Cholesky factorization of a
/// nominally PSD matrix fails. Each delta is multiplied by the mean of the
/// matrix diagonal before being added.
#[derive(Debug, Clone)]
pub struct JitterPolicy {
    deltas: Vec<f64>,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            deltas: vec![1e-12, 1e-10, 1e-8],
        }
    }
}

impl JitterPolicy {
    /// No jitter: a single factorization attempt on the matrix as given.
    pub fn none() -> Self {
        JitterPolicy { deltas: Vec::new() }
    }

    pub fn with_deltas(deltas: Vec<f64>) -> Self {
        JitterPolicy { deltas }
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }
}

/// Cholesky of a real symmetric PSD matrix with jitter escalation.
pub fn sym_cholesky(m: &DMatrix<f64>, policy: &JitterPolicy) -> Result<Cholesky<f64, Dyn>> {
    if !m.is_square() {
        return Err(Error::structure(format!(
            "cholesky requires a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol);
    }
    let mean_diag = mean_diagonal(m.diagonal().as_slice());
    for &delta in &policy.deltas {
        let mut jittered = m.clone();
        for i in 0..m.nrows() {
            jittered[(i, i)] += delta * mean_diag;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(chol);
        }
    }
    Err(Error::singular(format!(
        "real symmetric factorization failed after {} jitter attempts",
        policy.deltas.len()
    )))
}

/// Cholesky of a complex Hermitian PSD matrix with jitter escalation.
pub fn herm_cholesky(
    m: &DMatrix<Complex64>,
    policy: &JitterPolicy,
) -> Result<Cholesky<Complex64, Dyn>> {
    if !m.is_square() {
        return Err(Error::structure(format!(
            "cholesky requires a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol);
    }
    let diag: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
    let mean_diag = mean_diagonal(&diag);
    for &delta in &policy.deltas {
        let mut jittered = m.clone();
        for i in 0..m.nrows() {
            jittered[(i, i)] += Complex64::new(delta * mean_diag, 0.0);
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(chol);
        }
    }
    Err(Error::singular(format!(
        "hermitian factorization failed after {} jitter attempts",
        policy.deltas.len()
    )))
}

fn mean_diagonal(diag: &[f64]) -> f64 {
    if diag.is_empty() {
        return 1.0;
    }
    let mean = diag.iter().sum::<f64>() / diag.len() as f64;
    if mean.abs() > 0.0 {
        mean.abs()
    } else {
        1.0
    }
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut vals: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    DVector::from_vec(vals)
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
///
/// Computed through the real embedding [[Re M, -Im M], [Im M, Re M]], whose
/// spectrum is that of M with every eigenvalue doubled in multiplicity; the
/// duplicates are dropped by taking every other sorted value.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> DVector<f64> {
    let n = m.nrows();
    if n == 0 {
        return DVector::zeros(0);
    }
    let mut embed = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            embed[(i, j)] = z.re;
            embed[(n + i, n + j)] = z.re;
            embed[(i, n + j)] = -z.im;
            embed[(n + i, j)] = z.im;
        }
    }
    let all = sym_eigenvalues(&embed);
    DVector::from_fn(n, |i, _| all[2 * i])
}
