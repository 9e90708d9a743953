//! Composite (real-stacked) and augmented (conjugate-stacked) representations
//! of complex vectors and matrices, and solves against augmented covariance
//! matrices.
//!
//! The two representations are related by the fixed transform
//! `T = [[I, jI], [I, -jI]]` with `T Tᴴ = Tᴴ T = 2I`. Augmented matrices are
//! stored as their two generating blocks `A`, `B` (full matrix
//! `[[A, B], [B*, A*]]`), so the block-conjugate structure cannot be violated;
//! the dense 2n x 2m form is produced by an explicit [`AugmentedMatrix::materialize`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{sym_cholesky, JitterPolicy};

/// Default relative tolerance for structural checks.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// A real vector of length 2n: first n entries are real parts, last n are
/// imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeVector {
    data: DVector<f64>,
}

impl CompositeVector {
    pub fn new(data: DVector<f64>) -> Result<Self> {
        if !data.len().is_multiple_of(2) {
            return Err(Error::structure(format!(
                "composite vector length must be even, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::structure("composite vector has non-finite entries"));
        }
        Ok(CompositeVector { data })
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(data))
    }

    /// Stack real and imaginary parts of a complex vector.
    pub fn from_complex(z: &DVector<Complex64>) -> Self {
        let n = z.len();
        let mut data = DVector::zeros(2 * n);
        for i in 0..n {
            data[i] = z[i].re;
            data[n + i] = z[i].im;
        }
        CompositeVector { data }
    }

    /// Number of complex entries represented (half the storage length).
    pub fn half_len(&self) -> usize {
        self.data.len() / 2
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    /// The complex vector whose real/imaginary parts this vector stacks.
    pub fn to_complex(&self) -> DVector<Complex64> {
        let n = self.half_len();
        DVector::from_fn(n, |i, _| Complex64::new(self.data[i], self.data[n + i]))
    }
}

/// A complex vector of length 2n whose bottom half is the conjugate of the
/// top half. Only the top half is stored, making the invariant exact.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedVector {
    upper: DVector<Complex64>,
}

impl AugmentedVector {
    pub fn from_upper(upper: DVector<Complex64>) -> Self {
        AugmentedVector { upper }
    }

    /// Build from a full 2n-vector, checking the conjugate-stack invariant to
    /// `tol` relative to the vector's max magnitude.
    pub fn from_stacked(data: &DVector<Complex64>, tol: f64) -> Result<Self> {
        if !data.len().is_multiple_of(2) {
            return Err(Error::structure(format!(
                "augmented vector length must be even, got {}",
                data.len()
            )));
        }
        let n = data.len() / 2;
        let scale = data.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
        for i in 0..n {
            let residual = (data[n + i] - data[i].conj()).norm();
            if residual > tol * scale {
                return Err(Error::numerical(format!(
                    "conjugate-stack invariant violated at entry {i}: residual {residual:.3e}"
                )));
            }
        }
        Ok(AugmentedVector {
            upper: data.rows(0, n).into_owned(),
        })
    }

    pub fn upper(&self) -> &DVector<Complex64> {
        &self.upper
    }

    /// The full 2n-vector [z; z*].
    pub fn materialize(&self) -> DVector<Complex64> {
        let n = self.upper.len();
        let mut full = DVector::zeros(2 * n);
        for i in 0..n {
            full[i] = self.upper[i];
            full[n + i] = self.upper[i].conj();
        }
        full
    }
}

/// Apply T: map a composite vector to its augmented counterpart.
/// The top half is `v_real + j v_imag`.
pub fn to_augmented(v: &CompositeVector) -> AugmentedVector {
    let n = v.half_len();
    let data = v.data();
    AugmentedVector::from_upper(DVector::from_fn(n, |i, _| {
        Complex64::new(data[i], data[n + i])
    }))
}

/// Apply (1/2) Tᴴ: map an augmented vector back to composite form.
pub fn to_composite(z: &AugmentedVector) -> CompositeVector {
    CompositeVector::from_complex(z.upper())
}

/// A 2n x 2m complex matrix with the block-conjugate pattern
/// `[[A, B], [B*, A*]]`, stored as the generating blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMatrix {
    a: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
}

impl AugmentedMatrix {
    pub fn from_blocks(a: DMatrix<Complex64>, b: DMatrix<Complex64>) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::structure(format!(
                "block dimension mismatch: A is {}x{}, B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(AugmentedMatrix { a, b })
    }

    pub fn upper_left(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    pub fn upper_right(&self) -> &DMatrix<Complex64> {
        &self.b
    }

    /// Block dimensions (n, m): the full matrix is 2n x 2m.
    pub fn block_shape(&self) -> (usize, usize) {
        self.a.shape()
    }

    pub fn is_square(&self) -> bool {
        self.a.is_square()
    }

    /// Dense `[[A, B], [B*, A*]]`.
    pub fn materialize(&self) -> DMatrix<Complex64> {
        let (n, m) = self.a.shape();
        let mut full = DMatrix::zeros(2 * n, 2 * m);
        for i in 0..n {
            for j in 0..m {
                full[(i, j)] = self.a[(i, j)];
                full[(i, m + j)] = self.b[(i, j)];
                full[(n + i, j)] = self.b[(i, j)].conj();
                full[(n + i, m + j)] = self.a[(i, j)].conj();
            }
        }
        full
    }

    /// The real matrix (1/4) Tᴴ M T, in closed form:
    /// `(1/2) [[Re(A+B), -Im(A-B)], [Im(A+B), Re(A-B)]]`.
    ///
    /// For any blocks A, B the product is exactly real; no validity check is
    /// performed here. See [`AugmentedMatrix::composite_covariance`] for the
    /// checked covariance variant.
    pub fn composite_map(&self) -> DMatrix<f64> {
        let (n, m) = self.a.shape();
        let mut out = DMatrix::zeros(2 * n, 2 * m);
        for i in 0..n {
            for j in 0..m {
                let a = self.a[(i, j)];
                let b = self.b[(i, j)];
                out[(i, j)] = 0.5 * (a.re + b.re);
                out[(i, m + j)] = -0.5 * (a.im - b.im);
                out[(n + i, j)] = 0.5 * (a.im + b.im);
                out[(n + i, m + j)] = 0.5 * (a.re - b.re);
            }
        }
        out
    }

    /// Checked composite form of a square augmented covariance: verifies the
    /// materialization is Hermitian within `tol` (relative), i.e. A Hermitian
    /// and B symmetric, then returns the real symmetric composite matrix.
    pub fn composite_covariance(&self, tol: f64) -> Result<DMatrix<f64>> {
        if !self.is_square() {
            return Err(Error::structure(
                "composite covariance requires a square augmented matrix",
            ));
        }
        let n = self.a.nrows();
        let scale = self
            .a
            .iter()
            .chain(self.b.iter())
            .map(|z| z.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        for i in 0..n {
            for j in 0..n {
                let herm = (self.a[(i, j)] - self.a[(j, i)].conj()).norm();
                let sym = (self.b[(i, j)] - self.b[(j, i)]).norm();
                if herm > tol * scale || sym > tol * scale {
                    return Err(Error::numerical(format!(
                        "augmented covariance structure violated at ({i},{j}): \
                         hermitian residual {herm:.3e}, symmetry residual {sym:.3e}"
                    )));
                }
            }
        }
        // Symmetrize to remove rounding asymmetry from the closed form.
        let c = self.composite_map();
        Ok(0.5 * (&c + c.transpose()))
    }

    /// Inverse of [`composite_map`] up to the covariance scaling: computes
    /// T M Tᴴ for a real 2n x 2m matrix, returning the augmented blocks
    /// `A = (M11 + M22) + j (M21 - M12)`, `B = (M11 - M22) + j (M21 + M12)`.
    pub fn from_composite(m: &DMatrix<f64>) -> Result<Self> {
        if !m.nrows().is_multiple_of(2) || !m.ncols().is_multiple_of(2) {
            return Err(Error::structure(format!(
                "composite matrix dimensions must be even, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let (n, p) = (m.nrows() / 2, m.ncols() / 2);
        let mut a = DMatrix::zeros(n, p);
        let mut b = DMatrix::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                let m11 = m[(i, j)];
                let m12 = m[(i, p + j)];
                let m21 = m[(n + i, j)];
                let m22 = m[(n + i, p + j)];
                a[(i, j)] = Complex64::new(m11 + m22, m21 - m12);
                b[(i, j)] = Complex64::new(m11 - m22, m21 + m12);
            }
        }
        AugmentedMatrix::from_blocks(a, b)
    }
}

/// Solve M x = rhs for a square augmented covariance M.
///
/// The system is mapped to the real composite representation, where the matrix
/// is symmetric PSD and admits a Cholesky factorization (with the policy's
/// jitter escalation), and the solution is mapped back; the result satisfies
/// the conjugate-stack invariant by construction.
pub fn solve_augmented(
    m: &AugmentedMatrix,
    rhs: &AugmentedVector,
    policy: &JitterPolicy,
) -> Result<AugmentedVector> {
    if !m.is_square() {
        return Err(Error::structure("solve requires a square augmented matrix"));
    }
    let n = m.a.nrows();
    if rhs.upper().len() != n {
        return Err(Error::structure(format!(
            "rhs length {} does not match system size {}",
            rhs.upper().len(),
            n
        )));
    }
    let c_comp = m.composite_covariance(STRUCTURE_TOL)?;
    let chol = sym_cholesky(&c_comp, policy)?;
    // M T x_comp = T r_comp  =>  C_comp x_comp = r_comp / 2.
    let r_comp = to_composite(rhs);
    let x_comp = chol.solve(&(0.5 * r_comp.data()));
    Ok(to_augmented(&CompositeVector::new(x_comp)?))
}
