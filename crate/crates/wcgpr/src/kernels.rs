//! Kernel/pseudo-kernel pairs over complex inputs, Gram-matrix construction,
//! validity checking, and the kernel pair induced by a widely linear filter
//! model.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::augmented::AugmentedMatrix;
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::synthesis::{FilterTaps, GridSpec, WidelyLinearFilterModel};

/// A set of m complex input vectors of common dimension d.
#[derive(Debug, Clone)]
pub struct ComplexInputSet {
    points: Vec<DVector<Complex64>>,
    dim: usize,
}

impl ComplexInputSet {
    pub fn new(points: Vec<DVector<Complex64>>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.len(),
            None => {
                return Err(Error::structure(
                    "cannot infer input dimension from an empty set; use ComplexInputSet::empty",
                ))
            }
        };
        if dim == 0 {
            return Err(Error::structure("input dimension must be at least 1"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::structure(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::structure(format!("point {i} has non-finite coordinates")));
            }
        }
        Ok(ComplexInputSet { points, dim })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::structure("input dimension must be at least 1"));
        }
        Ok(ComplexInputSet { points: Vec::new(), dim })
    }

    /// Scalar (d = 1) inputs.
    pub fn from_scalars(xs: &[Complex64]) -> Result<Self> {
        if xs.is_empty() {
            return Self::empty(1);
        }
        Self::new(xs.iter().map(|&z| DVector::from_vec(vec![z])).collect())
    }

    /// Scalar inputs taken from grid nodes at the given flat indices.
    pub fn from_grid_indices(grid: &GridSpec, indices: &[usize]) -> Result<Self> {
        let xs: Vec<Complex64> = indices
            .iter()
            .map(|&idx| {
                let (i, j) = grid.unflatten(idx);
                grid.node(i, j)
            })
            .collect();
        Self::from_scalars(&xs)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &DVector<Complex64> {
        &self.points[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DVector<Complex64>> {
        self.points.iter()
    }
}

pub type KernelFn = Arc<dyn Fn(&DVector<Complex64>, &DVector<Complex64>) -> Complex64 + Send + Sync>;

/// Human-readable parameter record for a kernel pair; serializes into the
/// experiment config format.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum KernelDescriptor {
    SquaredExponential {
        variance: f64,
        length_scale: f64,
        pseudo_coeff: Complex64,
    },
    FilterInduced {
        gamma: f64,
        amplitudes: [f64; 4],
        spacing: f64,
        normalize: bool,
    },
    Custom(String),
}

/// A covariance function k and a pseudo-covariance function k~ over complex
/// inputs. Immutable and shareable across threads.
#[derive(Clone)]
pub struct KernelPair {
    k: KernelFn,
    k_tilde: KernelFn,
    descriptor: KernelDescriptor,
}

impl std::fmt::Debug for KernelPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelPair")
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl KernelPair {
    pub fn from_fns(k: KernelFn, k_tilde: KernelFn, descriptor: KernelDescriptor) -> Self {
        KernelPair { k, k_tilde, descriptor }
    }

    /// Squared-exponential kernel `variance * exp(-|x - x'|^2 / length_scale^2)`
    /// with pseudo-kernel `pseudo_coeff * k`; valid for |pseudo_coeff| <= 1.
    pub fn squared_exponential(
        variance: f64,
        length_scale: f64,
        pseudo_coeff: Complex64,
    ) -> Result<Self> {
        if variance < 0.0 || length_scale <= 0.0 {
            return Err(Error::structure(
                "squared-exponential kernel needs variance >= 0 and length_scale > 0",
            ));
        }
        if pseudo_coeff.norm() > 1.0 + 1e-12 {
            return Err(Error::structure(format!(
                "|pseudo_coeff| must be <= 1 for joint validity, got {}",
                pseudo_coeff.norm()
            )));
        }
        let ls2 = length_scale * length_scale;
        let base = move |x: &DVector<Complex64>, y: &DVector<Complex64>| -> f64 {
            let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
            variance * (-d2 / ls2).exp()
        };
        let k = Arc::new(move |x: &DVector<Complex64>, y: &DVector<Complex64>| {
            Complex64::new(base(x, y), 0.0)
        }) as KernelFn;
        let kt = Arc::new(move |x: &DVector<Complex64>, y: &DVector<Complex64>| {
            let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
            pseudo_coeff * variance * (-d2 / ls2).exp()
        }) as KernelFn;
        Ok(KernelPair {
            k,
            k_tilde: kt,
            descriptor: KernelDescriptor::SquaredExponential {
                variance,
                length_scale,
                pseudo_coeff,
            },
        })
    }

    pub fn k(&self, x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
        (self.k)(x, y)
    }

    pub fn k_tilde(&self, x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
        (self.k_tilde)(x, y)
    }

    pub fn descriptor(&self) -> &KernelDescriptor {
        &self.descriptor
    }
}

/// Gram matrices K[i][l] = k(x_i, x'_l) and the matching pseudo-kernel matrix.
pub fn gram(
    kp: &KernelPair,
    x1: &ComplexInputSet,
    x2: &ComplexInputSet,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    if x1.dim() != x2.dim() {
        return Err(Error::structure(format!(
            "input dimension mismatch: {} vs {}",
            x1.dim(),
            x2.dim()
        )));
    }
    let (m, n) = (x1.len(), x2.len());
    let mut k = DMatrix::zeros(m, n);
    let mut kt = DMatrix::zeros(m, n);
    for i in 0..m {
        for l in 0..n {
            k[(i, l)] = kp.k(x1.point(i), x2.point(l));
            kt[(i, l)] = kp.k_tilde(x1.point(i), x2.point(l));
        }
    }
    Ok((k, kt))
}

/// The augmented Gram matrix with blocks (K, K~).
pub fn augmented_gram(
    kp: &KernelPair,
    x1: &ComplexInputSet,
    x2: &ComplexInputSet,
) -> Result<AugmentedMatrix> {
    let (k, kt) = gram(kp, x1, x2)?;
    AugmentedMatrix::from_blocks(k, kt)
}

/// Tabulated stationary correlation functions of the filter-induced kernel,
/// indexed by 2-D lag in grid cells with bilinear interpolation between cells.
struct LagTable {
    spacing: f64,
    /// Lags run over [-half, half] cells per axis.
    half: usize,
    k: DMatrix<Complex64>,
    kt: DMatrix<Complex64>,
}

impl LagTable {
    fn eval(table: &DMatrix<Complex64>, half: usize, spacing: f64, tau: Complex64) -> Complex64 {
        let gx = tau.re / spacing + half as f64;
        let gy = tau.im / spacing + half as f64;
        let side = 2 * half + 1;
        let get = |ix: i64, iy: i64| -> Complex64 {
            if ix < 0 || iy < 0 || ix >= side as i64 || iy >= side as i64 {
                Complex64::new(0.0, 0.0)
            } else {
                table[(ix as usize, iy as usize)]
            }
        };
        let x0 = gx.floor();
        let y0 = gy.floor();
        let fx = gx - x0;
        let fy = gy - y0;
        let (ix, iy) = (x0 as i64, y0 as i64);
        get(ix, iy) * ((1.0 - fx) * (1.0 - fy))
            + get(ix + 1, iy) * (fx * (1.0 - fy))
            + get(ix, iy + 1) * ((1.0 - fx) * fy)
            + get(ix + 1, iy + 1) * (fx * fy)
    }

    fn k_at(&self, tau: Complex64) -> Complex64 {
        Self::eval(&self.k, self.half, self.spacing, tau)
    }

    fn kt_at(&self, tau: Complex64) -> Complex64 {
        Self::eval(&self.kt, self.half, self.spacing, tau)
    }
}

/// 2-D cross-correlation of tap matrices: out(lag) = sum_u p(u) q(u - lag),
/// with q conjugated when `conjugate` is set. Linear (non-circular) boundary
/// handling; direct summation.
fn cross_correlation(
    p: &DMatrix<Complex64>,
    q: &DMatrix<Complex64>,
    conjugate: bool,
) -> DMatrix<Complex64> {
    let s = p.nrows() as i64;
    let half = s - 1;
    let side = (2 * half + 1) as usize;
    let mut out = DMatrix::zeros(side, side);
    for a in -half..=half {
        for b in -half..=half {
            let u_lo = a.max(0);
            let u_hi = (s + a).min(s);
            let v_lo = b.max(0);
            let v_hi = (s + b).min(s);
            let mut acc = Complex64::new(0.0, 0.0);
            for u in u_lo..u_hi {
                for v in v_lo..v_hi {
                    let qv = q[((u - a) as usize, (v - b) as usize)];
                    let qv = if conjugate { qv.conj() } else { qv };
                    acc += p[(u as usize, v as usize)] * qv;
                }
            }
            out[((a + half) as usize, (b + half) as usize)] = acc;
        }
    }
    out
}

/// The exact second-order functions of the process synthesized from a widely
/// linear filter model, as stationary functions of the lag `tau = x - x'`:
///
/// `k(tau)  = (h1 ** h1ᴴ)(tau) + (h2 ** h2ᴴ)(tau)`
/// `k~(tau) = (h1 ** h2ᵀ)(tau) + (h2 ** h1ᵀ)(tau)`
///
/// where `**` is discrete 2-D cross-correlation over the (Re x, Im x) lattice.
/// The returned kernel functions accept scalar (d = 1) inputs and interpolate
/// bilinearly between tabulated lags; lags outside the correlation support
/// evaluate to zero.
pub fn filter_induced_kernel(model: &WidelyLinearFilterModel, spacing: f64) -> Result<KernelPair> {
    let taps = FilterTaps::build(model, spacing)?;
    let k_raw = cross_correlation(&taps.h1, &taps.h1, true)
        + cross_correlation(&taps.h2, &taps.h2, true);
    let c12 = cross_correlation(&taps.h1, &taps.h2, false);
    let half = taps.h1.nrows() - 1;
    let side = 2 * half + 1;
    // k~(tau) = c12(tau) + c12(-tau); enforce the exact symmetries
    // k(-tau) = conj(k(tau)) and k~(-tau) = k~(tau) to kill rounding residue.
    let mut k = DMatrix::zeros(side, side);
    let mut kt = DMatrix::zeros(side, side);
    for a in 0..side {
        for b in 0..side {
            let (ra, rb) = (side - 1 - a, side - 1 - b);
            k[(a, b)] = 0.5 * (k_raw[(a, b)] + k_raw[(ra, rb)].conj());
            kt[(a, b)] = c12[(a, b)] + c12[(ra, rb)];
        }
    }
    let table = Arc::new(LagTable {
        spacing,
        half,
        k,
        kt,
    });
    let scalar_lag = |x: &DVector<Complex64>, y: &DVector<Complex64>| -> Complex64 {
        assert_eq!(x.len(), 1, "filter-induced kernel expects scalar (d = 1) inputs");
        assert_eq!(y.len(), 1, "filter-induced kernel expects scalar (d = 1) inputs");
        x[0] - y[0]
    };
    let k_fn = {
        let table = Arc::clone(&table);
        Arc::new(move |x: &DVector<Complex64>, y: &DVector<Complex64>| {
            table.k_at(scalar_lag(x, y))
        }) as KernelFn
    };
    let kt_fn = {
        let table = Arc::clone(&table);
        Arc::new(move |x: &DVector<Complex64>, y: &DVector<Complex64>| {
            table.kt_at(scalar_lag(x, y))
        }) as KernelFn
    };
    Ok(KernelPair::from_fns(
        k_fn,
        kt_fn,
        KernelDescriptor::FilterInduced {
            gamma: model.gamma,
            amplitudes: model.amplitudes,
            spacing,
            normalize: model.normalize,
        },
    ))
}

/// Result of checking a kernel pair on a finite input set.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KernelValidationReport {
    /// Max |K(i,j) - conj(K(j,i))| relative to the largest entry magnitude.
    pub hermitian_residual: f64,
    /// Max |K~(i,j) - K~(j,i)| relative to the largest entry magnitude.
    pub pseudo_symmetry_residual: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub tol: f64,
    pub pass: bool,
}

impl std::fmt::Display for KernelValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "kernel pair validation: {} (hermitian residual {:.3e}, pseudo symmetry residual {:.3e}, \
             augmented Gram eigenvalues in [{:.6e}, {:.6e}], tol {:.1e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.hermitian_residual,
            self.pseudo_symmetry_residual,
            self.min_eigenvalue,
            self.max_eigenvalue,
            self.tol
        )
    }
}

/// Check Hermitian symmetry of k, symmetry of k~, and positive
/// semidefiniteness of the materialized augmented Gram matrix on `x`.
pub fn validate_kernel_pair(
    kp: &KernelPair,
    x: &ComplexInputSet,
    tol: f64,
) -> Result<KernelValidationReport> {
    if x.is_empty() {
        return Err(Error::structure("validation needs at least one input point"));
    }
    let (k, kt) = gram(kp, x, x)?;
    let scale = k
        .iter()
        .chain(kt.iter())
        .map(|z| z.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let m = x.len();
    let mut herm = 0.0f64;
    let mut sym = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            herm = herm.max((k[(i, j)] - k[(j, i)].conj()).norm());
            sym = sym.max((kt[(i, j)] - kt[(j, i)]).norm());
        }
    }
    let herm = herm / scale;
    let sym = sym / scale;
    let aug = AugmentedMatrix::from_blocks(k, kt)?.materialize();
    let eigs = hermitian_eigenvalues(&aug);
    let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eig = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = herm < tol && sym < tol && min_eig >= -tol * max_eig.max(0.0).max(1e-300);
    Ok(KernelValidationReport {
        hermitian_residual: herm,
        pseudo_symmetry_residual: sym,
        min_eigenvalue: min_eig,
        max_eigenvalue: max_eig,
        tol,
        pass,
    })
}
