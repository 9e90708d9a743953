//! Sample-function generation for proper/improper complex Gaussian processes
//! by widely linear filtering of proper white noise, improper measurement
//! noise, and empirical second-order estimation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::NoiseModel;

/// Relative magnitude below which filter taps are dropped.
const TAP_TRUNCATION: f64 = 1e-14;

/// One axis of the evaluation grid: `count` equally spaced samples on
/// `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if count < 1 || !min.is_finite() || !max.is_finite() || max < min {
            return Err(Error::structure(format!(
                "invalid axis: [{min}, {max}] with {count} samples"
            )));
        }
        Ok(Axis { min, max, count })
    }

    pub fn spacing(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }
}

/// The 2-D grid over (Re x, Im x) on which processes are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub re: Axis,
    pub im: Axis,
}

impl GridSpec {
    pub fn square(min: f64, max: f64, count: usize) -> Result<Self> {
        let axis = Axis::new(min, max, count)?;
        Ok(GridSpec { re: axis, im: axis })
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re.node(i), self.im.node(j))
    }

    pub fn total(&self) -> usize {
        self.re.count * self.im.count
    }

    /// Flattened node index, real axis major.
    pub fn flat_index(&self, i: usize, j: usize) -> usize {
        i * self.im.count + j
    }

    pub fn unflatten(&self, idx: usize) -> (usize, usize) {
        (idx / self.im.count, idx % self.im.count)
    }

    /// Common spacing of both axes; errors if they differ or are degenerate.
    pub fn uniform_spacing(&self) -> Result<f64> {
        let dr = self.re.spacing();
        let di = self.im.spacing();
        if dr <= 0.0 || di <= 0.0 {
            return Err(Error::structure("grid axes must have at least 2 samples"));
        }
        if (dr - di).abs() > 1e-12 * dr.max(di) {
            return Err(Error::structure(format!(
                "grid spacings differ: {dr} vs {di}"
            )));
        }
        Ok(dr)
    }
}

/// Widely linear filter model: four real exponential profiles
/// `h(x) = v exp(-|x|^2 / gamma)` defining `h1 = h_r1 + j h_j1` and
/// `h2 = h_r2 + j h_j2`, driving the generator
/// `f = h1 * S + h2 * S*` with proper white unit-variance noise S.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WidelyLinearFilterModel {
    pub gamma: f64,
    /// Amplitudes (v_r1, v_j1, v_r2, v_j2).
    pub amplitudes: [f64; 4],
    pub grid: GridSpec,
    /// Scale each complex filter to unit discrete l2 norm.
    pub normalize: bool,
}

impl WidelyLinearFilterModel {
    pub fn new(gamma: f64, amplitudes: [f64; 4], grid: GridSpec, normalize: bool) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::structure(format!("gamma must be positive, got {gamma}")));
        }
        if amplitudes.iter().any(|v| !v.is_finite()) {
            return Err(Error::structure("filter amplitudes must be finite"));
        }
        Ok(WidelyLinearFilterModel {
            gamma,
            amplitudes,
            grid,
            normalize,
        })
    }

    /// True when the conjugate branch is identically zero (proper generator).
    pub fn is_proper(&self) -> bool {
        self.amplitudes[2] == 0.0 && self.amplitudes[3] == 0.0
    }
}

/// Exponential filter profile evaluated on a grid:
/// `taps[i][j] = v exp(-|x_ij|^2 / gamma)`.
pub fn exponential_filter_taps(v: f64, gamma: f64, grid: &GridSpec) -> Result<DMatrix<f64>> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::structure(format!("gamma must be positive, got {gamma}")));
    }
    Ok(DMatrix::from_fn(grid.re.count, grid.im.count, |i, j| {
        v * (-grid.node(i, j).norm_sqr() / gamma).exp()
    }))
}

/// Truncated complex filter taps on the centered lag lattice, shared by the
/// synthesizer and the induced-kernel derivation.
#[derive(Debug, Clone)]
pub struct FilterTaps {
    /// (2R+1) x (2R+1) taps; index (u, v) is lag ((u - R) d, (v - R) d).
    pub h1: DMatrix<Complex64>,
    pub h2: DMatrix<Complex64>,
    pub radius: usize,
    pub spacing: f64,
}

impl FilterTaps {
    pub fn build(model: &WidelyLinearFilterModel, spacing: f64) -> Result<Self> {
        if spacing <= 0.0 || !spacing.is_finite() {
            return Err(Error::structure(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        // Support radius where exp(-r^2/gamma) falls below the truncation level.
        let r_phys = (model.gamma * (1.0 / TAP_TRUNCATION).ln()).sqrt();
        let radius = ((r_phys / spacing).ceil() as usize).max(1);
        let half = radius as f64 * spacing;
        let lag_grid = GridSpec::square(-half, half, 2 * radius + 1)?;
        let g = exponential_filter_taps(1.0, model.gamma, &lag_grid)?;

        let [vr1, vj1, vr2, vj2] = model.amplitudes;
        let mut h1 = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
            Complex64::new(vr1 * g[(i, j)], vj1 * g[(i, j)])
        });
        let mut h2 = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
            Complex64::new(vr2 * g[(i, j)], vj2 * g[(i, j)])
        });
        if model.normalize {
            normalize_taps(&mut h1);
            normalize_taps(&mut h2);
        }
        Ok(FilterTaps {
            h1,
            h2,
            radius,
            spacing,
        })
    }

    pub fn norm_h1(&self) -> f64 {
        self.h1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_h2(&self) -> f64 {
        self.h2.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn normalize_taps(h: &mut DMatrix<Complex64>) {
    let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        *h /= Complex64::new(norm, 0.0);
    }
}

/// A sample function of the synthesized process on the grid.
#[derive(Debug, Clone)]
pub struct GridSampleFunction {
    values: DMatrix<Complex64>,
    grid: GridSpec,
    seed: u64,
}

impl GridSampleFunction {
    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[(i, j)]
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Values flattened in real-axis-major node order.
    pub fn flat(&self) -> DVector<Complex64> {
        let (nr, ni) = (self.grid.re.count, self.grid.im.count);
        DVector::from_fn(nr * ni, |idx, _| {
            let (i, j) = self.grid.unflatten(idx);
            self.values[(i, j)]
        })
    }

    /// CSV layout: one row per grid node, columns (re_x, im_x, re_f, im_f).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "re_x,im_x,re_f,im_f")?;
        for i in 0..self.grid.re.count {
            for j in 0..self.grid.im.count {
                let x = self.grid.node(i, j);
                let f = self.values[(i, j)];
                writeln!(w, "{},{},{},{}", x.re, x.im, f.re, f.im)?;
            }
        }
        Ok(())
    }
}

/// Draws sample functions of the widely linear filter model. The driving
/// noise field covers the grid padded by the filter radius, so the statistics
/// are stationary at every grid node.
pub struct ProcessSampler {
    taps: FilterTaps,
    grid: GridSpec,
}

impl ProcessSampler {
    pub fn new(model: &WidelyLinearFilterModel) -> Result<Self> {
        let spacing = model.grid.uniform_spacing()?;
        Ok(ProcessSampler {
            taps: FilterTaps::build(model, spacing)?,
            grid: model.grid,
        })
    }

    pub fn taps(&self) -> &FilterTaps {
        &self.taps
    }

    /// Proper white noise field, Re and Im each N(0, 1/2).
    fn draw_noise_field<R: Rng>(&self, rng: &mut R) -> DMatrix<Complex64> {
        let r = self.taps.radius;
        let (nr, ni) = (self.grid.re.count + 2 * r, self.grid.im.count + 2 * r);
        let scale = (0.5f64).sqrt();
        let mut field = DMatrix::zeros(nr, ni);
        for i in 0..nr {
            for j in 0..ni {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                field[(i, j)] = Complex64::new(re * scale, im * scale);
            }
        }
        field
    }

    fn node_value(&self, field: &DMatrix<Complex64>, i: usize, j: usize) -> Complex64 {
        let r = self.taps.radius;
        let side = 2 * r + 1;
        let mut acc = Complex64::new(0.0, 0.0);
        for u in 0..side {
            for v in 0..side {
                let s = field[(i + 2 * r - u, j + 2 * r - v)];
                acc += self.taps.h1[(u, v)] * s + self.taps.h2[(u, v)] * s.conj();
            }
        }
        acc
    }

    /// Full-grid draw.
    pub fn sample_grid<R: Rng>(&self, rng: &mut R) -> DMatrix<Complex64> {
        let field = self.draw_noise_field(rng);
        DMatrix::from_fn(self.grid.re.count, self.grid.im.count, |i, j| {
            self.node_value(&field, i, j)
        })
    }

    /// Draw evaluated only at the given (re, im) node indices; cheaper than a
    /// full grid when only a few values are needed (Monte-Carlo checks).
    pub fn sample_at<R: Rng>(&self, nodes: &[(usize, usize)], rng: &mut R) -> Vec<Complex64> {
        let field = self.draw_noise_field(rng);
        nodes
            .iter()
            .map(|&(i, j)| self.node_value(&field, i, j))
            .collect()
    }
}

/// Generate one sample function of the model's process; deterministic given
/// the seed.
pub fn generate_improper_gp(
    model: &WidelyLinearFilterModel,
    seed: u64,
) -> Result<GridSampleFunction> {
    let sampler = ProcessSampler::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(GridSampleFunction {
        values: sampler.sample_grid(&mut rng),
        grid: model.grid,
        seed,
    })
}

/// I.i.d. complex Gaussian noise with `E[e e*] = sigma2` and
/// `E[e e] = rho sigma2`, realized through the bivariate real distribution of
/// (Re e, Im e); deterministic given the seed.
pub fn generate_improper_noise(noise: &NoiseModel, n: usize, seed: u64) -> Result<DVector<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_improper_noise(noise, n, &mut rng)
}

/// As [`generate_improper_noise`] but drawing from a caller-owned stream.
pub fn draw_improper_noise<R: Rng>(
    noise: &NoiseModel,
    n: usize,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    let s2 = noise.sigma2;
    let rho = noise.rho;
    // Covariance of (Re e, Im e): [[s2(1+Re rho)/2, s2 Im rho /2],
    //                              [s2 Im rho /2,   s2(1-Re rho)/2]].
    let c11 = s2 * (1.0 + rho.re) / 2.0;
    let c12 = s2 * rho.im / 2.0;
    let c22 = s2 * (1.0 - rho.re) / 2.0;
    // Hand-rolled 2x2 Cholesky tolerating the PSD boundary |rho| = 1.
    let l11 = c11.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { c12 / l11 } else { 0.0 };
    let l22 = (c22 - l21 * l21).max(0.0).sqrt();
    Ok(DVector::from_fn(n, |_, _| {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        Complex64::new(l11 * g1, l21 * g1 + l22 * g2)
    }))
}

/// Empirical covariance and pseudo-covariance of a set of equal-length draws:
/// means of z zᴴ and z zᵀ.
pub fn empirical_second_order(
    draws: &[DVector<Complex64>],
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    if draws.len() < 2 {
        return Err(Error::structure(format!(
            "need at least 2 draws, got {}",
            draws.len()
        )));
    }
    let n = draws[0].len();
    if draws.iter().any(|d| d.len() != n) {
        return Err(Error::structure("draws have inconsistent lengths"));
    }
    let mut cov = DMatrix::<Complex64>::zeros(n, n);
    let mut pseudo = DMatrix::<Complex64>::zeros(n, n);
    for z in draws {
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += z[i] * z[j].conj();
                pseudo[(i, j)] += z[i] * z[j];
            }
        }
    }
    let scale = Complex64::new(1.0 / draws.len() as f64, 0.0);
    Ok((cov * scale, pseudo * scale))
}
