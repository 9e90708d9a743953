//! Configuration-driven Monte-Carlo harness: synthesize an improper process
//! on a grid, corrupt randomly chosen training nodes with improper noise, fit
//! the widely and/or strict GP predictors with the filter-induced kernel pair,
//! and report MSE over the full grid.

use std::io::Write;
use std::path::PathBuf;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{NoiseModel, ProperCgprFit, WcgprFit};
use crate::kernels::{filter_induced_kernel, ComplexInputSet, KernelPair};
use crate::linalg::JitterPolicy;
use crate::synthesis::{generate_improper_gp, generate_improper_noise, GridSpec, WidelyLinearFilterModel};

/// Which predictor(s) a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorSelection {
    Widely,
    Proper,
    Both,
}

impl PredictorSelection {
    pub fn runs_widely(self) -> bool {
        matches!(self, PredictorSelection::Widely | PredictorSelection::Both)
    }

    pub fn runs_proper(self) -> bool {
        matches!(self, PredictorSelection::Proper | PredictorSelection::Both)
    }
}

/// Full description of an experiment. Every field has a default matching the
/// first numerical experiment (single-run MSE at n = 500 training samples).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Exponential filter width parameter.
    pub gamma: f64,
    /// (v_r1, v_j1, v_r2, v_j2): real/imaginary amplitudes of the two filters.
    pub amplitudes: [f64; 4],
    pub grid: GridSpec,
    /// Normalize each complex filter to unit l2 norm.
    pub normalize: bool,
    /// Noise standard deviation (sqrt of E[|e|^2]).
    pub sigma: f64,
    /// Noise circularity coefficient, |rho| <= 1.
    pub rho: Complex64,
    /// Training-set size for single runs.
    pub n_train: usize,
    /// Training-set sizes for sweeps; strictly increasing when present.
    pub sweep: Option<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
    pub predictor: PredictorSelection,
    /// CSV destination; None writes to stdout in the CLI.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            gamma: 0.6,
            amplitudes: [4.0, 5.0, 1.0, -3.0],
            grid: GridSpec::square(-5.0, 5.0, 100).expect("valid default grid"),
            normalize: true,
            sigma: 0.0165,
            rho: Complex64::new(0.0, -0.8),
            n_train: 500,
            sweep: None,
            trials: 1,
            seed: 0,
            predictor: PredictorSelection::Widely,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn filter_model(&self) -> Result<WidelyLinearFilterModel> {
        WidelyLinearFilterModel::new(self.gamma, self.amplitudes, self.grid, self.normalize)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.sigma * self.sigma, self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        self.filter_model()?;
        self.noise_model()?;
        let total = self.grid.total();
        if self.trials < 1 {
            return Err(Error::structure("trial count must be >= 1"));
        }
        if self.n_train == 0 || self.n_train > total {
            return Err(Error::structure(format!(
                "training size {} must be in 1..={total}",
                self.n_train
            )));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return Err(Error::structure("sweep list must be nonempty"));
            }
            if !sweep.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::structure("sweep list must be strictly increasing"));
            }
            let last = *sweep.last().unwrap();
            if sweep[0] == 0 || last > total {
                return Err(Error::structure(format!(
                    "sweep sizes must be in 1..={total}"
                )));
            }
        }
        Ok(())
    }
}

/// One predictor's result on one trial.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub predictor: &'static str,
    pub n: usize,
    pub mse: f64,
    pub mse_db: f64,
}

/// Mean over trials for one (predictor, n) cell; dB of the mean mean-square.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SummaryRecord {
    pub predictor: &'static str,
    pub n: usize,
    pub trials: usize,
    pub mean_mse: f64,
    pub mean_mse_db: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<TrialRecord>,
    pub summaries: Vec<SummaryRecord>,
}

impl ExperimentReport {
    /// One CSV row per trial per predictor per sweep point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,predictor,n,mse,mse_db")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:.17e},{:.6}",
                r.trial, r.predictor, r.n, r.mse, r.mse_db
            )?;
        }
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::from("predictor        n   trials   mean_mse_db\n");
        for s in &self.summaries {
            out.push_str(&format!(
                "{:<10} {:>6} {:>8}   {:>9.3}\n",
                s.predictor, s.n, s.trials, s.mean_mse_db
            ));
        }
        out
    }
}

/// Mean-square floor below which dB values are clamped to -300.
const MSE_FLOOR: f64 = 1e-30;
const DB_FLOOR: f64 = -300.0;

/// 10 log10 of the mean squared error between two complex vectors.
pub fn mse_db(estimate: &DVector<Complex64>, truth: &DVector<Complex64>) -> Result<f64> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(Error::structure(format!(
            "mse_db needs equal nonempty lengths, got {} and {}",
            estimate.len(),
            truth.len()
        )));
    }
    Ok(db_of_mean_square(mean_square_error(estimate, truth)))
}

pub fn mean_square_error(estimate: &DVector<Complex64>, truth: &DVector<Complex64>) -> f64 {
    let n = estimate.len() as f64;
    estimate
        .iter()
        .zip(truth.iter())
        .map(|(e, t)| (e - t).norm_sqr())
        .sum::<f64>()
        / n
}

pub fn db_of_mean_square(ms: f64) -> f64 {
    if ms < MSE_FLOOR {
        DB_FLOOR
    } else {
        10.0 * ms.log10()
    }
}

/// Per-trial substream seeds: splitmix64 finalizer over (seed, trial, purpose)
/// so that each trial's process, noise and index draws are independent and
/// identical across predictors and sweep points.
fn substream_seed(seed: u64, trial: u64, purpose: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(trial.wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add(purpose.wrapping_mul(0x94d049bb133111eb))
        .wrapping_add(0x2545f4914f6cdd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

struct TrialData {
    x_train: ComplexInputSet,
    y: DVector<Complex64>,
    truth: DVector<Complex64>,
}

fn prepare_trial(
    config: &ExperimentConfig,
    model: &WidelyLinearFilterModel,
    noise: &NoiseModel,
    n: usize,
    trial: usize,
) -> Result<TrialData> {
    let f = generate_improper_gp(model, substream_seed(config.seed, trial as u64, 0))
        .map_err(|e| e.in_stage("process synthesis"))?;
    let truth = f.flat();
    let eps = generate_improper_noise(noise, n, substream_seed(config.seed, trial as u64, 1))
        .map_err(|e| e.in_stage("noise synthesis"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(config.seed, trial as u64, 2));
    let mut indices = rand::seq::index::sample(&mut rng, config.grid.total(), n).into_vec();
    indices.sort_unstable();
    let x_train = ComplexInputSet::from_grid_indices(&config.grid, &indices)
        .map_err(|e| e.in_stage("training selection"))?;
    let y = DVector::from_fn(n, |i, _| truth[indices[i]] + eps[i]);
    Ok(TrialData { x_train, y, truth })
}

fn run_at_size(
    config: &ExperimentConfig,
    kp: &KernelPair,
    n: usize,
    rows: &mut Vec<TrialRecord>,
) -> Result<()> {
    let model = config.filter_model()?;
    let noise = config.noise_model()?;
    let policy = JitterPolicy::default();
    let all_nodes: Vec<usize> = (0..config.grid.total()).collect();
    let xstar = ComplexInputSet::from_grid_indices(&config.grid, &all_nodes)?;

    for trial in 0..config.trials {
        let data = prepare_trial(config, &model, &noise, n, trial)?;
        if config.predictor.runs_widely() {
            let fit = WcgprFit::new(kp, &noise, &data.x_train, &data.y, &policy)
                .map_err(|e| e.in_stage("widely fit"))?;
            let mu = fit
                .predict_mean(&xstar)
                .map_err(|e| e.in_stage("widely prediction"))?;
            let ms = mean_square_error(&mu, &data.truth);
            rows.push(TrialRecord {
                trial,
                predictor: "widely",
                n,
                mse: ms,
                mse_db: db_of_mean_square(ms),
            });
        }
        if config.predictor.runs_proper() {
            let fit = ProperCgprFit::new(kp, noise.sigma2, &data.x_train, &data.y, &policy)
                .map_err(|e| e.in_stage("proper fit"))?;
            let mu = fit
                .predict_mean(&xstar)
                .map_err(|e| e.in_stage("proper prediction"))?;
            let ms = mean_square_error(&mu, &data.truth);
            rows.push(TrialRecord {
                trial,
                predictor: "proper",
                n,
                mse: ms,
                mse_db: db_of_mean_square(ms),
            });
        }
    }
    Ok(())
}

fn summarize(rows: &[TrialRecord]) -> Vec<SummaryRecord> {
    let mut cells: Vec<(&'static str, usize)> = Vec::new();
    for r in rows {
        if !cells.contains(&(r.predictor, r.n)) {
            cells.push((r.predictor, r.n));
        }
    }
    cells
        .into_iter()
        .map(|(predictor, n)| {
            let mses: Vec<f64> = rows
                .iter()
                .filter(|r| r.predictor == predictor && r.n == n)
                .map(|r| r.mse)
                .collect();
            let mean = mses.iter().sum::<f64>() / mses.len() as f64;
            SummaryRecord {
                predictor,
                n,
                trials: mses.len(),
                mean_mse: mean,
                mean_mse_db: db_of_mean_square(mean),
            }
        })
        .collect()
}

fn build_kernel(config: &ExperimentConfig) -> Result<KernelPair> {
    let model = config.filter_model()?;
    let spacing = config.grid.uniform_spacing()?;
    filter_induced_kernel(&model, spacing).map_err(|e| e.in_stage("kernel construction"))
}

/// Run all trials at the configured single training size.
pub fn run_single(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let kp = build_kernel(config)?;
    let mut rows = Vec::new();
    run_at_size(config, &kp, config.n_train, &mut rows)?;
    let summaries = summarize(&rows);
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        summaries,
    })
}

/// Run all trials at each size in the sweep list. Trials are paired: trial t
/// sees the same process, noise stream and index stream at every sweep point
/// and for both predictors.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| Error::structure("sweep run requires a sweep list"))?;
    let kp = build_kernel(config)?;
    let mut rows = Vec::new();
    for &n in &sweep {
        run_at_size(config, &kp, n, &mut rows)?;
    }
    let summaries = summarize(&rows);
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        summaries,
    })
}
