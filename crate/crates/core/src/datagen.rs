//! Seeded Gaussian-process data generation for the simulation scenarios.
//!
//! Latent curves live on an equispaced grid over the domain. Every random
//! quantity is drawn from its own ChaCha stream: the master seed keys the
//! generator and the stream id is
//!
//! ```text
//! stream = replicate << 32 | role << 24 | index
//! ```
//!
//! where `role` distinguishes the coefficient surface, the latent x curves,
//! x observations and y observations, and `index` is the subject (or
//! coefficient column). Output is therefore independent of evaluation order
//! and thread count.

use nalgebra::Cholesky;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::Domain;
use crate::error::{Error, Result};
use crate::functionalize::LongitudinalSample;
use crate::linalg::Matrix;

/// Squared-exponential kernel hyperparameters `θ² exp(-d²/h²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpParams {
    pub theta: f64,
    pub h: f64,
}

impl GpParams {
    pub fn new(theta: f64, h: f64) -> Result<Self> {
        let p = GpParams { theta, h };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0 && self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Config(format!(
                "GP parameters must be positive and finite, got theta={} h={}",
                self.theta, self.h
            )));
        }
        Ok(())
    }
}

pub fn rbf_kernel(t1: f64, t2: f64, p: GpParams) -> f64 {
    let d = t1 - t2;
    p.theta * p.theta * (-(d * d) / (p.h * p.h)).exp()
}

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;

/// Cholesky factor of a GP covariance on a fixed grid, reusable across draws.
#[derive(Debug, Clone)]
pub struct GpSampler {
    lower: Matrix,
    jitter: f64,
}

impl GpSampler {
    /// Factorises `Σ + jitter·I`, starting at `1e-8 θ²` and growing tenfold up
    /// to `1e-4 θ²` until the factorisation succeeds.
    pub fn new(grid: &[f64], p: GpParams) -> Result<Self> {
        p.validate()?;
        if grid.is_empty() {
            return Err(Error::invalid("GP grid is empty"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("GP grid must be finite and strictly increasing"));
        }
        let n = grid.len();
        let cov = Matrix::from_fn(n, n, |i, j| rbf_kernel(grid[i], grid[j], p));
        let scale = p.theta * p.theta;
        let mut rel = JITTER_START;
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            let jitter = rel * scale;
            let mut m = cov.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                return Ok(GpSampler {
                    lower: chol.unpack(),
                    jitter,
                });
            }
            rel *= 10.0;
        }
        Err(Error::Numerical(format!(
            "GP covariance on {n} points not factorisable with jitter up to {JITTER_MAX}·θ²"
        )))
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.lower.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.nrows() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.lower.nrows();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (0..n)
            .map(|i| {
                let row = self.lower.row(i);
                (0..=i).map(|j| row[j] * z[j]).sum()
            })
            .collect()
    }
}

/// One draw from the zero-mean GP on `grid`.
pub fn sample_gp<R: Rng + ?Sized>(grid: &[f64], p: GpParams, rng: &mut R) -> Result<Vec<f64>> {
    Ok(GpSampler::new(grid, p)?.sample(rng))
}

/// Trapezoid rule on a (not necessarily uniform) grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// Scalar response, many observation points, varying `K` against `N`.
    A,
    /// Scalar response, few observation points.
    B,
    /// Functional response, varying the response basis `K₂`.
    C,
    /// Functional response, varying the predictor basis `K₁`.
    D,
    #[serde(rename = "fig1-demo")]
    Fig1Demo,
}

impl ScenarioKind {
    pub fn is_functional_response(self) -> bool {
        matches!(self, ScenarioKind::C | ScenarioKind::D)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Subtract the pointwise mean over all generated curves.
    CrossSample,
    /// Subtract each curve's own average over the domain.
    PerCurve,
    None,
}

/// How observation times are drawn within a replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeSampling {
    /// One draw of `M` times shared by every subject (and one draw of `M₂`
    /// response times).
    Shared,
    /// A fresh draw for each subject.
    PerSubject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub n_train: usize,
    pub n_test: usize,
    /// Observation points per predictor curve.
    pub m: usize,
    /// Observation points per response curve (C/D only).
    pub m2: usize,
    /// Predictor basis size held fixed while `K₂` varies (C).
    pub k1_fixed: usize,
    /// Response basis size held fixed while `K₁` varies (D).
    pub k2_fixed: usize,
    pub gp_x: GpParams,
    pub gp_beta: GpParams,
    pub noise_sd: f64,
    pub latent_grid_size: usize,
    /// Grid over the response domain on which `β(s, t)` columns are drawn.
    pub response_grid_size: usize,
    pub domain: Domain,
    pub centering: Centering,
    pub time_sampling: TimeSampling,
}

impl ScenarioConfig {
    pub fn defaults(scenario: ScenarioKind) -> Self {
        let base = ScenarioConfig {
            scenario,
            n_train: 10,
            n_test: 150,
            m: 75,
            m2: 75,
            k1_fixed: 10,
            k2_fixed: 10,
            gp_x: GpParams { theta: 10.0, h: 10.0 },
            gp_beta: GpParams { theta: 15.0, h: 10.0 },
            noise_sd: 1.0,
            latent_grid_size: 1001,
            response_grid_size: 101,
            domain: Domain { start: 0.0, end: 100.0 },
            centering: Centering::CrossSample,
            time_sampling: TimeSampling::Shared,
        };
        match scenario {
            ScenarioKind::A | ScenarioKind::D => base,
            ScenarioKind::B => ScenarioConfig { n_train: 50, m: 10, ..base },
            ScenarioKind::C => ScenarioConfig { n_train: 50, m2: 5, ..base },
            ScenarioKind::Fig1Demo => ScenarioConfig {
                n_train: 1,
                n_test: 0,
                m: 15,
                centering: Centering::None,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        Domain::new(self.domain.start, self.domain.end).map_err(|e| Error::Config(e.to_string()))?;
        self.gp_x.validate()?;
        self.gp_beta.validate()?;
        if self.n_train == 0 {
            return cfg("n_train must be positive".into());
        }
        if self.n_test == 0 && self.scenario != ScenarioKind::Fig1Demo {
            return cfg("n_test must be positive".into());
        }
        if self.m == 0 || self.latent_grid_size < 2 {
            return cfg("m and latent_grid_size must be positive (grid needs 2 points)".into());
        }
        if self.m > self.latent_grid_size {
            return cfg(format!(
                "m = {} exceeds latent_grid_size = {}",
                self.m, self.latent_grid_size
            ));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return cfg(format!("noise_sd must be finite and >= 0, got {}", self.noise_sd));
        }
        if self.scenario.is_functional_response() {
            if self.m2 == 0 || self.response_grid_size < 2 {
                return cfg("m2 and response_grid_size must be positive".into());
            }
            if self.m2 > self.response_grid_size {
                return cfg(format!(
                    "m2 = {} exceeds response_grid_size = {}",
                    self.m2, self.response_grid_size
                ));
            }
            if self.k1_fixed < 2 || self.k2_fixed < 2 {
                return cfg("fixed basis sizes must be at least 2".into());
            }
        }
        Ok(())
    }

    pub fn latent_grid(&self) -> Vec<f64> {
        self.domain.grid(self.latent_grid_size)
    }

    pub fn response_grid(&self) -> Vec<f64> {
        self.domain.grid(self.response_grid_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Scalar(f64),
    Curve(LongitudinalSample),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub x: LongitudinalSample,
    /// Observed (noisy) response.
    pub response: Response,
    /// Noiseless response: the true scalar, or the true curve at the observed
    /// response times. Absent for real data.
    pub signal: Option<Response>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Subject>,
    pub test: Vec<Subject>,
    pub domain: Domain,
    /// Domain of the response curves (equal to `domain` for simulations).
    pub response_domain: Domain,
}

/// Latent quantities behind a generated dataset; kept for checks.
#[derive(Debug, Clone)]
pub struct Latent {
    pub grid: Vec<f64>,
    /// Centered latent predictor curves, train subjects first.
    pub x_curves: Vec<Vec<f64>>,
    /// One column for scalar response, one per response-grid point otherwise.
    pub beta: Vec<Vec<f64>>,
    pub response_grid: Vec<f64>,
}

/// Stream roles for [`stream_rng`].
pub mod role {
    pub const BETA: u64 = 0;
    pub const X_CURVE: u64 = 1;
    pub const X_OBS: u64 = 2;
    pub const Y_OBS: u64 = 3;
    /// Cross-validation fold assignment.
    pub const FOLDS: u64 = 4;
    /// Train/test split of real data.
    pub const SPLIT: u64 = 5;
    /// Shared observation times (index 0 for x, 1 for y).
    pub const TIMES: u64 = 6;
}

/// Independent stream for `(replicate, role, index)` under a master seed.
pub fn stream_rng(seed: u64, replicate: u64, role: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 32) | (role << 24) | (index & 0xff_ffff));
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Generator with GP factors prepared once for a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioGenerator {
    cfg: ScenarioConfig,
    grid: Vec<f64>,
    x_sampler: GpSampler,
    beta_sampler: GpSampler,
}

impl ScenarioGenerator {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.latent_grid();
        let x_sampler = GpSampler::new(&grid, cfg.gp_x)?;
        let beta_sampler = if cfg.gp_beta == cfg.gp_x {
            x_sampler.clone()
        } else {
            GpSampler::new(&grid, cfg.gp_beta)?
        };
        Ok(ScenarioGenerator {
            cfg,
            grid,
            x_sampler,
            beta_sampler,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn generate(&self, seed: u64, replicate: u64) -> Result<Dataset> {
        Ok(self.generate_with_latent(seed, replicate)?.0)
    }

    pub fn generate_with_latent(&self, seed: u64, replicate: u64) -> Result<(Dataset, Latent)> {
        let cfg = &self.cfg;
        if cfg.scenario == ScenarioKind::Fig1Demo {
            return Err(Error::Config(
                "fig1-demo produces a single curve; use gen_fig1_demo".into(),
            ));
        }
        let total = cfg.n_train + cfg.n_test;
        let g = self.grid.len();

        let mut x_curves: Vec<Vec<f64>> = (0..total)
            .map(|i| {
                self.x_sampler
                    .sample(&mut stream_rng(seed, replicate, role::X_CURVE, i as u64))
            })
            .collect();
        center(&mut x_curves, &self.grid, cfg.centering);

        let response_grid = if cfg.scenario.is_functional_response() {
            cfg.response_grid()
        } else {
            Vec::new()
        };
        let beta_columns = response_grid.len().max(1);
        let beta: Vec<Vec<f64>> = (0..beta_columns)
            .map(|j| {
                self.beta_sampler
                    .sample(&mut stream_rng(seed, replicate, role::BETA, j as u64))
            })
            .collect();

        let shared = |index: u64, len: usize, amount: usize| match cfg.time_sampling {
            TimeSampling::Shared => Some(sorted_sample(
                &mut stream_rng(seed, replicate, role::TIMES, index),
                len,
                amount,
            )),
            TimeSampling::PerSubject => None,
        };
        let x_times = shared(0, g, cfg.m);
        let y_times = if cfg.scenario.is_functional_response() {
            shared(1, response_grid.len(), cfg.m2)
        } else {
            None
        };

        let mut train = Vec::with_capacity(cfg.n_train);
        let mut test = Vec::with_capacity(cfg.n_test);
        let mut product = vec![0.0; g];
        for (i, curve) in x_curves.iter().enumerate() {
            let mut rng = stream_rng(seed, replicate, role::X_OBS, i as u64);
            let idx = match &x_times {
                Some(idx) => idx.clone(),
                None => sorted_sample(&mut rng, g, cfg.m),
            };
            let x = observe_at(&self.grid, curve, &idx, cfg.noise_sd, &mut rng)?;

            let mut integrate = |column: &[f64]| {
                for ((p, a), b) in product.iter_mut().zip(curve).zip(column) {
                    *p = a * b;
                }
                trapezoid(&self.grid, &product)
            };

            let mut yrng = stream_rng(seed, replicate, role::Y_OBS, i as u64);
            let (response, signal) = if cfg.scenario.is_functional_response() {
                let truth: Vec<f64> = beta.iter().map(|col| integrate(col)).collect();
                let idx = match &y_times {
                    Some(idx) => idx.clone(),
                    None => sorted_sample(&mut yrng, response_grid.len(), cfg.m2),
                };
                let times: Vec<f64> = idx.iter().map(|&j| response_grid[j]).collect();
                let clean: Vec<f64> = idx.iter().map(|&j| truth[j]).collect();
                let noisy: Vec<f64> = clean.iter().map(|v| v + cfg.noise_sd * normal(&mut yrng)).collect();
                (
                    Response::Curve(LongitudinalSample::new(times.clone(), noisy)?),
                    Response::Curve(LongitudinalSample::new(times, clean)?),
                )
            } else {
                let truth = integrate(&beta[0]);
                let noisy = truth + cfg.noise_sd * normal(&mut yrng);
                (Response::Scalar(noisy), Response::Scalar(truth))
            };

            let subject = Subject {
                x,
                response,
                signal: Some(signal),
            };
            if i < cfg.n_train {
                train.push(subject);
            } else {
                test.push(subject);
            }
        }

        let domain = cfg.domain;
        Ok((
            Dataset {
                train,
                test,
                domain,
                response_domain: domain,
            },
            Latent {
                grid: self.grid.clone(),
                x_curves,
                beta,
                response_grid,
            },
        ))
    }
}

/// Generates one replicate of a scenario.
pub fn gen_scenario(cfg: &ScenarioConfig, seed: u64, replicate: u64) -> Result<Dataset> {
    ScenarioGenerator::new(cfg.clone())?.generate(seed, replicate)
}

fn sorted_sample<R: Rng + ?Sized>(rng: &mut R, len: usize, amount: usize) -> Vec<usize> {
    let mut idx = sample_indices(rng, len, amount).into_vec();
    idx.sort_unstable();
    idx
}

/// `m` distinct grid points, values plus `N(0, noise_sd²)` noise.
fn observe<R: Rng + ?Sized>(
    grid: &[f64],
    curve: &[f64],
    m: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<LongitudinalSample> {
    let idx = sorted_sample(rng, grid.len(), m);
    observe_at(grid, curve, &idx, noise_sd, rng)
}

fn observe_at<R: Rng + ?Sized>(
    grid: &[f64],
    curve: &[f64],
    idx: &[usize],
    noise_sd: f64,
    rng: &mut R,
) -> Result<LongitudinalSample> {
    let times = idx.iter().map(|&j| grid[j]).collect();
    let values = idx.iter().map(|&j| curve[j] + noise_sd * normal(rng)).collect();
    LongitudinalSample::new(times, values)
}

fn center(curves: &mut [Vec<f64>], grid: &[f64], how: Centering) {
    match how {
        Centering::None => {}
        Centering::CrossSample => {
            if curves.is_empty() {
                return;
            }
            let n = curves.len() as f64;
            let mean: Vec<f64> = (0..grid.len())
                .map(|j| curves.iter().map(|c| c[j]).sum::<f64>() / n)
                .collect();
            for c in curves.iter_mut() {
                for (v, m) in c.iter_mut().zip(&mean) {
                    *v -= m;
                }
            }
        }
        Centering::PerCurve => {
            let width = grid[grid.len() - 1] - grid[0];
            for c in curves.iter_mut() {
                let avg = trapezoid(grid, c) / width;
                c.iter_mut().for_each(|v| *v -= avg);
            }
        }
    }
}

/// The single noisy curve used to illustrate double descent when fitting one
/// function.
#[derive(Debug, Clone)]
pub struct Fig1Demo {
    pub sample: LongitudinalSample,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub domain: Domain,
}

pub fn gen_fig1_demo(seed: u64) -> Result<Fig1Demo> {
    gen_fig1_demo_with(&ScenarioConfig::defaults(ScenarioKind::Fig1Demo), seed, 0)
}

pub fn gen_fig1_demo_with(cfg: &ScenarioConfig, seed: u64, replicate: u64) -> Result<Fig1Demo> {
    cfg.validate()?;
    let grid = cfg.latent_grid();
    let sampler = GpSampler::new(&grid, cfg.gp_x)?;
    let mut truth = sampler.sample(&mut stream_rng(seed, replicate, role::X_CURVE, 0));
    center(std::slice::from_mut(&mut truth), &grid, cfg.centering);
    let mut rng = stream_rng(seed, replicate, role::X_OBS, 0);
    let sample = observe(&grid, &truth, cfg.m, cfg.noise_sd, &mut rng)?;
    Ok(Fig1Demo {
        sample,
        grid,
        truth,
        domain: cfg.domain,
    })
}
