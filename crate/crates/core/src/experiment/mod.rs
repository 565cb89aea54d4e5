//! Sweeps over the number of basis functions.
//!
//! A sweep generates (or resamples) a dataset per replicate, functionalizes it
//! for every basis size on the grid, fits the regression and records the test
//! MSE. Each selection method then picks one basis size per replicate.
//!
//! Which basis varies depends on the source: the predictor basis for scalar
//! responses and scenario D, the response basis for scenario C, and the single
//! curve's basis for the curve-fitting demo.

mod config;
mod data;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{design_matrix, gram_matrix, BasisFamily, BasisSpec, Domain, GramMatrix};
use crate::datagen::{
    gen_fig1_demo_with, role, stream_rng, Dataset, Response, ScenarioConfig, ScenarioGenerator,
    ScenarioKind, Subject,
};
use crate::error::{Error, Result};
use crate::functionalize::{fit_coefficients, residual_sum_of_squares, FunctionalDatum, LongitudinalSample};
use crate::linalg::{Matrix, Vector};
use crate::regression::{
    fonf_fit, fonf_predict, sonf_design, sonf_fit, sonf_predict, FonFFit, SonFFit,
};
use crate::selection::{caic_select, cv_select, CaicCandidate, SelectionMethod, SelectionResult};

pub use config::{load_config, parse_config, ConfigFile, DataSection};
pub use data::{load_sonf_csv, write_sonf_csv, LoadedData};
pub use report::{
    emit_outputs, format_float, render_svg, summarize, BoxStats, KSummary, MethodSummary,
    OutputFiles, Summary,
};

/// Residual sums below this fraction of the total sum of squares count as an
/// exact fit, which makes the candidate ineligible for cAIC.
pub const EXACT_FIT_RATIO: f64 = 1e-12;

pub fn default_k_grid(kind: Option<ScenarioKind>) -> Vec<usize> {
    match kind {
        Some(ScenarioKind::Fig1Demo) => (4..=120).collect(),
        _ => (4..=50).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepSource {
    Scenario(ScenarioConfig),
    /// Real data: every subject sits in `data.train`; each replicate draws a
    /// fresh split.
    Data { data: Dataset, train_size: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub source: SweepSource,
    pub k_grid: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<SelectionMethod>,
    pub fixed_k: usize,
    pub folds: usize,
    /// Candidates for cross-validation; defaults to `k_grid`.
    pub cv_grid: Option<Vec<usize>>,
    /// Candidates for cAIC; defaults to every size from the family minimum up
    /// to the largest grid value.
    pub caic_grid: Option<Vec<usize>>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn scenario(cfg: ScenarioConfig) -> Self {
        let demo = cfg.scenario == ScenarioKind::Fig1Demo;
        SweepConfig {
            k_grid: default_k_grid(Some(cfg.scenario)),
            replicates: if demo { 1 } else { 50 },
            methods: if demo {
                Vec::new()
            } else {
                vec![SelectionMethod::Cv, SelectionMethod::Caic, SelectionMethod::Fixed]
            },
            source: SweepSource::Scenario(cfg),
            fixed_k: 50,
            folds: 5,
            cv_grid: None,
            caic_grid: None,
            seed: 0,
            threads: None,
            out_dir: None,
        }
    }

    pub fn data(data: Dataset, train_size: usize) -> Self {
        SweepConfig {
            source: SweepSource::Data { data, train_size },
            ..SweepConfig::scenario(ScenarioConfig::defaults(ScenarioKind::A))
        }
    }

    pub fn kind(&self) -> Option<ScenarioKind> {
        match &self.source {
            SweepSource::Scenario(c) => Some(c.scenario),
            SweepSource::Data { .. } => None,
        }
    }

    fn is_demo(&self) -> bool {
        self.kind() == Some(ScenarioKind::Fig1Demo)
    }

    /// Number of training subjects per replicate.
    pub fn n_train(&self) -> usize {
        match &self.source {
            SweepSource::Scenario(c) => c.n_train,
            SweepSource::Data { train_size, .. } => *train_size,
        }
    }

    pub fn cv_candidates(&self) -> Vec<usize> {
        self.cv_grid.clone().unwrap_or_else(|| self.k_grid.clone())
    }

    pub fn caic_candidates(&self) -> Vec<usize> {
        self.caic_grid.clone().unwrap_or_else(|| {
            let top = self.k_grid.last().copied().unwrap_or(0);
            (BasisFamily::NaturalCubicSpline.min_k()..=top).collect()
        })
    }

    /// Every basis size that has to be fitted: the grid, the candidates of the
    /// requested methods and the fixed size.
    fn evaluation_grid(&self) -> Vec<usize> {
        let mut all = self.k_grid.clone();
        for m in &self.methods {
            match m {
                SelectionMethod::Cv => all.extend(self.cv_candidates()),
                SelectionMethod::Caic => all.extend(self.caic_candidates()),
                SelectionMethod::Fixed => all.push(self.fixed_k),
            }
        }
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Vertical reference line for plots: the interpolation threshold.
    pub fn marker(&self) -> Marker {
        let (k, label) = match &self.source {
            SweepSource::Scenario(c) => match c.scenario {
                ScenarioKind::A | ScenarioKind::D => (c.n_train, "K = N"),
                ScenarioKind::B => (c.m, "K = M"),
                ScenarioKind::C => (c.n_train, "K2 = N"),
                ScenarioKind::Fig1Demo => (c.m, "K = M"),
            },
            SweepSource::Data { train_size, .. } => (*train_size, "K = N"),
        };
        Marker {
            k,
            label: label.to_string(),
        }
    }

    pub fn label(&self) -> String {
        match self.kind() {
            Some(ScenarioKind::Fig1Demo) => "fig1-demo".into(),
            Some(k) => format!("scenario {k:?}"),
            None => "data".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        let min_k = BasisFamily::NaturalCubicSpline.min_k();
        check_grid("k_grid", &self.k_grid, min_k)?;
        if let Some(g) = &self.cv_grid {
            check_grid("cv_grid", g, min_k)?;
        }
        if let Some(g) = &self.caic_grid {
            check_grid("caic_grid", g, min_k)?;
        }
        if self.replicates == 0 {
            return err("replicates must be at least 1".into());
        }
        if self.fixed_k < min_k {
            return err(format!("fixed_k must be at least {min_k}"));
        }
        if self.threads == Some(0) {
            return err("threads must be at least 1".into());
        }
        let mut seen = self.methods.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return err("methods must not repeat".into());
        }
        match &self.source {
            SweepSource::Scenario(c) => c.validate()?,
            SweepSource::Data { data, train_size } => {
                let n = data.train.len();
                if *train_size == 0 || *train_size >= n {
                    return err(format!(
                        "train_size must be between 1 and {} for {n} usable rows",
                        n.saturating_sub(1)
                    ));
                }
            }
        }
        if self.is_demo() && !self.methods.is_empty() {
            return err("selection methods do not apply to the curve-fitting demo".into());
        }
        if self.methods.contains(&SelectionMethod::Cv) {
            if self.folds < 2 {
                return err("folds must be at least 2".into());
            }
            if self.folds > self.n_train() {
                return err(format!(
                    "folds = {} exceeds the {} training subjects",
                    self.folds,
                    self.n_train()
                ));
            }
        }
        Ok(())
    }
}

fn check_grid(name: &str, grid: &[usize], min_k: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} must be strictly increasing")));
    }
    if grid[0] < min_k {
        return Err(Error::Config(format!("{name} values must be at least {min_k}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marker {
    pub k: usize,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseRecord {
    pub replicate: usize,
    pub k: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodRecord {
    pub replicate: usize,
    pub method: SelectionMethod,
    pub chosen_k: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub label: String,
    pub k_grid: Vec<usize>,
    pub marker: Marker,
    /// Sorted by replicate, then K.
    pub records: Vec<MseRecord>,
    /// Sorted by replicate, then method.
    pub methods: Vec<MethodRecord>,
}

impl SweepResult {
    /// MSE values at one K across replicates.
    pub fn mse_at(&self, k: usize) -> Vec<f64> {
        self.records.iter().filter(|r| r.k == k).map(|r| r.mse).collect()
    }

    pub fn method_records(&self, method: SelectionMethod) -> Vec<MethodRecord> {
        self.methods.iter().filter(|r| r.method == method).copied().collect()
    }
}

/// Mean squared prediction error of a scalar-on-function fit.
pub fn test_mse_sonf(fit: &SonFFit, x: &[FunctionalDatum], targets: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    if x.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} test predictors but {} targets",
            x.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (d, t) in x.iter().zip(targets) {
        total += (sonf_predict(fit, d)? - t).powi(2);
    }
    Ok(total / x.len() as f64)
}

/// Mean squared error of predicted response curves, pooled over every target
/// point of every subject.
pub fn test_mse_fonf(fit: &FonFFit, x: &[FunctionalDatum], targets: &[LongitudinalSample]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    if x.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} test predictors but {} targets",
            x.len(),
            targets.len()
        )));
    }
    let (mut total, mut count) = (0.0, 0usize);
    for (d, target) in x.iter().zip(targets) {
        let v = fonf_predict(fit, d)?;
        total += residual_sum_of_squares(&v, target)?;
        count += target.len();
    }
    Ok(total / count as f64)
}

/// Runs every replicate, in parallel on a pool of `cfg.threads` workers when
/// set. Output order does not depend on scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let engine = Engine::new(cfg)?;
    let run = || -> Result<Vec<ReplicateOutcome>> {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let out = engine.replicate(rep);
                log::debug!("replicate {rep} done");
                out
            })
            .collect()
    };
    let outcomes = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let mut records = Vec::with_capacity(cfg.replicates * cfg.k_grid.len());
    let mut methods = Vec::new();
    for (rep, out) in outcomes.into_iter().enumerate() {
        for &k in &cfg.k_grid {
            records.push(MseRecord {
                replicate: rep,
                k,
                mse: out.mse[&k],
            });
        }
        for sel in out.selections {
            methods.push(MethodRecord {
                replicate: rep,
                method: sel.method,
                chosen_k: sel.chosen_k,
                mse: out.mse[&sel.chosen_k],
            });
        }
    }
    methods.sort_by_key(|r| (r.replicate, r.method));
    Ok(SweepResult {
        label: cfg.label(),
        k_grid: cfg.k_grid.clone(),
        marker: cfg.marker(),
        records,
        methods,
    })
}

struct ReplicateOutcome {
    mse: BTreeMap<usize, f64>,
    selections: Vec<SelectionResult>,
}

/// Which basis the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    /// Single-curve fit against the latent truth.
    Demo,
    /// Scalar response, predictor basis varies.
    Scalar,
    /// Functional response, response basis varies with `k1` held fixed.
    VaryResponse { k1: usize },
    /// Functional response, predictor basis varies with `k2` held fixed.
    VaryPredictor { k2: usize },
}

struct Engine<'a> {
    cfg: &'a SweepConfig,
    layout: Layout,
    eval_ks: Vec<usize>,
    generator: Option<ScenarioGenerator>,
    x_grams: BTreeMap<usize, GramMatrix>,
    y_grams: BTreeMap<usize, GramMatrix>,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SweepConfig) -> Result<Self> {
        let eval_ks = cfg.evaluation_grid();
        let (layout, generator, domain, response_domain) = match &cfg.source {
            SweepSource::Scenario(c) => {
                let layout = match c.scenario {
                    ScenarioKind::Fig1Demo => Layout::Demo,
                    ScenarioKind::A | ScenarioKind::B => Layout::Scalar,
                    ScenarioKind::C => Layout::VaryResponse { k1: c.k1_fixed },
                    ScenarioKind::D => Layout::VaryPredictor { k2: c.k2_fixed },
                };
                let generator = match layout {
                    Layout::Demo => None,
                    _ => Some(ScenarioGenerator::new(c.clone())?),
                };
                (layout, generator, c.domain, c.domain)
            }
            SweepSource::Data { data, .. } => (Layout::Scalar, None, data.domain, data.response_domain),
        };
        let grams = |ks: &[usize], d: Domain| -> Result<BTreeMap<usize, GramMatrix>> {
            ks.iter()
                .map(|&k| Ok((k, gram_matrix(&BasisSpec::natural_spline(k, d)?)?)))
                .collect()
        };
        let (x_grams, y_grams) = match layout {
            Layout::Demo => (BTreeMap::new(), BTreeMap::new()),
            Layout::Scalar => (grams(&eval_ks, domain)?, BTreeMap::new()),
            Layout::VaryResponse { k1 } => (grams(&[k1], domain)?, grams(&eval_ks, response_domain)?),
            Layout::VaryPredictor { k2 } => (grams(&eval_ks, domain)?, grams(&[k2], response_domain)?),
        };
        Ok(Engine {
            cfg,
            layout,
            eval_ks,
            generator,
            x_grams,
            y_grams,
        })
    }

    fn replicate(&self, rep: usize) -> Result<ReplicateOutcome> {
        if self.layout == Layout::Demo {
            return self.demo_replicate(rep);
        }
        let data = self.dataset(rep)?;
        let problem = Problem::new(&data, self.cfg.kind().is_none())?;
        let cells = self
            .eval_ks
            .iter()
            .map(|&k| Ok((k, self.cell(&problem, k)?)))
            .collect::<Result<BTreeMap<usize, Cell>>>()?;

        let mut mse = BTreeMap::new();
        let mut caic = Vec::new();
        let caic_ks = self.cfg.caic_candidates();
        let all: Vec<usize> = (0..problem.n()).collect();
        for (&k, cell) in &cells {
            let model = cell.fit(&problem, &all)?;
            mse.insert(k, cell.test_mse(&problem, &model)?);
            if caic_ks.contains(&k) {
                caic.push(cell.caic_candidate(&problem, &model)?);
            }
        }

        let mut selections = Vec::with_capacity(self.cfg.methods.len());
        for method in &self.cfg.methods {
            selections.push(match method {
                SelectionMethod::Fixed => SelectionResult::fixed(self.cfg.fixed_k),
                SelectionMethod::Caic => caic_select(&caic)?,
                SelectionMethod::Cv => {
                    let seed = stream_rng(self.cfg.seed, rep as u64, role::FOLDS, 0).next_u64();
                    cv_select(
                        &self.cfg.cv_candidates(),
                        problem.n(),
                        self.cfg.folds,
                        seed,
                        |train, test, k| {
                            let cell = &cells[&k];
                            let model = cell.fit(&problem, train)?;
                            cell.holdout_loss(&problem, &model, test)
                        },
                    )?
                }
            });
        }
        Ok(ReplicateOutcome { mse, selections })
    }

    fn dataset(&self, rep: usize) -> Result<Dataset> {
        match &self.cfg.source {
            SweepSource::Scenario(_) => self
                .generator
                .as_ref()
                .expect("generator exists for regression scenarios")
                .generate(self.cfg.seed, rep as u64),
            SweepSource::Data { data, train_size } => {
                Ok(split_rows(data, *train_size, self.cfg.seed, rep as u64))
            }
        }
    }

    fn cell(&self, problem: &Problem, k: usize) -> Result<Cell<'_>> {
        let (kx, ky) = match self.layout {
            Layout::Scalar => (k, None),
            Layout::VaryResponse { k1 } => (k1, Some(k)),
            Layout::VaryPredictor { k2 } => (k, Some(k2)),
            Layout::Demo => unreachable!("demo replicates do not build cells"),
        };
        let gram_x = &self.x_grams[&kx];
        let spec_x = *gram_x.spec();
        let train_x = functionalize_all(problem.train.iter().map(|s| &s.x), &spec_x)?;
        let z = sonf_design(&train_x, gram_x)?;
        let test_x = functionalize_all(problem.test.iter().map(|s| &s.x), &spec_x)?;
        let response = match ky {
            None => None,
            Some(ky) => {
                let psi = &self.y_grams[&ky];
                let mut v = Matrix::zeros(problem.n(), ky);
                let mut rss = 0.0;
                for (i, y) in problem.train_curves()?.into_iter().enumerate() {
                    let d = fit_coefficients(y, psi.spec())?;
                    rss += residual_sum_of_squares(&d, y)?;
                    v.row_mut(i).copy_from(&d.coefficients().transpose());
                }
                Some(CurveCell { psi, v, rss })
            }
        };
        Ok(Cell {
            varied_k: k,
            gram_x,
            z,
            test_x,
            response,
            vary_response: matches!(self.layout, Layout::VaryResponse { .. }),
        })
    }

    fn demo_replicate(&self, rep: usize) -> Result<ReplicateOutcome> {
        let SweepSource::Scenario(c) = &self.cfg.source else {
            unreachable!("demo layout comes from a scenario");
        };
        let demo = gen_fig1_demo_with(c, self.cfg.seed, rep as u64)?;
        let mut mse = BTreeMap::new();
        for &k in &self.eval_ks {
            let spec = BasisSpec::natural_spline(k, demo.domain)?;
            let fit = fit_coefficients(&demo.sample, &spec)?;
            let fitted = design_matrix(&spec, &demo.grid)? * fit.coefficients();
            let err: f64 = fitted
                .iter()
                .zip(&demo.truth)
                .map(|(f, t)| (f - t).powi(2))
                .sum();
            mse.insert(k, err / demo.grid.len() as f64);
        }
        Ok(ReplicateOutcome {
            mse,
            selections: Vec::new(),
        })
    }
}

/// Seeded shuffle of the rows; the first `train_size` train, the rest test.
fn split_rows(data: &Dataset, train_size: usize, seed: u64, rep: u64) -> Dataset {
    let mut idx: Vec<usize> = (0..data.train.len()).collect();
    idx.shuffle(&mut stream_rng(seed, rep, role::SPLIT, 0));
    let pick = |ids: &[usize]| ids.iter().map(|&i| data.train[i].clone()).collect();
    Dataset {
        train: pick(&idx[..train_size]),
        test: pick(&idx[train_size..]),
        domain: data.domain,
        response_domain: data.response_domain,
    }
}

fn functionalize_all<'s>(
    samples: impl Iterator<Item = &'s LongitudinalSample>,
    spec: &BasisSpec,
) -> Result<Vec<FunctionalDatum>> {
    samples.map(|s| fit_coefficients(s, spec)).collect()
}

/// One replicate's subjects with the prediction targets resolved.
struct Problem<'d> {
    train: &'d [Subject],
    test: &'d [Subject],
    /// Observed scalar responses of the training subjects (scalar layouts).
    y: Option<Vector>,
    scalar_targets: Vec<f64>,
    curve_targets: Vec<LongitudinalSample>,
}

impl<'d> Problem<'d> {
    /// Simulations score against the noiseless signal, real data against the
    /// observed response.
    fn new(data: &'d Dataset, observed_targets: bool) -> Result<Self> {
        if data.train.is_empty() || data.test.is_empty() {
            return Err(Error::invalid("replicate needs training and test subjects"));
        }
        let target = |s: &'d Subject| -> Result<&'d Response> {
            if observed_targets {
                Ok(&s.response)
            } else {
                s.signal
                    .as_ref()
                    .ok_or_else(|| Error::invalid("simulated test subject lacks its signal"))
            }
        };
        let mut scalar_targets = Vec::new();
        let mut curve_targets = Vec::new();
        for s in &data.test {
            match target(s)? {
                Response::Scalar(v) => scalar_targets.push(*v),
                Response::Curve(c) => curve_targets.push(c.clone()),
            }
        }
        let y = data
            .train
            .iter()
            .map(|s| match s.response {
                Response::Scalar(v) => Some(v),
                Response::Curve(_) => None,
            })
            .collect::<Option<Vec<f64>>>()
            .map(Vector::from_vec);
        Ok(Problem {
            train: &data.train,
            test: &data.test,
            y,
            scalar_targets,
            curve_targets,
        })
    }

    fn n(&self) -> usize {
        self.train.len()
    }

    fn train_curves(&self) -> Result<Vec<&'d LongitudinalSample>> {
        self.train
            .iter()
            .map(|s| match &s.response {
                Response::Curve(c) => Ok(c),
                Response::Scalar(_) => Err(Error::invalid("expected functional responses")),
            })
            .collect()
    }

    fn scalar_y(&self) -> Result<&Vector> {
        self.y
            .as_ref()
            .ok_or_else(|| Error::invalid("expected scalar responses"))
    }
}

/// Everything needed to fit and score one basis size within a replicate.
struct Cell<'g> {
    varied_k: usize,
    gram_x: &'g GramMatrix,
    z: Matrix,
    test_x: Vec<FunctionalDatum>,
    response: Option<CurveCell<'g>>,
    vary_response: bool,
}

struct CurveCell<'g> {
    psi: &'g GramMatrix,
    /// Response coefficients of the training subjects, one row each.
    v: Matrix,
    /// Pooled residual of functionalizing the training responses.
    rss: f64,
}

enum Model {
    Scalar(Vector),
    Curve(Matrix),
}

fn select_rows(m: &Matrix, rows: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

impl Cell<'_> {
    fn fit(&self, problem: &Problem, rows: &[usize]) -> Result<Model> {
        let z = select_rows(&self.z, rows);
        match &self.response {
            None => {
                let y = problem.scalar_y()?;
                let y = Vector::from_fn(rows.len(), |i, _| y[rows[i]]);
                Ok(Model::Scalar(sonf_fit(&z, &y)?))
            }
            Some(r) => Ok(Model::Curve(fonf_fit(&z, &select_rows(&r.v, rows), r.psi)?)),
        }
    }

    fn test_mse(&self, problem: &Problem, model: &Model) -> Result<f64> {
        match (model, &self.response) {
            (Model::Scalar(b), None) => {
                let fit = SonFFit::new(self.gram_x.clone(), b.clone())?;
                test_mse_sonf(&fit, &self.test_x, &problem.scalar_targets)
            }
            (Model::Curve(b), Some(r)) => {
                let fit = FonFFit::new(self.gram_x.clone(), r.psi.clone(), b.clone())?;
                test_mse_fonf(&fit, &self.test_x, &problem.curve_targets)
            }
            _ => unreachable!("model kind follows the cell"),
        }
    }

    /// Mean squared error on held-out training subjects against their
    /// observed responses.
    fn holdout_loss(&self, problem: &Problem, model: &Model, rows: &[usize]) -> Result<f64> {
        let (mut total, mut count) = (0.0, 0usize);
        match (model, &self.response) {
            (Model::Scalar(b), None) => {
                let y = problem.scalar_y()?;
                for &i in rows {
                    total += (self.z.row(i).transpose().dot(b) - y[i]).powi(2);
                    count += 1;
                }
            }
            (Model::Curve(b), Some(r)) => {
                let curves = problem.train_curves()?;
                for &i in rows {
                    let v = b.tr_mul(&self.z.row(i).transpose());
                    let pred = FunctionalDatum::new(*r.psi.spec(), v)?;
                    total += residual_sum_of_squares(&pred, curves[i])?;
                    count += curves[i].len();
                }
            }
            _ => unreachable!("model kind follows the cell"),
        }
        Ok(total / count as f64)
    }

    /// cAIC inputs for this basis size, fitted on all training subjects.
    ///
    /// Scalar responses use the regression residual with `K` parameters. When
    /// the response basis varies, the criterion scores the response
    /// functionalization: pooled residual over all response points with
    /// `N K₂` parameters. When the predictor basis varies under a functional
    /// response, the residual is `tr(R Ψ Rᵀ)` with `R = V - Z B̂`, the
    /// integrated squared residual of the response functions.
    fn caic_candidate(&self, problem: &Problem, model: &Model) -> Result<CaicCandidate> {
        let n = problem.n();
        let k = self.varied_k;
        let (rss, total, n_obs, k_params) = match (model, &self.response) {
            (Model::Scalar(b), None) => {
                let y = problem.scalar_y()?;
                ((y - &self.z * b).norm_squared(), y.norm_squared(), n, k)
            }
            (Model::Curve(_), Some(r)) if self.vary_response => {
                let curves = problem.train_curves()?;
                let points: usize = curves.iter().map(|c| c.len()).sum();
                let total = curves.iter().flat_map(|c| c.values()).map(|v| v * v).sum();
                (r.rss, total, points, n * k)
            }
            (Model::Curve(b), Some(r)) => {
                let resid = &r.v - &self.z * b;
                let rss = (&resid * r.psi.entries()).component_mul(&resid).sum();
                let total = (&r.v * r.psi.entries()).component_mul(&r.v).sum();
                (rss, total, n, k)
            }
            _ => unreachable!("model kind follows the cell"),
        };
        let rss = if rss <= EXACT_FIT_RATIO * total { 0.0 } else { rss };
        Ok(CaicCandidate {
            k,
            rss,
            k_params,
            n: n_obs,
        })
    }
}
