//! JSON sweep configuration.
//!
//! A config names either a simulation `scenario` (with optional overrides of
//! its parameters) or a `data` section pointing at CSV files. Sweep settings
//! that are left out take their defaults; unknown keys are rejected.
//!
//! ```json
//! {
//!   "scenario": "A",
//!   "n_train": 5,
//!   "k_min": 4, "k_max": 50,
//!   "replicates": 50,
//!   "methods": ["cv", "caic", "fixed"],
//!   "seed": 7
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{load_sonf_csv, SweepConfig};
use crate::basis::Domain;
use crate::datagen::{Centering, GpParams, ScenarioConfig, ScenarioKind, TimeSampling};
use crate::error::{Error, Result};
use crate::selection::SelectionMethod;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub x: PathBuf,
    pub y: PathBuf,
    pub train_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Option<ScenarioKind>,
    pub data: Option<DataSection>,

    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub m: Option<usize>,
    pub m2: Option<usize>,
    pub k1_fixed: Option<usize>,
    pub k2_fixed: Option<usize>,
    pub gp_x: Option<GpParams>,
    pub gp_beta: Option<GpParams>,
    pub noise_sd: Option<f64>,
    pub latent_grid_size: Option<usize>,
    pub response_grid_size: Option<usize>,
    pub domain: Option<Domain>,
    pub centering: Option<Centering>,
    pub time_sampling: Option<TimeSampling>,

    /// Explicit grid; exclusive with `k_min`/`k_max`.
    pub k_grid: Option<Vec<usize>>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub replicates: Option<usize>,
    pub methods: Option<Vec<SelectionMethod>>,
    pub fixed_k: Option<usize>,
    pub folds: Option<usize>,
    pub cv_grid: Option<Vec<usize>>,
    pub caic_grid: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    fn has_scenario_overrides(&self) -> bool {
        self.n_train.is_some()
            || self.n_test.is_some()
            || self.m.is_some()
            || self.m2.is_some()
            || self.k1_fixed.is_some()
            || self.k2_fixed.is_some()
            || self.gp_x.is_some()
            || self.gp_beta.is_some()
            || self.noise_sd.is_some()
            || self.latent_grid_size.is_some()
            || self.response_grid_size.is_some()
            || self.domain.is_some()
            || self.centering.is_some()
            || self.time_sampling.is_some()
    }

    fn scenario_config(&self, kind: ScenarioKind) -> ScenarioConfig {
        let d = ScenarioConfig::defaults(kind);
        ScenarioConfig {
            scenario: kind,
            n_train: self.n_train.unwrap_or(d.n_train),
            n_test: self.n_test.unwrap_or(d.n_test),
            m: self.m.unwrap_or(d.m),
            m2: self.m2.unwrap_or(d.m2),
            k1_fixed: self.k1_fixed.unwrap_or(d.k1_fixed),
            k2_fixed: self.k2_fixed.unwrap_or(d.k2_fixed),
            gp_x: self.gp_x.unwrap_or(d.gp_x),
            gp_beta: self.gp_beta.unwrap_or(d.gp_beta),
            noise_sd: self.noise_sd.unwrap_or(d.noise_sd),
            latent_grid_size: self.latent_grid_size.unwrap_or(d.latent_grid_size),
            response_grid_size: self.response_grid_size.unwrap_or(d.response_grid_size),
            domain: self.domain.unwrap_or(d.domain),
            centering: self.centering.unwrap_or(d.centering),
            time_sampling: self.time_sampling.unwrap_or(d.time_sampling),
        }
    }

    /// Builds the sweep; data paths are taken relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<SweepConfig> {
        let mut cfg = match (&self.scenario, &self.data) {
            (Some(kind), None) => SweepConfig::scenario(self.scenario_config(*kind)),
            (None, Some(d)) => {
                if self.has_scenario_overrides() {
                    return Err(Error::Config(
                        "scenario parameters cannot be combined with a data section".into(),
                    ));
                }
                let loaded = load_sonf_csv(&base_dir.join(&d.x), &base_dir.join(&d.y))?;
                SweepConfig::data(loaded.dataset, d.train_size)
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either `scenario` or `data`, not both".into()))
            }
            (None, None) => return Err(Error::Config("missing `scenario` or `data`".into())),
        };

        match (&self.k_grid, self.k_min, self.k_max) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(Error::Config("`k_grid` excludes `k_min`/`k_max`".into()))
            }
            (Some(g), None, None) => cfg.k_grid = g.clone(),
            (None, lo, hi) => {
                let lo = lo.unwrap_or(cfg.k_grid[0]);
                let hi = hi.unwrap_or(*cfg.k_grid.last().expect("default grid is non-empty"));
                if lo > hi {
                    return Err(Error::Config(format!("k_min = {lo} exceeds k_max = {hi}")));
                }
                cfg.k_grid = (lo..=hi).collect();
            }
        }
        if let Some(v) = self.replicates {
            cfg.replicates = v;
        }
        if let Some(v) = &self.methods {
            cfg.methods = v.clone();
        }
        if let Some(v) = self.fixed_k {
            cfg.fixed_k = v;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        cfg.cv_grid = self.cv_grid.clone();
        cfg.caic_grid = self.caic_grid.clone();
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.threads = self.threads;
        cfg.out_dir = self.out_dir.as_ref().map(|p| base_dir.join(p));
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a config document without touching the filesystem unless it names
/// data files.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<SweepConfig> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    file.resolve(base_dir)
}

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
