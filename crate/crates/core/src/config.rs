//! Run configuration, read from a flat TOML document.
//!
//! Every key is optional; unknown keys are rejected. Relative paths are
//! resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{KernelParams, MatchKind};
use crate::metrics::{Exponent, MetricFamily, MetricSpec};
use crate::optimizer::OptimConfig;
use crate::path::VelocityConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Constant,
    Linear,
}

/// The on-disk key set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub family: MetricFamily,
    pub weights: [f64; 3],
    pub eps: f64,
    pub exponent: Exponent,
    pub sigma: f64,
    pub delta: f64,
    /// `[N, n]`: slices and nodes per slice.
    pub grid: [usize; 2],
    pub max_iters: usize,
    pub tau0: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub grad_tol: f64,
    pub eps_schedule: Vec<f64>,
    pub seed: u64,
    pub init: InitKind,
    pub matching: MatchKind,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    /// Prefix for `.homotopy.json`, `.trace.csv` and `.svg`.
    pub out: Option<PathBuf>,
    pub paper_literal_velocity: bool,
    pub normalize_to_unit_square: bool,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let opt = OptimConfig::default();
        let kernel = KernelParams::default();
        Self {
            family: MetricFamily::Bv2,
            weights: [1.0, 0.0, 1.0],
            eps: 0.0,
            exponent: Exponent::Two,
            sigma: kernel.sigma,
            delta: kernel.delta,
            grid: [10, 256],
            max_iters: opt.max_iters,
            tau0: opt.tau0,
            shrink: opt.shrink,
            armijo: opt.armijo,
            grad_tol: opt.grad_tol,
            eps_schedule: opt.eps_schedule,
            seed: opt.seed,
            init: InitKind::Constant,
            matching: MatchKind::Kernel,
            source: None,
            target: None,
            out: None,
            paper_literal_velocity: false,
            normalize_to_unit_square: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub metric: MetricSpec,
    pub kernel: KernelParams,
    pub matching: MatchKind,
    /// Number of slices `N`.
    pub slices: usize,
    /// Nodes per slice `n`.
    pub nodes: usize,
    pub optimizer: OptimConfig,
    pub init: InitKind,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub normalize_to_unit_square: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::try_from(ConfigFile::default()).expect("defaults are valid")
    }
}

impl TryFrom<ConfigFile> for RunConfig {
    type Error = Error;

    fn try_from(f: ConfigFile) -> Result<Self> {
        let velocity =
            if f.paper_literal_velocity { VelocityConvention::PaperLiteral } else { VelocityConvention::DifferenceQuotient };
        let metric = MetricSpec::new(f.family, f.weights, f.eps, f.exponent)?.with_velocity(velocity);
        let cfg = Self {
            metric,
            kernel: KernelParams::new(f.sigma, f.delta)?,
            matching: f.matching,
            slices: f.grid[0],
            nodes: f.grid[1],
            optimizer: OptimConfig {
                max_iters: f.max_iters,
                tau0: f.tau0,
                shrink: f.shrink,
                armijo: f.armijo,
                grad_tol: f.grad_tol,
                eps_schedule: f.eps_schedule,
                seed: f.seed,
            },
            init: f.init,
            source: f.source,
            target: f.target,
            out: f.out,
            normalize_to_unit_square: f.normalize_to_unit_square,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        self.kernel.validate()?;
        self.optimizer.validate()?;
        if self.slices < 2 || self.nodes < 3 {
            return Err(Error::InvalidConfig(format!(
                "grid needs N >= 2 and n >= 3, got ({}, {})",
                self.slices, self.nodes
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str, name: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Parse { path: name.to_string(), msg: e.to_string() })?;
        Self::try_from(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.source, &mut cfg.target, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// The config as a flat key set, suitable for writing back to TOML.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            family: self.metric.family,
            weights: self.metric.weights,
            eps: self.metric.eps,
            exponent: self.metric.exponent,
            sigma: self.kernel.sigma,
            delta: self.kernel.delta,
            grid: [self.slices, self.nodes],
            max_iters: self.optimizer.max_iters,
            tau0: self.optimizer.tau0,
            shrink: self.optimizer.shrink,
            armijo: self.optimizer.armijo,
            grad_tol: self.optimizer.grad_tol,
            eps_schedule: self.optimizer.eps_schedule.clone(),
            seed: self.optimizer.seed,
            init: self.init,
            matching: self.matching,
            source: self.source.clone(),
            target: self.target.clone(),
            out: self.out.clone(),
            paper_literal_velocity: self.metric.velocity == VelocityConvention::PaperLiteral,
            normalize_to_unit_square: self.normalize_to_unit_square,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}
