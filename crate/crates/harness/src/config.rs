//! Experiment configuration files.

use std::path::{Path, PathBuf};

use fixsub_core::{Method, StepSchedule, TieRule};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MAX_USERS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveFamily {
    /// Every user minimizes `|a x + b|`.
    #[default]
    AbsAffine,
    /// User 1 minimizes `a‖x + b‖²`, the others `|a x + b|`.
    StronglyConvexFirst,
}

/// How the one-dimensional `|a x + b|` acts on `R^I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveInterpretation {
    /// User `i` sees coordinate `i`.
    #[default]
    Coordinate,
    /// `|⟨a u, x⟩ + b|` with a random unit direction `u`.
    InnerProduct,
}

/// Which reference solution to compute alongside an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Analytic or grid reference when cheap, nothing otherwise.
    #[default]
    Auto,
    /// Always compute one, falling back to a long run.
    Full,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "I")]
    pub users: usize,
    pub seed: u64,
    pub method: Method,
    pub schedule: StepSchedule,
    pub n_iters: usize,
    #[serde(default = "default_points")]
    pub n_initial_points: usize,
    #[serde(default)]
    pub objective_family: ObjectiveFamily,
    #[serde(default)]
    pub objective_interpretation: ObjectiveInterpretation,
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub tie_rule: TieRule,
    #[serde(default = "yes")]
    pub projected: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Record wall-clock time per iteration. Off by default so outputs are reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "yes")]
    pub lemma_monitors: bool,
    #[serde(default)]
    pub reference: ReferenceMode,
}

fn default_points() -> usize {
    100
}

fn default_c() -> f64 {
    4.0
}

fn yes() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(users: usize, seed: u64, method: Method, schedule: StepSchedule, n_iters: usize) -> Self {
        ExperimentConfig {
            users,
            seed,
            method,
            schedule,
            n_iters,
            n_initial_points: default_points(),
            objective_family: ObjectiveFamily::default(),
            objective_interpretation: ObjectiveInterpretation::default(),
            c: default_c(),
            tie_rule: TieRule::default(),
            projected: true,
            output_dir: default_output(),
            timing: false,
            lemma_monitors: true,
            reference: ReferenceMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_USERS).contains(&self.users) {
            return Err(HarnessError::Config(format!("I must lie in 1..={MAX_USERS}, got {}", self.users)));
        }
        if self.n_iters == 0 {
            return Err(HarnessError::Config("n_iters must be at least 1".into()));
        }
        if self.n_initial_points == 0 {
            return Err(HarnessError::Config("n_initial_points must be at least 1".into()));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(HarnessError::Config(format!("C must be positive, got {}", self.c)));
        }
        self.schedule
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }
}
