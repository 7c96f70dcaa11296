//! Run configuration: strict JSON parsing, defaults, and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use zdsc_core::gauss::GridCounts;
use zdsc_core::harness::{power_for_csnr_db, Method};
use zdsc_core::{AnnealConfig, GreedyConfig, SourceChannelModel};

/// What the binary should run: one design method or a full sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMethod {
    Da,
    Greedy,
    Ncr,
    Linear,
    Opta,
    Sweep,
}

impl RunMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMethod::Da => "da",
            RunMethod::Greedy => "greedy",
            RunMethod::Ncr => "ncr",
            RunMethod::Linear => "linear",
            RunMethod::Opta => "opta",
            RunMethod::Sweep => "sweep",
        }
    }
}

impl std::fmt::Display for RunMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Configuration-level errors carry exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn default_variance() -> f64 {
    1.0
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

fn default_ncr_stages() -> usize {
    6
}

fn default_ncr_start_factor() -> f64 {
    100.0
}

/// Grid point-count overrides; unset fields use the built-in defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverrides {
    pub nx: Option<usize>,
    pub nz: Option<usize>,
    pub ny: Option<usize>,
    pub nn: Option<usize>,
}

impl GridOverrides {
    pub fn counts(&self) -> GridCounts {
        let d = GridCounts::default();
        GridCounts {
            nx: self.nx.unwrap_or(d.nx),
            nz: self.nz.unwrap_or(d.nz),
            ny: self.ny.unwrap_or(d.ny),
            nn: self.nn.unwrap_or(d.nn),
        }
    }

    /// Automatic y refinement stays on unless the user pinned ny.
    pub fn auto_refine_y(&self) -> bool {
        self.ny.is_none()
    }
}

/// Greedy descent parameters without the lambda (which is searched or given
/// at the top level).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreedyParams {
    pub step_size: f64,
    pub max_iters: usize,
    pub conv_tol: f64,
    pub backtrack_factor: f64,
}

impl Default for GreedyParams {
    fn default() -> Self {
        let d = GreedyConfig::default();
        Self {
            step_size: d.step_size,
            max_iters: d.max_iters,
            conv_tol: d.conv_tol,
            backtrack_factor: d.backtrack_factor,
        }
    }
}

impl GreedyParams {
    pub fn with_lambda(&self, lambda: f64) -> GreedyConfig {
        GreedyConfig {
            lambda,
            step_size: self.step_size,
            max_iters: self.max_iters,
            conv_tol: self.conv_tol,
            backtrack_factor: self.backtrack_factor,
        }
    }
}

/// A full run description. Every field has a default except the method and
/// the power point (exactly one of `power`, `csnr_db`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub method: Option<RunMethod>,
    #[serde(default = "default_variance")]
    pub sigma_x2: f64,
    #[serde(default = "default_variance")]
    pub sigma_z2: f64,
    #[serde(default)]
    pub rho: f64,
    #[serde(default = "default_variance")]
    pub sigma_n2: f64,
    #[serde(default)]
    pub power: Option<f64>,
    #[serde(default)]
    pub csnr_db: Option<f64>,
    /// Fixed power multiplier; skips the power-targeting search.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Explicit search bracket (lambda_lo, lambda_hi).
    #[serde(default)]
    pub lambda_bracket: Option<(f64, f64)>,
    #[serde(default)]
    pub grid: GridOverrides,
    #[serde(default)]
    pub anneal: AnnealConfig,
    #[serde(default)]
    pub greedy: GreedyParams,
    #[serde(default = "default_ncr_stages")]
    pub ncr_stages: usize,
    #[serde(default = "default_ncr_start_factor")]
    pub ncr_start_factor: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Methods to run in a sweep.
    #[serde(default)]
    pub methods: Option<Vec<Method>>,

    /// Channel SNR points of a sweep, in dB.
    #[serde(default)]
    pub csnr_points_db: Option<Vec<f64>>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config parses")
    }
}

impl RunConfig {
    /// Strict parse: unknown keys, conflicting or missing fields are errors
    /// that name the offending key.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("config parse: {e}")))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.method
            .ok_or_else(|| ConfigError("missing required key `method`".into()))?;
        match (self.power, self.csnr_db) {
            (Some(_), Some(_)) => {
                return Err(ConfigError(
                    "`power` and `csnr_db` are mutually exclusive; give exactly one".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError(
                    "one of `power` or `csnr_db` is required".into(),
                ))
            }
            _ => {}
        }
        if self.lambda.is_some() && self.lambda_bracket.is_some() {
            return Err(ConfigError(
                "`lambda` and `lambda_bracket` are mutually exclusive".into(),
            ));
        }
        for (name, v) in [
            ("sigma_x2", self.sigma_x2),
            ("sigma_z2", self.sigma_z2),
            ("sigma_n2", self.sigma_n2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError(format!("`{name}` must be positive, got {v}")));
            }
        }
        if !(self.rho.abs() <= 0.999) {
            return Err(ConfigError(format!(
                "`rho` must satisfy |rho| <= 0.999, got {}",
                self.rho
            )));
        }
        if let Some(p) = self.power {
            if !(p > 0.0) {
                return Err(ConfigError(format!("`power` must be positive, got {p}")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(ConfigError(format!("`lambda` must be positive, got {l}")));
            }
        }
        if let Some((lo, hi)) = self.lambda_bracket {
            if !(lo > 0.0 && hi > lo) {
                return Err(ConfigError(format!(
                    "`lambda_bracket` needs 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(ConfigError("`seeds` must not be empty".into()));
        }
        self.anneal
            .validate()
            .map_err(|e| ConfigError(format!("`anneal`: {e}")))?;
        self.greedy
            .with_lambda(1.0)
            .validate()
            .map_err(|e| ConfigError(format!("`greedy`: {e}")))?;
        if self.ncr_stages == 0 {
            return Err(ConfigError("`ncr_stages` must be at least 1".into()));
        }
        if !(self.ncr_start_factor >= 1.0) {
            return Err(ConfigError("`ncr_start_factor` must be at least 1".into()));
        }
        Ok(())
    }

    /// Target transmit power from whichever of the two power fields is set.
    pub fn target_power(&self) -> f64 {
        match (self.power, self.csnr_db) {
            (Some(p), _) => p,
            (None, Some(db)) => power_for_csnr_db(db, self.sigma_n2),
            (None, None) => unreachable!("validated"),
        }
    }

    /// Requested channel SNR in dB.
    pub fn target_csnr_db(&self) -> f64 {
        match self.csnr_db {
            Some(db) => db,
            None => 10.0 * (self.target_power() / self.sigma_n2).log10(),
        }
    }

    pub fn model(&self) -> SourceChannelModel {
        SourceChannelModel {
            sigma_x2: self.sigma_x2,
            sigma_z2: self.sigma_z2,
            rho: self.rho,
            sigma_n2: self.sigma_n2,
            power_limit: self.target_power(),
        }
    }
}
