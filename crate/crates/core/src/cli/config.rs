//! Run configurations, the `#`-prefixed JSON header of output files, and
//! config loading with precedence defaults < file < flags.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::franz_parisi::geometric_q_grid;
use crate::lab::{derive_seed, SamplerSettings};
use crate::parisi::{GridSpec, SolverOptions};

pub const TOOL: &str = "pspin";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// First line of every output CSV, after the leading `#`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
}

impl Header {
    pub fn new<T: Serialize>(command: &str, config: &T) -> Result<Self> {
        Ok(Header {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
        })
    }

    pub fn to_line(&self) -> String {
        format!("# {}", serde_json::to_string(self).expect("header serializes"))
    }
}

/// Parses a header line (`# {...}`), with or without its newline.
pub fn parse_header(line: &str) -> Result<Header> {
    let body = line
        .trim_end_matches(['\n', '\r'])
        .strip_prefix('#')
        .ok_or_else(|| Error::Config("header line must start with '#'".into()))?;
    let header: Header = serde_json::from_str(body.trim_start())?;
    if header.tool != TOOL {
        return Err(Error::Config(format!("header written by '{}', not '{TOOL}'", header.tool)));
    }
    if !header.config.is_object() {
        return Err(Error::Config("header config must be a JSON object".into()));
    }
    Ok(header)
}

/// Config document for `command`: either a JSON object, or an output CSV of
/// the same command whose header carries the config.
pub fn config_document(text: &str, command: &str) -> Result<Value> {
    let text = text.trim_start_matches('\u{feff}');
    if text.starts_with('#') {
        let line = text.lines().next().unwrap_or_default();
        let header = parse_header(line)?;
        if header.command != command {
            return Err(Error::Config(format!(
                "config was written by '{}', not '{command}'",
                header.command
            )));
        }
        return Ok(header.config);
    }
    let value: Value = serde_json::from_str(text)?;
    if !value.is_object() {
        return Err(Error::Config("config must be a JSON object".into()));
    }
    Ok(value)
}

/// Deserializes a config document, filling missing fields from defaults and
/// rejecting unknown keys.
pub fn parse_config<T: DeserializeOwned>(text: &str, command: &str) -> Result<T> {
    let doc = config_document(text, command)?;
    serde_json::from_value(doc).map_err(|e| Error::Config(format!("{command} config: {e}")))
}

/// Parses any command's config from `text` and validates it; used by the
/// fuzz harness.
pub fn parse_any_config(text: &str, command: &str) -> Result<()> {
    match command {
        "phase" => parse_config::<PhaseConfig>(text, command)?.validate(),
        "parisi" => parse_config::<ParisiConfig>(text, command)?.validate(),
        "fp" => parse_config::<FpConfig>(text, command)?.validate(),
        "shatter-scan" => parse_config::<ShatterConfig>(text, command)?.validate(),
        "simulate" => parse_config::<SimulateConfig>(text, command)?.resolve(),
        "chaos" => parse_config::<ChaosRunConfig>(text, command)?.validate(),
        other => Err(Error::Config(format!("unknown command '{other}'"))),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} must be positive and finite")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} must be non-negative and finite")))
    }
}

/// Desk-scale limit on the dense tensor size used by the Monte Carlo commands.
pub const MAX_LAB_ENTRIES: u64 = 1 << 24;

fn check_lab_shape(n: usize, p: usize) -> Result<()> {
    if n == 0 || p < 2 {
        return Err(Error::Config(format!("need n >= 1 and p >= 2 (got n = {n}, p = {p})")));
    }
    match (n as u64).checked_pow(p as u32) {
        Some(c) if c <= MAX_LAB_ENTRIES => Ok(()),
        _ => Err(Error::Size {
            n,
            p,
            limit: MAX_LAB_ENTRIES,
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseConfig {
    pub p_min: usize,
    pub p_max: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            p_min: 3,
            p_max: 20,
            tol: 1e-10,
            seed: 0,
            out: None,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_min < 3 || self.p_min > self.p_max {
            return Err(Error::Config(format!(
                "need 3 <= p_min <= p_max (got {}..{})",
                self.p_min, self.p_max
            )));
        }
        if self.p_max > 1_000_000 {
            return Err(Error::Config(format!("p_max = {} is too large", self.p_max)));
        }
        positive("tol", self.tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParisiConfig {
    /// Mixture coefficients of degrees `1, 2, ...`.
    pub mixture: Vec<f64>,
    pub betas: Vec<f64>,
    pub grid: GridSpec,
    pub solver: SolverOptions,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ParisiConfig {
    fn default() -> Self {
        ParisiConfig {
            mixture: vec![0.0, 0.0, 1.0],
            betas: vec![0.5, 1.0, 1.5, 2.0],
            grid: GridSpec::default(),
            solver: SolverOptions::default(),
            seed: 0,
            out: None,
        }
    }
}

impl ParisiConfig {
    pub fn validate(&self) -> Result<()> {
        crate::mixtures::MixtureFn::new(self.mixture.clone())?;
        if self.mixture.len() > 4096 {
            return Err(Error::Config("mixture degree above 4096".into()));
        }
        self.betas.iter().try_for_each(|&b| positive("beta", b))?;
        self.grid.validate()?;
        if self.grid.m > 1 << 16 {
            return Err(Error::Config(format!("grid size m = {} is too large", self.grid.m)));
        }
        positive("rel_tol", self.solver.rel_tol)?;
        positive("kkt_tol", self.solver.kkt_tol)
    }
}

/// Overlap grid for potential curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QGridSpec {
    /// `n` equally spaced points from `min` to `max` inclusive.
    Uniform { min: f64, max: f64, n: usize },
    /// `n` points whose distance to 1 shrinks geometrically from `gap_hi` to
    /// `gap_lo`.
    Geometric { n: usize, gap_hi: f64, gap_lo: f64 },
}

const MAX_Q_POINTS: usize = 100_000;

impl QGridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        match *self {
            QGridSpec::Uniform { min, max, n } => {
                if !(min.abs() < 1.0 && max.abs() < 1.0 && min <= max) || n == 0 || n > MAX_Q_POINTS {
                    return Err(Error::Config(format!(
                        "uniform q grid needs -1 < min <= max < 1 and 1 <= n <= {MAX_Q_POINTS}"
                    )));
                }
                if n == 1 {
                    return Ok(vec![min]);
                }
                Ok((0..n)
                    .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
                    .collect())
            }
            QGridSpec::Geometric { n, gap_hi, gap_lo } => {
                if !(gap_hi < 1.0 && gap_lo > 0.0 && gap_lo < gap_hi) || !(2..=MAX_Q_POINTS).contains(&n) {
                    return Err(Error::Config(format!(
                        "geometric q grid needs 0 < gap_lo < gap_hi < 1 and 2 <= n <= {MAX_Q_POINTS}"
                    )));
                }
                Ok(geometric_q_grid(n, gap_hi, gap_lo))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpConfig {
    pub p: usize,
    pub beta: f64,
    pub q_grid: QGridSpec,
    pub grid: GridSpec,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for FpConfig {
    fn default() -> Self {
        FpConfig {
            p: 3,
            beta: 1.0,
            q_grid: QGridSpec::Uniform {
                min: 0.0,
                max: 0.999,
                n: 100,
            },
            grid: GridSpec::default(),
            seed: 0,
            out: None,
        }
    }
}

impl FpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.p > 1 << 20 {
            return Err(Error::Config(format!("p = {} outside 2..=2^20", self.p)));
        }
        positive("beta", self.beta)?;
        self.grid.validate()?;
        self.q_grid.points().map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShatterConfig {
    pub p_list: Vec<usize>,
    /// Inverse temperatures as fractions of `beta_c(p)`.
    pub beta_fractions: Vec<f64>,
    pub q_grid: QGridSpec,
    pub grid: GridSpec,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ShatterConfig {
    fn default() -> Self {
        ShatterConfig {
            p_list: vec![128, 256, 512, 1024, 2048],
            beta_fractions: vec![0.8, 0.85, 0.9, 0.95, 0.99],
            q_grid: QGridSpec::Geometric {
                n: 64,
                gap_hi: 9e-3,
                gap_lo: 1e-6,
            },
            grid: GridSpec::default(),
            seed: 0,
            out: None,
        }
    }
}

impl ShatterConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(&p) = self.p_list.iter().find(|&&p| !(3..=1 << 20).contains(&p)) {
            return Err(Error::Config(format!("p = {p} outside 3..=2^20")));
        }
        for &f in &self.beta_fractions {
            positive("beta fraction", f)?;
            if f >= 1.0 {
                log::warn!("beta fraction {f} is not below beta_c");
            }
        }
        self.grid.validate()?;
        crate::franz_parisi::validate_q_grid(&self.q_grid.points()?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub n: usize,
    pub p: usize,
    pub beta: f64,
    pub step: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub n_trajectories: usize,
    pub sampler: SamplerSettings,
    pub seed: u64,
    /// Derived from `seed` when absent.
    pub disorder_seed: Option<u64>,
    /// Derived from `seed` when absent.
    pub dynamics_seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n: 16,
            p: 3,
            beta: 1.0,
            step: 0.01,
            n_steps: 1000,
            record_every: 10,
            n_trajectories: 50,
            sampler: SamplerSettings::default(),
            seed: 0,
            disorder_seed: None,
            dynamics_seed: None,
            out: None,
        }
    }
}

impl SimulateConfig {
    /// Validates and fills in derived seeds.
    pub fn resolve(&mut self) -> Result<()> {
        check_lab_shape(self.n, self.p)?;
        non_negative("beta", self.beta)?;
        positive("step", self.step)?;
        if self.record_every == 0 || self.n_trajectories == 0 {
            return Err(Error::Config("record_every and n_trajectories must be positive".into()));
        }
        if self.n_steps > 100_000_000 || self.n_trajectories > 1_000_000 {
            return Err(Error::Config("run length outside the desk-scale envelope".into()));
        }
        self.sampler.validate()?;
        self.disorder_seed.get_or_insert(derive_seed(self.seed, &[0]));
        self.dynamics_seed.get_or_insert(derive_seed(self.seed, &[1]));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosRunConfig {
    pub n: usize,
    pub p: usize,
    pub beta: f64,
    pub epsilons: Vec<f64>,
    pub n_disorders: usize,
    pub n_samples: usize,
    pub sampler: SamplerSettings,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ChaosRunConfig {
    fn default() -> Self {
        ChaosRunConfig {
            n: 16,
            p: 3,
            beta: 1.0,
            epsilons: vec![0.0, 0.25, 0.5, 1.0],
            n_disorders: 8,
            n_samples: 50,
            sampler: SamplerSettings {
                burn_in: 1000,
                thin: 10,
                ..Default::default()
            },
            seed: 0,
            out: None,
        }
    }
}

impl ChaosRunConfig {
    pub fn validate(&self) -> Result<()> {
        check_lab_shape(self.n, self.p)?;
        non_negative("beta", self.beta)?;
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Config(format!("epsilon {e} outside [0, 1]")));
        }
        if self.n_disorders == 0 || !(1..=crate::lab::MAX_SAMPLES).contains(&self.n_samples) {
            return Err(Error::Config(format!(
                "need n_disorders >= 1 and 1 <= n_samples <= {}",
                crate::lab::MAX_SAMPLES
            )));
        }
        self.sampler.validate()
    }
}
