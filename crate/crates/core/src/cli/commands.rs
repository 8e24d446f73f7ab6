//! The six batch commands. Each returns its CSV rows in a deterministic order
//! and the number of rows that failed softly.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ChaosRunConfig, FpConfig, ParisiConfig, PhaseConfig, ShatterConfig, SimulateConfig};
use crate::error::Result;
use crate::franz_parisi::{fp_value, window_from_curve, FpPoint};
use crate::lab::{
    chaos_estimate, correlation_curve, derive_seed, mean_stderr, sample_disorder, ChaosConfig, CorrelationPoint,
    LangevinConfig,
};
use crate::mixtures::MixtureFn;
use crate::parisi::minimize_cs_on_grid;
use crate::phase::{beta_c, phase_row};

pub struct Table<R> {
    pub rows: Vec<R>,
    pub failures: usize,
}

impl<R> Table<R> {
    fn new(rows: Vec<R>, failures: usize) -> Self {
        Table { rows, failures }
    }
}

fn soft<T>(r: Result<T>, failures: &mut usize) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => {
            log::warn!("{e}");
            *failures += 1;
            (None, Some(e.to_string()))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PhaseCsvRow {
    pub p: usize,
    pub beta_d: Option<f64>,
    pub beta_c: Option<f64>,
    pub argmin_q_c: Option<f64>,
    pub error: Option<String>,
}

pub fn phase(cfg: &PhaseConfig) -> Table<PhaseCsvRow> {
    let results: Vec<_> = (cfg.p_min..=cfg.p_max)
        .into_par_iter()
        .map(|p| (p, phase_row(p, cfg.tol)))
        .collect();
    let mut failures = 0;
    let rows = results
        .into_iter()
        .map(|(p, r)| {
            let (row, error) = soft(r, &mut failures);
            PhaseCsvRow {
                p,
                beta_d: row.as_ref().map(|r| r.beta_d),
                beta_c: row.as_ref().map(|r| r.beta_c),
                argmin_q_c: row.as_ref().map(|r| r.argmin_q_c),
                error,
            }
        })
        .collect();
    Table::new(rows, failures)
}

#[derive(Debug, Serialize)]
pub struct ParisiCsvRow {
    pub beta: f64,
    pub value: Option<f64>,
    pub annealed: f64,
    pub q_hat: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub truncated: Option<bool>,
    pub error: Option<String>,
}

pub fn parisi(cfg: &ParisiConfig) -> Result<Table<ParisiCsvRow>> {
    let xi = MixtureFn::new(cfg.mixture.clone())?;
    let grid = cfg.grid.build(&[])?;
    let results: Vec<_> = cfg
        .betas
        .par_iter()
        .map(|&beta| minimize_cs_on_grid(&xi, beta, grid.clone(), &cfg.solver, None))
        .collect();
    let mut failures = 0;
    let rows = cfg
        .betas
        .iter()
        .zip(results)
        .map(|(&beta, r)| {
            let (sol, error) = soft(r, &mut failures);
            if sol.as_ref().is_some_and(|s| !s.converged) {
                log::warn!("beta = {beta}: solver did not meet its tolerances");
            }
            if sol.as_ref().is_some_and(|s| s.truncated) {
                log::warn!("beta = {beta}: minimizer puts mass on q_max; consider a larger q_max");
            }
            ParisiCsvRow {
                beta,
                value: sol.as_ref().map(|s| s.value),
                annealed: 0.5 * beta * beta * xi.value(1.0),
                q_hat: sol.as_ref().map(|s| s.cdf.q_hat()),
                kkt_residual: sol.as_ref().map(|s| s.kkt_residual),
                iterations: sol.as_ref().map(|s| s.iterations),
                converged: sol.as_ref().map(|s| s.converged),
                truncated: sol.as_ref().map(|s| s.truncated),
                error,
            }
        })
        .collect();
    Ok(Table::new(rows, failures))
}

#[derive(Debug, Serialize)]
pub struct FpCsvRow {
    pub q: f64,
    pub value: Option<f64>,
    pub rs_bound: Option<f64>,
    pub derivative: Option<f64>,
    pub band_free_energy: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub error: Option<String>,
}

fn warn_above_static(p: usize, beta: f64) {
    if let Ok(b) = beta_c(p.max(3), 1e-10) {
        if p >= 3 && beta >= b.beta_c {
            log::warn!("beta = {beta} is not below beta_c({p}) = {:.6}", b.beta_c);
        }
    }
}

pub fn fp(cfg: &FpConfig) -> Result<Table<FpCsvRow>> {
    warn_above_static(cfg.p, cfg.beta);
    let qs = cfg.q_grid.points()?;
    let results: Vec<_> = qs.par_iter().map(|&q| fp_value(cfg.p, cfg.beta, q, &cfg.grid)).collect();
    let mut failures = 0;
    let rows = qs
        .iter()
        .zip(results)
        .map(|(&q, r)| {
            let (pt, error) = soft(r, &mut failures);
            FpCsvRow {
                q,
                value: pt.map(|x| x.value),
                rs_bound: pt.map(|x| x.rs_bound),
                derivative: pt.map(|x| x.derivative),
                band_free_energy: pt.map(|x| x.band_free_energy),
                kkt_residual: pt.map(|x| x.kkt_residual),
                error,
            }
        })
        .collect();
    Ok(Table::new(rows, failures))
}

#[derive(Debug, Serialize)]
pub struct ShatterCsvRow {
    pub p: usize,
    pub beta_fraction: f64,
    pub beta: Option<f64>,
    pub beta_c: Option<f64>,
    pub q_under: Option<f64>,
    pub q_bar: Option<f64>,
    pub passes_fp: Option<bool>,
    pub inside_band: Option<bool>,
    pub max_kkt: Option<f64>,
    pub error: Option<String>,
}

pub fn shatter_scan(cfg: &ShatterConfig) -> Result<Table<ShatterCsvRow>> {
    let qs = cfg.q_grid.points()?;
    crate::franz_parisi::validate_q_grid(&qs)?;
    let pairs: Vec<(usize, f64)> = cfg
        .p_list
        .iter()
        .flat_map(|&p| cfg.beta_fractions.iter().map(move |&f| (p, f)))
        .collect();
    let results: Vec<Result<(f64, f64, Vec<FpPoint>)>> = pairs
        .par_iter()
        .map(|&(p, f)| {
            let bc = beta_c(p, 1e-10)?.beta_c;
            let beta = f * bc;
            let curve: Result<Vec<FpPoint>> = qs.iter().map(|&q| fp_value(p, beta, q, &cfg.grid)).collect();
            Ok((bc, beta, curve?))
        })
        .collect();
    let mut failures = 0;
    let rows = pairs
        .iter()
        .zip(results)
        .map(|(&(p, f), r)| {
            let (res, error) = soft(r, &mut failures);
            let window = res.as_ref().map(|(_, _, c)| window_from_curve(p, c));
            ShatterCsvRow {
                p,
                beta_fraction: f,
                beta: res.as_ref().map(|r| r.1),
                beta_c: res.as_ref().map(|r| r.0),
                q_under: window.map(|w| w.q_under),
                q_bar: window.map(|w| w.q_bar),
                passes_fp: window.map(|w| w.passes_fp),
                inside_band: window.map(|w| w.inside_band),
                max_kkt: res
                    .as_ref()
                    .map(|(_, _, c)| c.iter().map(|x| x.kkt_residual).fold(0.0, f64::max)),
                error,
            }
        })
        .collect();
    Ok(Table::new(rows, failures))
}

/// Divergence and sampler failures abort the run (hard errors).
pub fn simulate(cfg: &SimulateConfig) -> Result<Table<CorrelationPoint>> {
    let d = sample_disorder(cfg.n, cfg.p, cfg.disorder_seed.expect("resolved config"))?;
    let lcfg = LangevinConfig {
        beta: cfg.beta,
        step: cfg.step,
        n_steps: cfg.n_steps,
        record_every: cfg.record_every,
        seed: cfg.dynamics_seed.expect("resolved config"),
    };
    let rows = correlation_curve(&d, &lcfg, &cfg.sampler, cfg.n_trajectories)?;
    Ok(Table::new(rows, 0))
}

#[derive(Debug, Serialize)]
pub struct ChaosCsvRow {
    pub epsilon: f64,
    pub overlap_sq: Option<f64>,
    pub overlap_sq_stderr: Option<f64>,
    pub w2: Option<f64>,
    pub w2_stderr: Option<f64>,
    pub warnings: usize,
    pub error: Option<String>,
}

/// Disorder `k` and its chaos stream are the same for every epsilon.
pub fn chaos(cfg: &ChaosRunConfig) -> Result<Table<ChaosCsvRow>> {
    warn_above_static(cfg.p, cfg.beta);
    let jobs: Vec<(usize, usize)> = (0..cfg.epsilons.len())
        .flat_map(|e| (0..cfg.n_disorders).map(move |k| (e, k)))
        .collect();
    let results: Vec<Result<crate::lab::ChaosEstimate>> = jobs
        .par_iter()
        .map(|&(e, k)| {
            let d = sample_disorder(cfg.n, cfg.p, derive_seed(cfg.seed, &[0, k as u64]))?;
            let c = ChaosConfig::new(
                cfg.epsilons[e],
                cfg.n_samples,
                cfg.sampler.clone(),
                derive_seed(cfg.seed, &[1, k as u64]),
            )?;
            chaos_estimate(&d, cfg.beta, &c)
        })
        .collect();
    let mut failures = 0;
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    for (e, chunk) in results.chunks(cfg.n_disorders).enumerate() {
        let mut q2 = Vec::new();
        let mut w2 = Vec::new();
        let mut warnings = 0;
        let mut error = None;
        for r in chunk {
            match r {
                Ok(est) => {
                    q2.push(est.overlap_sq);
                    w2.push(est.w2);
                    warnings += est.warnings.len();
                }
                Err(err) => {
                    log::warn!("{err}");
                    error.get_or_insert_with(|| err.to_string());
                }
            }
        }
        if error.is_some() {
            failures += 1;
        }
        let stats = |xs: &[f64]| {
            if xs.is_empty() {
                (None, None)
            } else {
                let (m, se) = mean_stderr(xs);
                (Some(m), Some(if se.is_nan() { 0.0 } else { se }))
            }
        };
        let (overlap_sq, overlap_sq_stderr) = stats(&q2);
        let (w2_mean, w2_stderr) = stats(&w2);
        rows.push(ChaosCsvRow {
            epsilon: cfg.epsilons[e],
            overlap_sq,
            overlap_sq_stderr,
            w2: w2_mean,
            w2_stderr,
            warnings,
            error,
        });
    }
    Ok(Table::new(rows, failures))
}
