//! Approximate Gibbs sampling from `mu_beta(ds) ~ exp(beta H(s))` on the sphere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::disorder::{hamiltonian, Disorder};
use super::dynamics::{langevin_run, LangevinConfig};
use super::seeds::derive_seed;
use super::tensor::Configuration;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    /// Long Langevin burn-in from a uniform start.
    LangevinEquilibrated,
    /// Parallel tempering over a geometric ladder `beta/8 .. beta`.
    ReplicaExchange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    pub method: SamplerMethod,
    pub rungs: usize,
    /// Replica-exchange sweeps before the first sample; the proposal scale
    /// adapts only during this phase.
    pub burn_in: usize,
    /// Replica-exchange sweeps between samples.
    pub thin: usize,
    pub langevin_step: f64,
    pub langevin_burn_in: f64,
    /// Langevin time between samples.
    pub langevin_thin: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            method: SamplerMethod::ReplicaExchange,
            rungs: 8,
            burn_in: 2000,
            thin: 20,
            langevin_step: 0.005,
            langevin_burn_in: 20.0,
            langevin_thin: 2.0,
        }
    }
}

impl SamplerSettings {
    pub fn with_method(method: SamplerMethod) -> Self {
        SamplerSettings {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rungs == 0 || self.thin == 0 {
            return Err(Error::Domain("sampler needs at least one rung and thin >= 1".into()));
        }
        for (name, v) in [
            ("langevin_step", self.langevin_step),
            ("langevin_burn_in", self.langevin_burn_in),
            ("langevin_thin", self.langevin_thin),
        ] {
            if !(v >= 0.0 && v.is_finite()) || (name != "langevin_burn_in" && v == 0.0) {
                return Err(Error::Domain(format!("{name} = {v} is not a valid time")));
            }
        }
        Ok(())
    }
}

/// Below this swap rate a rung pair is reported as poorly mixing.
pub const MIN_SWAP_RATE: f64 = 0.01;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub betas: Vec<f64>,
    /// Metropolis acceptance per rung after burn-in.
    pub acceptance: Vec<f64>,
    /// Swap acceptance per adjacent pair after burn-in.
    pub swap_rates: Vec<f64>,
    /// `H/N` of the target chain, one entry per post-burn-in sweep
    /// (replica exchange) or per sample (Langevin).
    pub energy_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub samples: Vec<Configuration>,
    pub diagnostics: Diagnostics,
}

/// One approximate Gibbs sample with default settings for `method`.
pub fn equilibrium_sample(
    d: &Disorder,
    beta: f64,
    method: SamplerMethod,
    seed: u64,
) -> Result<(Configuration, Diagnostics)> {
    let mut chain = equilibrium_chain(d, beta, &SamplerSettings::with_method(method), 1, seed)?;
    Ok((chain.samples.pop().expect("one sample"), chain.diagnostics))
}

/// `n_samples` thinned draws from a single chain.
pub fn equilibrium_chain(
    d: &Disorder,
    beta: f64,
    settings: &SamplerSettings,
    n_samples: usize,
    seed: u64,
) -> Result<Chain> {
    settings.validate()?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta = {beta} must be finite and non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if beta == 0.0 {
        let samples: Vec<Configuration> = (0..n_samples).map(|_| Configuration::uniform(d.n(), &mut rng)).collect();
        let energy_trace = samples
            .iter()
            .map(|s| hamiltonian(d, s).map(|h| h / d.n() as f64))
            .collect::<Result<_>>()?;
        return Ok(Chain {
            samples,
            diagnostics: Diagnostics {
                betas: vec![0.0],
                energy_trace,
                ..Default::default()
            },
        });
    }
    match settings.method {
        SamplerMethod::ReplicaExchange => replica_exchange(d, beta, settings, n_samples, &mut rng),
        SamplerMethod::LangevinEquilibrated => langevin_chain(d, beta, settings, n_samples, seed),
    }
}

fn langevin_chain(d: &Disorder, beta: f64, settings: &SamplerSettings, n_samples: usize, seed: u64) -> Result<Chain> {
    let h = settings.langevin_step;
    let burn_steps = (settings.langevin_burn_in / h).round() as usize;
    let thin_steps = ((settings.langevin_thin / h).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let start = Configuration::uniform(d.n(), &mut rng);
    let burn = LangevinConfig {
        beta,
        step: h,
        n_steps: burn_steps,
        record_every: burn_steps.max(1),
        seed: derive_seed(seed, &[1]),
    };
    let start = langevin_run(d, &start, &burn)?.pop().expect("start is recorded").1;
    let run = LangevinConfig {
        beta,
        step: h,
        n_steps: n_samples * thin_steps,
        record_every: thin_steps,
        seed: derive_seed(seed, &[2]),
    };
    let samples: Vec<Configuration> = langevin_run(d, &start, &run)?.into_iter().skip(1).map(|(_, s)| s).collect();
    let energy_trace = samples
        .iter()
        .map(|s| hamiltonian(d, s).map(|e| e / d.n() as f64))
        .collect::<Result<_>>()?;
    Ok(Chain {
        samples,
        diagnostics: Diagnostics {
            betas: vec![beta],
            energy_trace,
            ..Default::default()
        },
    })
}

/// Geometric ladder from `beta / 8` up to `beta` (last rung is the target).
pub fn temperature_ladder(beta: f64, rungs: usize) -> Vec<f64> {
    if rungs == 1 {
        return vec![beta];
    }
    (0..rungs)
        .map(|i| {
            let frac = (rungs - 1 - i) as f64 / (rungs - 1) as f64;
            beta * 8f64.powf(-frac)
        })
        .collect()
}

const ADAPT_EVERY: usize = 50;
const TARGET_ACCEPTANCE: f64 = 0.3;

fn replica_exchange(
    d: &Disorder,
    beta: f64,
    settings: &SamplerSettings,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Chain> {
    let n = d.n();
    let betas = temperature_ladder(beta, settings.rungs);
    let k = betas.len();
    let mut states: Vec<Configuration> = (0..k).map(|_| Configuration::uniform(n, rng)).collect();
    let mut energies: Vec<f64> = states.iter().map(|s| hamiltonian(d, s)).collect::<Result<_>>()?;
    let mut scales = vec![0.5; k];
    let mut accepted = vec![0usize; k];
    let mut swaps = vec![0usize; k.saturating_sub(1)];
    let mut proposal = vec![0.0; n];

    let total = settings.burn_in + n_samples * settings.thin;
    let mut samples = Vec::with_capacity(n_samples);
    let mut energy_trace = Vec::with_capacity(n_samples * settings.thin);
    for sweep in 0..total {
        if sweep == settings.burn_in {
            accepted.iter_mut().for_each(|a| *a = 0);
            swaps.iter_mut().for_each(|a| *a = 0);
        }
        for r in 0..k {
            for (x, &s) in proposal.iter_mut().zip(states[r].coords()) {
                let z: f64 = rng.sample(StandardNormal);
                *x = s + scales[r] * z;
            }
            let Ok(candidate) = Configuration::project(proposal.clone()) else {
                continue;
            };
            let e = hamiltonian(d, &candidate)?;
            let log_ratio = betas[r] * (e - energies[r]);
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                states[r] = candidate;
                energies[r] = e;
                accepted[r] += 1;
            }
        }
        for r in 0..k.saturating_sub(1) {
            let log_ratio = (betas[r] - betas[r + 1]) * (energies[r + 1] - energies[r]);
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                states.swap(r, r + 1);
                energies.swap(r, r + 1);
                swaps[r] += 1;
            }
        }
        if sweep < settings.burn_in {
            if (sweep + 1) % ADAPT_EVERY == 0 {
                for r in 0..k {
                    let rate = accepted[r] as f64 / ADAPT_EVERY as f64;
                    scales[r] = (scales[r] * if rate > TARGET_ACCEPTANCE { 1.2 } else { 1.0 / 1.2 }).clamp(1e-3, 4.0);
                    accepted[r] = 0;
                }
            }
        } else {
            energy_trace.push(energies[k - 1] / n as f64);
            if (sweep + 1 - settings.burn_in).is_multiple_of(settings.thin) {
                samples.push(states[k - 1].clone());
            }
        }
    }

    let sweeps = (total - settings.burn_in).max(1) as f64;
    let acceptance: Vec<f64> = accepted.iter().map(|&a| a as f64 / sweeps).collect();
    let swap_rates: Vec<f64> = swaps.iter().map(|&a| a as f64 / sweeps).collect();
    let mut warnings = Vec::new();
    for (r, &rate) in swap_rates.iter().enumerate() {
        if rate < MIN_SWAP_RATE {
            let msg = format!(
                "poor mixing: swap rate {rate:.4} between beta {:.4} and {:.4}",
                betas[r],
                betas[r + 1]
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(Chain {
        samples,
        diagnostics: Diagnostics {
            betas,
            acceptance,
            swap_rates,
            energy_trace,
            warnings,
        },
    })
}
