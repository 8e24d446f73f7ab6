//! Monte Carlo estimators: correlation functions, overlap and transport
//! chaos, and crude lower bounds on derivative norms of `H`.

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assignment::w2_empirical;
use super::disorder::{correlate_disorder, eta, gradient, hamiltonian, hessian, hessian_quadratic_gradient, tangent, Disorder};
use super::dynamics::{langevin_run, LangevinConfig};
use super::sampler::{equilibrium_chain, SamplerSettings};
use super::seeds::derive_seed;
use super::tensor::{dot, Configuration};
use crate::error::{Error, Result};

/// Mean and standard error from `n_batches` consecutive batch averages.
/// Trailing samples that do not fill a batch are dropped.
pub fn batch_means(series: &[f64], n_batches: usize) -> Result<(f64, f64)> {
    if n_batches < 2 || series.len() < n_batches {
        return Err(Error::Domain(format!(
            "batch means needs at least 2 batches and one sample per batch (got {} samples, {n_batches} batches)",
            series.len()
        )));
    }
    let size = series.len() / n_batches;
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    Ok(mean_stderr(&means))
}

/// Sample mean and standard error of the mean (NaN error for one sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub t: f64,
    pub c: f64,
    pub stderr: f64,
}

/// `C_N(t)`: mean of `<s_0, s_t>/N` over `n_trajectories` Langevin runs started
/// from thinned draws of one equilibrium chain at `cfg.beta`.
pub fn correlation_curve(
    d: &Disorder,
    cfg: &LangevinConfig,
    sampler: &SamplerSettings,
    n_trajectories: usize,
) -> Result<Vec<CorrelationPoint>> {
    cfg.validate()?;
    if n_trajectories == 0 {
        return Err(Error::Domain("need at least one trajectory".into()));
    }
    let starts = equilibrium_chain(d, cfg.beta, sampler, n_trajectories, derive_seed(cfg.seed, &[0]))?.samples;
    let overlaps: Vec<Vec<(f64, f64)>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s0)| {
            let run = LangevinConfig {
                seed: derive_seed(cfg.seed, &[1, i as u64]),
                ..cfg.clone()
            };
            let traj = langevin_run(d, s0, &run)?;
            Ok(traj.iter().map(|(t, s)| (*t, s0.overlap(s))).collect())
        })
        .collect::<Result<_>>()?;

    let len = overlaps[0].len();
    Ok((0..len)
        .map(|k| {
            if k == 0 {
                return CorrelationPoint { t: 0.0, c: 1.0, stderr: 0.0 };
            }
            let xs: Vec<f64> = overlaps.iter().map(|o| o[k].1).collect();
            let (c, stderr) = mean_stderr(&xs);
            CorrelationPoint { t: overlaps[0][k].0, c, stderr }
        })
        .collect())
}

/// First time the curve falls below `level`, linearly interpolated.
pub fn time_below(curve: &[CorrelationPoint], level: f64) -> Option<f64> {
    curve.windows(2).find(|w| w[1].c < level).map(|w| {
        let (a, b) = (w[0], w[1]);
        if a.c <= level {
            return a.t;
        }
        a.t + (a.c - level) / (a.c - b.c) * (b.t - a.t)
    })
}

/// Largest difference between `C_N` at step `h` and at `h/2` (same starts,
/// same recording times).
pub fn step_halving_gap(
    d: &Disorder,
    cfg: &LangevinConfig,
    sampler: &SamplerSettings,
    n_trajectories: usize,
) -> Result<f64> {
    let coarse = correlation_curve(d, cfg, sampler, n_trajectories)?;
    let fine_cfg = LangevinConfig {
        step: cfg.step / 2.0,
        n_steps: cfg.n_steps * 2,
        record_every: cfg.record_every * 2,
        ..cfg.clone()
    };
    let fine = correlation_curve(d, &fine_cfg, sampler, n_trajectories)?;
    Ok(coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a.c - b.c).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosConfig {
    pub epsilon: f64,
    /// `sqrt(2 epsilon - epsilon^2)`, kept in sync by [`ChaosConfig::new`].
    pub eta: f64,
    pub n_samples: usize,
    pub sampler: SamplerSettings,
    pub seed: u64,
}

impl ChaosConfig {
    pub fn new(epsilon: f64, n_samples: usize, sampler: SamplerSettings, seed: u64) -> Result<Self> {
        let cfg = ChaosConfig {
            epsilon,
            eta: eta(epsilon),
            n_samples,
            sampler,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Domain(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if (self.eta * self.eta - (2.0 * self.epsilon - self.epsilon * self.epsilon)).abs() > 1e-12 {
            return Err(Error::Domain(format!("eta {} inconsistent with epsilon {}", self.eta, self.epsilon)));
        }
        if self.n_samples == 0 {
            return Err(Error::Domain("n_samples must be positive".into()));
        }
        self.sampler.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChaosEstimate {
    pub overlap_sq: f64,
    pub overlap_sq_stderr: f64,
    pub w2: f64,
    pub warnings: Vec<String>,
}

/// Paired samples `s ~ mu_beta(G)` and `s' ~ mu_beta(G^eps)`. The disorder
/// noise and both sampler streams depend only on `chaos.seed`, so different
/// `epsilon` values share random numbers.
pub fn chaos_samples(
    d: &Disorder,
    beta: f64,
    chaos: &ChaosConfig,
) -> Result<(Vec<Configuration>, Vec<Configuration>, Vec<String>)> {
    chaos.validate()?;
    if let Ok(b) = crate::phase::beta_c(d.p().max(3), 1e-8) {
        if d.p() >= 3 && beta >= b.beta_c {
            log::warn!("beta = {beta} is not below the static threshold {:.4}", b.beta_c);
        }
    }
    let perturbed = correlate_disorder(d, chaos.epsilon, derive_seed(chaos.seed, &[0]))?;
    let a = equilibrium_chain(d, beta, &chaos.sampler, chaos.n_samples, derive_seed(chaos.seed, &[1]))?;
    let b = equilibrium_chain(&perturbed, beta, &chaos.sampler, chaos.n_samples, derive_seed(chaos.seed, &[2]))?;
    let mut warnings = a.diagnostics.warnings;
    warnings.extend(b.diagnostics.warnings);
    Ok((a.samples, b.samples, warnings))
}

/// Mean and standard error of `(<s, s'>/N)^2` over paired samples.
pub fn overlap_chaos(d: &Disorder, beta: f64, chaos: &ChaosConfig) -> Result<(f64, f64)> {
    let (a, b, _) = chaos_samples(d, beta, chaos)?;
    Ok(overlap_sq(&a, &b))
}

fn overlap_sq(a: &[Configuration], b: &[Configuration]) -> (f64, f64) {
    let q2: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.overlap(y).powi(2)).collect();
    let (m, se) = mean_stderr(&q2);
    (m, if se.is_nan() { 0.0 } else { se })
}

/// Both chaos estimators from one set of paired samples.
pub fn chaos_estimate(d: &Disorder, beta: f64, chaos: &ChaosConfig) -> Result<ChaosEstimate> {
    let (a, b, warnings) = chaos_samples(d, beta, chaos)?;
    let (overlap_sq, overlap_sq_stderr) = overlap_sq(&a, &b);
    Ok(ChaosEstimate {
        overlap_sq,
        overlap_sq_stderr,
        w2: w2_empirical(&a, &b)?,
        warnings,
    })
}

const ASCENT_ITERS: usize = 400;

/// Value and Euclidean gradient of the quantity being maximized.
fn norm_objective(d: &Disorder, j: usize, sign: f64, s: &Configuration) -> Result<(f64, Vec<f64>)> {
    match j {
        0 => {
            let h = hamiltonian(d, s)?;
            let g = gradient(d, s)?;
            Ok((sign * h, g.into_iter().map(|x| sign * x).collect()))
        }
        1 => {
            let g = gradient(d, s)?;
            let hess = hessian(d, s)?;
            let v = nalgebra::DVector::from_vec(g.clone());
            let grad = (&hess * &v).iter().copied().collect();
            Ok((0.5 * dot(&g, &g), grad))
        }
        2 => {
            let eig = SymmetricEigen::new(hessian(d, s)?);
            let k = eig.eigenvalues.iamax();
            let lambda = eig.eigenvalues[k];
            let w: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let sgn = lambda.signum();
            let grad = hessian_quadratic_gradient(d, s.coords(), &w)
                .into_iter()
                .map(|x| sgn * x)
                .collect();
            Ok((lambda.abs(), grad))
        }
        _ => Err(Error::Domain(format!("derivative order {j} must be 0, 1 or 2"))),
    }
}

fn report(j: usize, value: f64) -> f64 {
    match j {
        1 => (2.0 * value).sqrt(),
        _ => value,
    }
}

/// Riemannian gradient ascent with adaptive step; returns the best value.
fn ascend(d: &Disorder, j: usize, sign: f64, start: &Configuration) -> Result<f64> {
    let n = start.n() as f64;
    let mut s = start.clone();
    let (mut f, mut g) = norm_objective(d, j, sign, &s)?;
    tangent(s.coords(), &mut g);
    let mut gnorm = dot(&g, &g).sqrt();
    if gnorm == 0.0 {
        return Ok(report(j, f));
    }
    let mut eta = 0.1 * n.sqrt() / gnorm;
    for _ in 0..ASCENT_ITERS {
        if eta * gnorm < 1e-12 * n.sqrt() {
            break;
        }
        let next: Vec<f64> = s.coords().iter().zip(&g).map(|(x, y)| x + eta * y).collect();
        let cand = Configuration::project(next)?;
        let (fc, mut gc) = norm_objective(d, j, sign, &cand)?;
        if fc > f {
            s = cand;
            f = fc;
            tangent(s.coords(), &mut gc);
            g = gc;
            gnorm = dot(&g, &g).sqrt();
            eta *= 1.5;
        } else {
            eta *= 0.5;
        }
    }
    Ok(report(j, f))
}

/// Best value of `|H|` (`j = 0`), `|grad H|` (`j = 1`) or the Hessian operator
/// norm (`j = 2`) found by ascent from each of `starts`.
pub fn sup_norm_from(d: &Disorder, j: usize, starts: &[Configuration]) -> Result<f64> {
    let mut best = 0.0f64;
    for s in starts {
        if j == 0 {
            best = best.max(ascend(d, 0, 1.0, s)?).max(ascend(d, 0, -1.0, s)?);
        } else {
            best = best.max(ascend(d, j, 1.0, s)?);
        }
    }
    Ok(best)
}

/// Lower bound on `sup_{S_N} |grad^j H|` from `n_restarts` random starts.
/// Starts are drawn from a stream fixed by the disorder seed, so increasing
/// `n_restarts` only adds starts.
pub fn sup_norm_estimate(d: &Disorder, j: usize, n_restarts: usize) -> Result<f64> {
    if j > 2 {
        return Err(Error::Domain(format!("derivative order {j} must be 0, 1 or 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(d.lineage().seed, &[0x5u64, j as u64]));
    let starts: Vec<Configuration> = (0..n_restarts).map(|_| Configuration::uniform(d.n(), &mut rng)).collect();
    sup_norm_from(d, j, &starts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::disorder::sample_disorder;

    #[test]
    fn batch_means_of_constant_and_errors() {
        let (m, se) = batch_means(&[2.0; 100], 10).unwrap();
        assert_eq!((m, se), (2.0, 0.0));
        assert!(batch_means(&[1.0; 3], 5).is_err());
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (m, _) = batch_means(&xs, 4).unwrap();
        assert_eq!(m, 49.5);
    }

    #[test]
    fn time_below_interpolates() {
        let pts = |cs: &[f64]| {
            cs.iter()
                .enumerate()
                .map(|(i, &c)| CorrelationPoint { t: i as f64, c, stderr: 0.0 })
                .collect::<Vec<_>>()
        };
        assert_eq!(time_below(&pts(&[1.0, 0.8, 0.4]), 0.5), Some(1.75));
        assert_eq!(time_below(&pts(&[1.0, 0.8]), 0.5), None);
    }

    #[test]
    fn correlation_curve_starts_at_one_and_decays_freely() {
        let d = sample_disorder(16, 3, 2).unwrap();
        let cfg = LangevinConfig {
            beta: 0.0,
            step: 0.01,
            n_steps: 1000,
            record_every: 50,
            seed: 3,
        };
        let curve = correlation_curve(&d, &cfg, &SamplerSettings::default(), 40).unwrap();
        assert_eq!(curve[0].c, 1.0);
        assert!(curve.windows(2).all(|w| w[1].t > w[0].t));
        assert!(curve.last().unwrap().c.abs() < 0.1);
        let again = correlation_curve(&d, &cfg, &SamplerSettings::default(), 40).unwrap();
        assert_eq!(curve, again);
    }

    #[test]
    fn chaos_config_checks() {
        let c = ChaosConfig::new(0.3, 10, SamplerSettings::default(), 0).unwrap();
        assert!((c.eta * c.eta - 0.51).abs() < 1e-12);
        assert!(ChaosConfig::new(1.2, 10, SamplerSettings::default(), 0).is_err());
        let bad = ChaosConfig { eta: 0.1, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn overlap_chaos_is_bounded() {
        let d = sample_disorder(8, 3, 4).unwrap();
        let settings = SamplerSettings {
            burn_in: 200,
            thin: 5,
            ..Default::default()
        };
        for eps in [0.0, 0.5, 1.0] {
            let chaos = ChaosConfig::new(eps, 40, settings.clone(), 9).unwrap();
            let (m, se) = overlap_chaos(&d, 0.5, &chaos).unwrap();
            assert!((0.0..=1.0).contains(&m) && se >= 0.0);
        }
    }

    #[test]
    fn sup_norm_is_monotone_in_restarts() {
        let d = sample_disorder(8, 3, 6).unwrap();
        for j in 0..3 {
            let mut prev = 0.0;
            for r in 1..4 {
                let v = sup_norm_estimate(&d, j, r).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
        assert!(sup_norm_estimate(&d, 3, 1).is_err());
    }

    #[test]
    fn sup_norm_ascent_improves_on_start() {
        let d = sample_disorder(10, 3, 8).unwrap();
        let s = Configuration::uniform(10, &mut ChaCha8Rng::seed_from_u64(1));
        let h0 = hamiltonian(&d, &s).unwrap().abs();
        assert!(sup_norm_from(&d, 0, std::slice::from_ref(&s)).unwrap() >= h0);
        let g0 = gradient(&d, &s).unwrap();
        assert!(sup_norm_from(&d, 1, &[s]).unwrap() >= dot(&g0, &g0).sqrt());
    }

    #[test]
    fn sup_norm_sign_flip_invariant_for_even_degree() {
        let d = sample_disorder(6, 4, 2).unwrap();
        let s = Configuration::uniform(6, &mut ChaCha8Rng::seed_from_u64(2));
        for j in 0..3 {
            let a = sup_norm_from(&d, j, std::slice::from_ref(&s)).unwrap();
            let b = sup_norm_from(&d, j, &[s.negated()]).unwrap();
            assert!((a - b).abs() <= 1e-9 * a, "j = {j}: {a} vs {b}");
        }
    }
}
