//! Euler-Maruyama discretization of spherical Langevin dynamics
//!
//! ```text
//! ds = (beta grad_sp H(s) - (N-1)/N s) dt + sqrt(2) P_s dB
//! ```
//!
//! with a radial retraction onto the sphere after every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::disorder::{spherical_gradient, Disorder};
use super::tensor::{dot, Configuration};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinConfig {
    pub beta: f64,
    pub step: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub seed: u64,
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta = {} must be finite and non-negative", self.beta)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Domain(format!("step = {} must be positive", self.step)));
        }
        if self.record_every == 0 {
            return Err(Error::Domain("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Recorded `(time, configuration)` pairs, starting with the initial point.
pub type Trajectory = Vec<(f64, Configuration)>;

/// Above this value of `step * beta * |grad H| / sqrt(N)` the scheme is
/// likely to be inaccurate.
pub const STABILITY_LIMIT: f64 = 0.1;

pub fn langevin_run(d: &Disorder, start: &Configuration, cfg: &LangevinConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = start.n();
    if n != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: n });
    }
    let nf = n as f64;
    let h = cfg.step;
    let noise = (2.0 * h).sqrt();
    let pull = h * (nf - 1.0) / nf;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let g0 = spherical_gradient(d, start)?;
    let scale = (dot(&g0, &g0) / nf).sqrt();
    if h * cfg.beta * scale >= STABILITY_LIMIT {
        log::warn!(
            "Langevin step {h} with beta {} and gradient scale {scale:.3} exceeds the stability guard",
            cfg.beta
        );
    }

    let mut out = Vec::with_capacity(cfg.n_steps / cfg.record_every + 1);
    out.push((0.0, start.clone()));
    let mut s = start.clone();
    let mut xi = vec![0.0; n];
    for step in 1..=cfg.n_steps {
        let grad = if cfg.beta != 0.0 {
            spherical_gradient(d, &s)?
        } else {
            vec![0.0; n]
        };
        xi.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        super::disorder::tangent(s.coords(), &mut xi);
        let next: Vec<f64> = s
            .coords()
            .iter()
            .zip(&grad)
            .zip(&xi)
            .map(|((&x, &g), &w)| x + h * cfg.beta * g - pull * x + noise * w)
            .collect();
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step });
        }
        s = Configuration::project(next).map_err(|_| Error::Divergence { step })?;
        if step % cfg.record_every == 0 {
            out.push((step as f64 * h, s.clone()));
        }
    }
    Ok(out)
}
