//! Static and dynamical phase boundaries of spherical p-spin models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixtures::MixtureFn;
use crate::optimize::{bracket_and_refine, unit_interval_grid};

/// Numerical slack below zero still accepted by [`rs_condition`].
pub const RS_SLACK: f64 = 1e-12;

/// One line of a phase-boundary scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub p: usize,
    pub beta_d: f64,
    pub beta_c: f64,
    pub argmin_q_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticBoundary {
    pub beta_c: f64,
    pub argmin_q: f64,
}

/// `-log(1 - q) - q`, accurate for small `q`.
pub(crate) fn log_excess(q: f64) -> f64 {
    if q.abs() < 0.05 {
        // q^2/2 + q^3/3 + ...
        let mut term = q * q;
        let mut sum = 0.0;
        for k in 2..40 {
            sum += term / k as f64;
            term *= q;
        }
        sum
    } else {
        -(-q).ln_1p() - q
    }
}

/// Objective whose infimum over `q in (0, 1)` is `beta_c(p)^2`:
/// `q^(-p) log(1/(1-q)) - q^(-(p-1)) = q^(-p) (log(1/(1-q)) - q)`.
pub fn beta_c_objective(p: usize, q: f64) -> f64 {
    (-(p as f64) * q.ln()).exp() * log_excess(q)
}

/// Static (replica-symmetric to 1-RSB) boundary of the pure p-spin model.
pub fn beta_c(p: usize, tol: f64) -> Result<StaticBoundary> {
    if p < 3 {
        return Err(Error::InvalidDegree(p, 3));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let m = bracket_and_refine(|q| beta_c_objective(p, q), &unit_interval_grid(), tol)?;
    Ok(StaticBoundary {
        beta_c: m.value.sqrt(),
        argmin_q: m.x,
    })
}

/// Dynamical boundary `sqrt((p-1)^(p-1) / (p (p-2)^(p-2)))` of the pure model.
pub fn beta_d_pure(p: usize) -> Result<f64> {
    if p < 3 {
        return Err(Error::InvalidDegree(p, 3));
    }
    let pf = p as f64;
    let log_sq = (pf - 1.0) * (pf - 1.0).ln() - pf.ln() - (pf - 2.0) * (pf - 2.0).ln();
    Ok((0.5 * log_sq).exp())
}

/// Dynamical boundary of a general mixture: the smallest `beta` at which the
/// plateau equation `beta^2 xi'(q) (1 - q) = q` has a root in `(0, 1)`, i.e.
/// `beta_d^2 = inf_q q / (xi'(q) (1 - q))`.
pub fn beta_d_mixture(xi: &MixtureFn, tol: f64) -> Result<f64> {
    if xi.max_degree() < 3 {
        return Err(Error::InvalidMixture(
            "dynamical boundary needs a coefficient of degree >= 3".into(),
        ));
    }
    if xi.coeff(1) != 0.0 {
        return Err(Error::InvalidMixture(
            "dynamical boundary needs xi'(0) = 0 (no degree-1 term)".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let ratio = |q: f64| {
        let d = xi.derivative(q) * (1.0 - q);
        if d > 0.0 {
            q / d
        } else {
            f64::INFINITY
        }
    };
    let m = bracket_and_refine(ratio, &unit_interval_grid(), tol)?;
    Ok(m.value.sqrt())
}

/// Whether `delta_0` minimizes the Crisanti-Sommers functional at `beta`:
/// `inf_q (-beta^2 xi(q) - q + log(1/(1-q))) >= 0`.
pub fn rs_condition(xi: &MixtureFn, beta: f64) -> bool {
    let b2 = beta * beta;
    let f = |q: f64| log_excess(q) - b2 * xi.value(q);
    match bracket_and_refine(f, &unit_interval_grid(), 1e-16) {
        Ok(m) => m.value >= -RS_SLACK,
        Err(_) => false,
    }
}

/// Both boundaries for the pure p-spin model.
pub fn phase_row(p: usize, tol: f64) -> Result<PhaseRow> {
    let bc = beta_c(p, tol)?;
    Ok(PhaseRow {
        p,
        beta_d: beta_d_pure(p)?,
        beta_c: bc.beta_c,
        argmin_q_c: bc.argmin_q,
    })
}
