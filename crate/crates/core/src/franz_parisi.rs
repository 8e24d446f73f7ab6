//! Franz-Parisi potential of the pure spherical p-spin model.
//!
//! `F(q) = F_beta(xi_q) + beta^2 q^p + log(1 - q^2) / 2`, where `xi_q` is the
//! band mixture and `F_beta` is the Crisanti-Sommers free energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixtures::MixtureFn;
use crate::parisi::{minimize_cs_on_grid, minimizer_expectation, rs_value, CsSolution, GridSpec, SolverOptions};

/// One evaluation of the potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpPoint {
    pub q: f64,
    pub value: f64,
    pub rs_bound: f64,
    pub derivative: f64,
    pub band_free_energy: f64,
    pub kkt_residual: f64,
}

/// Longest run of strict increase found by [`find_window`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpWindow {
    /// Left end of the run; NaN when no run was found.
    pub q_under: f64,
    pub q_bar: f64,
    pub passes_fp: bool,
    /// Whether some run has at least [`MIN_RUN`] points inside `[1 - 1/(2p), 1)`.
    pub inside_band: bool,
}

impl FpWindow {
    pub fn is_empty(&self) -> bool {
        !(self.q_under < self.q_bar)
    }
}

/// Threshold on `q_under` for the clustering condition.
pub const FP_THRESHOLD: f64 = 0.9999;

/// Minimum number of consecutive grid points in an increasing run.
pub const MIN_RUN: usize = 3;

fn log_one_minus_q2(q: f64) -> f64 {
    (-q.abs()).ln_1p() + q.abs().ln_1p()
}

fn check_args(p: usize, beta: f64, q: f64) -> Result<()> {
    if p < 2 {
        return Err(Error::InvalidDegree(p, 2));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    if !(q.abs() < 1.0) {
        return Err(Error::Domain(format!("overlap q = {q} must satisfy |q| < 1")));
    }
    Ok(())
}

/// Solves the band problem at `q`. The knot `|q|/(1+|q|)` is added to the grid
/// so that the replica-symmetric bound is attained by a feasible CDF.
fn band_solve(p: usize, beta: f64, q: f64, spec: &GridSpec) -> Result<(MixtureFn, CsSolution)> {
    check_args(p, beta, q)?;
    let xi = MixtureFn::band(p, q)?;
    let knot = q.abs() / (1.0 + q.abs());
    let grid = spec.build(&[knot])?;
    let sol = minimize_cs_on_grid(&xi, beta, grid, &SolverOptions::default(), None)
        .map_err(|e| e.context(format!("band solve at p={p}, beta={beta}, q={q}")))?;
    if !sol.converged {
        return Err(Error::SolverStalled {
            iterations: sol.iterations,
            kkt: sol.kkt_residual,
        }
        .context(format!("band solve at p={p}, beta={beta}, q={q}")));
    }
    Ok((xi, sol))
}

fn envelope_derivative(p: usize, beta: f64, q: f64, sol: &CsSolution) -> f64 {
    let pf = p as f64;
    let q2 = q * q;
    let expect = minimizer_expectation(&sol.cdf, |x| {
        let base: f64 = q2 + (1.0 - q2) * x;
        (1.0 - x) * base.powi(p as i32 - 1)
    });
    let b2 = beta * beta;
    -b2 * pf * q * expect + b2 * pf * q.powi(p as i32 - 1) - q / ((1.0 - q) * (1.0 + q))
}

fn point_from(p: usize, beta: f64, q: f64, xi: &MixtureFn, sol: &CsSolution) -> Result<FpPoint> {
    let shift = beta * beta * q.powi(p as i32) + 0.5 * log_one_minus_q2(q);
    let knot = q.abs() / (1.0 + q.abs());
    Ok(FpPoint {
        q,
        value: sol.value + shift,
        rs_bound: rs_value(knot, xi, beta)? + shift,
        derivative: envelope_derivative(p, beta, q, sol),
        band_free_energy: sol.value,
        kkt_residual: sol.kkt_residual,
    })
}

/// `F_beta(q)` with its replica-symmetric bound and envelope derivative.
pub fn fp_value(p: usize, beta: f64, q: f64, spec: &GridSpec) -> Result<FpPoint> {
    let (xi, sol) = band_solve(p, beta, q, spec)?;
    point_from(p, beta, q, &xi, &sol)
}

/// Closed-form replica-symmetric bound `(beta^2/2)(1 + q^p) + q/2 + log(1-q)/2`.
pub fn fp_rs_bound(p: usize, beta: f64, q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("overlap q = {q} outside [0, 1)")));
    }
    check_args(p, beta, q)?;
    Ok(0.5 * beta * beta * (1.0 + q.powi(p as i32)) + 0.5 * q + 0.5 * (-q).ln_1p())
}

/// `dF/dq` from the envelope formula under the band minimizer.
pub fn fp_derivative(p: usize, beta: f64, q: f64, spec: &GridSpec) -> Result<f64> {
    let (_, sol) = band_solve(p, beta, q, spec)?;
    Ok(envelope_derivative(p, beta, q, &sol))
}

/// `d F_beta(xi_q) / d beta = beta E[xi_q(1) - xi_q(X)]`.
pub fn fp_dbeta(p: usize, beta: f64, q: f64, spec: &GridSpec) -> Result<f64> {
    let (xi, sol) = band_solve(p, beta, q, spec)?;
    let top = xi.value(1.0);
    Ok(beta * minimizer_expectation(&sol.cdf, |x| top - xi.value(x)))
}

/// Evaluates the potential on every point of `qs` in parallel. Failures are
/// collected and reported together.
pub fn fp_curve(p: usize, beta: f64, qs: &[f64], spec: &GridSpec) -> Result<Vec<FpPoint>> {
    let results: Vec<Result<FpPoint>> = qs.par_iter().map(|&q| fp_value(p, beta, q, spec)).collect();
    let failed: Vec<f64> = qs
        .iter()
        .zip(&results)
        .filter(|(_, r)| r.is_err())
        .map(|(&q, _)| q)
        .collect();
    if !failed.is_empty() {
        if let Some(Err(e)) = results.into_iter().find(|r| r.is_err()) {
            log::warn!("first failure: {e}");
        }
        return Err(Error::PartialScan { failed });
    }
    Ok(results.into_iter().map(|r| r.expect("checked above")).collect())
}

/// Default scan grid: 64 points geometric in `1 - q` from `9e-3` down to `1e-6`.
pub fn default_q_grid() -> Vec<f64> {
    geometric_q_grid(64, 9e-3, 1e-6)
}

/// `n` points `1 - gap_hi (gap_lo/gap_hi)^(k/(n-1))`, increasing in `q`.
pub fn geometric_q_grid(n: usize, gap_hi: f64, gap_lo: f64) -> Vec<f64> {
    let ratio = (gap_lo / gap_hi).powf(1.0 / (n.max(2) - 1) as f64);
    (0..n).map(|k| 1.0 - gap_hi * ratio.powi(k as i32)).collect()
}

/// Maximal runs `[i, k]` of consecutive indices with
/// `values[j+1] - values[j] > noise`, keeping those with at least `MIN_RUN`
/// points.
pub fn increasing_runs(values: &[f64], noise: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for j in 0..values.len() {
        let up = j + 1 < values.len() && values[j + 1] - values[j] > noise;
        if !up {
            if j + 1 - start >= MIN_RUN {
                runs.push((start, j));
            }
            start = j + 1;
        }
    }
    runs
}

/// Window detection on an already computed curve.
pub fn window_from_curve(p: usize, curve: &[FpPoint]) -> FpWindow {
    let noise = 10.0 * curve.iter().map(|c| c.kkt_residual).fold(0.0, f64::max) + 1e-12;
    let values: Vec<f64> = curve.iter().map(|c| c.value).collect();
    let runs = increasing_runs(&values, noise);
    let band = 1.0 - 0.5 / p as f64;
    let inside_band = runs.iter().any(|&(i, k)| {
        let first_inside = (i..=k).find(|&j| curve[j].q >= band);
        first_inside.is_some_and(|f| k + 1 - f >= MIN_RUN)
    });
    // longest run, ties to the larger q
    match runs.iter().max_by_key(|&&(i, k)| (k - i, i)) {
        Some(&(i, k)) => FpWindow {
            q_under: curve[i].q,
            q_bar: curve[k].q,
            passes_fp: curve[i].q >= FP_THRESHOLD,
            inside_band,
        },
        None => FpWindow {
            q_under: f64::NAN,
            q_bar: f64::NAN,
            passes_fp: false,
            inside_band: false,
        },
    }
}

/// Scans `q_grid` for an interval on which `F_beta` is strictly increasing.
pub fn find_window(p: usize, beta: f64, q_grid: &[f64], spec: &GridSpec) -> Result<FpWindow> {
    validate_q_grid(q_grid)?;
    let curve = fp_curve(p, beta, q_grid, spec)?;
    Ok(window_from_curve(p, &curve))
}

pub(crate) fn validate_q_grid(q_grid: &[f64]) -> Result<()> {
    if q_grid.len() < 32 {
        return Err(Error::Domain(format!(
            "window scan needs at least 32 grid points, got {}",
            q_grid.len()
        )));
    }
    if !q_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Domain("window grid must be strictly increasing".into()));
    }
    if !(q_grid[0] > 0.99 && q_grid[q_grid.len() - 1] < 1.0) {
        return Err(Error::Domain("window grid must lie inside (0.99, 1)".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parisi::minimize_cs;
    use crate::phase::beta_c;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn value_at_zero_is_annealed() {
        for &(p, beta) in &[(3usize, 0.8), (4, 1.2), (5, 1.0)] {
            let pt = fp_value(p, beta, 0.0, &spec()).unwrap();
            assert_abs_diff_eq!(pt.value, 0.5 * beta * beta, epsilon = 1e-5);
            assert_abs_diff_eq!(pt.rs_bound, 0.5 * beta * beta, epsilon = 1e-12);
        }
    }

    #[test]
    fn value_at_half_matches_rs_oracle() {
        // band minimizer is a point mass at t = 0.240373 (one-dimensional oracle)
        let pt = fp_value(3, 1.0, 0.5, &spec()).unwrap();
        assert_abs_diff_eq!(pt.value, 0.46208172999835, epsilon = 1e-6);
        assert!(pt.value < 0.5);
        assert!(pt.value <= fp_rs_bound(3, 1.0, 0.5).unwrap() + 1e-8);
    }

    #[test]
    fn rs_bound_examples() {
        assert_eq!(fp_rs_bound(5, 1.3, 0.0).unwrap(), 0.5 * 1.3 * 1.3);
        assert_abs_diff_eq!(fp_rs_bound(3, 1.0, 0.5).unwrap(), 0.5625 + 0.25 + 0.5 * 0.5f64.ln(), epsilon = 1e-15);
        assert!(fp_rs_bound(3, 1.0, 1.0).is_err());
        assert!(fp_rs_bound(3, 1.0, -0.2).is_err());
    }

    #[test]
    fn jensen_bound_and_maximum_at_zero() {
        for &(p, beta) in &[(3usize, 1.0), (4, 1.3)] {
            assert!(beta < beta_c(p, 1e-10).unwrap().beta_c);
            let qs: Vec<f64> = (0..100).map(|i| i as f64 / 99.0 * (1.0 - 1e-3)).collect();
            let curve = fp_curve(p, beta, &qs, &spec()).unwrap();
            for pt in &curve {
                assert!(pt.value <= pt.rs_bound + 1e-8, "p={p} q={} {} > {}", pt.q, pt.value, pt.rs_bound);
                assert!(pt.value <= 0.5 * beta * beta + 1e-8);
                if pt.q >= 0.05 {
                    assert!(pt.value < 0.5 * beta * beta - 1e-6, "q={}", pt.q);
                }
            }
        }
    }

    #[test]
    fn symmetry_in_q() {
        for &q in &[0.1, 0.4, 0.8] {
            let a = fp_value(4, 1.2, q, &spec()).unwrap().value;
            let b = fp_value(4, 1.2, -q, &spec()).unwrap().value;
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            let a = fp_value(3, 1.0, q, &spec()).unwrap().value;
            let b = fp_value(3, 1.0, -q, &spec()).unwrap().value;
            assert!(a >= b);
        }
    }

    #[test]
    fn closed_forms_at_delta_zero_minimizer() {
        // for q != 0 the band mixture has a linear term, so delta_0 is optimal only at q = 0
        let (p, beta) = (3usize, 0.9);
        assert_eq!(fp_derivative(p, beta, 0.0, &spec()).unwrap(), 0.0);
        assert_abs_diff_eq!(fp_dbeta(p, beta, 0.0, &spec()).unwrap(), beta, epsilon = 1e-12);
        // with a single atom at t the envelope integrand is evaluated at t
        let q = 0.5f64;
        let (_, sol) = band_solve(p, beta, q, &spec()).unwrap();
        let atoms: Vec<(f64, f64)> = sol.cdf.masses().filter(|a| a.1 > 0.0).collect();
        let pf = p as f64;
        let b2 = beta * beta;
        let expect: f64 = atoms
            .iter()
            .map(|&(t, w)| w * (1.0 - t) * (q * q + (1.0 - q * q) * t).powi(p as i32 - 1))
            .sum();
        let closed = -b2 * pf * q * expect + b2 * pf * q.powi(p as i32 - 1) - q / (1.0 - q * q);
        assert_abs_diff_eq!(fp_derivative(p, beta, q, &spec()).unwrap(), closed, epsilon = 1e-12);
    }

    fn fd_check(p: usize, beta: f64, q: f64, tol: f64) {
        let h = 1e-4f64.min((1.0 - q) / 10.0);
        let up = fp_value(p, beta, q + h, &spec()).unwrap().value;
        let down = fp_value(p, beta, q - h, &spec()).unwrap().value;
        let fd = (up - down) / (2.0 * h);
        let d = fp_derivative(p, beta, q, &spec()).unwrap();
        assert!((fd - d).abs() <= tol * d.abs().max(1e-3), "p={p} beta={beta} q={q}: fd={fd} envelope={d}");
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for &q in &[0.1, 0.5, 0.7, 0.9] {
            fd_check(3, 1.0, q, 1e-3);
            fd_check(4, 1.3, q, 1e-3);
        }
        for &q in &[0.95, 0.99, 0.998] {
            fd_check(3, 1.0, q, 1e-2);
            fd_check(4, 1.3, q, 1e-2);
        }
    }

    #[test]
    fn dbeta_matches_finite_differences() {
        let (p, beta, q) = (3usize, 1.0, 0.5);
        let xi = MixtureFn::band(p, q).unwrap();
        let h = 1e-4;
        let f = |b: f64| minimize_cs(&xi, b, &spec()).unwrap().value;
        let fd = (f(beta + h) - f(beta - h)) / (2.0 * h);
        let d = fp_dbeta(p, beta, q, &spec()).unwrap();
        assert!((fd - d).abs() < 1e-3 * d.abs(), "fd={fd} d={d}");
    }

    #[test]
    fn dbeta_bounded_near_one() {
        for p in [16usize, 64] {
            let lower = 1.0 - 0.5 / p as f64;
            let qs = geometric_q_grid(12, 1.0 - lower, 1e-6);
            let max = qs
                .iter()
                .map(|&q| fp_dbeta(p, 2.0, q, &spec()).unwrap())
                .fold(0.0, f64::max);
            // xi_q(1) <= 1, so the derivative is at most beta
            assert!(max <= 2.0 + 1e-12, "p={p} max={max}");
        }
    }

    #[test]
    fn no_window_in_deep_rs_regime() {
        let w = find_window(3, 0.5, &default_q_grid(), &spec()).unwrap();
        assert!(!w.passes_fp);
        assert!(w.is_empty());
        assert!(!w.inside_band);
    }

    #[test]
    fn runs_detection() {
        let v = [0.0, 1.0, 2.0, 1.5, 1.6, 1.7, 1.8, 0.0];
        assert_eq!(increasing_runs(&v, 0.0), vec![(0, 2), (3, 6)]);
        assert_eq!(increasing_runs(&v, 0.2), vec![(0, 2)]);
        assert!(increasing_runs(&[3.0, 2.0, 1.0], 0.0).is_empty());
    }

    #[test]
    fn window_grid_validation() {
        assert!(find_window(3, 0.5, &[0.995, 0.996], &spec()).is_err());
        let mut g = default_q_grid();
        g[0] = 0.5;
        assert!(find_window(3, 0.5, &g, &spec()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn rs_bound_is_substitution(p in 2usize..40, beta in 0.1f64..3.0, q in 0.0f64..0.999) {
            let xi = MixtureFn::band(p, q).unwrap();
            let sub = rs_value(q / (1.0 + q), &xi, beta).unwrap()
                + beta * beta * q.powi(p as i32)
                + 0.5 * log_one_minus_q2(q);
            let closed = fp_rs_bound(p, beta, q).unwrap();
            prop_assert!((sub - closed).abs() <= 1e-10 * closed.abs().max(1.0), "{} vs {}", sub, closed);
        }
    }
}
