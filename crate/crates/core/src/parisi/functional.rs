//! Exact evaluation of the Crisanti-Sommers functional on step CDFs.
//!
//! For a measure `zeta` with CDF `c(t)`, the functional is
//!
//! ```text
//! P(zeta) = 1/2 [ beta^2 int_0^1 xi'(t) c(t) dt + int_0^qhat dt / phi(t) + log(1 - qhat) ]
//! phi(t)  = int_t^1 c(s) ds
//! ```
//!
//! Every measure handled here has a piecewise constant CDF, so `phi` is
//! piecewise linear and each segment of `int dt / phi` has a closed form.

use super::measure::{CdfOnGrid, ParisiMeasure};
use crate::error::{Error, Result};
use crate::mixtures::MixtureFn;

/// `log(1 + u) / u`, continuous at `u = 0`.
pub(crate) fn log1p_ratio(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u / 2.0 + u * u / 3.0 - u * u * u / 4.0
    } else {
        u.ln_1p() / u
    }
}

/// `int_0^len ds / (phi_right + level * s)`: the `1/phi` integral over one
/// segment, written in terms of the value of `phi` at its right end.
pub(crate) fn segment_inverse_phi(level: f64, len: f64, phi_right: f64) -> f64 {
    let u = level * len / phi_right;
    len / phi_right * log1p_ratio(u)
}

/// Step CDF: `levels[i]` on `[knots[i], knots[i+1])`, `knots[n] := end`, and
/// `c = 1` on `[end, 1]`.
pub(crate) fn step_functional(
    knots: &[f64],
    levels: &[f64],
    end: f64,
    xi: &MixtureFn,
    beta: f64,
) -> Result<f64> {
    debug_assert_eq!(knots.len(), levels.len());
    let n = knots.len();
    let right = |i: usize| if i + 1 < n { knots[i + 1] } else { end };

    let mut energy = xi.value(1.0) - xi.value(end);
    for i in 0..n {
        energy += levels[i] * (xi.value(right(i)) - xi.value(knots[i]));
    }

    let mut phi = 1.0 - end;
    let mut integral = 0.0;
    for i in (0..n).rev() {
        let len = right(i) - knots[i];
        if len <= 0.0 {
            continue;
        }
        if !(phi > 0.0) {
            return Err(Error::Infeasible { t: right(i), phi });
        }
        integral += segment_inverse_phi(levels[i], len, phi);
        phi += levels[i] * len;
    }
    if end > 0.0 && !(phi > 0.0) {
        return Err(Error::Infeasible { t: 0.0, phi });
    }

    Ok(0.5 * (beta * beta * energy + integral + (-end).ln_1p()))
}

fn measure_steps(zeta: &ParisiMeasure) -> (Vec<f64>, Vec<f64>) {
    let atoms = zeta.atoms();
    let mut knots = vec![0.0];
    let mut levels = vec![0.0];
    let mut cum = 0.0;
    for &(q, w) in &atoms[..atoms.len() - 1] {
        cum += w;
        if q == 0.0 {
            levels[0] = cum;
        } else {
            knots.push(q);
            levels.push(cum);
        }
    }
    (knots, levels)
}

/// The Crisanti-Sommers functional `P_beta(zeta; xi)` of an atomic measure.
pub fn cs_functional(zeta: &ParisiMeasure, xi: &MixtureFn, beta: f64) -> Result<f64> {
    let (knots, levels) = measure_steps(zeta);
    step_functional(&knots, &levels, zeta.q_hat(), xi, beta)
}

/// Same functional, but with the `1/phi` integral carried on to `q_end >= qhat`
/// and `log(1 - q_end)` in place of `log(1 - qhat)`. The extra integral
/// `int_qhat^q_end dt / (1 - t)` telescopes against the logarithm, so the value
/// is unchanged.
pub fn cs_functional_extended(
    zeta: &ParisiMeasure,
    xi: &MixtureFn,
    beta: f64,
    q_end: f64,
) -> Result<f64> {
    let q_hat = zeta.q_hat();
    if !(q_end >= q_hat && q_end < 1.0) {
        return Err(Error::Domain(format!(
            "extension endpoint {q_end} must lie in [{q_hat}, 1)"
        )));
    }
    let (mut knots, mut levels) = measure_steps(zeta);
    if q_end > q_hat {
        if q_hat == 0.0 {
            levels[0] = 1.0;
        } else {
            knots.push(q_hat);
            levels.push(1.0);
        }
    }
    step_functional(&knots, &levels, q_end, xi, beta)
}

/// Functional of a grid CDF, integrating `1/phi` up to the grid endpoint.
pub fn cs_functional_cdf(cdf: &CdfOnGrid, xi: &MixtureFn, beta: f64) -> Result<f64> {
    let g = cdf.grid();
    let m = g.len() - 1;
    step_functional(&g[..m], &cdf.cdf()[..m], g[m], xi, beta)
}

/// Replica-symmetric value `P_beta(delta_t; xi)`:
/// `beta^2/2 (xi(1) - xi(t)) + t / (2 (1 - t)) + log(1 - t) / 2`.
pub fn rs_value(t: f64, xi: &MixtureFn, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!("replica-symmetric overlap t = {t} outside [0, 1)")));
    }
    Ok(0.5 * beta * beta * (xi.value(1.0) - xi.value(t)) + t / (2.0 * (1.0 - t)) + 0.5 * (-t).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Quadrature oracle: midpoint rule on the definition, with `phi` computed
    /// by brute-force integration of the CDF.
    fn quadrature_functional(zeta: &ParisiMeasure, xi: &MixtureFn, beta: f64) -> f64 {
        let cdf = |t: f64| zeta.atoms().iter().filter(|a| a.0 <= t).map(|a| a.1).sum::<f64>();
        let phi = |t: f64| {
            // exact integral of a step function
            let mut s = 0.0;
            let mut prev = t;
            let mut level = cdf(t);
            for &(q, _) in zeta.atoms() {
                if q > t {
                    s += level * (q - prev);
                    prev = q;
                    level = cdf(q);
                }
            }
            s + level * (1.0 - prev)
        };
        let n = 200_000;
        let mut energy = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            energy += xi.derivative(t) * cdf(t) / n as f64;
        }
        let q_hat = zeta.q_hat();
        let mut integral = 0.0;
        for i in 0..n {
            let t = q_hat * (i as f64 + 0.5) / n as f64;
            integral += q_hat / n as f64 / phi(t);
        }
        0.5 * (beta * beta * energy + integral + (1.0 - q_hat).ln())
    }

    #[test]
    fn delta_zero_is_annealed() {
        let xi = MixtureFn::pure(3).unwrap();
        let v = cs_functional(&ParisiMeasure::delta(0.0).unwrap(), &xi, 1.0).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn hand_evaluated_point_mass() {
        let xi = MixtureFn::pure(3).unwrap();
        let v = cs_functional(&ParisiMeasure::delta(0.3).unwrap(), &xi, 1.0).unwrap();
        assert_abs_diff_eq!(v, 0.5224482423163481, epsilon = 1e-12);
        assert_abs_diff_eq!(rs_value(0.3, &xi, 1.0).unwrap(), 0.5224482423163481, epsilon = 1e-12);
    }

    #[test]
    fn rs_value_edges() {
        let xi = MixtureFn::new(vec![0.0, 0.3, 0.7]).unwrap();
        assert_eq!(rs_value(0.0, &xi, 2.0).unwrap(), 2.0);
        assert!(rs_value(1.0 - 1e-12, &xi, 1.0).unwrap() > 1e10);
        assert!(rs_value(1.0, &xi, 1.0).is_err());
        assert!(rs_value(-0.1, &xi, 1.0).is_err());
    }

    #[test]
    fn matches_quadrature_on_multi_atom_measures() {
        let xi = MixtureFn::new(vec![0.1, 0.4, 0.5]).unwrap();
        let zeta = ParisiMeasure::new(vec![(0.0, 0.2), (0.35, 0.3), (0.8, 0.5)]).unwrap();
        let exact = cs_functional(&zeta, &xi, 1.3).unwrap();
        assert_abs_diff_eq!(exact, quadrature_functional(&zeta, &xi, 1.3), epsilon = 1e-8);

        let zeta = ParisiMeasure::new(vec![(0.1, 0.6), (0.6, 0.4)]).unwrap();
        let exact = cs_functional(&zeta, &xi, 0.7).unwrap();
        assert_abs_diff_eq!(exact, quadrature_functional(&zeta, &xi, 0.7), epsilon = 1e-8);
    }

    #[test]
    fn grid_cdf_agrees_with_measure() {
        let xi = MixtureFn::pure(4).unwrap();
        let grid = vec![0.0, 0.2, 0.5, 0.7, 0.9];
        let cdf = CdfOnGrid::new(grid, vec![0.1, 0.1, 0.6, 1.0, 1.0]).unwrap();
        let a = cs_functional_cdf(&cdf, &xi, 1.4).unwrap();
        let b = cs_functional(&cdf.to_measure().unwrap(), &xi, 1.4).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-13);
    }

    fn random_measure(rng: &mut impl Rng) -> ParisiMeasure {
        let k = rng.random_range(1..6);
        let mut locs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.97)).collect();
        if rng.random_bool(0.3) {
            locs[0] = 0.0;
        }
        locs.sort_by(f64::total_cmp);
        locs.dedup();
        let w: Vec<f64> = locs.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        ParisiMeasure::new(locs.into_iter().zip(w.into_iter().map(|x| x / total)).collect()).unwrap()
    }

    #[test]
    fn convexity_probe() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xi = MixtureFn::new(vec![0.05, 0.3, 0.65]).unwrap();
        for _ in 0..100 {
            let a = random_measure(&mut rng);
            let b = random_measure(&mut rng);
            let lambda = rng.random_range(0.01..0.99);
            let beta = rng.random_range(0.2..2.5);
            let mixed = ParisiMeasure::mix(&a, &b, lambda).unwrap();
            let lhs = cs_functional(&mixed, &xi, beta).unwrap();
            let rhs = lambda * cs_functional(&a, &xi, beta).unwrap()
                + (1.0 - lambda) * cs_functional(&b, &xi, beta).unwrap();
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }
    }

    proptest! {
        #[test]
        fn point_mass_equals_rs_value(t in 0.0f64..0.99, p in 2usize..9, beta in 0.01f64..3.0) {
            let xi = MixtureFn::pure(p).unwrap();
            let a = cs_functional(&ParisiMeasure::delta(t).unwrap(), &xi, beta).unwrap();
            let b = rs_value(t, &xi, beta).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn truncation_identity(seed in 0u64..10_000, extra in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let zeta = random_measure(&mut rng);
            let xi = MixtureFn::new(vec![0.1, 0.2, 0.7]).unwrap();
            let q_end = zeta.q_hat() + extra * (0.999 - zeta.q_hat());
            let a = cs_functional(&zeta, &xi, 1.1).unwrap();
            let b = cs_functional_extended(&zeta, &xi, 1.1, q_end).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
    }
}
