//! Mixture functions `xi(t) = sum_k gamma_k^2 t^k` describing the covariance
//! `E[H(s1) H(s2)] = N xi(<s1, s2> / N)` of a spherical spin glass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nonnegative coefficients of a mixture function, indexed by degree.
///
/// Internally `coeffs[k - 1]` holds `gamma_k^2`; there is no degree-0 term so
/// `xi(0) = 0` always. Trailing zero coefficients are trimmed on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixtureFn {
    coeffs: Vec<f64>,
}

impl MixtureFn {
    /// Builds a mixture from coefficients of degrees `1, 2, ...`.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if let Some((i, c)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c >= 0.0))
        {
            return Err(Error::InvalidMixture(format!(
                "coefficient of degree {} is {c}; must be finite and >= 0",
                i + 1
            )));
        }
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidMixture("all coefficients are zero".into()));
        }
        Ok(MixtureFn { coeffs })
    }

    /// The pure p-spin mixture `xi(t) = t^p`.
    pub fn pure(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidDegree(p, 2));
        }
        let mut coeffs = vec![0.0; p];
        coeffs[p - 1] = 1.0;
        Ok(MixtureFn { coeffs })
    }

    /// Effective mixture of the band at overlap `q` around a planted direction,
    /// `xi_q(x) = (q^2 + (1 - q^2) x)^p - q^(2p)`.
    ///
    /// Coefficients are `binom(p, k) q^(2(p-k)) (1-q^2)^k`, assembled in log
    /// space so that `p` in the thousands does not overflow.
    pub fn band(p: usize, q: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidDegree(p, 2));
        }
        if !(q.abs() < 1.0) {
            return Err(Error::Domain(format!("band overlap q = {q} must satisfy |q| < 1")));
        }
        if q == 0.0 {
            return Self::pure(p);
        }
        let log_q2 = 2.0 * q.abs().ln();
        let log_1mq2 = (-q.abs()).ln_1p() + q.abs().ln_1p();
        let mut coeffs = Vec::with_capacity(p);
        let mut log_binom = 0.0;
        for k in 1..=p {
            log_binom += ((p - k + 1) as f64).ln() - (k as f64).ln();
            let log_c = log_binom + (p - k) as f64 * log_q2 + k as f64 * log_1mq2;
            coeffs.push(log_c.exp());
        }
        Self::new(coeffs)
    }

    /// Largest degree with a nonzero coefficient.
    pub fn max_degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient `gamma_k^2` of degree `k` (zero outside the stored range).
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.coeffs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    /// Coefficients of degrees `1..=max_degree`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Whether the mixture is `t^p` for some `p`.
    pub fn as_pure(&self) -> Option<usize> {
        let k = self.max_degree();
        (self.coeffs[k - 1] == 1.0 && self.coeffs[..k - 1].iter().all(|&c| c == 0.0)).then_some(k)
    }

    /// `xi(t)`, `xi'(t)` or `xi''(t)` for `order` 0, 1, 2.
    pub fn eval(&self, t: f64, order: u8) -> Result<f64> {
        if !(t.abs() <= 1.0) {
            return Err(Error::Domain(format!("mixture evaluated at |t| = {} > 1", t.abs())));
        }
        match order {
            0 => Ok(self.value(t)),
            1 => Ok(self.derivative(t)),
            2 => Ok(self.second_derivative(t)),
            _ => Err(Error::Domain(format!("derivative order {order} not in {{0, 1, 2}}"))),
        }
    }

    /// `xi(t)` by Horner's rule; no domain check.
    pub fn value(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc * t
    }

    /// `xi'(t)`; no domain check.
    pub fn derivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * t + (i + 1) as f64 * c;
        }
        acc
    }

    /// `xi''(t)`; no domain check.
    pub fn second_derivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            let k = (i + 1) as f64;
            acc = acc * t + k * (k - 1.0) * c;
        }
        acc
    }
}

impl TryFrom<Vec<f64>> for MixtureFn {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        MixtureFn::new(coeffs)
    }
}

impl From<MixtureFn> for Vec<f64> {
    fn from(xi: MixtureFn) -> Vec<f64> {
        xi.coeffs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pure_values() {
        assert_eq!(MixtureFn::pure(3).unwrap().eval(0.5, 0).unwrap(), 0.125);
        assert_eq!(MixtureFn::pure(2).unwrap().eval(1.0, 0).unwrap(), 1.0);
        assert_eq!(MixtureFn::pure(4).unwrap().eval(1.0, 1).unwrap(), 4.0);
        assert_eq!(MixtureFn::pure(3).unwrap().eval(0.5, 1).unwrap(), 0.75);
        assert_eq!(MixtureFn::pure(7).unwrap().eval(0.0, 0).unwrap(), 0.0);
        assert_eq!(MixtureFn::pure(3).unwrap().eval(0.5, 2).unwrap(), 3.0);
        assert_eq!(MixtureFn::pure(5).unwrap().as_pure(), Some(5));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(MixtureFn::pure(1), Err(Error::InvalidDegree(1, 2))));
        let xi = MixtureFn::pure(3).unwrap();
        assert!(matches!(xi.eval(1.0001, 0), Err(Error::Domain(_))));
        assert!(matches!(xi.eval(0.5, 3), Err(Error::Domain(_))));
        assert!(MixtureFn::new(vec![0.0, -1.0]).is_err());
        assert!(MixtureFn::new(vec![0.0, 0.0]).is_err());
        assert!(MixtureFn::new(vec![f64::NAN]).is_err());
        assert!(MixtureFn::band(3, 1.0).is_err());
        assert!(MixtureFn::band(3, -1.0).is_err());
    }

    #[test]
    fn trims_trailing_zeros() {
        let xi = MixtureFn::new(vec![0.0, 0.5, 0.25, 0.0, 0.0]).unwrap();
        assert_eq!(xi.max_degree(), 3);
        assert_eq!(xi.coeff(2), 0.5);
        assert_eq!(xi.coeff(9), 0.0);
        assert_eq!(xi.as_pure(), None);
    }

    #[test]
    fn band_examples() {
        let xi = MixtureFn::band(2, 0.0).unwrap();
        assert_eq!(xi, MixtureFn::pure(2).unwrap());

        let xi = MixtureFn::band(3, 0.5).unwrap();
        assert_relative_eq!(xi.coeff(1), 0.140625, max_relative = 1e-14);
        assert_relative_eq!(xi.coeff(2), 0.421875, max_relative = 1e-14);
        assert_relative_eq!(xi.coeff(3), 0.421875, max_relative = 1e-14);
        assert_relative_eq!(xi.eval(1.0, 0).unwrap(), 0.984375, epsilon = 1e-12);

        let xi = MixtureFn::band(5, 0.9).unwrap();
        let sum: f64 = xi.coeffs().iter().sum();
        assert_relative_eq!(sum, 1.0 - 0.9f64.powi(10), epsilon = 1e-12);
    }

    #[test]
    fn band_matches_closed_form_at_large_degree() {
        for &(p, q) in &[(200usize, 0.99), (2048, 1.0 - 1e-4), (1000, 0.3)] {
            let xi = MixtureFn::band(p, q).unwrap();
            for &x in &[0.0, 0.2, 0.7, 0.95, 1.0] {
                let base: f64 = q * q + (1.0 - q * q) * x;
                let closed = (p as f64 * base.ln()).exp() - (2.0 * p as f64 * q.abs().ln()).exp();
                assert_relative_eq!(xi.value(x), closed, max_relative = 1e-9, epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn band_sum_identity(p in 2usize..60, q in -0.999f64..0.999) {
            let xi = MixtureFn::band(p, q).unwrap();
            let expect = 1.0 - q.abs().powi(2 * p as i32);
            prop_assert!((xi.eval(1.0, 0).unwrap() - expect).abs() < 1e-12);
            prop_assert!(xi.coeffs().iter().all(|&c| c >= 0.0));
        }

        #[test]
        fn band_even_in_q(p in 2usize..40, q in 0.0f64..0.999) {
            prop_assert_eq!(MixtureFn::band(p, q).unwrap(), MixtureFn::band(p, -q).unwrap());
        }

        #[test]
        fn derivative_matches_finite_differences(
            coeffs in proptest::collection::vec(0.0f64..2.0, 1..8),
            t in -0.9f64..0.9,
        ) {
            let mut coeffs = coeffs;
            *coeffs.last_mut().unwrap() += 0.1;
            let xi = MixtureFn::new(coeffs).unwrap();
            let h = 1e-5;
            for order in 0..2u8 {
                let fd = (xi.eval(t + h, order).unwrap() - xi.eval(t - h, order).unwrap()) / (2.0 * h);
                let exact = xi.eval(t, order + 1).unwrap();
                prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "order {} fd {} exact {}", order, fd, exact);
            }
        }
    }
}
