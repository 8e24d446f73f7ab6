//! Points of the sphere `S_N = {s : |s|^2 = N}` and multilinear contractions of
//! dense row-major order-p tensors.

use std::borrow::Cow;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on `|s|^2 = N`.
pub const SPHERE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Configuration {
    coords: Vec<f64>,
}

impl Configuration {
    /// Accepts coordinates already on the sphere.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::Domain("configuration needs at least one coordinate".into()));
        }
        let norm2: f64 = coords.iter().map(|x| x * x).sum();
        if !(norm2.is_finite() && (norm2 - n as f64).abs() <= SPHERE_TOL * n as f64) {
            return Err(Error::Domain(format!(
                "configuration has |s|^2 = {norm2}, expected {n}"
            )));
        }
        Ok(Configuration { coords })
    }

    /// Radial retraction `sqrt(N) x / |x|`.
    pub fn project(mut coords: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain(format!("cannot retract a vector of norm {norm}")));
        }
        let scale = (n as f64).sqrt() / norm;
        coords.iter_mut().for_each(|x| *x *= scale);
        Ok(Configuration { coords })
    }

    /// Uniform point of the sphere.
    pub fn uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(c) = Self::project(v) {
                return c;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// `<self, other> / N`.
    pub fn overlap(&self, other: &Configuration) -> f64 {
        dot(&self.coords, &other.coords) / self.n() as f64
    }

    pub fn negated(&self) -> Self {
        Configuration {
            coords: self.coords.iter().map(|x| -x).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for Configuration {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Configuration::new(coords)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(c: Configuration) -> Vec<f64> {
        c.coords
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Argument of one tensor slot.
#[derive(Clone, Copy)]
pub(crate) enum Slot<'a> {
    Vector(&'a [f64]),
    Free,
}

/// Contracts every `Vector` slot of the order-`args.len()` tensor `t` and
/// returns the tensor over the `Free` slots (row-major, earlier slots more
/// significant).
///
/// Slots are eliminated from last to first; a free slot just joins the
/// trailing block, so no data is ever transposed.
pub(crate) fn multilinear(t: &[f64], n: usize, args: &[Slot]) -> Vec<f64> {
    let mut cur: Cow<[f64]> = Cow::Borrowed(t);
    let mut free_block = 1usize;
    for slot in args.iter().rev() {
        match slot {
            Slot::Free => free_block *= n,
            Slot::Vector(v) => {
                let lead = cur.len() / (n * free_block);
                let mut next = vec![0.0; lead * free_block];
                for a in 0..lead {
                    let out = &mut next[a * free_block..(a + 1) * free_block];
                    for (i, &vi) in v.iter().enumerate() {
                        let row = &cur[(a * n + i) * free_block..(a * n + i + 1) * free_block];
                        for (o, &x) in out.iter_mut().zip(row) {
                            *o += vi * x;
                        }
                    }
                }
                cur = Cow::Owned(next);
            }
        }
    }
    cur.into_owned()
}

/// `<t, v^{(x)p}>` by repeated contraction of the last index.
pub(crate) fn full_contraction(t: &[f64], n: usize, p: usize, v: &[f64]) -> f64 {
    let args = vec![Slot::Vector(v); p];
    multilinear(t, n, &args)[0]
}

/// Euclidean gradient of `v -> <t, v^{(x)p}>`: sum of the `p` slot contractions.
pub(crate) fn contraction_gradient(t: &[f64], n: usize, p: usize, v: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; n];
    let mut args = vec![Slot::Vector(v); p];
    for s in 0..p {
        args[s] = Slot::Free;
        for (g, x) in grad.iter_mut().zip(multilinear(t, n, &args)) {
            *g += x;
        }
        args[s] = Slot::Vector(v);
    }
    grad
}

/// Hessian of `v -> <t, v^{(x)p}>`, row-major `n x n`.
pub(crate) fn contraction_hessian(t: &[f64], n: usize, p: usize, v: &[f64]) -> Vec<f64> {
    let mut hess = vec![0.0; n * n];
    let mut args = vec![Slot::Vector(v); p];
    for s in 0..p {
        for u in s + 1..p {
            args[s] = Slot::Free;
            args[u] = Slot::Free;
            let m = multilinear(t, n, &args);
            for i in 0..n {
                for j in 0..n {
                    hess[i * n + j] += m[i * n + j] + m[j * n + i];
                }
            }
            args[s] = Slot::Vector(v);
            args[u] = Slot::Vector(v);
        }
    }
    hess
}

/// `D^3 <t, v^{(x)p}> [w, w, .]`: the gradient of `v -> w^T Hess(v) w`.
pub(crate) fn contraction_third(t: &[f64], n: usize, p: usize, v: &[f64], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if p < 3 {
        return out;
    }
    let mut args = vec![Slot::Vector(v); p];
    for f in 0..p {
        for s in 0..p {
            for u in s + 1..p {
                if s == f || u == f {
                    continue;
                }
                args[f] = Slot::Free;
                args[s] = Slot::Vector(w);
                args[u] = Slot::Vector(w);
                for (o, x) in out.iter_mut().zip(multilinear(t, n, &args)) {
                    *o += 2.0 * x;
                }
                args[f] = Slot::Vector(v);
                args[s] = Slot::Vector(v);
                args[u] = Slot::Vector(v);
            }
        }
    }
    out
}
