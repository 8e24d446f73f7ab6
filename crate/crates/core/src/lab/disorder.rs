//! Gaussian disorder tensors, their lineage, and the Hamiltonian
//! `H(s) = N^{-(p-1)/2} <G, s^{(x)p}>`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tensor::{
    contraction_gradient, contraction_hessian, contraction_third, dot, full_contraction, Configuration,
};
use crate::error::{Error, Result};

/// Largest tensor (in entries) the lab will allocate.
pub const MAX_ENTRIES: u64 = 1 << 31;

/// How a disorder tensor was produced. Replaying it reproduces the entries
/// bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lineage {
    pub n: usize,
    pub p: usize,
    /// Seed of the fresh Gaussian tensor `W`.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spike: Option<Spike>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Correlation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spike {
    pub direction: Vec<f64>,
    pub beta: f64,
}

/// `G = (1 - epsilon) G_parent + sqrt(2 epsilon - epsilon^2) W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correlation {
    pub parent: Box<Lineage>,
    pub epsilon: f64,
}

/// `sqrt(2 epsilon - epsilon^2)`, the noise weight keeping unit variance.
pub fn eta(epsilon: f64) -> f64 {
    (epsilon * (2.0 - epsilon)).sqrt()
}

pub(crate) fn entry_count(n: usize, p: usize) -> Result<usize> {
    if n == 0 || p == 0 {
        return Err(Error::Domain(format!("tensor shape n = {n}, p = {p} must be positive")));
    }
    match (n as u64).checked_pow(p as u32) {
        Some(c) if c <= MAX_ENTRIES && p <= u32::MAX as usize => Ok(c as usize),
        _ => Err(Error::Size { n, p, limit: MAX_ENTRIES }),
    }
}

impl Lineage {
    /// Structural checks without generating any entries.
    pub fn validate(&self) -> Result<()> {
        entry_count(self.n, self.p)?;
        if let Some(spike) = &self.spike {
            if spike.direction.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: spike.direction.len(),
                });
            }
            if !spike.beta.is_finite() {
                return Err(Error::Domain(format!("spike beta {} is not finite", spike.beta)));
            }
            Configuration::new(spike.direction.clone())?;
        }
        if let Some(c) = &self.correlation {
            if self.spike.is_some() {
                return Err(Error::Domain("lineage cannot be both planted and correlated".into()));
            }
            if !(0.0..=1.0).contains(&c.epsilon) {
                return Err(Error::Domain(format!("epsilon {} outside [0, 1]", c.epsilon)));
            }
            if c.parent.n != self.n || c.parent.p != self.p {
                return Err(Error::DimensionMismatch {
                    expected: self.n.pow(self.p as u32),
                    got: c.parent.n.pow(c.parent.p as u32),
                });
            }
            c.parent.validate()?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let lineage: Lineage = serde_json::from_str(s)?;
        lineage.validate()?;
        Ok(lineage)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("lineage serializes")
    }
}

/// Dense order-p Gaussian tensor with its lineage.
#[derive(Clone, Debug, PartialEq)]
pub struct Disorder {
    n: usize,
    p: usize,
    entries: Vec<f64>,
    lineage: Lineage,
}

fn gaussian_entries(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// `s^{(x)p}` flattened row-major.
fn outer_power(s: &[f64], p: usize) -> Vec<f64> {
    let mut t = vec![1.0];
    for _ in 0..p {
        t = t.iter().flat_map(|&a| s.iter().map(move |&b| a * b)).collect();
    }
    t
}

fn scale(n: usize, p: usize) -> f64 {
    (n as f64).powf(-0.5 * (p as f64 - 1.0))
}

/// I.i.d. standard normal tensor from `seed`.
pub fn sample_disorder(n: usize, p: usize, seed: u64) -> Result<Disorder> {
    Disorder::from_lineage(&Lineage {
        n,
        p,
        seed,
        spike: None,
        correlation: None,
    })
}

/// Planted tensor `beta s^{(x)p} / N^{(p-1)/2} + W`.
pub fn plant(n: usize, p: usize, beta: f64, direction: &Configuration, seed: u64) -> Result<Disorder> {
    Disorder::from_lineage(&Lineage {
        n,
        p,
        seed,
        spike: Some(Spike {
            direction: direction.coords().to_vec(),
            beta,
        }),
        correlation: None,
    })
}

/// `(1 - epsilon) G + sqrt(2 epsilon - epsilon^2) W` with fresh `W` from `seed`.
pub fn correlate_disorder(d: &Disorder, epsilon: f64, seed: u64) -> Result<Disorder> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let lineage = Lineage {
        n: d.n,
        p: d.p,
        seed,
        spike: None,
        correlation: Some(Correlation {
            parent: Box::new(d.lineage.clone()),
            epsilon,
        }),
    };
    Ok(Disorder {
        n: d.n,
        p: d.p,
        entries: correlated_entries(&d.entries, epsilon, seed),
        lineage,
    })
}

fn correlated_entries(parent: &[f64], epsilon: f64, seed: u64) -> Vec<f64> {
    let keep = 1.0 - epsilon;
    let noise = eta(epsilon);
    let w = gaussian_entries(parent.len(), seed);
    parent.iter().zip(w).map(|(&g, w)| keep * g + noise * w).collect()
}

impl Disorder {
    /// Regenerates the entries described by `lineage`.
    pub fn from_lineage(lineage: &Lineage) -> Result<Disorder> {
        lineage.validate()?;
        let (n, p) = (lineage.n, lineage.p);
        let count = entry_count(n, p)?;
        let entries = if let Some(c) = &lineage.correlation {
            let parent = Disorder::from_lineage(&c.parent)?;
            correlated_entries(&parent.entries, c.epsilon, lineage.seed)
        } else {
            let mut w = gaussian_entries(count, lineage.seed);
            if let Some(spike) = &lineage.spike {
                let k = spike.beta * scale(n, p);
                for (x, s) in w.iter_mut().zip(outer_power(&spike.direction, p)) {
                    *x += k * s;
                }
            }
            w
        };
        Ok(Disorder {
            n,
            p,
            entries,
            lineage: lineage.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn lineage(&self) -> &Lineage {
        &self.lineage
    }

    fn check(&self, s: &Configuration) -> Result<()> {
        if s.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: s.n(),
            });
        }
        Ok(())
    }
}

/// `H(s) = N^{-(p-1)/2} <G, s^{(x)p}>`.
pub fn hamiltonian(d: &Disorder, s: &Configuration) -> Result<f64> {
    d.check(s)?;
    Ok(scale(d.n, d.p) * full_contraction(&d.entries, d.n, d.p, s.coords()))
}

/// Euclidean gradient of `H` (sum over the `p` slots; the tensor is not
/// symmetrized).
pub fn gradient(d: &Disorder, s: &Configuration) -> Result<Vec<f64>> {
    d.check(s)?;
    let k = scale(d.n, d.p);
    Ok(contraction_gradient(&d.entries, d.n, d.p, s.coords())
        .into_iter()
        .map(|g| k * g)
        .collect())
}

/// `P_s g = g - <g, s> s / N`.
pub(crate) fn tangent(s: &[f64], g: &mut [f64]) {
    let c = dot(g, s) / s.len() as f64;
    g.iter_mut().zip(s).for_each(|(x, y)| *x -= c * y);
}

/// Gradient projected onto the tangent space at `s`.
pub fn spherical_gradient(d: &Disorder, s: &Configuration) -> Result<Vec<f64>> {
    let mut g = gradient(d, s)?;
    tangent(s.coords(), &mut g);
    Ok(g)
}

/// Euclidean Hessian of `H`.
pub fn hessian(d: &Disorder, s: &Configuration) -> Result<DMatrix<f64>> {
    d.check(s)?;
    let k = scale(d.n, d.p);
    let h = contraction_hessian(&d.entries, d.n, d.p, s.coords());
    Ok(DMatrix::from_row_slice(d.n, d.n, &h) * k)
}

/// Gradient of `s -> w^T Hess H(s) w`.
pub(crate) fn hessian_quadratic_gradient(d: &Disorder, s: &[f64], w: &[f64]) -> Vec<f64> {
    let k = scale(d.n, d.p);
    contraction_third(&d.entries, d.n, d.p, s, w)
        .into_iter()
        .map(|x| k * x)
        .collect()
}
