//! Minimization of the Crisanti-Sommers functional over grid CDFs.
//!
//! The unknowns are the CDF levels `x_0 <= x_1 <= ... <= x_{m-1} <= 1` on the
//! grid intervals; `x_m = 1` at the endpoint `q_max`. Integrating `1/phi` up to
//! `q_max` and adding `log(1 - q_max)` reproduces the functional of any measure
//! with `qhat <= q_max`, so the objective is a smooth convex function of `x` on
//! a fixed domain.
//!
//! The jumps of the CDF are the masses of an atomic measure on the grid, so
//! the monotone chain is the probability simplex in those coordinates. The
//! solver is an active-set Newton method on the simplex; gradient and Hessian
//! are exact because `phi` is piecewise linear.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::functional::{log1p_ratio, segment_inverse_phi};
use super::measure::{validate_grid, CdfOnGrid, GridSpec};
use crate::error::{Error, Result};
use crate::mixtures::MixtureFn;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Relative predicted objective change (Newton decrement) regarded as
    /// stagnation.
    pub rel_tol: f64,
    /// Largest accepted violation of the optimality conditions.
    pub kkt_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 200_000,
            rel_tol: 1e-10,
            kkt_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsSolution {
    pub value: f64,
    pub cdf: CdfOnGrid,
    /// Largest gap between the reduced gradient `dP/d mass_a` and its
    /// multiplier, over all grid points.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Mass left on the endpoint `q_max`: the true minimizer may need a larger
    /// `q_max`.
    pub truncated: bool,
}

/// Mass at `q_max` above which the truncation warning fires.
pub const TRUNCATION_MASS: f64 = 1e-6;

/// Discretized objective on a fixed grid.
pub(crate) struct CsObjective {
    len: Vec<f64>,
    dxi: Vec<f64>,
    tail: f64,
    phi_end: f64,
    beta2: f64,
    log_end: f64,
}

/// `(log(1+u) - u/(1+u)) / u^2`, continuous at 0.
fn edge_kernel(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 2..42 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (n - 1) as f64 / n as f64 * pow;
            pow *= u;
        }
        sum
    } else {
        (u.ln_1p() - u / (1.0 + u)) / (u * u)
    }
}

impl CsObjective {
    pub(crate) fn new(xi: &MixtureFn, beta: f64, grid: &[f64]) -> Self {
        let m = grid.len() - 1;
        let xi_at: Vec<f64> = grid.iter().map(|&g| xi.value(g)).collect();
        let q_max = grid[m];
        CsObjective {
            len: grid.windows(2).map(|w| w[1] - w[0]).collect(),
            dxi: xi_at.windows(2).map(|w| w[1] - w[0]).collect(),
            tail: xi.value(1.0) - xi_at[m],
            phi_end: 1.0 - q_max,
            beta2: beta * beta,
            log_end: (-q_max).ln_1p(),
        }
    }

    fn dim(&self) -> usize {
        self.len.len()
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let mut energy = self.tail;
        let mut integral = 0.0;
        let mut phi = self.phi_end;
        for j in (0..self.dim()).rev() {
            energy += x[j] * self.dxi[j];
            integral += segment_inverse_phi(x[j], self.len[j], phi);
            phi += x[j] * self.len[j];
        }
        0.5 * (self.beta2 * energy + integral + self.log_end)
    }

    fn phis(&self, x: &[f64], phi: &mut [f64]) {
        let m = self.dim();
        phi[m] = self.phi_end;
        for j in (0..m).rev() {
            phi[j] = phi[j + 1] + x[j] * self.len[j];
        }
    }

    /// Value and gradient. `phi` is scratch space of length `m + 1`.
    pub(crate) fn value_grad(&self, x: &[f64], grad: &mut [f64], phi: &mut [f64]) -> f64 {
        let m = self.dim();
        self.phis(x, phi);
        let mut energy = self.tail;
        let mut integral = 0.0;
        // int_0^{g_j} dt / phi^2
        let mut inv_phi2 = 0.0;
        for j in 0..m {
            let (len, right) = (self.len[j], phi[j + 1]);
            let u = x[j] * len / right;
            let r = len / right;
            energy += x[j] * self.dxi[j];
            integral += r * log1p_ratio(u);
            let own = r * r * edge_kernel(u);
            grad[j] = 0.5 * (self.beta2 * self.dxi[j] - len * inv_phi2 - own);
            inv_phi2 += len / (phi[j] * right);
        }
        0.5 * (self.beta2 * energy + integral + self.log_end)
    }
}

/// Largest violation of the optimality conditions on the simplex: with
/// `lambda = sum_a d_a G_a`, atoms must have `G_a = lambda` and every other grid
/// point `G_a >= lambda`.
fn kkt_violation(mass: &[f64], mass_grad: &[f64]) -> f64 {
    let lambda: f64 = mass.iter().zip(mass_grad).map(|(d, g)| d * g).sum();
    mass.iter()
        .zip(mass_grad)
        .map(|(&d, &g)| if d > 0.0 { (g - lambda).abs() } else { (lambda - g).max(0.0) })
        .fold(0.0, f64::max)
}

/// Minimizes the discretized functional on the grid described by `spec`.
pub fn minimize_cs(xi: &MixtureFn, beta: f64, spec: &GridSpec) -> Result<CsSolution> {
    minimize_cs_on_grid(xi, beta, spec.build(&[])?, &SolverOptions::default(), None)
}

/// Minimizes the discretized functional on an explicit grid, optionally warm
/// started from a previous CDF (resampled onto `grid`).
///
/// The iteration works on the jumps `d_a = x_a - x_{a-1}` of the CDF (masses
/// on grid points, `d_m` the mass at `q_max`), which turns the monotone chain
/// into the probability simplex. An active set of atoms is kept; on it the
/// equality-constrained Newton step is taken with a ratio test, and atoms whose
/// reduced gradient falls below the multiplier are added.
pub fn minimize_cs_on_grid(
    xi: &MixtureFn,
    beta: f64,
    grid: Vec<f64>,
    opts: &SolverOptions,
    warm: Option<&CdfOnGrid>,
) -> Result<CsSolution> {
    validate_grid(&grid)?;
    if grid.len() < 3 {
        return Err(Error::Domain("grid needs at least two intervals".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    let obj = CsObjective::new(xi, beta, &grid);
    let m = obj.dim();

    let mut mass = vec![0.0; m + 1];
    match warm {
        Some(c) => {
            let r = c.resample(grid.clone())?;
            for (a, (_, w)) in r.masses().enumerate() {
                mass[a] = w.max(0.0);
            }
            let total: f64 = mass.iter().sum();
            mass.iter_mut().for_each(|w| *w /= total);
        }
        None => mass[0] = 1.0,
    }
    let mut support: Vec<usize> = (0..=m).filter(|&a| mass[a] > 0.0).collect();

    let mut work = Workspace::new(m);
    let mut iterations = 0;
    let mut fx = obj.mass_state(&mass, &mut work);
    let mut optimal = false;
    let mut last_priced = f64::INFINITY;
    let mut stalls = 0;
    let mut last_decrement = f64::INFINITY;

    'outer: while iterations < opts.max_iter {
        // Newton on the current support
        for _ in 0..NEWTON_STEPS {
            if iterations >= opts.max_iter {
                break 'outer;
            }
            iterations += 1;
            let Some(step) = newton_step(&support, &work) else {
                break;
            };
            let decrement: f64 = -support.iter().zip(&step).map(|(&a, p)| work.mass_grad[a] * p).sum::<f64>();
            last_decrement = decrement.max(0.0);
            if !(decrement > DECREMENT_TOL) {
                break;
            }
            // ratio test against the nonnegativity of the masses
            let mut alpha_max = f64::INFINITY;
            let mut blocking = None;
            for (&a, &p) in support.iter().zip(&step) {
                if p < 0.0 && -mass[a] / p < alpha_max {
                    alpha_max = -mass[a] / p;
                    blocking = Some(a);
                }
            }
            if alpha_max <= 0.0 {
                // an entering atom wants negative mass: drop it and retry
                if let Some(b) = blocking {
                    support.retain(|&a| a != b);
                }
                continue;
            }
            let mut alpha = alpha_max.min(1.0);
            let mut trial = mass.clone();
            let accepted = loop {
                for (&a, &p) in support.iter().zip(&step) {
                    trial[a] = (mass[a] + alpha * p).max(0.0);
                }
                if alpha == alpha_max {
                    if let Some(b) = blocking {
                        trial[b] = 0.0;
                    }
                }
                let ft = obj.value(&cumulative(&trial, m));
                if ft <= fx - 1e-4 * alpha * decrement {
                    break true;
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    break false;
                }
            };
            if !accepted {
                break;
            }
            let total: f64 = trial.iter().sum();
            trial.iter_mut().for_each(|w| *w /= total);
            mass = trial;
            support.retain(|&a| mass[a] > 0.0);
            fx = obj.mass_state(&mass, &mut work);
        }

        // pricing: atoms off the support with reduced gradient below the multiplier
        let lambda: f64 = support.iter().map(|&a| mass[a] * work.mass_grad[a]).sum();
        let g = &work.mass_grad;
        let mut entering: Vec<usize> = (0..=m)
            .filter(|&a| mass[a] == 0.0 && g[a] < lambda - PRICE_TOL)
            .filter(|&a| (a == 0 || g[a] <= g[a - 1]) && (a == m || g[a] <= g[a + 1]))
            .collect();
        if entering.is_empty() {
            optimal = true;
            break;
        }
        if fx < last_priced - 1e-15 * fx.abs().max(1.0) {
            stalls = 0;
        } else {
            stalls += 1;
            if stalls > MAX_STALLS {
                break;
            }
        }
        last_priced = fx;
        if entering.len() > MAX_ENTERING {
            entering.sort_by(|&a, &b| g[a].total_cmp(&g[b]));
            entering.truncate(MAX_ENTERING);
        }
        support.extend(entering);
        support.sort_unstable();
    }

    let value = obj.mass_state(&mass, &mut work);
    let kkt = kkt_violation(&mass, &work.mass_grad);
    let stagnant = last_decrement <= opts.rel_tol * value.abs().max(1.0);
    let converged = optimal && stagnant && kkt <= opts.kkt_tol;
    let x = cumulative(&mass, m);

    let truncated = mass[m] > TRUNCATION_MASS;
    let mut cdf = x;
    cdf.push(1.0);
    Ok(CsSolution {
        value,
        cdf: CdfOnGrid::from_parts_unchecked(grid, cdf),
        kkt_residual: kkt,
        iterations,
        converged,
        truncated,
    })
}

const NEWTON_STEPS: usize = 60;
const DECREMENT_TOL: f64 = 1e-22;
const PRICE_TOL: f64 = 1e-11;
const MAX_ENTERING: usize = 32;
const MAX_STALLS: usize = 8;

fn cumulative(mass: &[f64], m: usize) -> Vec<f64> {
    let mut acc = 0.0;
    let mut x: Vec<f64> = mass[..m]
        .iter()
        .map(|w| {
            acc += w;
            acc.min(1.0)
        })
        .collect();
    // guard against rounding above the endpoint mass
    if let Some(last) = x.last_mut() {
        *last = last.min(1.0 - mass[m]).max(0.0);
    }
    x
}

/// Gradient and Hessian data in mass coordinates for the current point.
struct Workspace {
    phi: Vec<f64>,
    grad_x: Vec<f64>,
    mass_grad: Vec<f64>,
    /// `sum_{j, k >= b} H_jk`
    tail_block: Vec<f64>,
    /// prefix sums of the off-diagonal factors `c_j`
    c_prefix: Vec<f64>,
    /// `q_max - g_b`
    dist: Vec<f64>,
}

impl Workspace {
    fn new(m: usize) -> Self {
        Workspace {
            phi: vec![0.0; m + 1],
            grad_x: vec![0.0; m],
            mass_grad: vec![0.0; m + 1],
            tail_block: vec![0.0; m + 1],
            c_prefix: vec![0.0; m + 1],
            dist: vec![0.0; m + 1],
        }
    }

    /// Hessian entry for masses `a, b < m` (`m` has a zero row).
    fn hessian(&self, a: usize, b: usize) -> f64 {
        let m = self.grad_x.len();
        if a == m || b == m {
            return 0.0;
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.tail_block[b] + self.dist[b] * (self.c_prefix[b] - self.c_prefix[a])
    }
}

fn newton_step(support: &[usize], work: &Workspace) -> Option<Vec<f64>> {
    let n = support.len();
    let mut kkt = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (i, &a) in support.iter().enumerate() {
        for (k, &b) in support.iter().enumerate().skip(i) {
            let h = work.hessian(a, b);
            kkt[(i, k)] = h;
            kkt[(k, i)] = h;
        }
        kkt[(i, n)] = 1.0;
        kkt[(n, i)] = 1.0;
        rhs[i] = -work.mass_grad[a];
    }
    let sol = kkt.lu().solve(&rhs)?;
    let step: Vec<f64> = sol.iter().take(n).copied().collect();
    step.iter().all(|v| v.is_finite()).then_some(step)
}

impl CsObjective {
    /// Value at the CDF built from `mass`; fills gradient and Hessian data.
    fn mass_state(&self, mass: &[f64], work: &mut Workspace) -> f64 {
        let m = self.dim();
        let x = cumulative(mass, m);
        let f = self.value_grad(&x, &mut work.grad_x, &mut work.phi);
        work.mass_grad[m] = 0.0;
        for a in (0..m).rev() {
            work.mass_grad[a] = work.mass_grad[a + 1] + work.grad_x[a];
        }
        let phi = &work.phi;
        // c_j: H_jk = len_k c_j for j < k; diagonal separately
        let mut inv_phi3 = 0.0;
        let mut c = vec![0.0; m];
        let mut diag = vec![0.0; m];
        for j in 0..m {
            let (len, l, r) = (self.len[j], phi[j], phi[j + 1]);
            let u = x[j] * len / r;
            c[j] = len * inv_phi3 + len * len / (2.0 * r * l * l);
            let ratio = len / r;
            diag[j] = len * len * inv_phi3 + ratio * ratio * ratio * cube_kernel(u);
            inv_phi3 += len * (l + r) / (2.0 * l * l * r * r);
        }
        work.dist[m] = 0.0;
        work.tail_block[m] = 0.0;
        for b in (0..m).rev() {
            work.dist[b] = work.dist[b + 1] + self.len[b];
            work.tail_block[b] = work.tail_block[b + 1] + diag[b] + 2.0 * c[b] * work.dist[b + 1];
        }
        work.c_prefix[0] = 0.0;
        for (j, &cj) in c.iter().enumerate().take(m) {
            work.c_prefix[j + 1] = work.c_prefix[j] + cj;
        }
        f
    }
}

/// `int_0^1 s^2 / (1 + u s)^3 ds`.
fn cube_kernel(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 0..40 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * ((n + 1) * (n + 2)) as f64 / (2.0 * (n + 3) as f64) * pow;
            pow *= u;
        }
        sum
    } else {
        let v = 1.0 + u;
        (u.ln_1p() - 2.0 * u / v + u * (2.0 + u) / (2.0 * v * v)) / (u * u * u)
    }
}
