//! One-dimensional bracketed minimization.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_ITERS: usize = 400;

/// Golden-section search on `[lo, hi]`.
///
/// Stops once every probe in the current bracket is within `tol` of the best
/// value seen, or the bracket has shrunk to a few ulps.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Minimum> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (mut fa, mut fb) = (f(a), f(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = [(a, fa), (b, fb), (c, fc), (d, fd)]
        .into_iter()
        .filter(|(_, v)| !v.is_nan())
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(x, value)| Minimum { x, value })
        .ok_or(Error::NoConvergence { iterations: 0, lo: a, hi: b })?;

    for _ in 0..MAX_GOLDEN_ITERS {
        let spread = [fa, fb, fc, fd]
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            - best.value;
        let width = b - a;
        if spread <= tol || width <= 4.0 * f64::EPSILON * best.x.abs().max(1e-300) {
            return Ok(best);
        }
        if fc <= fd {
            b = d;
            fb = fd;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            fa = fc;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v < best.value {
                best = Minimum { x, value: v };
            }
        }
        if fc.is_nan() || fd.is_nan() {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_GOLDEN_ITERS,
        lo: a,
        hi: b,
    })
}

/// Scans `grid` (sorted), brackets every discrete local minimum of the samples
/// by its neighbours, refines each with golden section and returns the best.
pub fn bracket_and_refine<F: Fn(f64) -> f64>(f: F, grid: &[f64], tol: f64) -> Result<Minimum> {
    assert!(grid.len() >= 3, "bracketing grid needs at least three points");
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let n = values.len();
    let mut best: Option<Minimum> = None;
    let mut last_err = None;
    for i in 0..n {
        let v = values[i];
        let left = if i > 0 { values[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < n { values[i + 1] } else { f64::INFINITY };
        if v.is_nan() || v > left || v > right || (v == left && i > 0) {
            continue;
        }
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(n - 1)];
        match golden_section(&f, lo, hi, tol) {
            Ok(m) if best.is_none_or(|b| m.value < b.value) => best = Some(m),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or(Error::NoConvergence {
            iterations: 0,
            lo: grid[0],
            hi: grid[n - 1],
        })
    })
}

/// Grid on (0, 1) that is uniform on the bulk and geometric toward both ends
/// (points `1 - 2^(-j/4)` and `2^(-j/4)`), suited to objectives whose
/// minimizer may sit extremely close to 1.
pub fn unit_interval_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
    grid.extend((4..=200).map(|j| 1.0 - (-(j as f64) / 4.0).exp2()));
    grid.extend((32..=160).map(|j| (-(j as f64) / 4.0).exp2()));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.retain(|&x| x > 0.0 && x < 1.0);
    grid
}
