use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Atomic probability measure on `[0, 1)`: sorted `(location, weight)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParisiMeasure {
    atoms: Vec<(f64, f64)>,
}

impl ParisiMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        let mut total = 0.0;
        for &(q, w) in &atoms {
            if !(0.0..1.0).contains(&q) {
                return Err(Error::InvalidMeasure(format!("atom location {q} outside [0, 1)")));
            }
            if q <= prev {
                return Err(Error::InvalidMeasure("atom locations must be strictly increasing".into()));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom weight {w} must be positive")));
            }
            prev = q;
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(ParisiMeasure { atoms })
    }

    /// Point mass at `t`.
    pub fn delta(t: f64) -> Result<Self> {
        Self::new(vec![(t, 1.0)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Largest atom location.
    pub fn q_hat(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// `lambda a + (1 - lambda) b`, merging coincident atoms.
    pub fn mix(a: &ParisiMeasure, b: &ParisiMeasure, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let mut atoms: Vec<(f64, f64)> = a
            .atoms
            .iter()
            .map(|&(q, w)| (q, lambda * w))
            .chain(b.atoms.iter().map(|&(q, w)| (q, (1.0 - lambda) * w)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (q, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == q => last.1 += w,
                _ => merged.push((q, w)),
            }
        }
        Self::new(merged)
    }

    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.atoms.iter().map(|&(q, w)| w * g(q)).sum()
    }
}

/// A measure represented by its CDF sampled on a grid
/// `0 = g_0 < g_1 < ... < g_m = q_max < 1`: the CDF equals `cdf[j]` on
/// `[g_j, g_{j+1})` and `cdf[m] = 1`. Mass sits only on grid points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfOnGrid {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl CdfOnGrid {
    pub fn new(grid: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if cdf.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: cdf.len(),
            });
        }
        if cdf[cdf.len() - 1] != 1.0 {
            return Err(Error::InvalidMeasure("CDF must end at 1".into()));
        }
        let mut prev = 0.0;
        for &x in &cdf {
            if !(x >= prev && x <= 1.0) {
                return Err(Error::InvalidMeasure("CDF must be nondecreasing in [0, 1]".into()));
            }
            prev = x;
        }
        Ok(CdfOnGrid { grid, cdf })
    }

    /// Point mass at 0 on the given grid.
    pub fn delta_zero(grid: Vec<f64>) -> Result<Self> {
        let cdf = vec![1.0; grid.len()];
        Self::new(grid, cdf)
    }

    pub(crate) fn from_parts_unchecked(grid: Vec<f64>, cdf: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), cdf.len());
        CdfOnGrid { grid, cdf }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn q_max(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// `(location, mass)` for every grid point, zero masses included.
    pub fn masses(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .zip(&self.cdf)
            .scan(0.0, |prev, (&g, &x)| {
                let mass = x - *prev;
                *prev = x;
                Some((g, mass))
            })
    }

    /// Smallest grid point at which the CDF reaches 1.
    pub fn q_hat(&self) -> f64 {
        let j = self.cdf.iter().position(|&x| x >= 1.0).unwrap_or(self.cdf.len() - 1);
        self.grid[j]
    }

    /// The atomic measure described by this CDF (zero masses dropped, weights
    /// renormalized against rounding).
    pub fn to_measure(&self) -> Result<ParisiMeasure> {
        let atoms: Vec<(f64, f64)> = self.masses().filter(|&(_, w)| w > 0.0).collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        ParisiMeasure::new(atoms.into_iter().map(|(q, w)| (q, w / total)).collect())
    }

    /// Evaluates this CDF at the points of `grid` (used for warm starts).
    pub fn resample(&self, grid: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        let mut j = 0;
        let mut cdf: Vec<f64> = grid
            .iter()
            .map(|&g| {
                while j + 1 < self.grid.len() && self.grid[j + 1] <= g {
                    j += 1;
                }
                self.cdf[j]
            })
            .collect();
        let last = cdf.len() - 1;
        cdf[last] = 1.0;
        Ok(CdfOnGrid { grid, cdf })
    }
}

/// `E[g(X)]` for `X` distributed according to the grid CDF.
pub fn minimizer_expectation<G: Fn(f64) -> f64>(cdf: &CdfOnGrid, g: G) -> f64 {
    cdf.masses().filter(|&(_, w)| w != 0.0).map(|(q, w)| w * g(q)).sum()
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 {
        return Err(Error::InvalidMeasure("grid must start at 0 and have >= 2 points".into()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidMeasure("grid must be strictly increasing".into()));
    }
    let q_max = grid[grid.len() - 1];
    if !(q_max < 1.0) {
        return Err(Error::InvalidMeasure(format!("grid endpoint {q_max} must be < 1")));
    }
    Ok(())
}

/// Discretization used by the Crisanti-Sommers minimizer: `m` intervals,
/// uniform on `[0, 0.9]` and geometric toward `q_max` above it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub m: usize,
    pub q_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            m: 512,
            q_max: 1.0 - 1e-4,
        }
    }
}

const UNIFORM_TOP: f64 = 0.9;

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m < 16 {
            return Err(Error::Domain(format!("grid size m = {} must be >= 16", self.m)));
        }
        if !(self.q_max > 0.0 && self.q_max < 1.0) {
            return Err(Error::Domain(format!("q_max = {} must lie in (0, 1)", self.q_max)));
        }
        Ok(())
    }

    /// Grid points `g_0 = 0, ..., g_m = q_max`, with `extra` knots merged in.
    pub fn build(&self, extra: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        let m = self.m;
        let mut grid = Vec::with_capacity(m + 1 + extra.len());
        if self.q_max <= UNIFORM_TOP {
            grid.extend((0..=m).map(|i| self.q_max * i as f64 / m as f64));
        } else {
            let m_geo = (m / 4).max(4);
            let m_uni = m - m_geo;
            grid.extend((0..=m_uni).map(|i| UNIFORM_TOP * i as f64 / m_uni as f64));
            let top_gap = 1.0 - UNIFORM_TOP;
            let ratio = ((1.0 - self.q_max) / top_gap).powf(1.0 / m_geo as f64);
            grid.extend((1..m_geo).map(|k| 1.0 - top_gap * ratio.powi(k as i32)));
            grid.push(self.q_max);
        }
        for &t in extra {
            if t > 0.0 && t < self.q_max {
                grid.push(t);
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
        let last = grid.len() - 1;
        grid[last] = self.q_max;
        validate_grid(&grid)?;
        Ok(grid)
    }
}
