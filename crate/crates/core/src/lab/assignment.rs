//! Exact square assignment (Hungarian method with potentials, `O(m^3)`) and
//! the normalized empirical 2-Wasserstein distance built on it.

use super::tensor::Configuration;
use crate::error::{Error, Result};

/// Largest sample size accepted by [`w2_empirical`].
pub const MAX_SAMPLES: usize = 1024;

/// Minimum-cost perfect matching for a row-major `m x m` cost matrix.
/// Returns `col[i]`, the column assigned to row `i`.
pub fn solve_assignment(cost: &[f64], m: usize) -> Vec<usize> {
    assert_eq!(cost.len(), m * m);
    // 1-based potentials formulation; index 0 is a virtual row/column.
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; m];
    for j in 1..=m {
        col[row_of[j] - 1] = j - 1;
    }
    col
}

/// `W_{2,N}` between the uniform measures on `a` and `b`: square root of the
/// optimal mean of `|x - y|^2 / N` over perfect matchings.
pub fn w2_empirical(a: &[Configuration], b: &[Configuration]) -> Result<f64> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    if m == 0 || m > MAX_SAMPLES {
        return Err(Error::Domain(format!("sample size {m} outside 1..={MAX_SAMPLES}")));
    }
    let n = a[0].n();
    if let Some(bad) = a.iter().chain(b).find(|s| s.n() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.n() });
    }
    let mut cost = Vec::with_capacity(m * m);
    for x in a {
        for y in b {
            let d2: f64 = x.coords().iter().zip(y.coords()).map(|(p, q)| (p - q) * (p - q)).sum();
            cost.push(d2 / n as f64);
        }
    }
    let col = solve_assignment(&cost, m);
    let total: f64 = col.iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum();
    Ok((total / m as f64).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &[f64], m: usize) -> f64 {
        fn rec(cost: &[f64], m: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == m {
                *best = best.min(acc);
                return;
            }
            for j in 0..m {
                if !used[j] {
                    used[j] = true;
                    rec(cost, m, row + 1, used, acc + cost[row * m + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, m, 0, &mut vec![false; m], 0.0, &mut best);
        best
    }

    #[test]
    fn matches_brute_force_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 1..=7 {
            for _ in 0..20 {
                let cost: Vec<f64> = (0..m * m).map(|_| rng.random_range(-5.0..10.0)).collect();
                let col = solve_assignment(&cost, m);
                let mut seen = col.clone();
                seen.sort();
                assert_eq!(seen, (0..m).collect::<Vec<_>>());
                let total: f64 = col.iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum();
                assert!((total - brute_force(&cost, m)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn w2_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<Configuration> = (0..30).map(|_| Configuration::uniform(9, &mut rng)).collect();
        assert_eq!(w2_empirical(&a, &a).unwrap(), 0.0);
        let mut shuffled = a.clone();
        shuffled.reverse();
        assert!(w2_empirical(&a, &shuffled).unwrap() < 1e-12);
        let s = &a[..1];
        let neg = vec![s[0].negated()];
        assert!((w2_empirical(s, &neg).unwrap() - 2.0).abs() < 1e-12);
        assert!(w2_empirical(&a, &a[..3]).is_err());
        assert!(w2_empirical(&[], &[]).is_err());
    }
}
