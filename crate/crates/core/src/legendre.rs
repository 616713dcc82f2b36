//! Discrete Legendre-Fenchel transforms and the kernel network built from
//! them, covering non-quadratic (including non-convex) Hamiltonians in one
//! dimension.

use crate::error::{CoreError, Result};
use crate::stable;
use crate::support::SupportSet;

/// Sentinel standing in for +inf where the conjugate is unbounded on the
/// sampled domain.
pub const LEGENDRE_SENTINEL: f64 = 1e30;

/// Piecewise-linear table of a convex velocity cost `L(v)` on a strictly
/// increasing grid. Values at `LEGENDRE_SENTINEL` mark effective +inf.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl LegendreTable {
    /// Validates monotonicity of the grid and discrete convexity of the
    /// values (second differences above `-1e-10` on the finite part).
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(CoreError::EmptyInput("legendre grid needs >= 2 nodes"));
        }
        if grid.len() != values.len() {
            return Err(CoreError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::InvalidGrid("grid must be strictly increasing"));
        }
        if grid.iter().any(|v| !v.is_finite()) || values.iter().any(|v| v.is_nan()) {
            return Err(CoreError::NonFinite("legendre table"));
        }
        for w in 0..values.len().saturating_sub(2) {
            let (v0, v1, v2) = (values[w], values[w + 1], values[w + 2]);
            if v0 >= LEGENDRE_SENTINEL || v1 >= LEGENDRE_SENTINEL || v2 >= LEGENDRE_SENTINEL {
                continue;
            }
            let h0 = grid[w + 1] - grid[w];
            let h1 = grid[w + 2] - grid[w + 1];
            let second = (v2 - v1) / h1 - (v1 - v0) / h0;
            if second < -1e-10 {
                return Err(CoreError::InvalidGrid("table is not convex on the grid"));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn eval(&self, v: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if v < lo || v > hi {
            return None;
        }
        let i = match self.grid.binary_search_by(|g| g.total_cmp(&v)) {
            Ok(i) => return Some(self.values[i]),
            Err(i) => i - 1, // v > grid[0] here, so i >= 1
        };
        let (g0, g1) = (self.grid[i], self.grid[i + 1]);
        let w = (v - g0) / (g1 - g0);
        Some(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }
}

/// Discrete Legendre-Fenchel transform of one-dimensional Hamiltonian
/// samples: `L(v) = max_i (p_i * v - H(p_i))` for each `v` in `v_grid`.
///
/// When the maximum is attained only at an endpoint of the `p` sample range,
/// the true conjugate is unbounded beyond the sampled slopes and the entry is
/// clamped to [`LEGENDRE_SENTINEL`]; interior ties keep the finite value.
pub fn legendre_transform_1d(
    p_grid: &[f64],
    h_values: &[f64],
    v_grid: &[f64],
) -> Result<LegendreTable> {
    if p_grid.is_empty() || h_values.is_empty() {
        return Err(CoreError::EmptyInput("legendre sample grid"));
    }
    if p_grid.len() != h_values.len() {
        return Err(CoreError::DimensionMismatch {
            expected: p_grid.len(),
            got: h_values.len(),
        });
    }
    let n = p_grid.len();
    let mut out = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        let mut best = f64::NEG_INFINITY;
        let mut best_interior = f64::NEG_INFINITY;
        for i in 0..n {
            let val = p_grid[i] * v - h_values[i];
            if val > best {
                best = val;
            }
            if i > 0 && i + 1 < n && val > best_interior {
                best_interior = val;
            }
        }
        let unbounded = n >= 3 && best > best_interior;
        out.push(if unbounded && n >= 3 { LEGENDRE_SENTINEL } else { best });
    }
    LegendreTable::new(v_grid.to_vec(), out)
}

/// Kernel network for a tabulated velocity cost, one-dimensional:
/// `-eps * log sum_j exp(-(t L((x - y_j)/t) + g_j)/eps)` with `L` linearly
/// interpolated. Velocities `(x-y_j)/t` outside the table reject with the
/// offending atom named.
pub fn kernel_network_eval(
    support: &SupportSet,
    table: &LegendreTable,
    x: f64,
    t: f64,
    eps: f64,
) -> Result<f64> {
    if support.dim() != 1 {
        return Err(CoreError::DimensionMismatch {
            expected: 1,
            got: support.dim(),
        });
    }
    let (lo, hi) = table.domain();
    let mut neg = Vec::with_capacity(support.len());
    for j in 0..support.len() {
        let v = (x - support.atom(j)[0]) / t;
        let l = table.eval(v).ok_or(CoreError::OutsideTableDomain {
            atom: j,
            value: v,
            lo,
            hi,
        })?;
        neg.push(-(t * l + support.value(j)));
    }
    Ok(-stable::lse(eps, &neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopf::hopf_cole_solution;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn conjugate_of_quadratic_is_quarter_square() {
        // H(p) = p^2 conjugates to v^2/4
        let p = linspace(-8.0, 8.0, 3201);
        let h: Vec<f64> = p.iter().map(|&q| q * q).collect();
        let v = linspace(-3.0, 3.0, 121);
        let table = legendre_transform_1d(&p, &h, &v).unwrap();
        let spacing: f64 = 16.0 / 3200.0;
        for (vi, li) in v.iter().zip(table.values()) {
            assert!((li - vi * vi / 4.0).abs() < spacing * spacing);
        }
    }

    #[test]
    fn conjugate_of_abs_is_indicator() {
        let p = linspace(-1.0, 1.0, 801);
        let h: Vec<f64> = p.iter().map(|&q| q.abs()).collect();
        let v = vec![-2.0, -0.9, 0.0, 0.5, 1.0, 3.0];
        let table = legendre_transform_1d(&p, &h, &v).unwrap();
        // |v| <= 1: conjugate 0; outside: unbounded, clamped to the sentinel
        assert!(table.values()[1].abs() < 1e-12);
        assert!(table.values()[2].abs() < 1e-12);
        assert!(table.values()[3].abs() < 1e-12);
        assert_eq!(table.values()[0], LEGENDRE_SENTINEL);
        assert_eq!(table.values()[5], LEGENDRE_SENTINEL);
        // v = 1 exactly: the max ties across all p >= 0, interior points
        // included, so the finite value 0 is kept
        assert!(table.values()[4].abs() < 1e-12);
    }

    #[test]
    fn conjugate_of_affine() {
        // H(p) = a p: conjugate is 0 at v = a, +inf elsewhere
        let a = 0.75;
        let p = linspace(-2.0, 2.0, 401);
        let h: Vec<f64> = p.iter().map(|&q| a * q).collect();
        let v = vec![-1.0, a, 2.0];
        let table = legendre_transform_1d(&p, &h, &v).unwrap();
        assert_eq!(table.values()[0], LEGENDRE_SENTINEL);
        assert!(table.values()[1].abs() < 1e-12);
        assert_eq!(table.values()[2], LEGENDRE_SENTINEL);
    }

    #[test]
    fn quadratic_table_reproduces_heat_kernel_solution() {
        let p = linspace(-15.0, 15.0, 30001);
        let h: Vec<f64> = p.iter().map(|&q| q * q).collect();
        let v = linspace(-6.0, 6.0, 12001);
        let table = legendre_transform_1d(&p, &h, &v).unwrap();

        let s = SupportSet::new_1d(&[-1.0, -0.2, 0.4, 1.3], &[0.2, -0.1, 0.5, 0.0]).unwrap();
        for &x in &[-1.5, -0.3, 0.0, 0.8, 1.9] {
            for &(t, eps) in &[(0.5, 0.3), (1.0, 0.1)] {
                let k = kernel_network_eval(&s, &table, x, t, eps).unwrap();
                let u = hopf_cole_solution(&s, &[x], t, eps, None);
                assert!((k - u).abs() < 1e-6, "x={x} t={t} eps={eps}: {}", (k - u).abs());
            }
        }
    }

    #[test]
    fn kernel_network_tropical_limit_and_single_atom() {
        let p = linspace(-15.0, 15.0, 30001);
        let h: Vec<f64> = p.iter().map(|&q| q * q).collect();
        let v = linspace(-6.0, 6.0, 12001);
        let table = legendre_transform_1d(&p, &h, &v).unwrap();

        let s = SupportSet::new_1d(&[-0.7, 0.9], &[0.1, 0.3]).unwrap();
        let (t, x) = (0.8, 0.25);
        // eps -> 0 sweep converges to the brute-force min
        let brute = (0..2)
            .map(|j| {
                let l = table.eval((x - s.atom(j)[0]) / t).unwrap();
                t * l + s.value(j)
            })
            .fold(f64::INFINITY, f64::min);
        let mut last = f64::INFINITY;
        for &eps in &[0.2, 0.1, 0.05, 0.01, 0.001] {
            let k = kernel_network_eval(&s, &table, x, t, eps).unwrap();
            let gap = (k - brute).abs();
            assert!(gap <= last + 1e-14);
            last = gap;
        }
        assert!(last < 1e-3);

        // single atom: exactly t L((x-y)/t) + g
        let one = SupportSet::new_1d(&[0.4], &[0.6]).unwrap();
        let k = kernel_network_eval(&one, &table, x, t, 0.3).unwrap();
        let expect = t * table.eval((x - 0.4) / t).unwrap() + 0.6;
        assert!((k - expect).abs() < 1e-12);
    }

    #[test]
    fn out_of_domain_names_the_atom() {
        let table = LegendreTable::new(vec![-1.0, 0.0, 1.0], vec![0.5, 0.0, 0.5]).unwrap();
        let s = SupportSet::new_1d(&[0.4, 5.0], &[0.0, 0.0]).unwrap();
        match kernel_network_eval(&s, &table, 0.9, 0.5, 0.1) {
            Err(CoreError::OutsideTableDomain { atom, .. }) => assert_eq!(atom, 1),
            other => panic!("expected domain error, got {other:?}"),
        }
    }
}
