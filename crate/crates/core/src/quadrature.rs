//! Grid supports, a dense continuum reference, convergence and
//! viscosity-bias curves, power-law fits, and Feynman-Kac Monte Carlo.
//!
//! The continuum reference integrates the heat-kernel sum over a padded box
//! with trapezoid weights; error curves compare the discrete solution
//! against it after removing the measure-mass constant (the curves are
//! offset-centered, never absolute).

use crate::error::{CoreError, Result};
use crate::hopf::{hopf_cole_solution, hopf_lax};
use crate::stable;
use crate::support::SupportSet;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Axis-aligned box `[lo_k, hi_k]` per axis.
#[derive(Debug, Clone)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(CoreError::InvalidGrid("box needs matching lo/hi"));
        }
        if !lo.iter().zip(&hi).all(|(a, b)| a < b) {
            return Err(CoreError::InvalidGrid("box must be nondegenerate"));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(half_width: f64, dim: usize) -> Self {
        Self {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn padded(&self, pad: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|v| v - pad).collect(),
            hi: self.hi.iter().map(|v| v + pad).collect(),
        }
    }

    pub fn max_width(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Regular grid support over a box: per-axis count `floor(N^(1/d))`,
/// endpoints included, values sampled from `g_fn`. The actual atom count
/// `m^d` is reported by the returned set's length.
pub fn grid_support(
    g_fn: &(dyn Fn(&[f64]) -> f64 + Sync),
    domain: &BoxDomain,
    n_target: usize,
    dim: usize,
) -> Result<SupportSet> {
    if dim != domain.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: domain.dim(),
            got: dim,
        });
    }
    if n_target < 1 << dim {
        return Err(CoreError::EmptyInput("grid support needs at least 2^d atoms"));
    }
    let mut m = (n_target as f64).powf(1.0 / dim as f64).floor() as usize;
    while (m + 1).pow(dim as u32) <= n_target {
        m += 1; // guard against powf landing a hair under an exact root
    }
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|k| linspace(domain.lo[k], domain.hi[k], m))
        .collect();
    let n = m.pow(dim as u32);
    let mut atoms = Vec::with_capacity(n * dim);
    let mut values = Vec::with_capacity(n);
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    for _ in 0..n {
        for k in 0..dim {
            point[k] = axes[k][idx[k]];
        }
        let g = g_fn(&point);
        if !g.is_finite() {
            return Err(CoreError::NonFinite("initial data on the grid"));
        }
        atoms.extend_from_slice(&point);
        values.push(g);
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
        }
    }
    SupportSet::new(dim, atoms, values)
}

/// Dense trapezoid grid holding precomputed initial data, reusable across
/// many evaluation points. Dimensions 1 and 2.
pub struct OracleGrid {
    dim: usize,
    axes: Vec<Vec<f64>>,
    /// ln of the per-node trapezoid weight (0 or ln 1/2 per boundary axis).
    ln_wts: Vec<Vec<f64>>,
    g_vals: Vec<f64>,
    ln_cell: f64,
}

impl OracleGrid {
    pub fn build(
        g_fn: &(dyn Fn(&[f64]) -> f64 + Sync),
        domain: &BoxDomain,
        per_axis: usize,
    ) -> Result<Self> {
        let dim = domain.dim();
        if dim > 2 {
            return Err(CoreError::DimensionMismatch { expected: 2, got: dim });
        }
        if per_axis < 2 {
            return Err(CoreError::InvalidGrid("oracle needs >= 2 nodes per axis"));
        }
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|k| linspace(domain.lo[k], domain.hi[k], per_axis))
            .collect();
        let ln_half = 0.5f64.ln();
        let ln_wts: Vec<Vec<f64>> = axes
            .iter()
            .map(|ax| {
                let mut w = vec![0.0; ax.len()];
                w[0] = ln_half;
                *w.last_mut().unwrap() = ln_half;
                w
            })
            .collect();
        let mut ln_cell = 0.0;
        for k in 0..dim {
            ln_cell += ((domain.hi[k] - domain.lo[k]) / (per_axis - 1) as f64).ln();
        }
        let g_vals: Vec<f64> = match dim {
            1 => axes[0].iter().map(|&y| g_fn(&[y])).collect(),
            _ => {
                let (ax, ay) = (&axes[0], &axes[1]);
                let mut v = Vec::with_capacity(ax.len() * ay.len());
                for &y0 in ax {
                    for &y1 in ay {
                        v.push(g_fn(&[y0, y1]));
                    }
                }
                v
            }
        };
        if g_vals.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("initial data on the oracle grid"));
        }
        Ok(Self {
            dim,
            axes,
            ln_wts,
            g_vals,
            ln_cell,
        })
    }

    pub fn nodes(&self) -> usize {
        self.g_vals.len()
    }

    /// `-eps * log integral` by a single online max-shifted pass.
    pub fn eval(&self, x: &[f64], t: f64, eps: f64) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let inv4t = 1.0 / (4.0 * t);
        let inv_eps = 1.0 / eps;
        let mut m = f64::NEG_INFINITY;
        let mut s = 0.0f64;
        let mut push = |z: f64| {
            if z <= m {
                s += (z - m).exp();
            } else {
                s = s * (m - z).exp() + 1.0;
                m = z;
            }
        };
        match self.dim {
            1 => {
                let ax = &self.axes[0];
                let wx = &self.ln_wts[0];
                for i in 0..ax.len() {
                    let dx = x[0] - ax[i];
                    push((-self.g_vals[i] - dx * dx * inv4t) * inv_eps + wx[i]);
                }
            }
            _ => {
                let (ax, ay) = (&self.axes[0], &self.axes[1]);
                let (wx, wy) = (&self.ln_wts[0], &self.ln_wts[1]);
                let ny = ay.len();
                for i in 0..ax.len() {
                    let dx = x[0] - ax[i];
                    let dx2 = dx * dx;
                    let row = &self.g_vals[i * ny..(i + 1) * ny];
                    for j in 0..ny {
                        let dy = x[1] - ay[j];
                        push((-row[j] - (dx2 + dy * dy) * inv4t) * inv_eps + wx[i] + wy[j]);
                    }
                }
            }
        }
        -eps * (m + s.ln() + self.ln_cell)
    }
}

/// One-shot continuum reference at a point: trapezoid quadrature of the
/// heat-kernel integral over `domain` at `per_axis` nodes per axis
/// (at least 256).
pub fn continuum_oracle(
    g_fn: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    t: f64,
    eps: f64,
    per_axis: usize,
    domain: &BoxDomain,
) -> Result<f64> {
    if per_axis < 256 {
        return Err(CoreError::InvalidGrid("oracle resolution below 256 per axis"));
    }
    Ok(OracleGrid::build(g_fn, domain, per_axis)?.eval(x, t, eps))
}

/// Self-check variant: evaluates at `per_axis` and `2 * per_axis` and flags
/// the resolution as too low when the refinement moves the value by more
/// than 1e-8.
pub fn continuum_oracle_checked(
    g_fn: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    t: f64,
    eps: f64,
    per_axis: usize,
    domain: &BoxDomain,
) -> Result<(f64, f64, bool)> {
    let coarse = continuum_oracle(g_fn, x, t, eps, per_axis, domain)?;
    let fine = continuum_oracle(g_fn, x, t, eps, per_axis * 2, domain)?;
    let delta = (fine - coarse).abs();
    Ok((fine, delta, delta > 1e-8))
}

/// Viscosity rule for a convergence sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsRule {
    Fixed(f64),
    /// `eps = N^(-1/d)`, the grid-matched viscosity.
    Matched,
}

impl EpsRule {
    pub fn eps_for(&self, n: usize, dim: usize) -> f64 {
        match self {
            EpsRule::Fixed(e) => *e,
            EpsRule::Matched => (n as f64).powf(-1.0 / dim as f64),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EpsRule::Fixed(e) => format!("fixed eps={e}"),
            EpsRule::Matched => "eps=N^(-1/d)".to_string(),
        }
    }
}

/// One row of a convergence curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorPoint {
    pub n: usize,
    pub eps: f64,
    /// Offset-centered sup norm over the evaluation grid.
    pub sup_error: f64,
    /// Offset-centered root mean square over the evaluation grid.
    pub rmse: f64,
}

/// Convergence curve with its fitted log-log slope.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorCurve {
    pub points: Vec<ErrorPoint>,
    pub dim: usize,
    pub t: f64,
    pub eps_rule: String,
    pub norm: &'static str,
    /// Slope of `log sup_error` against `log N`; absent with fewer than two
    /// usable points.
    pub slope: Option<f64>,
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Rectangular evaluation grid over the interior 80% of the domain,
/// `per_axis` points per axis.
pub fn interior_eval_grid(domain: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let dim = domain.dim();
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let c = 0.5 * (domain.lo[k] + domain.hi[k]);
            let half = 0.4 * (domain.hi[k] - domain.lo[k]);
            linspace(c - half, c + half, per_axis)
        })
        .collect();
    match dim {
        1 => axes[0].iter().map(|&v| vec![v]).collect(),
        _ => {
            let mut out = Vec::with_capacity(axes[0].len() * axes[1].len());
            for &a in &axes[0] {
                for &b in &axes[1] {
                    out.push(vec![a, b]);
                }
            }
            out
        }
    }
}

/// Discrete-vs-continuum convergence sweep.
///
/// Per width `N`: a regular grid support and the trapezoid reference share
/// one box (the query domain padded by `5 sqrt(2 eps t)` so the kernel tails
/// are captured); the deviation field is centered by its mean over the
/// evaluation grid, which removes the measure-mass constant separating the
/// unnormalized atom sum from the integral. The oracle resolution tracks the
/// viscosity (grid step `eps/2`, floor 257 per axis); since the oracle step
/// is a fixed fraction of the kernel scale, its own tip error is the same
/// multiplicative factor at every `N` and cancels out of the fitted slope.
pub fn quadrature_error_curve(
    g_fn: &(dyn Fn(&[f64]) -> f64 + Sync),
    domain: &BoxDomain,
    t: f64,
    ns: &[usize],
    eps_rule: EpsRule,
    eval_grid: &[Vec<f64>],
) -> Result<ErrorCurve> {
    if ns.len() < 4 {
        return Err(CoreError::InvalidGrid("need >= 4 strictly increasing widths"));
    }
    let points = quadrature_error_points(g_fn, domain, t, ns, eps_rule, eval_grid)?;
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| p.sup_error.max(1e-300).ln())
        .collect();
    Ok(ErrorCurve {
        slope: fit_slope(&xs, &ys),
        points,
        dim: domain.dim(),
        t,
        eps_rule: eps_rule.label(),
        norm: "sup",
    })
}

/// The per-width entries of a convergence sweep without the slope fit;
/// accepts any number of widths (a curve needs at least four).
pub fn quadrature_error_points(
    g_fn: &(dyn Fn(&[f64]) -> f64 + Sync),
    domain: &BoxDomain,
    t: f64,
    ns: &[usize],
    eps_rule: EpsRule,
    eval_grid: &[Vec<f64>],
) -> Result<Vec<ErrorPoint>> {
    let dim = domain.dim();
    if dim > 2 {
        return Err(CoreError::DimensionMismatch { expected: 2, got: dim });
    }
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidGrid("widths must be strictly increasing"));
    }
    if eval_grid.is_empty() {
        return Err(CoreError::EmptyInput("evaluation grid"));
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let eps = eps_rule.eps_for(n, dim);
        let pad = 5.0 * (2.0 * eps * t).sqrt();
        let shared_box = domain.padded(pad);
        let support = grid_support(g_fn, &shared_box, n, dim)?;
        let per_axis = (shared_box.max_width() / (eps / 2.0)).ceil() as usize + 1;
        let oracle = OracleGrid::build(g_fn, &shared_box, per_axis.max(257))?;
        let deltas: Vec<f64> = eval_grid
            .par_iter()
            .map(|x| hopf_cole_solution(&support, x, t, eps, None) - oracle.eval(x, t, eps))
            .collect();
        let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        let sup = deltas.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
        let rmse = (deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / deltas.len() as f64)
            .sqrt();
        points.push(ErrorPoint {
            n: support.len(),
            eps,
            sup_error: sup,
            rmse,
        });
    }
    Ok(points)
}

/// Sup deviation between the viscous and inviscid solutions over a grid,
/// one entry per viscosity (the list must be decreasing).
pub fn viscosity_bias_curve(
    support: &SupportSet,
    x_grid: &[Vec<f64>],
    t: f64,
    eps_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CoreError::InvalidGrid("eps list must be strictly decreasing"));
    }
    if x_grid.is_empty() {
        return Err(CoreError::EmptyInput("x grid"));
    }
    let inviscid: Vec<f64> = x_grid.iter().map(|x| hopf_lax(support, x, t).0).collect();
    Ok(eps_list
        .iter()
        .map(|&eps| {
            let dev = x_grid
                .iter()
                .zip(&inviscid)
                .map(|(x, &u0)| (hopf_cole_solution(support, x, t, eps, None) - u0).abs())
                .fold(0.0, f64::max);
            (eps, dev)
        })
        .collect())
}

/// Fit one linearity constant `C` to a bias curve (geometric mean of
/// `deviation/eps`) and report the worst multiplicative departure from it.
pub fn viscosity_linearity(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    let ratios: Vec<f64> = curve
        .iter()
        .filter(|(_, dev)| *dev > 0.0)
        .map(|(eps, dev)| dev / eps)
        .collect();
    if ratios.is_empty() {
        return None;
    }
    let c = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    let spread = ratios
        .iter()
        .map(|r| (r / c).max(c / r))
        .fold(1.0, f64::max);
    Some((c, spread))
}

/// Power-law fit `loss ~ N^(-alpha)` by least squares on logs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub d_eff: f64,
}

pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(CoreError::EmptyInput("scaling fit needs >= 3 points"));
    }
    if !points.iter().all(|&(n, l)| n > 0.0 && l > 0.0) {
        return Err(CoreError::NonPositive {
            name: "loss",
            value: points
                .iter()
                .map(|&(_, l)| l)
                .fold(f64::INFINITY, f64::min),
        });
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, l)| l.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = intercept + slope * x;
            (y - fit) * (y - fit)
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-30 {
        1.0
    } else {
        0.0
    };
    let alpha = -slope;
    Ok(ScalingFit {
        alpha,
        intercept,
        r_squared,
        d_eff: 1.0 / alpha,
    })
}

/// Monte Carlo estimate of the Feynman-Kac value
/// `-eps log E[exp(-g(Y)/eps)]`, `Y ~ N(x, 2 eps t I)`, with a delta-method
/// standard error for the log transform. Reproducible bit-for-bit from the
/// seed (counter-based ChaCha stream, sequential accumulation).
pub fn feynman_kac_mc(
    g_fn: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    t: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples < 1000 {
        return Err(CoreError::EmptyInput("monte carlo needs >= 1000 samples"));
    }
    let d = x.len();
    let sigma = (2.0 * eps * t).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    let mut logs = Vec::with_capacity(n_samples);
    let mut point = vec![0.0; d];
    for _ in 0..n_samples {
        for (p, &c) in point.iter_mut().zip(x) {
            let z: f64 = rng.sample(normal);
            *p = c + sigma * z;
        }
        logs.push(-g_fn(&point) / eps);
    }
    let m = stable::max_of(&logs);
    let shifted: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
    let mean: f64 = shifted.iter().sum::<f64>() / n_samples as f64;
    let var: f64 = shifted
        .iter()
        .map(|w| (w - mean) * (w - mean))
        .sum::<f64>()
        / (n_samples as f64 - 1.0);
    let estimate = -eps * (m + mean.ln());
    let std_error = eps * (var / n_samples as f64).sqrt() / mean;
    Ok((estimate, std_error))
}
