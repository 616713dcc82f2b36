//! Curvature control by the temperature: the closed-form input Hessian, its
//! spectral-norm ceiling, certified radii, empirical perturbation checks, and
//! the near-shock probe along weighted Voronoi boundaries.

use crate::error::{CoreError, Result};
use crate::network::HjNetwork;
use crate::stable;
use crate::support::SupportSet;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Certificate tying a perturbation tolerance to a safe input radius.
#[derive(Debug, Clone, Serialize)]
pub struct RobustnessCertificate {
    pub eps: f64,
    pub tau: f64,
    pub w_row_norm_max: f64,
    pub hessian_bound: f64,
    pub certified_radius: f64,
    /// Set when the weights are all zero and the radius is unbounded.
    pub unbounded: bool,
}

/// Closed-form input Hessian `eps^{-1} W^T (diag(pi) - pi pi^T) W`,
/// assembled as a centered weighted outer-product sum so it is symmetric
/// PSD by construction.
pub fn input_hessian(net: &HjNetwork, x: &[f64]) -> Result<DMatrix<f64>> {
    let pi = net.gibbs(x)?;
    let d = net.dim();
    let mut mean = vec![0.0; d];
    for (j, &p) in pi.iter().enumerate() {
        for (m, w) in mean.iter_mut().zip(net.weight_row(j)) {
            *m += p * w;
        }
    }
    let mut h = DMatrix::zeros(d, d);
    for (j, &p) in pi.iter().enumerate() {
        let row = net.weight_row(j);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                h[(a, b)] += p * da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    Ok(h / net.eps())
}

/// Spectral norm of the input Hessian via power iteration (at most 100
/// rounds, stopping at relative change 1e-10), next to the ceiling
/// `|W|_{2,inf}^2 / eps`. The Rayleigh-quotient estimate approaches the top
/// eigenvalue from below, so `norm <= bound` cannot be violated by the
/// iteration itself.
pub fn hessian_spectral_norm(net: &HjNetwork, x: &[f64]) -> Result<(f64, f64)> {
    let h = input_hessian(net, x)?;
    let bound = net.weight_row_norm_max().powi(2) / net.eps();
    let d = net.dim();
    // deterministic seeded start vector
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d2c_5681);
    let mut v = DVector::from_iterator(d, (0..d).map(|_| rng.random::<f64>() - 0.5));
    if v.norm() == 0.0 {
        v = DVector::from_element(d, 1.0);
    }
    v /= v.norm();
    let mut last = 0.0f64;
    for _ in 0..100 {
        let w = &h * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok((0.0, bound));
        }
        let estimate = v.dot(&w);
        v = w / norm;
        if (estimate - last).abs() <= 1e-10 * estimate.abs().max(1.0) {
            last = estimate;
            break;
        }
        last = estimate;
    }
    Ok((last.abs(), bound))
}

/// Certified radius `r*(tau, eps) = (eps/|W|)(sqrt(1 + 2 tau / eps) - 1)`,
/// evaluated in the cancellation-free form
/// `2 tau / (|W| (sqrt(1 + 2 tau/eps) + 1))`. All-zero weights certify an
/// unbounded radius.
pub fn certified_radius(net: &HjNetwork, tau: f64) -> Result<RobustnessCertificate> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(CoreError::NonPositive {
            name: "tau",
            value: tau,
        });
    }
    let eps = net.eps();
    let w_max = net.weight_row_norm_max();
    let hessian_bound = w_max * w_max / eps;
    if w_max == 0.0 {
        return Ok(RobustnessCertificate {
            eps,
            tau,
            w_row_norm_max: 0.0,
            hessian_bound: 0.0,
            certified_radius: f64::INFINITY,
            unbounded: true,
        });
    }
    let radius = 2.0 * tau / (w_max * ((1.0 + 2.0 * tau / eps).sqrt() + 1.0));
    Ok(RobustnessCertificate {
        eps,
        tau,
        w_row_norm_max: w_max,
        hessian_bound,
        certified_radius: radius,
        unbounded: false,
    })
}

/// Sample `n_samples` uniform directions at radius `r` (plus the gradient
/// direction) and compare the largest observed output change against the
/// second-order ceiling `|W| r + |W|^2 r^2 / (2 eps)`.
pub fn perturbation_check(
    net: &HjNetwork,
    x: &[f64],
    r: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if r < 0.0 {
        return Err(CoreError::NonPositive { name: "r", value: r });
    }
    let w_max = net.weight_row_norm_max();
    let bound = w_max * r + w_max * w_max * r * r / (2.0 * net.eps());
    if r == 0.0 {
        return Ok((0.0, 0.0));
    }
    let d = net.dim();
    let f0 = net.forward(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    let mut max_observed = 0.0f64;
    let mut probe = |dir: &[f64]| -> Result<()> {
        let norm = stable::dot(dir, dir).sqrt();
        if norm == 0.0 {
            return Ok(());
        }
        let xp: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + r * di / norm).collect();
        let f = net.forward(&xp)?;
        max_observed = max_observed.max((f - f0).abs());
        Ok(())
    };
    let grad = net.gradient(x)?;
    probe(&grad)?;
    for _ in 0..n_samples {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(normal)).collect();
        probe(&dir)?;
    }
    Ok((max_observed, bound))
}

/// One sampled point of a near-shock probe.
#[derive(Debug, Clone, Serialize)]
pub struct ShockSample {
    /// Signed arc-length along the probe, zero at the crossing.
    pub s: f64,
    pub pi_i: f64,
    pub pi_j: f64,
    pub hessian_norm: f64,
}

/// Probe the weighted Voronoi boundary between atoms `i` and `j`: the
/// hyperplane `(y_i - y_j).x/(2t) = g_i - g_j + (|y_i|^2 - |y_j|^2)/(4t)`.
/// The path runs orthogonally through the crossing with length six times the
/// atom separation. At the crossing the two logits tie, so the two weights
/// agree up to leakage from the remaining atoms.
pub fn shock_probe(
    support: &SupportSet,
    i: usize,
    j: usize,
    t: f64,
    eps: f64,
    n_path_points: usize,
) -> Result<Vec<ShockSample>> {
    let n = support.len();
    if i >= n || j >= n {
        return Err(CoreError::IndexOutOfRange {
            index: i.max(j),
            len: n,
        });
    }
    if i == j {
        return Err(CoreError::EmptyInput("shock probe needs two distinct atoms"));
    }
    if support.dim() > 3 {
        return Err(CoreError::DimensionMismatch {
            expected: 3,
            got: support.dim(),
        });
    }
    let yi = support.atom(i);
    let yj = support.atom(j);
    let diff: Vec<f64> = yi.iter().zip(yj).map(|(a, b)| a - b).collect();
    let sep = stable::dot(&diff, &diff).sqrt();
    let normal: Vec<f64> = diff.iter().map(|v| v / sep).collect();
    // crossing point: midpoint shifted along the normal to satisfy the
    // hyperplane equation
    let rhs = support.value(i) - support.value(j)
        + (stable::dot(yi, yi) - stable::dot(yj, yj)) / (4.0 * t);
    let mid: Vec<f64> = yi.iter().zip(yj).map(|(a, b)| 0.5 * (a + b)).collect();
    // solve diff . (mid + lambda n) = 2 t rhs for lambda
    let lambda = (2.0 * t * rhs - stable::dot(&diff, &mid)) / sep;
    let center: Vec<f64> = mid.iter().zip(&normal).map(|(m, n)| m + lambda * n).collect();

    let net = HjNetwork::from_support(support, t, eps, None)?;
    let half_len = 3.0 * sep;
    let mut out = Vec::with_capacity(n_path_points);
    for k in 0..n_path_points {
        let s = if n_path_points == 1 {
            0.0
        } else {
            -half_len + 2.0 * half_len * k as f64 / (n_path_points - 1) as f64
        };
        let x: Vec<f64> = center.iter().zip(&normal).map(|(c, nv)| c + s * nv).collect();
        let pi = net.gibbs(&x)?;
        let (norm, _) = hessian_spectral_norm(&net, &x)?;
        out.push(ShockSample {
            s,
            pi_i: pi[i],
            pi_j: pi[j],
            hessian_norm: norm,
        });
    }
    Ok(out)
}

/// Crossing point of the `i`/`j` weighted Voronoi hyperplane along the
/// inter-atom axis; exposed for tests and sweeps.
pub fn voronoi_crossing(support: &SupportSet, i: usize, j: usize, t: f64) -> Vec<f64> {
    let yi = support.atom(i);
    let yj = support.atom(j);
    let diff: Vec<f64> = yi.iter().zip(yj).map(|(a, b)| a - b).collect();
    let sep = stable::dot(&diff, &diff).sqrt();
    let rhs = support.value(i) - support.value(j)
        + (stable::dot(yi, yi) - stable::dot(yj, yj)) / (4.0 * t);
    let mid: Vec<f64> = yi.iter().zip(yj).map(|(a, b)| 0.5 * (a + b)).collect();
    let lambda = (2.0 * t * rhs - stable::dot(&diff, &mid)) / sep;
    mid.iter()
        .zip(diff.iter().map(|v| v / sep))
        .map(|(m, n)| m + lambda * n)
        .collect()
}
