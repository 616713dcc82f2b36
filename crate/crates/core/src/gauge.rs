//! Gauge fixings for the free scalar `t` (and the matched viscosity).
//!
//! The canonical parameterization leaves `t > 0` free; each fixing below
//! pins it (or `eps`) to a scale with an operational meaning.

use crate::attribution::attribution_entropy;
use crate::error::{CoreError, Result};
use crate::support::SupportSet;

/// `t = tr(cov(X))/d` for a sample cloud stored row-major (`n x d`).
/// Covariance uses the population normalization `1/n`.
pub fn data_scale_gauge(samples: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
        return Err(CoreError::EmptyInput("data-scale gauge needs samples"));
    }
    let n = samples.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in samples.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut trace = 0.0;
    for row in samples.chunks_exact(dim) {
        for (m, v) in mean.iter().zip(row) {
            trace += (v - m) * (v - m);
        }
    }
    Ok(trace / (n as f64 * dim as f64))
}

/// Matched viscosity `eps* = N^(-1/d)`.
pub fn generalization_gauge(n: usize, dim: usize) -> Result<f64> {
    if n == 0 || dim == 0 {
        return Err(CoreError::EmptyInput("generalization gauge needs n, d >= 1"));
    }
    Ok((n as f64).powf(-1.0 / dim as f64))
}

/// `t` maximizing the mean attribution entropy over `x_grid`, located by
/// golden-section search on `log t` over `[1e-3, 1e3]` (60 iterations).
pub fn information_gauge(support: &SupportSet, eps: f64, x_grid: &[Vec<f64>]) -> Result<f64> {
    if x_grid.is_empty() {
        return Err(CoreError::EmptyInput("information gauge needs an x grid"));
    }
    for x in x_grid {
        if x.len() != support.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: support.dim(),
                got: x.len(),
            });
        }
    }
    let mean_entropy = |log_t: f64| -> f64 {
        let t = log_t.exp();
        let mut acc = 0.0;
        for x in x_grid {
            let (h, _) = attribution_entropy(support, x, t, eps);
            acc += h;
        }
        acc / x_grid.len() as f64
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-3f64.ln(), 1e3f64.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = mean_entropy(c);
    let mut fd = mean_entropy(d);
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = mean_entropy(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = mean_entropy(d);
        }
    }
    Ok(((a + b) / 2.0).exp())
}
