//! Max-shifted exponential-sum primitives.
//!
//! Every softmax / log-sum-exp in the crate routes through these to keep
//! residuals finite at small temperatures: the largest logit is subtracted
//! before exponentiation, so the sums stay in `[1, n]` regardless of scale.

/// `max_j z_j`, with `-inf` for an empty slice.
pub fn max_of(z: &[f64]) -> f64 {
    z.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Natural log-sum-exp `ln sum_j exp(z_j)` with max shift.
pub fn ln_sum_exp(z: &[f64]) -> f64 {
    let m = max_of(z);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = z.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

/// Temperature log-sum-exp `eps * ln sum_j exp(z_j / eps)`.
///
/// For a single logit this is exact: `lse(eps, &[z]) == z`.
pub fn lse(eps: f64, z: &[f64]) -> f64 {
    let m = max_of(z);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = z.iter().map(|&v| ((v - m) / eps).exp()).sum();
    m + eps * s.ln()
}

/// Softmax at temperature `eps`, max-shifted.
pub fn softmax(eps: f64, z: &[f64]) -> Vec<f64> {
    let m = max_of(z);
    let mut w: Vec<f64> = z.iter().map(|&v| ((v - m) / eps).exp()).collect();
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

/// `ln softmax` at temperature `eps`; useful where `-ln pi_j` must stay
/// finite for weights that underflow to zero.
pub fn log_softmax(eps: f64, z: &[f64]) -> Vec<f64> {
    let m = max_of(z);
    let s: f64 = z.iter().map(|&v| ((v - m) / eps).exp()).sum();
    let ln_s = s.ln();
    z.iter().map(|&v| (v - m) / eps - ln_s).collect()
}

/// `softplus_eps(u) = eps * ln(1 + exp(u/eps))`, overflow-free on both tails.
pub fn softplus(eps: f64, u: f64) -> f64 {
    if u > 0.0 {
        u + eps * (-u / eps).exp().ln_1p()
    } else {
        eps * (u / eps).exp().ln_1p()
    }
}

/// Squared Euclidean distance between equal-length slices.
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dot product of equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
