//! The exponential-sum partition function as a free-soliton tau-function,
//! with two independent Hirota residual evaluators.
//!
//! A sum `tau = sum_j a_j exp(k_j x1 + k_j^2 x2 + k_j^3 x3)` solves the
//! bilinear equation `(D1^4 + 3 D2^2 - 4 D1 D3) tau . tau = 0`. One
//! evaluator sums the pair polynomial directly; the other applies the
//! bilinear operators by central finite differences of `tau(a) tau(a')`.
//! The two share nothing past the exponents `xi_j`, which is the point: the
//! residual check is a cross-validation, not a tautology.

use crate::error::{CoreError, Result};
use crate::hopf::hopf_cole_solution;
use crate::stable;
use crate::support::SupportSet;

/// Free-soliton tau-function data: distinct wavenumbers and positive
/// amplitudes.
#[derive(Debug, Clone)]
pub struct TauFunction {
    k: Vec<f64>,
    /// Log-amplitudes; amplitudes are recoverable as `exp(ln_a)` and stay
    /// usable far outside the double range.
    ln_a: Vec<f64>,
}

impl TauFunction {
    pub fn new(k: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if k.is_empty() {
            return Err(CoreError::EmptyInput("tau-function needs components"));
        }
        if k.len() != a.len() {
            return Err(CoreError::DimensionMismatch {
                expected: k.len(),
                got: a.len(),
            });
        }
        if a.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(CoreError::NonPositive {
                name: "amplitude",
                value: a.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
        let mut sorted = k.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoreError::DuplicateAtoms(0, 1));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("wavenumbers"));
        }
        Ok(Self {
            k,
            ln_a: a.iter().map(|v| v.ln()).collect(),
        })
    }

    /// Construct from log-amplitudes directly (used by the solution
    /// identity, where `a_j = exp(-g_j/eps)` would underflow).
    pub fn from_log_amplitudes(k: Vec<f64>, ln_a: Vec<f64>) -> Result<Self> {
        if ln_a.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("log amplitudes"));
        }
        let mut tf = Self::new(k, vec![1.0; ln_a.len()])?;
        tf.ln_a = ln_a;
        Ok(tf)
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// Phase exponents `xi_j = k_j x1 + k_j^2 x2 + k_j^3 x3`; the single
    /// definition every evaluator below consumes.
    pub fn exponents(&self, x1: f64, x2: f64, x3: f64) -> Vec<f64> {
        self.k
            .iter()
            .map(|&k| k * x1 + k * k * x2 + k * k * k * x3)
            .collect()
    }

    /// `log tau`, max-shift stabilized; finite for phase magnitudes far
    /// beyond the bare exponential range.
    pub fn log_tau(&self, x1: f64, x2: f64, x3: f64) -> f64 {
        let z: Vec<f64> = self
            .exponents(x1, x2, x3)
            .iter()
            .zip(&self.ln_a)
            .map(|(xi, la)| xi + la)
            .collect();
        stable::ln_sum_exp(&z)
    }
}

/// Pair polynomial of the bilinear form:
/// `P(p,q) = (p-q)^4 + 3(p^2-q^2)^2 - 4(p-q)(p^3-q^3)`; identically zero,
/// which is exactly why free sums solve the hierarchy.
pub fn hirota_pair_polynomial(p: f64, q: f64) -> f64 {
    (p - q).powi(4) + 3.0 * (p * p - q * q).powi(2) - 4.0 * (p - q) * (p * p * p - q * q * q)
}

/// Bilinear-sum residual `sum_{ij} a_i a_j P(k_i,k_j) e^{xi_i + xi_j}`,
/// normalized by `tau^2` so the value is scale-free.
pub fn hirota_residual_bilinear(tau: &TauFunction, x1: f64, x2: f64, x3: f64) -> f64 {
    let xi = tau.exponents(x1, x2, x3);
    let z: Vec<f64> = xi.iter().zip(&tau.ln_a).map(|(a, b)| a + b).collect();
    let m = stable::max_of(&z);
    let w: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let mut num = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        for (j, &wj) in w.iter().enumerate() {
            num += wi * wj * hirota_pair_polynomial(tau.k[i], tau.k[j]);
        }
    }
    let denom: f64 = w.iter().sum::<f64>().powi(2);
    num / denom
}

/// Result of the finite-difference residual evaluation.
#[derive(Debug, Clone, Copy)]
pub struct FdResidual {
    pub value: f64,
    /// Estimated O(step^2) truncation magnitude of the stencils.
    pub truncation_estimate: f64,
    /// Estimated rounding floor of the stencils.
    pub rounding_floor: f64,
    /// Set when the rounding floor dominates the truncation estimate, i.e.
    /// the step is too small for the result to be meaningful.
    pub step_too_small: bool,
}

impl FdResidual {
    /// Three times the combined truncation/rounding estimate; the bilinear
    /// evaluator must agree with the finite-difference value within this.
    pub fn error_budget(&self) -> f64 {
        3.0 * (self.truncation_estimate + self.rounding_floor)
    }
}

/// Evaluate the finite-difference residual at `step` and `step/2` and
/// return the halved-step value with a Richardson error budget: the
/// truncation magnitude is measured from the two evaluations instead of
/// estimated a priori, so mixed-wavenumber cross terms are covered.
pub fn hirota_residual_fd_checked(
    tau: &TauFunction,
    x1: f64,
    x2: f64,
    x3: f64,
    step: f64,
) -> Result<(FdResidual, f64)> {
    let coarse = hirota_residual_fd(tau, x1, x2, x3, step)?;
    let fine = hirota_residual_fd(tau, x1, x2, x3, 0.5 * step)?;
    let richardson = (coarse.value - fine.value).abs() * (4.0 / 3.0);
    let budget = 3.0 * (richardson + fine.rounding_floor);
    Ok((fine, budget))
}

/// Central-difference evaluation of `(D1^4 + 3 D2^2 - 4 D1 D3) tau . tau`
/// normalized by `tau^2`, taking the bilinear identity
/// `D^m f.f = sum_r (-1)^r C(m,r) f^(m-r) f^(r)` on plain partials of one
/// copy of `tau`. Independent of the pair-sum path above.
pub fn hirota_residual_fd(tau: &TauFunction, x1: f64, x2: f64, x3: f64, step: f64) -> Result<FdResidual> {
    if step.is_nan() || step <= 0.0 {
        return Err(CoreError::NonPositive {
            name: "step",
            value: step,
        });
    }
    // shifted tau: all values scaled by exp(-M) with M fixed at the center,
    // which cancels in the tau^2 normalization
    let m = {
        let z: Vec<f64> = tau
            .exponents(x1, x2, x3)
            .iter()
            .zip(&tau.ln_a)
            .map(|(a, b)| a + b)
            .collect();
        stable::max_of(&z)
    };
    let tv = |d1: f64, d2: f64, d3: f64| -> f64 {
        let z: Vec<f64> = tau
            .exponents(x1 + d1, x2 + d2, x3 + d3)
            .iter()
            .zip(&tau.ln_a)
            .map(|(a, b)| a + b - m)
            .collect();
        z.iter().map(|&v| v.exp()).sum()
    };
    let h = step;
    let f0 = tv(0.0, 0.0, 0.0);

    // x1 line for the fourth derivative: five-point stencils
    let f1 = [
        tv(-2.0 * h, 0.0, 0.0),
        tv(-h, 0.0, 0.0),
        f0,
        tv(h, 0.0, 0.0),
        tv(2.0 * h, 0.0, 0.0),
    ];
    let d1 = (f1[3] - f1[1]) / (2.0 * h);
    let d1_3 = (f1[4] - 2.0 * f1[3] + 2.0 * f1[1] - f1[0]) / (2.0 * h * h * h);
    let d1_4 = (f1[4] - 4.0 * f1[3] + 6.0 * f1[2] - 4.0 * f1[1] + f1[0]) / h.powi(4);

    // x2 partials
    let f2p = tv(0.0, h, 0.0);
    let f2m = tv(0.0, -h, 0.0);
    let d2 = (f2p - f2m) / (2.0 * h);
    let d2_2 = (f2p - 2.0 * f0 + f2m) / (h * h);

    // x3 first partial and the mixed d1 d3
    let f3p = tv(0.0, 0.0, h);
    let f3m = tv(0.0, 0.0, -h);
    let d3 = (f3p - f3m) / (2.0 * h);
    let d13 = (tv(h, 0.0, h) - tv(h, 0.0, -h) - tv(-h, 0.0, h) + tv(-h, 0.0, -h)) / (4.0 * h * h);

    // D1^4 f.f = 2 f'''' f - 8 f''' f' + 6 f''^2 needs d1_2 as well
    let d1_2 = (f1[3] - 2.0 * f1[2] + f1[1]) / (h * h);

    let bilinear = 2.0 * (d1_4 * f0 - 4.0 * d1_3 * d1 + 3.0 * d1_2 * d1_2)
        + 3.0 * 2.0 * (d2_2 * f0 - d2 * d2)
        - 4.0 * 2.0 * (d13 * f0 - d1 * d3);
    let value = bilinear / (f0 * f0);

    // rounding floor: the fourth-derivative stencil divides ~ulp-level sums
    // by h^4; truncation carries k^6 (x1 stencils) and k^8 (x2 stencils)
    let kmax = tau.k.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    let rounding_floor = 64.0 * f64::EPSILON / h.powi(4);
    let truncation_estimate = h * h * kmax.powi(6) * (2.0 + 1.5 * kmax * kmax);
    Ok(FdResidual {
        value,
        truncation_estimate,
        rounding_floor,
        step_too_small: rounding_floor > truncation_estimate,
    })
}

/// Default finite-difference step: `1e-2 / max |k|`.
pub fn default_fd_step(tau: &TauFunction) -> f64 {
    let kmax = tau.k.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if kmax > 0.0 {
        1e-2 / kmax
    } else {
        1e-2
    }
}

/// One-dimensional solution identity: with wavenumbers at the atoms,
/// log-amplitudes `-g_j/eps`, and flow times `x1 = x/(2 t eps)`,
/// `x2 = -1/(4 t eps)`, `x3 = 0`, the viscous solution is
/// `x^2/(4t) - eps log tau`. Returns the absolute residual between the two
/// evaluations.
pub fn tau_log_identity(support: &SupportSet, x: f64, t: f64, eps: f64) -> Result<f64> {
    if support.dim() != 1 {
        return Err(CoreError::DimensionMismatch {
            expected: 1,
            got: support.dim(),
        });
    }
    let k: Vec<f64> = (0..support.len()).map(|j| support.atom(j)[0]).collect();
    let ln_a: Vec<f64> = support.values().iter().map(|&g| -g / eps).collect();
    let tau = TauFunction::from_log_amplitudes(k, ln_a)?;
    let log_tau = tau.log_tau(x / (2.0 * t * eps), -1.0 / (4.0 * t * eps), 0.0);
    let via_tau = x * x / (4.0 * t) - eps * log_tau;
    let direct = hopf_cole_solution(support, &[x], t, eps, None);
    Ok((via_tau - direct).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_tau(rng: &mut ChaCha8Rng, n: usize) -> TauFunction {
        loop {
            let k: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 + 0.1).collect();
            if let Ok(t) = TauFunction::new(k, a) {
                return t;
            }
        }
    }

    #[test]
    fn pair_polynomial_vanishes() {
        assert_eq!(hirota_pair_polynomial(1.7, 1.7), 0.0);
        // (1,2): 1 + 27 - 28 = 0 after expansion
        assert_eq!(
            (1.0f64 - 2.0).powi(4) + 3.0 * (1.0f64 - 4.0).powi(2),
            28.0
        );
        assert!(hirota_pair_polynomial(1.0, 2.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = rng.random::<f64>() * 6.0 - 3.0;
            let q = rng.random::<f64>() * 6.0 - 3.0;
            assert!(hirota_pair_polynomial(p, q).abs() < 1e-11);
        }
    }

    #[test]
    fn log_tau_values() {
        // single component: ln a + xi exactly
        let tau = TauFunction::new(vec![1.5], vec![0.7]).unwrap();
        let expect = 0.7f64.ln() + 1.5 * 0.3 + 2.25 * (-0.2);
        assert!((tau.log_tau(0.3, -0.2, 0.0) - expect).abs() < 1e-14);

        // equal amplitudes at the origin: ln(N a)
        let tau = TauFunction::new(vec![0.5, 1.0, -0.7], vec![2.0, 2.0, 2.0]).unwrap();
        assert!((tau.log_tau(0.0, 0.0, 0.0) - 6.0f64.ln()).abs() < 1e-14);

        // large phases stay finite
        let tau = TauFunction::new(vec![1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(tau.log_tau(700.0, 0.0, 0.0).is_finite());
        assert!(tau.log_tau(-700.0, 350.0, 100.0).is_finite());
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(TauFunction::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(TauFunction::new(vec![1.0], vec![0.0]).is_err());
        assert!(TauFunction::new(vec![1.0], vec![-2.0]).is_err());
        assert!(TauFunction::new(vec![], vec![]).is_err());
    }

    #[test]
    fn bilinear_residual_is_roundoff_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n = 1 + rng.random_range(0..8usize);
            let tau = random_tau(&mut rng, n);
            let (x1, x2, x3) = (
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            );
            let r = hirota_residual_bilinear(&tau, x1, x2, x3).abs();
            assert!(r <= 1e-10, "N={n}: residual {r}");
        }
    }

    #[test]
    fn fd_residual_single_soliton_stays_on_truncation_floor() {
        // a single exponential solves the equation exactly, so the FD value
        // is pure stencil truncation: about 3.5 h^2 at unit wavenumber
        let tau = TauFunction::new(vec![1.0], vec![1.0]).unwrap();
        let res = hirota_residual_fd(&tau, 0.2, -0.1, 0.05, 1e-2).unwrap();
        assert!(!res.step_too_small);
        assert!(res.value.abs() <= res.error_budget(), "residual {}", res.value);
        assert!(res.value.abs() <= 2e-3);
    }

    #[test]
    fn fd_and_bilinear_evaluators_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = 1 + rng.random_range(0..6usize);
            let tau = random_tau(&mut rng, n);
            let (x1, x2, x3) = (
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            );
            let step = default_fd_step(&tau);
            let (fd, budget) = hirota_residual_fd_checked(&tau, x1, x2, x3, step).unwrap();
            let bi = hirota_residual_bilinear(&tau, x1, x2, x3);
            assert!(
                (fd.value - bi).abs() <= budget.max(1e-8),
                "fd {} vs bilinear {bi} budget {budget}",
                fd.value,
            );
        }
    }

    #[test]
    fn fd_residual_tracks_step_squared() {
        let tau = TauFunction::new(vec![0.8, -1.1, 1.9], vec![0.5, 1.0, 0.25]).unwrap();
        let r1 = hirota_residual_fd(&tau, 0.1, 0.05, -0.02, 2e-2).unwrap();
        let r2 = hirota_residual_fd(&tau, 0.1, 0.05, -0.02, 1e-2).unwrap();
        // halving the step cuts the truncation-dominated value by about 4
        let ratio = r1.value.abs() / r2.value.abs().max(1e-300);
        assert!(ratio > 2.5 && ratio < 6.0, "ratio {ratio}");
        // absurdly small steps are flagged as rounding-dominated
        let tiny = hirota_residual_fd(&tau, 0.1, 0.05, -0.02, 1e-6).unwrap();
        assert!(tiny.step_too_small);
    }

    #[test]
    fn solution_identity_reduces_to_tau_log() {
        // single atom: exact cancellation
        let s = SupportSet::new_1d(&[0.8], &[0.4]).unwrap();
        assert!(tau_log_identity(&s, 0.3, 0.5, 0.2).unwrap() < 1e-13);

        // random small supports across viscosities
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let atoms: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let values: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let Ok(s) = SupportSet::new_1d(&atoms, &values) else {
                continue;
            };
            for &eps in &[0.1, 1.0] {
                for &x in &[-1.3, 0.0, 0.7, 2.1] {
                    let r = tau_log_identity(&s, x, 0.5, eps).unwrap();
                    assert!(r <= 1e-12, "x={x} eps={eps}: {r}");
                }
            }
        }
    }
}
