//! Closed-form attribution: Gibbs weights over atoms, label sensitivity,
//! prediction/entropy gradients, the fixed-support Hessian, and the tangent
//! kernel Gram matrix. Everything here is O(N) per query; no second-order
//! solves appear anywhere.

use crate::error::{CoreError, Result};
use crate::hopf;
use crate::stable;
use crate::support::SupportSet;
use nalgebra::DMatrix;

/// Simplex weights `pi_j(x) ∝ exp(-(|x-y_j|^2/(4t) + g_j)/eps)` together
/// with their logs (kept separately so `-log pi` stays finite after
/// underflow).
#[derive(Debug, Clone)]
pub struct GibbsWeights {
    pub pi: Vec<f64>,
    pub log_pi: Vec<f64>,
    pub x: Vec<f64>,
    pub eps: f64,
    pub t: f64,
}

/// Attribution weights of each atom at the query point.
pub fn gibbs_weights(support: &SupportSet, x: &[f64], t: f64, eps: f64) -> GibbsWeights {
    let neg_costs: Vec<f64> = hopf::atom_costs(support, x, t, None)
        .into_iter()
        .map(|c| -c)
        .collect();
    GibbsWeights {
        pi: stable::softmax(eps, &neg_costs),
        log_pi: stable::log_softmax(eps, &neg_costs),
        x: x.to_vec(),
        eps,
        t,
    }
}

/// Gibbs-weighted label average `sum_j pi_j g_j`; always inside
/// `[min g, max g]`.
pub fn soft_prediction(weights: &GibbsWeights, support: &SupportSet) -> f64 {
    weights
        .pi
        .iter()
        .zip(support.values())
        .map(|(p, g)| p * g)
        .sum()
}

/// Exact derivative of the soft prediction with respect to label `g_j`:
/// `pi_j (1 + (fhat - g_j)/eps)`.
pub fn label_sensitivity(
    support: &SupportSet,
    x: &[f64],
    t: f64,
    eps: f64,
    j: usize,
) -> Result<f64> {
    if j >= support.len() {
        return Err(CoreError::IndexOutOfRange {
            index: j,
            len: support.len(),
        });
    }
    let w = gibbs_weights(support, x, t, eps);
    let fhat = soft_prediction(&w, support);
    Ok(w.pi[j] * (1.0 + (fhat - support.value(j)) / eps))
}

/// Gibbs covariance `Cov_pi(a, y)` for scalar weights `a_j` against the atom
/// coordinates; returns a length-d vector.
fn gibbs_cov_with_atoms(support: &SupportSet, pi: &[f64], a: &[f64]) -> Vec<f64> {
    let d = support.dim();
    let mut mean_y = vec![0.0; d];
    let mut mean_a = 0.0;
    for j in 0..support.len() {
        mean_a += pi[j] * a[j];
        for (m, yi) in mean_y.iter_mut().zip(support.atom(j)) {
            *m += pi[j] * yi;
        }
    }
    let mut cov = vec![0.0; d];
    for j in 0..support.len() {
        let w = pi[j] * (a[j] - mean_a);
        for ((c, yi), my) in cov.iter_mut().zip(support.atom(j)).zip(&mean_y) {
            *c += w * (yi - my);
        }
    }
    cov
}

/// Spatial gradient of the soft prediction: `Cov_pi(g, y) / (2 t eps)`.
pub fn prediction_gradient(support: &SupportSet, x: &[f64], t: f64, eps: f64) -> Vec<f64> {
    let w = gibbs_weights(support, x, t, eps);
    let mut cov = gibbs_cov_with_atoms(support, &w.pi, support.values());
    for c in &mut cov {
        *c /= 2.0 * t * eps;
    }
    cov
}

/// Attribution entropy `H = -sum_j pi_j log pi_j` in `[0, log N]` and its
/// spatial gradient `Cov_pi(y, -log pi) / (2 t eps)`.
pub fn attribution_entropy(support: &SupportSet, x: &[f64], t: f64, eps: f64) -> (f64, Vec<f64>) {
    let w = gibbs_weights(support, x, t, eps);
    entropy_from_weights(support, &w, t, eps)
}

pub(crate) fn entropy_from_weights(
    support: &SupportSet,
    w: &GibbsWeights,
    t: f64,
    eps: f64,
) -> (f64, Vec<f64>) {
    let neg_log_pi: Vec<f64> = w.log_pi.iter().map(|&l| -l).collect();
    // pi_j * (-log pi_j) with underflowed weights contributing zero
    let h: f64 = w
        .pi
        .iter()
        .zip(&neg_log_pi)
        .map(|(&p, &nl)| if p > 0.0 { p * nl } else { 0.0 })
        .sum();
    let mut grad = gibbs_cov_with_atoms(support, &w.pi, &neg_log_pi);
    for g in &mut grad {
        *g /= 2.0 * t * eps;
    }
    (h.max(0.0), grad)
}

/// Hessian of the layer output in the bias parameterization:
/// `eps * (diag(pi) - pi pi^T)`. Symmetric PSD with the ones vector in its
/// kernel.
pub fn fixed_support_hessian(support: &SupportSet, x: &[f64], t: f64, eps: f64) -> DMatrix<f64> {
    let w = gibbs_weights(support, x, t, eps);
    let n = support.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j {
                w.pi[i] * (1.0 - w.pi[i])
            } else {
                -w.pi[i] * w.pi[j]
            };
            m[(i, j)] = eps * v;
        }
    }
    m
}

/// Tangent-kernel Gram matrix over evaluation points:
/// `K_ab = eps^2 sum_j pi_j(x_a) pi_j(x_b)`, plus its minimum eigenvalue.
pub fn ntk_gram(
    support: &SupportSet,
    xs: &[Vec<f64>],
    t: f64,
    eps: f64,
) -> Result<(DMatrix<f64>, f64)> {
    if xs.is_empty() {
        return Err(CoreError::EmptyInput("ntk gram needs evaluation points"));
    }
    let n = xs.len();
    let weights: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| gibbs_weights(support, x, t, eps).pi)
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let dot = stable::dot(&weights[a], &weights[b]) * eps * eps;
            k[(a, b)] = dot;
            k[(b, a)] = dot;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(k.clone());
    Ok((k, eig.eigenvalues.min()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopf::hopf_lax;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_support(rng: &mut ChaCha8Rng, n: usize, d: usize) -> SupportSet {
        loop {
            let atoms: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            if let Ok(s) = SupportSet::new(d, atoms, values) {
                return s;
            }
        }
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let s = SupportSet::new_1d(&[-1.0, 1.0], &[0.4, 0.4]).unwrap();
        let w = gibbs_weights(&s, &[0.0], 0.5, 0.2);
        assert!((w.pi[0] - 0.5).abs() < 1e-15);
        assert!((w.pi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_atom_weight_and_sensitivity() {
        let s = SupportSet::new_1d(&[0.3], &[0.9]).unwrap();
        let w = gibbs_weights(&s, &[1.0], 0.5, 0.2);
        assert_eq!(w.pi, vec![1.0]);
        // fhat = g_1, so sensitivity is exactly 1
        assert!((label_sensitivity(&s, &[1.0], 0.5, 0.2, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(label_sensitivity(&s, &[1.0], 0.5, 0.2, 1).is_err());
        // gradient vanishes: zero covariance
        assert_eq!(prediction_gradient(&s, &[1.0], 0.5, 0.2), vec![0.0]);
    }

    #[test]
    fn concentrates_on_hopf_lax_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_support(&mut rng, 6, 2);
        let x = vec![0.3, -0.4];
        let (_, j_star) = hopf_lax(&s, &x, 0.5);
        // margin 50 eps: one-hot within 1e-10
        let costs = crate::hopf::atom_costs(&s, &x, 0.5, None);
        let mut sorted = costs.clone();
        sorted.sort_by(f64::total_cmp);
        let margin = sorted[1] - sorted[0];
        let eps = margin / 50.0;
        let w = gibbs_weights(&s, &x, 0.5, eps);
        assert!((w.pi[j_star] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn soft_prediction_is_a_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let s = random_support(&mut rng, 8, 1);
            let x = vec![rng.random::<f64>() * 6.0 - 3.0];
            let w = gibbs_weights(&s, &x, 0.5, 0.3);
            let fhat = soft_prediction(&w, &s);
            let lo = s.values().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(fhat >= lo - 1e-12 && fhat <= hi + 1e-12);
            let sum: f64 = w.pi.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        // uniform weights over g = (0, 2) average to 1
        let s = SupportSet::new_1d(&[-1.0, 1.0], &[0.0, 2.0]).unwrap();
        let uniform = GibbsWeights {
            pi: vec![0.5, 0.5],
            log_pi: vec![0.5f64.ln(), 0.5f64.ln()],
            x: vec![0.0],
            eps: 0.4,
            t: 0.5,
        };
        assert!((soft_prediction(&uniform, &s) - 1.0).abs() < 1e-15);
        // one-hot weights select the matching label
        let one_hot = GibbsWeights {
            pi: vec![0.0, 1.0],
            log_pi: vec![f64::NEG_INFINITY, 0.0],
            x: vec![0.0],
            eps: 0.4,
            t: 0.5,
        };
        assert_eq!(soft_prediction(&one_hot, &s), 2.0);
    }

    #[test]
    fn entropy_bounds_and_limits() {
        // symmetric pair at the midpoint: H = log 2, gradient 0
        let s = SupportSet::new_1d(&[-1.0, 1.0], &[0.0, 0.0]).unwrap();
        let (h, grad) = attribution_entropy(&s, &[0.0], 0.5, 0.3);
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(grad[0].abs() < 1e-12);

        // near one-hot: entropy close to zero, never negative or above log N
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let s = random_support(&mut rng, 7, 2);
            let x = vec![rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            for &eps in &[1e-3, 0.1, 1.0, 100.0] {
                let (h, _) = attribution_entropy(&s, &x, 0.5, eps);
                assert!(h >= 0.0 && h <= (s.len() as f64).ln() + 1e-12);
            }
        }
    }

    #[test]
    fn label_sensitivity_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let s = random_support(&mut rng, 6, 1);
            let x = vec![rng.random::<f64>() * 4.0 - 2.0];
            let (t, eps) = (0.5, 0.2 + 0.8 * rng.random::<f64>());
            let j = rng.random_range(0..s.len());
            let cf = label_sensitivity(&s, &x, t, eps, j).unwrap();
            let dg = 1e-5 * eps;
            let plus = s.with_value(j, s.value(j) + dg).unwrap();
            let minus = s.with_value(j, s.value(j) - dg).unwrap();
            let f_plus = soft_prediction(&gibbs_weights(&plus, &x, t, eps), &plus);
            let f_minus = soft_prediction(&gibbs_weights(&minus, &x, t, eps), &minus);
            let fd = (f_plus - f_minus) / (2.0 * dg);
            assert!(
                (fd - cf).abs() <= 1e-5 * cf.abs().max(1e-2),
                "fd {fd} vs closed form {cf}"
            );
        }
        // symmetric pair with equal labels: each sensitivity is 1/2
        let s = SupportSet::new_1d(&[-1.0, 1.0], &[0.0, 0.0]).unwrap();
        for j in 0..2 {
            let v = label_sensitivity(&s, &[0.0], 0.5, 0.3, j).unwrap();
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let d = 1 + (rng.random::<f64>() * 2.0) as usize;
            let s = random_support(&mut rng, 6, d);
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let (t, eps) = (0.5, 0.2 + 0.8 * rng.random::<f64>());
            let grad_f = prediction_gradient(&s, &x, t, eps);
            let (_, grad_h) = attribution_entropy(&s, &x, t, eps);
            let step = 1e-5;
            let mut fd_f = vec![0.0; d];
            let mut fd_h = vec![0.0; d];
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += step;
                xm[i] -= step;
                let fp = soft_prediction(&gibbs_weights(&s, &xp, t, eps), &s);
                let fm = soft_prediction(&gibbs_weights(&s, &xm, t, eps), &s);
                fd_f[i] = (fp - fm) / (2.0 * step);
                let hp = attribution_entropy(&s, &xp, t, eps).0;
                let hm = attribution_entropy(&s, &xm, t, eps).0;
                fd_h[i] = (hp - hm) / (2.0 * step);
            }
            let rel = |a: &[f64], b: &[f64]| {
                let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                num / den.max(1e-3)
            };
            assert!(rel(&fd_f, &grad_f) <= 1e-5, "grad f mismatch {}", rel(&fd_f, &grad_f));
            assert!(rel(&fd_h, &grad_h) <= 1e-5, "grad H mismatch {}", rel(&fd_h, &grad_h));
        }
        // constant labels: zero prediction gradient
        let s = SupportSet::new_1d(&[-1.0, 0.5, 2.0], &[0.7, 0.7, 0.7]).unwrap();
        let g = prediction_gradient(&s, &[0.2], 0.5, 0.3);
        assert!(g[0].abs() < 1e-14);
    }

    #[test]
    fn fixed_support_hessian_structure() {
        // N = 1: the 1x1 zero matrix
        let s1 = SupportSet::new_1d(&[0.0], &[0.0]).unwrap();
        let h1 = fixed_support_hessian(&s1, &[0.4], 0.5, 0.3);
        assert_eq!(h1[(0, 0)], 0.0);

        // uniform pair: eps * [[1/4, -1/4], [-1/4, 1/4]]
        let s2 = SupportSet::new_1d(&[-1.0, 1.0], &[0.0, 0.0]).unwrap();
        let h2 = fixed_support_hessian(&s2, &[0.0], 0.5, 0.8);
        assert!((h2[(0, 0)] - 0.2).abs() < 1e-14);
        assert!((h2[(0, 1)] + 0.2).abs() < 1e-14);

        // random instance: PSD, zero row sums, ones vector in the kernel
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..20 {
            let s = random_support(&mut rng, 7, 2);
            let x = vec![rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
            let eps = 0.5;
            let h = fixed_support_hessian(&s, &x, 0.5, eps);
            assert_eq!(h.transpose(), h);
            let ones = nalgebra::DVector::from_element(s.len(), 1.0);
            assert!((&h * &ones).norm() <= 1e-12);
            let eig = nalgebra::SymmetricEigen::new(h);
            assert!(eig.eigenvalues.min() >= -1e-12);
            assert!(eig.eigenvalues.max() <= eps / 2.0 + 1e-12);
        }
    }

    #[test]
    fn ntk_gram_positive_definite_for_distinct_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        // single point: K11 = eps^2 sum pi^2 > 0
        let s = random_support(&mut rng, 5, 1);
        let (k, min_eig) = ntk_gram(&s, &[vec![0.3]], 0.5, 0.4).unwrap();
        assert!(k[(0, 0)] > 0.0 && min_eig > 0.0);

        // duplicate evaluation points: singular
        let xs = vec![vec![0.1], vec![0.1]];
        let (k, min_eig) = ntk_gram(&s, &xs, 0.5, 0.4).unwrap();
        assert!(min_eig <= 1e-12 * k.trace());

        // distinct points, N >= n: positive definite in every trial
        for _ in 0..100 {
            let s = random_support(&mut rng, 8, 1);
            let xs: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random::<f64>() * 4.0 - 2.0]).collect();
            let (_, min_eig) = ntk_gram(&s, &xs, 0.5, 0.5).unwrap();
            assert!(min_eig > 0.0, "gram matrix lost rank");
        }
    }
}
