//! The heat-kernel solution, its inviscid limit, and the layer identity.

use crate::error::Result;
use crate::metric::Metric;
use crate::network::HjNetwork;
use crate::stable;
use crate::support::SupportSet;

/// Quadratic transport cost `|x-y|^2/(4t)`, or `(x-y)^T A^{-1} (x-y)/(4t)`
/// under a metric.
pub fn transport_cost(x: &[f64], y: &[f64], t: f64, metric: Option<&Metric>) -> f64 {
    match metric {
        None => stable::dist_sq(x, y) / (4.0 * t),
        Some(m) => {
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            m.inv_quad_form(&diff) / (4.0 * t)
        }
    }
}

/// The quadratic shift `|x|^2/(4t)` (or `x^T A^{-1} x/(4t)`).
pub fn quad_term(x: &[f64], t: f64, metric: Option<&Metric>) -> f64 {
    match metric {
        None => stable::dot(x, x) / (4.0 * t),
        Some(m) => m.inv_quad_form(x) / (4.0 * t),
    }
}

/// Per-atom costs `g_j + cost(x, y_j)`.
pub fn atom_costs(support: &SupportSet, x: &[f64], t: f64, metric: Option<&Metric>) -> Vec<f64> {
    (0..support.len())
        .map(|j| support.value(j) + transport_cost(x, support.atom(j), t, metric))
        .collect()
}

/// Viscous solution under the discrete measure:
/// `-eps * log sum_j exp(-(g_j + cost(x, y_j))/eps)`, max-shift stabilized.
pub fn hopf_cole_solution(
    support: &SupportSet,
    x: &[f64],
    t: f64,
    eps: f64,
    metric: Option<&Metric>,
) -> f64 {
    let neg_costs: Vec<f64> = atom_costs(support, x, t, metric)
        .into_iter()
        .map(|c| -c)
        .collect();
    -stable::lse(eps, &neg_costs)
}

/// Inviscid solution: exact minimum of `g_j + |x-y_j|^2/(4t)` over atoms and
/// the attaining index. Ties break to the lowest index.
pub fn hopf_lax(support: &SupportSet, x: &[f64], t: f64) -> (f64, usize) {
    let mut best = 0usize;
    let mut best_cost = f64::INFINITY;
    for j in 0..support.len() {
        let c = support.value(j) + transport_cost(x, support.atom(j), t, None);
        if c < best_cost {
            best_cost = c;
            best = j;
        }
    }
    (best_cost, best)
}

/// `|forward(x) + hopf_cole(x) - quad(x)|`: the layer identity residual,
/// zero in exact arithmetic for the canonical parameterization.
pub fn identity_residual(
    support: &SupportSet,
    x: &[f64],
    t: f64,
    eps: f64,
    metric: Option<&Metric>,
) -> Result<f64> {
    let net = HjNetwork::from_support(support, t, eps, metric.cloned())?;
    let f = net.forward(x)?;
    let u = hopf_cole_solution(support, x, t, eps, metric);
    Ok((f + u - quad_term(x, t, metric)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
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
    fn single_atom_closed_form() {
        let s = SupportSet::new_1d(&[1.5], &[0.7]).unwrap();
        let x = [0.2];
        let u = hopf_cole_solution(&s, &x, 0.8, 0.3, None);
        let expect = 0.7 + (0.2f64 - 1.5).powi(2) / (4.0 * 0.8);
        assert!((u - expect).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_at_midpoint() {
        let s = SupportSet::new_1d(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        let u = hopf_cole_solution(&s, &[0.0], 1.0, 0.4, None);
        let cost = 0.5 + 1.0 / 4.0;
        assert!((u - (cost - 0.4 * std::f64::consts::LN_2)).abs() < 1e-15);
    }

    #[test]
    fn hopf_lax_single_atom_and_tie_break() {
        let s = SupportSet::new_1d(&[0.0], &[0.0]).unwrap();
        let (v, j) = hopf_lax(&s, &[3.0], 1.0);
        assert_eq!(j, 0);
        assert!((v - 9.0 / 4.0).abs() < 1e-15);

        // equidistant equal-value pair: lowest index wins
        let s = SupportSet::new_1d(&[-1.0, 1.0], &[0.3, 0.3]).unwrap();
        let (v, j) = hopf_lax(&s, &[0.0], 0.5);
        assert_eq!(j, 0);
        assert!((v - (0.3 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn viscous_approaches_inviscid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_support(&mut rng, 6, 1);
        let x = [0.37];
        let (u0, _) = hopf_lax(&s, &x, 0.6);
        let u_eps = hopf_cole_solution(&s, &x, 0.6, 1e-6, None);
        assert!((u_eps - u0).abs() < 1e-4);
    }

    #[test]
    fn identity_residual_isotropic_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = random_support(&mut rng, 4, 1);
        for &eps in &[1.0, 0.5, 0.2, 0.1, 0.05] {
            for _ in 0..100 {
                let x = [rng.random::<f64>() * 6.0 - 3.0];
                let r = identity_residual(&s, &x, 0.5, eps, None).unwrap();
                assert!(r <= 1e-12, "residual {r} at eps {eps}");
            }
        }
    }

    #[test]
    fn identity_residual_anisotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_support(&mut rng, 5, 2);
        let m = Metric::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])).unwrap();
        for _ in 0..200 {
            let x = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            let r = identity_residual(&s, &x, 0.7, 0.3, Some(&m)).unwrap();
            assert!(r <= 1e-12, "residual {r}");
        }
    }

    #[test]
    fn tropical_limit_error_shrinks_linearly() {
        // |u_eps - u_0| <= eps log N and nonincreasing along a decreasing sweep
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = random_support(&mut rng, 8, 2);
            let x = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            let (u0, _) = hopf_lax(&s, &x, 0.5);
            let mut last = f64::INFINITY;
            for &eps in &[0.5, 0.25, 0.12, 0.06, 0.03] {
                let gap = (hopf_cole_solution(&s, &x, 0.5, eps, None) - u0).abs();
                assert!(gap <= eps * (s.len() as f64).ln() + 1e-13);
                assert!(gap <= last + 1e-13);
                last = gap;
            }
        }
    }
}
