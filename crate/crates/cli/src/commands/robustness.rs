//! `hopfcole robustness`: curvature-bound sweep, certificate export,
//! perturbation checks, and the near-shock refinement scaling.

use crate::config::FileConfig;
use crate::report::{fmt, Report};
use crate::util::rng_for;
use clap::Args;
use hopfcole_core::robustness::{
    certified_radius, hessian_spectral_norm, input_hessian, perturbation_check, shock_probe,
};
use hopfcole_core::{HjNetwork, SupportSet};
use rand::prelude::*;
use std::path::Path;

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    /// Randomized (network, point, viscosity) triples in the bound sweep.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output tolerance for the exported certificate.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Load the certificate network from a JSON file instead of generating.
    #[arg(long)]
    pub network: Option<std::path::PathBuf>,
}

pub fn run(seed: u64, out: &Path, file: &FileConfig, args: &RobustnessArgs) -> Result<bool, String> {
    let trials = file.resolve("trials", args.trials, 2000usize)?;
    let tau = file.resolve("tau", args.tau, 1.0f64)?;

    let mut report = Report::new("robustness", out).map_err(|e| e.to_string())?;
    report.config("seed", seed);
    report.config("trials", trials);
    report.config("tau", tau);

    // randomized spectral-bound sweep
    let mut rng = rng_for(seed, 20);
    let mut rows = Vec::new();
    let mut violations = 0usize;
    for _ in 0..trials {
        let d = 1 + rng.random_range(0..3usize);
        let n = 2 + rng.random_range(0..7usize);
        let eps = 0.05 + rng.random::<f64>() * 9.95;
        let w: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let net = HjNetwork::from_parts(d, w, b, 1.0, eps).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let (norm, bound) = hessian_spectral_norm(&net, &x).map_err(|e| e.to_string())?;
        let violated = norm > bound * (1.0 + 1e-12);
        if violated {
            violations += 1;
        }
        rows.push(vec![
            fmt(eps),
            fmt(norm),
            fmt(bound),
            u8::from(violated).to_string(),
        ]);
    }
    report
        .write_csv("hessian_bound_sweep.csv", "eps,norm,bound,violated", &rows)
        .map_err(|e| e.to_string())?;
    report.check(
        "hessian_bound",
        violations == 0,
        format!("{violations} of {trials} spectral-bound violations"),
    );

    // perturbation checks on a fresh batch
    let mut rng = rng_for(seed, 21);
    let mut pert_violations = 0usize;
    for k in 0..(trials / 10).max(20) {
        let eps = 0.1 + rng.random::<f64>();
        let w: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let net = HjNetwork::from_parts(2, w, b, 1.0, eps).map_err(|e| e.to_string())?;
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let r = 0.05 + rng.random::<f64>();
        let (obs, bound) =
            perturbation_check(&net, &x, r, 100, seed ^ k as u64).map_err(|e| e.to_string())?;
        if obs > bound * (1.0 + 1e-12) {
            pert_violations += 1;
        }
    }
    report.check(
        "perturbation_bound",
        pert_violations == 0,
        format!("{pert_violations} perturbation-bound violations"),
    );

    // certificate for one network: generated or loaded from JSON
    let cert_net = match &args.network {
        Some(path) => HjNetwork::read_json(path).map_err(|e| e.to_string())?,
        None => {
            let mut rng = rng_for(seed, 22);
            let s = crate::util::random_support(&mut rng, 8, 2, 2.0);
            HjNetwork::from_support(&s, 0.5, 0.5, None).map_err(|e| e.to_string())?
        }
    };
    let cert = certified_radius(&cert_net, tau).map_err(|e| e.to_string())?;
    report
        .write_text(
            "certificate.json",
            &serde_json::to_string_pretty(&cert).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;

    // large-viscosity limit of the certified radius
    let limit_net =
        HjNetwork::from_parts(1, vec![2.0, -1.0], vec![0.0, 0.3], 1.0, 1e8).map_err(|e| e.to_string())?;
    let limit = certified_radius(&limit_net, tau).map_err(|e| e.to_string())?;
    let limit_gap = (limit.certified_radius - tau / 2.0).abs();
    report.check(
        "radius_large_eps_limit",
        limit_gap <= 1e-4,
        format!("|r* - tau/|W|| = {limit_gap:.3e} at eps = 1e8"),
    );

    // two-neuron tie closed form
    let (w1, w2, eps) = (1.7, -0.6, 0.35);
    let tie = HjNetwork::from_parts(1, vec![w1, w2], vec![0.0, 0.0], 1.0, eps).map_err(|e| e.to_string())?;
    let h = input_hessian(&tie, &[0.0]).map_err(|e| e.to_string())?;
    let tie_gap = (h[(0, 0)] - (w1 - w2) * (w1 - w2) / (4.0 * eps)).abs();
    report.check(
        "two_neuron_tie",
        tie_gap <= 1e-10,
        format!("tie-point Hessian vs closed form: gap {tie_gap:.3e}"),
    );

    // near-shock refinement scaling
    let (t, shock_eps) = (0.5, 0.005);
    let peak_for = |k: usize| -> Result<f64, String> {
        let atoms: Vec<f64> = (0..=k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect();
        let s = SupportSet::new_1d(&atoms, &vec![0.0; atoms.len()]).map_err(|e| e.to_string())?;
        let mid = atoms.len() / 2;
        let path = shock_probe(&s, mid - 1, mid, t, shock_eps, 101).map_err(|e| e.to_string())?;
        Ok(path.iter().map(|p| p.hessian_norm).fold(0.0, f64::max))
    };
    let p1 = peak_for(1)?;
    let mut rows = vec![vec!["1".to_string(), fmt(p1), fmt(1.0)]];
    let mut shock_ok = true;
    for &k in &[2usize, 4, 8] {
        let pk = peak_for(k)?;
        let ratio = pk / (p1 * (k as f64).powi(-2));
        if !(0.5..=2.0).contains(&ratio) {
            shock_ok = false;
        }
        rows.push(vec![k.to_string(), fmt(pk), fmt(ratio)]);
    }
    report
        .write_csv("shock_scaling.csv", "k,peak_hessian_norm,ratio_to_k_minus_2", &rows)
        .map_err(|e| e.to_string())?;
    report.check(
        "near_shock_scaling",
        shock_ok,
        "peak curvature tracks k^(-2) within a factor two".to_string(),
    );

    report.finish().map_err(|e| e.to_string())
}
