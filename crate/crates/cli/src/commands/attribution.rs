//! `hopfcole attribution`: finite-difference verification of the closed-form
//! sensitivity and gradient formulas, plus the tangent-kernel Gram sweep.

use crate::config::FileConfig;
use crate::report::{fmt, Report};
use crate::util::{random_support, rng_for};
use clap::Args;
use hopfcole_core::attribution::{
    attribution_entropy, gibbs_weights, label_sensitivity, ntk_gram, prediction_gradient,
    soft_prediction,
};
use rand::prelude::*;
use std::path::Path;

#[derive(Debug, Args)]
pub struct AttributionArgs {
    /// Random instances per finite-difference oracle.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Tangent-kernel trials.
    #[arg(long)]
    pub gram_trials: Option<usize>,
}

pub fn run(seed: u64, out: &Path, file: &FileConfig, args: &AttributionArgs) -> Result<bool, String> {
    let instances = file.resolve("instances", args.instances, 200usize)?;
    let gram_trials = file.resolve("gram_trials", args.gram_trials, 100usize)?;

    let mut report = Report::new("attribution", out).map_err(|e| e.to_string())?;
    report.config("seed", seed);
    report.config("instances", instances);
    report.config("gram_trials", gram_trials);

    let mut rng = rng_for(seed, 40);
    let mut rows = Vec::new();
    let (mut worst_ls, mut worst_pg, mut worst_eg): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for instance in 0..instances {
        let d = 1 + rng.random_range(0..2usize);
        let s = random_support(&mut rng, 6, d, 2.0);
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let (t, eps) = (0.5, 0.2 + 0.8 * rng.random::<f64>());

        let j = rng.random_range(0..s.len());
        let cf = label_sensitivity(&s, &x, t, eps, j).map_err(|e| e.to_string())?;
        let dg = 1e-5 * eps;
        let plus = s.with_value(j, s.value(j) + dg).map_err(|e| e.to_string())?;
        let minus = s.with_value(j, s.value(j) - dg).map_err(|e| e.to_string())?;
        let fd = (soft_prediction(&gibbs_weights(&plus, &x, t, eps), &plus)
            - soft_prediction(&gibbs_weights(&minus, &x, t, eps), &minus))
            / (2.0 * dg);
        let rel_ls = (fd - cf).abs() / cf.abs().max(1e-2);
        worst_ls = worst_ls.max(rel_ls);

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
            fd_f[i] = (soft_prediction(&gibbs_weights(&s, &xp, t, eps), &s)
                - soft_prediction(&gibbs_weights(&s, &xm, t, eps), &s))
                / (2.0 * step);
            fd_h[i] = (attribution_entropy(&s, &xp, t, eps).0
                - attribution_entropy(&s, &xm, t, eps).0)
                / (2.0 * step);
        }
        let rel = |a: &[f64], b: &[f64]| {
            let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            num / b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3)
        };
        let rel_pg = rel(&fd_f, &grad_f);
        let rel_eg = rel(&fd_h, &grad_h);
        worst_pg = worst_pg.max(rel_pg);
        worst_eg = worst_eg.max(rel_eg);
        rows.push(vec![
            instance.to_string(),
            fmt(eps),
            fmt(rel_ls),
            fmt(rel_pg),
            fmt(rel_eg),
        ]);
    }
    report
        .write_csv(
            "attribution_fd.csv",
            "instance,eps,rel_err_label_sensitivity,rel_err_prediction_grad,rel_err_entropy_grad",
            &rows,
        )
        .map_err(|e| e.to_string())?;
    report.check(
        "label_sensitivity_fd",
        worst_ls <= 1e-5,
        format!("worst relative mismatch {worst_ls:.3e}"),
    );
    report.check(
        "prediction_gradient_fd",
        worst_pg <= 1e-5,
        format!("worst relative mismatch {worst_pg:.3e}"),
    );
    report.check(
        "entropy_gradient_fd",
        worst_eg <= 1e-5,
        format!("worst relative mismatch {worst_eg:.3e}"),
    );

    // tangent-kernel positive definiteness for N >= n distinct points
    let mut rng = rng_for(seed, 41);
    let mut rows = Vec::new();
    let mut pd = 0usize;
    for trial in 0..gram_trials {
        let s = random_support(&mut rng, 8, 1, 2.0);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random::<f64>() * 4.0 - 2.0]).collect();
        let (_, min_eig) = ntk_gram(&s, &xs, 0.5, 0.5).map_err(|e| e.to_string())?;
        if min_eig > 0.0 {
            pd += 1;
        }
        rows.push(vec![trial.to_string(), fmt(min_eig)]);
    }
    report
        .write_csv("ntk_min_eigenvalues.csv", "trial,min_eigenvalue", &rows)
        .map_err(|e| e.to_string())?;
    report.check(
        "ntk_positive_definite",
        pd == gram_trials,
        format!("{pd}/{gram_trials} Gram matrices positive definite"),
    );

    report.finish().map_err(|e| e.to_string())
}
