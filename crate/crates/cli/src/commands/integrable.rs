//! `hopfcole integrable`: Hirota residuals from both evaluators over random
//! tau-functions, and the one-dimensional solution identity.

use crate::config::FileConfig;
use crate::report::{fmt, Report};
use crate::util::{random_support, rng_for};
use clap::Args;
use hopfcole_core::integrable::{
    default_fd_step, hirota_residual_bilinear, hirota_residual_fd_checked, tau_log_identity,
    TauFunction,
};
use rand::prelude::*;
use std::path::Path;

#[derive(Debug, Args)]
pub struct IntegrableArgs {
    /// Random tau-functions to evaluate.
    #[arg(long)]
    pub trials: Option<usize>,
}

pub fn run(seed: u64, out: &Path, file: &FileConfig, args: &IntegrableArgs) -> Result<bool, String> {
    let trials = file.resolve("trials", args.trials, 500usize)?;

    let mut report = Report::new("integrable", out).map_err(|e| e.to_string())?;
    report.config("seed", seed);
    report.config("trials", trials);

    let mut rows = Vec::new();
    let mut worst_bilinear: f64 = 0.0;
    let mut fd_consistent = true;
    for trial in 0..trials {
        let trial_seed = seed ^ (trial as u64).wrapping_mul(0x100_0001);
        let mut rng = rng_for(trial_seed, 60);
        let n = 1 + rng.random_range(0..8usize);
        let tau = loop {
            let k: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 + 0.1).collect();
            if let Ok(t) = TauFunction::new(k, a) {
                break t;
            }
        };
        let (x1, x2, x3) = (
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let bi = hirota_residual_bilinear(&tau, x1, x2, x3);
        worst_bilinear = worst_bilinear.max(bi.abs());
        let (fd, budget) = hirota_residual_fd_checked(&tau, x1, x2, x3, default_fd_step(&tau))
            .map_err(|e| e.to_string())?;
        if (fd.value - bi).abs() > budget.max(1e-8) {
            fd_consistent = false;
        }
        rows.push(vec![
            n.to_string(),
            trial_seed.to_string(),
            fmt(bi),
            fmt(fd.value),
        ]);
    }
    report
        .write_csv(
            "integrable_residuals.csv",
            "N,seed,bilinear_residual,fd_residual",
            &rows,
        )
        .map_err(|e| e.to_string())?;
    report.check(
        "bilinear_residual",
        worst_bilinear <= 1e-10,
        format!("max normalized residual {worst_bilinear:.3e}"),
    );
    report.check(
        "fd_evaluator_consistent",
        fd_consistent,
        "finite-difference evaluator within its Richardson budget everywhere".to_string(),
    );

    // solution identity on random one-dimensional supports
    let mut rng = rng_for(seed, 61);
    let mut rows = Vec::new();
    let mut worst_tau_log: f64 = 0.0;
    for _ in 0..(trials / 5).max(20) {
        let s = random_support(&mut rng, 4, 1, 2.0);
        for &eps in &[0.1, 1.0] {
            let x = rng.random::<f64>() * 4.0 - 2.0;
            let r = tau_log_identity(&s, x, 0.5, eps).map_err(|e| e.to_string())?;
            worst_tau_log = worst_tau_log.max(r);
            rows.push(vec![fmt(eps), fmt(x), fmt(r)]);
        }
    }
    report
        .write_csv("tau_log_identity.csv", "eps,x,residual", &rows)
        .map_err(|e| e.to_string())?;
    report.check(
        "tau_log_identity",
        worst_tau_log <= 1e-12,
        format!("max residual {worst_tau_log:.3e}"),
    );

    report.finish().map_err(|e| e.to_string())
}
