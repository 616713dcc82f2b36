//! `hopfcole characteristics`: forward-Euler trajectories, the reverse
//! co-state recurrence against finite differences, Euler convergence against
//! the matrix exponential, Hamiltonian conservation, and the feedforward
//! adjoint.

use crate::config::FileConfig;
use crate::report::{fmt, Report};
use crate::util::{random_support, rng_for};
use clap::Args;
use hopfcole_core::characteristics::{
    costate_backward, feedforward_adjoint, hamiltonian_trace, matrix_exponential, resnet_forward,
    Drift,
};
use hopfcole_core::HjNetwork;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

#[derive(Debug, Args)]
pub struct CharacteristicsArgs {
    /// Random instances per drift family.
    #[arg(long)]
    pub instances: Option<usize>,
}

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, s: f64) -> DMatrix<f64> {
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * s),
    )
}

pub fn run(seed: u64, out: &Path, file: &FileConfig, args: &CharacteristicsArgs) -> Result<bool, String> {
    let instances = file.resolve("instances", args.instances, 100usize)?;

    let mut report = Report::new("characteristics", out).map_err(|e| e.to_string())?;
    report.config("seed", seed);
    report.config("instances", instances);

    // co-state against loss finite differences, per drift family
    let mut rng = rng_for(seed, 50);
    let mut rows = Vec::new();
    let mut worst_overall: f64 = 0.0;
    for kind in 0..3usize {
        let mut worst: f64 = 0.0;
        let mut family = "";
        for _ in 0..instances {
            let d = 2 + rng.random_range(0..2usize);
            let drift = match kind {
                0 => Drift::Linear { a: random_mat(&mut rng, d, d, 0.8) },
                1 => Drift::TanhLayer {
                    w: random_mat(&mut rng, d, d + 1, 0.7),
                    v: random_mat(&mut rng, d + 1, d, 0.7),
                },
                _ => Drift::Quadratic {
                    b: random_mat(&mut rng, d, d, 0.3),
                    c: DVector::from_iterator(d, (0..d).map(|_| rng.random::<f64>() * 0.6 - 0.3)),
                },
            };
            family = drift.name();
            let x0 = DVector::from_iterator(d, (0..d).map(|_| rng.random::<f64>() * 1.6 - 0.8));
            let (h, layers) = (0.05, 10);
            let traj = resnet_forward(&drift, &x0, h, layers).map_err(|e| e.to_string())?;
            let cs = costate_backward(&traj, &traj.terminal().clone()).map_err(|e| e.to_string())?;
            let loss = |x: &DVector<f64>| {
                0.5 * resnet_forward(&drift, x, h, layers)
                    .unwrap()
                    .terminal()
                    .norm_squared()
            };
            let mut fd = DVector::zeros(d);
            for i in 0..d {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[i] += 1e-6;
                xm[i] -= 1e-6;
                fd[i] = (loss(&xp) - loss(&xm)) / 2e-6;
            }
            worst = worst.max((cs.initial() - &fd).norm() / fd.norm().max(1e-9));
        }
        worst_overall = worst_overall.max(worst);
        rows.push(vec![family.to_string(), instances.to_string(), fmt(worst)]);
    }
    report
        .write_csv("costate_fd.csv", "family,instances,worst_rel_err", &rows)
        .map_err(|e| e.to_string())?;
    report.check(
        "costate_matches_fd",
        worst_overall <= 1e-6,
        format!("worst relative mismatch {worst_overall:.3e}"),
    );

    // Euler convergence against the matrix exponential
    let mut rng = rng_for(seed, 51);
    let a = random_mat(&mut rng, 3, 3, 0.5);
    let drift = Drift::Linear { a: a.clone() };
    let x0 = DVector::from_iterator(3, (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0));
    let exact = matrix_exponential(&a) * &x0;
    let err_at = |layers: usize| {
        let traj = resnet_forward(&drift, &x0, 1.0 / layers as f64, layers).unwrap();
        (traj.terminal() - &exact).norm()
    };
    let ratio = err_at(64) / err_at(128);
    report.check(
        "euler_first_order",
        (1.6..=2.4).contains(&ratio),
        format!("halving h scales the terminal error by {ratio:.3}"),
    );

    // Hamiltonian conservation: exact for the linear family, O(h) drift
    // for the nonlinear one
    let traj = resnet_forward(&drift, &x0, 1.0 / 32.0, 32).map_err(|e| e.to_string())?;
    let cs = costate_backward(&traj, &traj.terminal().clone()).map_err(|e| e.to_string())?;
    let trace = hamiltonian_trace(&traj, &cs);
    let scale = trace.iter().map(|v| v.abs()).fold(1e-30, f64::max);
    let linear_drift = trace.iter().map(|v| (v - trace[0]).abs()).fold(0.0, f64::max) / scale;
    let mut rng2 = rng_for(seed, 52);
    let nl = Drift::TanhLayer {
        w: random_mat(&mut rng2, 3, 4, 0.7),
        v: random_mat(&mut rng2, 4, 3, 0.7),
    };
    let variation = |layers: usize| {
        let traj = resnet_forward(&nl, &x0, 1.0 / layers as f64, layers).unwrap();
        let cs = costate_backward(&traj, &traj.terminal().clone()).unwrap();
        let h = hamiltonian_trace(&traj, &cs);
        h.iter().map(|v| (v - h[0]).abs()).fold(0.0, f64::max)
    };
    let h_ratio = variation(40) / variation(80);
    report.check(
        "hamiltonian_conservation",
        linear_drift <= 1e-12 && h_ratio >= 1.8,
        format!("linear relative drift {linear_drift:.3e}; nonlinear drift halving ratio {h_ratio:.3}"),
    );

    // demo trajectory export: layer, state, co-state
    let demo = resnet_forward(&drift, &x0, 0.1, 10).map_err(|e| e.to_string())?;
    let demo_cs = costate_backward(&demo, &demo.terminal().clone()).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for (l, (x, p)) in demo.states.iter().zip(&demo_cs.costates).enumerate() {
        let mut row = vec![l.to_string()];
        row.extend(x.iter().map(|&c| fmt(c)));
        row.extend(p.iter().map(|&c| fmt(c)));
        rows.push(row);
    }
    report
        .write_csv("trajectory.csv", "layer,x0,x1,x2,p0,p1,p2", &rows)
        .map_err(|e| e.to_string())?;

    // feedforward adjoint against label-perturbation differences
    let mut rng = rng_for(seed, 53);
    let mut worst_ff: f64 = 0.0;
    for _ in 0..instances {
        let s = random_support(&mut rng, 6, 1, 2.0);
        let (t, eps) = (0.5, 0.3 + rng.random::<f64>() * 0.7);
        let net = HjNetwork::from_support(&s, t, eps, None).map_err(|e| e.to_string())?;
        let x = [rng.random::<f64>() * 2.0 - 1.0];
        let f = net.forward(&x).map_err(|e| e.to_string())?;
        let adj = feedforward_adjoint(&net, &x, f).map_err(|e| e.to_string())?;
        let dg = 1e-5 * eps;
        let mut fd = vec![0.0; s.len()];
        for (j, slot) in fd.iter_mut().enumerate() {
            let fp = HjNetwork::from_support(
                &s.with_value(j, s.value(j) + dg).map_err(|e| e.to_string())?,
                t,
                eps,
                None,
            )
            .map_err(|e| e.to_string())?
            .forward(&x)
            .map_err(|e| e.to_string())?;
            let fm = HjNetwork::from_support(
                &s.with_value(j, s.value(j) - dg).map_err(|e| e.to_string())?,
                t,
                eps,
                None,
            )
            .map_err(|e| e.to_string())?
            .forward(&x)
            .map_err(|e| e.to_string())?;
            *slot = (0.5 * fp * fp - 0.5 * fm * fm) / (2.0 * dg);
        }
        let num: f64 = adj.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_ff = worst_ff.max(num / den.max(1e-9));
    }
    report.check(
        "feedforward_adjoint_fd",
        worst_ff <= 1e-6,
        format!("worst relative mismatch {worst_ff:.3e}"),
    );

    report.finish().map_err(|e| e.to_string())
}
