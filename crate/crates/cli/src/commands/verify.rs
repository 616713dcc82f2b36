//! `hopfcole verify`: the layer identity across viscosities (isotropic and
//! anisotropic), the two-path attention identity, and the transformer block
//! check. Emits the three verification tables.

use crate::config::FileConfig;
use crate::report::{fmt, Report};
use crate::util::{random_spd_2d, random_support, rng_for};
use clap::Args;
use hopfcole_core::attention::{
    lse_grad_attention, softmax_attention, transformer_block_check, AttentionBatch, LseFfnLayer,
    Mat,
};
use hopfcole_core::hopf::identity_residual;
use hopfcole_core::{HjNetwork, SupportSet};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Comma-separated viscosities for the identity sweep.
    #[arg(long)]
    pub eps: Option<String>,
    /// Evaluation points per viscosity.
    #[arg(long)]
    pub points: Option<usize>,
    /// Atom count for the generated one-dimensional support.
    #[arg(long)]
    pub n: Option<usize>,
    /// Attention trials per head dimension.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Load the one-dimensional support from a CSV file instead of
    /// generating it.
    #[arg(long)]
    pub support: Option<std::path::PathBuf>,
}

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::new(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
            .collect(),
    )
    .unwrap()
}

fn random_ffn(rng: &mut ChaCha8Rng, units: usize, neurons: usize, input: usize, eps: f64) -> LseFfnLayer {
    LseFfnLayer {
        weights: (0..units).map(|_| random_mat(rng, neurons, input, 0.5)).collect(),
        biases: (0..units)
            .map(|_| (0..neurons).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect(),
        eps,
        t: 0.5,
    }
}

pub fn run(seed: u64, out: &Path, file: &FileConfig, args: &VerifyArgs) -> Result<bool, String> {
    let eps_list = file.resolve_list("eps", args.eps.as_deref(), &[1.0, 0.5, 0.2, 0.1, 0.05])?;
    let points = file.resolve("points", args.points, 500usize)?;
    let n_atoms = file.resolve("n", args.n, 4usize)?;
    let trials = file.resolve("trials", args.trials, 500usize)?;
    let t = 0.5;

    let mut report = Report::new("verify", out).map_err(|e| e.to_string())?;
    report.config("seed", seed);
    report.config("eps", eps_list.clone());
    report.config("points", points);
    report.config("n", n_atoms);
    report.config("trials", trials);
    report.config("t", t);

    // one-dimensional identity sweep
    let mut rng = rng_for(seed, 0);
    let support = match &args.support {
        Some(path) => {
            let s = SupportSet::read_csv(path).map_err(|e| e.to_string())?;
            if s.dim() != 1 {
                return Err("verify --support expects a one-dimensional support".into());
            }
            s
        }
        None => random_support(&mut rng, n_atoms, 1, 2.0),
    };
    report.config("support_atoms", support.len());
    let mut rows = Vec::new();
    let mut worst_identity: f64 = 0.0;
    for &eps in &eps_list {
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let x = [rng.random::<f64>() * 6.0 - 3.0];
            worst = worst.max(identity_residual(&support, &x, t, eps, None).map_err(|e| e.to_string())?);
        }
        worst_identity = worst_identity.max(worst);
        rows.push(vec![fmt(eps), fmt(worst)]);
    }
    report
        .write_csv("verify_identity.csv", "eps,max_residual", &rows)
        .map_err(|e| e.to_string())?;
    report.check(
        "identity_residual_1d",
        worst_identity <= 1e-12,
        format!("max |f + u - quad| = {worst_identity:.3e} over {points} points x {} viscosities", eps_list.len()),
    );

    // wire-format exports of the generated objects
    report
        .write_text("support_1d.csv", &support.to_csv())
        .map_err(|e| e.to_string())?;
    let net = HjNetwork::from_support(&support, t, eps_list[0], None).map_err(|e| e.to_string())?;
    report
        .write_text("network_1d.json", &net.to_json().map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;

    // anisotropic two-dimensional sweep with a random SPD metric
    let mut rng = rng_for(seed, 1);
    let support2 = random_support(&mut rng, n_atoms, 2, 2.0);
    let metric = random_spd_2d(&mut rng);
    let mut rows = Vec::new();
    let mut worst_aniso: f64 = 0.0;
    for &eps in &eps_list {
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let x = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            worst = worst.max(
                identity_residual(&support2, &x, t, eps, Some(&metric)).map_err(|e| e.to_string())?,
            );
        }
        worst_aniso = worst_aniso.max(worst);
        rows.push(vec![fmt(eps), fmt(worst)]);
    }
    report
        .write_csv("verify_identity_anisotropic.csv", "eps,max_residual", &rows)
        .map_err(|e| e.to_string())?;
    report.check(
        "identity_residual_anisotropic",
        worst_aniso <= 1e-12,
        format!("max residual {worst_aniso:.3e} with a random SPD metric"),
    );

    // attention identity per head dimension
    let mut rng = rng_for(seed, 2);
    let mut rows = Vec::new();
    let mut worst_attn: f64 = 0.0;
    for &d in &[4usize, 8, 16, 32, 64] {
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let q = random_mat(&mut rng, 8, d, 1.0);
            let k = random_mat(&mut rng, 12, d, 1.0);
            let v = random_mat(&mut rng, 12, 16, 1.0);
            let batch = AttentionBatch::new(q, k, v, None).map_err(|e| e.to_string())?;
            worst = worst.max(softmax_attention(&batch).max_abs_diff(&lse_grad_attention(&batch)));
        }
        worst_attn = worst_attn.max(worst);
        rows.push(vec![
            d.to_string(),
            fmt((d as f64).sqrt()),
            trials.to_string(),
            fmt(worst),
        ]);
    }
    report
        .write_csv("verify_attention.csv", "d,eps,trials,max_abs_error", &rows)
        .map_err(|e| e.to_string())?;
    report.check(
        "attention_identity",
        worst_attn <= 1e-15,
        format!("max softmax-vs-gradient deviation {worst_attn:.3e}"),
    );

    // transformer block: attention after layer norm, feedforward residuals
    let mut rng = rng_for(seed, 3);
    let mut attn_rows = Vec::new();
    let mut ffn_rows = Vec::new();
    let mut worst_block_attn: f64 = 0.0;
    let mut worst_ffn: f64 = 0.0;
    let block_trials = (trials / 10).max(5);
    for &eps in &eps_list {
        let mut worst_a: f64 = 0.0;
        let mut worst_f: f64 = 0.0;
        for _ in 0..block_trials {
            let tokens = random_mat(&mut rng, 6, 8, 1.0);
            let wq = random_mat(&mut rng, 8, 8, 0.5);
            let wk = random_mat(&mut rng, 8, 8, 0.5);
            let wv = random_mat(&mut rng, 8, 8, 0.5);
            let ffn1 = random_ffn(&mut rng, 4, 32, 8, eps);
            let ffn2 = random_ffn(&mut rng, 8, 32, 4, eps);
            let rep = transformer_block_check(&tokens, &wq, &wk, &wv, &ffn1, &ffn2)
                .map_err(|e| e.to_string())?;
            worst_a = worst_a.max(rep.attention_identity_error);
            worst_f = worst_f.max(rep.ffn_identity_residual);
        }
        worst_block_attn = worst_block_attn.max(worst_a);
        worst_ffn = worst_ffn.max(worst_f);
        attn_rows.push(vec![fmt(eps), block_trials.to_string(), fmt(worst_a)]);
        ffn_rows.push(vec![fmt(eps), "32".into(), block_trials.to_string(), fmt(worst_f)]);
    }
    report
        .write_csv(
            "verify_transformer_attention.csv",
            "eps,trials,max_abs_error",
            &attn_rows,
        )
        .map_err(|e| e.to_string())?;
    report
        .write_csv(
            "verify_transformer_ffn.csv",
            "eps,N,trials,max_identity_residual",
            &ffn_rows,
        )
        .map_err(|e| e.to_string())?;
    report.check(
        "transformer_block",
        worst_block_attn <= 1e-15 && worst_ffn <= 1e-12,
        format!("attention-after-norm {worst_block_attn:.3e}, feedforward residual {worst_ffn:.3e}"),
    );

    report.finish().map_err(|e| e.to_string())
}
