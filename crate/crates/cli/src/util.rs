//! Seeded generators shared by the experiment commands.

use hopfcole_core::{Metric, SupportSet};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    // distinct deterministic streams per experiment stage
    ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream + 1)))
}

pub fn random_support(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> SupportSet {
    loop {
        let atoms: Vec<f64> = (0..n * d)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
            .collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        if let Ok(s) = SupportSet::new(d, atoms, values) {
            return s;
        }
    }
}

/// Random 2x2 SPD matrix: rotated positive diagonal, condition bounded.
pub fn random_spd_2d(rng: &mut ChaCha8Rng) -> Metric {
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    let (c, s) = (theta.cos(), theta.sin());
    let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let l1 = 0.5 + 1.5 * rng.random::<f64>();
    let l2 = 0.5 + 1.5 * rng.random::<f64>();
    let a = &q * DMatrix::from_row_slice(2, 2, &[l1, 0.0, 0.0, l2]) * q.transpose();
    Metric::new((&a + a.transpose()) * 0.5).expect("constructed SPD")
}

/// Two Gaussian-blob clusters of eight atoms each in the plane, labeled by
/// cluster.
pub fn two_cluster_support(rng: &mut ChaCha8Rng) -> SupportSet {
    let mut atoms = Vec::with_capacity(32);
    let mut values = Vec::with_capacity(16);
    for cluster in 0..2 {
        let cx = if cluster == 0 { -1.25 } else { 1.25 };
        for _ in 0..8 {
            atoms.push(cx + (rng.random::<f64>() - 0.5) * 0.7);
            atoms.push((rng.random::<f64>() - 0.5) * 0.7);
            values.push(cluster as f64);
        }
    }
    SupportSet::new(2, atoms, values).expect("distinct cluster atoms")
}
