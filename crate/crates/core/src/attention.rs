//! Scaled dot-product attention and its exact Gibbs/gradient identities.
//!
//! Two independent softmax-attention paths are kept deliberately separate:
//! [`softmax_attention`] normalizes by dividing through the exponential sum,
//! while [`lse_grad_attention`] exponentiates logits shifted by the full
//! log-partition value. Their agreement is an algebraic identity the test
//! suite checks to 1e-15; sharing the arithmetic would make that check
//! vacuous.

use crate::error::{CoreError, Result};
use crate::hopf::hopf_cole_solution;
use crate::stable;
use crate::support::SupportSet;

/// Row-major matrix view used throughout: `rows x cols` floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Queries, keys, values and the softmax temperature (default `sqrt(d)`).
#[derive(Debug, Clone)]
pub struct AttentionBatch {
    pub q: Mat,
    pub k: Mat,
    pub v: Mat,
    pub eps: f64,
}

impl AttentionBatch {
    pub fn new(q: Mat, k: Mat, v: Mat, eps: Option<f64>) -> Result<Self> {
        if q.cols != k.cols {
            return Err(CoreError::DimensionMismatch {
                expected: q.cols,
                got: k.cols,
            });
        }
        if k.rows != v.rows {
            return Err(CoreError::DimensionMismatch {
                expected: k.rows,
                got: v.rows,
            });
        }
        let eps = eps.unwrap_or((q.cols as f64).sqrt());
        if eps.is_nan() || eps <= 0.0 {
            return Err(CoreError::NonPositive {
                name: "eps",
                value: eps,
            });
        }
        Ok(Self { q, k, v, eps })
    }

    fn logits_row(&self, i: usize) -> Vec<f64> {
        (0..self.k.rows)
            .map(|j| stable::dot(self.q.row(i), self.k.row(j)))
            .collect()
    }
}

/// Reference path: row-wise `softmax(Q K^T / eps) V` with max-shift, the
/// weights normalized by explicit division.
pub fn softmax_attention(batch: &AttentionBatch) -> Mat {
    let mut out = Mat::zeros(batch.q.rows, batch.v.cols);
    for i in 0..batch.q.rows {
        let z = batch.logits_row(i);
        let m = stable::max_of(&z);
        let e: Vec<f64> = z.iter().map(|&v| ((v - m) / batch.eps).exp()).collect();
        let sum: f64 = e.iter().sum();
        let row = out.row_mut(i);
        for (j, &w) in e.iter().enumerate() {
            let pi = w / sum;
            for (o, vv) in row.iter_mut().zip(batch.v.row(j)) {
                *o += pi * vv;
            }
        }
    }
    out
}

/// Gradient path: per query, evaluate the log-partition `LSE_eps(z)` and
/// form the weights as `exp((z_j - LSE)/eps)` — the gradient of the
/// log-partition — then contract with `V`. No explicit normalization
/// division appears.
pub fn lse_grad_attention(batch: &AttentionBatch) -> Mat {
    let mut out = Mat::zeros(batch.q.rows, batch.v.cols);
    for i in 0..batch.q.rows {
        let z = batch.logits_row(i);
        let lse = stable::lse(batch.eps, &z);
        let row = out.row_mut(i);
        for (j, &zj) in z.iter().enumerate() {
            let pi = ((zj - lse) / batch.eps).exp();
            for (o, vv) in row.iter_mut().zip(batch.v.row(j)) {
                *o += pi * vv;
            }
        }
    }
    out
}

/// Distance-kernel attention: logits `z_j = -|q_i - k_j|^2 / (4t)`, Gibbs
/// weights at temperature `eps`. Returns the output rows and per-query
/// log-partitions `log Z_i`, which equal `-u(q_i, t)/eps` for the key atoms
/// under zero initial values.
pub fn l2_attention(q: &Mat, k: &Mat, v: &Mat, t: f64, eps: f64) -> Result<(Mat, Vec<f64>)> {
    if q.cols != k.cols {
        return Err(CoreError::DimensionMismatch {
            expected: q.cols,
            got: k.cols,
        });
    }
    if k.rows != v.rows {
        return Err(CoreError::DimensionMismatch {
            expected: k.rows,
            got: v.rows,
        });
    }
    if t.is_nan() || eps.is_nan() || t <= 0.0 || eps <= 0.0 {
        return Err(CoreError::NonPositive {
            name: "t/eps",
            value: t.min(eps),
        });
    }
    let mut out = Mat::zeros(q.rows, v.cols);
    let mut log_z = Vec::with_capacity(q.rows);
    for i in 0..q.rows {
        let z: Vec<f64> = (0..k.rows)
            .map(|j| -stable::dist_sq(q.row(i), k.row(j)) / (4.0 * t))
            .collect();
        let scaled: Vec<f64> = z.iter().map(|&zz| zz / eps).collect();
        log_z.push(stable::ln_sum_exp(&scaled));
        let pi = stable::softmax(eps, &z);
        let row = out.row_mut(i);
        for (j, &p) in pi.iter().enumerate() {
            for (o, vv) in row.iter_mut().zip(v.row(j)) {
                *o += p * vv;
            }
        }
    }
    Ok((out, log_z))
}

/// Zero-temperature limit: each query takes the value row of its top-scoring
/// key; ties break to the lowest index.
pub fn hard_attention(q: &Mat, k: &Mat, v: &Mat) -> Result<(Mat, Vec<usize>)> {
    if q.cols != k.cols {
        return Err(CoreError::DimensionMismatch {
            expected: q.cols,
            got: k.cols,
        });
    }
    if k.rows != v.rows {
        return Err(CoreError::DimensionMismatch {
            expected: k.rows,
            got: v.rows,
        });
    }
    let mut out = Mat::zeros(q.rows, v.cols);
    let mut argmax = Vec::with_capacity(q.rows);
    for i in 0..q.rows {
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for j in 0..k.rows {
            let s = stable::dot(q.row(i), k.row(j));
            if s > best_score {
                best_score = s;
                best = j;
            }
        }
        out.row_mut(i).copy_from_slice(v.row(best));
        argmax.push(best);
    }
    Ok((out, argmax))
}

/// Dominant-key concentration at one query: the logit gap to the runner-up,
/// the attention mass missing from the top key, and the exponential ceiling
/// `(n_k - 1) exp(-gap/eps)` the deficit stays under.
pub fn sink_bound(q: &Mat, k: &Mat, eps: f64, query: usize) -> Result<(f64, f64, f64)> {
    if k.rows < 2 {
        return Err(CoreError::EmptyInput("sink bound needs at least two keys"));
    }
    if query >= q.rows {
        return Err(CoreError::IndexOutOfRange {
            index: query,
            len: q.rows,
        });
    }
    let z: Vec<f64> = (0..k.rows)
        .map(|j| stable::dot(q.row(query), k.row(j)))
        .collect();
    let mut top = 0usize;
    for (j, &s) in z.iter().enumerate() {
        if s > z[top] {
            top = j;
        }
    }
    let runner_up = z
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != top)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = z[top] - runner_up;
    let pi = stable::softmax(eps, &z);
    let deficit = 1.0 - pi[top];
    let bound = (k.rows as f64 - 1.0) * (-gap / eps).exp();
    Ok((gap, deficit, bound))
}

/// Verify the additive positional-shift decomposition
/// `(q_i + pe_i).(k_j + pe_j)/eps = q_i.k_j/eps + phi(i,j)` with
/// `phi(i,j) = (q_i.pe_j + pe_i.k_j + pe_i.pe_j)/eps`; returns the largest
/// absolute deviation over all pairs.
pub fn positional_shift_check(q: &Mat, k: &Mat, pe: &Mat, eps: f64) -> Result<f64> {
    if pe.cols != q.cols || pe.rows < q.rows.max(k.rows) {
        return Err(CoreError::DimensionMismatch {
            expected: q.rows.max(k.rows),
            got: pe.rows,
        });
    }
    let mut worst = 0.0f64;
    for i in 0..q.rows {
        for j in 0..k.rows {
            let qi = q.row(i);
            let kj = k.row(j);
            let pi = pe.row(i);
            let pj = pe.row(j);
            let shifted_q: Vec<f64> = qi.iter().zip(pi).map(|(a, b)| a + b).collect();
            let shifted_k: Vec<f64> = kj.iter().zip(pj).map(|(a, b)| a + b).collect();
            let lhs = stable::dot(&shifted_q, &shifted_k) / eps;
            let phi =
                (stable::dot(qi, pj) + stable::dot(pi, kj) + stable::dot(pi, pj)) / eps;
            let rhs = stable::dot(qi, kj) / eps + phi;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Per-row mean/variance normalization with identity scale and offset.
/// Degenerate rows are guarded by a variance floor of 1e-5.
pub fn layer_norm(x: &Mat) -> Mat {
    let mut out = x.clone();
    for i in 0..x.rows {
        let row = out.row_mut(i);
        let n = row.len() as f64;
        let mean: f64 = row.iter().sum::<f64>() / n;
        let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let denom = var.max(1e-5).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) / denom;
        }
    }
    out
}

/// One unit bank of a two-layer LSE feedforward: `units` independent
/// log-sum-exp heads over a shared input.
#[derive(Debug, Clone)]
pub struct LseFfnLayer {
    /// Per-unit weights, each `n_neurons x input_dim` row-major.
    pub weights: Vec<Mat>,
    /// Per-unit biases, each length `n_neurons`.
    pub biases: Vec<Vec<f64>>,
    pub eps: f64,
    pub t: f64,
}

impl LseFfnLayer {
    fn unit_logits(&self, unit: usize, x: &[f64]) -> Vec<f64> {
        let w = &self.weights[unit];
        (0..w.rows)
            .map(|j| stable::dot(w.row(j), x) + self.biases[unit][j])
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.weights.len())
            .map(|u| stable::lse(self.eps, &self.unit_logits(u, x)))
            .collect()
    }

    /// Identity residual of one unit at input `x`: any affine-plus-LSE unit
    /// carries an exact heat-kernel reading obtained by inverting the
    /// canonical parameterization `y_j = 2 t W_j`, `g_j = -b_j - |y_j|^2/(4t)`.
    pub fn unit_identity_residual(&self, unit: usize, x: &[f64]) -> Result<f64> {
        let w = &self.weights[unit];
        let d = w.cols;
        let mut atoms = Vec::with_capacity(w.rows * d);
        let mut values = Vec::with_capacity(w.rows);
        for j in 0..w.rows {
            let y: Vec<f64> = w.row(j).iter().map(|&wi| 2.0 * self.t * wi).collect();
            values.push(-self.biases[unit][j] - stable::dot(&y, &y) / (4.0 * self.t));
            atoms.extend_from_slice(&y);
        }
        let support = SupportSet::new(d, atoms, values)?;
        let f = stable::lse(self.eps, &self.unit_logits(unit, x));
        let u = hopf_cole_solution(&support, x, self.t, self.eps, None);
        Ok((f + u - stable::dot(x, x) / (4.0 * self.t)).abs())
    }
}

/// Report from one transformer block check.
#[derive(Debug, Clone)]
pub struct BlockCheckReport {
    /// Largest softmax-vs-gradient attention deviation after LayerNorm.
    pub attention_identity_error: f64,
    /// Largest per-unit identity residual across both feedforward layers.
    pub ffn_identity_residual: f64,
}

/// Pre-norm block: LayerNorm, self-attention with residual, LayerNorm, then
/// a two-layer LSE feedforward with residual. Checks (a) the two attention
/// paths agree on the normalized inputs and (b) every LSE unit in both
/// feedforward layers satisfies its identity at its own input.
pub fn transformer_block_check(
    tokens: &Mat,
    wq: &Mat,
    wk: &Mat,
    wv: &Mat,
    ffn1: &LseFfnLayer,
    ffn2: &LseFfnLayer,
) -> Result<BlockCheckReport> {
    let z1 = layer_norm(tokens);
    let proj = |m: &Mat, w: &Mat| -> Result<Mat> {
        if w.rows != m.cols {
            return Err(CoreError::DimensionMismatch {
                expected: m.cols,
                got: w.rows,
            });
        }
        let mut out = Mat::zeros(m.rows, w.cols);
        for i in 0..m.rows {
            for j in 0..w.cols {
                let mut acc = 0.0;
                for l in 0..m.cols {
                    acc += m.row(i)[l] * w.data[l * w.cols + j];
                }
                out.row_mut(i)[j] = acc;
            }
        }
        Ok(out)
    };
    let q = proj(&z1, wq)?;
    let k = proj(&z1, wk)?;
    let v = proj(&z1, wv)?;
    let batch = AttentionBatch::new(q, k, v.clone(), None)?;
    let a = softmax_attention(&batch);
    let b = lse_grad_attention(&batch);
    let attention_identity_error = a.max_abs_diff(&b);

    // residual add, second norm, feedforward with per-unit identity checks
    let mut z2 = tokens.clone();
    for i in 0..z2.rows {
        for (zv, av) in z2.row_mut(i).iter_mut().zip(a.row(i)) {
            *zv += av;
        }
    }
    let normed = layer_norm(&z2);
    let mut worst_residual = 0.0f64;
    for i in 0..normed.rows {
        let x1 = normed.row(i);
        for u in 0..ffn1.weights.len() {
            worst_residual = worst_residual.max(ffn1.unit_identity_residual(u, x1)?);
        }
        let hidden = ffn1.forward(x1);
        for u in 0..ffn2.weights.len() {
            worst_residual = worst_residual.max(ffn2.unit_identity_residual(u, &hidden)?);
        }
    }
    Ok(BlockCheckReport {
        attention_identity_error,
        ffn_identity_residual: worst_residual,
    })
}
