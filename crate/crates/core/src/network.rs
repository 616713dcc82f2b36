//! The log-sum-exp layer and its algebraic operations.

use crate::error::{CoreError, Result};
use crate::metric::Metric;
use crate::stable;
use crate::support::SupportSet;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// A width-`n` log-sum-exp layer `x -> eps * log sum_j exp((W_j.x + b_j)/eps)`.
///
/// When built from a [`SupportSet`] via [`HjNetwork::from_support`], the rows
/// satisfy `W_j = A^{-1} y_j / (2t)` and `b_j = -g_j - y_j^T A^{-1} y_j / (4t)`
/// (identity metric when none is given), which makes the forward pass the
/// quadratic shift minus the heat-kernel solution evaluated at `x`.
///
/// Immutable after construction; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct HjNetwork {
    dim: usize,
    weights: Vec<f64>, // n x dim, row-major
    biases: Vec<f64>,
    t: f64,
    eps: f64,
    metric: Option<Metric>,
    provenance: Option<Arc<SupportSet>>,
}

/// Outcome of [`HjNetwork::extend`]: the updated output and the softplus
/// shift contributed by the inserted neuron.
#[derive(Debug, Clone, Copy)]
pub struct MeasureExtension {
    pub new_f: f64,
    pub shift: f64,
}

/// Gap between the dominant linear piece and the full output at a point,
/// with the bound it provably stays under.
#[derive(Debug, Clone, Copy)]
pub struct ExtrapolationBound {
    /// Cost gap between the best and second-best atom at `x`.
    pub gap_delta: f64,
    /// `eps * ln(1 + (n-1) exp(-gap/eps))`.
    pub bound: f64,
    /// `|f(x) - (W_{j*}.x + b_{j*})|`.
    pub actual_deviation: f64,
    /// Index of the dominant atom.
    pub dominant: usize,
    /// Set when the two lowest costs tie to 1e-12; the bound is still valid.
    pub degenerate: bool,
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(CoreError::NonPositive { name, value });
    }
    Ok(())
}

impl HjNetwork {
    /// Canonical construction from a support set.
    pub fn from_support(
        support: &SupportSet,
        t: f64,
        eps: f64,
        metric: Option<Metric>,
    ) -> Result<Self> {
        check_positive("t", t)?;
        check_positive("eps", eps)?;
        let d = support.dim();
        if let Some(m) = &metric {
            if m.dim() != d {
                return Err(CoreError::DimensionMismatch {
                    expected: d,
                    got: m.dim(),
                });
            }
        }
        let n = support.len();
        let mut weights = Vec::with_capacity(n * d);
        let mut biases = Vec::with_capacity(n);
        for j in 0..n {
            let y = support.atom(j);
            let a_inv_y = match &metric {
                Some(m) => m.inv_mul(y),
                None => y.to_vec(),
            };
            for v in &a_inv_y {
                weights.push(v / (2.0 * t));
            }
            biases.push(-support.value(j) - stable::dot(y, &a_inv_y) / (4.0 * t));
        }
        Ok(Self {
            dim: d,
            weights,
            biases,
            t,
            eps,
            metric,
            provenance: Some(Arc::new(support.clone())),
        })
    }

    /// Assemble a layer from raw rows; no support interpretation attached.
    pub fn from_parts(
        dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        t: f64,
        eps: f64,
    ) -> Result<Self> {
        check_positive("t", t)?;
        check_positive("eps", eps)?;
        if dim == 0 || weights.len() != biases.len() * dim || biases.is_empty() {
            return Err(CoreError::DimensionMismatch {
                expected: biases.len() * dim,
                got: weights.len(),
            });
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("network parameters"));
        }
        Ok(Self {
            dim,
            weights,
            biases,
            t,
            eps,
            metric: None,
            provenance: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.biases.is_empty()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn metric(&self) -> Option<&Metric> {
        self.metric.as_ref()
    }

    pub fn support(&self) -> Option<&SupportSet> {
        self.provenance.as_deref()
    }

    pub fn weight_row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.dim..(j + 1) * self.dim]
    }

    pub fn weights_flat(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Largest row norm `max_j |W_j|_2`.
    pub fn weight_row_norm_max(&self) -> f64 {
        (0..self.len())
            .map(|j| stable::dot(self.weight_row(j), self.weight_row(j)).sqrt())
            .fold(0.0, f64::max)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations `W x + b`.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok((0..self.len())
            .map(|j| stable::dot(self.weight_row(j), x) + self.biases[j])
            .collect())
    }

    /// Forward pass `eps * log sum_j exp(z_j/eps)`, max-shifted.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(stable::lse(self.eps, &self.logits(x)?))
    }

    /// Softmax weights over the logits at `x`.
    pub fn gibbs(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(stable::softmax(self.eps, &self.logits(x)?))
    }

    /// Output gradient `sum_j pi_j W_j` (a convex combination of the rows).
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pi = self.gibbs(x)?;
        let mut g = vec![0.0; self.dim];
        for (j, &p) in pi.iter().enumerate() {
            for (gi, wi) in g.iter_mut().zip(self.weight_row(j)) {
                *gi += p * wi;
            }
        }
        Ok(g)
    }

    /// Distance of the output from the max logit, with its ceiling
    /// `eps * ln n`. The gap is clamped at zero: float cancellation in the
    /// max-shifted sum can land a hair below the max for one dominant term.
    pub fn tropical_gap(&self, x: &[f64]) -> Result<(f64, f64)> {
        let z = self.logits(x)?;
        let gap = (stable::lse(self.eps, &z) - stable::max_of(&z)).max(0.0);
        Ok((gap, self.eps * (self.len() as f64).ln()))
    }

    /// One-step measure extension: insert a neuron `(w0, b0)` given the
    /// cached output `cached_f = forward(x)`. The update is O(1):
    /// `shift = softplus_eps(z0 - cached_f)`, `new_f = cached_f + shift`.
    pub fn extend(
        &self,
        new_weight: &[f64],
        new_bias: f64,
        x: &[f64],
        cached_f: f64,
    ) -> Result<MeasureExtension> {
        self.check_point(x)?;
        if new_weight.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: new_weight.len(),
            });
        }
        let z0 = stable::dot(new_weight, x) + new_bias;
        let shift = stable::softplus(self.eps, z0 - cached_f);
        Ok(MeasureExtension {
            new_f: cached_f + shift,
            shift,
        })
    }

    /// Precompose with the affine map `x -> A x + c`: the returned network
    /// has weights `W A` and biases `W c + b`, so
    /// `reparam.forward(x) == self.forward(A x + c)` for every `x`.
    pub fn affine_reparam(&self, a: &DMatrix<f64>, c: &[f64]) -> Result<Self> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: a.nrows().max(a.ncols()),
            });
        }
        if c.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: c.len(),
            });
        }
        let n = self.len();
        let d = self.dim;
        let mut weights = vec![0.0; n * d];
        let mut biases = self.biases.clone();
        for j in 0..n {
            let row = self.weight_row(j);
            for k in 0..d {
                let mut acc = 0.0;
                for (i, ri) in row.iter().enumerate() {
                    acc += ri * a[(i, k)];
                }
                weights[j * d + k] = acc;
            }
            biases[j] += stable::dot(row, c);
        }
        Ok(Self {
            dim: d,
            weights,
            biases,
            t: self.t,
            eps: self.eps,
            metric: None,
            provenance: None,
        })
    }

    /// Deviation of the output from the dominant atom's linear piece, against
    /// the `eps * ln(1 + (n-1) e^{-gap/eps})` ceiling. Requires at least two
    /// atoms and support provenance. A tied minimizer (gap within 1e-12) is
    /// reported as degenerate rather than rejected; the bound still holds.
    pub fn hallucination_bound(&self, x: &[f64]) -> Result<ExtrapolationBound> {
        let support = self.support().ok_or(CoreError::MissingProvenance)?;
        let n = self.len();
        if n < 2 {
            return Err(CoreError::EmptyInput(
                "extrapolation bound needs at least two atoms",
            ));
        }
        self.check_point(x)?;
        let costs: Vec<f64> = (0..n)
            .map(|j| {
                support.value(j) + crate::hopf::transport_cost(x, support.atom(j), self.t, self.metric())
            })
            .collect();
        let mut best = 0usize;
        for (j, &c) in costs.iter().enumerate() {
            if c < costs[best] {
                best = j;
            }
        }
        let mut runner_up = f64::INFINITY;
        for (j, &c) in costs.iter().enumerate() {
            if j != best {
                runner_up = runner_up.min(c);
            }
        }
        let gap_delta = (runner_up - costs[best]).max(0.0);
        let degenerate = gap_delta <= 1e-12;
        let bound = self.eps * ((n as f64 - 1.0) * (-gap_delta / self.eps).exp()).ln_1p();
        let f = self.forward(x)?;
        let lin = stable::dot(self.weight_row(best), x) + self.biases[best];
        Ok(ExtrapolationBound {
            gap_delta,
            bound,
            actual_deviation: (f - lin).abs(),
            dominant: best,
            degenerate,
        })
    }

    /// Serialize to the JSON wire form
    /// `{d, N, t, eps, metric?, W (row-major), b}`.
    pub fn to_json(&self) -> Result<String> {
        let dto = NetworkDto {
            d: self.dim,
            n: self.len(),
            t: self.t,
            eps: self.eps,
            metric: self
                .metric
                .as_ref()
                .map(|m| m.matrix().row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect()),
            w: self.weights.clone(),
            b: self.biases.clone(),
        };
        Ok(serde_json::to_string_pretty(&dto)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: NetworkDto = serde_json::from_str(text)?;
        if dto.w.len() != dto.n * dto.d || dto.b.len() != dto.n {
            return Err(CoreError::DimensionMismatch {
                expected: dto.n * dto.d,
                got: dto.w.len(),
            });
        }
        let metric = match dto.metric {
            Some(flat) => {
                if flat.len() != dto.d * dto.d {
                    return Err(CoreError::DimensionMismatch {
                        expected: dto.d * dto.d,
                        got: flat.len(),
                    });
                }
                Some(Metric::new(DMatrix::from_row_slice(dto.d, dto.d, &flat))?)
            }
            None => None,
        };
        let mut net = Self::from_parts(dto.d, dto.w, dto.b, dto.t, dto.eps)?;
        net.metric = metric;
        Ok(net)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDto {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    t: f64,
    eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<Vec<f64>>,
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: Vec<f64>,
}
