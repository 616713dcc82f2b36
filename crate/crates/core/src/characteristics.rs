//! Residual-network forward Euler, the reverse co-state recurrence, and the
//! feedforward adjoint.
//!
//! The forward pass iterates `x_{l+1} = x_l + h F(x_l)`; the backward pass
//! applies the exact discrete chain rule
//! `p_{l-1} = p_l + h (J_F(x_{l-1}))^T p_l`, with the Jacobian evaluated at
//! `x_{l-1}` so that `p_0` is the true gradient of any terminal loss through
//! the discrete recurrence, at any finite step size.

use crate::attribution::gibbs_weights;
use crate::error::{CoreError, Result};
use crate::network::HjNetwork;
use nalgebra::{DMatrix, DVector};

/// Built-in autonomous drift fields with analytic Jacobians.
#[derive(Debug, Clone)]
pub enum Drift {
    /// `F(x) = A x`.
    Linear { a: DMatrix<f64> },
    /// `F(x) = W tanh(V x)`.
    TanhLayer { w: DMatrix<f64>, v: DMatrix<f64> },
    /// `F(x) = B (x ⊙ x) + c`.
    Quadratic { b: DMatrix<f64>, c: DVector<f64> },
}

impl Drift {
    pub fn dim(&self) -> usize {
        match self {
            Drift::Linear { a } => a.nrows(),
            Drift::TanhLayer { w, .. } => w.nrows(),
            Drift::Quadratic { b, .. } => b.nrows(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Drift::Linear { .. } => "linear",
            Drift::TanhLayer { .. } => "tanh-layer",
            Drift::Quadratic { .. } => "quadratic",
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Drift::Linear { a } => a * x,
            Drift::TanhLayer { w, v } => {
                let hidden = (v * x).map(f64::tanh);
                w * hidden
            }
            Drift::Quadratic { b, c } => b * x.component_mul(x) + c,
        }
    }

    /// Analytic Jacobian `dF/dx` at `x`.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Drift::Linear { a } => a.clone(),
            Drift::TanhLayer { w, v } => {
                let pre = v * x;
                let mut scaled = v.clone();
                for (r, mut row) in scaled.row_iter_mut().enumerate() {
                    let sech2 = 1.0 - pre[r].tanh().powi(2);
                    for e in row.iter_mut() {
                        *e *= sech2;
                    }
                }
                w * scaled
            }
            Drift::Quadratic { b, .. } => {
                let mut j = b.clone();
                for (col, mut column) in j.column_iter_mut().enumerate() {
                    for e in column.iter_mut() {
                        *e *= 2.0 * x[col];
                    }
                }
                j
            }
        }
    }
}

/// States `x_0..x_L` of one forward Euler run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub step: f64,
    pub drift: Drift,
}

impl Trajectory {
    pub fn layers(&self) -> usize {
        self.states.len() - 1
    }

    pub fn total_time(&self) -> f64 {
        self.step * self.layers() as f64
    }

    pub fn terminal(&self) -> &DVector<f64> {
        self.states.last().unwrap()
    }
}

/// Co-states `p_0..p_L` paired with a trajectory.
#[derive(Debug, Clone)]
pub struct CostateTrajectory {
    pub costates: Vec<DVector<f64>>,
}

impl CostateTrajectory {
    pub fn initial(&self) -> &DVector<f64> {
        &self.costates[0]
    }
}

/// Forward Euler: apply `x <- x + h F(x)` for `layers` steps. Rejects a
/// non-finite state with the offending layer index.
pub fn resnet_forward(drift: &Drift, x0: &DVector<f64>, h: f64, layers: usize) -> Result<Trajectory> {
    if h.is_nan() || h <= 0.0 {
        return Err(CoreError::NonPositive { name: "h", value: h });
    }
    if x0.len() != drift.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: drift.dim(),
            got: x0.len(),
        });
    }
    let mut states = Vec::with_capacity(layers + 1);
    states.push(x0.clone());
    for l in 0..layers {
        let cur = &states[l];
        let next = cur + drift.eval(cur) * h;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::DivergedAtLayer(l + 1));
        }
        states.push(next);
    }
    Ok(Trajectory {
        states,
        step: h,
        drift: drift.clone(),
    })
}

/// Reverse co-state recurrence from a terminal gradient. `p_L` equals the
/// supplied gradient exactly; each step applies the transposed Jacobian at
/// the earlier state.
pub fn costate_backward(traj: &Trajectory, terminal_grad: &DVector<f64>) -> Result<CostateTrajectory> {
    let d = traj.drift.dim();
    if terminal_grad.len() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: terminal_grad.len(),
        });
    }
    let layers = traj.layers();
    let mut costates = vec![DVector::zeros(d); layers + 1];
    costates[layers] = terminal_grad.clone();
    for l in (1..=layers).rev() {
        let jac = traj.drift.jacobian(&traj.states[l - 1]);
        costates[l - 1] = &costates[l] + jac.transpose() * &costates[l] * traj.step;
    }
    Ok(CostateTrajectory { costates })
}

/// Per-layer Hamiltonian values `H_l = p_l . F(x_l)`. For the exact flow
/// this is conserved; the Euler discretization drifts by O(h).
pub fn hamiltonian_trace(traj: &Trajectory, costates: &CostateTrajectory) -> Vec<f64> {
    traj.states
        .iter()
        .zip(&costates.costates)
        .map(|(x, p)| p.dot(&traj.drift.eval(x)))
        .collect()
}

/// Loss gradient with respect to each stored initial value:
/// `dL/dg_j = -pi_j(x) * loss_grad`. Needs the network's support provenance.
pub fn feedforward_adjoint(net: &HjNetwork, x: &[f64], loss_grad: f64) -> Result<Vec<f64>> {
    let support = net.support().ok_or(CoreError::MissingProvenance)?;
    let w = gibbs_weights(support, x, net.t(), net.eps());
    Ok(w.pi.iter().map(|&p| -p * loss_grad).collect())
}

/// Matrix exponential by scaling and squaring with a Taylor core; reference
/// oracle for the linear drift's exact flow.
pub fn matrix_exponential(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64;
    let squarings = norm.log2().ceil().max(0.0) as u32 + 4;
    let scaled = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=16 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
