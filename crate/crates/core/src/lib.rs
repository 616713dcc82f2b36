//! Log-sum-exp layers as closed-form solutions of viscous Hamilton-Jacobi
//! equations.
//!
//! A layer `f(x) = eps * log sum_j exp((W_j . x + b_j)/eps)` built from a set
//! of support atoms `(y_j, g_j)` via `W_j = y_j/(2t)`, `b_j = -g_j - |y_j|^2/(4t)`
//! satisfies the algebraic identity
//!
//! ```text
//! f(x) + u(x, t) = |x|^2 / (4 t)
//! ```
//!
//! where `u` is the heat-kernel (Hopf-Cole) solution of
//! `u_t + |grad u|^2 = eps * laplace u` under the discrete initial measure
//! carried by the atoms. Everything in this crate hangs off that identity:
//!
//! - [`network`] / [`hopf`]: the layer, the PDE solution, the identity
//!   residual, the inviscid (max-plus) limit, one-step measure extension,
//!   and extrapolation bounds.
//! - [`legendre`]: discrete Legendre-Fenchel transforms and the kernel
//!   network for non-quadratic Hamiltonians.
//! - [`attribution`]: Gibbs attribution weights, label sensitivity, entropy
//!   landscapes and their critical points ([`landscape`]), tangent-kernel
//!   Gram matrices.
//! - [`robustness`]: closed-form input Hessians, curvature bounds, certified
//!   radii, near-shock probes.
//! - [`quadrature`]: grid supports, a dense continuum oracle, convergence and
//!   viscosity-bias curves, power-law fits, Feynman-Kac Monte Carlo.
//! - [`attention`]: softmax attention and its gradient-of-LSE identity, L2
//!   attention as an exact Hopf-Cole evaluation, sink bounds, block checks.
//! - [`characteristics`]: residual-network forward Euler, the backward
//!   co-state recurrence, Hamiltonian traces, feedforward adjoints.
//! - [`integrable`]: the partition function as a free-soliton tau-function
//!   with two independent Hirota residual evaluators.
//!
//! All operations are pure functions of immutable inputs and safe to share
//! across threads; the heavier sweeps parallelize internally with rayon and
//! reduce deterministically.
//!
//! ```
//! use hopfcole_core::{HjNetwork, SupportSet};
//! use hopfcole_core::hopf::{hopf_cole_solution, hopf_lax, quad_term};
//!
//! let support = SupportSet::new_1d(&[-1.0, 0.3, 1.2], &[0.4, 0.0, 0.7])?;
//! let (t, eps) = (0.5, 0.1);
//! let net = HjNetwork::from_support(&support, t, eps, None)?;
//!
//! let x = [0.25];
//! let f = net.forward(&x)?;                               // layer output
//! let u = hopf_cole_solution(&support, &x, t, eps, None); // viscous value
//! assert!((f + u - quad_term(&x, t, None)).abs() < 1e-12);
//!
//! let (u0, nearest) = hopf_lax(&support, &x, t);          // eps -> 0 limit
//! assert_eq!(nearest, 1);
//! assert!(u <= u0 && u >= u0 - eps * (support.len() as f64).ln());
//! # Ok::<(), hopfcole_core::CoreError>(())
//! ```

pub mod attention;
pub mod attribution;
pub mod characteristics;
pub mod error;
pub mod gauge;
pub mod hopf;
pub mod integrable;
pub mod landscape;
pub mod legendre;
pub mod metric;
pub mod network;
pub mod quadrature;
pub mod robustness;
pub mod stable;
pub mod support;

pub use error::{CoreError, Result};
pub use metric::Metric;
pub use network::HjNetwork;
pub use support::SupportSet;
