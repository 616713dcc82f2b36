pub mod attribution;
pub mod bifurcation;
pub mod characteristics;
pub mod integrable;
pub mod quadrature;
pub mod robustness;
pub mod scaling;
pub mod verify;
