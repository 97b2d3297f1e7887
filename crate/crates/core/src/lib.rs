//! Causal determinant toolkit for two qubits.
//!
//! Measuring Pauli observables `σ_j` on qubit A and `σ_k` on qubit B gives a
//! 3×3 correlation matrix `C`; its determinant `Δ = det C` separates a
//! direct cause (B is A sent through a unitary, `Δ ≡ 1`) from a common
//! cause (A and B share a state, `Δ ∈ [−1, 1/27]`), and bounds mixtures of
//! the two.

pub mod bounds;
pub mod channels;
pub mod cli;
pub mod error;
pub mod infer;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod sampler;
pub mod scenario;
pub mod schema;
pub mod states;
pub mod tol;

pub use error::{Error, Result};
