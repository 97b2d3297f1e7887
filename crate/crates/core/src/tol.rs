//! Numerical tolerances shared by every module.

/// Smallest eigenvalue accepted for a positive semidefinite density matrix.
pub const POS_TOL: f64 = 1e-9;

/// Unitarity check `U·U† = I`, entrywise.
pub const UNITARY_TOL: f64 = 1e-10;

/// Entrywise agreement for Bloch compose/decompose round trips.
pub const RECON_TOL: f64 = 1e-12;

/// Hermiticity of inputs to the eigenvalue routines.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Trace of a density matrix must be one within this.
pub const TRACE_TOL: f64 = 1e-10;

/// Imaginary residue allowed on traces that are real analytically.
pub const IMAG_TOL: f64 = 1e-10;

/// Off-diagonal Frobenius norm at which Jacobi iteration stops.
pub const JACOBI_TOL: f64 = 1e-14;

/// Sweep limit for Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Channel weights summing to within this of one are renormalized silently
/// (with a log warning); anything further off is rejected.
pub const WEIGHT_RENORM_TOL: f64 = 1e-6;

/// Weights are considered normalized within this.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
