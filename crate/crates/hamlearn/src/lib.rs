//! Simulator and solver for Hamiltonian learning on few-qubit systems.
//!
//! The library implements a phase-estimation-based learning protocol: a
//! static control field is added to an unknown few-qubit Hamiltonian so that
//! selected energy gaps of the combined generator encode the unknown
//! coefficients. Each gap is estimated by a robust frequency estimator fed by
//! simulated single-qubit interference experiments, and the coefficients are
//! recovered from the gap vector by a fixed-point (or Gauss-Newton) solve.
//!
//! Modules:
//! - [`pauli`]: Pauli-string indexing, dense matrices, eigenstate tables.
//! - [`model`]: Hamiltonians, control configurations, exact spectra and gaps.
//! - [`simkernel`]: exact expectation values, measurement sampling, SPAM noise.
//! - [`rfe`]: robust frequency (phase) estimation from two-quadrature data.
//! - [`recover`]: coefficient recovery from gap vectors.
//! - [`bounds`]: evolution-time lower bounds and their numerical verifiers.
//! - [`protocol`]: end-to-end learning runs, sweeps, and report output.

pub mod bounds;
pub mod model;
pub mod pauli;
pub mod protocol;
pub mod recover;
pub mod rfe;
pub mod rng;
pub mod simkernel;

pub use model::{ControlConfig, CoefficientVector};
pub use pauli::{CMatrix, CVector, PauliString};
pub use protocol::{learn, LearnResult, RunConfig};
