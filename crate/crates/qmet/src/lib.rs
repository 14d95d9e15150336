// Guards written as `!(x > 0.0)` are deliberate: they must reject NaN along
// with out-of-range values, which the suggested `partial_cmp` form obscures.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulator for quantum-limited passive interferometric imaging.
//!
//! An `n`-antenna array observes thermal radiation from a pixelated
//! temperature scene. The received state is a circularly symmetric Gaussian
//! state whose coherence matrix is linear in the pixel temperatures. The
//! crate computes quantum and classical Cramér-Rao bounds on the temperature
//! estimates, optimizes the detection-mode unitary over `U(n)` to reach the
//! most informative single-photon counting measurement, and reconstructs
//! temperature images from sampled counts by maximum likelihood.
//!
//! Modules:
//! - [`scene`]: array geometry, physics constants, coherence matrix.
//! - [`fisher`]: Gaussian-state covariance, QFI, SLDs, scalar bounds.
//! - [`povm`]: single-photon counting probabilities and classical Fisher
//!   information in arbitrary detection modes.
//! - [`optim`]: Riemannian conjugate gradient descent on the unitary group.
//! - [`inference`]: outcome sampling and maximum-likelihood reconstruction.
//! - [`scenario`], [`export`], [`cli`]: scenario files, artifacts, runners.

pub mod cli;
pub mod error;
pub mod export;
pub mod fisher;
pub mod inference;
pub mod optim;
pub mod povm;
pub mod scenario;
pub mod scene;

pub use error::{Error, Result};
pub use fisher::{qfi_matrix, FisherKind, FisherMatrix};
pub use povm::{outcome_distribution, scalar_ccrb, ScalarCcrbCost, UnitaryPoint};
pub use scenario::ScenarioConfig;
pub use scene::{coherence_matrix, compute_kappa, CoherenceMatrix, Geometry, PhysicsConstants};
