//! Multi-region power-sector capacity expansion with factor separation.
//!
//! The crate is organised along the pipeline it implements:
//!
//! * [`model`]: system description, validation, tables and I/O
//! * [`lp`]: translation of a system into a linear program, MPS I/O
//! * [`solver`]: bounded revised simplex and optimality certificates
//! * [`harmonize`]: factor states and counterfactual systems
//! * [`factorize`]: interaction terms and shared-interactions totals
//! * [`residual`]: residual-load analytics
//! * [`sweep`]: the full factorial experiment with persistence and resume

pub mod error;
pub mod factorize;
pub mod harmonize;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod residual;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
pub use factorize::{FactorDecomposition, MetricTable};
pub use harmonize::{Factor, FactorState, ReferenceShares};
pub use lp::{BuildReport, LinearProgram};
pub use model::{PowerSystemSpec, Violation};
pub use residual::ResidualEvent;
pub use solver::{SolveOptions, SolveResult, SolveStatus};
