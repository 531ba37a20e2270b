//! Tensor-train propagation of spin-chain density matrices and GRAPE pulse
//! optimisation on top of it.
//!
//! The crate is organised bottom-up:
//!
//! * [`tt`]: tensor-train vectors and operators, rounding, orthogonalisation
//!   and frame (environment) contractions.
//! * [`spin`]: Heisenberg chain Hamiltonians as MPOs and their Liouville lifts.
//! * [`spectral`]: Chebyshev collocation in time on one control interval.
//! * [`solver`]: AMEn linear solver and the time-interval stepper built on it.
//! * [`grape`]: backward/forward passes and adaptive gradient ascent.
//! * [`oracle`]: dense brute-force references used to validate the above.

pub mod error;
pub mod grape;
pub(crate) mod linalg;
pub mod oracle;
pub mod solver;
pub mod spectral;
pub mod spin;
pub mod tt;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use grape::{
    backward_pass, fidelity, forward_gradient_pass, grape_optimize, infidelity, GradientPass, GrapeOptions,
    GrapeOutcome, GrapeRecord, GrapeSink, GrapeTrace, PulseSequence, Termination,
    grape_optimize_with_sink,
};
pub use solver::{amen_solve, propagate, tamen_step, SolveReport, SolverOptions, StepOutput};
pub use spectral::{assemble_time_system, SpectralGrid};
pub use spin::{ControlAxis, ControlSpec, ProductStateSpec, Spin, SpinChainSpec, SpinModel};
pub use tt::{Gauge, TruncationPolicy, TtOperator, TtVector};
