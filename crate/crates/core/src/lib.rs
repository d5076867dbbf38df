//! Silent-error detection for time-stepping solvers.
//!
//! Every step runs a base scheme and a cheap auxiliary scheme on the same
//! data. The per-step difference `D_k = ‖B_k − A_k‖` is fed to a detector
//! that flags sudden jumps in the sequence. The [`harness`] module injects
//! faults and measures how often they are caught.

pub mod detector;
pub mod error;
pub mod faults;
pub mod harness;
pub mod heat;
pub mod linalg;
pub mod ns;
pub mod ode;
pub mod scheme;
pub mod state;

pub use error::{Error, Result};
pub use scheme::{FaultHook, NoFault, PairScheme};
pub use state::{difference_norm, DifferenceWindow, Norm, State, StepOutput, TimeGrid};
