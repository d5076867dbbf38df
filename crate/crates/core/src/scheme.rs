//! The contract every base/auxiliary solver implements.
//!
//! A scheme owns its base trajectory and history. Each call to
//! [`PairScheme::advance`] takes one step and, once the scheme has enough
//! history, returns the base and auxiliary outputs for that step. Fault
//! injection reaches into the step through a [`FaultHook`], so the same code
//! path runs with and without corruption.

use crate::error::Result;
use crate::state::{State, StepOutput};

/// Interception points for corrupting a step. Every method defaults to a
/// no-op; `step` is the index of the state being produced.
pub trait FaultHook {
    /// A fresh evaluation of the derivative (ODE) or source term (PDE).
    /// `stage` is the Runge-Kutta stage, 0 for schemes with one evaluation.
    fn derivative(&mut self, _step: usize, _stage: usize, _values: &mut [f64]) {}

    /// Right-hand side of the base scheme's linear solve, before solving.
    fn linear_rhs(&mut self, _step: usize, _rhs: &mut [f64]) {}

    /// Stored data the step is about to consume. Slot 0 is always the
    /// previous base solution; further slots are scheme specific (stored
    /// derivative evaluations for Adams-Bashforth).
    fn stored(&mut self, _step: usize, _slots: &mut [&mut [f64]]) {}
}

/// Hook that leaves everything untouched.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoFault;

impl FaultHook for NoFault {}

/// Sizes of the corruptible quantities of a scheme, used to draw fault
/// targets before a trial starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultTargets {
    /// Number of derivative/source evaluations per step and their length.
    /// Zero stages means the mode is not supported.
    pub stages: usize,
    pub derivative_len: usize,
    /// Length of the base linear-solve right-hand side (0: no linear solve).
    pub rhs_len: usize,
    /// Lengths of the stored slots exposed to [`FaultHook::stored`].
    pub stored_slots: Vec<usize>,
}

pub trait PairScheme: Send + Sync {
    /// Short identifier, e.g. `"rk45"`.
    fn name(&self) -> &str;

    /// Total number of steps in the trial.
    fn n_steps(&self) -> usize;

    /// Index of the last state produced (0 before the first step).
    fn step_index(&self) -> usize;

    /// Current base solution `B_{step_index}`.
    fn current(&self) -> &State;

    /// First step that yields an auxiliary output.
    fn first_checked_step(&self) -> usize;

    fn fault_targets(&self) -> FaultTargets;

    /// Takes one step. Returns `None` for startup steps that have no
    /// auxiliary yet (multistep bootstrap, leapfrog start, extrapolation start).
    fn advance(&mut self, hook: &mut dyn FaultHook) -> Result<Option<StepOutput>>;

    /// Advances the base trajectory only, skipping the auxiliary. Used to
    /// check that the auxiliary never feeds back into the base.
    fn advance_base_only(&mut self, hook: &mut dyn FaultHook) -> Result<()>;

    fn clone_box(&self) -> Box<dyn PairScheme>;

    fn is_finished(&self) -> bool {
        self.step_index() >= self.n_steps()
    }
}

impl Clone for Box<dyn PairScheme> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Runs a scheme to the end without faults, collecting every step output.
pub fn run_clean(scheme: &mut dyn PairScheme) -> Result<Vec<StepOutput>> {
    let mut out = Vec::new();
    while !scheme.is_finished() {
        if let Some(o) = scheme.advance(&mut NoFault)? {
            out.push(o);
        }
    }
    Ok(out)
}

/// Base trajectory `B_0..B_N` with the auxiliary computed or skipped.
pub fn base_trajectory(scheme: &mut dyn PairScheme, with_auxiliary: bool) -> Result<Vec<State>> {
    let mut traj = vec![scheme.current().clone()];
    while !scheme.is_finished() {
        if with_auxiliary {
            scheme.advance(&mut NoFault)?;
        } else {
            scheme.advance_base_only(&mut NoFault)?;
        }
        traj.push(scheme.current().clone());
    }
    Ok(traj)
}
