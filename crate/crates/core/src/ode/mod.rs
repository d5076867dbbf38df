//! Base/auxiliary pairs for first-order systems `u' = f(t, u)`.

mod lmm;
mod rk;
mod tableau;

use std::fmt;
use std::sync::Arc;

pub use lmm::{
    ab_pair_step, adams_bashforth_weights, adams_moulton_weights, bootstrap_history, AbPair, AmAbPair,
    LmmHistory, NewtonConfig,
};
pub use rk::{rk4_step, rk_pair_step, ExtrapolationPair, RkPair};
pub use tableau::RkTableau;

use crate::error::{Error, Result};
use crate::state::{State, TimeGrid};

/// Right-hand side `f(t, u, out)`, writing the derivative into `out`.
pub type Rhs = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct OdeProblem {
    f: Rhs,
    u0: Vec<f64>,
    grid: TimeGrid,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("dim", &self.u0.len())
            .field("grid", &self.grid)
            .finish()
    }
}

impl OdeProblem {
    pub fn new(
        f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        u0: Vec<f64>,
        grid: TimeGrid,
    ) -> Result<Self> {
        if u0.is_empty() {
            return Err(Error::Config("initial state is empty".into()));
        }
        Ok(Self {
            f: Arc::new(f),
            u0,
            grid,
        })
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.grid.dt
    }

    pub fn eval(&self, t: f64, u: &[f64], out: &mut [f64]) {
        (self.f)(t, u, out)
    }

    pub fn eval_new(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        (self.f)(t, u, &mut out);
        out
    }

    pub fn with_grid(&self, grid: TimeGrid) -> Self {
        Self {
            f: self.f.clone(),
            u0: self.u0.clone(),
            grid,
        }
    }

    /// Van der Pol oscillator `u'' − b(1 − u²)u' + u = 0` as the first-order
    /// system `(u, u')`.
    pub fn van_der_pol(b: f64, u0: [f64; 2], grid: TimeGrid) -> Self {
        Self::new(
            move |_t, u, du| {
                du[0] = u[1];
                du[1] = b * (1.0 - u[0] * u[0]) * u[1] - u[0];
            },
            u0.to_vec(),
            grid,
        )
        .expect("two-dimensional initial state")
    }
}

/// Order-one extrapolation `2·b_prev − b_prev2`.
pub fn extrapolation_aux(b_prev: &State, b_prev2: &State) -> Result<State> {
    if b_prev.len() != b_prev2.len() {
        return Err(Error::DimensionMismatch {
            expected: b_prev.len(),
            found: b_prev2.len(),
        });
    }
    let mut out = b_prev.clone();
    for (o, p) in out.values_mut().iter_mut().zip(b_prev2.values()) {
        *o = 2.0 * *o - p;
    }
    Ok(out)
}

pub(crate) fn ensure_finite(values: &[f64], step: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}
