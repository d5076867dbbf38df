//! Finite-difference pairs for `u_t = k·u_xx + q(x, t)` on `[0, 1]` with
//! homogeneous Dirichlet boundaries.
//!
//! States hold the interior nodes `x_j = j·Δx`, `j = 1..M`. Two pairs are
//! provided: backward Euler checked by forward Euler (`fe-be`), and
//! Crank-Nicolson checked by the leapfrog (Richardson) scheme (`r-cn`).
//! Source evaluations are cached so the explicit auxiliary consumes the
//! value the base evaluated one step earlier.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_tridiagonal, TridiagonalSystem};
use crate::scheme::{FaultHook, FaultTargets, PairScheme};
use crate::state::{State, StepOutput, TimeGrid};

pub type Source = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Initial = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct HeatProblem {
    pub k: f64,
    pub dx: f64,
    pub grid: TimeGrid,
    q: Source,
    v: Initial,
    m: usize,
}

impl fmt::Debug for HeatProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeatProblem")
            .field("k", &self.k)
            .field("dx", &self.dx)
            .field("grid", &self.grid)
            .field("interior", &self.m)
            .finish()
    }
}

impl HeatProblem {
    pub fn new(
        k: f64,
        dx: f64,
        dt: f64,
        t_end: f64,
        q: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Config(format!("diffusivity must be positive, got {k}")));
        }
        if !(dx > 0.0 && dx < 1.0) {
            return Err(Error::Config(format!("Δx must lie in (0, 1), got {dx}")));
        }
        let cells = (1.0 / dx).round();
        if ((1.0 / dx) - cells).abs() > 1e-9 || cells < 2.0 {
            return Err(Error::Config(format!("1/Δx must be an integer ≥ 2, got {}", 1.0 / dx)));
        }
        Ok(Self {
            k,
            dx,
            grid: TimeGrid::spanning(0.0, t_end, dt)?,
            q: Arc::new(q),
            v: Arc::new(v),
            m: cells as usize - 1,
        })
    }

    /// Number of interior nodes.
    pub fn interior(&self) -> usize {
        self.m
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    /// Mesh ratio `r = kΔt/Δx²`.
    pub fn mesh_ratio(&self) -> f64 {
        self.k * self.grid.dt / (self.dx * self.dx)
    }

    /// Forward Euler is stable as a closed-loop scheme only for `r ≤ 1/2`.
    pub fn forward_euler_stable(&self) -> bool {
        self.mesh_ratio() <= 0.5
    }

    pub fn x(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.dx
    }

    pub fn initial(&self) -> State {
        State::vector((0..self.m).map(|j| (self.v)(self.x(j))).collect())
    }

    /// Source term sampled at the interior nodes at time `t`.
    pub fn source(&self, t: f64) -> Vec<f64> {
        (0..self.m).map(|j| (self.q)(self.x(j), t)).collect()
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Ok(Self {
            grid: TimeGrid::spanning(0.0, self.grid.t_end(), dt)?,
            ..self.clone()
        })
    }
}

/// `(Δu)_j = u_{j−1} − 2u_j + u_{j+1}` with zero boundary values.
pub fn laplacian(u: &[f64]) -> Vec<f64> {
    let m = u.len();
    (0..m)
        .map(|j| {
            let left = if j > 0 { u[j - 1] } else { 0.0 };
            let right = if j + 1 < m { u[j + 1] } else { 0.0 };
            left - 2.0 * u[j] + right
        })
        .collect()
}

/// Preset configurations of the heat equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatPreset {
    /// `q = x·e^{−t/2}`, `v = 4x(x−1)(x−2)`, `k = 1/100`, `T = 2`, `Δx = 1/100`.
    Cfg1,
    /// `q = (1 − √(1 − 4(t − t²)))/(2 − 2t)`, `v = 6|x − 1/2| − 3`,
    /// `k = 1/1000`, `T = 1`, `Δx = 1/200`.
    Cfg2,
    /// `q = 0.1(sin 2πt + cos 2πx)`, `v = x(x−1)`, `k = 1/100`, `T = 2`, `Δx = 1/160`.
    Cfg3,
}

impl HeatPreset {
    pub fn id(self) -> &'static str {
        match self {
            HeatPreset::Cfg1 => "heat-cfg1",
            HeatPreset::Cfg2 => "heat-cfg2",
            HeatPreset::Cfg3 => "heat-cfg3",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "heat-cfg1" => Some(HeatPreset::Cfg1),
            "heat-cfg2" => Some(HeatPreset::Cfg2),
            "heat-cfg3" => Some(HeatPreset::Cfg3),
            _ => None,
        }
    }

    /// The three time steps studied for each configuration.
    pub fn time_steps(self) -> [f64; 3] {
        match self {
            HeatPreset::Cfg1 => [1.0 / 60.0, 1.0 / 100.0, 1.0 / 140.0],
            HeatPreset::Cfg2 => [1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0],
            HeatPreset::Cfg3 => [1.0 / 100.0, 1.0 / 160.0, 1.0 / 200.0],
        }
    }

    pub fn diffusivity(self) -> f64 {
        match self {
            HeatPreset::Cfg1 | HeatPreset::Cfg3 => 1.0 / 100.0,
            HeatPreset::Cfg2 => 1.0 / 1000.0,
        }
    }

    pub fn dx(self) -> f64 {
        match self {
            HeatPreset::Cfg1 => 1.0 / 100.0,
            HeatPreset::Cfg2 => 1.0 / 200.0,
            HeatPreset::Cfg3 => 1.0 / 160.0,
        }
    }

    pub fn t_end(self) -> f64 {
        match self {
            HeatPreset::Cfg2 => 1.0,
            _ => 2.0,
        }
    }

    pub fn problem(self, dt: f64) -> Result<HeatProblem> {
        self.problem_with(self.diffusivity(), self.dx(), dt, self.t_end())
    }

    /// Preset source and initial condition with overridden numerics.
    pub fn problem_with(self, k: f64, dx: f64, dt: f64, t_end: f64) -> Result<HeatProblem> {
        match self {
            HeatPreset::Cfg1 => HeatProblem::new(
                k,
                dx,
                dt,
                t_end,
                |x, t| x * (-t / 2.0).exp(),
                |x| 4.0 * x * (x - 1.0) * (x - 2.0),
            ),
            HeatPreset::Cfg2 => HeatProblem::new(k, dx, dt, t_end, |_x, t| cfg2_source(t), |x| {
                6.0 * (x - 0.5).abs() - 3.0
            }),
            HeatPreset::Cfg3 => HeatProblem::new(
                k,
                dx,
                dt,
                t_end,
                |x, t| {
                    0.1 * ((2.0 * std::f64::consts::PI * t).sin()
                        + (2.0 * std::f64::consts::PI * x).cos())
                },
                |x| x * (x - 1.0),
            ),
        }
    }
}

/// `(1 − √(1 − 4(t − t²)))/(2 − 2t)`, continued by its limit 1 at `t = 1`.
pub fn cfg2_source(t: f64) -> f64 {
    if t >= 1.0 {
        return 1.0;
    }
    (1.0 - (1.0 - 4.0 * (t - t * t)).sqrt()) / (2.0 - 2.0 * t)
}

fn check_len(u: &[f64], m: usize) -> Result<()> {
    if u.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: u.len(),
        });
    }
    Ok(())
}

fn finite(v: Vec<f64>, step: usize) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Backward-Euler base. `q_new` is the source at `t_k`.
fn backward_euler(p: &HeatProblem, u: &[f64], q_new: &[f64], step: usize, hook: &mut dyn FaultHook) -> Result<Vec<f64>> {
    let r = p.mesh_ratio();
    let dt = p.dt();
    let mut rhs: Vec<f64> = u.iter().zip(q_new).map(|(u, q)| u + dt * q).collect();
    hook.linear_rhs(step, &mut rhs);
    let sys = TridiagonalSystem::constant(u.len(), -r, 1.0 + 2.0 * r, -r, rhs);
    finite(solve_tridiagonal(&sys)?, step)
}

/// Forward-Euler auxiliary. `q_prev` is the source at `t_{k−1}`.
fn forward_euler(p: &HeatProblem, u: &[f64], q_prev: &[f64]) -> Vec<f64> {
    let r = p.mesh_ratio();
    let dt = p.dt();
    laplacian(u)
        .iter()
        .zip(u)
        .zip(q_prev)
        .map(|((lap, u), q)| u + r * lap + dt * q)
        .collect()
}

fn crank_nicolson(
    p: &HeatProblem,
    u: &[f64],
    q_prev: &[f64],
    q_new: &[f64],
    step: usize,
    hook: &mut dyn FaultHook,
) -> Result<Vec<f64>> {
    let half = 0.5 * p.mesh_ratio();
    let dt = p.dt();
    let lap = laplacian(u);
    let mut rhs: Vec<f64> = (0..u.len())
        .map(|j| u[j] + half * lap[j] + 0.5 * dt * (q_prev[j] + q_new[j]))
        .collect();
    hook.linear_rhs(step, &mut rhs);
    let sys = TridiagonalSystem::constant(u.len(), -half, 1.0 + 2.0 * half, -half, rhs);
    finite(solve_tridiagonal(&sys)?, step)
}

/// Leapfrog `u_{k−2} + 2r·Δu_{k−1} + 2Δt·q_{k−1}`.
fn leapfrog(p: &HeatProblem, u: &[f64], u_prev: &[f64], q_prev: &[f64]) -> Vec<f64> {
    let r = p.mesh_ratio();
    let dt = p.dt();
    laplacian(u)
        .iter()
        .enumerate()
        .map(|(j, lap)| u_prev[j] + 2.0 * r * lap + 2.0 * dt * q_prev[j])
        .collect()
}

/// One forward/backward Euler pair step from `u_n` at `t_n`, producing index `n + 1`.
pub fn fe_be_pair_step(problem: &HeatProblem, u_n: &State, n: usize, hook: &mut dyn FaultHook) -> Result<StepOutput> {
    check_len(u_n.values(), problem.m)?;
    let step = n + 1;
    let mut q_new = problem.source(problem.grid.t(step));
    hook.derivative(step, 0, &mut q_new);
    let q_prev = problem.source(problem.grid.t(n));
    let base = backward_euler(problem, u_n.values(), &q_new, step, hook)?;
    let aux = forward_euler(problem, u_n.values(), &q_prev);
    StepOutput::new(State::vector(base), State::vector(aux), step)
}

/// One leapfrog/Crank-Nicolson pair step from `u_n` and `u_{n−1}`.
pub fn richardson_cn_pair_step(
    problem: &HeatProblem,
    u_n: &State,
    u_nm1: &State,
    n: usize,
    hook: &mut dyn FaultHook,
) -> Result<StepOutput> {
    check_len(u_n.values(), problem.m)?;
    check_len(u_nm1.values(), problem.m)?;
    if n == 0 {
        return Err(Error::InsufficientHistory { have: 1, need: 2 });
    }
    let step = n + 1;
    let q_prev = problem.source(problem.grid.t(n));
    let mut q_new = problem.source(problem.grid.t(step));
    hook.derivative(step, 0, &mut q_new);
    let base = crank_nicolson(problem, u_n.values(), &q_prev, &q_new, step, hook)?;
    let aux = leapfrog(problem, u_n.values(), u_nm1.values(), &q_prev);
    StepOutput::new(State::vector(base), State::vector(aux), step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatPair {
    FeBe,
    RCn,
}

impl HeatPair {
    pub fn id(self) -> &'static str {
        match self {
            HeatPair::FeBe => "fe-be",
            HeatPair::RCn => "r-cn",
        }
    }
}

/// A heat pair driven over the problem's time grid.
#[derive(Debug, Clone)]
pub struct HeatScheme {
    problem: HeatProblem,
    pair: HeatPair,
    u: State,
    u_prev: Option<State>,
    /// Source at `t_n` as evaluated (and possibly corrupted) by the base.
    q_cached: Vec<f64>,
    n: usize,
}

impl HeatScheme {
    pub fn new(problem: HeatProblem, pair: HeatPair) -> Self {
        let u = problem.initial();
        let q_cached = problem.source(problem.grid.t(0));
        Self {
            problem,
            pair,
            u,
            u_prev: None,
            q_cached,
            n: 0,
        }
    }

    pub fn problem(&self) -> &HeatProblem {
        &self.problem
    }

    fn step(&mut self, hook: &mut dyn FaultHook, with_aux: bool) -> Result<Option<StepOutput>> {
        if self.n >= self.problem.grid.n_steps {
            return Err(Error::Finished(self.n));
        }
        let step = self.n + 1;
        hook.stored(step, &mut [self.u.values_mut()]);
        let mut q_new = self.problem.source(self.problem.grid.t(step));
        hook.derivative(step, 0, &mut q_new);
        let u = self.u.values();
        let (base, aux) = match self.pair {
            HeatPair::FeBe => {
                let base = backward_euler(&self.problem, u, &q_new, step, hook)?;
                let aux = with_aux.then(|| forward_euler(&self.problem, u, &self.q_cached));
                (base, aux)
            }
            HeatPair::RCn => {
                let base = crank_nicolson(&self.problem, u, &self.q_cached, &q_new, step, hook)?;
                let aux = match (&self.u_prev, with_aux) {
                    (Some(prev), true) => Some(leapfrog(&self.problem, u, prev.values(), &self.q_cached)),
                    _ => None,
                };
                (base, aux)
            }
        };
        let base = State::vector(base);
        self.u_prev = Some(std::mem::replace(&mut self.u, base));
        self.q_cached = q_new;
        self.n = step;
        aux.map(|a| StepOutput::new(self.u.clone(), State::vector(a), step))
            .transpose()
    }
}

impl PairScheme for HeatScheme {
    fn name(&self) -> &str {
        self.pair.id()
    }

    fn n_steps(&self) -> usize {
        self.problem.grid.n_steps
    }

    fn step_index(&self) -> usize {
        self.n
    }

    fn current(&self) -> &State {
        &self.u
    }

    fn first_checked_step(&self) -> usize {
        match self.pair {
            HeatPair::FeBe => 1,
            HeatPair::RCn => 2,
        }
    }

    fn fault_targets(&self) -> FaultTargets {
        let m = self.problem.m;
        FaultTargets {
            stages: 1,
            derivative_len: m,
            rhs_len: m,
            stored_slots: vec![m],
        }
    }

    fn advance(&mut self, hook: &mut dyn FaultHook) -> Result<Option<StepOutput>> {
        self.step(hook, true)
    }

    fn advance_base_only(&mut self, hook: &mut dyn FaultHook) -> Result<()> {
        self.step(hook, false).map(|_| ())
    }

    fn clone_box(&self) -> Box<dyn PairScheme> {
        Box::new(self.clone())
    }
}
