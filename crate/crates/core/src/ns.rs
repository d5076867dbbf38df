//! Lid-driven cavity on `[0, 1]²` by a projection method on a staggered
//! (MAC) grid, checked by linear extrapolation of the velocity.
//!
//! Layout follows the classic compact Matlab cavity code: with `n` cells
//! per side, `U` is `(n−1) × n` (x-faces), `V` is `n × (n−1)` (y-faces) and
//! `P` is `n × n` (cell centres), all stored column-major as `i + rows·j`.
//! Walls are handled with ghost values; the top wall moves with the lid
//! velocity. Only `(U, V)` form the checked state.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BandedCholesky;
use crate::ode::extrapolation_aux;
use crate::scheme::{FaultHook, FaultTargets, PairScheme};
use crate::state::{State, StepOutput, TimeGrid};

/// Treatment of the nonlinear terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Advection {
    /// Plain centred differences.
    #[default]
    Centered,
    /// Centred differences blended with donor-cell upwinding by
    /// `γ = min(1.2·Δt·max(|U|/Δx, |V|/Δy), 1)`.
    Blended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsProblem {
    pub re: f64,
    /// Cells per side; `Δx = Δy = 1/cells`.
    pub cells: usize,
    pub grid: TimeGrid,
    pub lid: f64,
    pub advection: Advection,
}

impl NsProblem {
    pub fn new(re: f64, cells: usize, dt: f64, t_end: f64) -> Result<Self> {
        if !(re > 0.0) {
            return Err(Error::Config(format!("Reynolds number must be positive, got {re}")));
        }
        if cells < 3 {
            return Err(Error::Config(format!("need at least 3 cells per side, got {cells}")));
        }
        let p = Self {
            re,
            cells,
            grid: TimeGrid::spanning(0.0, t_end, dt)?,
            lid: 1.0,
            advection: Advection::default(),
        };
        if p.advective_cfl() > 1.0 {
            return Err(Error::Config(format!(
                "advective CFL {:.3} exceeds 1 for lid speed {}",
                p.advective_cfl(),
                p.lid
            )));
        }
        Ok(p)
    }

    /// Preset `"ns-re2000"` or `"ns-re20"`: 40 × 40 cells, `Δt = 1/100`, `T = 2`.
    pub fn preset(id: &str) -> Option<Self> {
        let re = match id {
            "ns-re2000" => 2000.0,
            "ns-re20" => 20.0,
            _ => return None,
        };
        Self::new(re, 40, 1.0 / 100.0, 2.0).ok()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    /// `|lid|·Δt/Δx`, with the lid speed as velocity scale.
    pub fn advective_cfl(&self) -> f64 {
        self.lid.abs() * self.grid.dt / self.h()
    }

    pub fn u_shape(&self) -> (usize, usize) {
        (self.cells - 1, self.cells)
    }

    pub fn v_shape(&self) -> (usize, usize) {
        (self.cells, self.cells - 1)
    }

    fn u_len(&self) -> usize {
        (self.cells - 1) * self.cells
    }

    /// Fluid at rest.
    pub fn initial(&self) -> State {
        State::fields(vec![0.0; 2 * self.u_len()], vec![self.u_shape(), self.v_shape()])
            .expect("shapes match length")
    }
}

/// Entry `(i, j)` of the 1-D second-difference matrix scaled by `h²`, with
/// end diagonal `a11` (1 Neumann, 2 Dirichlet on the node, 3 Dirichlet
/// half a cell away).
fn k1(n: usize, a11: f64, i: usize, j: usize) -> f64 {
    if i == j {
        if i == 0 || i == n - 1 {
            a11
        } else {
            2.0
        }
    } else if i.abs_diff(j) == 1 {
        -1.0
    } else {
        0.0
    }
}

/// Entry of `c0·I + c·(I ⊗ Kx + Ky ⊗ I)` for an `rows × cols` grid.
fn kron_entry(rows: usize, cols: usize, ax: f64, ay: f64, c0: f64, c: f64, a: usize, b: usize) -> f64 {
    let (ia, ja) = (a % rows, a / rows);
    let (ib, jb) = (b % rows, b / rows);
    let mut v = 0.0;
    if ja == jb {
        v += c * k1(rows, ax, ia, ib);
    }
    if ia == ib {
        v += c * k1(cols, ay, ja, jb);
    }
    if a == b {
        v += c0;
    }
    v
}

#[derive(Debug)]
struct Factors {
    lu: BandedCholesky,
    lv: BandedCholesky,
    lp: BandedCholesky,
}

impl Factors {
    fn new(p: &NsProblem) -> Result<Self> {
        let n = p.cells;
        let h2 = p.h() * p.h();
        let c = p.dt() / p.re / h2;
        let (ur, uc) = p.u_shape();
        let (vr, vc) = p.v_shape();
        let lu = BandedCholesky::factor(ur * uc, ur, |a, b| kron_entry(ur, uc, 2.0, 3.0, 1.0, c, a, b))?;
        let lv = BandedCholesky::factor(vr * vc, vr, |a, b| kron_entry(vr, vc, 3.0, 2.0, 1.0, c, a, b))?;
        // pure Neumann Laplacian; scaling the first diagonal entry removes
        // the constant null space and pins p₀ = 0 for compatible data
        let lp = BandedCholesky::factor(n * n, n, |a, b| {
            let v = kron_entry(n, n, 1.0, 1.0, 0.0, 1.0 / h2, a, b);
            if a == 0 && b == 0 {
                1.5 * v
            } else {
                v
            }
        })?;
        Ok(Self { lu, lv, lp })
    }
}

/// Discrete divergence `(U)_x + (V)_y` at cell centres, column-major `n × n`.
pub fn divergence(problem: &NsProblem, state: &State) -> Vec<f64> {
    let n = problem.cells;
    let h = problem.h();
    let (u, v) = state.values().split_at(problem.u_len());
    let uat = |i: usize, j: usize| if i == 0 || i == n { 0.0 } else { u[(i - 1) + (n - 1) * j] };
    let vat = |i: usize, j: usize| if j == 0 || j == n { 0.0 } else { v[i + n * (j - 1)] };
    let mut div = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            div[i + n * j] = (uat(i + 1, j) - uat(i, j)) / h + (vat(i, j + 1) - vat(i, j)) / h;
        }
    }
    div
}

/// Advective terms `(N_U, N_V)` with `U* = U − Δt·N_U`.
fn nonlinear_terms(p: &NsProblem, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.cells;
    let h = p.h();
    let lid = p.lid;
    let gamma = match p.advection {
        Advection::Centered => 0.0,
        Advection::Blended => {
            let umax = u.iter().chain(v).fold(0.0f64, |m, x| m.max(x.abs()));
            (1.2 * p.dt() * umax / h).min(1.0)
        }
    };
    // U extended with wall and ghost values: (n+1) × (n+2)
    let ue = |i: usize, j: usize| -> f64 {
        let inner = |i: usize, j: usize| {
            if i == 0 || i == n {
                0.0
            } else {
                u[(i - 1) + (n - 1) * (j - 1)]
            }
        };
        if j == 0 {
            -inner(i, 1)
        } else if j == n + 1 {
            2.0 * lid - inner(i, n)
        } else {
            inner(i, j)
        }
    };
    // V extended: (n+2) × (n+1)
    let ve = |i: usize, j: usize| -> f64 {
        let inner = |i: usize, j: usize| {
            if j == 0 || j == n {
                0.0
            } else {
                v[(i - 1) + n * (j - 1)]
            }
        };
        if i == 0 {
            -inner(1, j)
        } else if i == n + 1 {
            -inner(n, j)
        } else {
            inner(i, j)
        }
    };

    // products at cell corners, (n+1) × (n+1)
    let mut wx = vec![0.0; (n + 1) * (n + 1)];
    let mut wy = vec![0.0; (n + 1) * (n + 1)];
    for j in 0..=n {
        for i in 0..=n {
            let ua = 0.5 * (ue(i, j) + ue(i, j + 1));
            let ud = 0.5 * (ue(i, j + 1) - ue(i, j));
            let va = 0.5 * (ve(i, j) + ve(i + 1, j));
            let vd = 0.5 * (ve(i + 1, j) - ve(i, j));
            wx[i + (n + 1) * j] = ua * va - gamma * ua.abs() * vd;
            wy[i + (n + 1) * j] = ua * va - gamma * ud * va.abs();
        }
    }
    // squares at cell centres, n × n
    let mut zu = vec![0.0; n * n];
    let mut zv = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let ua = 0.5 * (ue(i, j + 1) + ue(i + 1, j + 1));
            let ud = 0.5 * (ue(i + 1, j + 1) - ue(i, j + 1));
            zu[i + n * j] = ua * ua - gamma * ua.abs() * ud;
            let va = 0.5 * (ve(i + 1, j) + ve(i + 1, j + 1));
            let vd = 0.5 * (ve(i + 1, j + 1) - ve(i + 1, j));
            zv[i + n * j] = va * va - gamma * va.abs() * vd;
        }
    }

    let mut nu = vec![0.0; (n - 1) * n];
    for j in 0..n {
        for i in 0..n - 1 {
            let uvy = (wy[(i + 1) + (n + 1) * (j + 1)] - wy[(i + 1) + (n + 1) * j]) / h;
            let u2x = (zu[(i + 1) + n * j] - zu[i + n * j]) / h;
            nu[i + (n - 1) * j] = uvy + u2x;
        }
    }
    let mut nv = vec![0.0; n * (n - 1)];
    for j in 0..n - 1 {
        for i in 0..n {
            let uvx = (wx[(i + 1) + (n + 1) * (j + 1)] - wx[i + (n + 1) * (j + 1)]) / h;
            let v2y = (zv[i + n * (j + 1)] - zv[i + n * j]) / h;
            nv[i + n * j] = uvx + v2y;
        }
    }
    (nu, nv)
}

/// One projection step with fault hooks. `values` holds `U` followed by `V`
/// and is updated in place.
fn projection(p: &NsProblem, f: &Factors, values: &mut [f64], step: usize, hook: &mut dyn FaultHook) -> Result<()> {
    let n = p.cells;
    let h = p.h();
    let dt = p.dt();
    let nu_len = p.u_len();

    hook.stored(step, &mut [&mut values[..nu_len]]);

    // 1. explicit nonlinear terms
    let (u, v) = values.split_at_mut(nu_len);
    let (nu, nv) = nonlinear_terms(p, u, v);
    let mut tend: Vec<f64> = nu.into_iter().chain(nv).collect();
    hook.derivative(step, 0, &mut tend);
    for (x, t) in u.iter_mut().chain(v.iter_mut()).zip(&tend) {
        *x -= dt * t;
    }

    // 2. implicit viscosity; the moving lid enters the top row of U
    let lid_term = dt / p.re * 2.0 * p.lid / (h * h);
    for i in 0..n - 1 {
        u[i + (n - 1) * (n - 1)] += lid_term;
    }
    f.lu.solve_in_place(u);
    f.lv.solve_in_place(v);

    // 3. pressure correction
    let mut rhs = divergence(p, &State::vector(u.iter().chain(v.iter()).copied().collect()));
    hook.linear_rhs(step, &mut rhs);
    f.lp.solve_in_place(&mut rhs);
    let pr: Vec<f64> = rhs.into_iter().map(|x| -x).collect();

    // 4. velocity update
    for j in 0..n {
        for i in 0..n - 1 {
            u[i + (n - 1) * j] -= (pr[(i + 1) + n * j] - pr[i + n * j]) / h;
        }
    }
    for j in 0..n - 1 {
        for i in 0..n {
            v[i + n * j] -= (pr[i + n * (j + 1)] - pr[i + n * j]) / h;
        }
    }
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Projection base paired with `A_{k} = 2B_{k−1} − B_{k−2}`.
#[derive(Debug, Clone)]
pub struct NsPair {
    problem: NsProblem,
    factors: Arc<Factors>,
    current: State,
    previous: Option<State>,
    n: usize,
}

impl NsPair {
    pub fn new(problem: NsProblem) -> Result<Self> {
        let factors = Arc::new(Factors::new(&problem)?);
        let current = problem.initial();
        Ok(Self {
            problem,
            factors,
            current,
            previous: None,
            n: 0,
        })
    }

    pub fn problem(&self) -> &NsProblem {
        &self.problem
    }

    /// Error-free projection step applied to an arbitrary state.
    pub fn projection_step(&self, fields: &State, step: usize) -> Result<State> {
        let mut out = fields.clone();
        projection(&self.problem, &self.factors, out.values_mut(), step, &mut crate::scheme::NoFault)?;
        Ok(out)
    }

    fn step(&mut self, hook: &mut dyn FaultHook, with_aux: bool) -> Result<Option<StepOutput>> {
        if self.n >= self.problem.grid.n_steps {
            return Err(Error::Finished(self.n));
        }
        let step = self.n + 1;
        let aux = match (&self.previous, with_aux) {
            (Some(prev), true) => Some(extrapolation_aux(&self.current, prev)?),
            _ => None,
        };
        let mut next = self.current.clone();
        projection(&self.problem, &self.factors, next.values_mut(), step, hook)?;
        self.previous = Some(std::mem::replace(&mut self.current, next));
        self.n = step;
        aux.map(|a| StepOutput::new(self.current.clone(), a, step)).transpose()
    }
}

impl PairScheme for NsPair {
    fn name(&self) -> &str {
        "ns-extrapolation"
    }

    fn n_steps(&self) -> usize {
        self.problem.grid.n_steps
    }

    fn step_index(&self) -> usize {
        self.n
    }

    fn current(&self) -> &State {
        &self.current
    }

    fn first_checked_step(&self) -> usize {
        2
    }

    fn fault_targets(&self) -> FaultTargets {
        FaultTargets {
            stages: 1,
            derivative_len: self.current.len(),
            rhs_len: self.problem.cells * self.problem.cells,
            stored_slots: vec![self.problem.u_len()],
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
