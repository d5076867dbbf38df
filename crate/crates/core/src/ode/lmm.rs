//! Adams-Bashforth pairs and Adams-Moulton base with Adams-Bashforth auxiliary.
//!
//! Both pairs keep the base trajectory's states and derivative evaluations.
//! Step `k` evaluates `f(t_{k−1}, B_{k−1})` once (the only new evaluation),
//! then combines it with the stored evaluations in two ways. The first
//! `p − 1` steps are taken with classical RK4 and produce no check.

use std::collections::VecDeque;

use super::{ensure_finite, rk4_step, OdeProblem};
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::scheme::{FaultHook, FaultTargets, PairScheme};
use crate::state::{State, StepOutput};

const AB: [&[f64]; 5] = [
    &[1.0],
    &[3.0 / 2.0, -1.0 / 2.0],
    &[23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0],
    &[55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0],
    &[
        1901.0 / 720.0,
        -2774.0 / 720.0,
        2616.0 / 720.0,
        -1274.0 / 720.0,
        251.0 / 720.0,
    ],
];

const AM: [&[f64]; 5] = [
    &[1.0],
    &[1.0 / 2.0, 1.0 / 2.0],
    &[5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0],
    &[9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0],
    &[
        251.0 / 720.0,
        646.0 / 720.0,
        -264.0 / 720.0,
        106.0 / 720.0,
        -19.0 / 720.0,
    ],
];

pub const MAX_ORDER: usize = 5;

/// Adams-Bashforth weights of order `p`, newest evaluation first.
pub fn adams_bashforth_weights(p: usize) -> Result<&'static [f64]> {
    (1..=MAX_ORDER)
        .contains(&p)
        .then(|| AB[p - 1])
        .ok_or_else(|| Error::Config(format!("Adams-Bashforth order {p} not in 1..={MAX_ORDER}")))
}

/// Adams-Moulton weights of order `p`; the first applies to `f_{n+1}`.
pub fn adams_moulton_weights(p: usize) -> Result<&'static [f64]> {
    (1..=MAX_ORDER)
        .contains(&p)
        .then(|| AM[p - 1])
        .ok_or_else(|| Error::Config(format!("Adams-Moulton order {p} not in 1..={MAX_ORDER}")))
}

/// Stored states `B_{n−p+1..n}` and the derivative evaluations of all but
/// the newest of them, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmHistory {
    states: VecDeque<State>,
    derivs: VecDeque<Vec<f64>>,
    order: usize,
}

impl LmmHistory {
    pub fn new(order: usize) -> Self {
        Self {
            states: VecDeque::with_capacity(order),
            derivs: VecDeque::with_capacity(order),
            order,
        }
    }

    /// History from explicit data (oldest first). `derivs` must hold one
    /// entry fewer than `states`.
    pub fn from_parts(states: Vec<State>, derivs: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() || derivs.len() + 1 != states.len() {
            return Err(Error::InsufficientHistory {
                have: derivs.len(),
                need: states.len().saturating_sub(1),
            });
        }
        let order = states.len();
        Ok(Self {
            states: states.into(),
            derivs: derivs.into(),
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn latest(&self) -> &State {
        self.states.back().expect("history holds at least the initial state")
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.states.iter()
    }

    pub fn derivatives(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.derivs.iter()
    }

    fn push(&mut self, state: State, deriv_of_previous: Vec<f64>) {
        if self.states.len() == self.order {
            self.states.pop_front();
        }
        self.states.push_back(state);
        self.derivs.push_back(deriv_of_previous);
        while self.derivs.len() + 1 > self.order.max(1) {
            self.derivs.pop_front();
        }
    }

    /// Slots handed to the fault hook: the latest state, then the stored
    /// derivatives newest first.
    fn stored_slots(&mut self) -> Vec<&mut [f64]> {
        let mut slots: Vec<&mut [f64]> = Vec::with_capacity(self.derivs.len() + 1);
        slots.push(self.states.back_mut().expect("non-empty").values_mut());
        for d in self.derivs.iter_mut().rev() {
            slots.push(d.as_mut_slice());
        }
        slots
    }
}

/// Startup history of order `p`: `B_1..B_{p−1}` from classical RK4 at the
/// problem's step size.
pub fn bootstrap_history(problem: &OdeProblem, p: usize) -> Result<LmmHistory> {
    if p == 0 {
        return Err(Error::Config("multistep order must be at least 1".into()));
    }
    let mut hist = LmmHistory::new(p);
    hist.states.push_back(State::vector(problem.u0().to_vec()));
    for i in 0..p - 1 {
        bootstrap_step(problem, &mut hist, i)?;
    }
    Ok(hist)
}

fn bootstrap_step(problem: &OdeProblem, hist: &mut LmmHistory, n: usize) -> Result<()> {
    let t = problem.grid().t(n);
    let (next, k1) = rk4_step(problem, hist.latest().values(), t);
    ensure_finite(&next, n + 1)?;
    hist.push(State::vector(next), k1);
    Ok(())
}

/// Newton iteration settings for the implicit Adams-Moulton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 25,
        }
    }
}

fn combine(u: &[f64], h: f64, weights: &[f64], derivs: &[&[f64]]) -> Vec<f64> {
    let mut out = u.to_vec();
    for (w, f) in weights.iter().zip(derivs) {
        for (o, fv) in out.iter_mut().zip(f.iter()) {
            *o += h * w * fv;
        }
    }
    out
}

/// Shared multistep driver: bootstrap, hook dispatch and history upkeep.
#[derive(Debug, Clone)]
struct Multistep {
    problem: OdeProblem,
    hist: LmmHistory,
    n: usize,
}

impl Multistep {
    fn new(problem: OdeProblem, order: usize) -> Self {
        let mut hist = LmmHistory::new(order);
        hist.states.push_back(State::vector(problem.u0().to_vec()));
        Self { problem, hist, n: 0 }
    }

    fn order(&self) -> usize {
        self.hist.order
    }

    fn bootstrapping(&self) -> bool {
        self.n + 1 < self.order()
    }

    /// Exposes stored data to the hook and takes the step's one new
    /// evaluation. Returns the evaluations newest first (`f_{k−1}, f_{k−2}, …`).
    fn gather(&mut self, step: usize, hook: &mut dyn FaultHook) -> Result<Vec<Vec<f64>>> {
        hook.stored(step, &mut self.hist.stored_slots());
        let t = self.problem.grid().t(self.n);
        let mut fnew = self.problem.eval_new(t, self.hist.latest().values());
        hook.derivative(step, 0, &mut fnew);
        ensure_finite(&fnew, step)?;
        let mut all = Vec::with_capacity(self.order());
        all.push(fnew);
        all.extend(self.hist.derivs.iter().rev().cloned());
        Ok(all)
    }

    fn commit(&mut self, base: Vec<f64>, fnew: Vec<f64>, step: usize) -> Result<()> {
        ensure_finite(&base, step)?;
        self.hist.push(State::vector(base), fnew);
        self.n = step;
        Ok(())
    }

    fn check_not_finished(&self) -> Result<()> {
        if self.n >= self.problem.grid().n_steps {
            Err(Error::Finished(self.n))
        } else {
            Ok(())
        }
    }

    fn targets(&self) -> FaultTargets {
        let dim = self.problem.dim();
        FaultTargets {
            stages: 1,
            derivative_len: dim,
            rhs_len: 0,
            stored_slots: vec![dim; self.order()],
        }
    }
}

/// One Adams-Bashforth pair step on an explicit history. The history must
/// hold `p_base` states; it is advanced in place.
pub fn ab_pair_step(
    problem: &OdeProblem,
    history: &mut LmmHistory,
    orders: (usize, usize),
    n: usize,
    hook: &mut dyn FaultHook,
) -> Result<StepOutput> {
    let (p_aux, p_base) = orders;
    if history.len() < p_base || history.derivs.len() + 1 < p_base {
        return Err(Error::InsufficientHistory {
            have: history.len(),
            need: p_base,
        });
    }
    let mut ms = Multistep {
        problem: problem.clone(),
        hist: std::mem::replace(history, LmmHistory::new(0)),
        n,
    };
    let result = ab_step(&mut ms, p_aux, p_base, hook, true);
    *history = ms.hist;
    let aux = result?.expect("auxiliary requested");
    StepOutput::new(history.latest().clone(), State::vector(aux), n + 1)
}

fn ab_step(
    ms: &mut Multistep,
    p_aux: usize,
    p_base: usize,
    hook: &mut dyn FaultHook,
    with_aux: bool,
) -> Result<Option<Vec<f64>>> {
    let step = ms.n + 1;
    let evals = ms.gather(step, hook)?;
    let refs: Vec<&[f64]> = evals.iter().map(|v| v.as_slice()).collect();
    let u = ms.hist.latest().values().to_vec();
    let h = ms.problem.h();
    let base = combine(&u, h, adams_bashforth_weights(p_base)?, &refs);
    let aux = with_aux
        .then(|| adams_bashforth_weights(p_aux).map(|w| combine(&u, h, w, &refs[..p_aux])))
        .transpose()?;
    let fnew = evals.into_iter().next().expect("new evaluation");
    ms.commit(base, fnew, step)?;
    Ok(aux)
}

/// Adams-Bashforth pair: order `p_base` base, order `p_aux` auxiliary, both
/// over the same stored evaluations.
#[derive(Debug, Clone)]
pub struct AbPair {
    inner: Multistep,
    p_aux: usize,
    p_base: usize,
    name: String,
}

impl AbPair {
    pub fn new(problem: OdeProblem, p_aux: usize, p_base: usize) -> Result<Self> {
        adams_bashforth_weights(p_base)?;
        adams_bashforth_weights(p_aux)?;
        if p_aux > p_base {
            return Err(Error::Config(format!(
                "auxiliary order {p_aux} exceeds base order {p_base}"
            )));
        }
        Ok(Self {
            inner: Multistep::new(problem, p_base),
            p_aux,
            p_base,
            name: format!("ab{p_aux}{p_base}"),
        })
    }

    pub fn history(&self) -> &LmmHistory {
        &self.inner.hist
    }

    fn step(&mut self, hook: &mut dyn FaultHook, with_aux: bool) -> Result<Option<StepOutput>> {
        self.inner.check_not_finished()?;
        if self.inner.bootstrapping() {
            let n = self.inner.n;
            bootstrap_step(&self.inner.problem, &mut self.inner.hist, n)?;
            self.inner.n += 1;
            return Ok(None);
        }
        let aux = ab_step(&mut self.inner, self.p_aux, self.p_base, hook, with_aux)?;
        aux.map(|a| StepOutput::new(self.inner.hist.latest().clone(), State::vector(a), self.inner.n))
            .transpose()
    }
}

impl PairScheme for AbPair {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_steps(&self) -> usize {
        self.inner.problem.grid().n_steps
    }

    fn step_index(&self) -> usize {
        self.inner.n
    }

    fn current(&self) -> &State {
        self.inner.hist.latest()
    }

    fn first_checked_step(&self) -> usize {
        self.p_base
    }

    fn fault_targets(&self) -> FaultTargets {
        self.inner.targets()
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

/// Implicit Adams-Moulton base of order `p` with the explicit order-`p`
/// Adams-Bashforth formula over the same data as auxiliary. The auxiliary
/// also serves as the Newton starting guess.
#[derive(Debug, Clone)]
pub struct AmAbPair {
    inner: Multistep,
    order: usize,
    newton: NewtonConfig,
    name: String,
}

impl AmAbPair {
    pub fn new(problem: OdeProblem, order: usize, newton: NewtonConfig) -> Result<Self> {
        adams_moulton_weights(order)?;
        Ok(Self {
            inner: Multistep::new(problem, order),
            order,
            newton,
            name: format!("am-ab:{order}"),
        })
    }

    fn step(&mut self, hook: &mut dyn FaultHook, with_aux: bool) -> Result<Option<StepOutput>> {
        self.inner.check_not_finished()?;
        if self.inner.bootstrapping() {
            let n = self.inner.n;
            bootstrap_step(&self.inner.problem, &mut self.inner.hist, n)?;
            self.inner.n += 1;
            return Ok(None);
        }
        let step = self.inner.n + 1;
        let evals = self.inner.gather(step, hook)?;
        let refs: Vec<&[f64]> = evals.iter().map(|v| v.as_slice()).collect();
        let u = self.inner.hist.latest().values().to_vec();
        let h = self.inner.problem.h();
        let predictor = combine(&u, h, adams_bashforth_weights(self.order)?, &refs);
        let beta = adams_moulton_weights(self.order)?;
        let known = combine(&u, h, &beta[1..], &refs[..self.order - 1]);
        let t_next = self.inner.problem.grid().t(step);
        let base = newton_solve(&self.inner.problem, t_next, h * beta[0], &known, predictor.clone(), self.newton)?;
        let fnew = evals.into_iter().next().expect("new evaluation");
        self.inner.commit(base, fnew, step)?;
        if !with_aux {
            return Ok(None);
        }
        Ok(Some(StepOutput::new(
            self.inner.hist.latest().clone(),
            State::vector(predictor),
            step,
        )?))
    }
}

/// Solves `x − known − hb·f(t, x) = 0` by Newton's method with a
/// forward-difference Jacobian.
fn newton_solve(
    problem: &OdeProblem,
    t: f64,
    hb: f64,
    known: &[f64],
    mut x: Vec<f64>,
    cfg: NewtonConfig,
) -> Result<Vec<f64>> {
    let dim = x.len();
    let residual = |x: &[f64], fx: &[f64]| -> Vec<f64> {
        (0..dim).map(|i| x[i] - known[i] - hb * fx[i]).collect()
    };
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut fx = problem.eval_new(t, &x);
    let mut r = residual(&x, &fx);
    for _ in 0..cfg.max_iter {
        if inf(&r) <= cfg.tol * inf(&x).max(1.0) {
            return Ok(x);
        }
        let mut jac = vec![0.0; dim * dim];
        let mut xp = x.clone();
        for j in 0..dim {
            let delta = f64::EPSILON.sqrt() * x[j].abs().max(1.0);
            xp[j] = x[j] + delta;
            let fp = problem.eval_new(t, &xp);
            xp[j] = x[j];
            for i in 0..dim {
                let dfdx = (fp[i] - fx[i]) / delta;
                jac[i * dim + j] = if i == j { 1.0 } else { 0.0 } - hb * dfdx;
            }
        }
        let dx = solve_dense(jac, r.iter().map(|v| -v).collect())?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        fx = problem.eval_new(t, &x);
        r = residual(&x, &fx);
        if !r.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    if inf(&r) <= cfg.tol * inf(&x).max(1.0) {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        residual: inf(&r),
    })
}

impl PairScheme for AmAbPair {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_steps(&self) -> usize {
        self.inner.problem.grid().n_steps
    }

    fn step_index(&self) -> usize {
        self.inner.n
    }

    fn current(&self) -> &State {
        self.inner.hist.latest()
    }

    fn first_checked_step(&self) -> usize {
        self.order
    }

    fn fault_targets(&self) -> FaultTargets {
        self.inner.targets()
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{base_trajectory, NoFault};
    use crate::state::{Norm, TimeGrid};

    fn exp_problem(t0: f64, h: f64, n: usize) -> OdeProblem {
        OdeProblem::new(|_, u, du| du[0] = u[0], vec![t0.exp()], TimeGrid::new(t0, h, n).unwrap()).unwrap()
    }

    /// Independent weights from the moment conditions
    /// `Σ_j w_j · node_j^m = ∫_0^1 s^m ds`, solved densely.
    fn moment_weights(nodes: &[f64]) -> Vec<f64> {
        let p = nodes.len();
        let a: Vec<f64> = (0..p * p).map(|k| nodes[k % p].powi((k / p) as i32)).collect();
        let b: Vec<f64> = (0..p).map(|m| 1.0 / (m as f64 + 1.0)).collect();
        solve_dense(a, b).unwrap()
    }

    #[test]
    fn weight_tables_match_moment_conditions() {
        for p in 1..=MAX_ORDER {
            let ab_nodes: Vec<f64> = (0..p).map(|j| -(j as f64)).collect();
            let am_nodes: Vec<f64> = (0..p).map(|j| 1.0 - j as f64).collect();
            for (w, o) in adams_bashforth_weights(p).unwrap().iter().zip(moment_weights(&ab_nodes)) {
                assert!((w - o).abs() < 1e-12, "AB{p}");
            }
            for (w, o) in adams_moulton_weights(p).unwrap().iter().zip(moment_weights(&am_nodes)) {
                assert!((w - o).abs() < 1e-12, "AM{p}");
            }
            assert!((adams_bashforth_weights(p).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!((adams_moulton_weights(p).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        assert!(adams_bashforth_weights(6).is_err());
    }

    #[test]
    fn ab_integrates_polynomials_exactly() {
        // u' = t^(p−1) with exact history; one AB_p step is exact.
        for p in 1..=MAX_ORDER {
            let h = 0.25;
            let deg = (p - 1) as i32;
            let problem = OdeProblem::new(
                move |t, _u, du| du[0] = t.powi(deg),
                vec![0.0],
                TimeGrid::new(0.0, h, 10).unwrap(),
            )
            .unwrap();
            let exact = |t: f64| t.powi(deg + 1) / (deg + 1) as f64;
            let states: Vec<State> = (0..p).map(|i| State::vector(vec![exact(i as f64 * h)])).collect();
            let derivs: Vec<Vec<f64>> = (0..p - 1).map(|i| vec![(i as f64 * h).powi(deg)]).collect();
            let mut hist = LmmHistory::from_parts(states, derivs).unwrap();
            let out = ab_pair_step(&problem, &mut hist, (p, p), p - 1, &mut NoFault).unwrap();
            assert!((out.base.values()[0] - exact(p as f64 * h)).abs() < 1e-13, "AB{p}");
        }
    }

    #[test]
    fn constant_derivative_gives_zero_difference() {
        let problem = OdeProblem::new(|_, _, du| du[0] = 3.0, vec![1.0], TimeGrid::new(0.0, 0.1, 20).unwrap()).unwrap();
        let mut pair = AbPair::new(problem, 4, 5).unwrap();
        while !pair.is_finished() {
            if let Some(out) = pair.advance(&mut NoFault).unwrap() {
                assert!(out.difference(Norm::Infinity).unwrap() < 1e-14);
            }
        }
    }

    #[test]
    fn ab12_hand_example() {
        let problem = OdeProblem::new(|t, _, du| du[0] = t, vec![0.0], TimeGrid::new(-1.0, 1.0, 3).unwrap()).unwrap();
        let states = vec![State::vector(vec![0.0]), State::vector(vec![0.0])];
        let mut hist = LmmHistory::from_parts(states, vec![vec![-1.0]]).unwrap();
        let out = ab_pair_step(&problem, &mut hist, (1, 2), 1, &mut NoFault).unwrap();
        assert_eq!(out.base.values(), &[0.5]);
        assert_eq!(out.auxiliary.values(), &[0.0]);
        assert_eq!(out.difference(Norm::Infinity).unwrap(), 0.5);
        assert_eq!(out.step_index, 2);
    }

    #[test]
    fn insufficient_history_is_an_error() {
        let problem = exp_problem(0.0, 0.1, 5);
        let mut hist = bootstrap_history(&problem, 2).unwrap();
        let r = ab_pair_step(&problem, &mut hist, (2, 3), 1, &mut NoFault);
        assert!(matches!(r, Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn ab45_local_error_is_sixth_order() {
        let mut errs = Vec::new();
        let hs = [0.1, 0.05, 0.025];
        for &h in &hs {
            let problem = exp_problem(0.0, h, 10);
            let states: Vec<State> = (0..5).map(|i| State::vector(vec![(i as f64 * h).exp()])).collect();
            let derivs: Vec<Vec<f64>> = (0..4).map(|i| vec![(i as f64 * h).exp()]).collect();
            let mut hist = LmmHistory::from_parts(states, derivs).unwrap();
            let out = ab_pair_step(&problem, &mut hist, (4, 5), 4, &mut NoFault).unwrap();
            errs.push((out.base.values()[0] - (5.0 * h).exp()).abs());
        }
        let s1 = (errs[0] / errs[1]).log2();
        let s2 = (errs[1] / errs[2]).log2();
        assert!((s1 - 6.0).abs() < 0.4 && (s2 - 6.0).abs() < 0.4, "{s1} {s2}");
    }

    #[test]
    fn bootstrap_matches_exponential() {
        let h = 0.02;
        let hist = bootstrap_history(&exp_problem(0.0, h, 10), 5).unwrap();
        assert_eq!(hist.len(), 5);
        for (i, s) in hist.states().enumerate() {
            assert!((s.values()[0] - (i as f64 * h).exp()).abs() < 1e-9);
        }
        let one = bootstrap_history(&exp_problem(0.0, h, 10), 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.derivatives().count(), 0);
        let zero = OdeProblem::new(|_, _, du| du[0] = 0.0, vec![2.0], TimeGrid::new(0.0, h, 3).unwrap()).unwrap();
        let two = bootstrap_history(&zero, 2).unwrap();
        assert!(two.states().all(|s| s.values() == [2.0]));
    }

    #[test]
    fn am2_linear_closed_form() {
        let lambda = -3.0;
        let h = 0.1;
        let problem = OdeProblem::new(move |_, u, du| du[0] = lambda * u[0], vec![1.0], TimeGrid::new(0.0, h, 5).unwrap()).unwrap();
        let mut pair = AmAbPair::new(problem, 2, NewtonConfig::default()).unwrap();
        assert!(pair.advance(&mut NoFault).unwrap().is_none());
        let u1 = pair.current().values()[0];
        let out = pair.advance(&mut NoFault).unwrap().unwrap();
        let expect = u1 * (1.0 + h * lambda / 2.0) / (1.0 - h * lambda / 2.0);
        assert!((out.base.values()[0] - expect).abs() < 1e-13);
    }

    #[test]
    fn am_with_zero_derivative_is_stationary() {
        let problem = OdeProblem::new(|_, _, du| du.fill(0.0), vec![1.0, 2.0], TimeGrid::new(0.0, 0.1, 8).unwrap()).unwrap();
        let mut pair = AmAbPair::new(problem, 3, NewtonConfig::default()).unwrap();
        while !pair.is_finished() {
            if let Some(out) = pair.advance(&mut NoFault).unwrap() {
                assert_eq!(out.base.values(), &[1.0, 2.0]);
                assert_eq!(out.auxiliary.values(), &[1.0, 2.0]);
            }
        }
    }

    #[test]
    fn stiff_problem_am_bounded_forward_euler_diverges() {
        let f = |t: f64, u: &[f64], du: &mut [f64]| du[0] = -1000.0 * (u[0] - t.cos());
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        // start on the slow manifold: the RK4 startup step is itself
        // unstable at hλ = −10 and would amplify an initial transient
        let problem = OdeProblem::new(f, vec![1.0], grid).unwrap();
        let mut pair = AmAbPair::new(problem.clone(), 2, NewtonConfig::default()).unwrap();
        let mut max_b: f64 = 0.0;
        while !pair.is_finished() {
            pair.advance(&mut NoFault).unwrap();
            max_b = max_b.max(pair.current().values()[0].abs());
        }
        assert!(max_b < 2.0, "AM2 grew to {max_b}");
        let mut u = 1.0;
        for n in 0..100 {
            let t = grid.t(n);
            u += 0.01 * (-1000.0 * (u - t.cos()));
        }
        assert!(u.abs() > 1e6, "forward Euler stayed at {u}");
    }

    #[test]
    fn auxiliary_never_feeds_back() {
        let p = OdeProblem::van_der_pol(2.0, [1.0, 0.0], TimeGrid::new(0.0, 0.05, 280).unwrap());
        let mut a = AbPair::new(p.clone(), 4, 5).unwrap();
        let mut b = AbPair::new(p.clone(), 4, 5).unwrap();
        assert_eq!(base_trajectory(&mut a, true).unwrap(), base_trajectory(&mut b, false).unwrap());
        let mut a = AmAbPair::new(p.clone(), 3, NewtonConfig::default()).unwrap();
        let mut b = AmAbPair::new(p, 3, NewtonConfig::default()).unwrap();
        assert_eq!(base_trajectory(&mut a, true).unwrap(), base_trajectory(&mut b, false).unwrap());
    }

    #[test]
    fn ab_pairs_converge_on_exponential() {
        for (pa, pb) in [(2, 3), (4, 5)] {
            let mut errs = Vec::new();
            for h in [0.02, 0.01] {
                let n = (1.0 / h) as usize;
                let mut pair = AbPair::new(exp_problem(0.0, h, n), pa, pb).unwrap();
                while !pair.is_finished() {
                    pair.advance(&mut NoFault).unwrap();
                }
                errs.push((pair.current().values()[0] - 1f64.exp()).abs());
            }
            let order = (errs[0] / errs[1]).log2();
            assert!((order - pb as f64).abs() < 0.5, "ab{pa}{pb}: {order}");
        }
    }
}
