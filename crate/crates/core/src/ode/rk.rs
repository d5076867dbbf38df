use super::{ensure_finite, extrapolation_aux, OdeProblem, RkTableau};
use crate::error::Result;
use crate::scheme::{FaultHook, FaultTargets, PairScheme};
use crate::state::{State, StepOutput};

/// Evaluates the shared stages once and combines them with both weight sets.
/// Returns `(base, aux)`; `aux` is `None` when `with_aux` is false.
fn combined_step(
    problem: &OdeProblem,
    tableau: &RkTableau,
    u: &[f64],
    t: f64,
    step: usize,
    hook: &mut dyn FaultHook,
    with_aux: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let h = problem.h();
    let dim = u.len();
    let s = tableau.stages();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut y = vec![0.0; dim];
    for i in 0..s {
        y.copy_from_slice(u);
        for (j, &aij) in tableau.a[i].iter().enumerate() {
            if aij != 0.0 {
                for (yk, kj) in y.iter_mut().zip(&k[j]) {
                    *yk += h * aij * kj;
                }
            }
        }
        let mut ki = vec![0.0; dim];
        problem.eval(t + tableau.c[i] * h, &y, &mut ki);
        hook.derivative(step, i, &mut ki);
        ensure_finite(&ki, step)?;
        k.push(ki);
    }
    let combine = |w: &[f64]| -> Vec<f64> {
        let mut out = u.to_vec();
        for (wj, kj) in w.iter().zip(&k) {
            if *wj != 0.0 {
                for (o, kv) in out.iter_mut().zip(kj) {
                    *o += h * wj * kv;
                }
            }
        }
        out
    };
    let base = combine(&tableau.base);
    let aux = with_aux.then(|| combine(&tableau.aux));
    Ok((base, aux))
}

/// One embedded-pair step from `u_n` at `t_n`; the output carries index `n + 1`.
pub fn rk_pair_step(
    problem: &OdeProblem,
    tableau: &RkTableau,
    u_n: &State,
    n: usize,
    hook: &mut dyn FaultHook,
) -> Result<StepOutput> {
    let t = problem.grid().t(n);
    let (base, aux) = combined_step(problem, tableau, u_n.values(), t, n + 1, hook, true)?;
    StepOutput::new(
        State::vector(base),
        State::vector(aux.expect("auxiliary requested")),
        n + 1,
    )
}

/// Classical RK4 step, unhooked. Also returns the first stage `f(t, u)`.
pub fn rk4_step(problem: &OdeProblem, u: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let h = problem.h();
    let k1 = problem.eval_new(t, u);
    let shift = |k: &[f64], a: f64| -> Vec<f64> { u.iter().zip(k).map(|(x, k)| x + a * h * k).collect() };
    let k2 = problem.eval_new(t + 0.5 * h, &shift(&k1, 0.5));
    let k3 = problem.eval_new(t + 0.5 * h, &shift(&k2, 0.5));
    let k4 = problem.eval_new(t + h, &shift(&k3, 1.0));
    let next = (0..u.len())
        .map(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    (next, k1)
}

/// Embedded Runge-Kutta pair driven over a full time grid.
#[derive(Debug, Clone)]
pub struct RkPair {
    problem: OdeProblem,
    tableau: RkTableau,
    u: State,
    n: usize,
}

impl RkPair {
    pub fn new(problem: OdeProblem, tableau: RkTableau) -> Result<Self> {
        tableau.validate()?;
        let u = State::vector(problem.u0().to_vec());
        Ok(Self {
            problem,
            tableau,
            u,
            n: 0,
        })
    }

    pub fn tableau(&self) -> &RkTableau {
        &self.tableau
    }

    fn step(&mut self, hook: &mut dyn FaultHook, with_aux: bool) -> Result<Option<Vec<f64>>> {
        let step = self.n + 1;
        if self.n >= self.problem.grid().n_steps {
            return Err(crate::error::Error::Finished(self.n));
        }
        hook.stored(step, &mut [self.u.values_mut()]);
        let t = self.problem.grid().t(self.n);
        let (base, aux) = combined_step(&self.problem, &self.tableau, self.u.values(), t, step, hook, with_aux)?;
        self.u = State::vector(base);
        self.n = step;
        Ok(aux)
    }
}

impl PairScheme for RkPair {
    fn name(&self) -> &str {
        self.tableau.name
    }

    fn n_steps(&self) -> usize {
        self.problem.grid().n_steps
    }

    fn step_index(&self) -> usize {
        self.n
    }

    fn current(&self) -> &State {
        &self.u
    }

    fn first_checked_step(&self) -> usize {
        1
    }

    fn fault_targets(&self) -> FaultTargets {
        FaultTargets {
            stages: self.tableau.stages(),
            derivative_len: self.problem.dim(),
            rhs_len: 0,
            stored_slots: vec![self.problem.dim()],
        }
    }

    fn advance(&mut self, hook: &mut dyn FaultHook) -> Result<Option<StepOutput>> {
        let aux = self.step(hook, true)?.expect("auxiliary requested");
        Ok(Some(StepOutput::new(self.u.clone(), State::vector(aux), self.n)?))
    }

    fn advance_base_only(&mut self, hook: &mut dyn FaultHook) -> Result<()> {
        self.step(hook, false).map(|_| ())
    }

    fn clone_box(&self) -> Box<dyn PairScheme> {
        Box::new(self.clone())
    }
}

/// Classical RK4 base checked against the order-one extrapolation
/// `A_k = 2B_{k−1} − B_{k−2}`. The first check is at step 2.
#[derive(Debug, Clone)]
pub struct ExtrapolationPair {
    problem: OdeProblem,
    u: State,
    prev: Option<State>,
    n: usize,
}

impl ExtrapolationPair {
    pub fn new(problem: OdeProblem) -> Self {
        let u = State::vector(problem.u0().to_vec());
        Self {
            problem,
            u,
            prev: None,
            n: 0,
        }
    }

    fn step(&mut self, hook: &mut dyn FaultHook, with_aux: bool) -> Result<Option<StepOutput>> {
        let step = self.n + 1;
        if self.n >= self.problem.grid().n_steps {
            return Err(crate::error::Error::Finished(self.n));
        }
        hook.stored(step, &mut [self.u.values_mut()]);
        let t = self.problem.grid().t(self.n);
        let rk4 = RkTableau::classical_rk4();
        let (base, _) = combined_step(&self.problem, &rk4, self.u.values(), t, step, hook, false)?;
        let aux = match (&self.prev, with_aux) {
            (Some(prev), true) => Some(extrapolation_aux(&self.u, prev)?),
            _ => None,
        };
        let base = State::vector(base);
        self.prev = Some(std::mem::replace(&mut self.u, base));
        self.n = step;
        aux.map(|a| StepOutput::new(self.u.clone(), a, step)).transpose()
    }
}

impl PairScheme for ExtrapolationPair {
    fn name(&self) -> &str {
        "extrapolation1"
    }

    fn n_steps(&self) -> usize {
        self.problem.grid().n_steps
    }

    fn step_index(&self) -> usize {
        self.n
    }

    fn current(&self) -> &State {
        &self.u
    }

    fn first_checked_step(&self) -> usize {
        2
    }

    fn fault_targets(&self) -> FaultTargets {
        FaultTargets {
            stages: 4,
            derivative_len: self.problem.dim(),
            rhs_len: 0,
            stored_slots: vec![self.problem.dim()],
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::NoFault;
    use crate::scheme::base_trajectory;
    use crate::state::{difference_norm, Norm, TimeGrid};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn run_to_end(pair: &mut RkPair) -> Result<()> {
        while !pair.is_finished() {
            pair.advance(&mut NoFault)?;
        }
        Ok(())
    }

    fn exp_problem(h: f64, n: usize) -> OdeProblem {
        OdeProblem::new(|_, u, du| du[0] = u[0], vec![1.0], TimeGrid::new(0.0, h, n).unwrap()).unwrap()
    }

    #[test]
    fn zero_derivative_gives_zero_difference() {
        let p = OdeProblem::new(|_, _, du| du.fill(0.0), vec![0.3, -1.0], TimeGrid::new(0.0, 0.1, 3).unwrap()).unwrap();
        for tab in [RkTableau::midpoint_euler(), RkTableau::bogacki_shampine(), RkTableau::fehlberg45()] {
            let out = rk_pair_step(&p, &tab, &State::vector(vec![0.3, -1.0]), 0, &mut NoFault).unwrap();
            assert_eq!(out.base.values(), &[0.3, -1.0]);
            assert_eq!(out.difference(Norm::Infinity).unwrap(), 0.0);
        }
    }

    #[test]
    fn midpoint_euler_hand_values() {
        let p = exp_problem(0.1, 1);
        let out = rk_pair_step(&p, &RkTableau::midpoint_euler(), &State::vector(vec![1.0]), 0, &mut NoFault).unwrap();
        assert!((out.auxiliary.values()[0] - 1.1).abs() < 1e-15);
        assert!((out.base.values()[0] - 1.105).abs() < 1e-15);
        assert!((out.difference(Norm::Infinity).unwrap() - 0.005).abs() < 1e-15);
        assert_eq!(out.step_index, 1);
    }

    #[test]
    fn rkf45_reaches_e() {
        // global error of a 5th-order method with h = 0.1 on [0, 1]:
        // about e·h^5/720·10 steps ≈ 4e-7, below 1e-6
        let mut pair = RkPair::new(exp_problem(0.1, 10), RkTableau::fehlberg45()).unwrap();
        run_to_end(&mut pair).unwrap();
        assert!((pair.current().values()[0] - std::f64::consts::E).abs() < 1e-6);
    }

    #[test]
    fn stages_are_evaluated_once() {
        for tab in [RkTableau::midpoint_euler(), RkTableau::bogacki_shampine(), RkTableau::fehlberg45()] {
            let count = Arc::new(AtomicUsize::new(0));
            let c = count.clone();
            let p = OdeProblem::new(
                move |_, u, du| {
                    c.fetch_add(1, Ordering::Relaxed);
                    du[0] = -u[0];
                },
                vec![1.0],
                TimeGrid::new(0.0, 0.1, 7).unwrap(),
            )
            .unwrap();
            let s = tab.stages();
            let mut pair = RkPair::new(p, tab).unwrap();
            run_to_end(&mut pair).unwrap();
            assert_eq!(count.load(Ordering::Relaxed), 7 * s);
        }
    }

    /// Fitted slope of log(err) against log(h).
    fn slope(hs: &[f64], errs: &[f64]) -> f64 {
        let n = hs.len() as f64;
        let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn one_step_errors_have_expected_order() {
        for tab in [RkTableau::midpoint_euler(), RkTableau::bogacki_shampine(), RkTableau::fehlberg45()] {
            let hs = [0.2, 0.1, 0.05, 0.025];
            let mut base_err = Vec::new();
            let mut diffs = Vec::new();
            for &h in &hs {
                let p = exp_problem(h, 1);
                let out = rk_pair_step(&p, &tab, &State::vector(vec![1.0]), 0, &mut NoFault).unwrap();
                base_err.push((out.base.values()[0] - h.exp()).abs());
                diffs.push(out.difference(Norm::Infinity).unwrap());
            }
            let q = tab.base_order as f64;
            let qa = tab.aux_order.min(tab.base_order) as f64;
            let sb = slope(&hs, &base_err);
            let sd = slope(&hs, &diffs);
            assert!((sb - (q + 1.0)).abs() < 0.4, "{}: base slope {sb}", tab.name);
            assert!((sd - (qa + 1.0)).abs() < 0.4, "{}: difference slope {sd}", tab.name);
        }
    }

    #[test]
    fn auxiliary_never_feeds_back() {
        let grid = TimeGrid::new(0.0, 0.1, 140).unwrap();
        let p = OdeProblem::van_der_pol(2.0, [1.0, 0.0], grid);
        for tab in [RkTableau::bogacki_shampine(), RkTableau::fehlberg45()] {
            let mut with = RkPair::new(p.clone(), tab.clone()).unwrap();
            let mut without = RkPair::new(p.clone(), tab).unwrap();
            let a = base_trajectory(&mut with, true).unwrap();
            let b = base_trajectory(&mut without, false).unwrap();
            assert_eq!(a, b);
        }
        let mut with = ExtrapolationPair::new(p.clone());
        let mut without = ExtrapolationPair::new(p);
        assert_eq!(
            base_trajectory(&mut with, true).unwrap(),
            base_trajectory(&mut without, false).unwrap()
        );
    }

    #[test]
    fn extrapolation_pair_checks_from_step_two() {
        let p = OdeProblem::new(|_, _, du| du[0] = 2.0, vec![0.0], TimeGrid::new(0.0, 0.5, 6).unwrap()).unwrap();
        let mut pair = ExtrapolationPair::new(p);
        assert!(pair.advance(&mut NoFault).unwrap().is_none());
        for _ in 2..=6 {
            let out = pair.advance(&mut NoFault).unwrap().unwrap();
            // linear trajectory: extrapolation is exact up to RK4 round-off
            assert!(difference_norm(&out.base, &out.auxiliary, Norm::Infinity).unwrap() < 1e-14);
        }
    }
}
