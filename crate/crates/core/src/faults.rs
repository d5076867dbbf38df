//! Single-shot multiplicative fault injection and the LTE-normalized error.
//!
//! A fault multiplies one component of one quantity by a factor drawn from
//! `Normal(1, σ²)`. The corrupted quantity is chosen by [`FaultMode`]; the
//! step, stage, stored slot and component are either fixed in the
//! [`FaultSpec`] or drawn uniformly. Randomness comes from ChaCha8 seeded
//! per trial, so a (seed, spec, scheme) triple replays exactly.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::{FaultHook, FaultTargets};
use crate::state::{difference_norm, Norm, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultMode {
    /// One evaluation of the derivative `f` or the source term `q`.
    DerivativeEval,
    /// The right-hand side of the base scheme's linear solve.
    LinearRhs,
    /// Stored data: the previous solution, or a stored derivative.
    PreviousSolution,
}

impl FaultMode {
    pub fn id(self) -> &'static str {
        match self {
            FaultMode::DerivativeEval => "derivative-eval",
            FaultMode::LinearRhs => "linear-rhs",
            FaultMode::PreviousSolution => "previous-solution",
        }
    }
}

impl fmt::Display for FaultMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FaultMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derivative-eval" => Ok(FaultMode::DerivativeEval),
            "linear-rhs" => Ok(FaultMode::LinearRhs),
            "previous-solution" => Ok(FaultMode::PreviousSolution),
            _ => Err(Error::Config(format!("unknown fault mode {s:?}"))),
        }
    }
}

/// Fault description as it appears in experiment configs. Unset targets
/// are drawn uniformly; indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub mode: FaultMode,
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    /// Fixed multiplier replacing the random draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
}

impl FaultSpec {
    pub fn new(mode: FaultMode, sigma2: f64) -> Self {
        Self {
            mode,
            sigma2,
            step: None,
            stage: None,
            slot: None,
            component: None,
            factor: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!("fault variance must be positive, got {}", self.sigma2)));
        }
        if let Some(f) = self.factor {
            if !f.is_finite() {
                return Err(Error::Config(format!("fault factor must be finite, got {f}")));
            }
        }
        Ok(())
    }

    /// Draws the concrete fault. Draw order is fixed: factor, step, stage,
    /// slot, component, so the factor sequence over trials does not depend
    /// on the scheme.
    pub fn resolve(
        &self,
        targets: &FaultTargets,
        steps: RangeInclusive<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Result<ResolvedFault> {
        self.validate()?;
        if steps.is_empty() {
            return Err(Error::Config(format!(
                "no checked steps available for a fault (range {}..={})",
                steps.start(),
                steps.end()
            )));
        }
        let drawn = Normal::new(1.0, self.sigma2.sqrt())
            .map_err(|e| Error::Config(e.to_string()))?
            .sample(rng);
        let factor = self.factor.unwrap_or(drawn);

        let step = match self.step {
            Some(s) if steps.contains(&s) => s,
            Some(s) => {
                return Err(Error::Config(format!(
                    "fault step {s} outside the checked range {}..={}",
                    steps.start(),
                    steps.end()
                )))
            }
            None => rng.gen_range(steps),
        };

        let pick = |fixed: Option<usize>, len: usize, what: &str, rng: &mut ChaCha8Rng| -> Result<usize> {
            match fixed {
                Some(i) if i < len => Ok(i),
                Some(i) => Err(Error::Config(format!("fault {what} {i} out of range (< {len})"))),
                None => Ok(rng.gen_range(0..len)),
            }
        };
        let unsupported = || Error::Config(format!("scheme has no target for fault mode {}", self.mode));

        let (stage, slot, len) = match self.mode {
            FaultMode::DerivativeEval => {
                if targets.stages == 0 || targets.derivative_len == 0 {
                    return Err(unsupported());
                }
                (pick(self.stage, targets.stages, "stage", rng)?, 0, targets.derivative_len)
            }
            FaultMode::LinearRhs => {
                if targets.rhs_len == 0 {
                    return Err(unsupported());
                }
                (0, 0, targets.rhs_len)
            }
            FaultMode::PreviousSolution => {
                if targets.stored_slots.is_empty() {
                    return Err(unsupported());
                }
                let slot = pick(self.slot, targets.stored_slots.len(), "slot", rng)?;
                (0, slot, targets.stored_slots[slot])
            }
        };
        let component = pick(self.component, len, "component", rng)?;
        Ok(ResolvedFault {
            mode: self.mode,
            step,
            stage,
            slot,
            component,
            factor,
        })
    }
}

/// A fully determined fault.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedFault {
    pub mode: FaultMode,
    pub step: usize,
    pub stage: usize,
    pub slot: usize,
    pub component: usize,
    pub factor: f64,
}

/// Generator for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial))
}

/// Multiplies `values[component]` by `factor`.
pub fn corrupt(values: &mut [f64], component: usize, factor: f64) {
    values[component] *= factor;
}

/// Hook applying one [`ResolvedFault`] and counting how often it fired.
#[derive(Debug, Clone)]
pub struct Injector {
    fault: ResolvedFault,
    injections: usize,
}

impl Injector {
    pub fn new(fault: ResolvedFault) -> Self {
        Self { fault, injections: 0 }
    }

    pub fn fault(&self) -> &ResolvedFault {
        &self.fault
    }

    pub fn injections(&self) -> usize {
        self.injections
    }

    fn hit(&mut self, values: &mut [f64]) {
        corrupt(values, self.fault.component, self.fault.factor);
        self.injections += 1;
    }
}

impl FaultHook for Injector {
    fn derivative(&mut self, step: usize, stage: usize, values: &mut [f64]) {
        if self.fault.mode == FaultMode::DerivativeEval && step == self.fault.step && stage == self.fault.stage {
            self.hit(values);
        }
    }

    fn linear_rhs(&mut self, step: usize, rhs: &mut [f64]) {
        if self.fault.mode == FaultMode::LinearRhs && step == self.fault.step {
            self.hit(rhs);
        }
    }

    fn stored(&mut self, step: usize, slots: &mut [&mut [f64]]) {
        if self.fault.mode == FaultMode::PreviousSolution && step == self.fault.step {
            if let Some(slot) = slots.get_mut(self.fault.slot) {
                corrupt(slot, self.fault.component, self.fault.factor);
                self.injections += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LteNormalizedError {
    pub value: f64,
    pub step: usize,
    pub numerator: f64,
    pub denominator: f64,
}

/// `‖B − B̂‖ / ‖B̂ − Â‖`. An unchanged base gives 0; a vanishing
/// denominator under a changed base gives `+∞`.
pub fn lte_normalized_error(
    faulty_base: &State,
    clean_base: &State,
    clean_aux: &State,
    norm: Norm,
    step: usize,
) -> Result<LteNormalizedError> {
    let numerator = difference_norm(faulty_base, clean_base, norm)?;
    let denominator = difference_norm(clean_base, clean_aux, norm)?;
    let value = if numerator == 0.0 {
        0.0
    } else if denominator == 0.0 {
        f64::INFINITY
    } else {
        numerator / denominator
    };
    Ok(LteNormalizedError {
        value,
        step,
        numerator,
        denominator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{HeatPair, HeatPreset, HeatScheme};
    use crate::ode::{AbPair, OdeProblem, RkPair, RkTableau};
    use crate::scheme::{base_trajectory, NoFault, PairScheme};
    use crate::state::TimeGrid;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn targets() -> FaultTargets {
        FaultTargets {
            stages: 6,
            derivative_len: 2,
            rhs_len: 0,
            stored_slots: vec![2],
        }
    }

    #[test]
    fn zero_variance_is_rejected() {
        assert!(FaultSpec::new(FaultMode::LinearRhs, 0.0).validate().is_err());
        assert!(FaultSpec::new(FaultMode::LinearRhs, -1.0).validate().is_err());
    }

    #[test]
    fn unsupported_mode_and_bad_step_are_config_errors() {
        let mut rng = trial_rng(1, 0);
        let spec = FaultSpec::new(FaultMode::LinearRhs, 0.1);
        assert!(matches!(spec.resolve(&targets(), 5..=10, &mut rng), Err(Error::Config(_))));
        let spec = FaultSpec {
            step: Some(3),
            ..FaultSpec::new(FaultMode::DerivativeEval, 0.1)
        };
        assert!(spec.resolve(&targets(), 5..=10, &mut rng).is_err());
        assert!(FaultSpec::new(FaultMode::DerivativeEval, 0.1).resolve(&targets(), 5..=4, &mut rng).is_err());
    }

    #[test]
    fn equal_seeds_give_equal_faults() {
        let spec = FaultSpec::new(FaultMode::DerivativeEval, 0.1);
        let a = spec.resolve(&targets(), 12..=139, &mut trial_rng(9, 4)).unwrap();
        let b = spec.resolve(&targets(), 12..=139, &mut trial_rng(9, 4)).unwrap();
        assert_eq!(a, b);
        let c = spec.resolve(&targets(), 12..=139, &mut trial_rng(9, 5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn factor_sequence_is_independent_of_scheme_targets() {
        let spec = FaultSpec::new(FaultMode::DerivativeEval, 0.1);
        let other = FaultTargets {
            stages: 1,
            derivative_len: 99,
            rhs_len: 0,
            stored_slots: vec![],
        };
        for t in 0..20 {
            let a = spec.resolve(&targets(), 12..=139, &mut trial_rng(3, t)).unwrap();
            let b = spec.resolve(&other, 12..=279, &mut trial_rng(3, t)).unwrap();
            assert_eq!(a.factor, b.factor);
        }
    }

    #[test]
    fn draws_follow_requested_variance() {
        let spec = FaultSpec::new(FaultMode::DerivativeEval, 0.1);
        let mut rng = trial_rng(11, 0);
        let xs: Vec<f64> = (0..20000)
            .map(|_| spec.resolve(&targets(), 12..=139, &mut rng).unwrap().factor)
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!((var - 0.1).abs() < 0.005, "{var}");
    }

    #[test]
    fn lte_values() {
        let v = |x: f64| State::vector(vec![x]);
        let l = lte_normalized_error(&v(1.1), &v(1.0), &v(0.95), Norm::Infinity, 3).unwrap();
        assert!((l.value - 2.0).abs() < 1e-12);
        assert_eq!(lte_normalized_error(&v(1.0), &v(1.0), &v(0.9), Norm::Infinity, 3).unwrap().value, 0.0);
        assert_eq!(lte_normalized_error(&v(1.0), &v(2.0), &v(2.0), Norm::Infinity, 3).unwrap().value, f64::INFINITY);
        // ‖B − B̂‖ = 3·‖B̂ − Â‖
        let l = lte_normalized_error(&v(1.75), &v(1.0), &v(0.75), Norm::Infinity, 3).unwrap();
        assert_eq!(l.value, 3.0);
    }

    fn vdp_rk45() -> RkPair {
        let grid = TimeGrid::spanning(0.0, 14.0, 0.1).unwrap();
        RkPair::new(OdeProblem::van_der_pol(2.0, [1.0, 0.0], grid), RkTableau::fehlberg45()).unwrap()
    }

    fn fault(mode: FaultMode, step: usize, factor: f64) -> ResolvedFault {
        ResolvedFault {
            mode,
            step,
            stage: 2,
            slot: 0,
            component: 1,
            factor,
        }
    }

    #[test]
    fn unit_factor_leaves_trajectory_untouched() {
        let mut clean = vdp_rk45();
        let expected = base_trajectory(&mut clean, true).unwrap();
        for mode in [FaultMode::DerivativeEval, FaultMode::PreviousSolution] {
            let mut s = vdp_rk45();
            let mut inj = Injector::new(fault(mode, 40, 1.0));
            let mut traj = vec![s.current().clone()];
            while !s.is_finished() {
                s.advance(&mut inj).unwrap();
                traj.push(s.current().clone());
            }
            assert_eq!(traj, expected);
            assert_eq!(inj.injections(), 1);
        }
    }

    #[test]
    fn exactly_one_injection_and_identical_prefix() {
        let mut clean = vdp_rk45();
        let expected = base_trajectory(&mut clean, true).unwrap();
        let mut s = vdp_rk45();
        let mut inj = Injector::new(fault(FaultMode::DerivativeEval, 40, 1.5));
        let mut traj = vec![s.current().clone()];
        while !s.is_finished() {
            s.advance(&mut inj).unwrap();
            traj.push(s.current().clone());
        }
        assert_eq!(inj.injections(), 1);
        assert_eq!(traj[..40], expected[..40]);
        assert_ne!(traj[40], expected[40]);
    }

    #[test]
    fn derivative_fault_does_not_add_evaluations() {
        let count = Arc::new(AtomicUsize::new(0));
        let c = count.clone();
        let grid = TimeGrid::spanning(0.0, 1.0, 0.1).unwrap();
        let p = OdeProblem::new(
            move |_, u, du| {
                c.fetch_add(1, Ordering::Relaxed);
                du[0] = -u[0];
            },
            vec![1.0],
            grid,
        )
        .unwrap();
        let run = |hook: &mut dyn FaultHook| {
            let mut s = RkPair::new(p.clone(), RkTableau::fehlberg45()).unwrap();
            while !s.is_finished() {
                s.advance(hook).unwrap();
            }
        };
        run(&mut NoFault);
        let clean = count.swap(0, Ordering::Relaxed);
        let mut inj = Injector::new(ResolvedFault {
            component: 0,
            ..fault(FaultMode::DerivativeEval, 5, 2.0)
        });
        run(&mut inj);
        assert_eq!(count.load(Ordering::Relaxed), clean);
    }

    #[test]
    fn linear_rhs_fault_leaves_explicit_auxiliary_clean() {
        let p = HeatPreset::Cfg2.problem(1.0 / 200.0).unwrap();
        let mut clean = HeatScheme::new(p.clone(), HeatPair::FeBe);
        let mut faulty = clean.clone();
        for _ in 0..49 {
            clean.advance(&mut NoFault).unwrap();
            faulty.advance(&mut NoFault).unwrap();
        }
        let mut inj = Injector::new(ResolvedFault {
            component: 17,
            ..fault(FaultMode::LinearRhs, 50, 1.01)
        });
        let a = clean.advance(&mut NoFault).unwrap().unwrap();
        let b = faulty.advance(&mut inj).unwrap().unwrap();
        assert_eq!(inj.injections(), 1);
        assert_eq!(a.auxiliary, b.auxiliary);
        assert_ne!(a.base, b.base);
    }

    #[test]
    fn heat_source_fault_reaches_forward_euler_one_step_late() {
        let p = HeatPreset::Cfg1.problem(1.0 / 100.0).unwrap();
        let mut clean = HeatScheme::new(p, HeatPair::FeBe);
        let mut faulty = clean.clone();
        let mut inj = Injector::new(ResolvedFault {
            stage: 0,
            component: 12,
            ..fault(FaultMode::DerivativeEval, 30, 1.3)
        });
        for k in 1..=31 {
            let a = clean.advance(&mut NoFault).unwrap().unwrap();
            let b = faulty.advance(&mut inj).unwrap().unwrap();
            if k == 30 {
                assert_eq!(a.auxiliary, b.auxiliary);
                assert_ne!(a.base, b.base);
            }
            if k == 31 {
                // the cached source value is consumed by the explicit scheme
                let fe_clean = a.auxiliary.values()[12] - a.base.values()[12];
                let fe_faulty = b.auxiliary.values()[12] - b.base.values()[12];
                assert!((fe_faulty - fe_clean).abs() > 0.0);
                assert_eq!(inj.injections(), 1);
            }
        }
    }

    #[test]
    fn multistep_derivative_slot_corruption_persists() {
        let grid = TimeGrid::spanning(0.0, 14.0, 0.05).unwrap();
        let problem = OdeProblem::van_der_pol(2.0, [1.0, 0.0], grid);
        let mut s = AbPair::new(problem, 4, 5).unwrap();
        assert_eq!(s.fault_targets().stored_slots.len(), 5);
        let mut clean = s.clone();
        let mut inj = Injector::new(ResolvedFault {
            slot: 3,
            component: 0,
            ..fault(FaultMode::PreviousSolution, 60, 1.2)
        });
        let mut diffs = 0;
        while !s.is_finished() {
            let a = clean.advance(&mut NoFault).unwrap();
            let b = s.advance(&mut inj).unwrap();
            if s.step_index() < 60 {
                assert_eq!(a, b);
            } else if a != b {
                diffs += 1;
            }
        }
        assert!(diffs > 100);
        assert_eq!(inj.injections(), 1);
    }

    proptest! {
        #[test]
        fn multiplicative_faults_stay_finite(x in -1e100f64..1e100, seed in 0u64..1000) {
            let f = FaultSpec::new(FaultMode::DerivativeEval, 2.0)
                .resolve(&targets(), 12..=139, &mut trial_rng(seed, 0))
                .unwrap();
            let mut v = [x, x];
            corrupt(&mut v, f.component, f.factor);
            prop_assert!(v.iter().all(|y| y.is_finite()));
        }
    }
}
