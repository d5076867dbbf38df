//! One trial: a full run of a pair with the detector attached and at most
//! one injected fault, plus the one-step shadow run that measures `L`.

use std::ops::RangeInclusive;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::detector::{Detector, DetectorConfig, DetectorVerdict};
use crate::error::Result;
use crate::faults::{lte_normalized_error, Injector, LteNormalizedError, ResolvedFault};
use crate::scheme::{FaultHook, NoFault, PairScheme};
use crate::state::Norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    Completed,
    /// The solver broke down (non-finite state or failed solve) at `step`.
    Aborted { step: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub d: f64,
    pub verdict: DetectorVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub fault: Option<ResolvedFault>,
    pub lte: Option<LteNormalizedError>,
    pub flagged_steps: Vec<usize>,
    pub detected_at_fault: bool,
    pub detected_at_fault_or_next: bool,
    /// Flags at steps other than the fault step and the one after.
    pub false_positives: usize,
    /// Post-warm-up steps other than the fault step and the one after.
    pub checked_steps: usize,
    pub n_steps: usize,
    pub status: TrialStatus,
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<StepTrace>,
}

impl TrialRecord {
    pub fn is_completed(&self) -> bool {
        self.status == TrialStatus::Completed
    }

    /// Whether the verdicts at the fault step and the one after were seen,
    /// so the trial counts toward TPR even if it broke down later.
    pub fn detection_decided(&self) -> bool {
        match (self.fault, &self.status) {
            (None, _) => false,
            (Some(_), TrialStatus::Completed) => true,
            (Some(f), TrialStatus::Aborted { step, .. }) => *step > f.step + 1 && self.lte.is_some(),
        }
    }

    pub fn lte_value(&self) -> Option<f64> {
        self.lte.map(|l| l.value)
    }
}

/// Steps eligible for a fault: after the detector's warm-up, and not the
/// last step so the step after the fault is still observed.
pub fn fault_step_range(scheme: &dyn PairScheme, detector: &DetectorConfig) -> RangeInclusive<usize> {
    let first = scheme.first_checked_step() + detector.window_p + 1;
    first..=scheme.n_steps().saturating_sub(1)
}

// std::time::Instant panics on wasm32-unknown-unknown
#[cfg(not(target_arch = "wasm32"))]
fn clock() -> Option<Instant> {
    Some(Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn clock() -> Option<Instant> {
    None
}

/// Options for [`run_trial`].
#[derive(Debug, Clone, Copy, Default)]
pub struct TrialOptions {
    pub trial: u64,
    pub seed: u64,
    pub norm: Norm,
    /// Keep the per-step difference and verdict trace.
    pub trace: bool,
}

/// Runs `template` (cloned, so it may be reused) to the end.
pub fn run_trial(
    template: &dyn PairScheme,
    detector: &DetectorConfig,
    fault: Option<ResolvedFault>,
    opts: TrialOptions,
) -> Result<TrialRecord> {
    let started = clock();
    let mut scheme = template.clone_box();
    let mut det = Detector::new(*detector)?;
    let mut injector = fault.map(Injector::new);
    let fault_step = fault.map(|f| f.step);

    let mut record = TrialRecord {
        trial: opts.trial,
        seed: opts.seed,
        fault,
        lte: None,
        flagged_steps: Vec::new(),
        detected_at_fault: false,
        detected_at_fault_or_next: false,
        false_positives: 0,
        checked_steps: 0,
        n_steps: scheme.n_steps(),
        status: TrialStatus::Completed,
        wall_time: Duration::ZERO,
        trace: Vec::new(),
    };
    let near_fault = |s: usize| fault_step.is_some_and(|k| s == k || s == k + 1);

    while !scheme.is_finished() {
        let step = scheme.step_index() + 1;
        let shadow = if fault_step == Some(step) {
            let mut clean = scheme.clone_box();
            Some(clean.advance(&mut NoFault)?)
        } else {
            None
        };
        let hook: &mut dyn FaultHook = match injector.as_mut() {
            Some(inj) => inj,
            None => &mut NoFault,
        };
        let out = match scheme.advance(hook) {
            Ok(out) => out,
            Err(e) if e.is_numerical_breakdown() => {
                record.status = TrialStatus::Aborted {
                    step,
                    reason: e.to_string(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        if let (Some(Some(clean)), Some(faulty)) = (shadow, out.as_ref()) {
            record.lte = Some(lte_normalized_error(&faulty.base, &clean.base, &clean.auxiliary, opts.norm, step)?);
        }
        let Some(out) = out else { continue };
        let d = out.difference(opts.norm)?;
        let verdict = det.observe(d);
        let checked = !verdict.is_warm_up();
        if verdict.flagged {
            record.flagged_steps.push(step);
            if fault_step == Some(step) {
                record.detected_at_fault = true;
            }
            if near_fault(step) {
                record.detected_at_fault_or_next = true;
            } else {
                record.false_positives += 1;
            }
        }
        if checked && !near_fault(step) {
            record.checked_steps += 1;
        }
        if opts.trace {
            record.trace.push(StepTrace { step, d, verdict });
        }
    }
    if let Some(inj) = &injector {
        if record.is_completed() {
            debug_assert_eq!(inj.injections(), 1, "fault must fire exactly once");
        }
    }
    record.wall_time = started.map(|s| s.elapsed()).unwrap_or_default();
    Ok(record)
}
