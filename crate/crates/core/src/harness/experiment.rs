//! Trial ensembles, aggregate rates, binned TPR and the detector ablation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::regression::{kernel_regression, log_grid, silverman_bandwidth};
use super::trial::{fault_step_range, run_trial, TrialOptions, TrialRecord};
use crate::detector::DetectorMode;
use crate::error::Result;
use crate::faults::trial_rng;

/// Bin edges for the coarse TPR-versus-L table.
pub const L_BINS: [(f64, f64); 3] = [(0.0, 1.0), (1.0, 3.0), (3.0, f64::INFINITY)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub completed: usize,
    pub aborted: usize,
    /// Faulty trials whose detection outcome was observed, including ones
    /// that broke down more than a step after the fault.
    pub faulty: usize,
    pub tpr_at_fault: Option<f64>,
    pub tpr_fault_or_next: Option<f64>,
    pub false_positives: usize,
    pub checked_steps: usize,
    pub fpr: f64,
    /// Faulty trials with an infinite L, left out of the curve.
    pub infinite_l: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub detected: usize,
    pub tpr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub l: f64,
    pub tpr_at_fault: f64,
    pub tpr_fault_or_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    pub bandwidth: Option<f64>,
    pub curve: Vec<CurvePoint>,
    pub bins: Vec<BinStat>,
}

fn faulty_decided(records: &[TrialRecord]) -> impl Iterator<Item = &TrialRecord> {
    records.iter().filter(|r| r.detection_decided())
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn aggregate(records: &[TrialRecord]) -> Aggregate {
    let completed = records.iter().filter(|r| r.is_completed()).count();
    let faulty: Vec<&TrialRecord> = faulty_decided(records).collect();
    let at = faulty.iter().filter(|r| r.detected_at_fault).count();
    let next = faulty.iter().filter(|r| r.detected_at_fault_or_next).count();
    let done = records.iter().filter(|r| r.is_completed());
    let false_positives = done.clone().map(|r| r.false_positives).sum();
    let checked_steps = done.map(|r| r.checked_steps).sum();
    Aggregate {
        trials: records.len(),
        completed,
        aborted: records.len() - completed,
        faulty: faulty.len(),
        tpr_at_fault: ratio(at, faulty.len()),
        tpr_fault_or_next: ratio(next, faulty.len()),
        false_positives,
        checked_steps,
        fpr: ratio(false_positives, checked_steps).unwrap_or(0.0),
        infinite_l: faulty.iter().filter(|r| r.lte_value().is_some_and(f64::is_infinite)).count(),
    }
}

/// TPR (fault step or the next) over faulty trials whose L satisfies `keep`.
pub fn tpr_where(records: &[TrialRecord], keep: impl Fn(f64) -> bool) -> Option<f64> {
    let sel: Vec<&TrialRecord> = faulty_decided(records)
        .filter(|r| r.lte_value().is_some_and(&keep))
        .collect();
    ratio(sel.iter().filter(|r| r.detected_at_fault_or_next).count(), sel.len())
}

pub fn binned_tpr(records: &[TrialRecord]) -> Vec<BinStat> {
    L_BINS
        .iter()
        .map(|&(lo, hi)| {
            let sel: Vec<&TrialRecord> = faulty_decided(records)
                .filter(|r| r.lte_value().is_some_and(|l| l >= lo && l < hi || (hi.is_infinite() && l.is_infinite())))
                .collect();
            let detected = sel.iter().filter(|r| r.detected_at_fault_or_next).count();
            BinStat {
                lo,
                hi,
                count: sel.len(),
                detected,
                tpr: ratio(detected, sel.len()),
            }
        })
        .collect()
}

/// Whether the TPR of populated bins never decreases with L.
pub fn bins_monotone(bins: &[BinStat]) -> bool {
    let tprs: Vec<f64> = bins.iter().filter_map(|b| b.tpr).collect();
    tprs.windows(2).all(|w| w[1] >= w[0])
}

fn curve(records: &[TrialRecord], bandwidth: Option<f64>, n: usize) -> Result<(Option<f64>, Vec<CurvePoint>)> {
    let pts: Vec<(f64, bool, bool)> = faulty_decided(records)
        .filter_map(|r| {
            r.lte_value()
                .filter(|l| l.is_finite())
                .map(|l| (l, r.detected_at_fault, r.detected_at_fault_or_next))
        })
        .collect();
    if pts.is_empty() {
        return Ok((None, Vec::new()));
    }
    let ls: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(&ls));
    let lo = ls.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grid = log_grid(lo, hi, n);
    let at: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.1 as u8 as f64)).collect();
    let next: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.2 as u8 as f64)).collect();
    let ya = kernel_regression(&at, h, &grid)?;
    let yn = kernel_regression(&next, h, &grid)?;
    Ok((
        Some(h),
        grid.into_iter()
            .zip(ya.into_iter().zip(yn))
            .map(|(l, (a, n))| CurvePoint {
                l,
                tpr_at_fault: a,
                tpr_fault_or_next: n,
            })
            .collect(),
    ))
}

pub fn summarize(config: ExperimentConfig, records: Vec<TrialRecord>) -> Result<ExperimentSummary> {
    let (bandwidth, curve) = curve(&records, config.bandwidth, config.curve_points)?;
    Ok(ExperimentSummary {
        aggregate: aggregate(&records),
        bins: binned_tpr(&records),
        bandwidth,
        curve,
        records,
        config,
    })
}

/// Runs trial `i` of `config` on a prebuilt scheme.
pub fn run_indexed_trial(
    config: &ExperimentConfig,
    template: &dyn crate::scheme::PairScheme,
    i: u64,
    trace: bool,
) -> Result<TrialRecord> {
    let fault = match &config.fault {
        Some(spec) => {
            let range = fault_step_range(template, &config.detector);
            Some(spec.resolve(&template.fault_targets(), range, &mut trial_rng(config.seed, i))?)
        }
        None => None,
    };
    run_trial(
        template,
        &config.detector,
        fault,
        TrialOptions {
            trial: i,
            seed: config.seed.wrapping_add(i),
            norm: config.norm,
            trace,
        },
    )
}

/// Runs every trial in parallel; results are ordered by trial index.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let template = config.build_scheme()?;
    let records = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| run_indexed_trial(config, template.as_ref(), i, false))
        .collect::<Result<Vec<_>>>()?;
    summarize(config.clone(), records)
}

/// The same fault stream under the three detector modes.
pub fn run_ablation(config: &ExperimentConfig) -> Result<[ExperimentSummary; 3]> {
    let run = |mode| run_experiment(&ExperimentConfig {
        detector: config.detector.with_mode(mode),
        ..config.clone()
    });
    Ok([
        run(DetectorMode::Both)?,
        run(DetectorMode::JumpOnly)?,
        run(DetectorMode::VarianceOnly)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faults::{FaultMode, ResolvedFault};
    use crate::harness::trial::TrialStatus;
    use std::time::Duration;

    fn rec(l: Option<f64>, at: bool, next: bool) -> TrialRecord {
        TrialRecord {
            trial: 0,
            seed: 0,
            fault: Some(ResolvedFault {
                mode: FaultMode::LinearRhs,
                step: 20,
                stage: 0,
                slot: 0,
                component: 0,
                factor: 1.1,
            }),
            lte: l.map(|value| crate::faults::LteNormalizedError {
                value,
                step: 20,
                numerator: value,
                denominator: 1.0,
            }),
            flagged_steps: vec![],
            detected_at_fault: at,
            detected_at_fault_or_next: next,
            false_positives: 1,
            checked_steps: 50,
            n_steps: 100,
            status: TrialStatus::Completed,
            wall_time: Duration::ZERO,
            trace: vec![],
        }
    }

    #[test]
    fn rates_are_ratios() {
        let mut rs: Vec<TrialRecord> = (0..8).map(|_| rec(Some(2.0), false, true)).collect();
        rs.extend((0..2).map(|_| rec(Some(2.0), false, false)));
        let a = aggregate(&rs);
        assert_eq!(a.tpr_fault_or_next, Some(0.8));
        assert_eq!(a.tpr_at_fault, Some(0.0));
        assert_eq!(a.fpr, 10.0 / 500.0);
    }

    #[test]
    fn clean_ensemble_has_no_tpr() {
        let mut r = rec(None, false, false);
        r.fault = None;
        let a = aggregate(&[r]);
        assert_eq!(a.tpr_fault_or_next, None);
        assert_eq!(a.fpr, 1.0 / 50.0);
    }

    #[test]
    fn aborted_trials_are_counted_apart() {
        let mut bad = rec(Some(5.0), false, false);
        bad.status = TrialStatus::Aborted {
            step: 3,
            reason: "x".into(),
        };
        let a = aggregate(&[bad, rec(Some(5.0), true, true)]);
        assert_eq!((a.aborted, a.faulty, a.tpr_fault_or_next), (1, 1, Some(1.0)));
        assert_eq!(a.checked_steps, 50);

        // a breakdown well after the fault keeps its verdict but not its steps
        let mut late = rec(Some(5.0), false, false);
        late.status = TrialStatus::Aborted {
            step: 40,
            reason: "x".into(),
        };
        let a = aggregate(&[late, rec(Some(5.0), true, true)]);
        assert_eq!((a.aborted, a.faulty, a.tpr_fault_or_next), (1, 2, Some(0.5)));
        assert_eq!(a.checked_steps, 50);
    }

    #[test]
    fn bins_and_monotonicity() {
        let rs = vec![
            rec(Some(0.5), false, false),
            rec(Some(0.7), false, true),
            rec(Some(2.0), false, true),
            rec(Some(f64::INFINITY), true, true),
            rec(Some(30.0), true, true),
        ];
        let bins = binned_tpr(&rs);
        assert_eq!(bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![2, 1, 2]);
        assert_eq!(bins[0].tpr, Some(0.5));
        assert!(bins_monotone(&bins));
        assert_eq!(tpr_where(&rs, |l| l > 3.0), Some(1.0));
        assert!(!bins_monotone(&binned_tpr(&[rec(Some(0.1), true, true), rec(Some(4.0), false, false)])));
    }

    #[test]
    fn curve_excludes_infinite_l() {
        let rs = vec![rec(Some(0.5), false, false), rec(Some(f64::INFINITY), true, true), rec(Some(4.0), true, true)];
        let (h, c) = curve(&rs, Some(0.5), 10).unwrap();
        assert_eq!(h, Some(0.5));
        assert_eq!(c.len(), 10);
        assert_eq!(c[0].l, 0.5);
        assert_eq!(c[9].l, 4.0);
        assert_eq!(aggregate(&rs).infinite_l, 1);
    }
}
