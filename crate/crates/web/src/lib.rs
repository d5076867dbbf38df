//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Each export takes plain arguments and returns a JSON string. The work is
//! done by the `*_json` functions, which are ordinary Rust and tested
//! natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use stepguard::detector::{Detector, DetectorConfig, DetectorMode, DetectorVerdict};
use stepguard::faults::{FaultMode, FaultSpec};
use stepguard::harness::{
    kernel_regression, log_grid, preset_names, run_indexed_trial, silverman_bandwidth, summarize, ExperimentConfig,
};

/// Presets cheap enough to run in a page; Navier-Stokes is left out.
pub fn demo_presets() -> Vec<String> {
    preset_names().into_iter().filter(|n| !n.starts_with("ns-")).collect()
}

#[derive(Serialize)]
struct StepPoint {
    step: usize,
    d: f64,
    jump: Option<f64>,
    variance: Option<f64>,
    tau_j: f64,
    tau_v: f64,
    flagged: bool,
}

impl StepPoint {
    fn new(step: usize, d: f64, v: &DetectorVerdict) -> Self {
        Self {
            step,
            d,
            jump: v.jump,
            variance: v.variance,
            tau_j: v.thresholds_before.0,
            tau_v: v.thresholds_before.1,
            flagged: v.flagged,
        }
    }
}

#[derive(Serialize)]
struct TrialView {
    preset: String,
    fault_step: Option<usize>,
    factor: Option<f64>,
    lte: Option<f64>,
    detected: bool,
    false_positives: usize,
    points: Vec<StepPoint>,
}

fn detector(mode: &str, gamma_up: f64, gamma_down: f64, window_p: usize) -> Result<DetectorConfig, String> {
    let cfg = DetectorConfig {
        gamma_up,
        gamma_down,
        window_p,
        mode: mode.parse::<DetectorMode>().map_err(|e| e.to_string())?,
        ..DetectorConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// One trial of a preset. `fault_step` 0 means a clean run; `factor` 0
/// means a random draw from the preset's variance.
pub fn trial_json(preset: &str, fault_step: usize, factor: f64, seed: u64, mode: &str) -> Result<String, String> {
    let mut cfg = ExperimentConfig::named(preset).map_err(|e| e.to_string())?;
    cfg.seed = seed;
    cfg.detector = detector(mode, cfg.detector.gamma_up, cfg.detector.gamma_down, cfg.detector.window_p)?;
    if fault_step == 0 {
        cfg.fault = None;
    } else if let Some(f) = cfg.fault.as_mut() {
        f.step = Some(fault_step);
        f.factor = (factor != 0.0).then_some(factor);
    }
    let template = cfg.build_scheme().map_err(|e| e.to_string())?;
    let r = run_indexed_trial(&cfg, template.as_ref(), 0, true).map_err(|e| e.to_string())?;
    let view = TrialView {
        preset: preset.to_string(),
        fault_step: r.fault.map(|f| f.step),
        factor: r.fault.map(|f| f.factor),
        lte: r.lte_value(),
        detected: r.detected_at_fault_or_next,
        false_positives: r.false_positives,
        points: r.trace.iter().map(|t| StepPoint::new(t.step, t.d, &t.verdict)).collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Runs the detector over a user-supplied difference sequence given as
/// numbers separated by commas, spaces or newlines.
pub fn detect_json(sequence: &str, gamma_up: f64, gamma_down: f64, window_p: usize, mode: &str) -> Result<String, String> {
    let ds: Vec<f64> = sequence
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect::<Result<_, _>>()?;
    if ds.is_empty() {
        return Err("the sequence is empty".into());
    }
    let mut det = Detector::new(detector(mode, gamma_up, gamma_down, window_p)?).map_err(|e| e.to_string())?;
    let points: Vec<StepPoint> = ds.iter().enumerate().map(|(i, &d)| StepPoint::new(i + 1, d, &det.observe(d))).collect();
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct EnsembleView {
    preset: String,
    trials: usize,
    aborted: usize,
    tpr_at_fault: Option<f64>,
    tpr_fault_or_next: Option<f64>,
    fpr: f64,
    bandwidth: Option<f64>,
    /// (L, detected at fault or next) per trial with finite L.
    samples: Vec<(f64, bool)>,
    curve: Vec<(f64, f64)>,
}

/// A small sequential ensemble with its TPR-versus-L curve. `sigma2` 0
/// keeps the preset's variance.
pub fn ensemble_json(preset: &str, trials: usize, seed: u64, sigma2: f64) -> Result<String, String> {
    let mut cfg = ExperimentConfig::named(preset).map_err(|e| e.to_string())?;
    cfg.trials = trials.clamp(1, 500);
    cfg.seed = seed;
    cfg.curve_points = 60;
    if sigma2 > 0.0 {
        let mode = cfg.fault.as_ref().map(|f| f.mode).unwrap_or(FaultMode::DerivativeEval);
        cfg.fault = Some(FaultSpec::new(mode, sigma2));
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let template = cfg.build_scheme().map_err(|e| e.to_string())?;
    let records = (0..cfg.trials as u64)
        .map(|i| run_indexed_trial(&cfg, template.as_ref(), i, false))
        .collect::<stepguard::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let s = summarize(cfg, records).map_err(|e| e.to_string())?;
    let samples: Vec<(f64, bool)> = s
        .records
        .iter()
        .filter(|r| r.detection_decided())
        .filter_map(|r| r.lte_value().filter(|l| l.is_finite()).map(|l| (l, r.detected_at_fault_or_next)))
        .collect();
    let view = EnsembleView {
        preset: preset.to_string(),
        trials: s.aggregate.trials,
        aborted: s.aggregate.aborted,
        tpr_at_fault: s.aggregate.tpr_at_fault,
        tpr_fault_or_next: s.aggregate.tpr_fault_or_next,
        fpr: s.aggregate.fpr,
        bandwidth: s.bandwidth,
        samples,
        curve: s.curve.iter().map(|c| (c.l, c.tpr_fault_or_next)).collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Kernel-regression curve through `(x, y)` pairs given as flat
/// `x0, y0, x1, y1, ...`; bandwidth 0 uses Silverman's rule.
pub fn regression_json(pairs: &[f64], bandwidth: f64, points: usize) -> Result<String, String> {
    if pairs.len() < 2 || pairs.len() % 2 != 0 {
        return Err("expected an even, non-empty list of numbers".into());
    }
    let pts: Vec<(f64, f64)> = pairs.chunks(2).map(|c| (c[0], c[1])).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let h = if bandwidth > 0.0 { bandwidth } else { silverman_bandwidth(&xs) };
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grid = log_grid(lo, hi, points.max(2));
    let ys = kernel_regression(&pts, h, &grid).map_err(|e| e.to_string())?;
    serde_json::to_string(&grid.into_iter().zip(ys).collect::<Vec<_>>()).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn presets() -> String {
    serde_json::to_string(&demo_presets()).expect("strings serialize")
}

#[wasm_bindgen]
pub fn trial(preset: &str, fault_step: usize, factor: f64, seed: u64, mode: &str) -> Result<String, JsValue> {
    js(trial_json(preset, fault_step, factor, seed, mode))
}

#[wasm_bindgen]
pub fn detect(sequence: &str, gamma_up: f64, gamma_down: f64, window_p: usize, mode: &str) -> Result<String, JsValue> {
    js(detect_json(sequence, gamma_up, gamma_down, window_p, mode))
}

#[wasm_bindgen]
pub fn ensemble(preset: &str, trials: usize, seed: u64, sigma2: f64) -> Result<String, JsValue> {
    js(ensemble_json(preset, trials, seed, sigma2))
}

#[wasm_bindgen]
pub fn regression(pairs: &[f64], bandwidth: f64, points: usize) -> Result<String, JsValue> {
    js(regression_json(pairs, bandwidth, points))
}
