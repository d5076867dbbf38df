//! Two-indicator detector with closed-loop threshold tuning.
//!
//! For each new difference `d = D_{n+1}` the detector computes the relative
//! jump `J = (D_{n+1} − D_n)/D_n` and the variance change
//! `V = Var(D_{n−p+1..n+1}) / Var(D_{n−p..n})`. A step is flagged when both
//! exceed their thresholds. Each threshold moves toward its indicator:
//! multiplied by `Γ` when exceeded, by `γ` when not, so thresholds sit just
//! above typical values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::DifferenceWindow;

/// Denominators below this count as zero.
pub const EPS_ZERO: f64 = 1e-300;

/// Which indicators must exceed their thresholds for a flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorMode {
    #[default]
    Both,
    JumpOnly,
    VarianceOnly,
}

impl DetectorMode {
    pub const ALL: [DetectorMode; 3] = [DetectorMode::Both, DetectorMode::JumpOnly, DetectorMode::VarianceOnly];

    pub fn id(self) -> &'static str {
        match self {
            DetectorMode::Both => "both",
            DetectorMode::JumpOnly => "jump-only",
            DetectorMode::VarianceOnly => "variance-only",
        }
    }
}

impl fmt::Display for DetectorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DetectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(DetectorMode::Both),
            "jump-only" | "jump" => Ok(DetectorMode::JumpOnly),
            "variance-only" | "variance" => Ok(DetectorMode::VarianceOnly),
            _ => Err(Error::Config(format!("unknown detector mode {s:?}"))),
        }
    }
}

/// Threshold handling on a flagged step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FlagUpdate {
    /// Update thresholds on every checked step, flagged or not.
    #[default]
    Always,
    /// Leave thresholds unchanged on a flagged step, as if the step were
    /// about to be recomputed. Without recomputation a run of flags keeps
    /// the thresholds pinned low; single-indicator modes can then only
    /// ever decrease theirs.
    Freeze,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Threshold increase factor `Γ > 1`.
    pub gamma_up: f64,
    /// Threshold decrease factor `0 < γ < 1`.
    pub gamma_down: f64,
    /// Window parameter `p`; the window holds `p + 1` differences.
    pub window_p: usize,
    pub tau_j0: f64,
    pub tau_v0: f64,
    pub mode: DetectorMode,
    pub on_flag: FlagUpdate,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            gamma_up: 1.4,
            gamma_down: 0.95,
            window_p: 10,
            tau_j0: 1.0,
            tau_v0: 1.0,
            mode: DetectorMode::Both,
            on_flag: FlagUpdate::Always,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_up > 1.0 && self.gamma_up.is_finite()) {
            return Err(Error::Config(format!("gamma_up must exceed 1, got {}", self.gamma_up)));
        }
        if !(self.gamma_down > 0.0 && self.gamma_down < 1.0) {
            return Err(Error::Config(format!("gamma_down must lie in (0, 1), got {}", self.gamma_down)));
        }
        if self.window_p < 2 {
            return Err(Error::Config(format!("window_p must be at least 2, got {}", self.window_p)));
        }
        for (name, tau) in [("tau_j0", self.tau_j0), ("tau_v0", self.tau_v0)] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {tau}")));
            }
        }
        Ok(())
    }

    pub fn with_mode(self, mode: DetectorMode) -> Self {
        Self { mode, ..self }
    }
}

/// `(d_np1 − d_n)/d_n` with the zero guard: `0/0 → 0`, `x/0 → +∞`.
pub fn compute_jump(d_n: f64, d_np1: f64) -> f64 {
    if d_n.abs() < EPS_ZERO {
        if d_np1.abs() < EPS_ZERO {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (d_np1 - d_n) / d_n
    }
}

/// Sample variance with the `n − 1` divisor.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Variance of `window[1..] ∪ {d_np1}` over variance of `window`, with the
/// zero guard `0/0 → 1`, `x/0 → +∞`.
pub fn compute_variance_ratio(window: &[f64], d_np1: f64) -> f64 {
    let old = sample_variance(window);
    let mut shifted: Vec<f64> = window.iter().skip(1).copied().collect();
    shifted.push(d_np1);
    let new = sample_variance(&shifted);
    if old < EPS_ZERO {
        if new < EPS_ZERO {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        new / old
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlagReason {
    Indicators,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorVerdict {
    pub flagged: bool,
    pub reason: Option<FlagReason>,
    /// Indicator values; `None` during warm-up or for a non-finite difference.
    pub jump: Option<f64>,
    pub variance: Option<f64>,
    /// Thresholds the indicators were compared against.
    pub thresholds_before: (f64, f64),
    pub thresholds_after: (f64, f64),
}

impl DetectorVerdict {
    pub fn is_warm_up(&self) -> bool {
        self.jump.is_none() && self.reason.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    config: DetectorConfig,
    tau_j: f64,
    tau_v: f64,
    window: DifferenceWindow,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            tau_j: config.tau_j0,
            tau_v: config.tau_v0,
            window: DifferenceWindow::new(config.window_p + 1),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.tau_j, self.tau_v)
    }

    pub fn window(&self) -> &DifferenceWindow {
        &self.window
    }

    pub fn is_warming_up(&self) -> bool {
        !self.window.is_full()
    }

    pub fn reset(&mut self) {
        self.tau_j = self.config.tau_j0;
        self.tau_v = self.config.tau_v0;
        self.window.clear();
    }

    fn update(tau: &mut f64, indicator: f64, up: f64, down: f64) {
        if indicator > *tau {
            *tau *= up;
        } else {
            *tau *= down;
        }
    }

    /// Feeds the next difference and returns the verdict for it.
    ///
    /// A non-finite difference is flagged at once and kept out of the
    /// window. Whether thresholds move on a flagged step follows
    /// [`DetectorConfig::on_flag`].
    pub fn observe(&mut self, d: f64) -> DetectorVerdict {
        let before = self.thresholds();
        if !d.is_finite() || d < 0.0 {
            return DetectorVerdict {
                flagged: true,
                reason: Some(FlagReason::NonFinite),
                jump: None,
                variance: None,
                thresholds_before: before,
                thresholds_after: before,
            };
        }
        if !self.window.is_full() {
            self.window.push(d).expect("finite difference");
            return DetectorVerdict {
                flagged: false,
                reason: None,
                jump: None,
                variance: None,
                thresholds_before: before,
                thresholds_after: before,
            };
        }
        let old = self.window.to_vec();
        let j = compute_jump(*old.last().expect("full window"), d);
        let v = compute_variance_ratio(&old, d);
        let (j_hit, v_hit) = (j > self.tau_j, v > self.tau_v);
        let (up, down) = (self.config.gamma_up, self.config.gamma_down);
        let flagged = match self.config.mode {
            DetectorMode::Both => j_hit && v_hit,
            DetectorMode::JumpOnly => j_hit,
            DetectorMode::VarianceOnly => v_hit,
        };
        if !(flagged && self.config.on_flag == FlagUpdate::Freeze) {
            match self.config.mode {
                DetectorMode::Both => {
                    Self::update(&mut self.tau_j, j, up, down);
                    Self::update(&mut self.tau_v, v, up, down);
                }
                DetectorMode::JumpOnly => Self::update(&mut self.tau_j, j, up, down),
                DetectorMode::VarianceOnly => Self::update(&mut self.tau_v, v, up, down),
            }
        }
        self.window.push(d).expect("finite difference");
        DetectorVerdict {
            flagged,
            reason: flagged.then_some(FlagReason::Indicators),
            jump: Some(j),
            variance: Some(v),
            thresholds_before: before,
            thresholds_after: self.thresholds(),
        }
    }

    /// Verdicts for a whole sequence from a fresh state.
    pub fn run(config: DetectorConfig, ds: &[f64]) -> Result<Vec<DetectorVerdict>> {
        let mut det = Self::new(config)?;
        Ok(ds.iter().map(|&d| det.observe(d)).collect())
    }
}
