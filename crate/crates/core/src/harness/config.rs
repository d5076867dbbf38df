//! Experiment configuration, scheme construction and the named presets.
//!
//! A config names a problem (`vdp-b2`, `vdp-b3`, `heat-cfg1..3`,
//! `ns-re2000`, `ns-re20`) and a scheme (`rk45`, `rk23`,
//! `rk-midpoint-euler`, `abPQ`, `am-ab:<p>`, `extrapolation1`, `fe-be`,
//! `r-cn`). Each problem/scheme combination has a preset carrying the
//! published step size, fault mode and variance; config files override
//! individual keys on top of a preset.

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::faults::{FaultMode, FaultSpec};
use crate::heat::{HeatPair, HeatPreset, HeatScheme};
use crate::ns::{NsPair, NsProblem};
use crate::ode::{AbPair, AmAbPair, ExtrapolationPair, NewtonConfig, OdeProblem, RkPair, RkTableau};
use crate::scheme::PairScheme;
use crate::state::{Norm, TimeGrid};

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_SEED: u64 = 2015;
pub const DEFAULT_CURVE_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub scheme: String,
    /// Time step; the preset value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default)]
    pub detector: DetectorConfig,
    /// Fault injected once per trial; absent for clean ensembles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultSpec>,
    /// Kernel bandwidth for the TPR curve; Silverman's rule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_curve_points() -> usize {
    DEFAULT_CURVE_POINTS
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Problem {
    Vdp(u8),
    Heat(HeatPreset),
    Ns(f64),
}

impl Problem {
    fn parse(id: &str) -> Result<Self> {
        match id {
            "vdp-b2" => Ok(Problem::Vdp(2)),
            "vdp-b3" => Ok(Problem::Vdp(3)),
            "ns-re2000" => Ok(Problem::Ns(2000.0)),
            "ns-re20" => Ok(Problem::Ns(20.0)),
            _ => HeatPreset::from_id(id)
                .map(Problem::Heat)
                .ok_or_else(|| Error::Config(format!("unknown problem {id:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scheme {
    Rk(&'static str),
    Ab(usize, usize),
    AmAb(usize),
    Extrapolation,
    Heat(HeatPair),
}

impl Scheme {
    fn parse(id: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown scheme {id:?}"));
        match id {
            "rk45" => return Ok(Scheme::Rk("rk45")),
            "rk23" => return Ok(Scheme::Rk("rk23")),
            "rk-midpoint-euler" => return Ok(Scheme::Rk("rk-midpoint-euler")),
            "extrapolation1" => return Ok(Scheme::Extrapolation),
            "fe-be" => return Ok(Scheme::Heat(HeatPair::FeBe)),
            "r-cn" => return Ok(Scheme::Heat(HeatPair::RCn)),
            _ => {}
        }
        if let Some(p) = id.strip_prefix("am-ab:") {
            return p.parse().map(Scheme::AmAb).map_err(|_| bad());
        }
        if let Some(orders) = id.strip_prefix("ab") {
            let digits: Vec<usize> = orders.chars().filter_map(|c| c.to_digit(10).map(|d| d as usize)).collect();
            if orders.len() == 2 && digits.len() == 2 {
                return Ok(Scheme::Ab(digits[0], digits[1]));
            }
        }
        Err(bad())
    }

    fn is_multistep(self) -> bool {
        matches!(self, Scheme::Ab(..) | Scheme::AmAb(_))
    }
}

/// Step sizes used for the oscillator: one-step pairs take the larger step.
fn vdp_default_dt(b: u8, scheme: Scheme) -> f64 {
    match (b, scheme.is_multistep()) {
        (2, false) => 1.0 / 10.0,
        (2, true) => 1.0 / 20.0,
        (_, false) => 1.0 / 15.0,
        (_, true) => 1.0 / 35.0,
    }
}

pub const VDP_T_END: f64 = 14.0;

/// Builds the pair for a problem/scheme combination.
pub fn build_scheme(problem: &str, scheme: &str, dt: Option<f64>) -> Result<Box<dyn PairScheme>> {
    let prob = Problem::parse(problem)?;
    let sch = Scheme::parse(scheme)?;
    let mismatch = || Error::Config(format!("scheme {scheme:?} does not apply to problem {problem:?}"));
    match (prob, sch) {
        (Problem::Vdp(b), s) => {
            let h = dt.unwrap_or_else(|| vdp_default_dt(b, s));
            let grid = TimeGrid::spanning(0.0, VDP_T_END, h)?;
            let ode = OdeProblem::van_der_pol(b as f64, [1.0, 0.0], grid);
            Ok(match s {
                Scheme::Rk(id) => {
                    let tableau = match id {
                        "rk45" => RkTableau::fehlberg45(),
                        "rk23" => RkTableau::bogacki_shampine(),
                        _ => RkTableau::midpoint_euler(),
                    };
                    Box::new(RkPair::new(ode, tableau)?)
                }
                Scheme::Ab(pa, pb) => Box::new(AbPair::new(ode, pa, pb)?),
                Scheme::AmAb(p) => Box::new(AmAbPair::new(ode, p, NewtonConfig::default())?),
                Scheme::Extrapolation => Box::new(ExtrapolationPair::new(ode)),
                Scheme::Heat(_) => return Err(mismatch()),
            })
        }
        (Problem::Heat(preset), Scheme::Heat(pair)) => {
            let p = preset.problem(dt.unwrap_or(preset.time_steps()[0]))?;
            Ok(Box::new(HeatScheme::new(p, pair)))
        }
        (Problem::Ns(re), Scheme::Extrapolation) => {
            let p = NsProblem::new(re, 40, dt.unwrap_or(1.0 / 100.0), 2.0)?;
            Ok(Box::new(NsPair::new(p)?))
        }
        _ => Err(mismatch()),
    }
}

/// Published fault mode and variance for a problem/scheme combination.
pub fn default_fault(problem: &str, scheme: &str) -> Result<FaultSpec> {
    let prob = Problem::parse(problem)?;
    let sch = Scheme::parse(scheme)?;
    let cn = sch == Scheme::Heat(HeatPair::RCn);
    let (mode, sigma2) = match prob {
        Problem::Vdp(_) => (FaultMode::DerivativeEval, 1e-1),
        Problem::Heat(HeatPreset::Cfg1) => (FaultMode::DerivativeEval, if cn { 1e-3 } else { 1e-1 }),
        Problem::Heat(HeatPreset::Cfg2) => (FaultMode::LinearRhs, if cn { 1e-6 } else { 5e-5 }),
        Problem::Heat(HeatPreset::Cfg3) => (FaultMode::PreviousSolution, if cn { 1e-6 } else { 1e-4 }),
        Problem::Ns(re) if re > 100.0 => (FaultMode::PreviousSolution, 0.5),
        Problem::Ns(_) => (FaultMode::LinearRhs, 2.0),
    };
    Ok(FaultSpec::new(mode, sigma2))
}

/// Names of the built-in presets.
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for b in ["vdp-b2", "vdp-b3"] {
        for s in ["rk45", "rk23", "ab45", "ab23"] {
            names.push(format!("{b}-{s}"));
        }
        for s in ["rk45", "rk23", "ab45", "ab23"] {
            names.push(format!("{b}-{s}-memory"));
        }
    }
    for c in ["heat-cfg1", "heat-cfg2", "heat-cfg3"] {
        for s in ["fe-be", "r-cn"] {
            names.push(format!("{c}-{s}"));
        }
    }
    names.push("ns-re2000".into());
    names.push("ns-re20".into());
    names
}

impl ExperimentConfig {
    /// Preset for a problem/scheme combination.
    pub fn preset(problem: &str, scheme: &str) -> Result<Self> {
        let fault = default_fault(problem, scheme)?;
        let cfg = Self {
            problem: problem.to_string(),
            scheme: scheme.to_string(),
            dt: None,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            norm: Norm::Infinity,
            detector: DetectorConfig::default(),
            fault: Some(fault),
            bandwidth: None,
            curve_points: DEFAULT_CURVE_POINTS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A built-in preset by name, e.g. `heat-cfg2-fe-be` or `vdp-b2-ab45-memory`.
    pub fn named(name: &str) -> Result<Self> {
        if name.starts_with("ns-") {
            return Self::preset(name, "extrapolation1");
        }
        let (base, memory) = match name.strip_suffix("-memory") {
            Some(b) => (b, true),
            None => (name, false),
        };
        let split = ["vdp-b2-", "vdp-b3-", "heat-cfg1-", "heat-cfg2-", "heat-cfg3-"]
            .iter()
            .find_map(|p| base.strip_prefix(p).map(|s| (&p[..p.len() - 1], s)));
        let (problem, scheme) = split.ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
        let mut cfg = Self::preset(problem, scheme)?;
        if memory {
            if !problem.starts_with("vdp") {
                return Err(Error::Config(format!("unknown preset {name:?}")));
            }
            cfg.fault = Some(FaultSpec::new(FaultMode::PreviousSolution, 1e-1));
        }
        Ok(cfg)
    }

    /// Parses a TOML config. Keys override the preset named by `preset`, or
    /// the preset for the file's `problem`/`scheme` pair. `clean = true`
    /// disables fault injection.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let preset = table.remove("preset");
        let clean = table.remove("clean");
        let base = match preset {
            Some(toml::Value::String(name)) => Self::named(&name)?,
            Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
            None => {
                let get = |k: &str| table.get(k).and_then(|v| v.as_str()).map(str::to_string);
                match (get("problem"), get("scheme")) {
                    (Some(p), Some(s)) => Self::preset(&p, &s)?,
                    (Some(p), None) if p.starts_with("ns-") => Self::preset(&p, "extrapolation1")?,
                    _ => return Err(Error::Config("config needs `preset` or both `problem` and `scheme`".into())),
                }
            }
        };
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        overlay(&mut merged, table);
        let mut cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        match clean {
            Some(toml::Value::Boolean(true)) => cfg.fault = None,
            Some(toml::Value::Boolean(false)) | None => {}
            Some(other) => return Err(Error::Config(format!("clean must be a boolean, got {other}"))),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if let Some(f) = &self.fault {
            f.validate()?;
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(bw) = self.bandwidth {
            if !(bw > 0.0 && bw.is_finite()) {
                return Err(Error::Config(format!("bandwidth must be positive, got {bw}")));
            }
        }
        if self.curve_points < 2 {
            return Err(Error::Config("curve_points must be at least 2".into()));
        }
        // constructing the scheme checks the problem/scheme pair and dt
        Scheme::parse(&self.scheme)?;
        Problem::parse(&self.problem)?;
        Ok(())
    }

    pub fn build_scheme(&self) -> Result<Box<dyn PairScheme>> {
        build_scheme(&self.problem, &self.scheme, self.dt)
    }
}

fn overlay(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => overlay(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
