//! Shared domain types: solution snapshots, time grids, norms and the
//! sliding window of difference values that feeds the detector.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the flat value buffer of a [`State`] is split into fields.
///
/// ODE states and 1-D heat states are a single vector. Navier-Stokes states
/// carry two staggered velocity grids back to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layout {
    Vector,
    /// Field shapes as `(rows, cols)`, stored column-major one after another.
    Fields(Vec<(usize, usize)>),
}

/// A solution snapshot at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    values: Vec<f64>,
    layout: Layout,
}

impl State {
    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            values,
            layout: Layout::Vector,
        }
    }

    /// Builds a multi-field state. The shapes must cover `values` exactly.
    pub fn fields(values: Vec<f64>, shapes: Vec<(usize, usize)>) -> Result<Self> {
        let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
        if total != values.len() {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: values.len(),
            });
        }
        Ok(Self {
            values,
            layout: Layout::Fields(shapes),
        })
    }

    pub fn zeros_like(other: &State) -> Self {
        Self {
            values: vec![0.0; other.values.len()],
            layout: other.layout.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Field slices in storage order; a vector state yields one slice.
    pub fn segments(&self) -> Vec<&[f64]> {
        match &self.layout {
            Layout::Vector => vec![&self.values[..]],
            Layout::Fields(shapes) => {
                let mut out = Vec::with_capacity(shapes.len());
                let mut start = 0;
                for (r, c) in shapes {
                    out.push(&self.values[start..start + r * c]);
                    start += r * c;
                }
                out
            }
        }
    }

    fn same_shape(&self, other: &State) -> Result<()> {
        if self.values.len() != other.values.len() || self.layout != other.layout {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(())
    }
}

/// Fixed-step time grid, `t_n = t0 + n * dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        Ok(Self { t0, dt, n_steps })
    }

    /// Grid covering `[t0, t_end]` with the step count rounded to the nearest integer.
    pub fn spanning(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        let n = ((t_end - t0) / dt).round();
        if !(n >= 1.0) {
            return Err(Error::Config(format!(
                "interval [{t0}, {t_end}] holds no step of size {dt}"
            )));
        }
        Self::new(t0, dt, n as usize)
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n_steps)
    }
}

/// One combined base + auxiliary advance. `step_index` is the index of the
/// state produced, so step `k` turns `B_{k-1}` into `B_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub base: State,
    pub auxiliary: State,
    pub step_index: usize,
}

impl StepOutput {
    pub fn new(base: State, auxiliary: State, step_index: usize) -> Result<Self> {
        base.same_shape(&auxiliary)?;
        Ok(Self {
            base,
            auxiliary,
            step_index,
        })
    }

    pub fn difference(&self, norm: Norm) -> Result<f64> {
        difference_norm(&self.base, &self.auxiliary, norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    #[default]
    #[serde(alias = "inf", alias = "max")]
    Infinity,
    One,
    Two,
}

impl Norm {
    pub fn of(self, v: impl Iterator<Item = f64>) -> f64 {
        match self {
            Norm::Infinity => v.fold(0.0, |m, x| m.max(x.abs())),
            Norm::One => v.map(f64::abs).sum(),
            Norm::Two => v.map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "infinity" | "max" => Ok(Norm::Infinity),
            "one" | "1" => Ok(Norm::One),
            "two" | "2" => Ok(Norm::Two),
            other => Err(Error::Config(format!("unknown norm `{other}`"))),
        }
    }
}

/// `‖base − aux‖` in the chosen norm. Multi-field states take the maximum of
/// the per-field norms.
pub fn difference_norm(base: &State, aux: &State, norm: Norm) -> Result<f64> {
    base.same_shape(aux)?;
    let mut offset = 0;
    let mut worst: f64 = 0.0;
    for seg in base.segments() {
        let other = &aux.values[offset..offset + seg.len()];
        let d = norm.of(seg.iter().zip(other).map(|(a, b)| a - b));
        // NaN must win over any finite value here.
        if d.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(d);
        offset += seg.len();
    }
    Ok(worst)
}

/// Difference value rejected by [`DifferenceWindow::push`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFinite(pub f64);

/// Sliding window over the most recent difference values, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceWindow {
    values: VecDeque<f64>,
    capacity: usize,
}

impl DifferenceWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self {
            values: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Appends `d`, evicting the oldest entry when full. Non-finite and
    /// negative values are refused; the caller flags them immediately.
    pub fn push(&mut self, d: f64) -> std::result::Result<(), NonFinite> {
        if !d.is_finite() || d < 0.0 {
            return Err(NonFinite(d));
        }
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(d);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.capacity
    }

    pub fn newest(&self) -> Option<f64> {
        self.values.back().copied()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }

    pub fn clear(&mut self) {
        self.values.clear();
    }
}
