//! Butcher tableaux for the embedded pairs.

use crate::error::{Error, Result};

/// Explicit Runge-Kutta tableau carrying two weight vectors over the same
/// stages: `base` (the higher-order formula, B) and `aux` (A).
#[derive(Debug, Clone, PartialEq)]
pub struct RkTableau {
    pub name: &'static str,
    /// Strictly lower-triangular stage matrix, row `i` has `i` entries.
    pub a: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub base: Vec<f64>,
    pub aux: Vec<f64>,
    pub base_order: u32,
    pub aux_order: u32,
}

impl RkTableau {
    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        if self.a.len() != s || self.base.len() != s || self.aux.len() != s {
            return Err(Error::Config(format!("{}: inconsistent stage counts", self.name)));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != i {
                return Err(Error::Config(format!("{}: row {i} is not lower triangular", self.name)));
            }
        }
        for w in [&self.base, &self.aux] {
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("{}: weights sum to {sum}", self.name)));
            }
        }
        if self.c.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::Config(format!("{}: node outside [0, 1]", self.name)));
        }
        Ok(())
    }

    /// Explicit midpoint (base, order 2) with forward Euler (aux, order 1).
    pub fn midpoint_euler() -> Self {
        Self {
            name: "rk-midpoint-euler",
            a: vec![vec![], vec![0.5]],
            c: vec![0.0, 0.5],
            base: vec![0.0, 1.0],
            aux: vec![1.0, 0.0],
            base_order: 2,
            aux_order: 1,
        }
    }

    /// Bogacki-Shampine 3(2). All four stages are evaluated every step.
    pub fn bogacki_shampine() -> Self {
        Self {
            name: "rk23",
            a: vec![
                vec![],
                vec![0.5],
                vec![0.0, 0.75],
                vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0],
            ],
            c: vec![0.0, 0.5, 0.75, 1.0],
            base: vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
            aux: vec![7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125],
            base_order: 3,
            aux_order: 2,
        }
    }

    /// Runge-Kutta-Fehlberg 4(5); the fifth-order formula is the base.
    pub fn fehlberg45() -> Self {
        Self {
            name: "rk45",
            a: vec![
                vec![],
                vec![0.25],
                vec![3.0 / 32.0, 9.0 / 32.0],
                vec![1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0],
                vec![439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0],
                vec![
                    -8.0 / 27.0,
                    2.0,
                    -3544.0 / 2565.0,
                    1859.0 / 4104.0,
                    -11.0 / 40.0,
                ],
            ],
            c: vec![0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5],
            base: vec![
                16.0 / 135.0,
                0.0,
                6656.0 / 12825.0,
                28561.0 / 56430.0,
                -9.0 / 50.0,
                2.0 / 55.0,
            ],
            aux: vec![
                25.0 / 216.0,
                0.0,
                1408.0 / 2565.0,
                2197.0 / 4104.0,
                -0.2,
                0.0,
            ],
            base_order: 5,
            aux_order: 4,
        }
    }

    /// Classical RK4, used for multistep startup. Both weight sets are the
    /// same since it is not a pair.
    pub fn classical_rk4() -> Self {
        let b = vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
        Self {
            name: "rk4",
            a: vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            c: vec![0.0, 0.5, 0.5, 1.0],
            base: b.clone(),
            aux: b,
            base_order: 4,
            aux_order: 4,
        }
    }
}
