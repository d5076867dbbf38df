//! Direct solvers: Thomas algorithm, banded Cholesky and small dense LU.

use crate::error::{Error, Result};

/// Tridiagonal system `sub[i]·x[i−1] + main[i]·x[i] + sup[i]·x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n−1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub main: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    /// Constant-coefficient system `(lower, diag, upper)` of size `n`.
    pub fn constant(n: usize, lower: f64, diag: f64, upper: f64, rhs: Vec<f64>) -> Self {
        Self {
            sub: vec![lower; n],
            main: vec![diag; n],
            sup: vec![upper; n],
            rhs,
        }
    }

    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.main[i] * x[i];
                if i > 0 {
                    v += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }
}

/// Thomas algorithm without pivoting.
pub fn solve_tridiagonal(system: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = system.len();
    if system.sub.len() != n || system.sup.len() != n || system.rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: system.rhs.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = system.main[0];
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::ZeroPivot { row: 0 });
    }
    c[0] = system.sup[0] / denom;
    d[0] = system.rhs[0] / denom;
    for i in 1..n {
        denom = system.main[i] - system.sub[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::ZeroPivot { row: i });
        }
        c[i] = if i + 1 < n { system.sup[i] / denom } else { 0.0 };
        d[i] = (system.rhs[i] - system.sub[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Cholesky factor of a symmetric positive definite band matrix, stored as
/// the lower band row by row.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `l[i * (bw + 1) + (j + bw − i)]` holds `L[i][j]` for `i − bw ≤ j ≤ i`.
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix whose entry `(i, j)` for `j ≤ i` within the band
    /// is returned by `entry`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = entry(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + (i + bw - k)] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n × n` matrix.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: a.len(),
        });
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[piv * n + col] == 0.0 || !a[piv * n + col].is_finite() {
            return Err(Error::ZeroPivot { row: col });
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for row in col + 1..n {
            let m = a[row * n + col] / a[col * n + col];
            if m != 0.0 {
                for k in col..n {
                    a[row * n + k] -= m * a[col * n + k];
                }
                b[row] -= m * b[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row * n + k] * b[k];
        }
        b[row] = s / a[row * n + row];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inf_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.5];
        let sys = TridiagonalSystem::constant(3, 0.0, 1.0, 0.0, b.clone());
        assert_eq!(solve_tridiagonal(&sys).unwrap(), b);
    }

    #[test]
    fn two_by_two() {
        let sys = TridiagonalSystem::constant(2, 1.0, 2.0, 1.0, vec![3.0, 3.0]);
        let x = solve_tridiagonal(&sys).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let sys = TridiagonalSystem::constant(2, 1.0, 0.0, 1.0, vec![1.0, 1.0]);
        assert!(matches!(solve_tridiagonal(&sys), Err(Error::ZeroPivot { row: 0 })));
    }

    #[test]
    fn random_dominant_systems_have_small_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = 50;
            let sub: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sup: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let main: Vec<f64> = (0..n)
                .map(|i| (sub[i].abs() + sup[i].abs() + rng.gen_range(0.1..2.0)) * if rng.gen() { 1.0 } else { -1.0 })
                .collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let sys = TridiagonalSystem { sub, main, sup, rhs: rhs.clone() };
            let x = solve_tridiagonal(&sys).unwrap();
            let r: Vec<f64> = sys.apply(&x).iter().zip(&rhs).map(|(a, b)| a - b).collect();
            assert!(inf_norm(&r) <= 1e-10 * inf_norm(&rhs));
        }
    }

    #[test]
    fn banded_cholesky_matches_dense() {
        // 2-D Dirichlet Laplacian plus identity on a 5×4 grid, bandwidth 5
        let (nx, ny) = (5, 4);
        let n = nx * ny;
        let entry = |i: usize, j: usize| -> f64 {
            let (xi, yi) = (i % nx, i / nx);
            let (xj, yj) = (j % nx, j / nx);
            if i == j {
                5.0
            } else if (yi == yj && xi.abs_diff(xj) == 1) || (xi == xj && yi.abs_diff(yj) == 1) {
                -1.0
            } else {
                0.0
            }
        };
        let chol = BandedCholesky::factor(n, nx, entry).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        chol.solve_in_place(&mut x);
        let dense: Vec<f64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if j <= i { entry(i, j) } else { entry(j, i) }
            })
            .collect();
        let y = solve_dense(dense, rhs).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_band_matrix_is_rejected() {
        let r = BandedCholesky::factor(2, 1, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(matches!(r, Err(Error::NotPositiveDefinite { row: 1 })));
    }
}
