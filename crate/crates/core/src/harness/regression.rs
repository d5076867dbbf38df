//! Nadaraya-Watson regression with a Gaussian kernel, used to turn per-trial
//! (L, detected) pairs into a TPR-versus-L curve.

use crate::error::{Error, Result};

/// `ŷ(x) = Σ wᵢ yᵢ / Σ wᵢ` with `wᵢ = exp(−(x − xᵢ)²/(2h²))`. Where every
/// weight underflows the nearest sample's value is used.
pub fn kernel_regression(points: &[(f64, f64)], bandwidth: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Config("kernel regression needs at least one point".into()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let two_h2 = 2.0 * bandwidth * bandwidth;
    Ok(grid
        .iter()
        .map(|&x| {
            let (mut num, mut den) = (0.0, 0.0);
            for &(xi, yi) in points {
                let w = (-(x - xi).powi(2) / two_h2).exp();
                num += w * yi;
                den += w;
            }
            if den > 0.0 {
                num / den
            } else {
                points
                    .iter()
                    .min_by(|a, b| (a.0 - x).abs().total_cmp(&(b.0 - x).abs()))
                    .map(|p| p.1)
                    .expect("non-empty")
            }
        })
        .collect())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule `0.9·min(σ, IQR/1.34)·n^{−1/5}`, falling back to 1 when
/// the sample has no spread.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 1.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h > 0.0 && h.is_finite() {
        h
    } else {
        1.0
    }
}

/// `n` log-spaced points over `[max(1e−2, lo), hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let lo = lo.max(1e-2);
    let hi = hi.max(lo);
    if n == 1 || hi == lo {
        return vec![lo; n];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
