//! Least-squares line fitting in log-log coordinates.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlopeFit {
    pub value: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Ordinary least squares on `(log x, log y)`. Requires at least four
/// points (slope bands are meaningless below that) and positive data.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "slope fit needs at least 4 points, got {}",
            xs.len().min(ys.len())
        )));
    }
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::InvalidConfig("slope fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let stderr = (ss_res / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        value: slope,
        intercept,
        stderr,
    })
}

/// Least-squares polynomial fit of fixed degree via normal equations;
/// returns the coefficients (constant term first). Intended for the small
/// degrees used by the curve diagnostics.
pub fn polyfit(ts: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let n = degree + 1;
    let mut ata = vec![vec![0.0; n]; n];
    let mut atb = vec![0.0; n];
    for (&t, &y) in ts.iter().zip(ys) {
        let mut powers = vec![1.0; n];
        for k in 1..n {
            powers[k] = powers[k - 1] * t;
        }
        for i in 0..n {
            atb[i] += powers[i] * y;
            for j in 0..n {
                ata[i][j] += powers[i] * powers[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if ata[row][col].abs() > ata[piv][col].abs() {
                piv = row;
            }
        }
        ata.swap(col, piv);
        atb.swap(col, piv);
        let diag = ata[col][col];
        if diag == 0.0 {
            continue;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = ata[row][col] / diag;
            if f != 0.0 {
                for k in col..n {
                    ata[row][k] -= f * ata[col][k];
                }
                atb[row] -= f * atb[col];
            }
        }
    }
    (0..n)
        .map(|i| {
            if ata[i][i] != 0.0 {
                atb[i] / ata[i][i]
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exact_power_law() {
        let xs = [64.0f64, 128.0, 256.0, 512.0, 1024.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.5)).collect();
        let fit = loglog_slope(&xs, &ys).unwrap();
        assert_relative_eq!(fit.value, -0.5, max_relative = 1e-12);
        assert!(fit.stderr < 1e-12);
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(loglog_slope(&[1.0, 2.0, 4.0], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn polyfit_recovers_quadratic() {
        let ts: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 - t + 0.5 * t * t).collect();
        let c = polyfit(&ts, &ys, 2);
        assert_relative_eq!(c[0], 2.0, max_relative = 1e-10);
        assert_relative_eq!(c[1], -1.0, max_relative = 1e-10);
        assert_relative_eq!(c[2], 0.5, max_relative = 1e-10);
    }
}
