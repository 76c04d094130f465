//! Small numerical utilities: stable log-sum-exp, least-squares fits and
//! running summary statistics.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Values below this are treated as zero when fitting in the log domain.
pub const LOG_FLOOR: f64 = 1e-13;

/// `log sum_i exp(x_i)` with max subtraction. Returns `-inf` for an empty or
/// all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// Ordinary least squares fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_max: f64,
    /// "log-linear" or "linear".
    pub model: String,
    /// Points dropped by the log floor, if any.
    pub dropped: usize,
}

fn ols(points: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-24 {
        1.0
    } else {
        0.0
    };
    let residual_max = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    (slope, intercept, r_squared, residual_max)
}

/// Fit `log y = intercept + slope * x` by OLS, dropping points below the
/// floating-point floor. Needs at least three usable points.
pub fn fit_geometric(series: &[(f64, f64)]) -> Result<FitReport> {
    let usable: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, y)| *y > LOG_FLOOR)
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    let dropped = series.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "log-linear fit needs at least 3 positive points, got {}",
            usable.len()
        )));
    }
    let (slope, intercept, r_squared, residual_max) = ols(&usable);
    Ok(FitReport {
        slope,
        intercept,
        r_squared,
        residual_max,
        model: "log-linear".into(),
        dropped,
    })
}

/// Plain linear OLS fit.
pub fn fit_linear(series: &[(f64, f64)]) -> Result<FitReport> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument(
            "linear fit needs at least 2 points".into(),
        ));
    }
    let (slope, intercept, r_squared, residual_max) = ols(series);
    Ok(FitReport {
        slope,
        intercept,
        r_squared,
        residual_max,
        model: "linear".into(),
        dropped: 0,
    })
}

/// One-parameter fit `y = c * x` through the origin. Returns `(c, r_squared)`
/// where the coefficient of determination is computed about the mean.
pub fn fit_through_origin(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty fit input".into()));
    }
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("degenerate abscissae".into()));
    }
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let c = sxy / sxx;
    let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - c * p.0).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok((c, r2))
}

/// Sample mean, unbiased variance (ddof 1) and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub count: usize,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Summary {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n >= 2 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Summary {
            mean,
            variance,
            std_error: (variance / n as f64).sqrt(),
            count: n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2.0f64.ln())).abs() < 1e-12);
        let v = log_sum_exp(&[0.0, f64::NEG_INFINITY]);
        assert!((v - 0.0).abs() < 1e-15);
    }

    #[test]
    fn exact_geometric_series_fit() {
        let series: Vec<(f64, f64)> = (0..4).map(|k| (k as f64, 0.5f64.powi(k))).collect();
        let fit = fit_geometric(&series).unwrap();
        assert!((fit.slope - 0.5f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let series = vec![(0.0, 2.0), (1.0, 2.0), (2.0, 2.0)];
        let fit = fit_geometric(&series).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn zero_dropped_by_floor() {
        let series = vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0), (3.0, 0.125)];
        let fit = fit_geometric(&series).unwrap();
        assert_eq!(fit.dropped, 1);
        assert!((fit.slope - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(fit_geometric(&[(0.0, 1.0), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn summary_basics() {
        let s = Summary::from_values(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.variance, 2.0);
        assert_eq!(s.count, 2);
    }
}
