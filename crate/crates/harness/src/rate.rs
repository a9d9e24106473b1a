//! Least-squares convergence-rate fitting on log-log data.

use upwind_core::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RateFit {
    /// Slope of `log(error)` against `log(h)`.
    pub slope: f64,
    /// Largest absolute residual of the fit (in log space).
    pub max_residual: f64,
    /// Points dropped because their error was zero (log undefined).
    pub excluded: usize,
}

/// Fits `error ~ C * h^slope` over `(h, error)` pairs. Zero errors are
/// excluded (the scheme was exact there); at least three sweep points
/// with distinct mesh sizes are required, and at least two must survive
/// the exclusion.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidConfig(
            "rate fitting needs at least 3 records".into(),
        ));
    }
    let mut hs: Vec<f64> = points.iter().map(|p| p.0).collect();
    hs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    hs.dedup();
    if hs.len() != points.len() {
        return Err(Error::InvalidConfig("mesh sizes must be distinct".into()));
    }
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, e)| e > 0.0)
        .map(|&(h, e)| (h.ln(), e.ln()))
        .collect();
    let excluded = points.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::InvalidConfig(
            "all errors vanish; no rate to fit".into(),
        ));
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = kept
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).abs())
        .fold(0.0f64, f64::max);
    Ok(RateFit {
        slope,
        max_residual,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_decay_has_slope_one() {
        let pts: Vec<(f64, f64)> = [0.25, 0.125, 0.0625, 0.03125]
            .iter()
            .map(|&h| (h, 3.7 * h))
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn square_root_decay_has_slope_half() {
        let pts: Vec<(f64, f64)> = [0.25, 0.125, 0.0625]
            .iter()
            .map(|&h: &f64| (h, 0.2 * h.sqrt()))
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
    }

    #[test]
    fn synthetic_sweep_with_noise() {
        // 7 points, two metrics worth of synthetic data around h^0.5
        let hs: Vec<f64> = (5..12).map(|k| 2f64.powi(-k)).collect();
        let pts: Vec<(f64, f64)> = hs
            .iter()
            .enumerate()
            .map(|(i, &h)| (h, 0.8 * h.sqrt() * (1.0 + 0.05 * ((i % 3) as f64 - 1.0))))
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 0.5).abs() < 0.05);
        assert!(fit.max_residual < 0.1);
    }

    #[test]
    fn zero_errors_are_excluded() {
        let pts = vec![(0.25, 0.0), (0.125, 0.1), (0.0625, 0.05)];
        let fit = fit_rate(&pts).unwrap();
        assert_eq!(fit.excluded, 1);
        assert!((fit.slope - 1.0).abs() < 1e-12);
        // all-zero errors cannot be fitted
        assert!(fit_rate(&[(0.25, 0.0), (0.125, 0.0), (0.0625, 0.0)]).is_err());
    }

    #[test]
    fn too_few_or_duplicate_points_rejected() {
        assert!(fit_rate(&[(0.25, 0.1), (0.125, 0.05)]).is_err());
        assert!(fit_rate(&[(0.25, 0.1), (0.25, 0.05), (0.125, 0.02)]).is_err());
    }
}
