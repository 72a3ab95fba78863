//! Trial aggregation and log-log power-law fits.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, SimError};

/// A two-sided interval around a sample mean, with `lo <= mean <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ConfidenceInterval {
    pub fn half_width(&self) -> f64 {
        self.hi - self.mean
    }
}

/// Student-t confidence interval for the mean at the given level.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<ConfidenceInterval> {
    let n = samples.len();
    if n < 2 {
        return Err(SimError::InsufficientData { needed: 2, got: n });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(SimError::Domain(format!("confidence level must be in (0, 1), got {level}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let stderr = (var / n as f64).sqrt();
    let half = if stderr == 0.0 {
        0.0
    } else {
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| SimError::Domain(e.to_string()))?;
        t.inverse_cdf(0.5 + level / 2.0) * stderr
    };
    Ok(ConfidenceInterval { mean, lo: mean - half, hi: mean + half })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `y = coefficient * x^exponent` on log2-transformed data.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(SimError::InsufficientData { needed: 2, got: points.len() });
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(SimError::Domain(format!("power-law fit needs positive data, got ({x}, {y})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SimError::Domain("power-law fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    // Constant data: a flat line explains it exactly.
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(PowerLawFit { exponent: slope, coefficient: intercept.exp2(), r_squared })
}
