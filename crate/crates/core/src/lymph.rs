//! Cost model for grouping clusters into queue-holding aggregation units
//! ("lymph nodes").
//!
//! With `n` clusters per unit out of `N` in total, a search pays a local
//! queue cost growing as `n^alpha` and a global cost of reaching other units
//! growing as `N^gamma / n^beta`. The optimal unit size balances the two and
//! grows as `N^(gamma / (alpha + beta))`.

use std::fmt;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Total clusters in the system.
    pub total_clusters: f64,
    /// Multiplier on the local term.
    pub local_coeff: f64,
    /// Multiplier on the global term.
    pub global_coeff: f64,
}

impl CostParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, total_clusters: f64) -> Result<Self> {
        let p = CostParams { alpha, beta, gamma, total_clusters, local_coeff: 1.0, global_coeff: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(SimError::Domain(format!(
                "alpha and beta must be positive, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if !(self.total_clusters >= 1.0) {
            return Err(SimError::Domain(format!("N must be at least 1, got {}", self.total_clusters)));
        }
        if !(self.local_coeff > 0.0 && self.global_coeff > 0.0) {
            return Err(SimError::Domain("cost multipliers must be positive".into()));
        }
        Ok(())
    }

    fn global_numerator(&self) -> f64 {
        self.global_coeff * self.total_clusters.powf(self.gamma)
    }
}

/// Local plus global cost with `n` clusters per unit.
pub fn total_cost(n: f64, p: &CostParams) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(SimError::Domain(format!("cluster count per unit must be at least 1, got {n}")));
    }
    Ok(p.local_coeff * n.powf(p.alpha) + p.global_numerator() / n.powf(p.beta))
}

/// Stationary point of `total_cost`, without clamping.
pub fn stationary_n(p: &CostParams) -> f64 {
    (p.beta * p.global_numerator() / (p.alpha * p.local_coeff)).powf(1.0 / (p.alpha + p.beta))
}

/// Continuous minimizer of `total_cost`, clamped below at one.
pub fn optimal_n(p: &CostParams) -> f64 {
    stationary_n(p).max(1.0)
}

/// Integer minimizer of `total_cost` over `1..=n_max` by exhaustive search;
/// the smallest `n` wins ties.
pub fn brute_force_optimal_n(p: &CostParams, n_max: u64) -> Result<u64> {
    if n_max == 0 {
        return Err(SimError::Domain("n_max must be at least 1".into()));
    }
    let mut best = (1, f64::INFINITY);
    for n in 1..=n_max {
        let c = total_cost(n as f64, p)?;
        if c < best.1 {
            best = (n, c);
        }
    }
    Ok(best.0)
}

/// Exponent relating optimal unit size to system size.
pub fn scaling_exponent(alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    let denom = alpha + beta;
    if denom == 0.0 {
        return Err(SimError::Domain("alpha + beta must be non-zero".into()));
    }
    Ok(gamma / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingRegime {
    Sublinear,
    Superlinear,
    Linear,
    Constant,
    Negative,
}

impl fmt::Display for ScalingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingRegime::Sublinear => "sublinear",
            ScalingRegime::Superlinear => "superlinear",
            ScalingRegime::Linear => "linear",
            ScalingRegime::Constant => "constant",
            ScalingRegime::Negative => "negative",
        })
    }
}

/// Classifies how optimal unit size grows with system size.
pub fn classify_scaling(alpha: f64, beta: f64, gamma: f64) -> Result<ScalingRegime> {
    if !(alpha + beta > 0.0) {
        return Err(SimError::Domain("alpha + beta must be positive".into()));
    }
    let e = scaling_exponent(alpha, beta, gamma)?;
    Ok(if e < 0.0 {
        ScalingRegime::Negative
    } else if e == 0.0 {
        ScalingRegime::Constant
    } else if e < 1.0 {
        ScalingRegime::Sublinear
    } else if e == 1.0 {
        ScalingRegime::Linear
    } else {
        ScalingRegime::Superlinear
    })
}

/// One row of the optimal-size table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub total_clusters: f64,
    pub optimal_n: f64,
    pub brute_force_n: u64,
    pub cost: f64,
}

/// Optimal sizes for each `N`, brute force searching all `n <= N`.
pub fn scaling_table(alpha: f64, beta: f64, gamma: f64, totals: &[f64]) -> Result<Vec<ScalingRow>> {
    totals
        .iter()
        .map(|&total| {
            let p = CostParams::new(alpha, beta, gamma, total)?;
            let opt = optimal_n(&p);
            Ok(ScalingRow {
                total_clusters: total,
                optimal_n: opt,
                brute_force_n: brute_force_optimal_n(&p, total.floor().max(1.0) as u64)?,
                cost: total_cost(opt, &p)?,
            })
        })
        .collect()
}
