//! Convergence reports shared by the coefficient verifier and the pre-limit study.

use serde::{Deserialize, Serialize};

/// Gaps at or below this are treated as exact agreement.
pub const EXACT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityConvergence {
    pub name: String,
    pub gaps: Vec<f64>,
    /// Numerical error bound on each gap (quadrature error or Monte Carlo noise).
    pub errors: Vec<f64>,
    /// Fitted p in gap ∝ scale^{-p}, when at least two gaps are resolvable.
    pub decay_exponent: Option<f64>,
    pub passed: bool,
}

impl QuantityConvergence {
    /// Builds a row; `slack` is how much a later gap may exceed an earlier one and still count as decreasing.
    pub fn new(name: impl Into<String>, scales: &[f64], gaps: Vec<f64>, errors: Vec<f64>, slack: f64) -> Self {
        let passed = decreasing_over_last(&gaps, 3, slack);
        let decay_exponent = fit_decay(scales, &gaps);
        Self { name: name.into(), gaps, errors, decay_exponent, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub scales: Vec<f64>,
    pub quantities: Vec<QuantityConvergence>,
    pub noise_floor: Option<f64>,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn new(label: impl Into<String>, scales: Vec<f64>, quantities: Vec<QuantityConvergence>, noise_floor: Option<f64>) -> Self {
        let passed = quantities.iter().all(|q| q.passed);
        Self { label: label.into(), scales, quantities, noise_floor, passed }
    }

    pub fn quantity(&self, name: &str) -> Option<&QuantityConvergence> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

/// Each of the last `count` gaps is below its predecessor (up to `slack`), or already at the exact floor.
pub fn decreasing_over_last(gaps: &[f64], count: usize, slack: f64) -> bool {
    let start = gaps.len().saturating_sub(count);
    gaps[start..].windows(2).all(|w| {
        let (prev, next) = (w[0], w[1]);
        if slack > 0.0 {
            next <= prev + slack
        } else {
            next < prev || next <= EXACT_FLOOR
        }
    })
}

/// Least-squares slope of -ln(gap) against ln(scale).
pub fn fit_decay(scales: &[f64], gaps: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .zip(gaps)
        .filter(|(_, g)| **g > EXACT_FLOOR)
        .map(|(s, g)| (s.ln(), g.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}
