//! Lipschitz and growth constants of the driver's jump coefficients.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::{f2_unchecked, BetaFn, ModelId, ModelSpec};
use crate::quad::{self, Tolerance};
use crate::special::{gamma, power_density, rgamma};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverConditions {
    pub model: ModelId,
    /// Lipschitz constant of the drift b (or b̃) in (x,t).
    pub drift_lipschitz: f64,
    /// Largest observed ∫_0^1 |F₂(x,η) - F₂(x',η)|² ν(dη) / |x - x'|² over a grid of pairs.
    pub f2_lipschitz_estimate: f64,
    /// Analytic Lipschitz constant C = C₀² ∫_0^1 |log η|² η^{2b} h_{β₀}(η) dη.
    pub f2_lipschitz_constant: f64,
    /// sup_x max{|a'(x)|, |a(x)|·|(β₀/β)'(x)|} with a(x) the F₂ prefactor.
    pub c0: f64,
    /// sup_x ∫∫_{‖ξ‖<1, η<1} (‖F₁‖² + F₂²) ν.
    pub growth_constant: f64,
    pub passed: bool,
}

/// F₂ prefactor a(x) = (Γ(1-β)/Γ(1-β₀))^{-1/β} as a function of the local order β.
fn prefactor(beta0: f64, beta: f64) -> f64 {
    (gamma(1.0 - beta) / gamma(1.0 - beta0)).powf(-1.0 / beta)
}

/// Window of x over which β(x) is not yet saturated.
fn probe_window(beta_fn: &BetaFn) -> (f64, f64) {
    match beta_fn {
        BetaFn::Constant { .. } => (-1.0, 1.0),
        BetaFn::Tanh { scale, center, .. } => (center - 6.0 * scale.abs(), center + 6.0 * scale.abs()),
        BetaFn::Well { center, width, .. } => (center - 6.0 * width.abs(), center + 6.0 * width.abs()),
    }
}

/// ∫_0^1 (ln η)² η^{p-1} dη = 2/p³.
fn log_square_moment(p: f64) -> f64 {
    2.0 / (p * p * p)
}

pub fn check_driver_conditions(model: &ModelSpec) -> Result<DriverConditions> {
    model.check()?;
    let drift_lipschitz = model.drift().map_or(0.0, |d| d.lipschitz());
    let report = match model {
        ModelSpec::Subdiffusion(m) => {
            // F₁ = 0, F₂ = η: state independent.
            let growth = m.beta / (2.0 - m.beta) * rgamma(1.0 - m.beta);
            finish(model.id(), drift_lipschitz, 0.0, 0.0, 0.0, growth)
        }
        ModelSpec::LevyWalk(m) => {
            // F₁ = ξ, F₂ = η; ν carries the coupled pair (rθ, r).
            let growth = 2.0 * m.beta / (2.0 - m.beta) * rgamma(1.0 - m.beta);
            finish(model.id(), drift_lipschitz, 0.0, 0.0, 0.0, growth)
        }
        ModelSpec::VariableOrder(m) => {
            let beta0 = m.beta0;
            let (lo, hi) = probe_window(&m.beta_fn);
            let (_, beta_max) = m.beta_fn.range();

            let fine = 4001;
            let h = 1e-6;
            let mut c0: f64 = 0.0;
            let mut growth: f64 = 0.0;
            for k in 0..fine {
                let x = lo + (hi - lo) * k as f64 / (fine - 1) as f64;
                let beta = m.beta_fn.eval(x);
                let dbeta = m.beta_fn.derivative(x);
                let a = prefactor(beta0, beta);
                let da_dbeta = (prefactor(beta0, beta + h) - prefactor(beta0, beta - h)) / (2.0 * h);
                let d_ratio = beta0 * dbeta / (beta * beta);
                c0 = c0.max((da_dbeta * dbeta).abs()).max(a * d_ratio.abs());
                growth = growth.max(a * a * beta0 * rgamma(1.0 - beta0) / (2.0 * beta0 / beta - beta0));
            }
            let b = beta0 / beta_max;
            let constant = c0 * c0 * beta0 * rgamma(1.0 - beta0) * log_square_moment(2.0 * b - beta0);

            let coarse = 41;
            let xs: Vec<f64> = (0..coarse).map(|k| lo + (hi - lo) * k as f64 / (coarse - 1) as f64).collect();
            let tol = Tolerance { abs: 1e-12, rel: 1e-9 };
            let mut estimate: f64 = 0.0;
            for (i, &x1) in xs.iter().enumerate() {
                for &x2 in &xs[i + 1..] {
                    let (b1, b2) = (m.beta_fn.eval(x1), m.beta_fn.eval(x2));
                    // η = v^{1/p} with p = 2·min(β₀/β) - β₀ flattens the origin.
                    let p = 2.0 * beta0 / b1.max(b2) - beta0;
                    let q = quad::integrate(
                        |v| {
                            if v <= 0.0 {
                                return 0.0;
                            }
                            let eta = v.powf(1.0 / p);
                            let diff = f2_unchecked(beta0, b1, eta) - f2_unchecked(beta0, b2, eta);
                            diff * diff * power_density(beta0, eta) * eta / (p * v)
                        },
                        0.0,
                        1.0,
                        tol,
                    )?;
                    estimate = estimate.max(q.value / (x1 - x2).powi(2));
                }
            }
            finish(model.id(), drift_lipschitz, estimate, constant, c0, growth)
        }
    };
    Ok(report)
}

fn finish(model: ModelId, drift_lipschitz: f64, estimate: f64, constant: f64, c0: f64, growth: f64) -> DriverConditions {
    let passed = [drift_lipschitz, estimate, constant, c0, growth].iter().all(|v| v.is_finite());
    DriverConditions {
        model,
        drift_lipschitz,
        f2_lipschitz_estimate: estimate,
        f2_lipschitz_constant: constant,
        c0,
        growth_constant: growth,
        passed,
    }
}
