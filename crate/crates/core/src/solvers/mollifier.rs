//! Unit-mass mollifiers φ_n and the smoothed waiting-time source (H_β * φ_n).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernels::Violation;
use crate::quad::{self, Tolerance};
use crate::special::{power_tail, rgamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MollifierShape {
    /// Tent on [-width, width] with peak 1/width.
    Triangle,
    /// Centered normal density with standard deviation `width`.
    Gaussian,
    /// No smoothing: the source is H_β(t - s) itself, cut off within dt/2 of s = t.
    Dirac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mollifier {
    pub shape: MollifierShape,
    #[serde(default)]
    pub width: f64,
}

/// Gaussian mass beyond this many standard deviations is dropped.
const GAUSS_REACH: f64 = 8.0;

impl Mollifier {
    pub fn triangle(width: f64) -> Self {
        Self { shape: MollifierShape::Triangle, width }
    }

    pub fn gaussian(width: f64) -> Self {
        Self { shape: MollifierShape::Gaussian, width }
    }

    pub fn dirac() -> Self {
        Self { shape: MollifierShape::Dirac, width: 0.0 }
    }

    /// Default smoothing for a time step dt: a triangle of half-width 8·dt.
    pub fn for_step(dt: f64) -> Self {
        Self::triangle(8.0 * dt)
    }

    pub fn validate(&self, field: &str, out: &mut Vec<Violation>) {
        if self.shape != MollifierShape::Dirac && !(self.width > 0.0 && self.width.is_finite()) {
            out.push(Violation::new(format!("{field}.width"), "must be positive"));
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut v = Vec::new();
        self.validate("mollifier", &mut v);
        match v.first() {
            Some(v) => Err(domain(v.to_string())),
            None => Ok(()),
        }
    }

    /// Half-length of the (effective) support.
    pub fn support(&self) -> f64 {
        match self.shape {
            MollifierShape::Triangle => self.width,
            MollifierShape::Gaussian => GAUSS_REACH * self.width,
            MollifierShape::Dirac => 0.0,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let w = self.width;
        match self.shape {
            MollifierShape::Triangle => ((w - u.abs()) / (w * w)).max(0.0),
            MollifierShape::Gaussian => (-0.5 * (u / w).powi(2)).exp() / (w * (2.0 * PI).sqrt()),
            MollifierShape::Dirac => 0.0,
        }
    }

    /// Nodes u_k = k·dt over the support with weights φ(u_k)·dt rescaled to sum to one.
    pub fn discretize(&self, dt: f64) -> Vec<(f64, f64)> {
        if self.shape == MollifierShape::Dirac {
            return vec![(0.0, 1.0)];
        }
        let reach = (self.support() / dt).ceil() as i64;
        let mut nodes: Vec<(f64, f64)> = (-reach..=reach).map(|k| (k as f64 * dt, self.eval(k as f64 * dt) * dt)).collect();
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        for n in &mut nodes {
            n.1 /= total;
        }
        nodes
    }

    /// (H_β * φ)(σ) = ∫_0^∞ H_β(r) φ(σ - r) dr, with σ = t - s; `dt` sets the Dirac cutoff.
    pub fn source(&self, beta: f64, sigma: f64, dt: f64) -> f64 {
        match self.shape {
            MollifierShape::Dirac => {
                if sigma >= 0.5 * dt {
                    power_tail(beta, sigma)
                } else {
                    0.0
                }
            }
            MollifierShape::Triangle => {
                let w = self.width;
                if sigma <= -w {
                    0.0
                } else if sigma > 100.0 * w {
                    // Second difference of the antiderivative, expanded: H + (w²/12)H'' + O(w⁴).
                    power_tail(beta, sigma) * (1.0 + beta * (beta + 1.0) * w * w / (12.0 * sigma * sigma))
                } else {
                    // Second difference of F(r) = r_+^{2-β}/Γ(3-β), whose second derivative is H_β.
                    let f = |r: f64| if r > 0.0 { r.powf(2.0 - beta) * rgamma(3.0 - beta) } else { 0.0 };
                    (f(sigma + w) - 2.0 * f(sigma) + f(sigma - w)) / (w * w)
                }
            }
            MollifierShape::Gaussian => {
                let reach = GAUSS_REACH * self.width;
                let hi = sigma + reach;
                if hi <= 0.0 {
                    return 0.0;
                }
                let lo = (sigma - reach).max(0.0);
                // r = u^{1/(1-β)} removes the r^{-β} singularity at the origin.
                let e = 1.0 / (1.0 - beta);
                let tol = Tolerance { abs: 1e-12, rel: 1e-10 };
                quad::integrate(
                    |u| {
                        let r = u.powf(e);
                        let jac = e * u.powf(e - 1.0);
                        if r <= 0.0 {
                            return e * rgamma(1.0 - beta) * self.eval(sigma);
                        }
                        power_tail(beta, r) * self.eval(sigma - r) * jac
                    },
                    lo.powf(1.0 - beta),
                    hi.powf(1.0 - beta),
                    tol,
                )
                .map(|q| q.value)
                .unwrap_or(f64::NAN)
            }
        }
    }
}

pub fn mollifier_eval(m: &Mollifier, u: f64) -> f64 {
    m.eval(u)
}
