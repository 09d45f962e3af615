//! Gamma-function helpers, power-law tails, and the one-sided stable law.

use std::f64::consts::PI;

use crate::quad::{self, Tolerance};

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// 1/Γ(x), finite everywhere and exactly zero at the poles of Γ.
pub fn rgamma(x: f64) -> f64 {
    if x > 0.0 {
        return 1.0 / gamma(x);
    }
    if x == x.floor() {
        return 0.0;
    }
    // Reflection: 1/Γ(x) = Γ(1-x) sin(πx) / π
    gamma(1.0 - x) * (PI * x).sin() / PI
}

/// Tail of the Lévy density h_β: H_β(w) = w^{-β} / Γ(1-β) for w > 0.
#[inline]
pub fn power_tail(beta: f64, w: f64) -> f64 {
    if w <= 0.0 {
        f64::INFINITY
    } else {
        w.powf(-beta) * rgamma(1.0 - beta)
    }
}

/// Lévy density h_β(w) = β w^{-β-1} / Γ(1-β) for w > 0.
#[inline]
pub fn power_density(beta: f64, w: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        beta * w.powf(-beta - 1.0) * rgamma(1.0 - beta)
    }
}

/// Zolotarev's function for the one-sided stable law of index β.
pub(crate) fn zolotarev_a(beta: f64, u: f64) -> f64 {
    let s_bu = (beta * PI * u).sin();
    let s_cu = ((1.0 - beta) * PI * u).sin();
    let s_u = (PI * u).sin();
    let e = 1.0 / (1.0 - beta);
    s_bu.powf(beta * e) * s_cu / s_u.powf(e)
}

/// P(S > x) for the standard positive β-stable variate with E[e^{-λS}] = e^{-λ^β}.
pub fn stable_survival(beta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let z = x.powf(-beta);
    if z <= 2.0 {
        // Convergent series Σ (-1)^{k+1} z^k / (k! Γ(1-kβ)).
        let mut sum = 0.0;
        let mut zk_over_fact = 1.0;
        let mut small = 0;
        for k in 1..400 {
            zk_over_fact *= z / k as f64;
            let term = zk_over_fact * rgamma(1.0 - k as f64 * beta);
            sum += if k % 2 == 1 { term } else { -term };
            // 1/Γ(1-kβ) vanishes at isolated k, so wait for a run of negligible terms.
            small = if term.abs() < 1e-18 * sum.abs() { small + 1 } else { 0 };
            if small >= 3 {
                break;
            }
        }
        sum.clamp(0.0, 1.0)
    } else {
        // Kanter/Zolotarev: P(S <= x) = ∫_0^1 exp(-A(u) x^{-β/(1-β)}) du.
        let c = x.powf(-beta / (1.0 - beta));
        let cdf = quad::integrate(|u| (-zolotarev_a(beta, u) * c).exp(), 0.0, 1.0, Tolerance { abs: 1e-14, rel: 1e-12 })
            .map(|e| e.value)
            .unwrap_or(0.0);
        (1.0 - cdf).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 2/√π ∫_0^x e^{-s²} ds by quadrature.
    fn erf(x: f64) -> f64 {
        let tol = Tolerance { abs: 1e-16, rel: 1e-15 };
        2.0 / PI.sqrt() * quad::integrate(|s| (-s * s).exp(), 0.0, x, tol).unwrap().value
    }

    #[test]
    fn rgamma_at_poles_and_reflection() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-2.0), 0.0);
        // Γ(-0.5) = -2√π
        assert!((rgamma(-0.5) + 1.0 / (2.0 * PI.sqrt())).abs() < 1e-14);
        assert!((rgamma(0.5) - 1.0 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn half_stable_survival_matches_levy_closed_form() {
        // β = 1/2: S = 1/(2Z²), so P(S > x) = erf(1/(2√x)).
        for &x in &[1e-3f64, 0.05, 0.2, 0.25, 0.3, 1.0, 4.0, 100.0, 1e6] {
            let exact = erf(0.5 / x.sqrt());
            let got = stable_survival(0.5, x);
            assert!((got - exact).abs() < 1e-11, "x={x}: {got} vs {exact}");
        }
    }

    #[test]
    fn survival_branches_agree_at_switch() {
        for &beta in &[0.2, 0.35, 0.6, 0.8] {
            let x_switch = 2f64.powf(-1.0 / beta);
            let below = stable_survival(beta, x_switch * (1.0 - 1e-9));
            let above = stable_survival(beta, x_switch * (1.0 + 1e-9));
            assert!((below - above).abs() < 1e-8, "beta={beta}: {below} vs {above}");
        }
    }

    #[test]
    fn survival_tail_is_power_law() {
        let beta = 0.7;
        let x = 1e8;
        let ratio = stable_survival(beta, x) / power_tail(beta, x);
        assert!((ratio - 1.0).abs() < 1e-4);
    }
}
