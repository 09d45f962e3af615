//! Numerical check that the rescaled kernel moments approach the analytic limit coefficients.
//!
//! Moments are truncated to the box {‖y‖ < ε, w < ε} (the drift uses ‖y‖ < 1), and the
//! jump part is probed with smooth radial bumps in ‖(y, w)‖ that vanish near the origin.

use serde::{Deserialize, Serialize};

use super::model::{norm, ModelSpec, ParetoWait, Point, MAX_DIM};
use super::{limit_coefficients, truncated_moment, PrelimitKernel};
use crate::error::{domain, Result};
use crate::quad::{self, Estimate, Tolerance};
use crate::report::{ConvergenceReport, QuantityConvergence};
use crate::special::power_density;

/// Smooth bump exp(1 - 1/(1 - (2s-1)²)) in s = (ρ - inner)/(outer - inner), zero off the annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub inner: f64,
    pub outer: f64,
}

impl Bump {
    pub fn eval(&self, rho: f64) -> f64 {
        if rho <= self.inner || rho >= self.outer {
            return 0.0;
        }
        let s = 2.0 * (rho - self.inner) / (self.outer - self.inner) - 1.0;
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }

    fn label(&self) -> String {
        format!("bump_{}_{}", self.inner, self.outer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierSettings {
    /// Half-width ε of the truncation box for the temporal drift and diffusion moments.
    pub truncation: f64,
    pub bumps: Vec<Bump>,
    /// Oscillatory expectations are integrated panel-wise up to this wait; the rest is bounded.
    pub w_max: f64,
    pub tolerance: Tolerance,
}

impl Default for VerifierSettings {
    fn default() -> Self {
        Self {
            truncation: 0.5,
            bumps: vec![
                Bump { inner: 0.5, outer: 1.0 },
                Bump { inner: 1.0, outer: 2.0 },
                Bump { inner: 2.0, outer: 4.0 },
            ],
            w_max: 1e4,
            tolerance: Tolerance { abs: 1e-9, rel: 1e-10 },
        }
    }
}

/// E[g(W); lo < W < hi] for the Lomax law.
///
/// On [lo, 1] the substitution u = P(W > w) flattens the density spike at the origin;
/// beyond 1 the integral runs over unit panels (finite `hi`) or is substituted again (infinite `hi`).
pub fn pareto_expectation<G: FnMut(f64) -> f64>(
    law: &ParetoWait,
    mut g: G,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let lo = lo.max(0.0);
    if !(hi > lo) {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let by_survival = |a: f64, b: f64, g: &mut G| {
        quad::integrate(|u| g(law.quantile_survival(u)), law.survival(b), law.survival(a), tol)
    };
    let near = by_survival(lo, hi.min(1.0), &mut g)?;
    if hi <= 1.0 {
        return Ok(near);
    }
    let far = if hi.is_finite() {
        let lower = lo.max(1.0);
        let mut breaks: Vec<f64> = (0..).map(|k| lower + k as f64).take_while(|&w| w < hi).collect();
        breaks.push(hi);
        quad::integrate_panels(|w| g(w) * law.pdf(w), &breaks, tol)?
    } else {
        by_survival(lo.max(1.0), f64::INFINITY, &mut g)?
    };
    Ok(Estimate { value: near.value + far.value, error: near.error + far.error })
}

/// Largest r ≥ 0 with ‖rθ + c‖ < radius (θ a unit vector), zero if none.
fn radial_limit(theta: &Point, c: &Point, dim: usize, radius: f64) -> f64 {
    let tc: f64 = (0..dim).map(|i| theta[i] * c[i]).sum();
    let cc: f64 = (0..dim).map(|i| c[i] * c[i]).sum();
    let disc = tc * tc - cc + radius * radius;
    if disc <= 0.0 {
        return 0.0;
    }
    (-tc + disc.sqrt()).max(0.0)
}

struct Row {
    gap: f64,
    error: f64,
}

/// Gaps between n·(kernel moments) and their limits at each scale.
pub fn verify_coefficient_limits(model: &ModelSpec, x: &[f64], t: f64, scales: &[f64]) -> Result<ConvergenceReport> {
    verify_with(model, x, t, scales, &VerifierSettings::default())
}

pub fn verify_with(
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    scales: &[f64],
    settings: &VerifierSettings,
) -> Result<ConvergenceReport> {
    model.check()?;
    if scales.is_empty() {
        return Err(domain("at least one scale is required"));
    }
    if scales.iter().any(|&n| !(n >= 1.0)) || scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("scales must be strictly increasing and at least 1"));
    }
    if x.len() != model.dimension() {
        return Err(domain(format!("position has {} coordinates, model dimension is {}", x.len(), model.dimension())));
    }
    let x = super::point_from_slice(x);
    let names: Vec<String> = ["drift", "temporal_drift", "diffusion"]
        .iter()
        .map(|s| s.to_string())
        .chain(settings.bumps.iter().map(Bump::label))
        .collect();
    let mut gaps = vec![Vec::new(); names.len()];
    let mut errors = vec![Vec::new(); names.len()];
    for &n in scales {
        let rows = match model {
            ModelSpec::LevyWalk(_) => coupled_rows(model, &x, t, n, settings)?,
            _ => lattice_rows(model, &x, t, n, settings)?,
        };
        for (k, row) in rows.into_iter().enumerate() {
            gaps[k].push(row.gap);
            errors[k].push(row.error);
        }
    }
    let quantities = names
        .into_iter()
        .zip(gaps.into_iter().zip(errors))
        .map(|(name, (g, e))| QuantityConvergence::new(name, scales, g, e, 0.0))
        .collect();
    Ok(ConvergenceReport::new(format!("{:?} coefficient limits", model.id()), scales.to_vec(), quantities, None))
}

fn bump_limit(bump: &Bump, beta: f64, stretch: f64, tol: Tolerance) -> Result<f64> {
    // ρ = stretch·w on the limit measure's support.
    Ok(quad::integrate(|w| bump.eval(stretch * w) * power_density(beta, w), bump.inner / stretch, bump.outer / stretch, tol)?.value)
}

/// Models with y = ±Δx and an independent wait.
fn lattice_rows(model: &ModelSpec, x: &Point, t: f64, n: f64, s: &VerifierSettings) -> Result<Vec<Row>> {
    let kernel = PrelimitKernel::new(model, n)?;
    let law = kernel.wait_law(x);
    let beta = law.beta;
    let dx = kernel.lattice_spacing();
    let eps = s.truncation;
    let tol = s.tolerance;
    let mut rows = Vec::new();

    // n·Δx·E[r - ℓ] = E[b(x, t + W)]; the only gap is the drift read at the jump instant.
    let drift = match model.drift() {
        Some(b) if b.depends_on_time() => {
            let b0 = b.eval(x, t, 1)[0];
            let e = pareto_expectation(&law, |w| b.eval(x, t + w, 1)[0] - b0, 0.0, s.w_max, tol)?;
            Row { gap: e.value.abs(), error: e.error + 2.0 * b.bound() * law.survival(s.w_max) }
        }
        _ => Row { gap: 0.0, error: 0.0 },
    };
    rows.push(drift);

    let inside = dx < eps;
    let temporal = if inside { pareto_expectation(&law, |w| n * w, 0.0, eps, tol)? } else { Estimate { value: 0.0, error: 0.0 } };
    rows.push(Row { gap: (temporal.value - truncated_moment(beta, 1, eps)).abs(), error: temporal.error });

    // n·Δx² = 1, so the truncated second moment is P(W < ε).
    let diffusion = if inside { 1.0 - law.survival(eps) } else { 0.0 };
    rows.push(Row { gap: (diffusion - 1.0).abs(), error: 0.0 });

    for bump in &s.bumps {
        let lo = (bump.inner * bump.inner - dx * dx).max(0.0).sqrt();
        let hi = (bump.outer * bump.outer - dx * dx).max(0.0).sqrt();
        let e = quad::integrate(|w| n * bump.eval((dx * dx + w * w).sqrt()) * law.pdf(w), lo, hi.max(lo), tol)?;
        let limit = bump_limit(bump, beta, 1.0, tol)?;
        rows.push(Row { gap: (e.value - limit).abs(), error: e.error });
    }
    Ok(rows)
}

/// Lévy walk: y = rθ + τ b̃, w = r.
fn coupled_rows(model: &ModelSpec, x: &Point, t: f64, n: f64, s: &VerifierSettings) -> Result<Vec<Row>> {
    let ModelSpec::LevyWalk(m) = model else { unreachable!("coupled rows need a Lévy walk") };
    let kernel = PrelimitKernel::new(model, n)?;
    let law = kernel.wait_law(x);
    let dim = m.dimension;
    let beta = m.beta;
    let eps = s.truncation;
    let tol = s.tolerance;
    let bias = m.drift.eval(x, t, dim);
    let mut c = [0.0; MAX_DIM];
    for i in 0..dim {
        c[i] = bias[i] / n;
    }
    let c_norm = norm(&c, dim);

    let mut drift = [0.0; MAX_DIM];
    let mut drift_err = 0.0;
    let mut temporal = Estimate { value: 0.0, error: 0.0 };
    let mut diff = [[0.0; MAX_DIM]; MAX_DIM];
    let mut diff_err = 0.0;
    let mut bumps = vec![Estimate { value: 0.0, error: 0.0 }; s.bumps.len()];
    for (theta, weight) in m.directions.nodes(dim) {
        let r1 = radial_limit(&theta, &c, dim, 1.0);
        let m1 = pareto_expectation(&law, |r| n * r, 0.0, r1, tol)?;
        let m0 = 1.0 - law.survival(r1);
        for i in 0..dim {
            drift[i] += weight * (theta[i] * m1.value + bias[i] * m0);
        }
        drift_err += weight * m1.error;

        let rb = radial_limit(&theta, &c, dim, eps).min(eps);
        let t1 = pareto_expectation(&law, |r| n * r, 0.0, rb, tol)?;
        let t2 = pareto_expectation(&law, |r| n * r * r, 0.0, rb, tol)?;
        let t0 = n * (1.0 - law.survival(rb));
        temporal.value += weight * t1.value;
        temporal.error += weight * t1.error;
        for i in 0..dim {
            for j in 0..dim {
                diff[i][j] += weight
                    * (theta[i] * theta[j] * t2.value
                        + (theta[i] * c[j] + c[i] * theta[j]) * t1.value
                        + c[i] * c[j] * t0);
            }
        }
        diff_err += weight * (t2.error + 2.0 * c_norm * t1.error);

        for (acc, bump) in bumps.iter_mut().zip(&s.bumps) {
            let lo = (bump.inner / 2f64.sqrt() - c_norm).max(0.0);
            let hi = bump.outer / 2f64.sqrt() + c_norm;
            let e = quad::integrate(
                |r| {
                    let mut y2 = 0.0;
                    for i in 0..dim {
                        y2 += (r * theta[i] + c[i]).powi(2);
                    }
                    n * bump.eval((y2 + r * r).sqrt()) * law.pdf(r)
                },
                lo,
                hi,
                tol,
            )?;
            acc.value += weight * e.value;
            acc.error += weight * e.error;
        }
    }

    let limits = limit_coefficients(model);
    let b_lim = limits.drift(x, t);
    let mut rows = Vec::new();
    let gap: Vec<f64> = (0..dim).map(|i| drift[i] - b_lim[i]).collect();
    rows.push(Row { gap: gap.iter().map(|g| g * g).sum::<f64>().sqrt(), error: drift_err });
    rows.push(Row { gap: (temporal.value - truncated_moment(beta, 1, eps)).abs(), error: temporal.error });

    let second = truncated_moment(beta, 2, eps);
    let mut outer = [[0.0; MAX_DIM]; MAX_DIM];
    for (theta, weight) in m.directions.nodes(dim) {
        for i in 0..dim {
            for j in 0..dim {
                outer[i][j] += weight * theta[i] * theta[j];
            }
        }
    }
    let mut frob = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            frob += (diff[i][j] - outer[i][j] * second).powi(2);
        }
    }
    rows.push(Row { gap: frob.sqrt(), error: diff_err });

    for (est, bump) in bumps.iter().zip(&s.bumps) {
        let limit = bump_limit(bump, beta, 2f64.sqrt(), tol)?;
        rows.push(Row { gap: (est.value - limit).abs(), error: est.error });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{BetaFn, DirectionLaw, DriftFn};
    use crate::special::rgamma;

    /// E[W; W < R] for the Lomax law, integrated by parts in closed form.
    fn lomax_partial_mean(law: &ParetoWait, r: f64) -> f64 {
        let (b, s) = (law.beta, law.sigma);
        s / (1.0 - b) * ((1.0 + r / s).powf(1.0 - b) - 1.0) - r * law.survival(r)
    }

    #[test]
    fn bump_peaks_at_midpoint_and_vanishes_outside() {
        let b = Bump { inner: 1.0, outer: 2.0 };
        assert_eq!(b.eval(1.5), 1.0);
        assert_eq!(b.eval(0.9), 0.0);
        assert_eq!(b.eval(2.0), 0.0);
        assert!(b.eval(1.01) > 0.0 && b.eval(1.01) < 1e-10);
    }

    #[test]
    fn survival_substitution_matches_closed_form_partial_mean() {
        for &(beta, n) in &[(0.5, 100.0), (0.3, 1e4), (0.8, 10.0)] {
            let law = ParetoWait::at_scale(beta, n);
            let q = pareto_expectation(&law, |w| w, 0.0, 0.5, Tolerance { abs: 1e-14, rel: 1e-12 }).unwrap();
            let exact = lomax_partial_mean(&law, 0.5);
            assert!(((q.value - exact) / exact).abs() < 1e-8, "beta {beta} n {n}: {} vs {exact}", q.value);
        }
    }

    #[test]
    fn expectation_of_one_is_total_probability() {
        let law = ParetoWait::at_scale(0.5, 50.0);
        let all = pareto_expectation(&law, |_| 1.0, 0.0, f64::INFINITY, Tolerance::default()).unwrap();
        assert!((all.value - 1.0).abs() < 1e-9);
        let window = pareto_expectation(&law, |_| 1.0, 0.2, 7.5, Tolerance::default()).unwrap();
        assert!((window.value - (law.survival(0.2) - law.survival(7.5))).abs() < 1e-10);
    }

    #[test]
    fn radial_limit_solves_the_quadratic() {
        let theta = [0.6, 0.8, 0.0];
        let c = [0.1, -0.05, 0.0];
        let r = radial_limit(&theta, &c, 2, 1.0);
        let y = [r * theta[0] + c[0], r * theta[1] + c[1], 0.0];
        assert!((norm(&y, 2) - 1.0).abs() < 1e-14);
        assert_eq!(radial_limit(&[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0], 1, 1.0), 0.0);
    }

    #[test]
    fn time_dependent_drift_gap_decreases() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::SinCos { amplitude: 1.0 });
        let rep = verify_coefficient_limits(&model, &[0.3], 0.7, &[10.0, 100.0, 1000.0, 10000.0]).unwrap();
        assert!(rep.passed, "{rep:#?}");
        let drift = rep.quantity("drift").unwrap();
        assert!(drift.gaps[0] > drift.gaps[3]);
        assert!(drift.gaps[3] < 1e-3);
    }

    #[test]
    fn time_independent_drift_has_exact_first_moment() {
        let model = ModelSpec::subdiffusion(0.4, DriftFn::Restoring { amplitude: 0.5, scale: 1.0 });
        let rep = verify_coefficient_limits(&model, &[0.2], 0.0, &[10.0, 100.0]).unwrap();
        assert!(rep.quantity("drift").unwrap().gaps.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn temporal_gap_matches_closed_form() {
        let model = ModelSpec::variable_order(BetaFn::Constant { beta: 0.5 });
        let n = 1000.0;
        let rep = verify_coefficient_limits(&model, &[0.0], 0.0, &[n]).unwrap();
        let law = ParetoWait::at_scale(0.5, n);
        let exact = (n * lomax_partial_mean(&law, 0.5) - 0.5 * 0.5f64.sqrt() / 0.5 * rgamma(0.5)).abs();
        let got = rep.quantity("temporal_drift").unwrap().gaps[0];
        assert!((got - exact).abs() < 1e-7, "{got} vs {exact}");
    }

    #[test]
    fn levy_walk_limits_in_two_dimensions() {
        let model = ModelSpec::levy_walk(0.6, DriftFn::Constant { value: vec![0.3, -0.2] }, DirectionLaw::Uniform, 2);
        let rep = verify_coefficient_limits(&model, &[0.1, 0.4], 0.5, &[100.0, 1000.0, 10000.0]).unwrap();
        assert!(rep.passed, "{rep:#?}");
    }

    #[test]
    fn asymmetric_direction_law_picks_up_compensator_shift() {
        let dirs = DirectionLaw::Discrete { directions: vec![vec![1.0], vec![-1.0]], weights: vec![0.8, 0.2] };
        let model = ModelSpec::levy_walk(0.5, DriftFn::Zero, dirs, 1);
        let rep = verify_coefficient_limits(&model, &[0.0], 0.0, &[100.0, 1000.0, 10000.0]).unwrap();
        assert!(rep.quantity("drift").unwrap().gaps[2] < 0.05);
        assert!(rep.passed);
    }

    #[test]
    fn rejects_unordered_scales() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        assert!(verify_coefficient_limits(&model, &[0.0], 0.0, &[100.0, 10.0]).is_err());
        assert!(verify_coefficient_limits(&model, &[0.0], 0.0, &[0.5]).is_err());
    }
}
