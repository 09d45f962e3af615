//! Pre-limit transition kernels K^n, analytic limit coefficients, and single-step sampling.
//!
//! All three walks tie the scales as τ = (Δx)² = 1/n, so `n` is the only scale knob.

mod model;
mod verify;

pub use model::{
    norm, point_from_slice, BetaFn, DirectionLaw, DriftFn, LevyWalk, ModelId, ModelSpec, ParetoWait, Point, Subdiffusion,
    VariableOrder, Violation, MAX_DIM,
};
pub use verify::{pareto_expectation, verify_coefficient_limits, Bump, VerifierSettings};

use rand::Rng;

use crate::error::{check_order, domain, Result};
use crate::quad::{self, Estimate, Tolerance};
use crate::special::{gamma, power_density, power_tail, rgamma};

/// Waiting-time density exactly as printed for the subdiffusive walk:
/// β/Γ(1-β) · τ^{-1/β} · (1 + w τ^{-1/β})^{-1-β}.
///
/// Its total mass is [`pareto_mass`], not one. Samplers use the normalized [`ParetoWait`].
pub fn pareto_density(beta: f64, tau: f64, w: f64) -> Result<f64> {
    check_order("beta", beta)?;
    if !(tau > 0.0) {
        return Err(domain(format!("tau = {tau} must be positive")));
    }
    if w < 0.0 {
        return Ok(0.0);
    }
    let s = tau.powf(-1.0 / beta);
    Ok(beta * rgamma(1.0 - beta) * s * (1.0 + w * s).powf(-1.0 - beta))
}

/// Closed-form tail ∫_w^∞ of [`pareto_density`]: (1 + w τ^{-1/β})^{-β} / Γ(1-β).
pub fn pareto_tail(beta: f64, tau: f64, w: f64) -> Result<f64> {
    check_order("beta", beta)?;
    if !(tau > 0.0) {
        return Err(domain(format!("tau = {tau} must be positive")));
    }
    Ok((1.0 + w.max(0.0) * tau.powf(-1.0 / beta)).powf(-beta) * rgamma(1.0 - beta))
}

/// Total mass 1/Γ(1-β) of the printed density.
pub fn pareto_mass(beta: f64) -> Result<f64> {
    check_order("beta", beta)?;
    Ok(rgamma(1.0 - beta))
}

/// H_β(w) = w^{-β}/Γ(1-β), the tail of the limiting Lévy density.
pub fn levy_tail(beta: f64, w: f64) -> Result<f64> {
    check_order("beta", beta)?;
    if !(w > 0.0) {
        return Err(domain(format!("w = {w} must be positive")));
    }
    Ok(power_tail(beta, w))
}

/// h_β(w) = β w^{-β-1}/Γ(1-β).
pub fn levy_density(beta: f64, w: f64) -> Result<f64> {
    check_order("beta", beta)?;
    if !(w > 0.0) {
        return Err(domain(format!("w = {w} must be positive")));
    }
    Ok(power_density(beta, w))
}

/// Temporal jump map of the variable-order driver:
/// F₂(η) = (Γ(1-β(x))/Γ(1-β₀))^{-1/β(x)} · η^{β₀/β(x)}.
pub fn f2_map(beta0: f64, beta_x: f64, eta: f64) -> Result<f64> {
    check_order("beta0", beta0)?;
    check_order("beta_x", beta_x)?;
    if !(eta > 0.0) {
        return Err(domain(format!("eta = {eta} must be positive")));
    }
    Ok(f2_unchecked(beta0, beta_x, eta))
}

#[inline]
pub(crate) fn f2_unchecked(beta0: f64, beta_x: f64, eta: f64) -> f64 {
    (gamma(1.0 - beta_x) / gamma(1.0 - beta0)).powf(-1.0 / beta_x) * eta.powf(beta0 / beta_x)
}

/// The η threshold with F₂(η) > w ⇔ η > threshold: ((Γ(1-β(x))/Γ(1-β₀)) w^{β(x)})^{1/β₀}.
pub fn f2_preimage(beta0: f64, beta_x: f64, w: f64) -> Result<f64> {
    check_order("beta0", beta0)?;
    check_order("beta_x", beta_x)?;
    if !(w > 0.0) {
        return Err(domain(format!("w = {w} must be positive")));
    }
    Ok((gamma(1.0 - beta_x) / gamma(1.0 - beta0) * w.powf(beta_x)).powf(1.0 / beta0))
}

/// One (jump, wait) pair drawn from K^n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub jump: Point,
    pub wait: f64,
}

/// K^n for a fixed model and scale, with the per-scale constants cached.
#[derive(Debug, Clone)]
pub struct PrelimitKernel<'a> {
    model: &'a ModelSpec,
    n: f64,
    dx: f64,
    tau: f64,
    wait: Option<ParetoWait>,
}

impl<'a> PrelimitKernel<'a> {
    pub fn new(model: &'a ModelSpec, n: f64) -> Result<Self> {
        model.check()?;
        if !(n >= 1.0) {
            return Err(domain(format!("scale n = {n} must be at least 1")));
        }
        let dx = n.powf(-0.5);
        if let ModelSpec::Subdiffusion(m) = model {
            if m.drift.bound() * dx >= 1.0 {
                return Err(domain(format!(
                    "scale n = {n} too small: |b|·Δx = {} must stay below 1",
                    m.drift.bound() * dx
                )));
            }
        }
        let wait = match model {
            ModelSpec::Subdiffusion(m) => Some(ParetoWait::at_scale(m.beta, n)),
            ModelSpec::LevyWalk(m) => Some(ParetoWait::at_scale(m.beta, n)),
            ModelSpec::VariableOrder(_) => None,
        };
        Ok(Self { model, n, dx, tau: 1.0 / n, wait })
    }

    pub fn scale(&self) -> f64 {
        self.n
    }

    pub fn lattice_spacing(&self) -> f64 {
        self.dx
    }

    pub fn wait_law(&self, x: &Point) -> ParetoWait {
        self.wait.unwrap_or_else(|| ParetoWait::at_scale(self.model.order_at(x), self.n))
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &Point, t: f64, rng: &mut R) -> StepSample {
        match self.model {
            ModelSpec::Subdiffusion(m) => {
                let wait = self.wait_law(x).sample(rng);
                // Direction probabilities are read at the instant of the jump, t + wait.
                let b = m.drift.eval(x, t + wait, 1)[0];
                let p_right = (0.5 * (1.0 + b * self.dx)).clamp(0.0, 1.0);
                let sign = if rng.random::<f64>() < p_right { 1.0 } else { -1.0 };
                StepSample { jump: [sign * self.dx, 0.0, 0.0], wait }
            }
            ModelSpec::VariableOrder(_) => {
                let wait = self.wait_law(x).sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                StepSample { jump: [sign * self.dx, 0.0, 0.0], wait }
            }
            ModelSpec::LevyWalk(m) => {
                let r = self.wait_law(x).sample(rng);
                let theta = m.directions.sample(m.dimension, rng);
                let bias = m.drift.eval(x, t, m.dimension);
                let mut jump = [0.0; MAX_DIM];
                for i in 0..m.dimension {
                    jump[i] = r * theta[i] + self.tau * bias[i];
                }
                StepSample { jump, wait: r }
            }
        }
    }
}

/// Draws one step of K^n at (x, t).
pub fn sample_step<R: Rng + ?Sized>(model: &ModelSpec, x: &[f64], t: f64, n: f64, rng: &mut R) -> Result<StepSample> {
    let kernel = PrelimitKernel::new(model, n)?;
    Ok(kernel.sample(&point_from_slice(x), t, rng))
}

/// Analytic limits (b, c, a, Π) of the kernel moments.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCoefficients {
    model: ModelSpec,
}

impl LimitCoefficients {
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// b(x,t): limit of n∫∫_{‖y‖<1} y K^n.
    ///
    /// For the Lévy walk this is b̃ plus ∫_{‖y‖<1} y Π(dy,dw), the shift that the
    /// truncated compensator picks up; it vanishes when λ has zero mean.
    pub fn drift(&self, x: &Point, t: f64) -> Point {
        let mut b = self.model.drift_at(x, t);
        if let ModelSpec::LevyWalk(m) = &self.model {
            let mean = m.directions.mean(m.dimension);
            let small = truncated_moment(m.beta, 1, 1.0);
            for i in 0..m.dimension {
                b[i] += mean[i] * small;
            }
        }
        b
    }

    /// c(x,t), identically zero for all three walks.
    pub fn temporal_drift(&self, _x: &Point, _t: f64) -> f64 {
        0.0
    }

    /// a(x,t): identity for the lattice walks, zero for the Lévy walk.
    pub fn diffusion(&self, _x: &Point, _t: f64) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        if self.model.decoupled() {
            a[0][0] = 1.0;
        }
        a
    }

    /// Order of the waiting-time tail at x.
    pub fn order(&self, x: &Point) -> f64 {
        self.model.order_at(x)
    }

    /// H(x,w) = Π(x; R^d × (w,∞)) = w^{-β(x)}/Γ(1-β(x)).
    pub fn wait_tail(&self, x: &Point, w: f64) -> f64 {
        power_tail(self.order(x), w)
    }

    /// Π is carried by the coordinate axes (no simultaneous space-time jumps).
    pub fn supported_on_axes(&self) -> bool {
        self.model.decoupled()
    }

    /// ∫∫ g(y,w) Π(x,t;dy,dw) for g vanishing outside w ∈ [w_lo, w_hi] (w_lo > 0).
    pub fn integrate_jumps<G: FnMut(&Point, f64) -> f64>(
        &self,
        x: &Point,
        mut g: G,
        w_lo: f64,
        w_hi: f64,
        tol: Tolerance,
    ) -> Result<Estimate> {
        let beta = self.order(x);
        match &self.model {
            ModelSpec::LevyWalk(m) => {
                let mut acc = Estimate { value: 0.0, error: 0.0 };
                for (theta, weight) in m.directions.nodes(m.dimension) {
                    let e = quad::integrate(
                        |r| {
                            let y = [r * theta[0], r * theta[1], r * theta[2]];
                            g(&y, r) * power_density(beta, r)
                        },
                        w_lo,
                        w_hi,
                        tol,
                    )?;
                    acc.value += weight * e.value;
                    acc.error += weight * e.error;
                }
                Ok(acc)
            }
            _ => quad::integrate(|w| g(&[0.0; MAX_DIM], w) * power_density(beta, w), w_lo, w_hi, tol),
        }
    }
}

/// ∫_0^ε r^k h_β(r) dr = β ε^{k-β} / ((k-β) Γ(1-β)), for k ≥ 1.
pub(crate) fn truncated_moment(beta: f64, k: i32, eps: f64) -> f64 {
    let k = k as f64;
    beta * eps.powf(k - beta) / (k - beta) * rgamma(1.0 - beta)
}

pub fn limit_coefficients(model: &ModelSpec) -> LimitCoefficients {
    LimitCoefficients { model: model.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn printed_density_at_origin() {
        let v = pareto_density(0.5, 1.0, 0.0).unwrap();
        assert!((v - 0.5 / PI.sqrt()).abs() < 1e-12);
        assert!((v - 0.282_095).abs() < 1e-6);
    }

    #[test]
    fn printed_density_decays() {
        assert!(pareto_density(0.5, 1.0, 1e12).unwrap() < 1e-17);
    }

    #[test]
    fn printed_tail_matches_quadrature_of_density() {
        let (beta, tau, w) = (0.3, 0.01, 1.0);
        // w = w0 + e^s; the integrand decays like e^{-βs}.
        let q = quad::integrate_panels(
            |s| pareto_density(beta, tau, w + s.exp()).unwrap() * s.exp(),
            &[-60.0, -10.0, 0.0, 10.0, 40.0, 160.0],
            Tolerance { abs: 1e-14, rel: 1e-12 },
        )
        .unwrap();
        let closed = pareto_tail(beta, tau, w).unwrap();
        assert!((q.value - closed).abs() < 1e-8, "{} vs {}", q.value, closed);
    }

    #[test]
    fn printed_mass_is_reciprocal_gamma() {
        let m = pareto_tail(0.4, 0.3, 0.0).unwrap();
        assert!((m - pareto_mass(0.4).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn levy_tail_values() {
        assert!((levy_tail(0.5, 1.0).unwrap() - 0.564_190).abs() < 1e-6);
        assert!(levy_tail(0.5, 1e30).unwrap() < 1e-14);
        assert!(levy_tail(0.5, 0.0).is_err());
        assert!(levy_tail(1.0, 1.0).is_err());
    }

    #[test]
    fn levy_tail_matches_quadrature_of_density() {
        let w = 0.7;
        // r = w / u^2 maps (0,1] onto [w, ∞): dr = 2w u^{-3} du
        let q = quad::integrate(
            |u| if u == 0.0 { 0.0 } else { power_density(0.5, w / (u * u)) * 2.0 * w / (u * u * u) },
            0.0,
            1.0,
            Tolerance { abs: 1e-12, rel: 1e-12 },
        )
        .unwrap();
        assert!((q.value - levy_tail(0.5, w).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn f2_identity_when_orders_agree() {
        for &eta in &[1e-3, 0.5, 2.0, 40.0] {
            assert!((f2_map(0.4, 0.4, eta).unwrap() - eta).abs() < 1e-12 * eta.max(1.0));
        }
    }

    #[test]
    fn f2_reference_value() {
        let v = f2_map(0.5, 0.25, 1.0).unwrap();
        let expected = (gamma(0.75) / gamma(0.5)).powi(-4);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 4.3764).abs() < 1e-3);
    }

    #[test]
    fn f2_pushforward_reproduces_variable_tail() {
        let (b0, bx, w) = (0.5, 0.25, 2.0);
        let lhs = power_tail(b0, f2_preimage(b0, bx, w).unwrap());
        let rhs = power_tail(bx, w);
        assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        // And the preimage really is the threshold of F₂.
        let eta = f2_preimage(b0, bx, w).unwrap();
        assert!((f2_map(b0, bx, eta).unwrap() - w).abs() < 1e-12);
    }

    #[test]
    fn symmetric_walk_without_drift_is_unbiased() {
        let model = ModelSpec::subdiffusion(0.6, DriftFn::Zero);
        let kernel = PrelimitKernel::new(&model, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let ups = (0..n).filter(|_| kernel.sample(&[0.0; 3], 0.0, &mut rng).jump[0] > 0.0).count();
        let p = ups as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn drifted_walk_has_mean_sign_b_dx() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Constant { value: vec![1.0] });
        let kernel = PrelimitKernel::new(&model, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let sum: f64 = (0..n).map(|_| kernel.sample(&[0.0; 3], 0.0, &mut rng).jump[0].signum()).sum();
        let mean = sum / n as f64;
        let se = ((1.0 - 0.01) / n as f64).sqrt();
        assert!((mean - 0.1).abs() < 3.0 * se, "mean sign {mean}");
    }

    #[test]
    fn levy_walk_jump_length_equals_wait() {
        let model = ModelSpec::levy_walk(0.5, DriftFn::Constant { value: vec![0.3] }, DirectionLaw::Uniform, 1);
        let n = 50.0;
        let kernel = PrelimitKernel::new(&model, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let s = kernel.sample(&[0.0; 3], 0.0, &mut rng);
            let spatial = s.jump[0] - 0.3 / n;
            assert!((spatial.abs() - s.wait).abs() <= 1e-15 * s.wait.max(1.0));
        }
        let free = ModelSpec::levy_walk(0.5, DriftFn::Zero, DirectionLaw::Uniform, 3);
        let kernel = PrelimitKernel::new(&free, n).unwrap();
        for _ in 0..10_000 {
            let s = kernel.sample(&[0.0; 3], 0.0, &mut rng);
            assert!((norm(&s.jump, 3) - s.wait).abs() <= 4.0 * f64::EPSILON * s.wait);
        }
    }

    #[test]
    fn wait_tail_matches_normalized_pareto() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        let kernel = PrelimitKernel::new(&model, 1.0).unwrap();
        let law = kernel.wait_law(&[0.0; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let waits: Vec<f64> = (0..n).map(|_| kernel.sample(&[0.0; 3], 0.0, &mut rng).wait).collect();
        for &w in &[1.0, 10.0, 100.0] {
            let p = law.survival(w);
            let emp = waits.iter().filter(|&&v| v > w).count() as f64 / n as f64;
            assert!((emp - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "w={w}: {emp} vs {p}");
            // The sampler's tail is the printed tail at the rescaled τ' = τ/Γ(1-β), normalized.
            let tau_eff = rgamma(0.5);
            let printed = pareto_tail(0.5, tau_eff, w).unwrap() / pareto_tail(0.5, tau_eff, 0.0).unwrap();
            assert!((printed - p).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficients_per_model() {
        let x = [0.3, 0.0, 0.0];
        let c41 = limit_coefficients(&ModelSpec::subdiffusion(0.5, DriftFn::SinCos { amplitude: 1.0 }));
        for &t in &[-1.0, 0.0, 2.5] {
            assert_eq!(c41.diffusion(&x, t)[0][0], 1.0);
            assert!((c41.drift(&x, t)[0] - 0.3f64.sin() * t.cos()).abs() < 1e-15);
        }
        assert!(c41.supported_on_axes());

        let beta_fn = BetaFn::Constant { beta: 0.5 };
        let c42 = limit_coefficients(&ModelSpec::variable_order(beta_fn));
        assert!((c42.wait_tail(&x, 2.0) - 2f64.powf(-0.5) / PI.sqrt()).abs() < 1e-14);
        assert_eq!(c42.drift(&x, 0.0)[0], 0.0);

        let c43 = limit_coefficients(&ModelSpec::levy_walk(0.5, DriftFn::Zero, DirectionLaw::Uniform, 2));
        assert_eq!(c43.temporal_drift(&x, 1.0), 0.0);
        assert_eq!(c43.diffusion(&x, 1.0), [[0.0; 3]; 3]);
        assert!(!c43.supported_on_axes());
    }

    #[test]
    fn tanh_order_gives_expected_tail() {
        // β(x) = 0.5 at the tanh centre.
        let c = limit_coefficients(&ModelSpec::variable_order(BetaFn::default()));
        let h = c.wait_tail(&[0.0; 3], 1.7);
        assert!((h - 1.7f64.powf(-0.5) / PI.sqrt()).abs() < 1e-14);
    }
}
