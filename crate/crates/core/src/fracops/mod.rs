//! Grünwald–Letnikov stencils, the right-sided (negative) fractional derivative, and the
//! power-law memory kernel V(t) = t^{β-1}/Γ(β) with its convolution operator M.

use crate::error::{domain, Error, Result};
use crate::kernels::{BetaFn, ModelSpec, Point};
use crate::quad::{self, Estimate, Tolerance};
use crate::special::{gamma, power_tail, rgamma};

/// Grünwald–Letnikov weights w_k = (-1)^k C(order, k), k < n, by w_k = w_{k-1}(k-1-order)/k.
pub fn gl_weights(order: f64, n: usize) -> Result<Vec<f64>> {
    if !(0.0..2.0).contains(&order) {
        return Err(domain(format!("order = {order} must lie in [0, 2)")));
    }
    if n == 0 {
        return Err(domain("at least one weight is required"));
    }
    let mut w = Vec::with_capacity(n);
    w.push(1.0);
    for k in 1..n {
        let prev = w[k - 1];
        w.push(prev * (k as f64 - 1.0 - order) / k as f64);
    }
    Ok(w)
}

/// A fixed-order GL stencil on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalStencil {
    pub order: f64,
    pub weights: Vec<f64>,
    pub dt: f64,
}

impl FractionalStencil {
    pub fn new(order: f64, n: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(domain(format!("dt = {dt} must be positive")));
        }
        Ok(Self { order, weights: gl_weights(order, n)?, dt })
    }

    /// dt^{-order} Σ_{k=0}^{m} w_k f[m-k], the left-sided derivative at node m.
    pub fn left_at(&self, f: &[f64], m: usize) -> f64 {
        let s: f64 = (0..=m).map(|k| self.weights[k] * f[m - k]).sum();
        s * self.dt.powf(-self.order)
    }

    /// dt^{-order} Σ_{k≥0} w_k f[m+k], the right-sided derivative at node m.
    pub fn right_at(&self, f: &[f64], m: usize) -> f64 {
        let s: f64 = (0..f.len() - m).map(|k| self.weights[k] * f[m + k]).sum();
        s * self.dt.powf(-self.order)
    }
}

/// GL stencils cached per distinct order (orders within 1e-12 share one entry).
#[derive(Debug, Clone, Default)]
pub struct WeightCache {
    entries: Vec<(f64, Vec<f64>)>,
    len: usize,
}

impl WeightCache {
    pub fn new(len: usize) -> Self {
        Self { entries: Vec::new(), len }
    }

    /// Index of the entry for `order`, creating it if needed.
    pub fn index_of(&mut self, order: f64) -> Result<usize> {
        if let Some(i) = self.entries.iter().position(|(o, _)| (o - order).abs() <= 1e-12) {
            return Ok(i);
        }
        self.entries.push((order, gl_weights(order, self.len)?));
        Ok(self.entries.len() - 1)
    }

    pub fn weights(&self, index: usize) -> &[f64] {
        &self.entries[index].1
    }

    pub fn order(&self, index: usize) -> f64 {
        self.entries[index].0
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }
}

fn check_series(series: &[f64], dt: f64) -> Result<()> {
    if series.is_empty() {
        return Err(Error::LengthMismatch { expected: 1, got: 0 });
    }
    if !(dt > 0.0) {
        return Err(domain(format!("dt = {dt} must be positive")));
    }
    Ok(())
}

/// Left-sided Riemann–Liouville derivative by the GL sum, for a series sampled from t = 0.
pub fn rl_derivative(series: &[f64], order: f64, dt: f64) -> Result<Vec<f64>> {
    check_series(series, dt)?;
    let st = FractionalStencil::new(order, series.len(), dt)?;
    Ok((0..series.len()).map(|m| st.left_at(series, m)).collect())
}

/// Right-sided GL derivative, the grid counterpart of ∂^β/∂(-t)^β; the formal adjoint of [`rl_derivative`].
pub fn rl_derivative_right(series: &[f64], order: f64, dt: f64) -> Result<Vec<f64>> {
    check_series(series, dt)?;
    let st = FractionalStencil::new(order, series.len(), dt)?;
    Ok((0..series.len()).map(|m| st.right_at(series, m)).collect())
}

/// ∫_0^∞ [f(t) - f(t+w)] h_β(w) dw, integrated up to w = `upper_cut`.
///
/// On (0, 1) the substitution w = u^{1/(1-β)} cancels the w^{-β-1} singularity; on (1, cut)
/// the substitution u = w^{-β} turns h_β dw into du/Γ(1-β). The neglected tail is at most
/// 2·`sup_f`·H_β(cut), which is added to the reported error.
pub fn negative_fractional_derivative<F: Fn(f64) -> f64>(
    f: F,
    beta: f64,
    t: f64,
    upper_cut: f64,
    sup_f: f64,
) -> Result<Estimate> {
    crate::error::check_order("beta", beta)?;
    if !(upper_cut > 1.0) {
        return Err(domain(format!("upper_cut = {upper_cut} must exceed 1")));
    }
    let tol = Tolerance { abs: 1e-9, rel: 1e-10 };
    let ft = f(t);
    let k = beta / (1.0 - beta) * rgamma(1.0 - beta);
    let near = quad::integrate(
        |u| {
            let w = u.powf(1.0 / (1.0 - beta));
            if w <= 0.0 {
                return 0.0;
            }
            k * (ft - f(t + w)) / w
        },
        0.0,
        1.0,
        tol,
    )?;
    let u_lo = if upper_cut.is_finite() { upper_cut.powf(-beta) } else { 0.0 };
    let far = quad::integrate(
        |u| if u <= 0.0 { ft * rgamma(1.0 - beta) } else { (ft - f(t + u.powf(-1.0 / beta))) * rgamma(1.0 - beta) },
        u_lo,
        1.0,
        tol,
    )?;
    let tail = if upper_cut.is_finite() { 2.0 * sup_f * power_tail(beta, upper_cut) } else { 0.0 };
    Ok(Estimate { value: near.value + far.value, error: near.error + far.error + tail })
}

/// The same derivative with the order read from β(x).
pub fn negative_fractional_derivative_at<F: Fn(f64) -> f64>(
    beta_fn: &BetaFn,
    x: f64,
    f: F,
    t: f64,
    upper_cut: f64,
    sup_f: f64,
) -> Result<Estimate> {
    negative_fractional_derivative(f, beta_fn.eval(x), t, upper_cut, sup_f)
}

/// V(x, t) = t^{β(x)-1}/Γ(β(x)), the renewal density of a subordinator with Laplace exponent λ^β.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    model: ModelSpec,
}

impl MemoryKernel {
    pub fn new(model: &ModelSpec) -> Self {
        Self { model: model.clone() }
    }

    pub fn order(&self, x: &Point) -> f64 {
        self.model.order_at(x)
    }

    pub fn value(&self, x: &Point, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(domain(format!("t = {t} must be positive")));
        }
        let beta = self.order(x);
        Ok(t.powf(beta - 1.0) * rgamma(beta))
    }

    /// ∫_0^∞ e^{-λt} V(x,t) dt = λ^{-β(x)}.
    pub fn laplace(&self, x: &Point, lambda: f64) -> f64 {
        lambda.powf(-self.order(x))
    }

    /// ∫_{jdt}^{(j+1)dt} V(x, r) dr for j < n.
    pub fn cell_integrals(&self, x: &Point, dt: f64, n: usize) -> Vec<f64> {
        cell_integrals(self.order(x), dt, n)
    }
}

pub fn memory_kernel_value(model: &ModelSpec, x: &[f64], t: f64) -> Result<f64> {
    MemoryKernel::new(model).value(&crate::kernels::point_from_slice(x), t)
}

/// Exact cell masses of V: (((j+1)dt)^β - (j dt)^β)/Γ(1+β).
pub fn cell_integrals(beta: f64, dt: f64, n: usize) -> Vec<f64> {
    let g = 1.0 / gamma(1.0 + beta);
    (0..n).map(|j| (((j + 1) as f64 * dt).powf(beta) - (j as f64 * dt).powf(beta)) * g).collect()
}

/// (M P)(t) = ∂_t ∫_0^{t-s} P_{t-r} V(r) dr on a uniform grid starting at s.
///
/// V is integrated exactly over each cell and P is averaged over the cell's end points; the
/// outer derivative is a backward difference, so node 0 is zero.
pub fn m_operator_apply(p_series: &[f64], beta: f64, dt: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta = {beta} must lie in (0, 1]")));
    }
    check_series(p_series, dt)?;
    let c = cell_integrals(beta, dt, p_series.len());
    Ok(m_apply_with(p_series, &c, dt))
}

fn m_apply_with(p: &[f64], c: &[f64], dt: f64) -> Vec<f64> {
    let n = p.len();
    let conv: Vec<f64> = (0..n).map(|m| (0..m).map(|j| c[j] * 0.5 * (p[m - j] + p[m - j - 1])).sum()).collect();
    let mut out = vec![0.0; n];
    for m in 1..n {
        out[m] = (conv[m] - conv[m - 1]) / dt;
    }
    out
}

/// M applied node by node to a time-major field (nt × nx) with order β_i at node i.
pub fn m_operator_apply_field(values: &[f64], nt: usize, betas: &[f64], dt: f64) -> Result<Vec<f64>> {
    let nx = betas.len();
    if values.len() != nt * nx {
        return Err(Error::Grid(format!("field has {} values, grid is {nt} × {nx}", values.len())));
    }
    if nt == 0 {
        return Err(Error::Grid("empty time grid".into()));
    }
    let mut cache: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut out = vec![0.0; nt * nx];
    for (i, &beta) in betas.iter().enumerate() {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain(format!("order {beta} at node {i} must lie in (0, 1]")));
        }
        let k = match cache.iter().position(|(b, _)| (b - beta).abs() <= 1e-12) {
            Some(k) => k,
            None => {
                cache.push((beta, cell_integrals(beta, dt, nt)));
                cache.len() - 1
            }
        };
        let column: Vec<f64> = (0..nt).map(|m| values[m * nx + i]).collect();
        for (m, v) in m_apply_with(&column, &cache[k].1, dt).into_iter().enumerate() {
            out[m * nx + i] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DriftFn;
    use proptest::prelude::*;

    #[test]
    fn first_difference_weights() {
        assert_eq!(gl_weights(1.0, 4).unwrap(), vec![1.0, -1.0, 0.0, 0.0]);
        let w = gl_weights(0.5, 3).unwrap();
        assert_eq!(w, vec![1.0, -0.5, -0.125]);
        assert!(gl_weights(2.0, 3).is_err());
        assert!(gl_weights(0.5, 0).is_err());
    }

    #[test]
    fn weight_partial_sums_vanish() {
        let w = gl_weights(0.4, 100_000).unwrap();
        let mut s = 0.0;
        let mut last = f64::INFINITY;
        for (k, v) in w.iter().enumerate() {
            s += v;
            if k > 0 {
                assert!(s.abs() < last);
            }
            last = s.abs();
        }
        // Partial sums decay like N^{-order}/Γ(1-order).
        let n = w.len() as f64;
        assert!((s - n.powf(-0.4) * rgamma(0.6)).abs() < 0.01 * s.abs());
    }

    fn power_rule_error(p: i32, order: f64, n: usize) -> f64 {
        let dt = 1.0 / (n - 1) as f64;
        let f: Vec<f64> = (0..n).map(|k| (k as f64 * dt).powi(p)).collect();
        let d = rl_derivative(&f, order, dt).unwrap();
        let exact = gamma(p as f64 + 1.0) / gamma(p as f64 + 1.0 - order);
        ((d[n - 1] - exact) / exact).abs()
    }

    #[test]
    fn power_rule_for_square() {
        let e = power_rule_error(2, 0.5, 4097);
        assert!(e < 0.01, "{e}");
        assert!((2.0 / gamma(2.5) - 1.504_51).abs() < 1e-5);
    }

    #[test]
    fn power_rule_table() {
        for p in 1..=3 {
            for &order in &[0.3, 0.5, 0.7] {
                let e = power_rule_error(p, order, 4097);
                assert!(e < 0.01, "p {p} order {order}: {e}");
            }
        }
    }

    #[test]
    fn order_zero_is_identity_and_zero_maps_to_zero() {
        let f: Vec<f64> = (0..50).map(|k| (k as f64 * 0.02).sin()).collect();
        assert_eq!(rl_derivative(&f, 0.0, 0.02).unwrap(), f);
        let z = vec![0.0; 30];
        assert!(rl_derivative(&z, 0.5, 0.1).unwrap().iter().all(|&v| v == 0.0));
        assert!(rl_derivative(&[], 0.5, 0.1).is_err());
    }

    #[test]
    fn negative_derivative_of_constant_is_zero() {
        let e = negative_fractional_derivative(|_| 3.0, 0.6, 1.0, f64::INFINITY, 3.0).unwrap();
        assert!(e.value.abs() < 1e-12);
    }

    #[test]
    fn negative_derivative_of_exponential_is_laplace_symbol() {
        let e = negative_fractional_derivative(|t| (-t).exp(), 0.5, 0.0, f64::INFINITY, 1.0).unwrap();
        assert!((e.value - 1.0).abs() < 1e-8, "{}", e.value);
        let lam: f64 = 2.0;
        let e = negative_fractional_derivative(|t| (-lam * t).exp(), 0.3, 0.4, 1e6, 1.0).unwrap();
        let exact = (-lam * 0.4).exp() * lam.powf(0.3);
        assert!((e.value - exact).abs() <= e.error + 1e-8);
    }

    #[test]
    fn variable_order_reduces_to_fixed() {
        let f = |t: f64| 1.0 / (1.0 + t * t);
        let fixed = negative_fractional_derivative(f, 0.35, 0.2, 1e4, 1.0).unwrap();
        let var = negative_fractional_derivative_at(&BetaFn::Constant { beta: 0.35 }, 7.0, f, 0.2, 1e4, 1.0).unwrap();
        assert_eq!(fixed.value, var.value);
    }

    #[test]
    fn memory_kernel_values() {
        let m = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        assert!((memory_kernel_value(&m, &[0.0], 1.0).unwrap() - 0.564_190).abs() < 1e-6);
        assert!(memory_kernel_value(&m, &[0.0], 0.0).is_err());
        let v = ModelSpec::variable_order(BetaFn::Constant { beta: 0.7 });
        assert!((memory_kernel_value(&v, &[3.0], 2.0).unwrap() - 2f64.powf(-0.3) / gamma(0.7)).abs() < 1e-14);
    }

    /// ∫_0^∞ e^{-λt} t^{β-1}/Γ(β) dt by quadrature after t = u^{1/β} (near 0) and t = 1/u (tail).
    pub(crate) fn laplace_by_quadrature(beta: f64, lambda: f64) -> f64 {
        let tol = Tolerance { abs: 1e-13, rel: 1e-12 };
        let near = quad::integrate(|u| (-lambda * u.powf(1.0 / beta)).exp() / beta * rgamma(beta), 0.0, 1.0, tol).unwrap();
        let far = quad::integrate(
            |u| if u <= 0.0 { 0.0 } else { (-lambda / u).exp() * u.powf(-beta - 1.0) * rgamma(beta) },
            0.0,
            1.0,
            tol,
        )
        .unwrap();
        near.value + far.value
    }

    #[test]
    fn memory_kernel_laplace_identity() {
        let model = ModelSpec::variable_order(BetaFn::default());
        let kernel = MemoryKernel::new(&model);
        for &x in &[-1.0, 0.0, 2.0] {
            let beta = kernel.order(&[x, 0.0, 0.0]);
            for &lam in &[0.5, 1.0, 2.0] {
                let q = laplace_by_quadrature(beta, lam);
                assert!((q - kernel.laplace(&[x, 0.0, 0.0], lam)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn m_operator_identity_at_order_one() {
        let dt = 1e-3;
        let p: Vec<f64> = (0..2000).map(|k| (k as f64 * dt).cos()).collect();
        let mp = m_operator_apply(&p, 1.0, dt).unwrap();
        for m in 1..p.len() {
            assert!((mp[m] - p[m]).abs() < dt);
        }
        assert!(m_operator_apply(&[0.0; 10], 0.5, 0.1).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn m_operator_laplace_domain() {
        // P = e^{-t}: L[MP](λ) = λ^{1-β}/(λ+1).
        let (beta, dt, n) = (0.5, 2e-3, 20_000);
        let p: Vec<f64> = (0..n).map(|k| (-(k as f64) * dt).exp()).collect();
        let mp = m_operator_apply(&p, beta, dt).unwrap();
        for &lam in &[1.0f64, 2.0] {
            let l: f64 = (1..n).map(|m| (-lam * m as f64 * dt).exp() * mp[m] * dt).sum::<f64>();
            let exact = lam.powf(1.0 - beta) / (lam + 1.0);
            assert!(((l - exact) / exact).abs() < 0.02, "lambda {lam}: {l} vs {exact}");
        }
    }

    #[test]
    fn field_variant_matches_scalar_per_node() {
        let (nt, dt) = (200, 0.01);
        let betas = [0.3, 0.5, 0.5, 0.8];
        let mut field = vec![0.0; nt * betas.len()];
        for m in 0..nt {
            for i in 0..betas.len() {
                field[m * betas.len() + i] = ((m as f64) * dt + i as f64).sin();
            }
        }
        let out = m_operator_apply_field(&field, nt, &betas, dt).unwrap();
        for (i, &b) in betas.iter().enumerate() {
            let col: Vec<f64> = (0..nt).map(|m| field[m * betas.len() + i]).collect();
            let s = m_operator_apply(&col, b, dt).unwrap();
            for m in 0..nt {
                assert_eq!(out[m * betas.len() + i], s[m]);
            }
        }
        assert!(m_operator_apply_field(&field, nt + 1, &betas, dt).is_err());
    }

    #[test]
    fn weight_cache_dedups() {
        let mut c = WeightCache::new(10);
        let a = c.index_of(0.5).unwrap();
        let b = c.index_of(0.5 + 1e-13).unwrap();
        let d = c.index_of(0.6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
        assert_eq!(c.distinct(), 2);
    }

    proptest! {
        #[test]
        fn summation_by_parts(order in 0.05f64..0.95, seed in 0u64..1000) {
            let n = 64;
            let dt = 0.05;
            // Compactly supported grid functions.
            let bump = |k: usize, shift: f64| {
                let x = k as f64 / n as f64;
                if x > 0.1 && x < 0.9 { ((x - 0.1) * (0.9 - x)).powi(2) * (1.0 + shift * x) } else { 0.0 }
            };
            let phi: Vec<f64> = (0..n).map(|k| bump(k, (seed % 7) as f64)).collect();
            let psi: Vec<f64> = (0..n).map(|k| bump(k, (seed % 5) as f64 * 0.3)).collect();
            let left = rl_derivative(&psi, order, dt).unwrap();
            let right = rl_derivative_right(&phi, order, dt).unwrap();
            let a: f64 = right.iter().zip(&psi).map(|(x, y)| x * y).sum();
            let b: f64 = phi.iter().zip(&left).map(|(x, y)| x * y).sum();
            prop_assert!((a - b).abs() <= 1e-12 * (a.abs() + b.abs()).max(1.0));
        }
    }
}
