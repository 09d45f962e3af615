//! Finite-difference solvers for the fractional forward (Fokker–Planck) and backward
//! (Kolmogorov) equations of the subdiffusive and variable-order walks.
//!
//! Both schemes are implicit in the local part and carry the full Grünwald–Letnikov memory
//! explicitly. Space uses central differences for diffusion and first-order upwinding for
//! drift, with homogeneous Dirichlet conditions at ±L.

mod grid;
mod mollifier;

pub use grid::{FieldKind, GridField, GridParams};
pub use mollifier::{mollifier_eval, Mollifier, MollifierShape};

use crate::error::{Error, Result};
use crate::fracops::gl_weights;
use crate::kernels::{BetaFn, DriftFn, ModelSpec};
use crate::payoff::Payoff;
use grid::solve_tridiagonal;

/// Mass above this marks the forward scheme as unstable.
const MASS_BLOWUP: f64 = 10.0;

/// GL weights for each distinct order, stored transposed so that row k lists w_k for every order.
struct WeightTable {
    index: Vec<usize>,
    distinct: usize,
    table: Vec<f64>,
}

impl WeightTable {
    fn new(orders: &[f64], len: usize) -> Result<Self> {
        let mut keys: Vec<f64> = Vec::new();
        let mut index = Vec::with_capacity(orders.len());
        for &o in orders {
            match keys.iter().position(|k| (k - o).abs() <= 1e-12) {
                Some(i) => index.push(i),
                None => {
                    keys.push(o);
                    index.push(keys.len() - 1);
                }
            }
        }
        let distinct = keys.len();
        let mut table = vec![0.0; len * distinct];
        for (j, &o) in keys.iter().enumerate() {
            for (k, w) in gl_weights(o, len)?.into_iter().enumerate() {
                table[k * distinct + j] = w;
            }
        }
        Ok(Self { index, distinct, table })
    }

    /// out[i] = Σ_{k=1}^{m} w_k^{(i)} rows[m-k][i], where rows is a time-major field.
    fn history(&self, values: &[f64], nx: usize, m: usize, out: &mut [f64]) {
        out.fill(0.0);
        for k in 1..=m {
            let row = &values[(m - k) * nx..(m - k + 1) * nx];
            let w = &self.table[k * self.distinct..(k + 1) * self.distinct];
            if self.distinct == 1 {
                let wk = w[0];
                for (o, v) in out.iter_mut().zip(row) {
                    *o += wk * v;
                }
            } else {
                for i in 0..nx {
                    out[i] += w[self.index[i]] * row[i];
                }
            }
        }
    }
}

fn drift_at(drift: Option<&DriftFn>, y: f64, t: f64) -> f64 {
    match drift {
        Some(d) if !d.is_zero() => d.eval(&[y, 0.0, 0.0], t, 1)[0],
        _ => 0.0,
    }
}

/// P^m - A*_m(τ ⊙ P^m) = P^{m-1} + A*_m(τ ⊙ H^m), with τ_i = dt^{β_i} and
/// H^m = Σ_{k≥1} w_k P^{m-k} the GL memory of order 1-β_i (the first step weights the
/// implicit term twice).
fn forward_core(model: &ModelSpec, orders: &[f64], drift: Option<&DriftFn>, x0: f64, grid: &GridParams, scheme: &str) -> Result<GridField> {
    grid.check()?;
    let i0 = grid.node_of(x0)?;
    let nx = grid.nx();
    if i0 == 0 || i0 == nx - 1 {
        return Err(Error::Grid(format!("x0 = {x0} falls on the boundary")));
    }
    let nt = grid.time_steps() + 1;
    let (dx, dt) = (grid.dx, grid.dt);
    let xs = grid.x_nodes();
    let tau: Vec<f64> = orders.iter().map(|b| dt.powf(*b)).collect();
    let memory_orders: Vec<f64> = orders.iter().map(|b| 1.0 - b).collect();
    let weights = WeightTable::new(&memory_orders, nt)?;
    let time_dependent = drift.is_some_and(|d| d.depends_on_time());

    let mut values = vec![0.0; nt * nx];
    values[i0] = 1.0 / dx;
    let mut mass = Vec::with_capacity(nt);
    mass.push(1.0);

    let n_in = nx - 2;
    let diff = 0.5 / (dx * dx);
    let (mut cl, mut cd, mut cu) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    let build = |t: f64, cl: &mut [f64], cd: &mut [f64], cu: &mut [f64]| {
        for i in 1..nx - 1 {
            let b_minus = drift_at(drift, xs[i] - 0.5 * dx, t);
            let b_plus = drift_at(drift, xs[i] + 0.5 * dx, t);
            cl[i] = diff + b_minus.max(0.0) / dx;
            cu[i] = diff - b_plus.min(0.0) / dx;
            cd[i] = -2.0 * diff + (b_minus.min(0.0) - b_plus.max(0.0)) / dx;
        }
    };
    build(grid.s + dt, &mut cl, &mut cd, &mut cu);

    let mut hist = vec![0.0; nx];
    let mut v = vec![0.0; nx];
    let (mut lower, mut diag, mut upper, mut rhs) = (vec![0.0; n_in], vec![0.0; n_in], vec![0.0; n_in], vec![0.0; n_in]);
    let mut scratch = Vec::with_capacity(n_in);
    for m in 1..nt {
        let t = grid.s + m as f64 * dt;
        if time_dependent {
            build(t, &mut cl, &mut cd, &mut cu);
        }
        weights.history(&values, nx, m, &mut hist);
        // Differencing the integrated form P^m = P^0 + A*(τ ⊙ Σ c_k P^{m-k}) leaves one extra unit-weight
        // term at the first step. Taking it implicitly keeps the step matrix an M-matrix.
        let lead = if m == 1 { 2.0 } else { 1.0 };
        for i in 0..nx {
            v[i] = tau[i] * hist[i];
        }
        v[0] = 0.0;
        v[nx - 1] = 0.0;
        let prev = &values[(m - 1) * nx..m * nx];
        for i in 1..nx - 1 {
            let k = i - 1;
            rhs[k] = prev[i] + cl[i] * v[i - 1] + cd[i] * v[i] + cu[i] * v[i + 1];
            lower[k] = if i > 1 { -lead * cl[i] * tau[i - 1] } else { 0.0 };
            diag[k] = 1.0 - lead * cd[i] * tau[i];
            upper[k] = if i < nx - 2 { -lead * cu[i] * tau[i + 1] } else { 0.0 };
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut scratch);
        let row = &mut values[m * nx..(m + 1) * nx];
        row[1..nx - 1].copy_from_slice(&rhs);
        let total: f64 = row.iter().sum::<f64>() * dx;
        if !total.is_finite() || total > MASS_BLOWUP {
            return Err(Error::Unstable(format!("forward mass {total} at t = {t}")));
        }
        mass.push(total);
    }
    Ok(GridField {
        kind: FieldKind::ForwardDensity,
        x_grid: xs,
        t_grid: (0..nt).map(|m| grid.s + m as f64 * dt).collect(),
        values,
        mass,
        model: model.clone(),
        scheme: scheme.into(),
    })
}

const FORWARD_SCHEME: &str = "implicit Euler with Grünwald–Letnikov memory; upwind drift, central diffusion; Dirichlet at ±L; unit-mass spike";
const BACKWARD_SCHEME: &str = "implicit right-sided Grünwald–Letnikov in s; upwind drift, central diffusion; Dirichlet at ±L; mollified waiting-time source";

/// Forward density of the subdiffusive walk started at (x0, grid.s), on [grid.s, grid.T].
pub fn solve_forward_41(beta: f64, drift: &DriftFn, x0: f64, grid: &GridParams) -> Result<GridField> {
    let model = ModelSpec::subdiffusion(beta, drift.clone());
    solve_forward(&model, x0, grid)
}

/// Forward density of the variable-order walk, order β(y) inside the Laplacian.
pub fn solve_forward_42(beta_fn: &BetaFn, grid: &GridParams, x0: f64) -> Result<GridField> {
    solve_forward(&ModelSpec::variable_order(beta_fn.clone()), x0, grid)
}

pub fn solve_forward(model: &ModelSpec, x0: f64, grid: &GridParams) -> Result<GridField> {
    model.check()?;
    grid.check()?;
    let xs = grid.x_nodes();
    match model {
        ModelSpec::Subdiffusion(m) => forward_core(model, &vec![m.beta; xs.len()], Some(&m.drift), x0, grid, FORWARD_SCHEME),
        ModelSpec::VariableOrder(m) => {
            let orders: Vec<f64> = xs.iter().map(|&x| m.beta_fn.eval(x)).collect();
            forward_core(model, &orders, None, x0, grid, FORWARD_SCHEME)
        }
        ModelSpec::LevyWalk(_) => Err(Error::Unsupported("the Lévy walk has no grid solver; use Monte Carlo".into())),
    }
}

/// (dt^{-β} - b∂_x - ½∂²) q_j = f·(H_β * φ)(σ_j) - dt^{-β} Σ_{k≥1} w_k q_{j-k},
/// marching σ = t - s upward from the top of the mollifier's support, where q vanishes.
#[allow(clippy::too_many_arguments)]
fn backward_core(
    model: &ModelSpec,
    orders: &[f64],
    drift: Option<&DriftFn>,
    payoff: &Payoff,
    t: f64,
    mollifier: &Mollifier,
    grid: &GridParams,
) -> Result<GridField> {
    let mut axis = *grid;
    axis.t_end = t;
    axis.check()?;
    mollifier.check()?;
    let mut bad = Vec::new();
    payoff.validate("payoff", 1, &mut bad);
    if let Some(v) = bad.first() {
        return Err(Error::Domain(v.to_string()));
    }
    if !payoff.vanishes_beyond(grid.half_width, 1e-8) {
        return Err(Error::Unsupported("payoff must vanish at the grid boundary".into()));
    }
    let nx = axis.nx();
    let (dx, dt) = (axis.dx, axis.dt);
    let xs = axis.x_nodes();
    let extra = (mollifier.support() / dt).ceil() as usize;
    let n = extra + axis.time_steps() + 1;
    let weights = WeightTable::new(orders, n)?;
    let inv: Vec<f64> = orders.iter().map(|b| dt.powf(-b)).collect();
    let fx: Vec<f64> = xs.iter().map(|&x| payoff.eval1(x)).collect();
    let uniform = orders.iter().all(|&b| b == orders[0]);
    let diff = 0.5 / (dx * dx);

    let mut q = vec![0.0; n * nx];
    let mut hist = vec![0.0; nx];
    let n_in = nx - 2;
    let (mut lower, mut diag, mut upper, mut rhs) = (vec![0.0; n_in], vec![0.0; n_in], vec![0.0; n_in], vec![0.0; n_in]);
    let mut scratch = Vec::with_capacity(n_in);
    for j in 0..n {
        let sigma = (j as f64 - extra as f64) * dt;
        let s = t - sigma;
        weights.history(&q, nx, j, &mut hist);
        let shared = if uniform { mollifier.source(orders[0], sigma, dt) } else { 0.0 };
        for i in 1..nx - 1 {
            let k = i - 1;
            let src = if fx[i] == 0.0 {
                0.0
            } else if uniform {
                fx[i] * shared
            } else {
                fx[i] * mollifier.source(orders[i], sigma, dt)
            };
            let b = drift_at(drift, xs[i], s);
            rhs[k] = src - inv[i] * hist[i];
            diag[k] = inv[i] + b.abs() / dx + 2.0 * diff;
            lower[k] = if i > 1 { -diff + b.min(0.0) / dx } else { 0.0 };
            upper[k] = if i < nx - 2 { -diff - b.max(0.0) / dx } else { 0.0 };
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut scratch);
        let row = &mut q[j * nx..(j + 1) * nx];
        row[1..nx - 1].copy_from_slice(&rhs);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!("backward solution not finite at s = {s}")));
        }
    }
    // Reorder so that s increases with the row index.
    let mut values = Vec::with_capacity(n * nx);
    for j in (0..n).rev() {
        values.extend_from_slice(&q[j * nx..(j + 1) * nx]);
    }
    let t_grid = (0..n).rev().map(|j| t - (j as f64 - extra as f64) * dt).collect();
    Ok(GridField {
        kind: FieldKind::BackwardExpectation,
        x_grid: xs,
        t_grid,
        values,
        mass: Vec::new(),
        model: model.clone(),
        scheme: BACKWARD_SCHEME.into(),
    })
}

/// p(x, s) ≈ E[f(X_t) | X_s = x] for the subdiffusive walk, for s from grid.s up to t.
pub fn solve_backward_41(beta: f64, drift: &DriftFn, f: &Payoff, t: f64, mollifier: &Mollifier, grid: &GridParams) -> Result<GridField> {
    solve_backward(&ModelSpec::subdiffusion(beta, drift.clone()), f, t, mollifier, grid)
}

pub fn solve_backward_42(beta_fn: &BetaFn, f: &Payoff, t: f64, mollifier: &Mollifier, grid: &GridParams) -> Result<GridField> {
    solve_backward(&ModelSpec::variable_order(beta_fn.clone()), f, t, mollifier, grid)
}

pub fn solve_backward(model: &ModelSpec, f: &Payoff, t: f64, mollifier: &Mollifier, grid: &GridParams) -> Result<GridField> {
    model.check()?;
    let xs = grid.x_nodes();
    match model {
        ModelSpec::Subdiffusion(m) => backward_core(model, &vec![m.beta; xs.len()], Some(&m.drift), f, t, mollifier, grid),
        ModelSpec::VariableOrder(m) => {
            let orders: Vec<f64> = xs.iter().map(|&x| m.beta_fn.eval(x)).collect();
            backward_core(model, &orders, None, f, t, mollifier, grid)
        }
        ModelSpec::LevyWalk(_) => Err(Error::Unsupported("the Lévy walk has no grid solver; use Monte Carlo".into())),
    }
}
