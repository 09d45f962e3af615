//! Uniform space-time grids, solved fields, and their CSV/JSON export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{ModelSpec, Violation};

/// Spatial domain [-L, L] with step dx; time axis [s, T] with step dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub dx: f64,
    pub dt: f64,
    pub s: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { half_width: 10.0, dx: 0.02, dt: 1e-3, s: 0.0, t_end: 1.0 }
    }
}

impl GridParams {
    pub fn validate(&self, prefix: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        let field = |name: &str| format!("{prefix}.{name}");
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            out.push(Violation::new(field("L"), "must be positive"));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            out.push(Violation::new(field("dx"), "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(Violation::new(field("dt"), "must be positive"));
        }
        if !(self.s.is_finite() && self.t_end.is_finite() && self.t_end > self.s) {
            out.push(Violation::new(field("T"), "must be finite and exceed s"));
        }
        if out.is_empty() {
            let cells = 2.0 * self.half_width / self.dx;
            if (cells - cells.round()).abs() > 1e-6 * cells.max(1.0) || cells.round() < 4.0 {
                out.push(Violation::new(field("dx"), "must divide 2L into at least 4 cells"));
            }
            let steps = (self.t_end - self.s) / self.dt;
            if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) || steps.round() < 1.0 {
                out.push(Violation::new(field("dt"), "must divide T - s into whole steps"));
            }
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate("grid");
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Grid(v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")))
        }
    }

    pub fn nx(&self) -> usize {
        (2.0 * self.half_width / self.dx).round() as usize + 1
    }

    pub fn time_steps(&self) -> usize {
        ((self.t_end - self.s) / self.dt).round() as usize
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx()).map(|i| -self.half_width + i as f64 * self.dx).collect()
    }

    /// Nearest node to x, or a grid error if x is not strictly inside the domain.
    pub fn node_of(&self, x: f64) -> Result<usize> {
        if !(x > -self.half_width && x < self.half_width) {
            return Err(Error::Grid(format!("x = {x} is outside (-{0}, {0})", self.half_width)));
        }
        Ok(((x + self.half_width) / self.dx).round() as usize)
    }

    /// Half-width suggested for a solve over `horizon` with drift bound `b`: 10·h^{β/2}·(1 + b·h).
    pub fn suggested_half_width(beta: f64, horizon: f64, drift_bound: f64) -> f64 {
        10.0 * horizon.powf(beta / 2.0) * (1.0 + drift_bound * horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    ForwardDensity,
    BackwardExpectation,
}

/// A solution on the grid, stored time-major (`values[m * nx + i]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub kind: FieldKind,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Σ_i values·dx per time row (forward fields).
    pub mass: Vec<f64>,
    pub model: ModelSpec,
    pub scheme: String,
}

#[derive(Serialize)]
struct Metadata<'a> {
    kind: FieldKind,
    model: &'a ModelSpec,
    scheme: &'a str,
    x_min: f64,
    x_max: f64,
    dx: f64,
    nx: usize,
    t_min: f64,
    t_max: f64,
    dt: f64,
    nt: usize,
    mass_trace: &'a [f64],
}

impl GridField {
    pub fn nx(&self) -> usize {
        self.x_grid.len()
    }

    pub fn nt(&self) -> usize {
        self.t_grid.len()
    }

    pub fn dx(&self) -> f64 {
        self.x_grid[1] - self.x_grid[0]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.nx()..(m + 1) * self.nx()]
    }

    /// Index of the time node nearest to t.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let (lo, hi) = (self.t_grid[0], *self.t_grid.last().expect("non-empty grid"));
        let dt = if self.nt() > 1 { self.t_grid[1] - self.t_grid[0] } else { 0.0 };
        if !(t >= lo - 0.5 * dt && t <= hi + 0.5 * dt) {
            return Err(Error::Grid(format!("t = {t} outside [{lo}, {hi}]")));
        }
        Ok(self.t_grid.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs())).map(|(i, _)| i).unwrap_or(0))
    }

    /// Linear interpolation in x on time row m (zero outside the grid).
    pub fn interpolate(&self, m: usize, x: f64) -> f64 {
        let (x0, dx) = (self.x_grid[0], self.dx());
        let u = (x - x0) / dx;
        if u < 0.0 || u > (self.nx() - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.nx() - 2);
        let f = u - i as f64;
        let row = self.row(m);
        row[i] * (1.0 - f) + row[i + 1] * f
    }

    /// Value at (x, t) using the nearest time row.
    pub fn sample(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.interpolate(self.time_index(t)?, x))
    }

    /// Cumulative mass at cell edges of row m: the CDF of the node masses, each node owning [x_i - dx/2, x_i + dx/2].
    pub fn cdf_edges(&self, m: usize) -> (Vec<f64>, Vec<f64>) {
        let dx = self.dx();
        let mut edges = Vec::with_capacity(self.nx() + 1);
        let mut cdf = Vec::with_capacity(self.nx() + 1);
        edges.push(self.x_grid[0] - 0.5 * dx);
        cdf.push(0.0);
        let mut acc = 0.0;
        for (i, v) in self.row(m).iter().enumerate() {
            acc += v * dx;
            edges.push(self.x_grid[i] + 0.5 * dx);
            cdf.push(acc);
        }
        (edges, cdf)
    }

    /// Continuous CDF of row m, linear between the cell edges of `cdf_edges`.
    pub fn cdf_fn(&self, m: usize) -> impl Fn(f64) -> f64 {
        let (edges, cdf) = self.cdf_edges(m);
        move |x| {
            if x <= edges[0] {
                return 0.0;
            }
            let k = edges.partition_point(|e| *e <= x);
            if k >= edges.len() {
                return cdf[cdf.len() - 1];
            }
            let f = (x - edges[k - 1]) / (edges[k] - edges[k - 1]);
            cdf[k - 1] + f * (cdf[k] - cdf[k - 1])
        }
    }

    /// Σ_i g(x_i) values[m, i] dx.
    pub fn integrate_row<G: Fn(f64) -> f64>(&self, m: usize, g: G) -> f64 {
        let dx = self.dx();
        self.row(m).iter().zip(&self.x_grid).map(|(v, &x)| v * g(x) * dx).sum()
    }

    /// Header `t,x,value`, time-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,value")?;
        for (m, t) in self.t_grid.iter().enumerate() {
            for (x, v) in self.x_grid.iter().zip(self.row(m)) {
                writeln!(w, "{t},{x},{v}")?;
            }
        }
        Ok(())
    }

    pub fn metadata_json(&self) -> serde_json::Result<String> {
        let dt = if self.nt() > 1 { self.t_grid[1] - self.t_grid[0] } else { 0.0 };
        serde_json::to_string_pretty(&Metadata {
            kind: self.kind,
            model: &self.model,
            scheme: &self.scheme,
            x_min: self.x_grid[0],
            x_max: *self.x_grid.last().expect("non-empty grid"),
            dx: self.dx(),
            nx: self.nx(),
            t_min: self.t_grid[0],
            t_max: *self.t_grid.last().expect("non-empty grid"),
            dt,
            nt: self.nt(),
            mass_trace: &self.mass,
        })
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm); `rhs` receives the solution.
/// `lower[0]` and `upper[n-1]` are ignored.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut Vec<f64>) {
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_small_system() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i] + if i > 0 { lower[i] * x[i - 1] } else { 0.0 } + if i < 3 { upper[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut Vec::new());
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_validation_names_fields() {
        let mut g = GridParams::default();
        assert!(g.validate("grid").is_empty());
        g.dx = -1.0;
        let v = g.validate("grid");
        assert_eq!(v[0].field, "grid.dx");
        let g = GridParams { dx: 0.03, ..GridParams::default() };
        assert!(g.validate("grid").iter().any(|v| v.field == "grid.dx"));
    }

    #[test]
    fn nodes_and_lookup() {
        let g = GridParams { half_width: 1.0, dx: 0.5, ..GridParams::default() };
        assert_eq!(g.x_nodes(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.node_of(0.1).unwrap(), 2);
        assert!(g.node_of(1.0).is_err());
    }
}
