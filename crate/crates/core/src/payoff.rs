//! Terminal payoffs f for expectations E[f(X_t)].

use serde::{Deserialize, Serialize};

use crate::kernels::{Point, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Payoff {
    Constant { value: f64 },
    /// height · exp(-‖y - center‖² / (2 width²)); `center` is broadcast if it has one entry.
    GaussianBump {
        #[serde(default = "origin")]
        center: Vec<f64>,
        width: f64,
        #[serde(default = "unit")]
        height: f64,
    },
}

fn origin() -> Vec<f64> {
    vec![0.0]
}
fn unit() -> f64 {
    1.0
}

impl Default for Payoff {
    fn default() -> Self {
        Payoff::GaussianBump { center: origin(), width: 0.5, height: 1.0 }
    }
}

impl Payoff {
    pub fn bump(center: f64, width: f64) -> Self {
        Payoff::GaussianBump { center: vec![center], width, height: 1.0 }
    }

    fn center(&self, i: usize) -> f64 {
        match self {
            Payoff::GaussianBump { center, .. } => center.get(i).or(center.first()).copied().unwrap_or(0.0),
            Payoff::Constant { .. } => 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, y: &Point, dim: usize) -> f64 {
        match self {
            Payoff::Constant { value } => *value,
            Payoff::GaussianBump { width, height, .. } => {
                let r2: f64 = (0..dim).map(|i| (y[i] - self.center(i)).powi(2)).sum();
                height * (-0.5 * r2 / (width * width)).exp()
            }
        }
    }

    pub fn eval1(&self, y: f64) -> f64 {
        self.eval(&[y, 0.0, 0.0], 1)
    }

    /// E[f(mean + √var · N)] with N standard normal in R^dim.
    #[inline]
    pub fn smoothed(&self, mean: &Point, var: f64, dim: usize) -> f64 {
        match self {
            Payoff::Constant { value } => *value,
            Payoff::GaussianBump { width, height, .. } => {
                let s2 = width * width + var;
                let r2: f64 = (0..dim).map(|i| (mean[i] - self.center(i)).powi(2)).sum();
                height * (width * width / s2).powf(0.5 * dim as f64) * (-0.5 * r2 / s2).exp()
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Payoff::Constant { value } => value.abs(),
            Payoff::GaussianBump { height, .. } => height.abs(),
        }
    }

    /// True when f is negligible (below `tol`·sup|f|) outside [-half_width, half_width] in 1D.
    pub fn vanishes_beyond(&self, half_width: f64, tol: f64) -> bool {
        match self {
            Payoff::Constant { value } => *value == 0.0,
            Payoff::GaussianBump { .. } => {
                let edge = self.eval1(half_width).abs().max(self.eval1(-half_width).abs());
                edge <= tol * self.sup_norm()
            }
        }
    }

    pub fn validate(&self, field: &str, dim: usize, out: &mut Vec<Violation>) {
        match self {
            Payoff::Constant { value } => {
                if !value.is_finite() {
                    out.push(Violation::new(format!("{field}.value"), "must be finite"));
                }
            }
            Payoff::GaussianBump { center, width, height } => {
                if !(*width > 0.0 && width.is_finite()) {
                    out.push(Violation::new(format!("{field}.width"), "must be positive"));
                }
                if !height.is_finite() {
                    out.push(Violation::new(format!("{field}.height"), "must be finite"));
                }
                if center.is_empty() || (center.len() != 1 && center.len() != dim) || center.iter().any(|c| !c.is_finite()) {
                    out.push(Violation::new(format!("{field}.center"), format!("needs 1 or {dim} finite components")));
                }
            }
        }
    }
}
