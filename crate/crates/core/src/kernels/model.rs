//! Model definitions: the three anomalous-diffusion walks and their parameter families.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::special::rgamma;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point (or vector) in R^d, d ≤ 3. Unused trailing coordinates are zero.
pub type Point = [f64; MAX_DIM];

pub fn point_from_slice(x: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    for (dst, src) in p.iter_mut().zip(x) {
        *dst = *src;
    }
    p
}

pub fn norm(v: &Point, dim: usize) -> f64 {
    v[..dim].iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// One violated invariant, named by its dotted config path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn check_open_unit(field: &str, value: f64, out: &mut Vec<Violation>) {
    if !(value > 0.0 && value < 1.0) {
        out.push(Violation::new(field, format!("must lie strictly inside (0, 1), got {value}")));
    }
}

/// Bounded, Lipschitz drift fields b(x,t) (or b̃ for the Lévy walk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftFn {
    #[default]
    Zero,
    /// Spatially and temporally constant vector.
    Constant { value: Vec<f64> },
    /// b_i(x,t) = amplitude · sin(x_i) · cos(t)
    SinCos { amplitude: f64 },
    /// b_i(x,t) = -amplitude · tanh(x_i / scale)
    Restoring { amplitude: f64, scale: f64 },
}

impl DriftFn {
    #[inline]
    pub fn eval(&self, x: &Point, t: f64, dim: usize) -> Point {
        let mut out = [0.0; MAX_DIM];
        match self {
            DriftFn::Zero => {}
            DriftFn::Constant { value } => {
                for i in 0..dim {
                    out[i] = value.get(i).or(value.first()).copied().unwrap_or(0.0);
                }
            }
            DriftFn::SinCos { amplitude } => {
                let ct = t.cos();
                for i in 0..dim {
                    out[i] = amplitude * x[i].sin() * ct;
                }
            }
            DriftFn::Restoring { amplitude, scale } => {
                for i in 0..dim {
                    out[i] = -amplitude * (x[i] / scale).tanh();
                }
            }
        }
        out
    }

    /// sup over (x,t) of every component's magnitude.
    pub fn bound(&self) -> f64 {
        match self {
            DriftFn::Zero => 0.0,
            DriftFn::Constant { value } => value.iter().fold(0.0, |m, v| m.max(v.abs())),
            DriftFn::SinCos { amplitude } | DriftFn::Restoring { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Lipschitz constant in (x,t), Euclidean norm.
    pub fn lipschitz(&self) -> f64 {
        match self {
            DriftFn::Zero | DriftFn::Constant { .. } => 0.0,
            DriftFn::SinCos { amplitude } => amplitude.abs() * std::f64::consts::SQRT_2,
            DriftFn::Restoring { amplitude, scale } => amplitude.abs() / scale.abs(),
        }
    }

    pub fn depends_on_time(&self) -> bool {
        matches!(self, DriftFn::SinCos { .. })
    }

    pub fn is_zero(&self) -> bool {
        self.bound() == 0.0
    }

    fn validate(&self, field: &str, dim: usize, out: &mut Vec<Violation>) {
        match self {
            DriftFn::Zero => {}
            DriftFn::Constant { value } => {
                if value.is_empty() || (value.len() != 1 && value.len() != dim) {
                    out.push(Violation::new(
                        format!("{field}.value"),
                        format!("needs 1 or {dim} components, got {}", value.len()),
                    ));
                }
                if value.iter().any(|v| !v.is_finite()) {
                    out.push(Violation::new(format!("{field}.value"), "components must be finite"));
                }
            }
            DriftFn::SinCos { amplitude } => {
                if !amplitude.is_finite() {
                    out.push(Violation::new(format!("{field}.amplitude"), "must be finite"));
                }
            }
            DriftFn::Restoring { amplitude, scale } => {
                if !amplitude.is_finite() {
                    out.push(Violation::new(format!("{field}.amplitude"), "must be finite"));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    out.push(Violation::new(format!("{field}.scale"), "must be positive"));
                }
            }
        }
    }
}

/// Space-dependent order β(x) for the variable-order model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaFn {
    Constant { beta: f64 },
    /// β(x) = mid + amplitude · tanh((x - center) / scale)
    Tanh { mid: f64, amplitude: f64, scale: f64, #[serde(default)] center: f64 },
    /// β(x) = max - (max - min) · exp(-(x - center)² / (2 width²)); unique minimum at `center`.
    Well { center: f64, min: f64, max: f64, width: f64 },
}

impl Default for BetaFn {
    fn default() -> Self {
        BetaFn::Tanh { mid: 0.5, amplitude: 0.3, scale: 1.0, center: 0.0 }
    }
}

impl BetaFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            BetaFn::Constant { beta } => beta,
            BetaFn::Tanh { mid, amplitude, scale, center } => mid + amplitude * ((x - center) / scale).tanh(),
            BetaFn::Well { center, min, max, width } => {
                let z = (x - center) / width;
                max - (max - min) * (-0.5 * z * z).exp()
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            BetaFn::Constant { .. } => 0.0,
            BetaFn::Tanh { amplitude, scale, center, .. } => {
                let th = ((x - center) / scale).tanh();
                amplitude * (1.0 - th * th) / scale
            }
            BetaFn::Well { center, min, max, width } => {
                let z = (x - center) / width;
                (max - min) * z / width * (-0.5 * z * z).exp()
            }
        }
    }

    /// Closure of the range: (inf β, sup β).
    pub fn range(&self) -> (f64, f64) {
        match *self {
            BetaFn::Constant { beta } => (beta, beta),
            BetaFn::Tanh { mid, amplitude, .. } => (mid - amplitude.abs(), mid + amplitude.abs()),
            BetaFn::Well { min, max, .. } => (min.min(max), min.max(max)),
        }
    }

    /// Location of the unique interior minimum, if there is one.
    pub fn argmin(&self) -> Option<f64> {
        match *self {
            BetaFn::Well { center, min, max, .. } if min < max => Some(center),
            _ => None,
        }
    }

    /// sup |β'(x)|
    pub fn derivative_bound(&self) -> f64 {
        match *self {
            BetaFn::Constant { .. } => 0.0,
            BetaFn::Tanh { amplitude, scale, .. } => (amplitude / scale).abs(),
            // max of z e^{-z²/2} is e^{-1/2} at z = 1
            BetaFn::Well { min, max, width, .. } => ((max - min) / width).abs() * (-0.5f64).exp(),
        }
    }

    fn validate(&self, field: &str, epsilon: f64, out: &mut Vec<Violation>) {
        match *self {
            BetaFn::Tanh { scale, .. } if !(scale > 0.0) => {
                out.push(Violation::new(format!("{field}.scale"), "must be positive"));
            }
            BetaFn::Well { width, .. } if !(width > 0.0) => {
                out.push(Violation::new(format!("{field}.width"), "must be positive"));
            }
            _ => {}
        }
        let (lo, hi) = self.range();
        if !(lo > epsilon && hi < 1.0 - epsilon) {
            out.push(Violation::new(
                field,
                format!("range [{lo}, {hi}] must stay inside (epsilon, 1 - epsilon) = ({epsilon}, {})", 1.0 - epsilon),
            ));
        }
    }
}

/// Law λ(dθ) of jump directions on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DirectionLaw {
    #[default]
    Uniform,
    Discrete { directions: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl DirectionLaw {
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Point {
        match self {
            DirectionLaw::Uniform => match dim {
                1 => {
                    if rng.random::<bool>() {
                        [1.0, 0.0, 0.0]
                    } else {
                        [-1.0, 0.0, 0.0]
                    }
                }
                2 => {
                    let phi = rng.random::<f64>() * std::f64::consts::TAU;
                    [phi.cos(), phi.sin(), 0.0]
                }
                _ => loop {
                    let v: Point = std::array::from_fn(|_| StandardNormal.sample(rng));
                    let r = norm(&v, 3);
                    if r > 1e-12 {
                        break [v[0] / r, v[1] / r, v[2] / r];
                    }
                },
            },
            DirectionLaw::Discrete { directions, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (d, w) in directions.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return point_from_slice(d);
                    }
                }
                point_from_slice(directions.last().expect("validated non-empty"))
            }
        }
    }

    /// Quadrature nodes (θ, weight) representing λ exactly (discrete laws, d = 1)
    /// or by a product rule (uniform law, d = 2, 3).
    pub fn nodes(&self, dim: usize) -> Vec<(Point, f64)> {
        match self {
            DirectionLaw::Discrete { directions, weights } => {
                directions.iter().zip(weights).map(|(d, &w)| (point_from_slice(d), w)).collect()
            }
            DirectionLaw::Uniform => match dim {
                1 => vec![([1.0, 0.0, 0.0], 0.5), ([-1.0, 0.0, 0.0], 0.5)],
                2 => {
                    let m = 64;
                    (0..m)
                        .map(|k| {
                            let phi = std::f64::consts::TAU * (k as f64 + 0.5) / m as f64;
                            ([phi.cos(), phi.sin(), 0.0], 1.0 / m as f64)
                        })
                        .collect()
                }
                _ => {
                    // z = cos(polar) is uniform on [-1, 1]; midpoint in z, uniform in azimuth.
                    let (mz, mphi) = (32, 32);
                    let mut out = Vec::with_capacity(mz * mphi);
                    for i in 0..mz {
                        let z = -1.0 + 2.0 * (i as f64 + 0.5) / mz as f64;
                        let rho = (1.0 - z * z).sqrt();
                        for k in 0..mphi {
                            let phi = std::f64::consts::TAU * (k as f64 + 0.5) / mphi as f64;
                            out.push(([rho * phi.cos(), rho * phi.sin(), z], 1.0 / (mz * mphi) as f64));
                        }
                    }
                    out
                }
            },
        }
    }

    /// ∫ θ λ(dθ)
    pub fn mean(&self, dim: usize) -> Point {
        match self {
            DirectionLaw::Uniform => [0.0; MAX_DIM],
            DirectionLaw::Discrete { .. } => {
                let mut m = [0.0; MAX_DIM];
                for (theta, w) in self.nodes(dim) {
                    for i in 0..dim {
                        m[i] += w * theta[i];
                    }
                }
                m
            }
        }
    }

    fn validate(&self, field: &str, dim: usize, out: &mut Vec<Violation>) {
        if let DirectionLaw::Discrete { directions, weights } = self {
            if directions.is_empty() || directions.len() != weights.len() {
                out.push(Violation::new(field, "directions and weights must be non-empty and of equal length"));
                return;
            }
            if weights.iter().any(|w| !(*w >= 0.0)) {
                out.push(Violation::new(format!("{field}.weights"), "weights must be nonnegative"));
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                out.push(Violation::new(format!("{field}.weights"), format!("weights must sum to 1, got {total}")));
            }
            for (i, d) in directions.iter().enumerate() {
                if d.len() != dim {
                    out.push(Violation::new(format!("{field}.directions[{i}]"), format!("needs {dim} components")));
                    continue;
                }
                let r = d.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (r - 1.0).abs() > 1e-9 {
                    out.push(Violation::new(format!("{field}.directions[{i}]"), "must be a unit vector"));
                }
            }
        }
    }
}

/// Example 1: subdiffusion (order β) in a space-time drift field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subdiffusion {
    pub beta: f64,
    #[serde(default)]
    pub drift: DriftFn,
}

/// Example 2: symmetric walk whose waiting-time order β(x) varies in space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableOrder {
    #[serde(default)]
    pub beta_fn: BetaFn,
    /// Order of the reference stable driver pushed through F₂.
    #[serde(default = "default_beta0")]
    pub beta0: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

/// Example 3: Lévy walk with |jump| = wait (unit speed) and bias b̃.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyWalk {
    pub beta: f64,
    #[serde(default)]
    pub drift: DriftFn,
    #[serde(default)]
    pub directions: DirectionLaw,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
}

fn default_beta0() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_dimension() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    Subdiffusion,
    VariableOrder,
    LevyWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Subdiffusion(Subdiffusion),
    VariableOrder(VariableOrder),
    LevyWalk(LevyWalk),
}

impl ModelSpec {
    pub fn subdiffusion(beta: f64, drift: DriftFn) -> Self {
        ModelSpec::Subdiffusion(Subdiffusion { beta, drift })
    }

    pub fn variable_order(beta_fn: BetaFn) -> Self {
        ModelSpec::VariableOrder(VariableOrder { beta_fn, beta0: default_beta0(), epsilon: default_epsilon() })
    }

    pub fn levy_walk(beta: f64, drift: DriftFn, directions: DirectionLaw, dimension: usize) -> Self {
        ModelSpec::LevyWalk(LevyWalk { beta, drift, directions, dimension })
    }

    pub fn id(&self) -> ModelId {
        match self {
            ModelSpec::Subdiffusion(_) => ModelId::Subdiffusion,
            ModelSpec::VariableOrder(_) => ModelId::VariableOrder,
            ModelSpec::LevyWalk(_) => ModelId::LevyWalk,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ModelSpec::LevyWalk(m) => m.dimension,
            _ => 1,
        }
    }

    /// Waiting-time order at position x.
    #[inline]
    pub fn order_at(&self, x: &Point) -> f64 {
        match self {
            ModelSpec::Subdiffusion(m) => m.beta,
            ModelSpec::VariableOrder(m) => m.beta_fn.eval(x[0]),
            ModelSpec::LevyWalk(m) => m.beta,
        }
    }

    /// The drift field b (or b̃), zero for the variable-order model.
    pub fn drift(&self) -> Option<&DriftFn> {
        match self {
            ModelSpec::Subdiffusion(m) => Some(&m.drift),
            ModelSpec::LevyWalk(m) => Some(&m.drift),
            ModelSpec::VariableOrder(_) => None,
        }
    }

    #[inline]
    pub fn drift_at(&self, x: &Point, t: f64) -> Point {
        match self.drift() {
            Some(d) => d.eval(x, t, self.dimension()),
            None => [0.0; MAX_DIM],
        }
    }

    /// True when A and D never jump together, so CTRW and OCTRW limits coincide.
    pub fn decoupled(&self) -> bool {
        !matches!(self, ModelSpec::LevyWalk(_))
    }

    /// Checks every invariant; `prefix` is the config path of this block.
    pub fn validate(&self, prefix: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        match self {
            ModelSpec::Subdiffusion(m) => {
                check_open_unit(&format!("{prefix}.beta"), m.beta, &mut out);
                m.drift.validate(&format!("{prefix}.drift"), 1, &mut out);
            }
            ModelSpec::VariableOrder(m) => {
                check_open_unit(&format!("{prefix}.beta0"), m.beta0, &mut out);
                if !(m.epsilon > 0.0 && m.epsilon < 0.5) {
                    out.push(Violation::new(format!("{prefix}.epsilon"), "must lie in (0, 1/2)"));
                } else {
                    m.beta_fn.validate(&format!("{prefix}.beta_fn"), m.epsilon, &mut out);
                }
            }
            ModelSpec::LevyWalk(m) => {
                check_open_unit(&format!("{prefix}.beta"), m.beta, &mut out);
                if m.dimension == 0 || m.dimension > MAX_DIM {
                    out.push(Violation::new(
                        format!("{prefix}.dimension"),
                        format!("must be between 1 and {MAX_DIM}"),
                    ));
                } else {
                    m.drift.validate(&format!("{prefix}.drift"), m.dimension, &mut out);
                    m.directions.validate(&format!("{prefix}.directions"), m.dimension, &mut out);
                }
            }
        }
        out
    }

    pub fn check(&self) -> crate::Result<()> {
        let v = self.validate("model");
        if v.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Domain(v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")))
        }
    }
}

/// Normalized Pareto (Lomax) waiting-time law with survival (1 + w/σ)^{-β}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoWait {
    pub beta: f64,
    pub sigma: f64,
}

impl ParetoWait {
    /// Scale tied to n so that n·P(W > w) → H_β(w) = w^{-β}/Γ(1-β): σ = (τ/Γ(1-β))^{1/β}, τ = 1/n.
    pub fn at_scale(beta: f64, n: f64) -> Self {
        let tau = 1.0 / n;
        Self { beta, sigma: (tau * rgamma(1.0 - beta)).powf(1.0 / beta) }
    }

    #[inline]
    pub fn survival(&self, w: f64) -> f64 {
        if w <= 0.0 {
            1.0
        } else {
            (1.0 + w / self.sigma).powf(-self.beta)
        }
    }

    #[inline]
    pub fn pdf(&self, w: f64) -> f64 {
        if w < 0.0 {
            0.0
        } else {
            self.beta / self.sigma * (1.0 + w / self.sigma).powf(-1.0 - self.beta)
        }
    }

    /// Inverse of the survival function.
    #[inline]
    pub fn quantile_survival(&self, u: f64) -> f64 {
        self.sigma * (u.powf(-1.0 / self.beta) - 1.0)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // 1 - U lies in (0, 1]; exact inverse-CDF draw.
        let u = 1.0 - rng.random::<f64>();
        self.quantile_survival(u).max(f64::MIN_POSITIVE)
    }
}
