//! The space-time driver (A, D), its inverse time change E, and the two limit walks
//! X_t = A(E(t+)-) and Y_t = A(E(t)).

mod conditions;
mod marginals;

pub use conditions::{check_driver_conditions, DriverConditions};
pub use marginals::{path_rng, sample_marginals, MarginalSample};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_order, domain, Error, Result};
use crate::kernels::{ModelSpec, Point, MAX_DIM};
use crate::special::{power_tail, rgamma};

/// Standard one-sided β-stable draws, E[e^{-λS}] = e^{-λ^β}.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    beta: f64,
    inv_beta: f64,
    tail_exp: f64,
}

impl StableSampler {
    pub fn new(beta: f64) -> Result<Self> {
        check_order("beta", beta)?;
        Ok(Self::unchecked(beta))
    }

    #[inline]
    fn unchecked(beta: f64) -> Self {
        Self { beta, inv_beta: 1.0 / beta, tail_exp: (1.0 - beta) / beta }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.beta == 0.5 {
            // Lévy law with scale 1/2.
            let z: f64 = StandardNormal.sample(rng);
            return 0.5 / (z * z);
        }
        // Kanter: S = sin(βπu)/sin(πu)^{1/β} · (sin((1-β)πu)/E)^{(1-β)/β}.
        let u: f64 = rng.random::<f64>();
        let e: f64 = Exp1.sample(rng);
        let pu = PI * u;
        (self.beta * pu).sin() / pu.sin().powf(self.inv_beta) * ((pu - self.beta * pu).sin() / e).powf(self.tail_exp)
    }
}

/// dt^{1/β}·S, the increment of the standard β-stable subordinator over dt.
pub fn sample_stable_increment<R: Rng + ?Sized>(beta: f64, dt: f64, rng: &mut R) -> Result<f64> {
    let s = StableSampler::new(beta)?;
    if !(dt > 0.0) {
        return Err(domain(format!("dt = {dt} must be positive")));
    }
    Ok(dt.powf(1.0 / beta) * s.sample(rng))
}

/// Discretization of the driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControl {
    /// Operational-time step.
    pub dr: f64,
    /// Lévy-walk jumps shorter than this are replaced by their mean drift.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_cutoff() -> f64 {
    1e-4
}
fn default_max_steps() -> usize {
    20_000_000
}

impl Default for StepControl {
    fn default() -> Self {
        Self { dr: 1e-3, cutoff: default_cutoff(), max_steps: default_max_steps() }
    }
}

impl StepControl {
    pub fn with_dr(dr: f64) -> Self {
        Self { dr, ..Self::default() }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.dr > 0.0 && self.dr.is_finite()) {
            return Err(domain(format!("dr = {} must be positive", self.dr)));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(domain(format!("cutoff = {} must be positive", self.cutoff)));
        }
        if self.max_steps == 0 {
            return Err(domain("max_steps must be positive"));
        }
        Ok(())
    }
}

/// One stored state of the driver. `jump` marks an increment in which A and D jumped together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub r: f64,
    pub a: Point,
    pub d: f64,
    pub jump: bool,
}

enum Dynamics {
    Subdiffusion { stable: StableSampler, scale: f64 },
    VariableOrder,
    LevyWalk { rate: f64, p_none: f64, beta: f64, comp_d: f64, comp_a: Point },
}

/// Euler scheme for (A, D), advanced one operational step at a time.
pub struct Walker<'m> {
    model: &'m ModelSpec,
    dynamics: Dynamics,
    dim: usize,
    dr: f64,
    sqrt_dr: f64,
    cutoff: f64,
    a: Point,
    d: f64,
    r: f64,
    steps: usize,
    max_steps: usize,
}

impl<'m> Walker<'m> {
    pub fn new(model: &'m ModelSpec, x0: &[f64], t0: f64, control: StepControl) -> Result<Self> {
        model.check()?;
        control.check()?;
        let dim = model.dimension();
        if x0.len() != dim {
            return Err(domain(format!("x0 has {} coordinates, model dimension is {dim}", x0.len())));
        }
        if !t0.is_finite() || x0.iter().any(|v| !v.is_finite()) {
            return Err(domain("start point must be finite"));
        }
        let dr = control.dr;
        let dynamics = match model {
            ModelSpec::Subdiffusion(m) => {
                Dynamics::Subdiffusion { stable: StableSampler::unchecked(m.beta), scale: dr.powf(1.0 / m.beta) }
            }
            ModelSpec::VariableOrder(_) => Dynamics::VariableOrder,
            ModelSpec::LevyWalk(m) => {
                let delta = control.cutoff;
                let rate = power_tail(m.beta, delta);
                // ∫_0^δ r h_β(r) dr
                let comp_d = m.beta * delta.powf(1.0 - m.beta) / (1.0 - m.beta) * rgamma(1.0 - m.beta);
                let mean = m.directions.mean(dim);
                let mut comp_a = [0.0; MAX_DIM];
                for i in 0..dim {
                    comp_a[i] = mean[i] * comp_d;
                }
                Dynamics::LevyWalk { rate, p_none: (-rate * dr).exp(), beta: m.beta, comp_d, comp_a }
            }
        };
        Ok(Self {
            model,
            dynamics,
            dim,
            dr,
            sqrt_dr: dr.sqrt(),
            cutoff: control.cutoff,
            a: crate::kernels::point_from_slice(x0),
            d: t0,
            r: 0.0,
            steps: 0,
            max_steps: control.max_steps,
        })
    }

    pub fn entry(&self) -> Entry {
        Entry { r: self.r, a: self.a, d: self.d, jump: false }
    }

    pub fn position(&self) -> &Point {
        &self.a
    }

    pub fn time(&self) -> f64 {
        self.d
    }

    pub fn operational_time(&self) -> f64 {
        self.r
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> &'m ModelSpec {
        self.model
    }

    /// Small-jump compensator of the Lévy walk: drift of D and of A per unit operational time.
    pub fn compensator(&self) -> Option<(f64, Point)> {
        match &self.dynamics {
            Dynamics::LevyWalk { comp_d, comp_a, .. } => Some((*comp_d, *comp_a)),
            _ => None,
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Advances by one operational step, reporting every new entry in order.
    /// Fails once the step budget is spent.
    #[inline]
    pub fn advance<R: Rng + ?Sized, S: FnMut(&Entry)>(&mut self, horizon: f64, rng: &mut R, mut sink: S) -> Result<()> {
        if self.steps >= self.max_steps {
            return Err(Error::HorizonNotReached { horizon, steps: self.steps });
        }
        self.steps += 1;
        self.r += self.dr;
        match &self.dynamics {
            Dynamics::Subdiffusion { stable, scale } => {
                let ModelSpec::Subdiffusion(m) = self.model else { unreachable!() };
                let b = if m.drift.is_zero() { 0.0 } else { m.drift.eval(&self.a, self.d, 1)[0] };
                let z: f64 = StandardNormal.sample(rng);
                let s = stable.sample(rng);
                self.a[0] += b * self.dr + self.sqrt_dr * z;
                self.d += scale * s;
                sink(&Entry { r: self.r, a: self.a, d: self.d, jump: false });
            }
            Dynamics::VariableOrder => {
                // Over one step the order is frozen at β(A); F₂ pushes the β₀ driver's
                // Lévy measure onto h_{β(A)}, so the increment is exactly β(A)-stable.
                let beta = self.model.order_at(&self.a);
                let stable = StableSampler::unchecked(beta);
                let z: f64 = StandardNormal.sample(rng);
                let s = stable.sample(rng);
                self.a[0] += self.sqrt_dr * z;
                self.d += self.dr.powf(1.0 / beta) * s;
                sink(&Entry { r: self.r, a: self.a, d: self.d, jump: false });
            }
            Dynamics::LevyWalk { rate, p_none, beta, comp_d, comp_a } => {
                let ModelSpec::LevyWalk(m) = self.model else { unreachable!() };
                let bias = if m.drift.is_zero() { [0.0; MAX_DIM] } else { m.drift.eval(&self.a, self.d, self.dim) };
                for i in 0..self.dim {
                    self.a[i] += (bias[i] + comp_a[i]) * self.dr;
                }
                self.d += comp_d * self.dr;
                sink(&Entry { r: self.r, a: self.a, d: self.d, jump: false });
                let jumps = poisson(*rate * self.dr, *p_none, rng);
                for _ in 0..jumps {
                    let u = 1.0 - rng.random::<f64>();
                    let len = self.cutoff * u.powf(-1.0 / beta);
                    let theta = m.directions.sample(self.dim, rng);
                    for i in 0..self.dim {
                        self.a[i] += len * theta[i];
                    }
                    self.d += len;
                    sink(&Entry { r: self.r, a: self.a, d: self.d, jump: true });
                }
            }
        }
        Ok(())
    }
}

/// Poisson(mean) by sequential inversion; `p_none` = e^{-mean}.
#[inline]
fn poisson<R: Rng + ?Sized>(mean: f64, p_none: f64, rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let mut k = 0;
    let mut p = p_none;
    let mut cdf = p;
    while u >= cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 {
            break;
        }
    }
    k
}

/// A stored trajectory of (A_r, D_r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePath {
    pub dimension: usize,
    pub times: Vec<f64>,
    /// Row-major, `dimension` values per entry.
    pub a_values: Vec<f64>,
    pub d_values: Vec<f64>,
    pub jump_flags: Vec<bool>,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
}

impl SpaceTimePath {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, times: vec![], a_values: vec![], d_values: vec![], jump_flags: vec![], seed: None, stream: None }
    }

    pub fn push(&mut self, e: &Entry) {
        self.times.push(e.r);
        self.a_values.extend_from_slice(&e.a[..self.dimension]);
        self.d_values.push(e.d);
        self.jump_flags.push(e.jump);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn a(&self, k: usize) -> &[f64] {
        &self.a_values[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn d(&self, k: usize) -> f64 {
        self.d_values[k]
    }
}

/// Integrates (A, D) from (x0, t0) until D exceeds the horizon, storing every entry.
pub fn integrate_ad<R: Rng + ?Sized>(
    model: &ModelSpec,
    x0: &[f64],
    t0: f64,
    horizon: f64,
    control: StepControl,
    rng: &mut R,
) -> Result<SpaceTimePath> {
    if !(horizon > t0) {
        return Err(domain(format!("horizon {horizon} must exceed t0 = {t0}")));
    }
    let mut walker = Walker::new(model, x0, t0, control)?;
    let mut path = SpaceTimePath::new(walker.dimension());
    path.push(&walker.entry());
    while walker.time() <= horizon {
        walker.advance(horizon, rng, |e| path.push(e))?;
    }
    Ok(path)
}

/// E(t) on the stored grid: the first entry with D > t.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InverseTime {
    pub index: usize,
}

pub fn inverse_time(path: &SpaceTimePath, t: f64) -> Result<InverseTime> {
    let (start, end) = match (path.d_values.first(), path.d_values.last()) {
        (Some(&s), Some(&e)) => (s, e),
        _ => return Err(Error::EmptySample),
    };
    if !(t >= start && t < end) {
        return Err(Error::OutOfHorizon { t, start, end });
    }
    // D is nondecreasing, so the predicate D ≤ t is a prefix.
    let index = path.d_values.partition_point(|&d| d <= t);
    Ok(InverseTime { index })
}

/// Y_t = A(E(t)).
pub fn evaluate_octrw(path: &SpaceTimePath, t: f64) -> Result<Vec<f64>> {
    let e = inverse_time(path, t)?;
    Ok(path.a(e.index).to_vec())
}

/// X_t = A(E(t+)-): the value before the crossing increment when that increment was a joint jump.
pub fn evaluate_ctrw(path: &SpaceTimePath, t: f64) -> Result<Vec<f64>> {
    let e = inverse_time(path, t)?;
    let k = if path.jump_flags[e.index] { e.index - 1 } else { e.index };
    Ok(path.a(k).to_vec())
}
