use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{empirical_cdf, ks_distance, ks_noise_floor};
use crate::error::{domain, Error, Result};
use crate::kernels::{norm, point_from_slice, ModelSpec, PrelimitKernel, MAX_DIM};
use crate::report::{ConvergenceReport, QuantityConvergence};
use crate::sde_process::{path_rng, sample_marginals, MarginalSample, StepControl};

/// Renewal steps allowed per path before a pre-limit simulation gives up.
pub const DEFAULT_RENEWAL_BUDGET: usize = 50_000_000;

/// Lagging (X) and leading (Y) pre-limit walks at one time, n_paths rows of `dimension` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrelimitSample {
    pub dimension: usize,
    pub scale: f64,
    pub time: f64,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub mean_renewals: f64,
}

impl PrelimitSample {
    pub fn n_paths(&self) -> usize {
        self.x_values.len() / self.dimension
    }

    pub fn x_component(&self, c: usize) -> Vec<f64> {
        self.x_values.iter().skip(c).step_by(self.dimension).copied().collect()
    }

    pub fn y_component(&self, c: usize) -> Vec<f64> {
        self.y_values.iter().skip(c).step_by(self.dimension).copied().collect()
    }

    pub fn x_norms(&self) -> Vec<f64> {
        norms(&self.x_values, self.dimension)
    }

    /// Fraction of paths on which the leading and lagging walks differ.
    pub fn differing_fraction(&self) -> f64 {
        let d = self.dimension;
        let differ = self.x_values.chunks(d).zip(self.y_values.chunks(d)).filter(|(x, y)| x != y).count();
        differ as f64 / self.n_paths().max(1) as f64
    }
}

fn norms(values: &[f64], dim: usize) -> Vec<f64> {
    values.chunks(dim).map(|row| norm(&point_from_slice(row), dim)).collect()
}

/// X and Y at the horizon, plus the renewal count.
type PathEnd = ([f64; MAX_DIM], [f64; MAX_DIM], usize);

/// Simulates X^n_t and Y^n_t by summing renewals of the kernel K^n until the waits pass t.
#[allow(clippy::too_many_arguments)]
pub fn simulate_prelimit(
    model: &ModelSpec,
    x0: &[f64],
    t0: f64,
    t: f64,
    n: f64,
    n_paths: usize,
    seed: u64,
    budget: usize,
) -> Result<PrelimitSample> {
    let kernel = PrelimitKernel::new(model, n)?;
    let dim = model.dimension();
    if x0.len() != dim {
        return Err(domain(format!("x0 has {} coordinates, model dimension is {dim}", x0.len())));
    }
    if !(t > t0) {
        return Err(domain(format!("t = {t} must exceed t0 = {t0}")));
    }
    let results: Vec<Result<PathEnd>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(seed, id);
            let mut x = point_from_slice(x0);
            let mut clock = t0;
            for count in 0..budget {
                let step = kernel.sample(&x, clock, &mut rng);
                if clock + step.wait > t {
                    let mut y = x;
                    for i in 0..dim {
                        y[i] += step.jump[i];
                    }
                    return Ok((x, y, count));
                }
                for i in 0..dim {
                    x[i] += step.jump[i];
                }
                clock += step.wait;
            }
            Err(Error::Budget(format!("path {id} needed more than {budget} renewals at n = {n}")))
        })
        .collect();
    let mut out = PrelimitSample {
        dimension: dim,
        scale: n,
        time: t,
        x_values: Vec::with_capacity(n_paths * dim),
        y_values: Vec::with_capacity(n_paths * dim),
        mean_renewals: 0.0,
    };
    let mut renewals = 0usize;
    for r in results {
        let (x, y, count) = r?;
        out.x_values.extend_from_slice(&x[..dim]);
        out.y_values.extend_from_slice(&y[..dim]);
        renewals += count;
    }
    out.mean_renewals = renewals as f64 / n_paths.max(1) as f64;
    Ok(out)
}

/// Stream offset separating the limit sample's paths from the pre-limit ones.
const LIMIT_STREAM: u64 = 1 << 40;

fn ks(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(ks_distance(&empirical_cdf(a)?, &empirical_cdf(b)?))
}

/// KS distance between pre-limit and limit marginals at time t, per scale n.
///
/// Quantities: `ks_x` and `ks_y` on the first coordinate of the lagging and leading walks, plus
/// `ks_x_norm` on ‖X‖ in more than one dimension. Each passes if it does not increase by more
/// than the KS noise floor over the last three scales.
#[allow(clippy::too_many_arguments)]
pub fn prelimit_convergence(
    model: &ModelSpec,
    x0: &[f64],
    t0: f64,
    t: f64,
    n_list: &[f64],
    n_paths: usize,
    control: StepControl,
    seed: u64,
) -> Result<ConvergenceReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("n_list must be nonempty and strictly increasing"));
    }
    let limit = limit_sample(model, x0, t0, t, n_paths, control, seed)?;
    let dim = model.dimension();
    let lx = limit.x_component(0, 0);
    let ly = limit.y_component(0, 0);
    let lnorm = limit.x_distance(0, x0);
    let (mut gx, mut gy, mut gn) = (Vec::new(), Vec::new(), Vec::new());
    for &n in n_list {
        let pre = simulate_prelimit(model, x0, t0, t, n, n_paths, seed, DEFAULT_RENEWAL_BUDGET)?;
        gx.push(ks(&pre.x_component(0), &lx)?);
        gy.push(ks(&pre.y_component(0), &ly)?);
        if dim > 1 {
            let centered: Vec<f64> = pre.x_values.iter().enumerate().map(|(i, v)| v - x0[i % dim]).collect();
            gn.push(ks(&norms(&centered, dim), &lnorm)?);
        }
    }
    let floor = ks_noise_floor(n_paths);
    let errors = vec![floor; n_list.len()];
    let mut quantities = vec![
        QuantityConvergence::new("ks_x", n_list, gx, errors.clone(), floor),
        QuantityConvergence::new("ks_y", n_list, gy, errors.clone(), floor),
    ];
    if dim > 1 {
        quantities.push(QuantityConvergence::new("ks_x_norm", n_list, gn, errors, floor));
    }
    Ok(ConvergenceReport::new(format!("{:?} pre-limit to limit at t = {t}", model.id()), n_list.to_vec(), quantities, Some(floor)))
}

/// Limit marginals at time t on a stream family disjoint from the pre-limit paths.
pub fn limit_sample(
    model: &ModelSpec,
    x0: &[f64],
    t0: f64,
    t: f64,
    n_paths: usize,
    control: StepControl,
    seed: u64,
) -> Result<MarginalSample> {
    let limit = sample_marginals(model, x0, t0, &[t], n_paths, control, seed ^ LIMIT_STREAM)?;
    if limit.failures > 0 {
        return Err(Error::HorizonNotReached { horizon: t, steps: control.max_steps });
    }
    Ok(limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{DirectionLaw, DriftFn};

    #[test]
    fn prelimit_walks_stay_on_the_lattice() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        let s = simulate_prelimit(&model, &[0.0], 0.0, 1.0, 100.0, 200, 4, DEFAULT_RENEWAL_BUDGET).unwrap();
        for v in s.x_values.iter().chain(&s.y_values) {
            assert!((v * 10.0 - (v * 10.0).round()).abs() < 1e-9);
        }
        // Y = X + J on every path, and J = ±Δx never vanishes.
        assert_eq!(s.differing_fraction(), 1.0);
        assert!(s.mean_renewals > 10.0);
    }

    #[test]
    fn budget_is_enforced() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        let err = simulate_prelimit(&model, &[0.0], 0.0, 1.0, 1e4, 4, 4, 3).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
    }

    #[test]
    fn limit_self_comparison_is_within_noise() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        let a = limit_sample(&model, &[0.0], 0.0, 1.0, 3000, StepControl::default(), 1).unwrap();
        let b = limit_sample(&model, &[0.0], 0.0, 1.0, 3000, StepControl::default(), 2).unwrap();
        let d = ks(&a.x_component(0, 0), &b.x_component(0, 0)).unwrap();
        assert!(d < ks_noise_floor(3000), "{d}");
    }

    #[test]
    fn distance_to_limit_shrinks_with_scale() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        let rep = prelimit_convergence(&model, &[0.0], 0.0, 1.0, &[10.0, 1000.0], 4000, StepControl::default(), 8).unwrap();
        let g = &rep.quantity("ks_x").unwrap().gaps;
        assert!(g[0] > g[1] + rep.noise_floor.unwrap(), "{g:?}");
    }

    #[test]
    fn levy_walk_report_has_norm_row_in_two_dimensions() {
        let model = ModelSpec::levy_walk(0.5, DriftFn::Zero, DirectionLaw::Uniform, 2);
        let rep = prelimit_convergence(&model, &[0.0, 0.0], 0.0, 1.0, &[10.0, 100.0], 300, StepControl::default(), 8).unwrap();
        assert!(rep.quantity("ks_x_norm").is_some());
    }
}
