//! Batched Monte Carlo marginals of the CTRW and OCTRW limits.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{StepControl, Walker};
use crate::error::{domain, Error, Result};
use crate::kernels::{norm, ModelSpec, Point};

/// Independent stream `path_id` of the master seed; paths are reproducible one by one.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// X_t and Y_t for a batch of paths at common physical times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSample {
    pub dimension: usize,
    pub times: Vec<f64>,
    /// Identifiers of the paths that reached the last time, in increasing order.
    pub path_ids: Vec<u64>,
    /// Path-major: path, then time, then coordinate.
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub n_paths: usize,
    pub failures: usize,
    pub seed: u64,
    pub dr: f64,
}

impl MarginalSample {
    pub fn len(&self) -> usize {
        self.path_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path_ids.is_empty()
    }

    fn offset(&self, path: usize, time: usize) -> usize {
        (path * self.times.len() + time) * self.dimension
    }

    pub fn x(&self, path: usize, time: usize) -> &[f64] {
        let o = self.offset(path, time);
        &self.x_values[o..o + self.dimension]
    }

    pub fn y(&self, path: usize, time: usize) -> &[f64] {
        let o = self.offset(path, time);
        &self.y_values[o..o + self.dimension]
    }

    /// One coordinate of X at time index `time`, across paths.
    pub fn x_component(&self, time: usize, component: usize) -> Vec<f64> {
        (0..self.len()).map(|p| self.x(p, time)[component]).collect()
    }

    pub fn y_component(&self, time: usize, component: usize) -> Vec<f64> {
        (0..self.len()).map(|p| self.y(p, time)[component]).collect()
    }

    /// ‖X_t - center‖ across paths.
    pub fn x_distance(&self, time: usize, center: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|p| distance(self.x(p, time), center)).collect()
    }

    pub fn y_distance(&self, time: usize, center: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|p| distance(self.y(p, time), center)).collect()
    }

    /// Largest |X_t - Y_t| over all paths, times and coordinates.
    pub fn max_xy_gap(&self) -> f64 {
        self.x_values.iter().zip(&self.y_values).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// CSV with header `path_id,time,x,y` (coordinates suffixed `x1, x2, …` when d > 1), path-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("path_id,time");
        if self.dimension == 1 {
            header.push_str(",x,y");
        } else {
            for i in 1..=self.dimension {
                header.push_str(&format!(",x{i}"));
            }
            for i in 1..=self.dimension {
                header.push_str(&format!(",y{i}"));
            }
        }
        writeln!(w, "{header}")?;
        for (p, id) in self.path_ids.iter().enumerate() {
            for (j, t) in self.times.iter().enumerate() {
                write!(w, "{id},{t}")?;
                for v in self.x(p, j) {
                    write!(w, ",{v}")?;
                }
                for v in self.y(p, j) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

fn distance(v: &[f64], center: &[f64]) -> f64 {
    let mut p: Point = [0.0; 3];
    for (i, x) in v.iter().enumerate() {
        p[i] = x - center.get(i).or(center.first()).copied().unwrap_or(0.0);
    }
    norm(&p, v.len())
}

/// Runs one path until D passes the last requested time, recording (X, Y) at each time.
pub(crate) fn march<R: rand::Rng + ?Sized>(walker: &mut Walker, times: &[f64], rng: &mut R) -> Result<(Vec<Point>, Vec<Point>)> {
    let n = times.len();
    let mut xs = vec![[0.0; 3]; n];
    let mut ys = vec![[0.0; 3]; n];
    let mut j = 0;
    let mut prev = *walker.position();
    let horizon = times.last().copied().unwrap_or(0.0);
    while j < n {
        walker.advance(horizon, rng, |e| {
            while j < n && e.d > times[j] {
                ys[j] = e.a;
                xs[j] = if e.jump { prev } else { e.a };
                j += 1;
            }
            prev = e.a;
        })?;
    }
    Ok((xs, ys))
}

pub(crate) fn check_times(times: &[f64], t0: f64) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("times must be finite and strictly increasing"));
    }
    if let Some(&first) = times.first() {
        if !(first > t0) {
            return Err(domain(format!("times must exceed the start time {t0}")));
        }
    }
    Ok(())
}

/// `n_paths` independent paths from (x0, t0), each evaluated at every time; path i uses stream i of `seed`.
pub fn sample_marginals(
    model: &ModelSpec,
    x0: &[f64],
    t0: f64,
    times: &[f64],
    n_paths: usize,
    control: StepControl,
    seed: u64,
) -> Result<MarginalSample> {
    check_times(times, t0)?;
    // Validates the model, start point and step control once.
    Walker::new(model, x0, t0, control)?;
    let dim = model.dimension();
    let results: Vec<Result<(Vec<Point>, Vec<Point>)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(seed, id);
            let mut walker = Walker::new(model, x0, t0, control)?;
            march(&mut walker, times, &mut rng)
        })
        .collect();
    let mut out = MarginalSample {
        dimension: dim,
        times: times.to_vec(),
        path_ids: Vec::with_capacity(n_paths),
        x_values: Vec::with_capacity(n_paths * times.len() * dim),
        y_values: Vec::with_capacity(n_paths * times.len() * dim),
        n_paths,
        failures: 0,
        seed,
        dr: control.dr,
    };
    for (id, r) in results.into_iter().enumerate() {
        match r {
            Ok((xs, ys)) => {
                out.path_ids.push(id as u64);
                for (x, y) in xs.iter().zip(&ys) {
                    out.x_values.extend_from_slice(&x[..dim]);
                    out.y_values.extend_from_slice(&y[..dim]);
                }
            }
            Err(Error::HorizonNotReached { .. }) => out.failures += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{DirectionLaw, DriftFn};
    use crate::sde_process::{evaluate_ctrw, evaluate_octrw, integrate_ad};

    #[test]
    fn zero_paths_is_empty() {
        let m = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        let s = sample_marginals(&m, &[0.0], 0.0, &[1.0], 0, StepControl::default(), 1).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.failures, 0);
    }

    #[test]
    fn streaming_matches_stored_path() {
        let m = ModelSpec::levy_walk(0.5, DriftFn::Zero, DirectionLaw::Uniform, 1);
        let times = [0.5, 1.0, 2.0];
        let control = StepControl::default();
        let s = sample_marginals(&m, &[0.0], 0.0, &times, 20, control, 77).unwrap();
        for p in 0..20 {
            let path = integrate_ad(&m, &[0.0], 0.0, 2.0, control, &mut path_rng(77, p as u64)).unwrap();
            for (j, &t) in times.iter().enumerate() {
                assert_eq!(s.x(p, j), &evaluate_ctrw(&path, t).unwrap()[..]);
                assert_eq!(s.y(p, j), &evaluate_octrw(&path, t).unwrap()[..]);
            }
        }
    }

    #[test]
    fn csv_is_path_major_with_header() {
        let m = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        let s = sample_marginals(&m, &[0.0], 0.0, &[0.5, 1.0], 2, StepControl::default(), 3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,time,x,y");
        assert!(lines[1].starts_with("0,0.5,"));
        assert!(lines[2].starts_with("0,1,"));
        assert!(lines[3].starts_with("1,0.5,"));
        let x: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(x, s.x(0, 0)[0]);
    }

    #[test]
    fn rejects_unordered_times() {
        let m = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        assert!(sample_marginals(&m, &[0.0], 0.0, &[1.0, 0.5], 1, StepControl::default(), 1).is_err());
        assert!(sample_marginals(&m, &[0.0], 1.0, &[1.0], 1, StepControl::default(), 1).is_err());
    }
}
