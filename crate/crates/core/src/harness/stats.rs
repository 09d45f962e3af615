use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Mean of i.i.d. draws with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Ok(Self { value: mean, se: (var / n as f64).sqrt(), n })
    }

    /// (value - target) / se; infinite when se = 0 and the values differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

pub fn empirical_cdf(samples: &[f64]) -> Result<Ecdf> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(domain("samples contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Ecdf { sorted })
}

impl Ecdf {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.len() as f64
    }

    /// Distinct jump points with F(x-) and F(x).
    fn steps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.len() as f64;
        let mut i = 0;
        std::iter::from_fn(move || {
            if i >= self.sorted.len() {
                return None;
            }
            let x = self.sorted[i];
            let before = i as f64 / n;
            while i < self.sorted.len() && self.sorted[i] == x {
                i += 1;
            }
            Some((x, before, i as f64 / n))
        })
    }
}

/// sup |F_a - F_b| over the union of jump points.
pub fn ks_distance(a: &Ecdf, b: &Ecdf) -> f64 {
    let (xa, xb) = (&a.sorted, &b.sorted);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] == x {
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// sup |F_n - F| against a continuous CDF.
pub fn ks_against<F: Fn(f64) -> f64>(a: &Ecdf, cdf: F) -> f64 {
    a.steps().fold(0.0, |d: f64, (x, before, after)| {
        let f = cdf(x);
        d.max((after - f).abs()).max((before - f).abs())
    })
}

/// 1.5 × the 95% Kolmogorov quantile for n draws.
pub fn ks_noise_floor(n: usize) -> f64 {
    1.5 * 1.36 / (n as f64).sqrt()
}

/// Mean squared displacement of `samples` (n rows of `dim` coordinates) about `center`.
pub fn msd(samples: &[f64], dim: usize, center: &[f64]) -> Result<MeanEstimate> {
    if dim == 0 || !samples.len().is_multiple_of(dim) {
        return Err(Error::LengthMismatch { expected: dim, got: samples.len() % dim.max(1) });
    }
    if center.len() != dim {
        return Err(Error::LengthMismatch { expected: dim, got: center.len() });
    }
    let sq: Vec<f64> =
        samples.chunks_exact(dim).map(|row| row.iter().zip(center).map(|(x, c)| (x - c).powi(2)).sum()).collect();
    MeanEstimate::from_values(&sq)
}

/// Least-squares slope of ln y against ln x.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(domain("need at least two positive points"));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub index: f64,
    pub se: f64,
    pub k: usize,
    /// Set when the estimate keeps rising as k shrinks, the signature of a tail lighter than any power.
    pub light_tail: bool,
}

const BOOTSTRAP_ROUNDS: usize = 200;

pub fn default_hill_k(n: usize) -> usize {
    ((n as f64).powf(2.0 / 3.0).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Hill estimate from the top k of `values`, which is partially reordered.
fn hill_in_place(values: &mut [f64], k: usize) -> f64 {
    let n = values.len();
    // values[n-k-1] becomes the (k+1)-th largest, with the top k after it.
    values.select_nth_unstable_by(n - k - 1, f64::total_cmp);
    let threshold = values[n - k - 1].ln();
    let mean: f64 = values[n - k..].iter().map(|v| v.ln() - threshold).sum::<f64>() / k as f64;
    1.0 / mean
}

/// Hill estimator of the tail index α in P(X > x) ~ x^{-α}, with a bootstrap standard error.
pub fn hill_tail_index(samples: &[f64], k: usize) -> Result<HillEstimate> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if k == 0 || k >= n {
        return Err(Error::OutOfRange(format!("k = {k} must lie in [1, {})", n)));
    }
    if samples.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(domain("Hill estimator needs positive finite samples"));
    }
    let mut work = samples.to_vec();
    let index = hill_in_place(&mut work, k);

    let mut rng = ChaCha8Rng::seed_from_u64(0x4817_u64 ^ (n as u64) << 20 ^ k as u64);
    let mut boot = Vec::with_capacity(BOOTSTRAP_ROUNDS);
    for _ in 0..BOOTSTRAP_ROUNDS {
        for w in work.iter_mut() {
            *w = samples[rng.random_range(0..n)];
        }
        boot.push(hill_in_place(&mut work, k));
    }
    let se = MeanEstimate::from_values(&boot)?.se * (BOOTSTRAP_ROUNDS as f64).sqrt();

    let mut ladder = vec![index];
    let mut kk = k / 2;
    while kk >= 10 && ladder.len() < 4 {
        work.copy_from_slice(samples);
        ladder.push(hill_in_place(&mut work, kk));
        kk /= 2;
    }
    let light_tail =
        ladder.len() >= 3 && ladder.windows(2).all(|w| w[1] > w[0]) && ladder[ladder.len() - 1] > 1.25 * ladder[0];
    Ok(HillEstimate { index, se, k, light_tail })
}
