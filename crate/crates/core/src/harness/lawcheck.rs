use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::MeanEstimate;
use crate::error::{domain, Error, Result};
use crate::kernels::{ModelId, ModelSpec, Point, MAX_DIM};
use crate::payoff::Payoff;
use crate::sde_process::{path_rng, StepControl, Walker};
use crate::special::{power_tail, rgamma, stable_survival};

/// P(S > x) for the standard positive β-stable law, tabulated for repeated evaluation.
///
/// Cubic interpolation in ln x on the body; the convergent series in z = x^{-β} above x_hi,
/// where z ≤ 0.05 makes 24 terms exact to rounding.
struct SurvivalTable {
    beta: f64,
    ln_lo: f64,
    ln_hi: f64,
    h: f64,
    values: Vec<f64>,
    coeffs: Vec<f64>,
}

const TABLE_STEP: f64 = 0.01;
const SERIES_Z: f64 = 0.05;
const SERIES_TERMS: usize = 24;

impl SurvivalTable {
    fn new(beta: f64) -> Self {
        let mut coeffs = Vec::with_capacity(SERIES_TERMS);
        let mut fact = 1.0;
        for k in 1..=SERIES_TERMS {
            fact *= k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            coeffs.push(sign * rgamma(1.0 - k as f64 * beta) / fact);
        }
        let ln_hi = -SERIES_Z.ln() / beta;
        let mut ln_lo = ln_hi;
        while ln_lo > -400.0 && stable_survival(beta, ln_lo.exp()) < 1.0 - 1e-15 {
            ln_lo -= 1.0;
        }
        let n = ((ln_hi - ln_lo) / TABLE_STEP).ceil() as usize + 1;
        let h = (ln_hi - ln_lo) / (n - 1) as f64;
        // One node of padding on each side for the cubic stencil.
        let values = (0..n + 2)
            .map(|i| {
                let lx = ln_lo + (i as f64 - 1.0) * h;
                if lx >= ln_hi {
                    Self::series(&coeffs, lx.exp().powf(-beta))
                } else {
                    stable_survival(beta, lx.exp())
                }
            })
            .collect();
        Self { beta, ln_lo, ln_hi, h, values, coeffs }
    }

    fn series(coeffs: &[f64], z: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c) * z
    }

    fn eval(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 1.0;
        }
        let lx = x.ln();
        if lx >= self.ln_hi {
            return Self::series(&self.coeffs, x.powf(-self.beta));
        }
        if lx <= self.ln_lo {
            return 1.0;
        }
        let u = (lx - self.ln_lo) / self.h;
        let i = (u.floor() as usize).min(self.values.len() - 4);
        let t = u - i as f64;
        // values[i + 1] sits at node i.
        let (p0, p1, p2, p3) = (self.values[i], self.values[i + 1], self.values[i + 2], self.values[i + 3]);
        let v = p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
        v.clamp(0.0, 1.0)
    }
}

/// Survival tables at evenly spaced orders, linearly interpolated in β.
struct SurvivalFamily {
    lo: f64,
    step: f64,
    tables: Vec<SurvivalTable>,
}

const FAMILY_NODES: usize = 65;

impl SurvivalFamily {
    fn new(lo: f64, hi: f64) -> Self {
        if hi - lo < 1e-12 {
            return Self { lo, step: 1.0, tables: vec![SurvivalTable::new(lo)] };
        }
        let step = (hi - lo) / (FAMILY_NODES - 1) as f64;
        let tables = (0..FAMILY_NODES).map(|i| SurvivalTable::new(lo + step * i as f64)).collect();
        Self { lo, step, tables }
    }

    fn eval(&self, beta: f64, x: f64) -> f64 {
        if self.tables.len() == 1 {
            return self.tables[0].eval(x);
        }
        let u = ((beta - self.lo) / self.step).clamp(0.0, (self.tables.len() - 1) as f64);
        let i = (u.floor() as usize).min(self.tables.len() - 2);
        let t = u - i as f64;
        (1.0 - t) * self.tables[i].eval(x) + t * self.tables[i + 1].eval(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawBranch {
    /// E f(X_t) against E Σ f·H(t - D) over the occupation of (A, D).
    Ctrw,
    /// E f(Y_t) against the overshooting double integral over jumps that cross t.
    Octrw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub model: ModelId,
    pub branch: LawBranch,
    pub mc_lhs: MeanEstimate,
    pub formula_rhs: MeanEstimate,
    /// Standard error of the paired per-path difference.
    pub diff_se: f64,
    pub z_score: f64,
    pub n_paths: usize,
    pub failures: usize,
}

impl LawCheck {
    pub fn passed(&self, threshold: f64) -> bool {
        self.z_score.abs() <= threshold
    }
}

/// Marginal-law identity check.
///
/// Each path yields f at its time-t position and the occupation-formula integrand summed along
/// the path. Within one Euler step the increment of D is exactly dr^{1/β}·S, so the occupation
/// weight H_β(t - D)·dr is replaced by the step's exact crossing probability, which tends to it
/// as dr → 0 and keeps both estimators unbiased for the same discrete walk.
#[allow(clippy::too_many_arguments)]
pub fn proposition_law_check(
    model: &ModelSpec,
    f: &Payoff,
    x0: &[f64],
    s: f64,
    t: f64,
    n_paths: usize,
    control: StepControl,
    seed: u64,
) -> Result<LawCheck> {
    let dim = model.dimension();
    let mut bad = Vec::new();
    f.validate("payoff", dim, &mut bad);
    if let Some(v) = bad.first() {
        return Err(Error::Domain(v.to_string()));
    }
    if !(t > s) {
        return Err(domain(format!("t = {t} must exceed s = {s}")));
    }
    if n_paths < 2 {
        return Err(Error::EmptySample);
    }
    Walker::new(model, x0, s, control)?;
    let branch = if model.decoupled() { LawBranch::Ctrw } else { LawBranch::Octrw };
    let family = match model {
        ModelSpec::Subdiffusion(m) => Some(SurvivalFamily::new(m.beta, m.beta)),
        ModelSpec::VariableOrder(m) => {
            let (lo, hi) = m.beta_fn.range();
            Some(SurvivalFamily::new(lo, hi))
        }
        ModelSpec::LevyWalk(_) => None,
    };
    let results: Vec<Result<(f64, f64)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(seed, id);
            let mut walker = Walker::new(model, x0, s, control)?;
            match &family {
                Some(fam) => ctrw_path(&mut walker, fam, f, t, &mut rng),
                None => {
                    let mut aux = ChaCha8Rng::seed_from_u64(seed);
                    aux.set_stream(id | 1 << 63);
                    octrw_path(&mut walker, f, t, &mut rng, &mut aux)
                }
            }
        })
        .collect();
    let mut lhs = Vec::with_capacity(n_paths);
    let mut rhs = Vec::with_capacity(n_paths);
    let mut failures = 0;
    for r in results {
        match r {
            Ok((l, r)) => {
                lhs.push(l);
                rhs.push(r);
            }
            Err(Error::HorizonNotReached { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    if lhs.len() < 2 && failures > 0 {
        return Err(Error::HorizonNotReached { horizon: t, steps: control.max_steps });
    }
    let mc_lhs = MeanEstimate::from_values(&lhs)?;
    let formula_rhs = MeanEstimate::from_values(&rhs)?;
    let diffs: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let diff = MeanEstimate::from_values(&diffs)?;
    Ok(LawCheck {
        model: model.id(),
        branch,
        mc_lhs,
        formula_rhs,
        diff_se: diff.se,
        z_score: diff.z_score(0.0),
        n_paths: lhs.len(),
        failures,
    })
}

/// Σ_k G_k(t - D_{k-1}) · E[f(A_k) | A_{k-1}] until the path crosses t.
fn ctrw_path<R: Rng>(walker: &mut Walker, fam: &SurvivalFamily, f: &Payoff, t: f64, rng: &mut R) -> Result<(f64, f64)> {
    let model = walker.model();
    let dr = walker.dr();
    let drift = model.drift().filter(|d| !d.is_zero());
    let mut rhs = 0.0;
    loop {
        let a = *walker.position();
        let d = walker.time();
        let beta = model.order_at(&a);
        let cross = fam.eval(beta, (t - d) * dr.powf(-1.0 / beta));
        let mut mean = a;
        if let Some(b) = drift {
            mean[0] += b.eval(&a, d, 1)[0] * dr;
        }
        rhs += cross * f.smoothed(&mean, dr, 1);
        walker.advance(t, rng, |_| {})?;
        if walker.time() > t {
            return Ok((f.eval(walker.position(), 1), rhs));
        }
    }
}

/// Overshooting walk: per step, the drift entry crosses t deterministically or a jump longer than
/// the remaining gap does, with probability 1 - exp(-dr·H_β(r0)), r0 = max(δ, gap).
fn octrw_path<R: Rng>(walker: &mut Walker, f: &Payoff, t: f64, rng: &mut R, aux: &mut R) -> Result<(f64, f64)> {
    let ModelSpec::LevyWalk(m) = walker.model() else { unreachable!() };
    let dim = walker.dimension();
    let dr = walker.dr();
    let delta = walker.cutoff();
    let (comp_d, comp_a) = walker.compensator().expect("Lévy walk has a compensator");
    let mut rhs = 0.0;
    loop {
        let a = *walker.position();
        let d = walker.time();
        let bias = m.drift.eval(&a, d, dim);
        let mut a1: Point = [0.0; MAX_DIM];
        for i in 0..dim {
            a1[i] = a[i] + (bias[i] + comp_a[i]) * dr;
        }
        let gap = t - (d + comp_d * dr);
        if gap < 0.0 {
            rhs += f.eval(&a1, dim);
        } else {
            let r0 = gap.max(delta);
            let p = -(-dr * power_tail(m.beta, r0)).exp_m1();
            let u = 1.0 - aux.random::<f64>();
            let len = r0 * u.powf(-1.0 / m.beta);
            let theta = m.directions.sample(dim, aux);
            let mut y = a1;
            for i in 0..dim {
                y[i] += len * theta[i];
            }
            rhs += p * f.eval(&y, dim);
        }
        let mut crossed: Option<Point> = None;
        walker.advance(t, rng, |e| {
            if crossed.is_none() && e.d > t {
                crossed = Some(e.a);
            }
        })?;
        if let Some(y) = crossed {
            return Ok((f.eval(&y, dim), rhs));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{BetaFn, DirectionLaw, DriftFn};

    #[test]
    fn table_matches_direct_survival() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &beta in &[0.2, 0.5, 0.77] {
            let table = SurvivalTable::new(beta);
            for _ in 0..300 {
                let x = (rng.random::<f64>() * 30.0 - 12.0).exp();
                let (a, b) = (table.eval(x), stable_survival(beta, x));
                assert!((a - b).abs() < 2e-7, "beta {beta} x {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn family_interpolates_between_orders() {
        let fam = SurvivalFamily::new(0.3, 0.8);
        for &(beta, x) in &[(0.41, 2.0), (0.555, 0.3), (0.79, 40.0)] {
            let (a, b) = (fam.eval(beta, x), stable_survival(beta, x));
            assert!((a - b).abs() < 5e-5, "{beta} {x}: {a} vs {b}");
        }
    }

    #[test]
    fn unit_payoff_balances() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        let one = Payoff::Constant { value: 1.0 };
        let c = proposition_law_check(&model, &one, &[0.0], 0.0, 1.0, 4000, StepControl::default(), 2).unwrap();
        assert_eq!(c.mc_lhs.value, 1.0);
        assert!(c.passed(3.0), "{c:?}");
        assert_eq!(c.branch, LawBranch::Ctrw);
    }

    #[test]
    fn bump_payoff_balances_for_each_model() {
        let f = Payoff::bump(0.2, 0.5);
        let models = [
            ModelSpec::subdiffusion(0.5, DriftFn::SinCos { amplitude: 0.5 }),
            ModelSpec::variable_order(BetaFn::default()),
            ModelSpec::levy_walk(0.5, DriftFn::Zero, DirectionLaw::Uniform, 1),
        ];
        for model in &models {
            let c = proposition_law_check(model, &f, &[0.0], 0.0, 1.0, 4000, StepControl::default(), 3).unwrap();
            assert!(c.passed(3.0), "{c:?}");
            assert_eq!(c.failures, 0);
        }
    }

    #[test]
    fn rejects_reversed_times() {
        let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
        assert!(proposition_law_check(&model, &Payoff::default(), &[0.0], 1.0, 1.0, 10, StepControl::default(), 1).is_err());
    }
}
