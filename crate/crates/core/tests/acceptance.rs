//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the process exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ctrw_core::fracops::{memory_kernel_value, rl_derivative};
use ctrw_core::harness::{
    empirical_cdf, hill_tail_index, default_hill_k, ks_against, log_log_slope, msd, prelimit_convergence,
    proposition_law_check, MeanEstimate,
};
use ctrw_core::kernels::{f2_preimage, levy_tail, verify_coefficient_limits, BetaFn, DirectionLaw, DriftFn, ModelSpec};
use ctrw_core::payoff::Payoff;
use ctrw_core::quad::{integrate_panels, Tolerance};
use ctrw_core::sde_process::{path_rng, sample_marginals, sample_stable_increment, MarginalSample, StepControl};
use ctrw_core::solvers::{solve_backward_41, solve_backward_42, solve_forward, GridField, GridParams, Mollifier};
use ctrw_core::special::gamma;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MC_PATHS: usize = 100_000;
const SEED: u64 = 20_240_601;

type Outcome = Result<(bool, String), String>;

fn sincos_subdiffusion() -> ModelSpec {
    ModelSpec::subdiffusion(0.5, DriftFn::SinCos { amplitude: 0.5 })
}

fn default_variable_order() -> ModelSpec {
    ModelSpec::variable_order(BetaFn::default())
}

fn levy_walk(dimension: usize) -> ModelSpec {
    ModelSpec::levy_walk(0.5, DriftFn::Zero, DirectionLaw::Uniform, dimension)
}

fn unit_grid() -> GridParams {
    GridParams { half_width: 8.0, dx: 0.02, dt: 1e-3, s: 0.0, t_end: 1.0 }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

/// Limit samples at t = 1 from the origin, shared by the forward and backward comparisons.
struct Shared {
    sub: MarginalSample,
    vo: MarginalSample,
}

fn shared() -> Result<Shared, String> {
    let c = StepControl::default();
    Ok(Shared {
        sub: sample_marginals(&sincos_subdiffusion(), &[0.0], 0.0, &[1.0], MC_PATHS, c, SEED).map_err(e)?,
        vo: sample_marginals(&default_variable_order(), &[0.0], 0.0, &[1.0], MC_PATHS, c, SEED + 1).map_err(e)?,
    })
}

fn c01_pushforward() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let b0 = rng.random_range(0.05..0.95);
        let bx = rng.random_range(0.05..0.95);
        let w = 10f64.powf(rng.random_range(-3.0..3.0));
        let lhs = levy_tail(b0, f2_preimage(b0, bx, w).map_err(e)?).map_err(e)?;
        let rhs = levy_tail(bx, w).map_err(e)?;
        worst = worst.max(((lhs - rhs) / rhs).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 1e-10 && secs < 1.0, format!("max rel err {worst:.2e} (<= 1e-10), {secs:.3}s (< 1s)")))
}

fn c02_power_rule() -> Outcome {
    let start = Instant::now();
    let n = 4096;
    let dt = 1.0 / n as f64;
    let series: Vec<f64> = (0..=n).map(|m| (m as f64 * dt).powi(2)).collect();
    let d = rl_derivative(&series, 0.5, dt).map_err(e)?;
    let mut worst = 0.0f64;
    for t in [0.25, 0.5, 0.75, 1.0] {
        let m = (t * n as f64).round() as usize;
        let exact = 2.0 / gamma(2.5) * t.powf(1.5);
        worst = worst.max(((d[m] - exact) / exact).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 0.01 && secs < 1.0, format!("max rel err {worst:.2e} at t in {{0.25..1}} (<= 1%), {secs:.3}s")))
}

fn c03_laplace() -> Outcome {
    let mut worst = 0.0f64;
    for beta in [0.3f64, 0.5, 0.7] {
        let model = ModelSpec::subdiffusion(beta, DriftFn::Zero);
        for lambda in [0.5f64, 1.0, 2.0] {
            // t = u^{1/β} removes the t^{β-1} singularity; the tail beyond λt = 60 is below 1e-26.
            let upper = (60.0 / lambda).powf(beta);
            let g = |u: f64| {
                if u <= 0.0 {
                    return 1.0 / gamma(1.0 + beta);
                }
                let t = u.powf(1.0 / beta);
                let v = memory_kernel_value(&model, &[0.0], t).unwrap();
                (-lambda * t).exp() * v * t.powf(1.0 - beta) / beta
            };
            let breaks: Vec<f64> = (0..=16).map(|k| upper * k as f64 / 16.0).collect();
            let q = integrate_panels(g, &breaks, Tolerance::abs(1e-10)).map_err(e)?;
            worst = worst.max((q.value - lambda.powf(-beta)).abs());
        }
    }
    Ok((worst <= 1e-6, format!("max |quadrature - λ^-β| {worst:.2e} (<= 1e-6)")))
}

fn c04_msd() -> Outcome {
    let start = Instant::now();
    let model = ModelSpec::subdiffusion(0.5, DriftFn::Zero);
    let times = [0.5, 1.0, 2.0];
    let s = sample_marginals(&model, &[0.0], 0.0, &times, MC_PATHS, StepControl::default(), SEED + 4).map_err(e)?;
    let msds: Vec<MeanEstimate> = (0..3).map(|k| msd(&s.x_component(k, 0), 1, &[0.0])).collect::<Result<_, _>>().map_err(e)?;
    let target = 2.0 / PI.sqrt();
    let z = msds[1].z_score(target);
    let slope = log_log_slope(&times, &msds.iter().map(|m| m.value).collect::<Vec<_>>()).map_err(e)?;

    // Independent oracle path: E(1) from a directly simulated stable subordinator.
    let dr = 1e-3;
    let n_direct = 20_000;
    let occupation: Vec<f64> = (0..n_direct as u64)
        .map(|id| {
            let mut rng = path_rng(SEED + 40, id);
            let (mut d, mut k) = (0.0, 0u64);
            while d < 1.0 {
                d += sample_stable_increment(0.5, dr, &mut rng).unwrap();
                k += 1;
            }
            k as f64 * dr
        })
        .collect();
    let direct = MeanEstimate::from_values(&occupation).map_err(e)?;
    let z_direct = (msds[1].value - direct.value) / (msds[1].se.powi(2) + direct.se.powi(2)).sqrt();
    let secs = start.elapsed().as_secs_f64();
    let ok = z.abs() <= 3.0 && (slope - 0.5).abs() <= 0.05 && z_direct.abs() <= 3.0 && secs < 300.0;
    Ok((
        ok,
        format!(
            "MSD(1) = {:.4} ± {:.4} vs {target:.4} (z = {z:.2}); slope {slope:.4}; direct E(1) {:.4} (z = {z_direct:.2}); {secs:.1}s",
            msds[1].value, msds[1].se, direct.value
        ),
    ))
}

fn pde_ks(model: &ModelSpec, sample: &MarginalSample) -> Result<f64, String> {
    let field = solve_forward(model, 0.0, &unit_grid()).map_err(e)?;
    let ecdf = empirical_cdf(&sample.x_component(0, 0)).map_err(e)?;
    Ok(ks_against(&ecdf, field.cdf_fn(field.nt() - 1)))
}

fn c05_forward(sh: &Shared) -> Outcome {
    let k_sub = pde_ks(&sincos_subdiffusion(), &sh.sub)?;
    let k_vo = pde_ks(&default_variable_order(), &sh.vo)?;
    Ok((k_sub <= 0.03 && k_vo <= 0.03, format!("KS subdiffusion {k_sub:.4}, variable-order {k_vo:.4} (<= 0.03)")))
}

fn backward_z(field: &GridField, f: &Payoff, sample: &MarginalSample) -> Result<(f64, f64, f64), String> {
    let p = field.sample(0.0, 0.0).map_err(e)?;
    let values: Vec<f64> = sample.x_component(0, 0).iter().map(|&x| f.eval1(x)).collect();
    let mc = MeanEstimate::from_values(&values).map_err(e)?;
    Ok((p, mc.value, mc.z_score(p)))
}

fn c06_backward(sh: &Shared) -> Outcome {
    let f = Payoff::bump(0.3, 0.5);
    let grid = unit_grid();
    let moll = Mollifier::for_step(grid.dt);
    let b_sub = solve_backward_41(0.5, &DriftFn::SinCos { amplitude: 0.5 }, &f, 1.0, &moll, &grid).map_err(e)?;
    let b_vo = solve_backward_42(&BetaFn::default(), &f, 1.0, &moll, &grid).map_err(e)?;
    let (p1, m1, z1) = backward_z(&b_sub, &f, &sh.sub)?;
    let (p2, m2, z2) = backward_z(&b_vo, &f, &sh.vo)?;
    Ok((
        z1.abs() <= 3.0 && z2.abs() <= 3.0,
        format!("subdiffusion pde {p1:.5} mc {m1:.5} (z = {z1:.2}); variable-order pde {p2:.5} mc {m2:.5} (z = {z2:.2})"),
    ))
}

fn c07_law_check() -> Outcome {
    let payoffs = [Payoff::bump(0.0, 0.5), Payoff::bump(0.5, 1.0)];
    let models = [("subdiffusion", sincos_subdiffusion()), ("variable-order", default_variable_order()), ("levy-walk", levy_walk(1))];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, model)) in models.iter().enumerate() {
        for (j, f) in payoffs.iter().enumerate() {
            let seed = SEED + 70 + (2 * i + j) as u64;
            let r = proposition_law_check(model, f, &[0.0], 0.0, 1.0, MC_PATHS, StepControl::default(), seed).map_err(e)?;
            ok &= r.passed(3.0);
            parts.push(format!("{name}/f{j} z = {:.2}", r.z_score));
        }
    }
    Ok((ok, format!("{} (|z| <= 3)", parts.join(", "))))
}

fn c08_coefficients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let scales = [1e2, 1e3, 1e4];
    let mut ok = true;
    let mut failed = Vec::new();
    for (name, model) in [("subdiffusion", sincos_subdiffusion()), ("variable-order", default_variable_order()), ("levy-walk", levy_walk(2))] {
        for _ in 0..5 {
            let x: Vec<f64> = (0..model.dimension()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = rng.random_range(0.0..2.0);
            let report = verify_coefficient_limits(&model, &x, t, &scales).map_err(e)?;
            if !report.passed {
                ok = false;
                let bad: Vec<&str> = report.quantities.iter().filter(|q| !q.passed).map(|q| q.name.as_str()).collect();
                failed.push(format!("{name} at x = {x:?}, t = {t:.3}: {bad:?}"));
            }
        }
    }
    let detail = if ok { "15 points, every gap strictly decreasing over n = 1e2, 1e3, 1e4".to_string() } else { failed.join("; ") };
    Ok((ok, detail))
}

fn c09_prelimit() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, model, seed) in [("subdiffusion", sincos_subdiffusion(), SEED + 9), ("levy-walk", levy_walk(1), SEED + 19)] {
        let r = prelimit_convergence(&model, &[0.0], 0.0, 1.0, &[10.0, 1000.0], MC_PATHS, StepControl::default(), seed).map_err(e)?;
        let floor = r.noise_floor.unwrap_or(0.0);
        let g = &r.quantity("ks_x").ok_or("missing ks_x")?.gaps;
        ok &= g[0] - g[1] > floor;
        parts.push(format!("{name}: KS(n=10) {:.4}, KS(n=1e3) {:.4}, floor {floor:.4}", g[0], g[1]));
    }
    Ok((ok, parts.join("; ")))
}

fn c10_levy_walk() -> Outcome {
    let model = levy_walk(2);
    let s = sample_marginals(&model, &[0.0, 0.0], 0.0, &[1.0], MC_PATHS, StepControl::default(), SEED + 10).map_err(e)?;
    let xn = s.x_distance(0, &[0.0, 0.0]);
    let yn = s.y_distance(0, &[0.0, 0.0]);
    let max_x = xn.iter().cloned().fold(0.0, f64::max);
    let outside = xn.iter().filter(|&&r| r > 1.0).count();
    let hill = hill_tail_index(&yn, default_hill_k(yn.len())).map_err(e)?;
    let differ = (0..s.len()).filter(|&p| s.x(p, 0) != s.y(p, 0)).count() as f64 / s.len() as f64;
    let ok = outside == 0 && s.failures == 0 && (hill.index - 0.5).abs() <= 0.1 && differ > 0.0;
    Ok((
        ok,
        format!(
            "max ||X_1|| {max_x:.6} ({outside} of {} above 1); Hill index of ||Y_1|| {:.3} ± {:.3} (k = {}); X != Y on {:.1}% of paths",
            s.len(),
            hill.index,
            hill.se,
            hill.k,
            100.0 * differ
        ),
    ))
}

fn c11_indistinguishable() -> Outcome {
    let times = [0.25, 0.5, 1.0, 2.0];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, model) in [("subdiffusion", sincos_subdiffusion()), ("variable-order", default_variable_order())] {
        let s = sample_marginals(&model, &[0.0], 0.0, &times, 10_000, StepControl::default(), SEED + 11).map_err(e)?;
        let gap = s.max_xy_gap();
        ok &= gap == 0.0 && s.failures == 0 && s.len() == 10_000;
        parts.push(format!("{name} max|X - Y| = {gap:e}"));
    }
    Ok((ok, format!("{} over 1e4 paths", parts.join(", "))))
}

fn c12_aggregation() -> Outcome {
    let beta_fn = BetaFn::Well { center: 0.0, min: 0.3, max: 0.8, width: 0.7 };
    let model = ModelSpec::variable_order(beta_fn.clone());
    let center = beta_fn.argmin().ok_or("no minimum")?;
    let window = |x: f64| ((x - center).abs() <= 0.5) as u8 as f64;
    let x0 = 1.5;

    let grid = GridParams { half_width: 8.0, dx: 0.05, dt: 0.01, s: 0.0, t_end: 10.0 };
    let field = solve_forward(&model, x0, &grid).map_err(e)?;
    let mass_at = |t: f64| -> Result<f64, String> {
        let m = field.time_index(t).map_err(e)?;
        Ok(field.integrate_row(m, window))
    };
    let (p1, p10) = (mass_at(1.0)?, mass_at(10.0)?);

    let s = sample_marginals(&model, &[x0], 0.0, &[1.0, 10.0], 20_000, StepControl::default(), SEED + 12).map_err(e)?;
    let frac = |k: usize| MeanEstimate::from_values(&s.x_component(k, 0).iter().map(|&x| window(x)).collect::<Vec<_>>());
    let (m1, m10) = (frac(0).map_err(e)?, frac(1).map_err(e)?);
    let z = (m10.value - m1.value) / (m1.se.powi(2) + m10.se.powi(2)).sqrt();
    Ok((
        p10 > p1 && z > 3.0,
        format!("PDE window mass {p1:.4} -> {p10:.4}; MC {:.4} -> {:.4} (increase z = {z:.1})", m1.value, m10.value),
    ))
}

const BASE: &str = r#"
[model]
kind = "subdiffusion"
beta = 0.5
drift = { kind = "sin-cos", amplitude = 0.5 }

[run]
n_paths = 200
times = [0.5, 1.0]
n = 100
scales = [100.0, 1000.0]
points = [[0.3, 0.2]]

[grid]
L = 6.0
dx = 0.1
dt = 0.01
s = 0.0
T = 1.0

[payoff]
kind = "gaussian-bump"
width = 0.5
"#;

fn c13_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let cfg = dir.path().join("base.toml");
    std::fs::write(&cfg, BASE).map_err(e)?;
    let tasks = [
        "simulate-limit",
        "simulate-ctrw",
        "solve-forward",
        "solve-backward",
        "verify-coefficients",
        "law-check",
        "converge",
        "compare",
    ];
    let mut mismatched = Vec::new();
    let mut files = 0;
    for task in tasks {
        let runs: Vec<_> = ["a", "b"].iter().map(|r| dir.path().join(task).join(r)).collect();
        for out in &runs {
            let o = Command::new(env!("CARGO_BIN_EXE_ctrw"))
                .args([task, "--config", cfg.to_str().unwrap(), "--seed", "7", "--quiet", "--out", out.to_str().unwrap()])
                .output()
                .map_err(e)?;
            if o.status.code() != Some(0) {
                return Err(format!("{task} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
            }
        }
        for name in artifacts(&runs[0])? {
            files += 1;
            let a = std::fs::read(runs[0].join(&name)).map_err(e)?;
            let b = std::fs::read(runs[1].join(&name)).map_err(e);
            if b.as_deref() != Ok(a.as_slice()) {
                mismatched.push(format!("{task}/{name}"));
            }
        }
    }
    let ok = mismatched.is_empty();
    let detail = if ok { format!("{} tasks, {files} artifacts byte-identical", tasks.len()) } else { format!("differ: {mismatched:?}") };
    Ok((ok, detail))
}

fn artifacts(dir: &Path) -> Result<Vec<String>, String> {
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).map_err(e)?).map_err(e)?;
    let list = manifest["artifacts"].as_array().ok_or("manifest lacks artifacts")?;
    if list.is_empty() {
        return Err(format!("{} produced no artifacts", dir.display()));
    }
    Ok(list.iter().filter_map(|a| a["path"].as_str().map(str::to_string)).collect())
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |k: usize| only.is_empty() || only.contains(&k);
    let mut shared_cache: Option<Result<Shared, String>> = None;
    let mut failures = 0;
    for k in 1..=13 {
        if !wanted(k) {
            continue;
        }
        let start = Instant::now();
        let outcome = match k {
            1 => c01_pushforward(),
            2 => c02_power_rule(),
            3 => c03_laplace(),
            4 => c04_msd(),
            5 | 6 => match shared_cache.get_or_insert_with(shared) {
                Ok(sh) if k == 5 => c05_forward(sh),
                Ok(sh) => c06_backward(sh),
                Err(msg) => Err(msg.clone()),
            },
            7 => c07_law_check(),
            8 => c08_coefficients(),
            9 => c09_prelimit(),
            10 => c10_levy_walk(),
            11 => c11_indistinguishable(),
            12 => c12_aggregation(),
            _ => c13_determinism(),
        };
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = outcome.unwrap_or_else(|msg| (false, format!("error: {msg}")));
        failures += !pass as usize;
        println!("{} criterion {k:>2}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
