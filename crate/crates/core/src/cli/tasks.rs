use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::config::{ExperimentConfig, Task};
use crate::error::{domain, Result};
use crate::harness::{
    empirical_cdf, ks_against, ks_noise_floor, prelimit_convergence, proposition_law_check, simulate_prelimit, PrelimitSample,
    DEFAULT_RENEWAL_BUDGET,
};
use crate::kernels::verify_coefficient_limits;
use crate::report::ConvergenceReport;
use crate::sde_process::sample_marginals;
use crate::solvers::{solve_backward, solve_forward, GridField};

/// Files and numbers produced by one task, before anything touches the disk.
#[derive(Default)]
pub(crate) struct Outcome {
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub metrics: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
}

impl Outcome {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.artifacts.push((name.to_string(), bytes));
    }

    fn json<T: Serialize>(&mut self, cfg: &ExperimentConfig, name: &str, value: &T) -> Result<()> {
        if cfg.output.wants("json") {
            let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| domain(e.to_string()))?;
            bytes.push(b'\n');
            self.file(name, bytes);
        }
        Ok(())
    }

    fn csv<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(&mut self, cfg: &ExperimentConfig, name: &str, write: F) -> Result<()> {
        if cfg.output.wants("csv") {
            let mut bytes = Vec::new();
            write(&mut bytes)?;
            self.file(name, bytes);
        }
        Ok(())
    }
}

pub(crate) fn dispatch(cfg: &ExperimentConfig, task: Task) -> Result<Outcome> {
    match task {
        Task::SimulateLimit => simulate_limit(cfg),
        Task::SimulateCtrw => simulate_ctrw(cfg),
        Task::SolveForward => forward(cfg),
        Task::SolveBackward => backward(cfg),
        Task::VerifyCoefficients => verify(cfg),
        Task::LawCheck => law_check(cfg),
        Task::Converge => converge(cfg),
        Task::Compare => compare(cfg),
    }
}

fn one_dimensional(cfg: &ExperimentConfig, task: Task) -> Result<f64> {
    if cfg.model.dimension() != 1 {
        return Err(crate::Error::Unsupported(format!("{} needs a one-dimensional model", task.name())));
    }
    Ok(cfg.run.x0[0])
}

fn simulate_limit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let run = &cfg.run;
    let times = run.sample_times();
    let sample = sample_marginals(&cfg.model, &run.x0, run.t0, &times, run.n_paths, run.control(), run.seed)?;
    let mut out = Outcome::default();
    out.csv(cfg, "marginals.csv", |w| sample.write_csv(w))?;
    out.metrics.insert("paths".into(), sample.len() as f64);
    out.metrics.insert("failures".into(), sample.failures as f64);
    out.metrics.insert("max_xy_gap".into(), sample.max_xy_gap());
    if !sample.is_empty() {
        let last = times.len() - 1;
        let d = sample.x_distance(last, &run.x0);
        out.metrics.insert("msd_at_last_time".into(), d.iter().map(|r| r * r).sum::<f64>() / d.len() as f64);
    }
    Ok(out)
}

fn write_prelimit<W: Write>(w: &mut W, samples: &[PrelimitSample]) -> std::io::Result<()> {
    let dim = samples.first().map_or(1, |s| s.dimension);
    let mut header = String::from("path_id,time");
    if dim == 1 {
        header.push_str(",x,y");
    } else {
        (1..=dim).for_each(|i| header.push_str(&format!(",x{i}")));
        (1..=dim).for_each(|i| header.push_str(&format!(",y{i}")));
    }
    writeln!(w, "{header}")?;
    let n_paths = samples.first().map_or(0, |s| s.n_paths());
    for p in 0..n_paths {
        for s in samples {
            write!(w, "{p},{}", s.time)?;
            for v in s.x_values[p * dim..(p + 1) * dim].iter().chain(&s.y_values[p * dim..(p + 1) * dim]) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

fn simulate_ctrw(cfg: &ExperimentConfig) -> Result<Outcome> {
    let run = &cfg.run;
    // Each path draws the same renewal sequence at every time, so rows for one path_id are one trajectory.
    let samples = run
        .sample_times()
        .iter()
        .map(|&t| simulate_prelimit(&cfg.model, &run.x0, run.t0, t, run.n, run.n_paths, run.seed, DEFAULT_RENEWAL_BUDGET))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    out.csv(cfg, "ctrw.csv", |w| write_prelimit(w, &samples))?;
    let last = samples.last().expect("at least one time");
    out.metrics.insert("scale_n".into(), run.n);
    out.metrics.insert("mean_renewals_at_last_time".into(), last.mean_renewals);
    out.metrics.insert("differing_fraction_at_last_time".into(), last.differing_fraction());
    Ok(out)
}

fn field_artifacts(cfg: &ExperimentConfig, out: &mut Outcome, field: &GridField) -> Result<()> {
    out.csv(cfg, "field.csv", |w| field.write_csv(w))?;
    if cfg.output.wants("json") {
        let mut bytes = field.metadata_json().map_err(|e| domain(e.to_string()))?.into_bytes();
        bytes.push(b'\n');
        out.file("field.json", bytes);
    }
    Ok(())
}

fn forward(cfg: &ExperimentConfig) -> Result<Outcome> {
    let x0 = one_dimensional(cfg, Task::SolveForward)?;
    let field = solve_forward(&cfg.model, x0, &cfg.grid)?;
    let mut out = Outcome::default();
    field_artifacts(cfg, &mut out, &field)?;
    let last = field.nt() - 1;
    out.metrics.insert("final_mass".into(), field.mass[last]);
    out.metrics.insert("min_mass".into(), field.mass.iter().cloned().fold(f64::INFINITY, f64::min));
    out.metrics.insert("final_second_moment".into(), field.integrate_row(last, |x| (x - x0).powi(2)));
    Ok(out)
}

fn backward(cfg: &ExperimentConfig) -> Result<Outcome> {
    let x0 = one_dimensional(cfg, Task::SolveBackward)?;
    let field = solve_backward(&cfg.model, &cfg.payoff, cfg.grid.t_end, &cfg.mollifier(), &cfg.grid)?;
    let mut out = Outcome::default();
    field_artifacts(cfg, &mut out, &field)?;
    out.metrics.insert("value_at_x0_s".into(), field.sample(x0, cfg.grid.s)?);
    Ok(out)
}

#[derive(Serialize)]
struct PointReport {
    x: Vec<f64>,
    t: f64,
    report: ConvergenceReport,
}

fn verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let reports = cfg
        .run
        .verify_points()
        .into_iter()
        .map(|(x, t)| Ok(PointReport { report: verify_coefficient_limits(&cfg.model, &x, t, &cfg.run.scales)?, x, t }))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    out.json(cfg, "coefficients.json", &reports)?;
    let passed = reports.iter().filter(|r| r.report.passed).count();
    out.metrics.insert("points".into(), reports.len() as f64);
    out.metrics.insert("points_passed".into(), passed as f64);
    out.verdicts.insert("coefficients_converge".into(), passed == reports.len());
    Ok(out)
}

fn law_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let run = &cfg.run;
    let check =
        proposition_law_check(&cfg.model, &cfg.payoff, &run.x0, run.t0, run.horizon, run.n_paths, run.control(), run.seed)?;
    let mut out = Outcome::default();
    out.json(cfg, "lawcheck.json", &check)?;
    out.metrics.insert("mc_lhs".into(), check.mc_lhs.value);
    out.metrics.insert("formula_rhs".into(), check.formula_rhs.value);
    out.metrics.insert("z_score".into(), check.z_score);
    out.verdicts.insert("law_check".into(), check.passed(run.z_threshold));
    Ok(out)
}

fn converge(cfg: &ExperimentConfig) -> Result<Outcome> {
    let run = &cfg.run;
    let report =
        prelimit_convergence(&cfg.model, &run.x0, run.t0, run.horizon, &run.scales, run.n_paths, run.control(), run.seed)?;
    let mut out = Outcome::default();
    out.json(cfg, "convergence.json", &report)?;
    for q in &report.quantities {
        for (n, g) in report.scales.iter().zip(&q.gaps) {
            out.metrics.insert(format!("{}[n={n}]", q.name), *g);
        }
    }
    out.metrics.insert("noise_floor".into(), report.noise_floor.unwrap_or(0.0));
    out.verdicts.insert("converge".into(), report.passed);
    Ok(out)
}

fn compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    let x0 = one_dimensional(cfg, Task::Compare)?;
    let run = &cfg.run;
    let grid = &cfg.grid;
    let field = solve_forward(&cfg.model, x0, grid)?;
    let mc = sample_marginals(&cfg.model, &run.x0, grid.s, &[grid.t_end], run.n_paths, run.control(), run.seed)?;
    let ecdf = empirical_cdf(&mc.x_component(0, 0))?;
    let last = field.nt() - 1;
    let pde = field.cdf_fn(last);
    let ks = ks_against(&ecdf, &pde);
    let mut out = Outcome::default();
    out.csv(cfg, "cdf.csv", |w| {
        writeln!(w, "x,pde_cdf,mc_cdf")?;
        for (x, p) in field.cdf_edges(last).0.iter().map(|x| (*x, pde(*x))) {
            writeln!(w, "{x},{p},{}", ecdf.eval(x))?;
        }
        Ok(())
    })?;
    out.metrics.insert("ks".into(), ks);
    out.metrics.insert("ks_threshold".into(), run.ks_threshold);
    out.metrics.insert("ks_noise_floor".into(), ks_noise_floor(ecdf.len()));
    out.metrics.insert("mc_failures".into(), mc.failures as f64);
    out.metrics.insert("pde_final_mass".into(), field.mass[last]);
    out.verdicts.insert("ks_within_threshold".into(), ks <= run.ks_threshold);
    Ok(out)
}
