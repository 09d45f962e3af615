use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::MeanEstimate;
use crate::error::{domain, Error, Result};
use crate::kernels::ModelSpec;
use crate::sde_process::{path_rng, Entry, SpaceTimePath, StepControl, Walker};

/// Rectangular cells over (y, v): y is the first spatial coordinate, v the physical time D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationGrid {
    pub y_edges: Vec<f64>,
    pub v_edges: Vec<f64>,
}

impl OccupationGrid {
    pub fn uniform(y: (f64, f64), ny: usize, v: (f64, f64), nv: usize) -> Result<Self> {
        if ny == 0 || nv == 0 || !(y.1 > y.0) || !(v.1 > v.0) {
            return Err(Error::Grid("occupation grid needs positive cell counts and increasing bounds".into()));
        }
        let edges = |lo: f64, hi: f64, n: usize| (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        Ok(Self { y_edges: edges(y.0, y.1, ny), v_edges: edges(v.0, v.1, nv) })
    }

    fn check(&self) -> Result<()> {
        let ok = |e: &[f64]| e.len() >= 2 && e.windows(2).all(|w| w[1] > w[0]) && e.iter().all(|v| v.is_finite());
        if ok(&self.y_edges) && ok(&self.v_edges) {
            Ok(())
        } else {
            Err(Error::Grid("occupation edges must be finite and strictly increasing".into()))
        }
    }

    fn ny(&self) -> usize {
        self.y_edges.len() - 1
    }

    fn nv(&self) -> usize {
        self.v_edges.len() - 1
    }

    fn v_max(&self) -> f64 {
        *self.v_edges.last().unwrap()
    }

    fn bin(edges: &[f64], x: f64) -> Option<usize> {
        if x < edges[0] || x >= edges[edges.len() - 1] {
            return None;
        }
        Some(edges.partition_point(|e| *e <= x) - 1)
    }

    /// Cell index for a state, None when v is outside the grid; an error when v is inside but y is not.
    fn cell(&self, y: f64, v: f64) -> Result<Option<usize>> {
        let Some(iv) = Self::bin(&self.v_edges, v) else { return Ok(None) };
        match Self::bin(&self.y_edges, y) {
            Some(iy) => Ok(Some(iy * self.nv() + iv)),
            None => Err(Error::Grid(format!("state y = {y} at v = {v} lies outside the occupation grid"))),
        }
    }
}

/// Monte Carlo estimate of U(x, s; dy, dv) = E ∫ 1{A_r ∈ dy, D_r ∈ dv} dr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub grid: OccupationGrid,
    /// Expected operational time per cell, indexed [iy * nv + iv].
    pub mass: Vec<f64>,
    pub n_paths: usize,
    /// Total mass over the grid, with its standard error across paths.
    pub total: MeanEstimate,
    /// Every path left the grid's time window, so the reported mass is complete.
    pub transient: bool,
}

impl OccupationEstimate {
    pub fn cell(&self, iy: usize, iv: usize) -> f64 {
        self.mass[iy * self.grid.nv() + iv]
    }

    /// Mass per time cell, summed over y.
    pub fn marginal_v(&self) -> Vec<f64> {
        let nv = self.grid.nv();
        (0..nv).map(|iv| (0..self.grid.ny()).map(|iy| self.mass[iy * nv + iv]).sum()).collect()
    }

    /// Mass per space cell, summed over v.
    pub fn marginal_y(&self) -> Vec<f64> {
        self.mass.chunks(self.grid.nv()).map(|row| row.iter().sum()).collect()
    }
}

/// Per-path accumulation: each entry is weighted by the operational time until the next one.
struct Accumulator<'g> {
    grid: &'g OccupationGrid,
    mass: Vec<f64>,
    prev: Option<Entry>,
    error: Option<Error>,
}

impl<'g> Accumulator<'g> {
    fn new(grid: &'g OccupationGrid) -> Self {
        Self { grid, mass: vec![0.0; grid.ny() * grid.nv()], prev: None, error: None }
    }

    fn push(&mut self, e: &Entry) {
        if let Some(p) = self.prev {
            let weight = e.r - p.r;
            if weight > 0.0 {
                match self.grid.cell(p.a[0], p.d) {
                    Ok(Some(c)) => self.mass[c] += weight,
                    Ok(None) => {}
                    Err(err) => {
                        self.error.get_or_insert(err);
                    }
                }
            }
        }
        self.prev = Some(*e);
    }

    fn finish(self) -> Result<Vec<f64>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.mass),
        }
    }
}

fn combine(grid: &OccupationGrid, per_path: Vec<Vec<f64>>, transient: bool) -> Result<OccupationEstimate> {
    let n = per_path.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut mass = vec![0.0; grid.ny() * grid.nv()];
    let mut totals = Vec::with_capacity(n);
    for m in &per_path {
        for (acc, v) in mass.iter_mut().zip(m) {
            *acc += v;
        }
        totals.push(m.iter().sum());
    }
    for v in mass.iter_mut() {
        *v /= n as f64;
    }
    Ok(OccupationEstimate { grid: grid.clone(), mass, n_paths: n, total: MeanEstimate::from_values(&totals)?, transient })
}

/// Occupation measure of stored paths sharing a start point.
pub fn occupation_measure(paths: &[SpaceTimePath], grid: &OccupationGrid) -> Result<OccupationEstimate> {
    grid.check()?;
    if let Some(first) = paths.first() {
        let start = (first.a(0).to_vec(), first.d(0));
        if paths.iter().any(|p| p.is_empty() || (p.a(0).to_vec(), p.d(0)) != start) {
            return Err(domain("paths must share their start point"));
        }
    }
    let mut transient = true;
    let mut per_path = Vec::with_capacity(paths.len());
    for p in paths {
        let mut acc = Accumulator::new(grid);
        for k in 0..p.len() {
            let mut a = [0.0; 3];
            a[..p.dimension].copy_from_slice(p.a(k));
            acc.push(&Entry { r: p.times[k], a, d: p.d(k), jump: p.jump_flags[k] });
        }
        transient &= p.d(p.len() - 1) >= grid.v_max();
        per_path.push(acc.finish()?);
    }
    combine(grid, per_path, transient)
}

/// Occupation measure from freshly simulated paths, streamed without storing them.
pub fn simulate_occupation(
    model: &ModelSpec,
    x0: &[f64],
    t0: f64,
    grid: &OccupationGrid,
    n_paths: usize,
    control: StepControl,
    seed: u64,
) -> Result<OccupationEstimate> {
    grid.check()?;
    Walker::new(model, x0, t0, control)?;
    let v_max = grid.v_max();
    let per_path: Vec<Result<Vec<f64>>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(seed, id);
            let mut walker = Walker::new(model, x0, t0, control)?;
            let mut acc = Accumulator::new(grid);
            acc.push(&walker.entry());
            while walker.time() < v_max {
                walker.advance(v_max, &mut rng, |e| acc.push(e))?;
            }
            acc.finish()
        })
        .collect();
    combine(grid, per_path.into_iter().collect::<Result<_>>()?, true)
}
