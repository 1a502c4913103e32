//! Radius × resolution × scale-factor × seed experiment grids.
//!
//! The convergence radius only decides when a run is judged converged; it
//! never feeds back into the dynamics. Cells that differ only in radius
//! therefore share one trajectory: a group is stepped once and every radius
//! is scored at the tick where a dedicated run with that radius would have
//! stopped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::engine::{SimState, StepReport};
use crate::error::{Error, Result};
use crate::metrics::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub radii: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::config("radii", "must not be empty"));
        }
        if self.resolutions.is_empty() {
            return Err(Error::config("resolutions", "must not be empty"));
        }
        if self.lambdas.is_empty() {
            return Err(Error::config("lambdas", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must not be empty"));
        }
        if let Some(r) = self.radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::config("radii", format!("{r} is not a positive radius")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::config("lambdas", format!("{l} is not a positive scale factor")));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.radii.len() * self.resolutions.len() * self.lambdas.len() * self.seeds.len()
    }
}

/// Outcome of one (radius, resolution, scale factor, seed) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub r_n_mm: f64,
    pub resolution: usize,
    pub lambda: f64,
    pub seed: u64,
    pub rn_rate: f64,
    pub convergence_ticks: Option<u64>,
    pub converged: bool,
}

/// Scoring of one radius along a shared trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusOutcome {
    pub r_n: f64,
    pub converged_at: Option<u64>,
    /// Rate at the stopping tick (first convergence, else the last tick).
    pub rn_rate: f64,
    /// Rates of every scored radius, in input order, at the same tick.
    pub rates_at_stop: Vec<f64>,
}

/// Step one run and score every radius in `radii` as if each had its own
/// run with `target.r_n` set to it. Stepping ends once all radii have
/// stopped (or at `max_ticks`; when the config does not stop on convergence
/// the run always goes to `max_ticks` and radii are scored there).
pub fn run_radii<F>(cfg: &RunConfig, radii: &[f64], mut observe: F) -> Result<(Vec<RadiusOutcome>, SimState)>
where
    F: FnMut(&SimState, &StepReport) -> Result<()>,
{
    if radii.is_empty() {
        return Err(Error::Argument("no radii to score".into()));
    }
    let mut state = cfg.build_state()?;
    let threshold = cfg.target.threshold;
    let stop = cfg.target.stop_on_convergence;
    let mut out: Vec<Option<RadiusOutcome>> = vec![None; radii.len()];
    let mut first: Vec<Option<u64>> = vec![None; radii.len()];
    loop {
        let rates = radii
            .iter()
            .map(|&r| state.rn_rate(r))
            .collect::<Result<Vec<_>>>()?;
        for (i, &rate) in rates.iter().enumerate() {
            if first[i].is_none() && rate >= threshold {
                first[i] = Some(state.clock);
                if stop {
                    out[i] = Some(RadiusOutcome {
                        r_n: radii[i],
                        converged_at: first[i],
                        rn_rate: rate,
                        rates_at_stop: rates.clone(),
                    });
                }
            }
        }
        if state.clock >= cfg.target.max_ticks || out.iter().all(Option::is_some) {
            for (i, slot) in out.iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = Some(RadiusOutcome {
                        r_n: radii[i],
                        converged_at: first[i],
                        rn_rate: rates[i],
                        rates_at_stop: rates.clone(),
                    });
                }
            }
            return Ok((out.into_iter().flatten().collect(), state));
        }
        let report = state.step()?;
        observe(&state, &report)?;
    }
}

/// A cell that could not be run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub r_n_mm: f64,
    pub resolution: usize,
    pub lambda: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Rows in grid order: radius, then resolution, then scale factor, then seed.
    pub rows: Vec<RunMetrics>,
    pub failures: Vec<CellFailure>,
}

/// Run every cell of `grid` on top of `base`. Failing groups are reported in
/// `failures` and never stop the sweep.
pub fn run_sweep(grid: &SweepGrid, base: &RunConfig) -> Result<SweepResult> {
    grid.validate()?;
    let mut groups = Vec::new();
    for &resolution in &grid.resolutions {
        for &lambda in &grid.lambdas {
            for &seed in &grid.seeds {
                groups.push((resolution, lambda, seed));
            }
        }
    }
    let outcomes: Vec<_> = groups
        .par_iter()
        .map(|&(resolution, lambda, seed)| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.resolution = resolution;
            cfg.target.lambda = lambda;
            run_radii(&cfg, &grid.radii, |_, _| Ok(())).map(|(o, _)| o)
        })
        .collect();

    let mut result = SweepResult::default();
    for (ri, &r_n_mm) in grid.radii.iter().enumerate() {
        for (&(resolution, lambda, seed), outcome) in groups.iter().zip(&outcomes) {
            match outcome {
                Ok(o) => result.rows.push(RunMetrics {
                    r_n_mm,
                    resolution,
                    lambda,
                    seed,
                    rn_rate: o[ri].rn_rate,
                    convergence_ticks: o[ri].converged_at,
                    converged: o[ri].converged_at.is_some(),
                }),
                Err(e) => result.failures.push(CellFailure {
                    r_n_mm,
                    resolution,
                    lambda,
                    seed,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok(result)
}

/// Per-cell statistics over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub r_n_mm: f64,
    pub resolution: usize,
    pub lambda: f64,
    pub runs: usize,
    pub converged: usize,
    pub mean_rn_rate: f64,
    pub std_rn_rate: f64,
    /// Over converged runs only.
    pub mean_convergence_ticks: Option<f64>,
    pub std_convergence_ticks: Option<f64>,
}

impl CellAggregate {
    /// Standard error of the mean rate.
    pub fn sem_rn_rate(&self) -> f64 {
        self.std_rn_rate / (self.runs as f64).sqrt()
    }

    pub fn sem_convergence_ticks(&self) -> Option<f64> {
        self.std_convergence_ticks
            .map(|s| s / (self.converged as f64).sqrt())
    }
}

/// Group rows by (radius, resolution, scale factor), keeping first-seen order.
pub fn aggregate(rows: &[RunMetrics]) -> Vec<CellAggregate> {
    let mut keys: Vec<(f64, usize, f64)> = Vec::new();
    for r in rows {
        let k = (r.r_n_mm, r.resolution, r.lambda);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(r_n_mm, resolution, lambda)| {
            let cell: Vec<&RunMetrics> = rows
                .iter()
                .filter(|r| (r.r_n_mm, r.resolution, r.lambda) == (r_n_mm, resolution, lambda))
                .collect();
            let rates: Vec<f64> = cell.iter().map(|r| r.rn_rate).collect();
            let times: Vec<f64> = cell
                .iter()
                .filter_map(|r| r.convergence_ticks.map(|t| t as f64))
                .collect();
            let (mean_rn_rate, std_rn_rate) = mean_std(&rates).unwrap_or((f64::NAN, f64::NAN));
            let t = mean_std(&times);
            CellAggregate {
                r_n_mm,
                resolution,
                lambda,
                runs: cell.len(),
                converged: times.len(),
                mean_rn_rate,
                std_rn_rate,
                mean_convergence_ticks: t.map(|v| v.0),
                std_convergence_ticks: t.map(|v| v.1),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub lambda: f64,
    pub r_n_mm: f64,
    pub mean_rn_rate: f64,
}

/// Mean rate over the (scale factor, radius) plane, taken at the finest
/// resolution present in `rows`.
pub fn contour(rows: &[RunMetrics]) -> Vec<ContourPoint> {
    let Some(finest) = rows.iter().map(|r| r.resolution).max() else {
        return Vec::new();
    };
    let at: Vec<RunMetrics> = rows.iter().filter(|r| r.resolution == finest).copied().collect();
    let mut pts: Vec<ContourPoint> = aggregate(&at)
        .into_iter()
        .map(|c| ContourPoint {
            lambda: c.lambda,
            r_n_mm: c.r_n_mm,
            mean_rn_rate: c.mean_rn_rate,
        })
        .collect();
    pts.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.r_n_mm.total_cmp(&b.r_n_mm)));
    pts
}
