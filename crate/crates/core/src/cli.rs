//! The `run`, `sweep` and `replay` commands, independent of argument parsing.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::RunConfig;
use crate::engine::{run_to_convergence, SimState};
use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::io::{self, CsvSink, RunManifest, RunSummary, SweepManifest};
use crate::metrics::final_distribution_histogram;
use crate::sweep::{aggregate, contour, run_sweep, RunMetrics, SweepGrid};

pub const MANIFEST: &str = "manifest.json";
pub const SNAPSHOT: &str = "snapshot.json";
pub const METRICS: &str = "metrics.csv";
pub const AGGREGATE: &str = "aggregate.csv";
pub const CONTOUR: &str = "contour.csv";
pub const FAILURES: &str = "failures.csv";
pub const HISTOGRAM: &str = "histogram.csv";
pub const FIELD: &str = "field.csv";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const DEPOSITS: &str = "deposits.csv";

/// Comma-separated values.
pub fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::config(what, "must not be empty"));
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::config(what, format!("cannot parse `{}`", s.trim())))
        })
        .collect()
}

/// Comma-separated integers or inclusive ranges `a..b`.
pub fn parse_int_list(text: &str, what: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::config(what, "must not be empty"));
    }
    let bad = |part: &str| Error::config(what, format!("cannot parse `{part}`"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
                let b: u64 = b.trim().parse().map_err(|_| bad(part))?;
                if a > b {
                    return Err(Error::config(what, format!("empty range `{part}`")));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    Ok(out)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Load `path` (or defaults) and apply flag overrides.
pub fn resolve_config(path: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output.dir = o.to_path_buf();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: RunSummary,
    pub graph_hash: String,
    pub dir: PathBuf,
}

impl RunReport {
    pub fn line(&self) -> String {
        format!(
            "converged={} ticks={} rn_rate={} graph={} out={}",
            self.summary.converged,
            self.summary.ticks,
            self.summary.rn_rate,
            self.graph_hash,
            self.dir.display()
        )
    }
}

/// One migration with every per-run artifact written under `cfg.output.dir`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    ensure_dir(&dir)?;
    let mut state = cfg.build_state()?;
    let graph_hash = io::graph_hash(&state.graph.to_snapshot());

    let mut trajectory = CsvSink::create(&dir.join(TRAJECTORY), io::TRAJECTORY_HEADER)?;
    let mut deposits = CsvSink::create(&dir.join(DEPOSITS), io::DEPOSIT_HEADER)?;
    let every = cfg.output.trajectory_every;
    if every > 0 {
        for a in &state.ants {
            trajectory.row(io::trajectory_row(state.clock, a))?;
        }
    }
    let outcome = run_to_convergence(&mut state, |s, report| {
        for d in &report.deposits {
            deposits.row(io::deposit_row(report.tick, d))?;
        }
        if every > 0 && s.clock % every == 0 {
            for a in &s.ants {
                trajectory.row(io::trajectory_row(s.clock, a))?;
            }
        }
        Ok(())
    })?;
    trajectory.finish()?;
    deposits.finish()?;

    let summary = RunSummary::from(&outcome);
    let row = RunMetrics {
        r_n_mm: cfg.target.r_n,
        resolution: cfg.resolution,
        lambda: cfg.target.lambda,
        seed: cfg.seed,
        rn_rate: outcome.rn_rate,
        convergence_ticks: outcome.converged_at,
        converged: outcome.converged_at.is_some(),
    };
    io::write_metrics(&dir.join(METRICS), &[row])?;
    let bins = final_distribution_histogram(&state.ants, &state.graph, state.target.node, cfg.output.histogram_bin_mm)?;
    io::write_histogram(&dir.join(HISTOGRAM), &bins)?;
    let grid = FieldGrid {
        points_per_edge: cfg.output.field_points_per_edge,
    };
    let samples = state.field.sample_grid(&state.graph, grid, state.time(), state.params());
    io::write_field(&dir.join(FIELD), &samples)?;
    io::write_json(&dir.join(SNAPSHOT), &state.to_snapshot())?;

    let manifest = RunManifest {
        seed: cfg.seed,
        graph_hash: graph_hash.clone(),
        config: cfg.clone(),
        outcome: summary.clone(),
        artifacts: [TRAJECTORY, DEPOSITS, METRICS, HISTOGRAM, FIELD, SNAPSHOT]
            .map(String::from)
            .to_vec(),
    };
    io::write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(RunReport {
        summary,
        graph_hash,
        dir,
    })
}

/// Grid axes default to the single value held by the config.
pub fn default_grid(cfg: &RunConfig) -> SweepGrid {
    SweepGrid {
        radii: vec![cfg.target.r_n],
        resolutions: vec![cfg.resolution],
        lambdas: vec![cfg.target.lambda],
        seeds: vec![cfg.seed],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: usize,
    pub converged: usize,
    pub failures: usize,
    pub dir: PathBuf,
}

impl SweepReport {
    pub fn line(&self) -> String {
        format!(
            "rows={} converged={} failures={} out={}",
            self.rows,
            self.converged,
            self.failures,
            self.dir.display()
        )
    }
}

pub fn cmd_sweep(cfg: &RunConfig, grid: &SweepGrid) -> Result<SweepReport> {
    cfg.validate()?;
    grid.validate()?;
    let dir = cfg.output.dir.clone();
    ensure_dir(&dir)?;
    let result = run_sweep(grid, cfg)?;
    io::write_metrics(&dir.join(METRICS), &result.rows)?;
    io::write_aggregate(&dir.join(AGGREGATE), &aggregate(&result.rows))?;
    io::write_contour(&dir.join(CONTOUR), &contour(&result.rows))?;
    io::write_failures(&dir.join(FAILURES), &result.failures)?;
    let manifest = SweepManifest {
        config: cfg.clone(),
        grid: grid.clone(),
        rows: result.rows.len(),
        failures: result.failures.len(),
        artifacts: [METRICS, AGGREGATE, CONTOUR, FAILURES].map(String::from).to_vec(),
    };
    io::write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(SweepReport {
        rows: result.rows.len(),
        converged: result.rows.iter().filter(|r| r.converged).count(),
        failures: result.failures.len(),
        dir,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub from_tick: u64,
    pub to_tick: u64,
    pub rn_rate: f64,
    pub path: PathBuf,
}

impl ReplayReport {
    pub fn line(&self) -> String {
        format!(
            "replayed ticks {}..{} rn_rate={} out={}",
            self.from_tick,
            self.to_tick,
            self.rn_rate,
            self.path.display()
        )
    }
}

/// Resume `snapshot` for `ticks` steps and write the resulting snapshot to
/// `out/snapshot.json`.
pub fn cmd_replay(snapshot: &Path, ticks: u64, out: &Path) -> Result<ReplayReport> {
    let snap = io::read_snapshot(snapshot)?;
    let mut state = SimState::from_snapshot(&snap)?;
    let from_tick = state.clock;
    for _ in 0..ticks {
        state.step()?;
    }
    ensure_dir(out)?;
    let path = out.join(SNAPSHOT);
    io::write_json(&path, &state.to_snapshot())?;
    Ok(ReplayReport {
        from_tick,
        to_tick: state.clock,
        rn_rate: state.rn_rate(state.config.target.r_n)?,
        path,
    })
}
