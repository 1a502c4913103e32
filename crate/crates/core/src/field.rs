//! Per-segment spike trains and the piecewise-continuous pheromone profile
//! built from them, in exact (step) and smooth (logistic) form.
//!
//! A segment's profile is an exponential envelope times its deposits gated by
//! a temporal step; an edge's profile stitches its segments together with
//! spatial step brackets `H(x - x_j) - H(x - x_{j+1})`. The smooth form swaps
//! both steps for logistics with steepness `k_t` and `k_x`, which makes the
//! profile differentiable in `(x, t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, SegmentedGraph};

/// Constants of the pheromone dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PheromoneParams {
    /// Deposit amplitude.
    pub rho_star: f64,
    /// Decay time constant.
    pub delta: f64,
    /// Temporal logistic steepness.
    pub k_t: f64,
    /// Spatial logistic steepness (1/mm).
    pub k_x: f64,
    /// `false`: one shared envelope `exp(-t/delta)` multiplies the deposit
    /// count. `true`: every deposit decays from its own onset,
    /// `exp(-(t - t_i)/delta)`.
    pub per_spike_decay: bool,
    /// Deposits older than `prune_horizon * delta` are left out of every
    /// evaluation. `None` keeps all of them.
    pub prune_horizon: Option<f64>,
}

impl Default for PheromoneParams {
    fn default() -> Self {
        Self {
            rho_star: 1.0,
            delta: 50.0,
            k_t: 50.0,
            k_x: 50.0,
            per_spike_decay: true,
            prune_horizon: Some(20.0),
        }
    }
}

impl PheromoneParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{prefix}.{name}"), format!("must be positive and finite, got {v}")))
            }
        };
        positive("rho_star", self.rho_star)?;
        positive("delta", self.delta)?;
        positive("k_t", self.k_t)?;
        positive("k_x", self.k_x)?;
        if let Some(h) = self.prune_horizon {
            positive("prune_horizon", h)?;
        }
        Ok(())
    }

    /// Age beyond which a deposit no longer takes part in evaluation.
    pub fn prune_age(&self) -> f64 {
        self.prune_horizon.map_or(f64::INFINITY, |h| h * self.delta)
    }

    /// Factor common to every term of the profile at time `t`.
    pub fn envelope(&self, t: f64) -> f64 {
        if self.per_spike_decay {
            self.rho_star
        } else {
            self.rho_star * (-t / self.delta).exp()
        }
    }

    /// Per-deposit weight left after the envelope is factored out.
    fn spike_weight(&self, t: f64, t_i: f64) -> f64 {
        if self.per_spike_decay {
            (-(t - t_i) / self.delta).exp()
        } else {
            1.0
        }
    }
}

/// Temporal step, closed at the left: 1 iff `t >= t0`.
pub fn heaviside_time(t: f64, t0: f64) -> f64 {
    if t >= t0 {
        1.0
    } else {
        0.0
    }
}

/// Spatial step, closed at the left: 1 iff `x >= x0`.
pub fn heaviside_space(x: f64, x0: f64) -> f64 {
    heaviside_time(x, x0)
}

/// Logistic approximation of the step, `1 / (1 + exp(-k (v - v0)))`.
pub fn heaviside_smooth(v: f64, v0: f64, k: f64) -> f64 {
    let z = -k * (v - v0);
    // beyond these the result rounds to exactly 1 or 0
    if z < -40.0 {
        return 1.0;
    }
    if z > 746.0 {
        return 0.0;
    }
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `H(1 - H)`, the logistic's derivative divided by `k`.
pub fn logistic_slope(v: f64, v0: f64, k: f64) -> f64 {
    let h = heaviside_smooth(v, v0, k);
    h * (1.0 - h)
}

/// Deposit times of one segment, ascending.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpikeTrain {
    times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        let mut train = Self::new();
        for t in times {
            train.deposit(t)?;
        }
        Ok(train)
    }

    /// Append a deposit at `t`. Times must not go backwards.
    pub fn deposit(&mut self, t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Contract(format!("deposit time must be finite and >= 0, got {t}")));
        }
        if let Some(&last) = self.times.last() {
            if t < last {
                return Err(Error::Contract(format!(
                    "deposit at {t} precedes the last deposit at {last}"
                )));
            }
        }
        self.times.push(t);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Deposits young enough to be evaluated at `t`.
    pub fn live(&self, t: f64, p: &PheromoneParams) -> &[f64] {
        let cutoff = t - p.prune_age();
        if cutoff.is_finite() {
            let first = self.times.partition_point(|&ti| ti < cutoff);
            &self.times[first..]
        } else {
            &self.times
        }
    }

    /// Envelope-free exact sum: `sum_i w_i H_t(t - t_i)`.
    fn exact_inner(&self, t: f64, p: &PheromoneParams) -> f64 {
        self.live(t, p)
            .iter()
            .take_while(|&&ti| ti <= t)
            .map(|&ti| p.spike_weight(t, ti))
            .sum()
    }

    /// Envelope-free smooth sum and its time derivative.
    fn smooth_inner(&self, t: f64, p: &PheromoneParams) -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for &ti in self.live(t, p) {
            let h = heaviside_smooth(t, ti, p.k_t);
            let w = p.spike_weight(t, ti);
            value += w * h;
            slope += w * p.k_t * h * (1.0 - h);
            if p.per_spike_decay {
                slope -= w * h / p.delta;
            }
        }
        (value, slope)
    }
}

/// Exact profile of one segment at time `t`.
pub fn segment_profile(train: &SpikeTrain, t: f64, p: &PheromoneParams) -> f64 {
    p.envelope(t) * train.exact_inner(t, p)
}

/// Smooth (logistic-gated) profile of one segment at time `t`.
pub fn segment_profile_smooth(train: &SpikeTrain, t: f64, p: &PheromoneParams) -> f64 {
    p.envelope(t) * train.smooth_inner(t, p).0
}

fn check_x(boundaries: &[f64], trains: &[SpikeTrain], x: f64) -> Result<()> {
    if boundaries.len() != trains.len() + 1 || trains.is_empty() {
        return Err(Error::Argument(format!(
            "{} boundaries do not frame {} segments",
            boundaries.len(),
            trains.len()
        )));
    }
    let len = boundaries[boundaries.len() - 1];
    if !(x >= 0.0 && x <= len) {
        return Err(Error::Argument(format!("x = {x} lies outside the edge [0, {len}]")));
    }
    Ok(())
}

/// Exact edge profile: the host segment's profile, where the host of `x` is
/// the segment with `x_j <= x < x_{j+1}`. At the far end `x = length` every
/// bracket vanishes and so does the profile.
pub fn edge_profile_exact(
    boundaries: &[f64],
    trains: &[SpikeTrain],
    x: f64,
    t: f64,
    p: &PheromoneParams,
) -> Result<f64> {
    check_x(boundaries, trains, x)?;
    let host = boundaries.partition_point(|&b| b <= x);
    if host == 0 || host > trains.len() {
        return Ok(0.0);
    }
    Ok(segment_profile(&trains[host - 1], t, p))
}

/// Smooth edge profile split into the common envelope and the remaining sum,
/// `profile = envelope * inner`. Comparisons between locations at one time
/// can use `inner` alone, which stays representable long after the envelope
/// underflows.
pub fn edge_profile_smooth_parts(
    boundaries: &[f64],
    trains: &[SpikeTrain],
    x: f64,
    t: f64,
    p: &PheromoneParams,
) -> Result<(f64, f64)> {
    check_x(boundaries, trains, x)?;
    let mut inner = 0.0;
    for (j, train) in trains.iter().enumerate() {
        if train.is_empty() {
            continue;
        }
        let bracket = heaviside_smooth(x, boundaries[j], p.k_x)
            - heaviside_smooth(x, boundaries[j + 1], p.k_x);
        if bracket == 0.0 {
            continue;
        }
        inner += train.smooth_inner(t, p).0 * bracket;
    }
    Ok((p.envelope(t), inner))
}

pub fn edge_profile_smooth(
    boundaries: &[f64],
    trains: &[SpikeTrain],
    x: f64,
    t: f64,
    p: &PheromoneParams,
) -> Result<f64> {
    let (env, inner) = edge_profile_smooth_parts(boundaries, trains, x, t, p)?;
    Ok(env * inner)
}

/// Analytic `(d/dx, d/dt)` of the smooth edge profile.
pub fn profile_gradient(
    boundaries: &[f64],
    trains: &[SpikeTrain],
    x: f64,
    t: f64,
    p: &PheromoneParams,
) -> Result<(f64, f64)> {
    check_x(boundaries, trains, x)?;
    let env = p.envelope(t);
    let mut dx = 0.0;
    let mut dt = 0.0;
    for (j, train) in trains.iter().enumerate() {
        if train.is_empty() {
            continue;
        }
        let (value, slope) = train.smooth_inner(t, p);
        let bracket = heaviside_smooth(x, boundaries[j], p.k_x)
            - heaviside_smooth(x, boundaries[j + 1], p.k_x);
        let bracket_dx = p.k_x
            * (logistic_slope(x, boundaries[j], p.k_x) - logistic_slope(x, boundaries[j + 1], p.k_x));
        dx += value * bracket_dx;
        let env_dt = if p.per_spike_decay { 0.0 } else { -value / p.delta };
        dt += (slope + env_dt) * bracket;
    }
    Ok((env * dx, env * dt))
}

/// One evaluation of the colony profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub edge_id: usize,
    pub x_mm: f64,
    pub t: f64,
    pub value: f64,
}

/// Evenly spaced sample positions per edge, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub points_per_edge: usize,
}

impl Default for FieldGrid {
    fn default() -> Self {
        Self { points_per_edge: 21 }
    }
}

impl FieldGrid {
    pub fn positions(&self, length: f64) -> Vec<f64> {
        match self.points_per_edge {
            0 => Vec::new(),
            1 => vec![length / 2.0],
            m => (0..m)
                .map(|i| {
                    if i == m - 1 {
                        length
                    } else {
                        length * i as f64 / (m - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

/// Spike trains of every segment of every edge, indexed `[edge][ordinal]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PheromoneField {
    trains: Vec<Vec<SpikeTrain>>,
}

/// Replay record for one segment's deposits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeRecord {
    pub edge: usize,
    pub segment: usize,
    pub times: Vec<f64>,
}

impl PheromoneField {
    /// Empty trains shaped like `graph`'s segmentation.
    pub fn new(graph: &SegmentedGraph) -> Self {
        Self {
            trains: graph
                .edges()
                .iter()
                .map(|e| vec![SpikeTrain::new(); graph.segments(e.id).len()])
                .collect(),
        }
    }

    pub fn edge_trains(&self, edge: EdgeId) -> &[SpikeTrain] {
        &self.trains[edge.0]
    }

    pub fn train(&self, edge: EdgeId, ordinal: usize) -> &SpikeTrain {
        &self.trains[edge.0][ordinal]
    }

    pub fn deposit(&mut self, edge: EdgeId, ordinal: usize, t: f64) -> Result<()> {
        self.trains
            .get_mut(edge.0)
            .and_then(|e| e.get_mut(ordinal))
            .ok_or_else(|| Error::Argument(format!("no segment {ordinal} on edge {}", edge.0)))?
            .deposit(t)
    }

    pub fn total_spikes(&self) -> usize {
        self.trains.iter().flatten().map(SpikeTrain::len).sum()
    }

    pub fn iter_trains(&self) -> impl Iterator<Item = (EdgeId, usize, &SpikeTrain)> {
        self.trains.iter().enumerate().flat_map(|(e, segs)| {
            segs.iter()
                .enumerate()
                .map(move |(j, tr)| (EdgeId(e), j, tr))
        })
    }

    /// Sum of exact segment profiles over the whole graph at `t`.
    pub fn total_mass(&self, t: f64, p: &PheromoneParams) -> f64 {
        self.trains
            .iter()
            .flatten()
            .map(|tr| segment_profile(tr, t, p))
            .sum()
    }

    /// Smooth colony profile at `x` on `edge`. Edges are spatially disjoint,
    /// so only the host edge contributes.
    pub fn colony_profile(
        &self,
        graph: &SegmentedGraph,
        edge: EdgeId,
        x: f64,
        t: f64,
        p: &PheromoneParams,
    ) -> Result<f64> {
        if edge.0 >= graph.edge_count() {
            return Err(Error::Argument(format!("unknown edge {}", edge.0)));
        }
        edge_profile_smooth(&graph.boundaries(edge), self.edge_trains(edge), x, t, p)
    }

    /// Smooth profile sampled on `grid` over all edges, in edge order.
    pub fn sample_grid(
        &self,
        graph: &SegmentedGraph,
        grid: FieldGrid,
        t: f64,
        p: &PheromoneParams,
    ) -> Vec<FieldSample> {
        graph
            .edges()
            .par_iter()
            .map(|e| {
                let b = graph.boundaries(e.id);
                let trains = self.edge_trains(e.id);
                grid.positions(e.length)
                    .into_iter()
                    .map(|x| FieldSample {
                        edge_id: e.id.0,
                        x_mm: x,
                        t,
                        value: edge_profile_smooth(&b, trains, x, t, p)
                            .expect("grid positions lie on the edge"),
                    })
                    .collect::<Vec<_>>()
            })
            .flatten()
            .collect()
    }

    pub fn to_records(&self) -> Vec<SpikeRecord> {
        self.iter_trains()
            .filter(|(_, _, tr)| !tr.is_empty())
            .map(|(e, j, tr)| SpikeRecord {
                edge: e.0,
                segment: j,
                times: tr.times().to_vec(),
            })
            .collect()
    }

    pub fn from_records(graph: &SegmentedGraph, records: &[SpikeRecord]) -> Result<Self> {
        let mut field = Self::new(graph);
        for r in records {
            let slot = field
                .trains
                .get_mut(r.edge)
                .and_then(|e| e.get_mut(r.segment))
                .ok_or_else(|| Error::Argument(format!("no segment {} on edge {}", r.segment, r.edge)))?;
            if !slot.is_empty() {
                return Err(Error::Argument(format!(
                    "duplicate spike record for edge {} segment {}",
                    r.edge, r.segment
                )));
            }
            *slot = SpikeTrain::from_times(r.times.clone())?;
        }
        Ok(field)
    }
}
