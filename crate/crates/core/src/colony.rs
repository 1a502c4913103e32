//! Ants: placement around the initial nest, bounded velocity jitter, the
//! top-k pheromone choice at nodes, and motion along segments.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PheromoneField;
use crate::graph::{NodeId, Point, SegmentRef, SegmentedGraph};
use crate::rng::{substream_seed, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    AtNode(NodeId),
    /// `offset` is measured from the segment's entry boundary in the
    /// direction of travel.
    OnSegment { seg: SegmentRef, offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ant {
    pub id: usize,
    pub locus: Locus,
    /// Unperturbed speed `v0` (mm/tick).
    pub base_velocity: f64,
    pub velocity: f64,
    pub rng_stream: u64,
}

impl Ant {
    pub fn position(&self, graph: &SegmentedGraph) -> Point {
        match self.locus {
            Locus::AtNode(n) => graph.position(n),
            Locus::OnSegment { seg, offset } => {
                graph.point_on_edge(seg.edge, graph.coord_at(seg, offset))
            }
        }
    }

    pub fn node(&self) -> Option<NodeId> {
        match self.locus {
            Locus::AtNode(n) => Some(n),
            Locus::OnSegment { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColonyConfig {
    pub ant_count: usize,
    /// Spawn radius around the initial nest (mm, path distance).
    pub r_i: f64,
    /// Relative velocity jitter bound.
    pub eta: f64,
    /// Base velocity (mm/tick).
    pub v0: f64,
    /// Size of the pool the next segment is drawn from.
    pub top_k: usize,
    /// Reach radius around a node (mm). `None` means 10% of the mean edge length.
    pub reach_radius: Option<f64>,
}

impl Default for ColonyConfig {
    fn default() -> Self {
        Self {
            ant_count: 500,
            r_i: 50.0,
            eta: 0.1,
            v0: 1.0,
            top_k: 3,
            reach_radius: None,
        }
    }
}

impl ColonyConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if self.ant_count == 0 {
            return Err(Error::config(format!("{prefix}.ant_count"), "must be at least 1"));
        }
        if !(self.r_i >= 0.0 && self.r_i.is_finite()) {
            return Err(Error::config(format!("{prefix}.r_i"), "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::config(format!("{prefix}.eta"), "must lie in [0, 1)"));
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return Err(Error::config(format!("{prefix}.v0"), "must be positive"));
        }
        if self.top_k == 0 {
            return Err(Error::config(format!("{prefix}.top_k"), "must be at least 1"));
        }
        if let Some(r) = self.reach_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config(format!("{prefix}.reach_radius"), "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn effective_reach(&self, graph: &SegmentedGraph) -> f64 {
        self.reach_radius
            .unwrap_or_else(|| 0.1 * graph.mean_edge_length())
    }
}

/// Place `cfg.ant_count` ants on distinct free segments whose entry lies
/// within path distance `cfg.r_i` of `nest`, oriented away from it. Ants that
/// find no free segment wait at the nest node. Occupancy is recorded in
/// `graph`.
pub fn spawn_colony(
    cfg: &ColonyConfig,
    graph: &mut SegmentedGraph,
    nest: NodeId,
    root_seed: u64,
    rng: &mut StreamRng,
) -> Result<Vec<Ant>> {
    if !graph.contains_node(nest) {
        return Err(Error::Argument(format!("initial nest {} is not a node", nest.0)));
    }
    let dist = graph.path_distances(nest);
    let mut slots = Vec::new();
    for e in graph.edges() {
        let segs = graph.segments(e.id);
        for (j, s) in segs.iter().enumerate() {
            let via_u = dist[e.u.0] + s.start;
            let via_v = dist[e.v.0] + (e.length - s.end);
            let (entry, forward) = if via_u <= via_v { (via_u, true) } else { (via_v, false) };
            if entry <= cfg.r_i && s.occupant.is_none() {
                slots.push(SegmentRef::new(e.id, j, forward));
            }
        }
    }
    slots.shuffle(rng);

    let mut ants = Vec::with_capacity(cfg.ant_count);
    for id in 0..cfg.ant_count {
        let locus = match slots.get(id) {
            Some(&seg) => {
                graph.set_occupant(seg, Some(id));
                Locus::OnSegment { seg, offset: 0.0 }
            }
            None => Locus::AtNode(nest),
        };
        ants.push(Ant {
            id,
            locus,
            base_velocity: cfg.v0,
            velocity: cfg.v0,
            rng_stream: substream_seed(root_seed, "ant", id as u64),
        });
    }
    Ok(ants)
}

/// Redraw the current velocity as `v0 * (1 + u)`, `u ~ U[-eta, eta]`.
pub fn perturb_velocity(ant: &mut Ant, eta: f64, rng: &mut impl Rng) {
    let u = if eta > 0.0 { rng.gen_range(-eta..=eta) } else { 0.0 };
    ant.velocity = ant.base_velocity * (1.0 + u);
}

/// Rank `candidates` by `value` (descending) and draw uniformly from the best
/// `min(top_k, len)`. Equal values are ordered at random, so a field with no
/// pheromone at all yields a uniform choice over every candidate.
pub fn select_next_segment<F>(
    candidates: &[SegmentRef],
    mut value: F,
    top_k: usize,
    rng: &mut impl Rng,
) -> Option<SegmentRef>
where
    F: FnMut(SegmentRef) -> f64,
{
    if candidates.is_empty() {
        return None;
    }
    let mut scored: Vec<(f64, SegmentRef)> = candidates.iter().map(|&c| (value(c), c)).collect();
    scored.shuffle(rng);
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let pool = top_k.clamp(1, scored.len());
    Some(scored[rng.gen_range(0..pool)].1)
}

/// What happened to one ant during one motion update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Still inside its segment (or at its end, free to continue next tick).
    Moving,
    /// Crossed one or more boundaries; every entry deposited.
    Entered,
    /// Reached the far node of its edge.
    Arrived(NodeId),
    /// Waiting at the boundary because `successor` cannot be entered now.
    Blocked { successor: SegmentRef },
}

/// A deposit made on entering a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepositEvent {
    pub ant: Option<usize>,
    pub seg: SegmentRef,
    pub time: f64,
}

/// A segment can be entered at `time` when it is empty and nobody entered it
/// later than `time` already (keeps spike trains ordered within a tick).
pub fn can_enter(graph: &SegmentedGraph, field: &PheromoneField, seg: SegmentRef, time: f64) -> bool {
    !graph.is_occupied(seg)
        && field
            .train(seg.edge, seg.ordinal)
            .last()
            .is_none_or(|last| last <= time)
}

/// Move an on-segment ant by `velocity * dt` starting at clock `t`.
///
/// Crossing into a free successor deposits on it at the crossing instant and
/// carries the residual distance over. A taken successor stops the ant at the
/// boundary. Leaving the last segment puts the ant on the far node.
pub fn advance_ant(
    ant: &mut Ant,
    graph: &mut SegmentedGraph,
    field: &mut PheromoneField,
    t: f64,
    dt: f64,
    events: &mut Vec<DepositEvent>,
) -> Result<Motion> {
    let Locus::OnSegment { mut seg, mut offset } = ant.locus else {
        return Err(Error::Contract(format!("ant {} is not on a segment", ant.id)));
    };
    let mut remaining = ant.velocity * dt;
    let mut elapsed = 0.0;
    let mut motion = Motion::Moving;
    loop {
        let len = graph.segment(seg.edge, seg.ordinal).length();
        let to_end = len - offset;
        if remaining < to_end {
            offset += remaining;
            break;
        }
        // reaches the boundary within this tick
        elapsed += to_end / ant.velocity;
        remaining -= to_end;
        let crossing = t + elapsed;
        match graph.successor(seg) {
            None => {
                let node = graph.end_node(seg);
                graph.set_occupant(seg, None);
                ant.locus = Locus::AtNode(node);
                return Ok(Motion::Arrived(node));
            }
            Some(next) if can_enter(graph, field, next, crossing) => {
                graph.set_occupant(seg, None);
                graph.set_occupant(next, Some(ant.id));
                field.deposit(next.edge, next.ordinal, crossing)?;
                events.push(DepositEvent {
                    ant: Some(ant.id),
                    seg: next,
                    time: crossing,
                });
                seg = next;
                offset = 0.0;
                motion = Motion::Entered;
            }
            Some(next) => {
                offset = len;
                ant.locus = Locus::OnSegment { seg, offset };
                return Ok(Motion::Blocked { successor: next });
            }
        }
    }
    ant.locus = Locus::OnSegment { seg, offset };
    Ok(motion)
}
