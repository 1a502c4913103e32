//! Tick-by-tick migration procedure.
//!
//! One tick runs, in order: velocity jitter for every ant, a segment choice
//! for every ant standing on a node, motion of every ant that started the
//! tick on a segment, the target-site source, and the clock increment.
//! Evaporation needs no step of its own; it lives in profile evaluation.

use serde::{Deserialize, Serialize};

use crate::colony::{
    advance_ant, can_enter, perturb_velocity, select_next_segment, spawn_colony, Ant, ColonyConfig,
    DepositEvent, Locus, Motion,
};
use crate::error::{Error, Result};
use crate::field::{
    edge_profile_smooth_parts, segment_profile, PheromoneField, PheromoneParams, SpikeRecord,
};
use crate::graph::{EdgeId, GraphSnapshot, NodeId, SegmentRef, SegmentedGraph};
use crate::metrics::rn_convergence_rate;
use crate::rng::{ant_tick_rng, substream};

/// Desired steady-state profile around the target node,
/// `rho_star * exp(-lambda * d)` with `d` the planar distance to the node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTarget {
    pub node: NodeId,
    /// Scale factor (1/mm).
    pub lambda: f64,
}

impl ConvergenceTarget {
    /// Offset eliminated by pinning the profile to `rho_star` at the target:
    /// with distances measured from the target, `sigma = -ln(rho_star)`.
    pub fn sigma(&self, rho_star: f64) -> f64 {
        -rho_star.ln()
    }
}

pub fn radial_target(d: f64, target: &ConvergenceTarget, rho_star: f64) -> f64 {
    rho_star * (-target.lambda * d).exp()
}

/// Target-site behaviour and stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    /// Scale factor of the radial target profile (1/mm).
    pub lambda: f64,
    /// Fraction of ants that must lie within `r_n` to call the run converged.
    pub threshold: f64,
    /// Convergence radius (mm).
    pub r_n: f64,
    pub max_ticks: u64,
    /// Renew pheromone near the target whenever it drops below the radial
    /// target profile.
    pub source: bool,
    /// Ants that reach the target node stay there.
    pub settle: bool,
    /// `false` keeps stepping until `max_ticks` after the first convergence,
    /// so the rate at a fixed horizon can be compared across runs.
    pub stop_on_convergence: bool,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            threshold: 0.9,
            r_n: 40.0,
            max_ticks: 200_000,
            source: true,
            settle: true,
            stop_on_convergence: true,
        }
    }
}

impl TargetConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("{prefix}.lambda"), "must be positive"));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::config(format!("{prefix}.threshold"), "must lie in (0, 1]"));
        }
        if !(self.r_n > 0.0 && self.r_n.is_finite()) {
            return Err(Error::config(format!("{prefix}.r_n"), "must be positive"));
        }
        Ok(())
    }
}

/// Everything that defines the dynamics of one run once the graph exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub pheromone: PheromoneParams,
    pub colony: ColonyConfig,
    pub target: TargetConfig,
}

/// Segment kept topped up by the target source.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SourceAnchor {
    edge: EdgeId,
    ordinal: usize,
    floor: f64,
}

/// Full simulation state. Generators are derived from the seed and the
/// clock, so this is everything needed to continue a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub graph: SegmentedGraph,
    pub field: PheromoneField,
    pub ants: Vec<Ant>,
    pub clock: u64,
    pub config: SimConfig,
    pub initial_nest: NodeId,
    pub target: ConvergenceTarget,
    reach: f64,
    anchors: Vec<SourceAnchor>,
}

/// Deposits made during one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub tick: u64,
    pub deposits: Vec<DepositEvent>,
}

impl SimState {
    /// Fresh state: `graph` is segmented already; nest and target are its
    /// two farthest nodes.
    pub fn new(graph: SegmentedGraph, config: SimConfig) -> Result<Self> {
        let (initial_nest, target_node) = graph.farthest_pair();
        Self::with_nodes(graph, config, initial_nest, target_node)
    }

    pub fn with_nodes(
        mut graph: SegmentedGraph,
        config: SimConfig,
        initial_nest: NodeId,
        target_node: NodeId,
    ) -> Result<Self> {
        config.pheromone.validate("pheromone")?;
        config.colony.validate("colony")?;
        config.target.validate("target")?;
        if !graph.contains_node(target_node) {
            return Err(Error::Argument(format!("target {} is not a node", target_node.0)));
        }
        graph.clear_occupancy();
        let field = PheromoneField::new(&graph);
        let ants = spawn_colony(
            &config.colony,
            &mut graph,
            initial_nest,
            config.seed,
            &mut substream(config.seed, "spawn", 0),
        )?;
        let target = ConvergenceTarget {
            node: target_node,
            lambda: config.target.lambda,
        };
        let mut state = Self {
            reach: config.colony.effective_reach(&graph),
            anchors: Vec::new(),
            graph,
            field,
            ants,
            clock: 0,
            config,
            initial_nest,
            target,
        };
        state.anchors = state.source_anchors();
        Ok(state)
    }

    /// Segments whose midpoint lies within the nest radius of the target.
    fn source_anchors(&self) -> Vec<SourceAnchor> {
        let centre = self.graph.position(self.target.node);
        let radius = self.config.colony.r_i;
        let rho = self.config.pheromone.rho_star;
        let mut out = Vec::new();
        for e in self.graph.edges() {
            for (j, s) in self.graph.segments(e.id).iter().enumerate() {
                let mid = self.graph.point_on_edge(e.id, 0.5 * (s.start + s.end));
                let d = mid.distance(centre);
                if d <= radius {
                    out.push(SourceAnchor {
                        edge: e.id,
                        ordinal: j,
                        floor: radial_target(d, &self.target, rho),
                    });
                }
            }
        }
        out
    }

    pub fn reach_radius(&self) -> f64 {
        self.reach
    }

    pub fn time(&self) -> f64 {
        self.clock as f64
    }

    pub fn params(&self) -> &PheromoneParams {
        &self.config.pheromone
    }

    fn settled(&self, node: NodeId) -> bool {
        self.config.target.settle && node == self.target.node
    }

    /// Envelope-free smooth profile at the entry of `seg` at time `t`; ranks
    /// candidates exactly like the full profile does.
    fn entry_strength(&self, seg: SegmentRef, t: f64) -> f64 {
        let b = self.graph.boundaries(seg.edge);
        let x = self.graph.entry_coord(seg);
        edge_profile_smooth_parts(&b, self.field.edge_trains(seg.edge), x, t, &self.config.pheromone)
            .map(|(_, inner)| inner)
            .unwrap_or(0.0)
    }

    /// Advance one tick.
    pub fn step(&mut self) -> Result<StepReport> {
        let tick = self.clock;
        let t = self.time();
        let eta = self.config.colony.eta;
        let top_k = self.config.colony.top_k;
        let mut report = StepReport {
            tick,
            deposits: Vec::new(),
        };

        let mut rngs: Vec<_> = self
            .ants
            .iter()
            .map(|a| ant_tick_rng(a.rng_stream, tick))
            .collect();
        for (ant, rng) in self.ants.iter_mut().zip(rngs.iter_mut()) {
            perturb_velocity(ant, eta, rng);
        }

        // ants on segments at the start of the tick are the ones that move
        let movers: Vec<usize> = self
            .ants
            .iter()
            .filter(|a| matches!(a.locus, Locus::OnSegment { .. }))
            .map(|a| a.id)
            .collect();

        for id in 0..self.ants.len() {
            let Locus::AtNode(node) = self.ants[id].locus else {
                continue;
            };
            if self.settled(node) {
                continue;
            }
            let candidates: Vec<SegmentRef> = self
                .graph
                .reachable_segments(node, self.reach)?
                .into_iter()
                .filter(|&s| can_enter(&self.graph, &self.field, s, t))
                .collect();
            let choice =
                select_next_segment(&candidates, |s| self.entry_strength(s, t), top_k, &mut rngs[id]);
            if let Some(seg) = choice {
                self.graph.set_occupant(seg, Some(id));
                self.field.deposit(seg.edge, seg.ordinal, t)?;
                self.ants[id].locus = Locus::OnSegment { seg, offset: 0.0 };
                report.deposits.push(DepositEvent {
                    ant: Some(id),
                    seg,
                    time: t,
                });
            }
        }

        let mut moved = vec![false; self.ants.len()];
        for id in movers {
            if moved[id] {
                continue;
            }
            moved[id] = true;
            let motion = advance_ant(
                &mut self.ants[id],
                &mut self.graph,
                &mut self.field,
                t,
                1.0,
                &mut report.deposits,
            )?;
            if let Motion::Blocked { successor } = motion {
                if let Some(other) = self.graph.occupant(successor) {
                    if !moved[other] && self.try_pass(id, other, t, &mut report.deposits)? {
                        moved[other] = true;
                    }
                }
            }
        }

        if self.config.target.source {
            let t_end = t + 1.0;
            for a in &self.anchors {
                let train = self.field.train(a.edge, a.ordinal);
                if segment_profile(train, t_end, &self.config.pheromone) < a.floor {
                    self.field.deposit(a.edge, a.ordinal, t_end)?;
                    report.deposits.push(DepositEvent {
                        ant: None,
                        seg: SegmentRef::new(a.edge, a.ordinal, true),
                        time: t_end,
                    });
                }
            }
        }

        self.clock += 1;
        Ok(report)
    }

    /// Two ants facing each other across one boundary, both waiting at it,
    /// exchange segments. Returns whether the exchange happened.
    fn try_pass(
        &mut self,
        a: usize,
        b: usize,
        t: f64,
        events: &mut Vec<DepositEvent>,
    ) -> Result<bool> {
        let (Locus::OnSegment { seg: sa, offset: oa }, Locus::OnSegment { seg: sb, offset: ob }) =
            (self.ants[a].locus, self.ants[b].locus)
        else {
            return Ok(false);
        };
        let len_a = self.graph.segment(sa.edge, sa.ordinal).length();
        let len_b = self.graph.segment(sb.edge, sb.ordinal).length();
        let facing = sa.forward != sb.forward
            && self.graph.successor(sb).map(|s| s.ordinal) == Some(sa.ordinal)
            && self.graph.successor(sa).map(|s| s.ordinal) == Some(sb.ordinal);
        if !facing || oa < len_a || ob < len_b {
            return Ok(false);
        }
        let last = |s: SegmentRef| self.field.train(s.edge, s.ordinal).last().unwrap_or(0.0);
        if last(sa) > t || last(sb) > t {
            return Ok(false);
        }
        let na = SegmentRef::new(sb.edge, sb.ordinal, sa.forward);
        let nb = SegmentRef::new(sa.edge, sa.ordinal, sb.forward);
        self.graph.set_occupant(na, Some(a));
        self.graph.set_occupant(nb, Some(b));
        self.ants[a].locus = Locus::OnSegment { seg: na, offset: 0.0 };
        self.ants[b].locus = Locus::OnSegment { seg: nb, offset: 0.0 };
        for (ant, seg) in [(a, na), (b, nb)] {
            self.field.deposit(seg.edge, seg.ordinal, t)?;
            events.push(DepositEvent {
                ant: Some(ant),
                seg,
                time: t,
            });
        }
        Ok(true)
    }

    pub fn rn_rate(&self, r_n: f64) -> Result<f64> {
        rn_convergence_rate(&self.ants, &self.graph, self.target.node, r_n)
    }

    /// Whether at least `threshold` of the colony lies within `r_n` of the
    /// target (inclusive).
    pub fn check_convergence(&self, r_n: f64, threshold: f64) -> Result<bool> {
        Ok(self.rn_rate(r_n)? >= threshold)
    }

    pub fn to_snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            clock: self.clock,
            config: self.config.clone(),
            initial_nest: self.initial_nest,
            target: self.target.node,
            graph: self.graph.to_snapshot(),
            spikes: self.field.to_records(),
            ants: self.ants.clone(),
        }
    }

    pub fn from_snapshot(snap: &StateSnapshot) -> Result<Self> {
        snap.config.pheromone.validate("config.pheromone")?;
        snap.config.colony.validate("config.colony")?;
        snap.config.target.validate("config.target")?;
        let mut graph = SegmentedGraph::from_snapshot(&snap.graph)?;
        if !graph.contains_node(snap.initial_nest) || !graph.contains_node(snap.target) {
            return Err(Error::Argument("nest or target is not a node".into()));
        }
        let field = PheromoneField::from_records(&graph, &snap.spikes)?;
        for (i, ant) in snap.ants.iter().enumerate() {
            if ant.id != i {
                return Err(Error::Argument(format!("ant ids must be dense, found {} at {i}", ant.id)));
            }
            match ant.locus {
                Locus::AtNode(n) if !graph.contains_node(n) => {
                    return Err(Error::Argument(format!("ant {i} stands on unknown node")));
                }
                Locus::OnSegment { seg, offset } => {
                    if seg.edge.0 >= graph.edge_count()
                        || seg.ordinal >= graph.segments(seg.edge).len()
                    {
                        return Err(Error::Argument(format!("ant {i} is on an unknown segment")));
                    }
                    let len = graph.segment(seg.edge, seg.ordinal).length();
                    if !(0.0..=len).contains(&offset) {
                        return Err(Error::Argument(format!("ant {i} offset {offset} is off its segment")));
                    }
                    if graph.is_occupied(seg) {
                        return Err(Error::Argument(format!("ant {i} shares a segment")));
                    }
                    graph.set_occupant(seg, Some(i));
                }
                _ => {}
            }
        }
        let target = ConvergenceTarget {
            node: snap.target,
            lambda: snap.config.target.lambda,
        };
        let mut state = Self {
            reach: snap.config.colony.effective_reach(&graph),
            anchors: Vec::new(),
            graph,
            field,
            ants: snap.ants.clone(),
            clock: snap.clock,
            config: snap.config.clone(),
            initial_nest: snap.initial_nest,
            target,
        };
        state.anchors = state.source_anchors();
        Ok(state)
    }
}

/// Serializable form of [`SimState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSnapshot {
    pub clock: u64,
    pub config: SimConfig,
    pub initial_nest: NodeId,
    pub target: NodeId,
    pub graph: GraphSnapshot,
    pub spikes: Vec<SpikeRecord>,
    pub ants: Vec<Ant>,
}

/// Result of running until convergence or the tick budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    /// First tick at which the convergence check held.
    pub converged_at: Option<u64>,
    pub ticks: u64,
    /// Rate at the last evaluated tick.
    pub rn_rate: f64,
}

/// Step `state` until the convergence check holds (when the target config
/// stops on convergence) or `max_ticks` is reached. The check runs before the
/// first step and after every step. `observe` sees every tick's report.
pub fn run_to_convergence<F>(state: &mut SimState, mut observe: F) -> Result<RunOutcome>
where
    F: FnMut(&SimState, &StepReport) -> Result<()>,
{
    let cfg = state.config.target.clone();
    let mut converged_at = None;
    loop {
        let rate = state.rn_rate(cfg.r_n)?;
        if converged_at.is_none() && rate >= cfg.threshold {
            converged_at = Some(state.clock);
        }
        if (converged_at.is_some() && cfg.stop_on_convergence) || state.clock >= cfg.max_ticks {
            return Ok(RunOutcome {
                converged_at,
                ticks: state.clock,
                rn_rate: rate,
            });
        }
        let report = state.step()?;
        observe(state, &report)?;
    }
}
