//! Run configuration: one JSON document holding every tunable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::colony::ColonyConfig;
use crate::engine::{SimConfig, SimState, TargetConfig};
use crate::error::{Error, Result};
use crate::field::PheromoneParams;
use crate::graph::{generate_graph, PlaneBounds, SegmentedGraph};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub node_count: usize,
    pub edge_count: usize,
    pub plane: PlaneBounds,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            node_count: 200,
            edge_count: 4000,
            plane: PlaneBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Ant positions are logged every this many ticks (0 disables the log).
    pub trajectory_every: u64,
    pub field_points_per_edge: usize,
    pub histogram_bin_mm: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trajectory_every: 100,
            field_points_per_edge: 21,
            histogram_bin_mm: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub graph: GraphConfig,
    /// Segments per edge; 0 and 1 both leave edges whole.
    pub resolution: usize,
    pub pheromone: PheromoneParams,
    pub colony: ColonyConfig,
    pub target: TargetConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            graph: GraphConfig::default(),
            resolution: 10,
            pheromone: PheromoneParams::default(),
            colony: ColonyConfig::default(),
            target: TargetConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Desk-scale setup: 20 nodes, 100 edges, 50 ants, and a square plane
    /// sized so the nest radius of 50 mm is 15% of its diagonal. The choice
    /// pool is widened to 10 segments.
    pub fn desk() -> Self {
        let side = 50.0 / (0.15 * 2f64.sqrt());
        Self {
            graph: GraphConfig {
                node_count: 20,
                edge_count: 100,
                plane: PlaneBounds {
                    width: side,
                    height: side,
                },
            },
            colony: ColonyConfig {
                ant_count: 50,
                top_k: 10,
                ..ColonyConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.graph;
        if g.node_count < 2 {
            return Err(Error::config("graph.node_count", "must be at least 2"));
        }
        let max_edges = g.node_count * (g.node_count - 1) / 2;
        if g.edge_count + 1 < g.node_count || g.edge_count > max_edges {
            return Err(Error::config(
                "graph.edge_count",
                format!("must lie in {}..={max_edges}", g.node_count - 1),
            ));
        }
        for (name, v) in [("width", g.plane.width), ("height", g.plane.height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("graph.plane.{name}"), "must be positive"));
            }
        }
        self.pheromone.validate("pheromone")?;
        self.colony.validate("colony")?;
        self.target.validate("target")?;
        if !(self.output.histogram_bin_mm > 0.0 && self.output.histogram_bin_mm.is_finite()) {
            return Err(Error::config("output.histogram_bin_mm", "must be positive"));
        }
        if self.output.field_points_per_edge == 0 {
            return Err(Error::config("output.field_points_per_edge", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            pheromone: self.pheromone,
            colony: self.colony.clone(),
            target: self.target.clone(),
        }
    }

    /// The graph for this seed, segmented at `resolution`. The graph stream
    /// depends on the seed alone, so runs that differ only in resolution,
    /// radius or scale factor share one graph.
    pub fn build_graph(&self) -> Result<SegmentedGraph> {
        let g = &self.graph;
        let graph = generate_graph(
            g.node_count,
            g.edge_count,
            g.plane,
            &mut substream(self.seed, "graph", 0),
        )?;
        Ok(graph.segment_edges(self.resolution))
    }

    pub fn build_state(&self) -> Result<SimState> {
        self.validate()?;
        SimState::new(self.build_graph()?, self.sim_config())
    }
}
