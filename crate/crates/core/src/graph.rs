//! Planar pathway graph whose edges are tiled by ordered, equal-length segments.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

/// One segment of an edge together with a traversal direction.
///
/// `ordinal` always counts from the edge's `u` endpoint, so the physical
/// segment (and its spike train) does not depend on the direction. With
/// `forward` the segment is entered at its `u`-side boundary and left at its
/// `v`-side boundary; otherwise the other way round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentRef {
    pub edge: EdgeId,
    pub ordinal: usize,
    pub forward: bool,
}

impl SegmentRef {
    pub fn new(edge: EdgeId, ordinal: usize, forward: bool) -> Self {
        Self {
            edge,
            ordinal,
            forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, s: f64) -> Point {
        Point {
            x: self.x + (other.x - self.x) * s,
            y: self.y + (other.y - self.y) * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarNode {
    pub id: NodeId,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub u: NodeId,
    pub v: NodeId,
    pub length: f64,
}

impl Edge {
    pub fn other(&self, node: NodeId) -> NodeId {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Coordinate of the `u`-side boundary along the edge (mm).
    pub start: f64,
    /// Coordinate of the `v`-side boundary along the edge (mm).
    pub end: f64,
    pub occupant: Option<usize>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Width and height of the rectangle nodes are placed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneBounds {
    pub width: f64,
    pub height: f64,
}

impl PlaneBounds {
    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }
}

impl Default for PlaneBounds {
    fn default() -> Self {
        Self {
            width: 1000.0,
            height: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedGraph {
    nodes: Vec<PlanarNode>,
    edges: Vec<Edge>,
    segments: Vec<Vec<Segment>>,
    adjacency: Vec<Vec<EdgeId>>,
    resolution: usize,
}

/// Boundaries `0 = b_0 < b_1 < ... < b_n = length` of an equal partition.
/// Consecutive segments share the very same float, and both ends are exact.
pub fn partition_boundaries(length: f64, count: usize) -> Vec<f64> {
    let count = count.max(1);
    let mut b: Vec<f64> = (0..=count)
        .map(|j| length * j as f64 / count as f64)
        .collect();
    b[0] = 0.0;
    b[count] = length;
    b
}

fn tile(length: f64, count: usize) -> Vec<Segment> {
    partition_boundaries(length, count)
        .windows(2)
        .map(|w| Segment {
            start: w[0],
            end: w[1],
            occupant: None,
        })
        .collect()
}

/// Generate a connected graph embedded in the plane (edges may cross):
/// uniform node placement, the Euclidean minimum spanning tree, then the
/// shortest unused pairs until `edge_count` edges exist. Resolution starts at 1.
pub fn generate_graph(
    node_count: usize,
    edge_count: usize,
    bounds: PlaneBounds,
    rng: &mut StreamRng,
) -> Result<SegmentedGraph> {
    if node_count < 2 {
        return Err(Error::config("graph.node_count", "must be at least 2"));
    }
    let max_edges = node_count * (node_count - 1) / 2;
    if edge_count < node_count - 1 || edge_count > max_edges {
        return Err(Error::config(
            "graph.edge_count",
            format!(
                "{edge_count} edges cannot form a simple connected graph on {node_count} nodes \
                 (need {}..={max_edges})",
                node_count - 1
            ),
        ));
    }
    if !(bounds.width > 0.0 && bounds.height > 0.0) {
        return Err(Error::config("graph.plane", "width and height must be positive"));
    }

    let mut positions: Vec<Point> = Vec::with_capacity(node_count);
    let mut seen = HashSet::with_capacity(node_count);
    while positions.len() < node_count {
        let p = Point {
            x: rng.gen_range(0.0..bounds.width),
            y: rng.gen_range(0.0..bounds.height),
        };
        if seen.insert((p.x.to_bits(), p.y.to_bits())) {
            positions.push(p);
        }
    }

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(max_edges);
    for a in 0..node_count {
        for b in (a + 1)..node_count {
            pairs.push((positions[a].distance(positions[b]), a, b));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));

    // Kruskal
    let mut parent: Vec<usize> = (0..node_count).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut chosen = vec![false; pairs.len()];
    let mut tree_edges = 0;
    for (k, &(_, a, b)) in pairs.iter().enumerate() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            chosen[k] = true;
            tree_edges += 1;
            if tree_edges == node_count - 1 {
                break;
            }
        }
    }
    if tree_edges != node_count - 1 {
        return Err(Error::Internal("spanning tree construction failed".into()));
    }
    let mut remaining = edge_count - tree_edges;
    for flag in chosen.iter_mut() {
        if remaining == 0 {
            break;
        }
        if !*flag {
            *flag = true;
            remaining -= 1;
        }
    }

    let pairs: Vec<(usize, usize)> = pairs
        .iter()
        .zip(&chosen)
        .filter(|(_, &c)| c)
        .map(|(&(_, a, b), _)| (a, b))
        .collect();
    SegmentedGraph::from_parts(positions, &pairs, 1)
}

impl SegmentedGraph {
    /// Build a graph from node positions and `(u, v)` index pairs.
    pub fn from_parts(
        positions: Vec<Point>,
        pairs: &[(usize, usize)],
        resolution: usize,
    ) -> Result<Self> {
        let n = positions.len();
        let mut seen = HashSet::new();
        let mut edges = Vec::with_capacity(pairs.len());
        let mut adjacency = vec![Vec::new(); n];
        for (i, &(u, v)) in pairs.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::Argument(format!("edge {i} references unknown node")));
            }
            if u == v {
                return Err(Error::Argument(format!("edge {i} is a self-loop")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Argument(format!("edge {i} duplicates a node pair")));
            }
            let length = positions[u].distance(positions[v]);
            if !(length > 0.0) {
                return Err(Error::Argument(format!("edge {i} has zero length")));
            }
            edges.push(Edge {
                id: EdgeId(i),
                u: NodeId(u),
                v: NodeId(v),
                length,
            });
            adjacency[u].push(EdgeId(i));
            adjacency[v].push(EdgeId(i));
        }
        let nodes = positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| PlanarNode {
                id: NodeId(i),
                position,
            })
            .collect();
        let mut g = Self {
            nodes,
            edges,
            segments: Vec::new(),
            adjacency,
            resolution: 1,
        };
        g.retile(resolution);
        Ok(g)
    }

    fn retile(&mut self, resolution: usize) {
        self.resolution = resolution;
        let count = resolution.max(1);
        self.segments = self.edges.iter().map(|e| tile(e.length, count)).collect();
    }

    /// Re-tile every edge into `max(resolution, 1)` equal segments. Resolution 0
    /// is the classical monolithic edge. Occupancy is cleared.
    pub fn segment_edges(mut self, resolution: usize) -> Self {
        self.retile(resolution);
        self
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn segments_per_edge(&self) -> usize {
        self.resolution.max(1)
    }

    pub fn nodes(&self) -> &[PlanarNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn position(&self, id: NodeId) -> Point {
        self.nodes[id.0].position
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    pub fn incident(&self, id: NodeId) -> &[EdgeId] {
        &self.adjacency[id.0]
    }

    pub fn segments(&self, edge: EdgeId) -> &[Segment] {
        &self.segments[edge.0]
    }

    pub fn segment(&self, edge: EdgeId, ordinal: usize) -> &Segment {
        &self.segments[edge.0][ordinal]
    }

    /// Segment boundaries of an edge, `n + 1` values from 0 to the edge length.
    pub fn boundaries(&self, edge: EdgeId) -> Vec<f64> {
        let segs = &self.segments[edge.0];
        let mut b = Vec::with_capacity(segs.len() + 1);
        b.push(segs[0].start);
        b.extend(segs.iter().map(|s| s.end));
        b
    }

    pub fn total_segments(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    pub fn mean_edge_length(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.edges.iter().map(|e| e.length).sum::<f64>() / self.edges.len() as f64
    }

    pub fn occupant(&self, seg: SegmentRef) -> Option<usize> {
        self.segments[seg.edge.0][seg.ordinal].occupant
    }

    pub fn is_occupied(&self, seg: SegmentRef) -> bool {
        self.occupant(seg).is_some()
    }

    pub fn set_occupant(&mut self, seg: SegmentRef, ant: Option<usize>) {
        self.segments[seg.edge.0][seg.ordinal].occupant = ant;
    }

    pub fn clear_occupancy(&mut self) {
        for segs in &mut self.segments {
            for s in segs {
                s.occupant = None;
            }
        }
    }

    /// Node a traversal of `seg` starts from.
    pub fn start_node(&self, seg: SegmentRef) -> NodeId {
        let e = self.edge(seg.edge);
        if seg.forward {
            e.u
        } else {
            e.v
        }
    }

    /// Node a traversal of `seg` heads to.
    pub fn end_node(&self, seg: SegmentRef) -> NodeId {
        let e = self.edge(seg.edge);
        if seg.forward {
            e.v
        } else {
            e.u
        }
    }

    /// Coordinate (along the edge, from `u`) where a traversal of `seg` enters it.
    pub fn entry_coord(&self, seg: SegmentRef) -> f64 {
        let s = self.segment(seg.edge, seg.ordinal);
        if seg.forward {
            s.start
        } else {
            s.end
        }
    }

    /// Distance along the edge from the traversal's start node to the entry.
    pub fn entry_offset_from_start(&self, seg: SegmentRef) -> f64 {
        let s = self.segment(seg.edge, seg.ordinal);
        if seg.forward {
            s.start
        } else {
            self.edge(seg.edge).length - s.end
        }
    }

    /// Next segment in the direction of travel, `None` if `seg` is the last one.
    pub fn successor(&self, seg: SegmentRef) -> Option<SegmentRef> {
        let n = self.segments[seg.edge.0].len();
        if seg.forward {
            (seg.ordinal + 1 < n).then(|| SegmentRef::new(seg.edge, seg.ordinal + 1, true))
        } else {
            seg.ordinal
                .checked_sub(1)
                .map(|j| SegmentRef::new(seg.edge, j, false))
        }
    }

    /// Edge coordinate of a point `offset` mm into a traversal of `seg`.
    pub fn coord_at(&self, seg: SegmentRef, offset: f64) -> f64 {
        let s = self.segment(seg.edge, seg.ordinal);
        if seg.forward {
            s.start + offset
        } else {
            s.end - offset
        }
    }

    /// Planar position of edge coordinate `x` (linear interpolation).
    pub fn point_on_edge(&self, edge: EdgeId, x: f64) -> Point {
        let e = self.edge(edge);
        self.position(e.u)
            .lerp(self.position(e.v), (x / e.length).clamp(0.0, 1.0))
    }

    /// Unoccupied segments an ant at `node` may step onto: on every incident
    /// edge, oriented away from `node`, each segment whose entry lies within
    /// `reach_radius` of the node along the edge. The first segment of an edge
    /// is always a candidate (when free).
    pub fn reachable_segments(&self, node: NodeId, reach_radius: f64) -> Result<Vec<SegmentRef>> {
        if !self.contains_node(node) {
            return Err(Error::Argument(format!("unknown node {}", node.0)));
        }
        if !(reach_radius >= 0.0) {
            return Err(Error::Argument(format!(
                "reach radius must be non-negative, got {reach_radius}"
            )));
        }
        let mut out = Vec::new();
        for &eid in self.incident(node) {
            let e = self.edge(eid);
            let forward = e.u == node;
            let n = self.segments[eid.0].len();
            for step in 0..n {
                let ordinal = if forward { step } else { n - 1 - step };
                let seg = SegmentRef::new(eid, ordinal, forward);
                if step > 0 && self.entry_offset_from_start(seg) > reach_radius {
                    break;
                }
                if !self.is_occupied(seg) {
                    out.push(seg);
                }
            }
        }
        Ok(out)
    }

    /// Shortest path distances (mm) from `source` to every node.
    pub fn path_distances(&self, source: NodeId) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
            }
        }

        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source.0] = 0.0;
        heap.push(Item(0.0, source.0));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &eid in &self.adjacency[u] {
                let e = &self.edges[eid.0];
                let w = e.other(NodeId(u)).0;
                let nd = d + e.length;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Item(nd, w));
                }
            }
        }
        dist
    }

    /// The pair of nodes at maximum Euclidean distance, lower id first.
    pub fn farthest_pair(&self) -> (NodeId, NodeId) {
        let mut best = (0.0, 0, 0);
        for a in 0..self.nodes.len() {
            for b in (a + 1)..self.nodes.len() {
                let d = self.nodes[a].position.distance(self.nodes[b].position);
                if d > best.0 {
                    best = (d, a, b);
                }
            }
        }
        (NodeId(best.1), NodeId(best.2))
    }

    pub fn is_connected(&self) -> bool {
        self.path_distances(NodeId(0)).iter().all(|d| d.is_finite())
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            resolution: self.resolution,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id.0,
                    x: n.position.x,
                    y: n.position.y,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: e.id.0,
                    u: e.u.0,
                    v: e.v.0,
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &GraphSnapshot) -> Result<Self> {
        for (i, n) in snap.nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::Argument(format!("node ids must be dense, found {} at {i}", n.id)));
            }
        }
        for (i, e) in snap.edges.iter().enumerate() {
            if e.id != i {
                return Err(Error::Argument(format!("edge ids must be dense, found {} at {i}", e.id)));
            }
        }
        let positions = snap.nodes.iter().map(|n| Point { x: n.x, y: n.y }).collect();
        let pairs: Vec<(usize, usize)> = snap.edges.iter().map(|e| (e.u, e.v)).collect();
        Self::from_parts(positions, &pairs, snap.resolution)
    }
}

/// JSON form of a graph: node coordinates, edge endpoints and resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSnapshot {
    pub resolution: usize,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: usize,
    pub u: usize,
    pub v: usize,
}
