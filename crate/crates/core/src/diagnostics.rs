//! Equilibrium residuals and the distance between the colony profile and the
//! radial target. None of this feeds back into the dynamics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{radial_target, ConvergenceTarget, SimState};
use crate::error::{Error, Result};
use crate::field::{edge_profile_smooth_parts, logistic_slope, FieldGrid};
use crate::graph::SegmentedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub temporal_residual: f64,
    pub spatial_residual: f64,
    pub evaluated_at: f64,
}

/// `sum_i H(t - t_i)(1 - H(t - t_i)) - 1/delta` over every live deposit of the
/// colony, with the temporal logistic `H`.
pub fn temporal_equilibrium_residual(state: &SimState, t: f64) -> f64 {
    let p = state.params();
    let sum: f64 = state
        .field
        .iter_trains()
        .flat_map(|(_, _, tr)| tr.live(t, p).iter())
        .map(|&ti| logistic_slope(t, ti, p.k_t))
        .sum();
    sum - 1.0 / p.delta
}

/// `sum_i H(t - t_i)` over every live deposit: the quantity a non-evaporating
/// field would need to hold at exactly 1.
pub fn temporal_saturation_sum(state: &SimState, t: f64) -> f64 {
    let p = state.params();
    state
        .field
        .iter_trains()
        .flat_map(|(_, _, tr)| tr.live(t, p).iter())
        .map(|&ti| crate::field::heaviside_smooth(t, ti, p.k_t))
        .sum()
}

/// Per-segment terms `g(x - x_j) - g(x - x_{j+1})` with `g = H(1 - H)` for the
/// spatial logistic.
pub fn spatial_bracket_terms(boundaries: &[f64], x: f64, k_x: f64) -> Vec<f64> {
    boundaries
        .windows(2)
        .map(|w| logistic_slope(x, w[0], k_x) - logistic_slope(x, w[1], k_x))
        .collect()
}

/// Segments matching one of the boundary-pair solutions of the spatial
/// condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentFlag {
    pub edge: usize,
    pub segment: usize,
    /// `x_j == x_{j+1}`.
    pub degenerate: bool,
    /// `x_j + x_{j+1} == 1` in coordinates normalized by the edge length.
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialReport {
    /// Mean absolute per-point residual over the grid.
    pub residual: f64,
    pub points: usize,
    pub flags: Vec<SegmentFlag>,
}

pub fn segment_flags(graph: &SegmentedGraph) -> Vec<SegmentFlag> {
    let mut out = Vec::new();
    for e in graph.edges() {
        let b = graph.boundaries(e.id);
        for (j, w) in b.windows(2).enumerate() {
            let degenerate = w[0] == w[1];
            let symmetric = (w[0] / e.length + w[1] / e.length - 1.0).abs() < 1e-9;
            if degenerate || symmetric {
                out.push(SegmentFlag {
                    edge: e.id.0,
                    segment: j,
                    degenerate,
                    symmetric,
                });
            }
        }
    }
    out
}

/// Spatial stationarity residual: the per-point sum of bracket terms, averaged
/// in absolute value over `grid`. The residual does not depend on the
/// deposits, only on the segmentation and `k_x`.
pub fn spatial_equilibrium_residual(state: &SimState, grid: FieldGrid) -> SpatialReport {
    let k_x = state.params().k_x;
    let graph = &state.graph;
    let (sum, points) = graph
        .edges()
        .par_iter()
        .map(|e| {
            let b = graph.boundaries(e.id);
            grid.positions(e.length).into_iter().fold((0.0, 0usize), |(s, n), x| {
                let r: f64 = spatial_bracket_terms(&b, x, k_x).iter().sum();
                (s + r.abs(), n + 1)
            })
        })
        .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    SpatialReport {
        residual: if points > 0 { sum / points as f64 } else { 0.0 },
        points,
        flags: segment_flags(graph),
    }
}

pub fn equilibrium_report(state: &SimState, grid: FieldGrid) -> EquilibriumReport {
    let t = state.time();
    EquilibriumReport {
        temporal_residual: temporal_equilibrium_residual(state, t),
        spatial_residual: spatial_equilibrium_residual(state, grid).residual,
        evaluated_at: t,
    }
}

/// Half the L1 distance between two non-negative vectors after each is scaled
/// to unit mass; 1 when `field` has no mass.
pub fn normalized_l1(field: &[f64], target: &[f64]) -> f64 {
    let fm: f64 = field.iter().sum();
    let tm: f64 = target.iter().sum();
    if !(fm > 0.0) || !(tm > 0.0) {
        return 1.0;
    }
    0.5 * field
        .iter()
        .zip(target)
        .map(|(f, g)| (f / fm - g / tm).abs())
        .sum::<f64>()
}

/// Distance between the smooth colony profile on `grid` and the radial target
/// at the same points, both normalized to unit mass.
pub fn distribution_mismatch(
    state: &SimState,
    target: &ConvergenceTarget,
    grid: FieldGrid,
) -> Result<f64> {
    if grid.points_per_edge == 0 {
        return Err(Error::Argument("empty sample grid".into()));
    }
    let graph = &state.graph;
    let p = state.params();
    let t = state.time();
    let centre = graph.position(target.node);
    let pairs: Vec<(f64, f64)> = graph
        .edges()
        .par_iter()
        .map(|e| {
            let b = graph.boundaries(e.id);
            let trains = state.field.edge_trains(e.id);
            grid.positions(e.length)
                .into_iter()
                .map(|x| {
                    // the common envelope cancels under normalization
                    let (_, inner) = edge_profile_smooth_parts(&b, trains, x, t, p)
                        .expect("grid positions lie on the edge");
                    let d = graph.point_on_edge(e.id, x).distance(centre);
                    (inner.max(0.0), radial_target(d, target, p.rho_star))
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    let (f, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(normalized_l1(&f, &g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colony::ColonyConfig;
    use crate::engine::{SimConfig, TargetConfig};
    use crate::field::PheromoneParams;
    use crate::graph::{EdgeId, NodeId, Point};
    use proptest::prelude::*;

    fn state(delta: f64) -> SimState {
        let g = SegmentedGraph::from_parts(
            vec![Point { x: 0.0, y: 0.0 }, Point { x: 10.0, y: 0.0 }],
            &[(0, 1)],
            4,
        )
        .unwrap();
        let config = SimConfig {
            seed: 0,
            pheromone: PheromoneParams {
                delta,
                ..PheromoneParams::default()
            },
            colony: ColonyConfig {
                ant_count: 1,
                r_i: 0.0,
                ..ColonyConfig::default()
            },
            target: TargetConfig {
                source: false,
                ..TargetConfig::default()
            },
        };
        SimState::with_nodes(g, config, NodeId(0), NodeId(1)).unwrap()
    }

    #[test]
    fn temporal_residual_examples() {
        let mut s = state(2.0);
        assert_eq!(temporal_equilibrium_residual(&s, 0.0), -0.5);
        s.field.deposit(EdgeId(0), 1, 3.0).unwrap();
        assert!((temporal_equilibrium_residual(&s, 3.0) - (0.25 - 0.5)).abs() < 1e-15);
        assert!((temporal_saturation_sum(&s, 3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn temporal_residual_without_evaporation_is_a_direct_sum() {
        let mut s = state(1e9);
        for (j, t) in [(0, 0.0), (1, 0.02), (2, 5.0)] {
            s.field.deposit(EdgeId(0), j, t).unwrap();
        }
        let t = 0.03;
        let g = |ti: f64| {
            let h = 1.0 / (1.0 + (-50.0 * (t - ti)).exp());
            h * (1.0 - h)
        };
        let oracle = g(0.0) + g(0.02) + g(5.0) - 1e-9;
        assert!((temporal_equilibrium_residual(&s, t) - oracle).abs() < 1e-15);
    }

    #[test]
    fn spatial_terms() {
        let b = [0.0, 2.5, 5.0, 7.5, 10.0];
        // far from every boundary all terms vanish
        let mid: f64 = spatial_bracket_terms(&b, 1.25, 50.0).iter().sum();
        assert!(mid.abs() < 1e-20);
        // on a boundary shared by two segments the two brackets cancel
        let terms = spatial_bracket_terms(&b, 2.5, 50.0);
        assert!((terms[1] - 0.25).abs() < 1e-12);
        assert!((terms[0] + 0.25).abs() < 1e-12);
        // degenerate segment
        let t = spatial_bracket_terms(&[0.0, 3.0, 3.0, 6.0], 3.0, 50.0);
        assert_eq!(t[1], 0.0);
    }

    #[test]
    fn flags_and_aggregate() {
        let s = state(50.0);
        let flags = segment_flags(&s.graph);
        assert!(flags.is_empty(), "{flags:?}");
        let g = SegmentedGraph::from_parts(
            vec![Point { x: 0.0, y: 0.0 }, Point { x: 10.0, y: 0.0 }],
            &[(0, 1)],
            1,
        )
        .unwrap();
        // a single segment spans [0, L]: normalized 0 + 1 = 1
        let f = segment_flags(&g);
        assert_eq!(f.len(), 1);
        assert!(f[0].symmetric && !f[0].degenerate);

        let r = spatial_equilibrium_residual(&s, FieldGrid { points_per_edge: 5 });
        // endpoints contribute 0.25 each, interior boundaries cancel
        assert_eq!(r.points, 5);
        assert!((r.residual - 0.5 / 5.0).abs() < 1e-12, "{}", r.residual);
    }

    #[test]
    fn mismatch_examples() {
        let target = [0.5, 0.25, 0.125];
        assert_eq!(normalized_l1(&target, &target), 0.0);
        let doubled: Vec<f64> = target.iter().map(|v| 2.0 * v).collect();
        assert!(normalized_l1(&doubled, &target) < 1e-15);
        assert_eq!(normalized_l1(&[0.0; 3], &target), 1.0);

        let s = state(50.0);
        let tgt = ConvergenceTarget {
            node: NodeId(1),
            lambda: 0.1,
        };
        assert_eq!(distribution_mismatch(&s, &tgt, FieldGrid::default()).unwrap(), 1.0);
        assert!(distribution_mismatch(&s, &tgt, FieldGrid { points_per_edge: 0 }).is_err());
    }

    proptest! {
        #[test]
        fn mismatch_is_scale_invariant(v in proptest::collection::vec(0.0f64..10.0, 1..40), c in 0.01f64..100.0) {
            let target: Vec<f64> = (0..v.len()).map(|i| (-(i as f64) * 0.1).exp()).collect();
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            let a = normalized_l1(&v, &target);
            let b = normalized_l1(&scaled, &target);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        }
    }
}
