//! Colony-level outcome measures: r_n-convergence rate, convergence time and
//! the radial distribution of ants around the target.

use serde::{Deserialize, Serialize};

use crate::colony::Ant;
use crate::error::{Error, Result};
use crate::graph::{NodeId, SegmentedGraph};

/// Fraction of ants strictly closer than `r_n` (Euclidean) to `target`.
pub fn rn_convergence_rate(
    colony: &[Ant],
    graph: &SegmentedGraph,
    target: NodeId,
    r_n: f64,
) -> Result<f64> {
    if colony.is_empty() {
        return Err(Error::Argument("r_n-convergence rate of an empty colony".into()));
    }
    if !(r_n > 0.0) {
        return Err(Error::Argument(format!("r_n must be positive, got {r_n}")));
    }
    let centre = graph.position(target);
    let inside = colony
        .iter()
        .filter(|a| a.position(graph).distance(centre) < r_n)
        .count();
    Ok(inside as f64 / colony.len() as f64)
}

/// First tick at which the convergence check held; `history[i]` is the
/// outcome at tick `i`.
pub fn convergence_time(history: &[bool]) -> Option<u64> {
    history.iter().position(|&ok| ok).map(|i| i as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_lo_mm: f64,
    pub bin_hi_mm: f64,
    pub count: usize,
}

/// Histogram of distances to `target`, bins `[i w, (i+1) w)` from zero up to
/// the bin holding the farthest ant.
pub fn distance_histogram(distances: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Argument(format!("bin width must be positive, got {bin_width}")));
    }
    let max = distances.iter().copied().fold(0.0, f64::max);
    let n = (max / bin_width).floor() as usize + 1;
    let mut bins: Vec<HistogramBin> = (0..n)
        .map(|i| HistogramBin {
            bin_lo_mm: i as f64 * bin_width,
            bin_hi_mm: (i + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for &d in distances {
        let i = ((d / bin_width).floor() as usize).min(n - 1);
        bins[i].count += 1;
    }
    Ok(bins)
}

pub fn final_distribution_histogram(
    colony: &[Ant],
    graph: &SegmentedGraph,
    target: NodeId,
    bin_width: f64,
) -> Result<Vec<HistogramBin>> {
    let centre = graph.position(target);
    let d: Vec<f64> = colony
        .iter()
        .map(|a| a.position(graph).distance(centre))
        .collect();
    distance_histogram(&d, bin_width)
}

/// Mean and sample standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}
