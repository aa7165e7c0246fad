//! Merging per-cluster local orders into one global column order.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{ClusterWeights, FeatureGraph};
use crate::linalg::Matrix;
use crate::permutation::Permutation;
use crate::rewiring::{arrangement_cost, Direction, LocalOrdering};
pub use crate::rewiring::{adjacent_swap_descent, MAX_SWAP_PASSES};

pub use crate::dataset::apply_permutation;


#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOrdering {
    pub order: Permutation,
    pub alphas: ClusterWeights,
    pub local: Vec<LocalOrdering>,
    /// Weighted objective at `order`.
    pub score: f64,
    /// Weighted objective of the plain weighted-rank aggregation.
    pub rank_score: f64,
}

/// `sum_j alpha_j * W_j` as a dense matrix.
pub fn combined_weights(graphs: &[FeatureGraph], alphas: &ClusterWeights) -> Result<Matrix> {
    if graphs.len() != alphas.alphas.len() || graphs.is_empty() {
        return Err(Error::ShapeMismatch("one weight per graph is required".into()));
    }
    let m = graphs[0].vertex_count();
    let mut w = Matrix::zeros(m, m);
    for (g, &a) in graphs.iter().zip(&alphas.alphas) {
        if g.vertex_count() != m {
            return Err(Error::InconsistentFeatureSets);
        }
        for (u, v, x) in g.edges() {
            w[(u, v)] += a * x;
            w[(v, u)] += a * x;
        }
    }
    Ok(w)
}

/// `sum_j alpha_j * dispersion(graphs[j], order)`.
pub fn global_dispersion(graphs: &[FeatureGraph], alphas: &ClusterWeights, order: &Permutation) -> Result<f64> {
    let w = combined_weights(graphs, alphas)?;
    if order.len() != w.rows() {
        return Err(Error::NotAPermutation(w.rows()));
    }
    Ok(arrangement_cost(&w, order))
}

/// Weighted rank aggregation (key of feature `f` is `sum_j alpha_j * pos_j(f)`)
/// followed by adjacent-swap descent on the weighted objective over the
/// rewired `graphs`. The descent starts from whichever of the aggregated
/// order and the local orders scores lowest, so the result never scores
/// worse than the aggregated order. A single local order is returned as is.
pub fn aggregate(
    locals: Vec<LocalOrdering>,
    graphs: &[FeatureGraph],
    alphas: &ClusterWeights,
    direction: Direction,
) -> Result<GlobalOrdering> {
    if locals.is_empty() || locals.len() != alphas.alphas.len() || locals.len() != graphs.len() {
        return Err(Error::ShapeMismatch("locals, graphs and alphas must align".into()));
    }
    let m = locals[0].order.len();
    if locals.iter().any(|l| l.order.len() != m) || graphs.iter().any(|g| g.vertex_count() != m) {
        return Err(Error::InconsistentFeatureSets);
    }

    let keys: Vec<f64> = (0..m)
        .map(|f| locals.iter().zip(&alphas.alphas).map(|(l, a)| a * l.order.position(f) as f64).sum())
        .collect();
    let mut seq: Vec<usize> = (0..m).collect();
    seq.sort_by(|&a, &b| {
        let by_key = keys[a].total_cmp(&keys[b]);
        let by_key = if direction == Direction::Descending { by_key.reverse() } else { by_key };
        by_key.then(a.cmp(&b))
    });
    let ranked = Permutation::new(seq)?;

    let w = combined_weights(graphs, alphas)?;
    let rank_score = arrangement_cost(&w, &ranked);
    if locals.len() == 1 {
        return Ok(GlobalOrdering { order: ranked, alphas: alphas.clone(), local: locals, score: rank_score, rank_score });
    }
    let mut start = ranked;
    let mut start_score = rank_score;
    for l in &locals {
        let cand = match direction {
            Direction::Ascending => l.order.clone(),
            Direction::Descending => l.order.reversed(),
        };
        let s = arrangement_cost(&w, &cand);
        if s < start_score {
            start = cand;
            start_score = s;
        }
    }
    let order = adjacent_swap_descent(&w, start, MAX_SWAP_PASSES);
    let score = arrangement_cost(&w, &order);
    Ok(GlobalOrdering { order, alphas: alphas.clone(), local: locals, score, rank_score })
}

/// Mean over feature pairs of `|pos(u) - pos(v)| / (||c_u - c_v|| + eps)`,
/// where row `u` of `reps` describes feature `u`.
pub fn coherence_penalty(order: &Permutation, reps: &Matrix, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig("eps must be > 0".into()));
    }
    let m = order.len();
    if reps.rows() != m {
        return Err(Error::ShapeMismatch("one representation row per feature is required".into()));
    }
    if m < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for u in 0..m {
        for v in u + 1..m {
            let d = libm::sqrt(reps.row(u).iter().zip(reps.row(v)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
            let gap = (order.position(u) as f64 - order.position(v) as f64).abs();
            total += gap / (d + eps);
        }
    }
    Ok(total / (m * (m - 1) / 2) as f64)
}
