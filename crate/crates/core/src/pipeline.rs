//! End-to-end ordering: standardize, cluster samples, build and rewire one
//! feature graph per cluster, then merge the local orders.

use alloc::vec::Vec;

use crate::cluster::{kmeans, ClusterAssignment};
use crate::dataset::{standardize, DataMatrix};
use crate::error::{Error, Result};
use crate::fusion::{importance_scores, ImportanceScores};
use crate::global::{aggregate, coherence_penalty, GlobalOrdering};
use crate::graph::{build_graph, cluster_alphas, EdgeMetric, FeatureGraph, DEFAULT_KL_BINS};
use crate::rewiring::{rewire_local, Direction, RewiringConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingConfig {
    pub clusters: usize,
    pub metric: EdgeMetric,
    pub kl_bins: usize,
    /// Direction of the global order.
    pub direction: Direction,
    pub rewiring: RewiringConfig,
    pub kmeans_max_iters: usize,
    pub alpha_eps: f64,
    pub coherence_eps: f64,
    pub seed: u64,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        Self {
            clusters: 12,
            metric: EdgeMetric::Euclidean,
            kl_bins: DEFAULT_KL_BINS,
            direction: Direction::Descending,
            rewiring: RewiringConfig::default(),
            kmeans_max_iters: 100,
            alpha_eps: 1e-6,
            coherence_eps: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingResult {
    pub assignment: ClusterAssignment,
    /// Dissimilarity graphs as measured.
    pub graphs: Vec<FeatureGraph>,
    /// Affinity graphs after rewiring.
    pub rewired: Vec<FeatureGraph>,
    pub global: GlobalOrdering,
    pub importance: ImportanceScores,
    pub coherence: f64,
}

/// Runs the ordering pipeline on `x`. Cluster `j` rewires with seed
/// `seed + j`.
pub fn order_features(x: &DataMatrix, cfg: &OrderingConfig) -> Result<OrderingResult> {
    cfg.rewiring.validate()?;
    if x.m() < 2 {
        return Err(Error::TooFewFeatures(x.m()));
    }
    if cfg.clusters == 0 || cfg.clusters > x.n() {
        return Err(Error::TooManyClusters { k: cfg.clusters, n: x.n() });
    }
    let z = standardize(x);
    let assignment = kmeans(z.values(), cfg.clusters, cfg.seed, cfg.kmeans_max_iters)?;

    let mut graphs = Vec::with_capacity(cfg.clusters);
    let mut rewired = Vec::with_capacity(cfg.clusters);
    let mut locals = Vec::with_capacity(cfg.clusters);
    for j in 0..cfg.clusters {
        let g = build_graph(z.values(), &assignment, j, cfg.metric, cfg.kl_bins)?;
        let affinity = g.to_affinity();
        let rcfg = RewiringConfig {
            seed: cfg.seed.wrapping_add(j as u64),
            direction: Direction::Ascending,
            ..cfg.rewiring.clone()
        };
        let (rg, local) = rewire_local(&affinity, &rcfg)?;
        graphs.push(g);
        rewired.push(rg);
        locals.push(local);
    }

    let alphas = cluster_alphas(&assignment.centroids, cfg.alpha_eps)?;
    let global = aggregate(locals, &rewired, &alphas, cfg.direction)?;
    let importance = importance_scores(&rewired, &alphas)?;
    let reps = assignment.centroids.transpose();
    let coherence = coherence_penalty(&global.order, &reps, cfg.coherence_eps)?;
    Ok(OrderingResult { assignment, graphs, rewired, global, importance, coherence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{block_contiguity, block_membership, synth_blocks};

    #[test]
    fn blocks_come_out_contiguous() {
        let sizes = [4, 4];
        let member = block_membership(&sizes);
        let mut perfect = 0;
        for seed in 0..10 {
            let x = synth_blocks(500, &sizes, 0.9, seed).unwrap();
            let cfg = OrderingConfig { seed, ..Default::default() };
            let r = order_features(&x, &cfg).unwrap();
            if block_contiguity(&r.global.order, &member) == 1.0 {
                perfect += 1;
            }
        }
        assert!(perfect >= 9, "{perfect}/10");
    }

    #[test]
    fn deterministic_and_consistent() {
        let x = synth_blocks(120, &[3, 2, 4], 0.7, 5).unwrap();
        let cfg = OrderingConfig { clusters: 4, seed: 3, ..Default::default() };
        let a = order_features(&x, &cfg).unwrap();
        assert_eq!(a, order_features(&x, &cfg).unwrap());
        assert_eq!(a.global.order.len(), 9);
        assert!(a.global.score <= a.global.rank_score);
        assert!((a.global.alphas.alphas.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(a.coherence >= 0.0);
        assert_eq!(a.graphs.len(), 4);
    }

    #[test]
    fn rejects_too_many_clusters() {
        let x = synth_blocks(10, &[2, 2], 0.5, 0).unwrap();
        let cfg = OrderingConfig { clusters: 11, ..Default::default() };
        assert_eq!(order_features(&x, &cfg), Err(Error::TooManyClusters { k: 11, n: 10 }));
    }
}
