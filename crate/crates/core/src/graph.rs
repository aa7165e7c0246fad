//! Per-cluster feature graphs and cluster weights.
//!
//! [`build_graph`] produces the complete graph of pairwise dissimilarities
//! `zeta(u, v)` between feature columns over one cluster's rows.
//! [`FeatureGraph::to_affinity`] turns that into relationship strengths, which
//! is what the arrangement objective and the rewiring operate on.

use alloc::vec;
use alloc::vec::Vec;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Edge metric `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeMetric {
    /// Symmetrized KL divergence between per-feature histograms.
    Kl,
    Euclidean,
    Manhattan,
    /// `|var(u) - var(v)|`.
    Variance,
    /// `1 - |pearson(u, v)|`.
    Correlation,
}

pub const DEFAULT_KL_BINS: usize = 32;
const KL_PSEUDO_COUNT: f64 = 1e-6;

/// Weighted undirected graph over `m` feature vertices, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGraph {
    pub cluster_id: usize,
    pub metric: EdgeMetric,
    /// Built from all rows because the cluster had fewer than two samples.
    pub fallback: bool,
    m: usize,
    weights: Vec<f64>,
    present: Vec<bool>,
}

impl FeatureGraph {
    pub fn empty(m: usize, cluster_id: usize, metric: EdgeMetric) -> Self {
        Self {
            cluster_id,
            metric,
            fallback: false,
            m,
            weights: vec![0.0; m * m],
            present: vec![false; m * m],
        }
    }

    /// Graph from a symmetric weight matrix; every off-diagonal pair whose
    /// weight is nonzero becomes an edge.
    pub fn from_weights(w: &Matrix) -> Self {
        let m = w.rows();
        let mut g = Self::empty(m, 0, EdgeMetric::Euclidean);
        for u in 0..m {
            for v in u + 1..m {
                let x = w[(u, v)];
                if x != 0.0 {
                    g.set(u, v, x);
                }
            }
        }
        g
    }

    /// Complete graph with every edge weight given by `f(u, v)`.
    pub fn complete_with(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut g = Self::empty(m, 0, EdgeMetric::Euclidean);
        for u in 0..m {
            for v in u + 1..m {
                g.set(u, v, f(u, v));
            }
        }
        g
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let i = u * self.m + v;
        if self.present[i] {
            Some(self.weights[i])
        } else {
            None
        }
    }

    /// Weight or 0 when the edge is absent.
    #[inline]
    pub fn weight_or_zero(&self, u: usize, v: usize) -> f64 {
        self.weights[u * self.m + v]
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.present[u * self.m + v]
    }

    /// Inserts or overwrites edge `{u, v}`. Self-loops are ignored.
    pub fn set(&mut self, u: usize, v: usize, w: f64) {
        if u == v {
            return;
        }
        for i in [u * self.m + v, v * self.m + u] {
            self.weights[i] = w;
            self.present[i] = true;
        }
    }

    pub fn remove(&mut self, u: usize, v: usize) {
        for i in [u * self.m + v, v * self.m + u] {
            self.weights[i] = 0.0;
            self.present[i] = false;
        }
    }

    /// Edges as `(u, v, w)` with `u < v`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.m).flat_map(move |u| {
            (u + 1..self.m).filter_map(move |v| self.weight(u, v).map(|w| (u, v, w)))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn max_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).fold(0.0, f64::max)
    }

    /// Sum of incident edge weights of every vertex.
    pub fn strengths(&self) -> Vec<f64> {
        (0..self.m).map(|u| self.weights[u * self.m..(u + 1) * self.m].iter().sum()).collect()
    }

    /// Dense weight matrix (absent edges are 0).
    pub fn weight_matrix(&self) -> Matrix {
        Matrix::from_vec(self.m, self.m, self.weights.clone())
    }

    /// Connected components over edges of positive weight, each sorted by
    /// vertex index, listed by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.m];
        let mut comps = Vec::new();
        for s in 0..self.m {
            if label[s] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut stack = vec![s];
            let mut members = Vec::new();
            label[s] = id;
            while let Some(u) = stack.pop() {
                members.push(u);
                for v in 0..self.m {
                    if label[v] == usize::MAX && self.has_edge(u, v) && self.weight_or_zero(u, v) > 0.0 {
                        label[v] = id;
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Relationship-strength view of a dissimilarity graph:
    /// `a(u, v) = 1 - zeta(u, v) / max zeta`, so the most similar pairs get
    /// weight 1 and the most dissimilar pair gets 0. When every
    /// dissimilarity is 0 all edges get weight 1.
    pub fn to_affinity(&self) -> FeatureGraph {
        let max = self.max_weight();
        let mut out = self.clone();
        for u in 0..self.m {
            for v in u + 1..self.m {
                if let Some(z) = self.weight(u, v) {
                    let a = if max > 0.0 { 1.0 - z / max } else { 1.0 };
                    out.set(u, v, a.max(0.0));
                }
            }
        }
        out
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    let mu = mean(v);
    v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (v.len() - 1) as f64
}

/// Dissimilarity between two columns. Histograms for [`EdgeMetric::Kl`]
/// use [`DEFAULT_KL_BINS`] bins.
pub fn edge_weight(u: &[f64], v: &[f64], metric: EdgeMetric) -> Result<f64> {
    edge_weight_binned(u, v, metric, DEFAULT_KL_BINS)
}

pub fn edge_weight_binned(u: &[f64], v: &[f64], metric: EdgeMetric, bins: usize) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    if u.len() < 2 {
        return Err(Error::InvalidConfig("edge metrics need at least 2 samples".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let w = match metric {
        EdgeMetric::Euclidean => {
            libm::sqrt(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        }
        EdgeMetric::Manhattan => u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum(),
        EdgeMetric::Variance => (sample_variance(u) - sample_variance(v)).abs(),
        EdgeMetric::Correlation => match pearson(u, v) {
            Some(r) => (1.0 - r.abs()).max(0.0),
            None => 0.0,
        },
        EdgeMetric::Kl => symmetric_kl(u, v, bins),
    };
    Ok(w)
}

/// Pearson correlation, `None` when either column is constant.
pub fn pearson(u: &[f64], v: &[f64]) -> Option<f64> {
    let (mu, mv) = (mean(u), mean(v));
    let mut suv = 0.0;
    let mut suu = 0.0;
    let mut svv = 0.0;
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu == 0.0 || svv == 0.0 {
        return None;
    }
    Some((suv / libm::sqrt(suu * svv)).clamp(-1.0, 1.0))
}

/// `KL(p||q) + KL(q||p)` between smoothed histograms on a shared range.
fn symmetric_kl(u: &[f64], v: &[f64], bins: usize) -> f64 {
    let lo = u.iter().chain(v).fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = u.iter().chain(v).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let p = histogram(u, lo, hi, bins);
    let q = histogram(v, lo, hi, bins);
    p.iter()
        .zip(&q)
        .map(|(&a, &b)| a * libm::log(a / b) + b * libm::log(b / a))
        .sum::<f64>()
        .max(0.0)
}

fn histogram(x: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![KL_PSEUDO_COUNT; bins];
    let width = hi - lo;
    for &v in x {
        let b = if width > 0.0 {
            (((v - lo) / width) * bins as f64) as usize
        } else {
            0
        };
        h[b.min(bins - 1)] += 1.0;
    }
    let total: f64 = h.iter().sum();
    for c in h.iter_mut() {
        *c /= total;
    }
    h
}

/// Complete graph over all `m` features, weighted by the metric evaluated on
/// the rows of `cluster_id`. Clusters with a single sample fall back to all
/// rows and set [`FeatureGraph::fallback`].
pub fn build_graph(
    x: &Matrix,
    assign: &ClusterAssignment,
    cluster_id: usize,
    metric: EdgeMetric,
    kl_bins: usize,
) -> Result<FeatureGraph> {
    let members = assign.members(cluster_id);
    if members.is_empty() {
        return Err(Error::EmptyCluster(cluster_id));
    }
    let fallback = members.len() < 2;
    let rows: Vec<usize> = if fallback { (0..x.rows()).collect() } else { members };
    let m = x.cols();
    let cols: Vec<Vec<f64>> =
        (0..m).map(|j| rows.iter().map(|&r| x[(r, j)]).collect()).collect();
    let mut g = FeatureGraph::empty(m, cluster_id, metric);
    g.fallback = fallback;
    for u in 0..m {
        for v in u + 1..m {
            g.set(u, v, edge_weight_binned(&cols[u], &cols[v], metric, kl_bins)?);
        }
    }
    Ok(g)
}

/// Cluster weights from inter-centroid distances:
/// `raw_j = sum_{i != j} 1 / (||mu_j - mu_i|| + eps)`, normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterWeights {
    pub alphas: Vec<f64>,
}

pub fn cluster_alphas(centroids: &Matrix, eps: f64) -> Result<ClusterWeights> {
    let k = centroids.rows();
    if k == 0 {
        return Err(Error::InvalidConfig("no centroids".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig("eps must be > 0".into()));
    }
    if k == 1 {
        return Ok(ClusterWeights { alphas: vec![1.0] });
    }
    let raw: Vec<f64> = (0..k)
        .map(|j| {
            (0..k)
                .filter(|&i| i != j)
                .map(|i| {
                    let d = crate::linalg::norm(
                        &centroids.row(j).iter().zip(centroids.row(i)).map(|(a, b)| a - b).collect::<Vec<_>>(),
                    );
                    1.0 / (d + eps)
                })
                .sum()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(ClusterWeights { alphas: raw.iter().map(|r| r / total).collect() })
}
