//! Centrality-driven rewiring of a feature graph and the local ordering it
//! produces.
//!
//! Orders are scored by the weighted linear arrangement cost
//! `sum_{u<v} w(u, v) * |pos(u) - pos(v)|`, which is minimized. The rewired
//! graph only proposes candidate orders; candidates are always scored
//! against the graph handed to [`rewire_local`], so the recorded quality
//! can never get worse from one round to the next.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::FeatureGraph;
use crate::linalg::{self, Matrix};
use crate::permutation::Permutation;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Centrality {
    #[default]
    Degree,
    Betweenness,
    Eigenvector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Direction {
    #[default]
    Ascending,
    Descending,
}

/// Components up to this size use a dense eigensolver for the Fiedler
/// vector; larger ones use Lanczos.
const DENSE_EIGEN_LIMIT: usize = 64;
const LANCZOS_STEPS: usize = 80;
const EIGEN_TOL: f64 = 1e-9;
const EIGEN_MAX_ITERS: usize = 1000;
pub const MAX_SWAP_PASSES: usize = 1000;
const LOCAL_SWAP_PASSES: usize = 4;

/// Per-vertex centrality in `[0, 1]`.
pub fn centrality(g: &FeatureGraph, kind: Centrality) -> Vec<f64> {
    let raw = match kind {
        Centrality::Degree => g.strengths(),
        Centrality::Betweenness => betweenness(g),
        Centrality::Eigenvector => eigenvector(g),
    };
    max_normalize(raw)
}

fn max_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for x in v.iter_mut() {
            *x /= max;
        }
    }
    v
}

/// Brandes accumulation over Dijkstra shortest paths, edge length = weight.
fn betweenness(g: &FeatureGraph) -> Vec<f64> {
    let m = g.vertex_count();
    let mut cb = vec![0.0; m];
    let mut dist = vec![f64::INFINITY; m];
    let mut sigma = vec![0.0f64; m];
    let mut delta = vec![0.0f64; m];
    let mut done = vec![false; m];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut stack = Vec::with_capacity(m);
    for s in 0..m {
        dist.fill(f64::INFINITY);
        sigma.fill(0.0);
        delta.fill(0.0);
        done.fill(false);
        for p in preds.iter_mut() {
            p.clear();
        }
        stack.clear();
        dist[s] = 0.0;
        sigma[s] = 1.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..m {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            stack.push(u);
            for v in 0..m {
                let Some(w) = g.weight(u, v) else { continue };
                if done[v] {
                    continue;
                }
                let alt = dist[u] + w;
                if alt < dist[v] {
                    dist[v] = alt;
                    sigma[v] = sigma[u];
                    preds[v].clear();
                    preds[v].push(u);
                } else if alt == dist[v] {
                    sigma[v] += sigma[u];
                    preds[v].push(u);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    cb
}

/// Power iteration on `W + I`; the shift keeps bipartite graphs from
/// oscillating without changing the eigenvectors.
fn eigenvector(g: &FeatureGraph) -> Vec<f64> {
    let m = g.vertex_count();
    let w = g.weight_matrix();
    let mut x = vec![1.0; m];
    for _ in 0..EIGEN_MAX_ITERS {
        let mut y = w.mul_vec(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
        }
        let n = linalg::norm(&y);
        if n == 0.0 {
            return vec![0.0; m];
        }
        for yi in y.iter_mut() {
            *yi /= n;
        }
        let diff = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        if diff < EIGEN_TOL {
            break;
        }
    }
    x.iter().map(|v| v.abs()).collect()
}

fn check_order(g: &FeatureGraph, order: &Permutation) -> Result<()> {
    if order.len() != g.vertex_count() {
        return Err(Error::NotAPermutation(g.vertex_count()));
    }
    Ok(())
}

/// Weighted linear arrangement cost of `order` on `g`.
pub fn dispersion(g: &FeatureGraph, order: &Permutation) -> Result<f64> {
    check_order(g, order)?;
    Ok(arrangement_cost(&g.weight_matrix(), order))
}

/// Same functional form as [`dispersion`]; `g` carries dissimilarities or
/// affinities depending on the caller.
pub fn quality(g: &FeatureGraph, order: &Permutation) -> Result<f64> {
    dispersion(g, order)
}

/// `sum_{u<v} w(u, v) * |pos(u) - pos(v)|` over a dense symmetric matrix.
pub fn arrangement_cost(w: &Matrix, order: &Permutation) -> f64 {
    let m = w.rows();
    let pos = order.positions();
    let mut total = 0.0;
    for u in 0..m {
        let row = w.row(u);
        let pu = pos[u] as f64;
        for v in u + 1..m {
            let x = row[v];
            if x != 0.0 {
                total += x * (pu - pos[v] as f64).abs();
            }
        }
    }
    total
}

/// Spectral sequencing: vertices sorted by the Fiedler vector of the graph
/// Laplacian. Components over positive-weight edges are laid out one after
/// another, heaviest first, isolated vertices last.
pub fn initial_order(g: &FeatureGraph, direction: Direction) -> Permutation {
    initial_order_with(g, direction, DENSE_EIGEN_LIMIT)
}

fn initial_order_with(g: &FeatureGraph, direction: Direction, dense_limit: usize) -> Permutation {
    let mut comps: Vec<(f64, Vec<usize>)> = g
        .components()
        .into_iter()
        .map(|c| {
            let mut total = 0.0;
            for (i, &u) in c.iter().enumerate() {
                for &v in &c[i + 1..] {
                    total += g.weight_or_zero(u, v);
                }
            }
            (total, c)
        })
        .collect();
    comps.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1[0].cmp(&b.1[0])));

    let mut seq = Vec::with_capacity(g.vertex_count());
    for (_, c) in &comps {
        seq.extend(sequence_component(g, c, dense_limit));
    }
    let p = Permutation::new(seq).expect("components partition the vertices");
    match direction {
        Direction::Ascending => p,
        Direction::Descending => p.reversed(),
    }
}

fn sequence_component(g: &FeatureGraph, comp: &[usize], dense_limit: usize) -> Vec<usize> {
    let s = comp.len();
    if s <= 2 {
        return comp.to_vec();
    }
    let mut lap = Matrix::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            if i != j {
                let w = g.weight_or_zero(comp[i], comp[j]);
                lap[(i, j)] = -w;
                lap[(i, i)] += w;
            }
        }
    }
    let mut f = if s <= dense_limit {
        linalg::symmetric_eigen(&lap).vector(1)
    } else {
        lanczos_fiedler(&lap)
    };

    let scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return comp.to_vec();
    }
    if let Some(first) = f.iter().find(|v| v.abs() > 1e-8 * scale) {
        if *first > 0.0 {
            for v in f.iter_mut() {
                *v = -*v;
            }
        }
    }
    // Quantized keys make index tie-breaks robust to rounding noise.
    let key = |v: f64| libm::round(v / scale * 1e10) as i64;
    let mut idx: Vec<usize> = (0..s).collect();
    idx.sort_by(|&a, &b| key(f[a]).cmp(&key(f[b])).then(comp[a].cmp(&comp[b])));
    idx.into_iter().map(|i| comp[i]).collect()
}

/// Smallest Ritz vector of the Laplacian restricted to the complement of the
/// constant vector, from a fully reorthogonalized Lanczos run.
fn lanczos_fiedler(lap: &Matrix) -> Vec<f64> {
    let s = lap.rows();
    let steps = LANCZOS_STEPS.min(s - 1);
    let inv_sqrt = 1.0 / libm::sqrt(s as f64);
    let project = |v: &mut [f64]| {
        let c = v.iter().sum::<f64>() * inv_sqrt;
        for x in v.iter_mut() {
            *x -= c * inv_sqrt;
        }
    };
    let normalize = |v: &mut [f64]| -> f64 {
        let n = linalg::norm(v);
        if n > 0.0 {
            for x in v.iter_mut() {
                *x /= n;
            }
        }
        n
    };

    let mut q: Vec<f64> = (0..s).map(|i| libm::sin(1.0 + i as f64 * 0.754_877_666)).collect();
    project(&mut q);
    normalize(&mut q);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let scale = lap.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..steps {
        let mut w = lap.mul_vec(&q);
        let a = linalg::dot(&w, &q);
        alpha.push(a);
        basis.push(q);
        for _ in 0..2 {
            for b in &basis {
                let c = linalg::dot(&w, b);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
            project(&mut w);
        }
        if basis.len() == steps {
            break;
        }
        let nb = normalize(&mut w);
        if nb <= 1e-12 * scale {
            break;
        }
        beta.push(nb);
        q = w;
    }

    let t = alpha.len();
    beta.truncate(t.saturating_sub(1));
    let (_, y) = linalg::tridiagonal_smallest(&alpha, &beta);
    let mut f = vec![0.0; s];
    for (b, c) in basis.iter().zip(&y) {
        for (x, v) in f.iter_mut().zip(b) {
            *x += c * v;
        }
    }
    f
}

/// Edge counts from one rewiring step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeStats {
    pub pruned: usize,
    pub added: usize,
    pub clamped: usize,
}

/// `w' = max(0, w + lambda * C(u) * C(v) - decay * w)` on every existing edge.
pub fn hebbian_update(
    g: &FeatureGraph,
    c: &[f64],
    lambda: f64,
    decay: f64,
) -> (FeatureGraph, EdgeStats) {
    let mut out = g.clone();
    let mut stats = EdgeStats::default();
    let edges: Vec<_> = g.edges().collect();
    for (u, v, w) in edges {
        let nw = w + lambda * c[u] * c[v] - decay * w;
        if nw < 0.0 {
            stats.clamped += 1;
        }
        out.set(u, v, nw.max(0.0));
    }
    (out, stats)
}

/// Number of hub vertices: `ceil(m * fraction)`, at least 1.
pub fn hub_count(m: usize, fraction: f64) -> usize {
    (libm::ceil(m as f64 * fraction) as usize).clamp(1, m.max(1))
}

/// Drops edges lighter than `theta`, then links every pair among the
/// top-centrality hubs that lacks an edge, with weight
/// `max(0, lambda * C(u) * C(v))`.
pub fn prune_and_rewire(
    g: &FeatureGraph,
    c: &[f64],
    theta: f64,
    lambda: f64,
    hub_fraction: f64,
) -> (FeatureGraph, EdgeStats) {
    let m = g.vertex_count();
    let mut out = g.clone();
    let mut stats = EdgeStats::default();
    let edges: Vec<_> = g.edges().collect();
    for (u, v, w) in edges {
        if w < theta {
            out.remove(u, v);
            stats.pruned += 1;
        }
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    let hubs = &idx[..hub_count(m, hub_fraction).min(m)];
    for (i, &u) in hubs.iter().enumerate() {
        for &v in &hubs[i + 1..] {
            if !out.has_edge(u, v) {
                out.set(u, v, (lambda * c[u] * c[v]).max(0.0));
                stats.added += 1;
            }
        }
    }
    (out, stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewiringConfig {
    pub centrality: Centrality,
    pub learning_rate: f64,
    pub decay: f64,
    pub prune_theta: f64,
    pub tolerance: f64,
    pub mutation_prob: f64,
    pub max_rounds: usize,
    pub seed: u64,
    pub hub_fraction: f64,
    pub direction: Direction,
    /// Refine each re-ordering by adjacent swaps on the measured graph.
    pub local_search: bool,
}

impl Default for RewiringConfig {
    fn default() -> Self {
        Self {
            centrality: Centrality::Degree,
            learning_rate: 0.1,
            decay: 0.05,
            prune_theta: 0.05,
            tolerance: 0.021,
            mutation_prob: 0.2,
            max_rounds: 20,
            seed: 0,
            hub_fraction: 0.25,
            direction: Direction::Ascending,
            local_search: true,
        }
    }
}

impl RewiringConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be > 0");
        }
        if !(self.decay >= 0.0) || !self.decay.is_finite() {
            return bad("decay must be >= 0");
        }
        if !(self.prune_theta >= 0.0) {
            return bad("prune threshold must be >= 0");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("mutation probability must lie in [0, 1]");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be >= 1");
        }
        if !(self.hub_fraction > 0.0 && self.hub_fraction <= 1.0) {
            return bad("hub fraction must lie in (0, 1]");
        }
        Ok(())
    }
}

/// One rewiring round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    pub quality: f64,
    pub candidate_quality: f64,
    pub accepted: bool,
    pub edges_pruned: usize,
    pub edges_added: usize,
    pub clamped: usize,
    pub mutated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOrdering {
    pub cluster_id: usize,
    pub order: Permutation,
    /// Quality of the initial order, then after every round.
    pub quality_history: Vec<f64>,
    pub rounds_used: usize,
    pub converged: bool,
    pub trace: Vec<RoundTrace>,
}

impl LocalOrdering {
    pub fn quality(&self) -> f64 {
        *self.quality_history.last().expect("history starts with the initial order")
    }
}

/// Swaps neighbouring positions while a swap strictly lowers the
/// arrangement cost, for at most `max_passes` sweeps.
pub fn adjacent_swap_descent(w: &Matrix, mut order: Permutation, max_passes: usize) -> Permutation {
    let m = order.len();
    if m < 3 {
        return order;
    }
    let scale = w.as_slice().iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for _ in 0..max_passes {
        let mut improved = false;
        for p in 0..m - 1 {
            let a = order.sequence()[p];
            let b = order.sequence()[p + 1];
            let (ra, rb) = (w.row(a), w.row(b));
            let mut delta = 0.0;
            for (q, &x) in order.sequence().iter().enumerate() {
                if q < p {
                    delta += ra[x] - rb[x];
                } else if q > p + 1 {
                    delta += rb[x] - ra[x];
                }
            }
            if delta < -1e-12 * scale {
                order.swap_positions(p, p + 1);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    order
}

/// Runs the rewiring loop on `g` and returns the rewired graph together with
/// the best order found.
pub fn rewire_local(g: &FeatureGraph, cfg: &RewiringConfig) -> Result<(FeatureGraph, LocalOrdering)> {
    cfg.validate()?;
    let m = g.vertex_count();
    if m == 0 {
        return Err(Error::TooFewFeatures(0));
    }
    let mut rng = rng::seeded(cfg.seed);
    let mut work = g.clone();
    let weights = cfg.local_search.then(|| g.weight_matrix());
    let mut order = initial_order(g, cfg.direction);
    let mut q = quality(g, &order)?;
    let mut history = vec![q];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut rounds_used = 0;

    for round in 1..=cfg.max_rounds {
        rounds_used = round;
        let c = centrality(&work, cfg.centrality);
        let (pruned, s1) = prune_and_rewire(&work, &c, cfg.prune_theta, cfg.learning_rate, cfg.hub_fraction);
        let (updated, s2) = hebbian_update(&pruned, &c, cfg.learning_rate, cfg.decay);
        work = updated;

        let mut cand = initial_order(&work, cfg.direction);
        if let Some(w) = &weights {
            cand = adjacent_swap_descent(w, cand, LOCAL_SWAP_PASSES);
        }
        let cq = quality(g, &cand)?;
        let prev = q;
        let accepted = cq <= q;
        if accepted {
            order = cand;
            q = cq;
        }

        let mut mutated = false;
        if (prev - q).abs() < cfg.tolerance
            && m >= 2
            && cfg.mutation_prob > 0.0
            && rng::unit(&mut rng) < cfg.mutation_prob
        {
            let a = rng::index(&mut rng, m);
            let mut b = rng::index(&mut rng, m - 1);
            if b >= a {
                b += 1;
            }
            let mut trial = order.clone();
            trial.swap_positions(a, b);
            let tq = quality(g, &trial)?;
            if tq < q {
                order = trial;
                q = tq;
                mutated = true;
            }
        }

        history.push(q);
        trace.push(RoundTrace {
            round,
            quality: q,
            candidate_quality: cq,
            accepted,
            edges_pruned: s1.pruned,
            edges_added: s1.added,
            clamped: s2.clamped,
            mutated,
        });
        if (prev - q).abs() < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let local = LocalOrdering {
        cluster_id: g.cluster_id,
        order,
        quality_history: history,
        rounds_used,
        converged,
        trace,
    };
    Ok((work, local))
}
