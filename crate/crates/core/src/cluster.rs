//! Seeded k-means over samples (rows).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub assignment: Vec<usize>,
    /// `k x m`.
    pub centroids: Matrix,
    pub sizes: Vec<usize>,
    /// Objective after seeding and after every Lloyd iteration.
    pub objective_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&0.0)
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from k-means++ seeding. Ties go to the lowest centroid
/// index; an emptied cluster takes the point farthest from its centroid.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, max_iters: usize) -> Result<ClusterAssignment> {
    let n = x.rows();
    let m = x.cols();
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    let mut rng = rng::seeded(seed);
    let mut centroids = Matrix::zeros(k, m);

    // k-means++ seeding
    let first = rng::index(&mut rng, n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng::unit(&mut rng) * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            (0..n).find(|&i| !chosen[i]).unwrap()
        };
        chosen[pick] = true;
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centroids.row(c)));
        }
    }

    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    assign(x, &centroids, &mut assignment);
    repair_empty(x, &mut centroids, &mut assignment, k);
    history.push(objective(x, &centroids, &assignment));

    for _ in 0..max_iters {
        update_centroids(x, &mut centroids, &assignment, k);
        let changed = assign(x, &centroids, &mut assignment);
        repair_empty(x, &mut centroids, &mut assignment, k);
        history.push(objective(x, &centroids, &assignment));
        if !changed {
            break;
        }
    }
    update_centroids(x, &mut centroids, &assignment, k);
    let final_obj = objective(x, &centroids, &assignment);
    if let Some(last) = history.last_mut() {
        if final_obj <= *last {
            *last = final_obj;
        }
    }

    let mut sizes = vec![0; k];
    for &a in &assignment {
        sizes[a] += 1;
    }
    Ok(ClusterAssignment { k, assignment, centroids, sizes, objective_history: history })
}

fn assign(x: &Matrix, centroids: &Matrix, assignment: &mut [usize]) -> bool {
    let mut changed = false;
    for (i, slot) in assignment.iter_mut().enumerate() {
        let row = x.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let d = sq_dist(row, centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if *slot != best {
            *slot = best;
            changed = true;
        }
    }
    changed
}

fn update_centroids(x: &Matrix, centroids: &mut Matrix, assignment: &[usize], k: usize) {
    let m = x.cols();
    let mut sums = Matrix::zeros(k, m);
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s * inv;
            }
        }
    }
}

fn repair_empty(x: &Matrix, centroids: &mut Matrix, assignment: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // Farthest point among clusters that can spare one.
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &c) in assignment.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = sq_dist(x.row(i), centroids.row(c));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { return };
        assignment[i] = empty;
        centroids.row_mut(empty).copy_from_slice(x.row(i));
    }
}

fn objective(x: &Matrix, centroids: &Matrix, assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &c)| sq_dist(x.row(i), centroids.row(c))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;

    fn blobs(n_each: usize, sep: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let mut data = Vec::new();
        let mut truth = Vec::new();
        for b in 0..2 {
            for _ in 0..n_each {
                data.push(b as f64 * sep + standard_normal(&mut r));
                data.push(standard_normal(&mut r));
                data.push(standard_normal(&mut r));
                truth.push(b);
            }
        }
        (Matrix::from_vec(2 * n_each, 3, data), truth)
    }

    #[test]
    fn recovers_separated_blobs() {
        let (x, truth) = blobs(100, 10.0, 1);
        let a = kmeans(&x, 2, 0, 100).unwrap();
        let agree = a.assignment.iter().zip(&truth).filter(|(p, t)| p == t).count();
        let agree = agree.max(truth.len() - agree);
        assert!(agree as f64 >= 0.99 * truth.len() as f64);
    }

    #[test]
    fn single_cluster_is_column_means() {
        let (x, _) = blobs(20, 3.0, 2);
        let a = kmeans(&x, 1, 5, 10).unwrap();
        for j in 0..3 {
            let mean = (0..x.rows()).map(|i| x[(i, j)]).sum::<f64>() / x.rows() as f64;
            assert!((a.centroids[(0, j)] - mean).abs() < 1e-12);
        }
        assert_eq!(a.sizes, vec![40]);
    }

    #[test]
    fn k_equals_n_has_zero_objective() {
        let (x, _) = blobs(5, 3.0, 3);
        let a = kmeans(&x, 10, 7, 20).unwrap();
        assert!(a.objective() < 1e-20);
        assert!(a.sizes.iter().all(|&s| s == 1));
    }

    #[test]
    fn too_many_clusters() {
        let (x, _) = blobs(2, 3.0, 3);
        assert_eq!(kmeans(&x, 5, 0, 5), Err(Error::TooManyClusters { k: 5, n: 4 }));
        assert!(kmeans(&x, 0, 0, 5).is_err());
    }

    #[test]
    fn objective_non_increasing_and_deterministic() {
        for seed in 0..10 {
            let (x, _) = blobs(40, 1.5, seed);
            let a = kmeans(&x, 5, seed, 50).unwrap();
            for w in a.objective_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", a.objective_history);
            }
            assert!(a.sizes.iter().all(|&s| s > 0));
            assert_eq!(a, kmeans(&x, 5, seed, 50).unwrap());
        }
    }

    #[test]
    fn duplicate_points_keep_clusters_nonempty() {
        let x = Matrix::from_vec(6, 2, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let a = kmeans(&x, 3, 0, 10).unwrap();
        assert!(a.sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn nearest_centroid_at_convergence() {
        let (x, _) = blobs(30, 4.0, 9);
        let a = kmeans(&x, 3, 1, 100).unwrap();
        for i in 0..x.rows() {
            let own = sq_dist(x.row(i), a.centroids.row(a.assignment[i]));
            for c in 0..3 {
                assert!(own <= sq_dist(x.row(i), a.centroids.row(c)) + 1e-12);
            }
        }
    }
}
