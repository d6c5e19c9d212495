//! Lloyd's K-means with k-means++ seeding.
//!
//! Points are the columns of a `d x N` matrix, matching how views are
//! stored elsewhere in the crate.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::math::sq_dist;
use crate::par;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// `d x L`, one center per column.
    pub centers: DMatrix<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its assigned center.
    pub inertia: f64,
    /// Inertia after every assignment step, starting with the seeding.
    pub inertia_trace: Vec<f64>,
}

pub fn kmeans(points: &DMatrix<f64>, k: usize, max_iters: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.ncols();
    if k == 0 {
        return invalid("k-means needs at least one cluster");
    }
    if k > n {
        return invalid(format!("k-means asked for {k} clusters from {n} points"));
    }
    if max_iters == 0 {
        return invalid("k-means max_iters must be >= 1");
    }
    crate::math::ensure_finite(points, "k-means input")?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(points, k, &mut rng);
    let (mut assign, mut dists) = assign_points(points, &centers);
    let mut trace = vec![dists.iter().sum::<f64>()];

    for _ in 0..max_iters {
        let next = update_centers(points, &assign, &dists, k);
        let (next_assign, next_dists) = assign_points(points, &next);
        trace.push(next_dists.iter().sum());
        centers = next;
        let changed = next_assign != assign;
        assign = next_assign;
        dists = next_dists;
        if !changed {
            break;
        }
    }

    Ok(KMeansResult {
        centers,
        assignments: assign,
        inertia: *trace.last().unwrap(),
        inertia_trace: trace,
    })
}

fn seed_plus_plus(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.ncols();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut best: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.column(i).as_slice(), points.column(chosen[0]).as_slice()))
        .collect();
    while chosen.len() < k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in best.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            // floating-point leftovers can land on an already-chosen point
            if best[idx] == 0.0 {
                best.iter().position(|&d| d > 0.0).unwrap_or(idx)
            } else {
                idx
            }
        } else {
            // all remaining points coincide with centers; take unused indices in order
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(pick);
        let c = points.column(pick);
        for (i, b) in best.iter_mut().enumerate() {
            let d = sq_dist(points.column(i).as_slice(), c.as_slice());
            if d < *b {
                *b = d;
            }
        }
    }
    DMatrix::from_fn(points.nrows(), k, |r, j| points[(r, chosen[j])])
}

/// Nearest center per point (ties to the lower center index) and the
/// squared distance to it.
pub(crate) fn assign_points(points: &DMatrix<f64>, centers: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    let pairs: Vec<(usize, f64)> = par::map_range(points.ncols(), |i| {
        let p = points.column(i);
        let mut best = (0, f64::INFINITY);
        for j in 0..centers.ncols() {
            let d = sq_dist(p.as_slice(), centers.column(j).as_slice());
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    });
    pairs.into_iter().unzip()
}

fn update_centers(points: &DMatrix<f64>, assign: &[usize], dists: &[f64], k: usize) -> DMatrix<f64> {
    let d = points.nrows();
    let mut sums = DMatrix::zeros(d, k);
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        let mut col = sums.column_mut(a);
        col += points.column(i);
        counts[a] += 1;
    }
    // empty clusters move to the worst-served points, farthest first
    let mut taken = vec![false; points.ncols()];
    for j in 0..k {
        if counts[j] > 0 {
            let mut col = sums.column_mut(j);
            col /= counts[j] as f64;
            continue;
        }
        let far = (0..points.ncols())
            .filter(|&i| !taken[i])
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            })
            .unwrap_or(0);
        taken[far] = true;
        sums.set_column(j, &points.column(far));
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn exact_locations_recovered() {
        let locs = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let pts = DMatrix::from_fn(2, 30, |r, c| locs[c % 3][r]);
        let res = kmeans(&pts, 3, 20, 4).unwrap();
        assert_eq!(res.inertia, 0.0);
        for loc in locs {
            assert!((0..3).any(|j| res.centers[(0, j)] == loc[0] && res.centers[(1, j)] == loc[1]));
        }
    }

    #[test]
    fn single_cluster_is_mean() {
        let pts = DMatrix::from_fn(3, 7, |r, c| (r * 7 + c) as f64 * 0.5 - 3.0);
        let res = kmeans(&pts, 1, 5, 0).unwrap();
        for r in 0..3 {
            let mean = pts.row(r).sum() / 7.0;
            assert!((res.centers[(r, 0)] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn inertia_trace_non_increasing_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = DMatrix::from_fn(4, 200, |_, _| StandardNormal.sample(&mut rng));
        let res = kmeans(&pts, 5, 50, 3).unwrap();
        for w in res.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0]);
        }
        // recompute independently from centers and assignments
        let recomputed: f64 = (0..200)
            .map(|i| {
                let c = res.assignments[i];
                (0..4).map(|r| (pts[(r, i)] - res.centers[(r, c)]).powi(2)).sum::<f64>()
            })
            .sum();
        assert!((recomputed - res.inertia).abs() <= 1e-9 * recomputed.max(1.0));
        assert!(res.assignments.iter().all(|&a| a < 5));
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = DMatrix::from_fn(3, 100, |_, _| StandardNormal.sample(&mut rng));
        let a = kmeans(&pts, 6, 30, 9).unwrap();
        let b = kmeans(&pts, 6, 30, 9).unwrap();
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.assignments, b.assignments);
    }

    #[test]
    fn too_many_clusters() {
        let pts = DMatrix::zeros(2, 3);
        assert!(kmeans(&pts, 4, 5, 0).is_err());
    }

    #[test]
    fn duplicate_points_fill_all_clusters() {
        let pts = DMatrix::from_element(2, 6, 1.0);
        let res = kmeans(&pts, 3, 5, 1).unwrap();
        assert_eq!(res.inertia, 0.0);
        assert_eq!(res.centers.ncols(), 3);
    }
}
