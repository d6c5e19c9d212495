//! Out-of-sample encoding: exact inductive embedding over training samples
//! and the prototype approximation over a small set of K-means centers.
//!
//! Weights are `w(x, c) = exp(-||x - c||^2 / sigma^2)` over the nearest
//! active points; embeddings are the weighted mean of the active points'
//! real-valued embeddings.

use nalgebra::{DMatrix, DVector};

use crate::codes::sign;
use crate::dataset::MultiViewDataset;
use crate::error::{invalid, Error, Result};
use crate::kmeans::kmeans;
use crate::math::sq_dist;
use crate::par;
use crate::trainer::{HashModel, OosConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BaseSet {
    /// `d x Z`, concatenated feature space.
    pub centers: DMatrix<f64>,
    /// `Z x P`, pre-sign.
    pub embeddings: DMatrix<f64>,
    pub sigma: f64,
    pub neighbors: usize,
    /// Weight every center instead of the nearest `neighbors`.
    pub full_sum: bool,
}

impl BaseSet {
    pub fn new(centers: DMatrix<f64>, embeddings: DMatrix<f64>, sigma: f64, neighbors: usize, full_sum: bool) -> Result<Self> {
        let z = centers.ncols();
        if z == 0 {
            return invalid("base set needs at least one center");
        }
        if embeddings.nrows() != z {
            return invalid(format!("{z} centers but {} embeddings", embeddings.nrows()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return invalid(format!("base-set bandwidth must be positive, got {sigma}"));
        }
        if neighbors == 0 || neighbors > z {
            return invalid(format!("neighbor count {neighbors} must lie in 1..={z}"));
        }
        if embeddings.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("base-set embeddings must be finite".into()));
        }
        Ok(Self { centers, embeddings, sigma, neighbors, full_sum })
    }

    pub fn len(&self) -> usize {
        self.centers.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bits(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn dim(&self) -> usize {
        self.centers.nrows()
    }

    /// Real-valued prototype embedding of a concatenated feature vector.
    pub fn embed(&self, x_q: &[f64]) -> Result<DVector<f64>> {
        let k = if self.full_sum { self.len() } else { self.neighbors };
        inductive_embed(x_q, &self.centers, &self.embeddings, k, self.sigma)
    }

    /// Code of a query given per view.
    pub fn encode(&self, x_q: &[Vec<f64>]) -> Result<Vec<i8>> {
        prototype_encode(&x_q.concat(), self)
    }
}

/// Median over points of the distance to their `k_st`-th nearest other
/// point. Falls back to the mean positive distance when that median is 0,
/// and to 1 when all points coincide.
pub fn self_tuned_sigma(points: &DMatrix<f64>, k_st: usize) -> Result<f64> {
    let n = points.ncols();
    if n < 2 {
        return Ok(1.0);
    }
    let k = k_st.clamp(1, n - 1);
    let d = points.nrows();
    let cols: Vec<&[f64]> = (0..n).map(|j| &points.as_slice()[j * d..(j + 1) * d]).collect();
    let per_point = par::map_range(n, |i| {
        let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| sq_dist(cols[i], cols[j])).collect();
        d.select_nth_unstable_by(k - 1, f64::total_cmp);
        let kth = d[k - 1].sqrt();
        let pos: Vec<f64> = d.iter().filter(|&&v| v > 0.0).map(|v| v.sqrt()).collect();
        let mean_pos = if pos.is_empty() { 0.0 } else { pos.iter().sum::<f64>() / pos.len() as f64 };
        (kth, mean_pos)
    });
    let mut kth: Vec<f64> = per_point.iter().map(|p| p.0).collect();
    kth.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { kth[n / 2] } else { 0.5 * (kth[n / 2 - 1] + kth[n / 2]) };
    if median > 0.0 {
        return Ok(median);
    }
    let pos: Vec<f64> = per_point.iter().map(|p| p.1).filter(|&v| v > 0.0).collect();
    if pos.is_empty() {
        Ok(1.0)
    } else {
        Ok(pos.iter().sum::<f64>() / pos.len() as f64)
    }
}

/// Indices of the `k` nearest columns of `points`, nearest first, ties to
/// the lower index, with their squared distances.
fn nearest(x_q: &[f64], points: &DMatrix<f64>, k: usize) -> Vec<(usize, f64)> {
    let dim = points.nrows();
    let flat = points.as_slice();
    let mut d: Vec<(usize, f64)> =
        (0..points.ncols()).map(|j| (j, sq_dist(x_q, &flat[j * dim..(j + 1) * dim]))).collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d
}

/// Weighted mean of `y` rows over the `k` nearest columns of `x` (`d x N`).
pub fn inductive_embed(x_q: &[f64], x: &DMatrix<f64>, y: &DMatrix<f64>, k: usize, sigma: f64) -> Result<DVector<f64>> {
    let n = x.ncols();
    if y.nrows() != n {
        return invalid(format!("{n} points but {} embeddings", y.nrows()));
    }
    if x_q.len() != x.nrows() {
        return invalid(format!("query has dimension {}, points have {}", x_q.len(), x.nrows()));
    }
    if k == 0 || k > n {
        return invalid(format!("neighbor count {k} must lie in 1..={n}"));
    }
    if !(sigma > 0.0) {
        return invalid(format!("bandwidth must be positive, got {sigma}"));
    }
    if x_q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("query has a non-finite feature".into()));
    }
    let nn = nearest(x_q, x, k);
    let s2 = sigma * sigma;
    let mut total = 0.0;
    let mut acc = DVector::zeros(y.ncols());
    for &(j, d2) in &nn {
        let w = (-d2 / s2).exp();
        if w > 0.0 {
            acc += y.row(j).transpose() * w;
            total += w;
        }
    }
    if total > 0.0 && total.is_finite() {
        Ok(acc / total)
    } else {
        Ok(y.row(nn[0].0).transpose())
    }
}

pub fn prototype_encode(x_q: &[f64], base: &BaseSet) -> Result<Vec<i8>> {
    Ok(base.embed(x_q)?.iter().map(|&v| sign(v)).collect())
}

/// K-means base set in the concatenated space with query-path embeddings.
pub fn build_base_set(ds: &MultiViewDataset, model: &HashModel, z: usize, cfg: &OosConfig, seed: u64) -> Result<BaseSet> {
    let n = ds.len();
    if z == 0 || z > n {
        return invalid(format!("base-set size {z} must lie in 1..={n}"));
    }
    let concat = ds.concat_f64();
    let km = kmeans(&concat, z, cfg.kmeans_iters, seed)?;
    let centers = km.centers;
    let dims = ds.dims();
    let rows = par::map_range(z, |j| -> Result<Vec<f64>> {
        let c = centers.column(j);
        let mut parts = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &d in &dims {
            parts.push(c.rows(off, d).iter().copied().collect::<Vec<f64>>());
            off += d;
        }
        Ok(model.query_embedding(&parts)?.iter().copied().collect())
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let p = model.bits();
    let embeddings = DMatrix::from_fn(z, p, |j, c| rows[j][c]);
    let sigma = self_tuned_sigma(&centers, model.kernel.self_tuning_k)?;
    BaseSet::new(centers, embeddings, sigma, cfg.neighbors.clamp(1, z), cfg.full_sum)
}

/// Exact inductive reference: every training sample with its query-path
/// embedding, bandwidth self-tuned over the training samples.
pub fn training_base_set(ds: &MultiViewDataset, model: &HashModel, neighbors: usize) -> Result<BaseSet> {
    let points = ds.concat_f64();
    let embeddings = model.embed_dataset(ds)?;
    let sigma = self_tuned_sigma(&points, model.kernel.self_tuning_k)?;
    BaseSet::new(points, embeddings, sigma, neighbors.clamp(1, ds.len()), false)
}
