//! Gaussian RBF similarity between `R` kernel landmarks and the samples,
//! one `R x N` matrix per view.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::MultiViewDataset;
use crate::error::{invalid, Error, Result};
use crate::kmeans::kmeans;
use crate::math::sq_dist;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelLandmarkMode {
    /// K-means in the concatenated feature space, centers split back per view.
    KMeans { iters: usize },
    /// `R` distinct training samples, all views of each.
    UniformSample,
}

/// Kernel landmarks. Block `m` is `d_m x R`; column `r` of every block
/// belongs to the same landmark object.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelLandmarks {
    pub blocks: Vec<DMatrix<f64>>,
}

impl KernelLandmarks {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let r = blocks.first().map(|b| b.ncols()).unwrap_or(0);
        if r == 0 {
            return invalid("kernel landmarks need at least one view and one landmark");
        }
        if blocks.iter().any(|b| b.ncols() != r) {
            return invalid("kernel landmark blocks disagree on the landmark count");
        }
        Ok(Self { blocks })
    }

    pub fn count(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn num_views(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn concat(&self) -> DMatrix<f64> {
        let d: usize = self.dims().iter().sum();
        let mut out = DMatrix::zeros(d, self.count());
        let mut row = 0;
        for b in &self.blocks {
            out.rows_mut(row, b.nrows()).copy_from(b);
            row += b.nrows();
        }
        out
    }
}

pub fn select_kernel_landmarks(
    ds: &MultiViewDataset,
    r: usize,
    mode: KernelLandmarkMode,
    seed: u64,
) -> Result<KernelLandmarks> {
    let n = ds.len();
    if r == 0 || r > n {
        return invalid(format!("need 1 <= kernel landmarks <= samples, got {r} for {n} samples"));
    }
    let blocks = match mode {
        KernelLandmarkMode::UniformSample => {
            let picked = index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n, r).into_vec();
            (0..ds.num_views()).map(|m| ds.view_f64(m).select_columns(&picked)).collect()
        }
        KernelLandmarkMode::KMeans { iters } => {
            let centers = kmeans(&ds.concat_f64(), r, iters.max(1), seed)?.centers;
            let mut row = 0;
            ds.dims()
                .into_iter()
                .map(|d| {
                    let b = centers.rows(row, d).clone_owned();
                    row += d;
                    b
                })
                .collect()
        }
    };
    KernelLandmarks::new(blocks)
}

/// Per-view bandwidths plus one for the concatenated space.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub sigmas: Vec<f64>,
    pub sigma_concat: f64,
    pub self_tuning_k: usize,
}

impl KernelConfig {
    pub fn new(sigmas: Vec<f64>, sigma_concat: f64, self_tuning_k: usize) -> Result<Self> {
        if sigmas.is_empty() || sigmas.iter().chain([&sigma_concat]).any(|s| !(*s > 0.0) || !s.is_finite()) {
            return invalid("kernel bandwidths must be positive and finite");
        }
        Ok(Self { sigmas, sigma_concat, self_tuning_k })
    }

    /// Self-tuned bandwidth for every view and for the concatenated space.
    pub fn self_tuned(ds: &MultiViewDataset, landmarks: &KernelLandmarks, k_st: usize) -> Result<Self> {
        let sigmas = (0..ds.num_views())
            .map(|m| self_tuning_sigma(&ds.view_f64(m), &landmarks.blocks[m], k_st))
            .collect::<Result<Vec<_>>>()?;
        let sigma_concat = self_tuning_sigma(&ds.concat_f64(), &landmarks.concat(), k_st)?;
        Self::new(sigmas, sigma_concat, k_st)
    }
}

/// Median over samples of the distance to the `k_st`-th nearest landmark.
pub fn self_tuning_sigma(view: &DMatrix<f64>, z_view: &DMatrix<f64>, k_st: usize) -> Result<f64> {
    let r = z_view.ncols();
    if k_st == 0 || k_st > r {
        return invalid(format!("self-tuning neighbour {k_st} out of range for {r} landmarks"));
    }
    if view.nrows() != z_view.nrows() {
        return invalid(format!("samples have {} dimensions, landmarks {}", view.nrows(), z_view.nrows()));
    }
    if view.ncols() == 0 {
        return invalid("self-tuning needs at least one sample");
    }
    let mut kth: Vec<f64> = par::map_range(view.ncols(), |i| {
        let x = view.column(i);
        let mut d: Vec<f64> = (0..r).map(|j| sq_dist(x.as_slice(), z_view.column(j).as_slice())).collect();
        d.sort_by(f64::total_cmp);
        d[k_st - 1].sqrt()
    });
    kth.sort_by(f64::total_cmp);
    let mid = kth.len() / 2;
    let median = if kth.len() % 2 == 1 { kth[mid] } else { 0.5 * (kth[mid - 1] + kth[mid]) };
    if median > 0.0 {
        Ok(median)
    } else {
        Err(Error::InvalidData(format!(
            "self-tuned bandwidth is zero: samples coincide with their {k_st}-th nearest landmark"
        )))
    }
}

/// `R x N` matrix of `exp(-||z_r - x_i||^2 / (2 sigma^2))`.
pub fn build_kernel_matrix(view: &DMatrix<f64>, z_view: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid(format!("kernel bandwidth must be positive, got {sigma}"));
    }
    if view.nrows() != z_view.nrows() {
        return invalid(format!("samples have {} dimensions, landmarks {}", view.nrows(), z_view.nrows()));
    }
    let scale = 1.0 / (2.0 * sigma * sigma);
    let r = z_view.ncols();
    let cols: Vec<Vec<f64>> = par::map_range(view.ncols(), |i| {
        let x = view.column(i);
        (0..r).map(|j| (-sq_dist(x.as_slice(), z_view.column(j).as_slice()) * scale).exp()).collect()
    });
    Ok(DMatrix::from_fn(r, view.ncols(), |j, i| cols[i][j]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelizedSimilarity {
    pub per_view: Vec<DMatrix<f64>>,
}

impl KernelizedSimilarity {
    pub fn build(ds: &MultiViewDataset, landmarks: &KernelLandmarks, cfg: &KernelConfig) -> Result<Self> {
        if ds.num_views() != landmarks.num_views() || cfg.sigmas.len() != ds.num_views() {
            return invalid("dataset, landmarks and kernel config disagree on the number of views");
        }
        let per_view = (0..ds.num_views())
            .map(|m| build_kernel_matrix(&ds.view_f64(m), &landmarks.blocks[m], cfg.sigmas[m]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { per_view })
    }

    pub fn sum(&self) -> DMatrix<f64> {
        let mut it = self.per_view.iter();
        let first = it.next().expect("at least one view").clone();
        it.fold(first, |acc, k| acc + k)
    }

    pub fn mean(&self) -> DMatrix<f64> {
        self.sum() / self.per_view.len() as f64
    }
}

/// How a query's landmark similarity vector is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKernelMode {
    /// One RBF over the concatenated features with `sigma_concat`.
    Concat,
    /// Sum of the per-view kernels, the training-side `K = sum_m K^(m)`.
    ViewSum,
    /// Mean of the per-view kernels, on the same scale as each `K^(m)`.
    ViewMean,
}

impl QueryKernelMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Concat => "concat",
            Self::ViewSum => "view-sum",
            Self::ViewMean => "view-mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Self::Concat),
            "view-sum" => Ok(Self::ViewSum),
            "view-mean" => Ok(Self::ViewMean),
            other => invalid(format!("unknown query kernel mode {other:?} (concat, view-sum, view-mean)")),
        }
    }
}

fn check_query(x_q: &[Vec<f64>], landmarks: &KernelLandmarks) -> Result<()> {
    if x_q.len() != landmarks.num_views() {
        return invalid(format!("query has {} views, model expects {}", x_q.len(), landmarks.num_views()));
    }
    for (m, (x, b)) in x_q.iter().zip(&landmarks.blocks).enumerate() {
        if x.len() != b.nrows() {
            return invalid(format!("query view {m} has {} dimensions, expected {}", x.len(), b.nrows()));
        }
    }
    Ok(())
}

/// Similarity of one query (features per view) to every kernel landmark.
pub fn query_kernel_vector(
    x_q: &[Vec<f64>],
    landmarks: &KernelLandmarks,
    cfg: &KernelConfig,
    mode: QueryKernelMode,
) -> Result<DVector<f64>> {
    check_query(x_q, landmarks)?;
    let r = landmarks.count();
    let per_view_sq = |j: usize| -> Vec<f64> {
        landmarks.blocks.iter().zip(x_q).map(|(b, x)| sq_dist(x, b.column(j).as_slice())).collect()
    };
    let m = landmarks.num_views() as f64;
    Ok(DVector::from_fn(r, |j, _| {
        let d = per_view_sq(j);
        match mode {
            QueryKernelMode::Concat => {
                (-d.iter().sum::<f64>() / (2.0 * cfg.sigma_concat * cfg.sigma_concat)).exp()
            }
            QueryKernelMode::ViewSum | QueryKernelMode::ViewMean => {
                let s: f64 = d
                    .iter()
                    .zip(&cfg.sigmas)
                    .map(|(dd, s)| (-dd / (2.0 * s * s)).exp())
                    .sum();
                if mode == QueryKernelMode::ViewMean { s / m } else { s }
            }
        }
    }))
}

/// [`query_kernel_vector`] for every sample of `ds`, as an `R x N` matrix.
pub fn query_kernel_matrix(
    ds: &MultiViewDataset,
    landmarks: &KernelLandmarks,
    cfg: &KernelConfig,
    mode: QueryKernelMode,
) -> Result<DMatrix<f64>> {
    if ds.dims() != landmarks.dims() {
        return invalid(format!("dataset view dims {:?} do not match model dims {:?}", ds.dims(), landmarks.dims()));
    }
    let cols = par::map_range(ds.len(), |i| query_kernel_vector(&ds.sample(i), landmarks, cfg, mode));
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(landmarks.count(), ds.len(), |j, i| cols[i][j]))
}
