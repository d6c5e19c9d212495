//! Anchor graphs: each sample links to its `k` nearest landmarks with
//! normalized Gaussian weights, giving a row-stochastic sparse `N x L`
//! matrix `F`. The implied adjacency `S = F diag(F^T 1)^{-1} F^T` is never
//! materialized; products with it cost `O(N k)` per column.

use nalgebra::{Cholesky, DMatrix};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::kmeans::kmeans;
use crate::math::sq_dist;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandmarkMode {
    /// Lloyd's K-means capped at `iters` iterations.
    KMeans { iters: usize },
    /// Sample distinct data points.
    Uniform,
}

/// Picks `l` landmarks from the columns of `view` (`d x N`). Returns them
/// as the columns of a `d x l` matrix.
pub fn select_graph_landmarks(view: &DMatrix<f64>, l: usize, mode: LandmarkMode, seed: u64) -> Result<DMatrix<f64>> {
    let n = view.ncols();
    if l == 0 || l > n {
        return invalid(format!("need 1 <= landmarks <= samples, got {l} landmarks for {n} samples"));
    }
    match mode {
        LandmarkMode::KMeans { iters } => Ok(kmeans(view, l, iters.max(1), seed)?.centers),
        LandmarkMode::Uniform => {
            let picked = index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n, l).into_vec();
            Ok(view.select_columns(&picked))
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnchorGraph {
    /// `d x L`, one landmark per column.
    pub landmarks: DMatrix<f64>,
    pub k: usize,
    /// Gaussian bandwidth `t` in `exp(-D^2 / t)`.
    pub bandwidth: f64,
    n: usize,
    /// Row-major `N x k` landmark indices and weights of `F`.
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    /// Column sums of `F` (the diagonal of Lambda).
    lambda: Vec<f64>,
    /// `G^T G` with `G = F Lambda^{-1/2}`.
    reduced_gram: DMatrix<f64>,
}

/// Mean over samples of the squared distance to the `k`-th nearest landmark.
pub fn default_bandwidth(view: &DMatrix<f64>, landmarks: &DMatrix<f64>, k: usize) -> Result<f64> {
    check_k(k, landmarks.ncols())?;
    let kth: Vec<f64> = par::map_range(view.ncols(), |i| {
        let mut d = landmark_distances(view.column(i).as_slice(), landmarks);
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d[k - 1].0
    });
    let t = kth.iter().sum::<f64>() / kth.len().max(1) as f64;
    if t > 0.0 {
        Ok(t)
    } else {
        Err(Error::InvalidData("all samples coincide with their landmarks; anchor bandwidth is zero".into()))
    }
}

fn check_k(k: usize, l: usize) -> Result<()> {
    if k == 0 || k > l {
        return invalid(format!("need 1 <= k <= landmarks, got k = {k} with {l} landmarks"));
    }
    Ok(())
}

fn landmark_distances(x: &[f64], landmarks: &DMatrix<f64>) -> Vec<(f64, usize)> {
    (0..landmarks.ncols())
        .map(|j| (sq_dist(x, landmarks.column(j).as_slice()), j))
        .collect()
}

impl AnchorGraph {
    /// Builds the graph; `bandwidth = None` uses [`default_bandwidth`].
    /// Landmarks that end up with no incident sample are dropped and the
    /// graph is rebuilt on the remainder.
    pub fn build(view: &DMatrix<f64>, landmarks: &DMatrix<f64>, k: usize, bandwidth: Option<f64>) -> Result<Self> {
        crate::math::ensure_finite(view, "anchor graph input")?;
        let mut landmarks = landmarks.clone();
        loop {
            check_k(k, landmarks.ncols())?;
            let t = match bandwidth {
                Some(t) if t > 0.0 && t.is_finite() => t,
                Some(t) => return invalid(format!("anchor bandwidth must be positive, got {t}")),
                None => default_bandwidth(view, &landmarks, k)?,
            };
            let graph = build_truncated_affinity(view, &landmarks, k, t)?;
            let empty: Vec<usize> = (0..graph.lambda.len()).filter(|&j| graph.lambda[j] <= 0.0).collect();
            if empty.is_empty() {
                return Ok(graph);
            }
            let keep: Vec<usize> = (0..landmarks.ncols()).filter(|j| !empty.contains(j)).collect();
            landmarks = landmarks.select_columns(&keep);
        }
    }

    pub fn num_samples(&self) -> usize {
        self.n
    }

    pub fn num_landmarks(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Nonzeros of row `i` of `F` as `(landmark, weight)` pairs, nearest first.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let s = i * self.k;
        self.neighbors[s..s + self.k].iter().copied().zip(self.weights[s..s + self.k].iter().copied())
    }

    pub fn dense_f(&self) -> DMatrix<f64> {
        let mut f = DMatrix::zeros(self.n, self.num_landmarks());
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                f[(i, j)] = w;
            }
        }
        f
    }

    /// `S` as a dense `N x N` matrix. Only for small graphs.
    pub fn dense_adjacency(&self) -> DMatrix<f64> {
        let f = self.dense_f();
        let inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.lambda.len(),
            self.lambda.iter().map(|l| 1.0 / l),
        ));
        &f * inv * f.transpose()
    }

    fn check_rows(&self, v: &DMatrix<f64>) -> Result<()> {
        if v.nrows() != self.n {
            return invalid(format!("operand has {} rows, graph has {} samples", v.nrows(), self.n));
        }
        Ok(())
    }

    /// `F^T V` (`L x c`).
    fn f_transpose_times(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.num_landmarks(), v.ncols());
        for c in 0..v.ncols() {
            let col = v.column(c);
            let mut acc = out.column_mut(c);
            for i in 0..self.n {
                let x = col[i];
                for (j, w) in self.row(i) {
                    acc[j] += w * x;
                }
            }
        }
        out
    }

    /// `F T` (`N x c`) for an `L x c` matrix `T`.
    fn f_times(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        let cols: Vec<Vec<f64>> = par::map_range(t.ncols(), |c| {
            let tc = t.column(c);
            (0..self.n).map(|i| self.row(i).map(|(j, w)| w * tc[j]).sum()).collect()
        });
        DMatrix::from_fn(self.n, t.ncols(), |i, c| cols[c][i])
    }

    /// `S V` computed as `F (Lambda^{-1} (F^T V))`.
    pub fn adjacency_apply(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(v)?;
        let mut t = self.f_transpose_times(v);
        for (j, mut row) in t.row_iter_mut().enumerate() {
            row /= self.lambda[j];
        }
        Ok(self.f_times(&t))
    }

    /// `(I - S) V`. Rows of `S` sum to one, so the degree matrix is `I`.
    pub fn laplacian_apply(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(v - self.adjacency_apply(v)?)
    }

    /// `sum_ij S_ij ||v_i - v_j||^2 = 2 tr(V^T (I - S) V)`.
    pub fn laplacian_quadratic(&self, v: &DMatrix<f64>) -> Result<f64> {
        let lv = self.laplacian_apply(v)?;
        Ok(2.0 * v.dot(&lv))
    }

    /// `G^T G` with `G = F Lambda^{-1/2}`; shares its nonzero spectrum with `S`.
    pub fn reduced_gram(&self) -> &DMatrix<f64> {
        &self.reduced_gram
    }

    /// `F Lambda^{-1/2} T` for an `L x c` matrix `T`.
    pub fn g_times(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        let mut scaled = t.clone();
        for (j, mut row) in scaled.row_iter_mut().enumerate() {
            row /= self.lambda[j].sqrt();
        }
        self.f_times(&scaled)
    }

    /// `Lambda^{-1/2} F^T V`.
    pub fn g_transpose_times(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut t = self.f_transpose_times(v);
        for (j, mut row) in t.row_iter_mut().enumerate() {
            row /= self.lambda[j].sqrt();
        }
        t
    }

    /// Solves `(2 (I - S) + gamma I) X = rhs` exactly through the
    /// `L x L` Woodbury identity, using `S = G G^T`.
    pub fn solve_shifted_laplacian(&self, gamma: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(rhs)?;
        if !(gamma > 0.0) {
            return invalid(format!("shifted Laplacian solve needs gamma > 0, got {gamma}"));
        }
        let c = 2.0 + gamma;
        let l = self.num_landmarks();
        let inner = DMatrix::identity(l, l) * c - &self.reduced_gram * 2.0;
        let chol = Cholesky::new(inner).ok_or_else(|| {
            Error::NumericFailure(format!("reduced Laplacian system is not positive definite (gamma = {gamma})"))
        })?;
        let gt_rhs = self.g_transpose_times(rhs);
        let z = chol.solve(&gt_rhs);
        Ok((rhs + self.g_times(&z) * 2.0) / c)
    }

    /// Same system by conjugate gradients on the factored operator, one
    /// independent recurrence per right-hand-side column.
    pub fn solve_shifted_laplacian_cg(
        &self,
        gamma: f64,
        rhs: &DMatrix<f64>,
        x0: Option<&DMatrix<f64>>,
        tol: f64,
        max_iters: usize,
    ) -> Result<CgOutcome> {
        self.check_rows(rhs)?;
        if !(gamma > 0.0) {
            return invalid(format!("shifted Laplacian solve needs gamma > 0, got {gamma}"));
        }
        let op = |v: &DMatrix<f64>| -> DMatrix<f64> {
            let lv = self.laplacian_apply(v).expect("shape checked");
            lv * 2.0 + v * gamma
        };
        let mut x = x0.cloned().unwrap_or_else(|| DMatrix::zeros(rhs.nrows(), rhs.ncols()));
        let mut r = rhs - op(&x);
        let mut p = r.clone();
        let cols = rhs.ncols();
        let rhs_norm: Vec<f64> = rhs.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE)).collect();
        let mut rr: Vec<f64> = r.column_iter().map(|c| c.norm_squared()).collect();
        let mut iters = 0;
        let rel = |rr: &[f64]| (0..cols).map(|c| rr[c].sqrt() / rhs_norm[c]).fold(0.0, f64::max);
        while rel(&rr) > tol && iters < max_iters {
            let ap = op(&p);
            for c in 0..cols {
                let denom = p.column(c).dot(&ap.column(c));
                if rr[c] == 0.0 || denom <= 0.0 {
                    continue;
                }
                let alpha = rr[c] / denom;
                x.column_mut(c).axpy(alpha, &p.column(c), 1.0);
                r.column_mut(c).axpy(-alpha, &ap.column(c), 1.0);
                let next = r.column(c).norm_squared();
                let beta = next / rr[c];
                let rc = r.column(c).clone_owned();
                let mut pc = p.column_mut(c);
                pc *= beta;
                pc += rc;
                rr[c] = next;
            }
            iters += 1;
        }
        let residual = rel(&rr);
        if residual > tol {
            return Err(Error::NumericFailure(format!(
                "conjugate gradients stopped after {iters} iterations with relative residual {residual:.3e} (tolerance {tol:.1e})"
            )));
        }
        Ok(CgOutcome { solution: x, iterations: iters, residual })
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Truncated affinity with a fixed bandwidth. Distance ties go to the
/// lower landmark index. Unlike [`AnchorGraph::build`] this keeps landmarks
/// with zero mass, so `lambda` may contain zeros.
pub fn build_truncated_affinity(view: &DMatrix<f64>, landmarks: &DMatrix<f64>, k: usize, t: f64) -> Result<AnchorGraph> {
    let l = landmarks.ncols();
    check_k(k, l)?;
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("anchor bandwidth must be positive, got {t}"));
    }
    if view.nrows() != landmarks.nrows() {
        return invalid(format!(
            "samples have {} dimensions, landmarks have {}",
            view.nrows(),
            landmarks.nrows()
        ));
    }
    let n = view.ncols();
    let rows: Vec<Vec<(usize, f64)>> = par::map_range(n, |i| {
        let mut d = landmark_distances(view.column(i).as_slice(), landmarks);
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &d[..k];
        // shift by the nearest distance; the normalization cancels it
        let base = nearest[0].0;
        let w: Vec<f64> = nearest.iter().map(|&(dist, _)| (-(dist - base) / t).exp()).collect();
        let total: f64 = w.iter().sum();
        nearest.iter().zip(w).map(|(&(_, j), w)| (j, w / total)).collect()
    });
    let mut neighbors = Vec::with_capacity(n * k);
    let mut weights = Vec::with_capacity(n * k);
    let mut lambda = vec![0.0; l];
    for row in rows {
        for (j, w) in row {
            neighbors.push(j);
            weights.push(w);
            lambda[j] += w;
        }
    }
    let mut reduced_gram = DMatrix::zeros(l, l);
    for i in 0..n {
        let s = i * k;
        for a in 0..k {
            let (ja, wa) = (neighbors[s + a], weights[s + a]);
            for b in 0..k {
                let (jb, wb) = (neighbors[s + b], weights[s + b]);
                reduced_gram[(ja, jb)] += wa * wb;
            }
        }
    }
    for a in 0..l {
        for b in 0..l {
            let denom = (lambda[a] * lambda[b]).sqrt();
            reduced_gram[(a, b)] = if denom > 0.0 { reduced_gram[(a, b)] / denom } else { 0.0 };
        }
    }
    Ok(AnchorGraph {
        landmarks: landmarks.clone(),
        k,
        bandwidth: t,
        n,
        neighbors,
        weights,
        lambda,
        reduced_gram,
    })
}
