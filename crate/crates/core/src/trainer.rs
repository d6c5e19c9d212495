//! Alternating optimizer for the kernel hash functions.
//!
//! Conventions: relaxed codes `Y` are `N x P` (one row per sample), the
//! recovered similarity `Khat` is `R x N`, `W` is `R x P` and `b` has `P`
//! entries. A sample's real-valued embedding is `W^T k + b` for its
//! landmark similarity vector `k`; its code is the sign.
//!
//! One outer iteration is: closed-form `(W, b)`, then the per-view codes
//! `Y_m`, then the consensus codes `Y`, then optional symmetric
//! orthogonalization of `Y`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, LU};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::alm::{self, AlmConfig, AlmDiagnostics};
use crate::anchor_graph::{select_graph_landmarks, AnchorGraph, LandmarkMode};
use crate::codes::BinaryCodes;
use crate::dataset::MultiViewDataset;
use crate::error::{invalid, Error, Result};
use crate::kernel::{
    query_kernel_matrix, query_kernel_vector, select_kernel_landmarks, KernelConfig, KernelLandmarkMode,
    KernelLandmarks, KernelizedSimilarity, QueryKernelMode,
};
use crate::math::{self, SvtBackend};
use crate::oos::{self, BaseSet};
use crate::par;

/// Trade-off weights of the training objective and the code length.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Agreement between consensus and per-view codes.
    pub gamma: f64,
    /// Ridge weight on `W`.
    pub delta: f64,
    /// Nuclear-norm weight on `Khat`.
    pub alpha: f64,
    /// Weight of the kernel regression onto the codes.
    pub beta: f64,
    /// Column-sparsity weight on the view errors.
    pub lambda: f64,
    pub bits: usize,
    pub outer_iters: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self { gamma: 1e-4, delta: 1e-6, alpha: 1e-1, beta: 1.0, lambda: 1e-3, bits: 32, outer_iters: 60 }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 {
            return invalid("code length must be >= 1");
        }
        for (name, v) in [("gamma", self.gamma), ("delta", self.delta), ("beta", self.beta), ("lambda", self.lambda)] {
            if !(v >= 0.0) || !v.is_finite() {
                return invalid(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if !(self.alpha > 0.0) {
            return invalid(format!("alpha must be > 0, got {}", self.alpha));
        }
        if self.gamma == 0.0 && self.beta == 0.0 {
            return invalid("gamma and beta cannot both be zero");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub landmarks: usize,
    pub k: usize,
    pub mode: LandmarkMode,
    /// `None` self-scales per view.
    pub bandwidth: Option<f64>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { landmarks: 300, k: 3, mode: LandmarkMode::KMeans { iters: 10 }, bandwidth: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSetup {
    /// `None` uses the graph landmark count.
    pub landmarks: Option<usize>,
    pub mode: KernelLandmarkMode,
    pub self_tuning_k: usize,
    pub query_mode: QueryKernelMode,
}

impl Default for KernelSetup {
    fn default() -> Self {
        Self {
            landmarks: None,
            mode: KernelLandmarkMode::KMeans { iters: 10 },
            self_tuning_k: 7,
            query_mode: QueryKernelMode::Concat,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OosConfig {
    /// Base-set size `Z`; 0 skips building one.
    pub base_size: usize,
    /// Active centers per query.
    pub neighbors: usize,
    pub kmeans_iters: usize,
    /// Sum over every center instead of the nearest `neighbors`.
    pub full_sum: bool,
}

impl Default for OosConfig {
    fn default() -> Self {
        Self { base_size: 300, neighbors: 25, kmeans_iters: 20, full_sum: false }
    }
}

/// Where `Khat` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    /// Low-rank consensus recovery.
    Alm,
    /// The plain view mean; the no-recovery ablation.
    ViewMean,
}

/// Solver for `(2 L_m + gamma I) Y_m = gamma Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodeSolver {
    /// Exact solve through the landmark-sized Woodbury system.
    Woodbury,
    ConjugateGradient { tol: f64, max_iters: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hyper: HyperParams,
    /// Solver settings; `alpha` and `lambda` are taken from `hyper`.
    pub alm: AlmConfig,
    pub graph: GraphConfig,
    pub kernel: KernelSetup,
    pub oos: OosConfig,
    pub recovery: Recovery,
    pub orthogonalize: bool,
    pub code_solver: CodeSolver,
    /// Stop when the relative objective change drops below this.
    pub objective_tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyper: HyperParams::default(),
            alm: AlmConfig::default(),
            graph: GraphConfig::default(),
            kernel: KernelSetup::default(),
            oos: OosConfig::default(),
            recovery: Recovery::Alm,
            orthogonalize: true,
            code_solver: CodeSolver::Woodbury,
            objective_tol: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn alm_config(&self) -> AlmConfig {
        AlmConfig { alpha: self.hyper.alpha, lambda: self.hyper.lambda, ..self.alm.clone() }
    }

    pub fn kernel_landmarks(&self) -> usize {
        self.kernel.landmarks.unwrap_or(self.graph.landmarks)
    }
}

/// Relaxed consensus codes and per-view codes, all `N x P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeState {
    pub y: DMatrix<f64>,
    pub y_view: Vec<DMatrix<f64>>,
}

impl CodeState {
    pub fn new(y: DMatrix<f64>, views: usize) -> Self {
        Self { y_view: vec![y.clone(); views], y }
    }

    pub fn binary(&self) -> BinaryCodes {
        BinaryCodes::from_real(&self.y)
    }
}

/// Learned hash functions plus everything needed to encode new samples.
#[derive(Debug, Clone, PartialEq)]
pub struct HashModel {
    /// `R x P`.
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub landmarks: KernelLandmarks,
    pub kernel: KernelConfig,
    pub query_mode: QueryKernelMode,
    pub base: Option<BaseSet>,
}

impl HashModel {
    pub fn bits(&self) -> usize {
        self.w.ncols()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.landmarks.dims()
    }

    /// `K^T W + 1 b^T` for an `R x n` similarity matrix.
    pub fn project(&self, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if k.nrows() != self.w.nrows() {
            return invalid(format!("similarity has {} rows, model has {} landmarks", k.nrows(), self.w.nrows()));
        }
        let mut out = k.transpose() * &self.w;
        for mut row in out.row_iter_mut() {
            row += self.b.transpose();
        }
        Ok(out)
    }

    /// Codes from the recovered similarity, one per column of `khat`.
    pub fn encode_database(&self, khat: &DMatrix<f64>) -> Result<BinaryCodes> {
        Ok(BinaryCodes::from_real(&self.project(khat)?))
    }

    /// Real-valued embedding of one query through its raw kernel vector.
    pub fn query_embedding(&self, x_q: &[Vec<f64>]) -> Result<DVector<f64>> {
        let k = query_kernel_vector(x_q, &self.landmarks, &self.kernel, self.query_mode)?;
        Ok(self.w.transpose() * k + &self.b)
    }

    pub fn encode_query(&self, x_q: &[Vec<f64>]) -> Result<Vec<i8>> {
        Ok(self.query_embedding(x_q)?.iter().map(|&v| crate::codes::sign(v)).collect())
    }

    /// Query-path embeddings of every sample, `N x P`.
    pub fn embed_dataset(&self, ds: &MultiViewDataset) -> Result<DMatrix<f64>> {
        let k = query_kernel_matrix(ds, &self.landmarks, &self.kernel, self.query_mode)?;
        self.project(&k)
    }

    pub fn encode_dataset(&self, ds: &MultiViewDataset) -> Result<BinaryCodes> {
        Ok(BinaryCodes::from_real(&self.embed_dataset(ds)?))
    }
}

/// Closed-form `(W, b)` minimizing `||Khat^T W + 1 b - Y||^2 + delta ||W||^2`.
pub fn update_wb(khat: &DMatrix<f64>, y: &DMatrix<f64>, delta: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (r, n) = khat.shape();
    if y.nrows() != n {
        return invalid(format!("Khat has {n} columns but Y has {} rows", y.nrows()));
    }
    if n == 0 {
        return invalid("cannot fit hash functions on zero samples");
    }
    if !(delta >= 0.0) {
        return invalid(format!("delta must be >= 0, got {delta}"));
    }
    let k_mean = khat.column_mean();
    let y_mean = y.row_mean().transpose();
    let mut centered = khat.clone();
    for mut col in centered.column_iter_mut() {
        col -= &k_mean;
    }
    let system = &centered * centered.transpose() + DMatrix::identity(r, r) * delta;
    let rhs = &centered * y;
    let w = match Cholesky::new(system.clone()) {
        Some(chol) => chol.solve(&rhs),
        None if delta == 0.0 => {
            return Err(Error::NumericFailure(
                "centered kernel system is singular with delta = 0; use delta > 0".into(),
            ))
        }
        None => LU::new(system)
            .solve(&rhs)
            .ok_or_else(|| Error::NumericFailure("centered kernel system could not be solved".into()))?,
    };
    let b = y_mean - w.transpose() * k_mean;
    Ok((w, b))
}

fn predictions(khat: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut out = khat.transpose() * w;
    for mut row in out.row_iter_mut() {
        row += b.transpose();
    }
    out
}

/// Returns `sqrt(N) Y (Y^T Y)^{-1/2}`, the nearest matrix whose columns are
/// orthogonal with squared norm `N`.
pub fn orthogonalize(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows() as f64;
    let eig = SymmetricEigen::new(y.transpose() * y);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let floor = (top * 1e-12).max(f64::MIN_POSITIVE);
    let inv_sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| 1.0 / l.max(floor).sqrt()));
    let v = &eig.eigenvectors;
    let whiten = v * DMatrix::from_diagonal(&inv_sqrt) * v.transpose();
    y * whiten * n.sqrt()
}

pub fn update_codes(
    state: &CodeState,
    graphs: &[AnchorGraph],
    khat: &DMatrix<f64>,
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    hp: &HyperParams,
    solver: CodeSolver,
    orthogonalize_codes: bool,
) -> Result<CodeState> {
    if graphs.len() != state.y_view.len() {
        return invalid(format!("{} graphs for {} code views", graphs.len(), state.y_view.len()));
    }
    let gamma = hp.gamma;
    let y_view = if gamma > 0.0 {
        let rhs = &state.y * gamma;
        let solved = par::map_range(graphs.len(), |m| -> Result<DMatrix<f64>> {
            match solver {
                CodeSolver::Woodbury => graphs[m].solve_shifted_laplacian(gamma, &rhs),
                CodeSolver::ConjugateGradient { tol, max_iters } => Ok(graphs[m]
                    .solve_shifted_laplacian_cg(gamma, &rhs, Some(&state.y_view[m]), tol, max_iters)?
                    .solution),
            }
        });
        solved.into_iter().collect::<Result<Vec<_>>>()?
    } else {
        state.y_view.clone()
    };
    let m = graphs.len() as f64;
    let denom = gamma * m + hp.beta;
    if denom <= 0.0 {
        return invalid("gamma and beta cannot both be zero");
    }
    let mut y = predictions(khat, w, b) * hp.beta;
    if gamma > 0.0 {
        for ym in &y_view {
            y += ym * gamma;
        }
    }
    y /= denom;
    if orthogonalize_codes {
        y = orthogonalize(&y);
    }
    Ok(CodeState { y, y_view })
}

/// Relaxed training objective. `khat_nuclear` lets callers pass a cached
/// nuclear norm; `None` computes it.
#[allow(clippy::too_many_arguments)]
pub fn objective_with(
    state: &CodeState,
    graphs: &[AnchorGraph],
    khat: &DMatrix<f64>,
    e_list: &[DMatrix<f64>],
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    hp: &HyperParams,
    khat_nuclear: Option<f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for (g, ym) in graphs.iter().zip(&state.y_view) {
        total += g.laplacian_quadratic(ym)?;
        total += hp.gamma * (&state.y - ym).norm_squared();
    }
    let nuclear = match khat_nuclear {
        Some(v) => v,
        None => math::nuclear_norm(khat)?,
    };
    total += hp.alpha * nuclear;
    total += hp.lambda * e_list.iter().map(math::l21_norm).sum::<f64>();
    total += hp.beta * ((predictions(khat, w, b) - &state.y).norm_squared() + hp.delta * w.norm_squared());
    Ok(total)
}

pub fn objective(
    state: &CodeState,
    graphs: &[AnchorGraph],
    khat: &DMatrix<f64>,
    e_list: &[DMatrix<f64>],
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    hp: &HyperParams,
) -> Result<f64> {
    objective_with(state, graphs, khat, e_list, w, b, hp, None)
}

fn nuclear_norm_fast(m: &DMatrix<f64>) -> Result<f64> {
    // thresholding at zero leaves the spectrum intact
    Ok(math::svt_nuclear(m, 0.0, SvtBackend::Auto)?.1)
}

/// Spectral warm start: the leading non-trivial eigenvectors of the mean
/// anchor adjacency `(1/M) sum_m S_m`, found through the stacked
/// landmark-space Gram matrix, scaled to column norm `sqrt(N)`. Missing
/// directions are filled with seeded random columns orthogonal to the rest
/// and to the constant vector.
pub fn spectral_init(graphs: &[AnchorGraph], bits: usize, seed: u64) -> Result<DMatrix<f64>> {
    let Some(first) = graphs.first() else {
        return invalid("spectral initialization needs at least one graph");
    };
    let n = first.num_samples();
    if graphs.iter().any(|g| g.num_samples() != n) {
        return invalid("anchor graphs disagree on the sample count");
    }
    let sizes: Vec<usize> = graphs.iter().map(|g| g.num_landmarks()).collect();
    let offsets: Vec<usize> = sizes.iter().scan(0, |acc, &s| { let o = *acc; *acc += s; Some(o) }).collect();
    let total: usize = sizes.iter().sum();
    let mm = graphs.len() as f64;

    let mut gram = DMatrix::zeros(total, total);
    for (a, ga) in graphs.iter().enumerate() {
        for (bi, gb) in graphs.iter().enumerate() {
            if a == bi {
                gram.view_mut((offsets[a], offsets[a]), (sizes[a], sizes[a])).copy_from(ga.reduced_gram());
                continue;
            }
            let mut block = DMatrix::zeros(sizes[a], sizes[bi]);
            for i in 0..n {
                for (ja, wa) in ga.row(i) {
                    for (jb, wb) in gb.row(i) {
                        block[(ja, jb)] += wa * wb;
                    }
                }
            }
            for ja in 0..sizes[a] {
                for jb in 0..sizes[bi] {
                    block[(ja, jb)] /= (ga.lambda()[ja] * gb.lambda()[jb]).sqrt();
                }
            }
            gram.view_mut((offsets[a], offsets[bi]), (sizes[a], sizes[bi])).copy_from(&block);
        }
    }
    gram /= mm;

    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));

    let scale = (n as f64).sqrt();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(bits);
    // the leading eigenvector is the constant one
    for &idx in order.iter().skip(1) {
        if cols.len() == bits {
            break;
        }
        let s = eig.eigenvalues[idx];
        if s <= 1e-10 {
            break;
        }
        let v = eig.eigenvectors.column(idx);
        let mut y = DVector::zeros(n);
        for (g, off) in graphs.iter().zip(&offsets) {
            let part = DMatrix::from_column_slice(g.num_landmarks(), 1, &v.as_slice()[*off..*off + g.num_landmarks()]);
            y += g.g_times(&part).column(0);
        }
        y /= (mm * s).sqrt();
        let norm = y.norm();
        if norm > 0.0 {
            cols.push(y * (scale / norm));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ones = DVector::from_element(n, 1.0 / scale);
    let mut attempts = 0;
    while cols.len() < bits {
        attempts += 1;
        if attempts > 10 * bits + 10 {
            return Err(Error::NumericFailure(format!(
                "could not complete {bits} independent code columns from {n} samples"
            )));
        }
        let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        v -= &ones * ones.dot(&v);
        for c in &cols {
            v -= c * (c.dot(&v) / (scale * scale));
        }
        let norm = v.norm();
        if norm > 1e-8 * scale {
            cols.push(v * (scale / norm));
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Outcome of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: HashModel,
    pub codes: CodeState,
    pub khat: DMatrix<f64>,
    pub e: Vec<DMatrix<f64>>,
    pub alm: Option<AlmDiagnostics>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl TrainOutput {
    /// Database codes from the recovered similarity.
    pub fn database_codes(&self) -> Result<BinaryCodes> {
        self.model.encode_database(&self.khat)
    }

    pub fn objective_csv(&self) -> String {
        let mut s = String::from("iteration,objective,relative_change\n");
        for (i, f) in self.objective_trace.iter().enumerate() {
            let rel = if i == 0 { f64::NAN } else { relative_change(self.objective_trace[i - 1], *f) };
            s.push_str(&format!("{},{:e},{:e}\n", i + 1, f, rel));
        }
        s
    }
}

fn relative_change(prev: f64, next: f64) -> f64 {
    (next - prev).abs() / prev.abs().max(f64::MIN_POSITIVE)
}

/// Training state between outer iterations.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub graphs: Vec<AnchorGraph>,
    pub landmarks: KernelLandmarks,
    pub kernel_cfg: KernelConfig,
    pub kernels: KernelizedSimilarity,
    pub khat: DMatrix<f64>,
    pub e: Vec<DMatrix<f64>>,
    pub alm: Option<AlmDiagnostics>,
    pub codes: CodeState,
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    khat_nuclear: f64,
}

impl Trainer {
    /// Landmarks, anchor graphs, kernels, recovery and the code warm start.
    pub fn prepare(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.hyper.validate()?;
        let alm_cfg = cfg.alm_config();
        alm_cfg.validate()?;
        let n = ds.len();
        let l = cfg.graph.landmarks;
        let r = cfg.kernel_landmarks();
        if n < l || n < r {
            return invalid(format!("{n} samples cannot support {l} graph landmarks and {r} kernel landmarks"));
        }

        let views = ds.views_f64();
        let graphs = par::map_range(views.len(), |m| -> Result<AnchorGraph> {
            let u = select_graph_landmarks(&views[m], l, cfg.graph.mode, cfg.seed.wrapping_add(m as u64 + 1))?;
            AnchorGraph::build(&views[m], &u, cfg.graph.k, cfg.graph.bandwidth)
        });
        let graphs = graphs.into_iter().collect::<Result<Vec<_>>>()?;

        let landmarks = select_kernel_landmarks(ds, r, cfg.kernel.mode, cfg.seed)?;
        let kernel_cfg = KernelConfig::self_tuned(ds, &landmarks, cfg.kernel.self_tuning_k)?;
        let kernels = KernelizedSimilarity::build(ds, &landmarks, &kernel_cfg)?;

        let (khat, e, alm_diag) = match cfg.recovery {
            Recovery::Alm => {
                let rec = alm::recover(&kernels.per_view, &alm_cfg)?;
                alm::check_recovery(&rec)?;
                (rec.khat, rec.e, Some(rec.diagnostics))
            }
            Recovery::ViewMean => {
                let mean = kernels.mean();
                let e = kernels.per_view.iter().map(|k| k - &mean).collect();
                (mean, e, None)
            }
        };
        let khat_nuclear = nuclear_norm_fast(&khat)?;

        let y0 = spectral_init(&graphs, cfg.hyper.bits, cfg.seed)?;
        let codes = CodeState::new(y0, graphs.len());
        let p = cfg.hyper.bits;
        Ok(Self {
            cfg: cfg.clone(),
            graphs,
            landmarks,
            kernel_cfg,
            kernels,
            khat,
            e,
            alm: alm_diag,
            codes,
            w: DMatrix::zeros(r, p),
            b: DVector::zeros(p),
            objective_trace: Vec::new(),
            converged: false,
            khat_nuclear,
        })
    }

    /// One outer iteration; returns the objective after it.
    pub fn step(&mut self) -> Result<f64> {
        let hp = &self.cfg.hyper;
        let (w, b) = update_wb(&self.khat, &self.codes.y, hp.delta)?;
        self.w = w;
        self.b = b;
        self.codes = update_codes(
            &self.codes,
            &self.graphs,
            &self.khat,
            &self.w,
            &self.b,
            hp,
            self.cfg.code_solver,
            self.cfg.orthogonalize,
        )?;
        let f = objective_with(&self.codes, &self.graphs, &self.khat, &self.e, &self.w, &self.b, hp, Some(self.khat_nuclear))?;
        if let Some(&prev) = self.objective_trace.last() {
            if relative_change(prev, f) < self.cfg.objective_tol {
                self.converged = true;
            }
        }
        self.objective_trace.push(f);
        Ok(f)
    }

    pub fn run_outer(&mut self) -> Result<()> {
        while self.objective_trace.len() < self.cfg.hyper.outer_iters && !self.converged {
            self.step()?;
        }
        Ok(())
    }

    /// Final `(W, b)` fit to the last codes, plus the base set.
    pub fn finish(mut self, ds: &MultiViewDataset) -> Result<TrainOutput> {
        let (w, b) = update_wb(&self.khat, &self.codes.y, self.cfg.hyper.delta)?;
        self.w = w;
        self.b = b;
        let mut model = HashModel {
            w: self.w,
            b: self.b,
            landmarks: self.landmarks,
            kernel: self.kernel_cfg,
            query_mode: self.cfg.kernel.query_mode,
            base: None,
        };
        let oc = &self.cfg.oos;
        if oc.base_size > 0 {
            let z = oc.base_size.min(ds.len());
            model.base = Some(oos::build_base_set(ds, &model, z, oc, self.cfg.seed)?);
        }
        Ok(TrainOutput {
            model,
            codes: self.codes,
            khat: self.khat,
            e: self.e,
            alm: self.alm,
            objective_trace: self.objective_trace,
            converged: self.converged,
        })
    }
}

pub fn train(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    let mut trainer = Trainer::prepare(ds, cfg)?;
    trainer.run_outer()?;
    trainer.finish(ds)
}
