//! Run configuration: flat `key = value` text plus same-named flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mvhash::alm::{AlmConfig, ConstraintMode};
use mvhash::anchor_graph::LandmarkMode;
use mvhash::dataset::CorruptionKind;
use mvhash::eval::ApNormalization;
use mvhash::kernel::{KernelLandmarkMode, QueryKernelMode};
use mvhash::trainer::{CodeSolver, GraphConfig, HyperParams, KernelSetup, OosConfig, Recovery, TrainConfig};

macro_rules! keys {
    ($($key:ident : $help:literal,)*) => {
        /// Every config key as a command-line flag. Flags win over the file.
        #[derive(clap::Args, Debug, Default, Clone)]
        pub struct ConfigFlags {
            /// Flat key = value configuration file.
            #[arg(long)]
            pub config: Option<std::path::PathBuf>,
            $(
                #[arg(long, value_name = "VALUE", allow_hyphen_values = true, help = $help)]
                pub $key: Option<String>,
            )*
        }

        pub const KEYS: &[&str] = &[$(stringify!($key)),*];

        impl ConfigFlags {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$key {
                        out.push((stringify!($key), v.as_str()));
                    }
                )*
                out
            }
        }
    };
}

keys! {
    seed: "Seed for every random choice [0]",
    preset: "Graph preset: cifar10 (L=300, k=3) or nuswide (L=500, k=5)",
    clusters: "synth: number of clusters [10]",
    per_cluster: "synth: samples per cluster [200]",
    dims: "synth: comma-separated view dimensions [32,48]",
    view_noise: "synth: per-view noise standard deviation [1.0]",
    n_queries: "synth: samples split off into a query set [0]",
    corruption: "corrupt: gaussian or block [gaussian]",
    fraction: "corrupt: corrupted entry fraction or block share [0.2]",
    gamma: "Consensus/per-view code agreement weight [1e-4]",
    delta: "Ridge weight on W [1e-6]",
    alpha: "Nuclear-norm weight [0.1]",
    beta: "Kernel regression weight [1]",
    lambda: "Column-sparse error weight [1e-3]",
    bits: "Code length P [32]",
    outer_iters: "Maximum outer iterations [60]",
    objective_tol: "Relative objective change that stops training [1e-4]",
    orthogonalize: "Whiten relaxed codes every iteration [true]",
    recovery: "alm or view-mean [alm]",
    constraint: "Recovered similarity constraint: nonneg or simplex [nonneg]",
    alm_rho: "Penalty growth factor [1.3]",
    alm_mu_max: "Penalty cap [1e8]",
    alm_tol: "Residual tolerance [1e-6]",
    alm_max_iters: "Iteration cap [300]",
    landmarks: "Anchor-graph landmarks L [300]",
    anchors: "Nearest landmarks per sample k [3]",
    landmark_mode: "kmeans or uniform [kmeans]",
    kernel_landmarks: "Kernel landmarks R [same as landmarks]",
    kernel_mode: "kmeans or uniform [kmeans]",
    self_tuning_k: "Neighbor rank for kernel bandwidths [7]",
    query_mode: "concat, view-sum or view-mean [concat]",
    code_solver: "woodbury or cg [woodbury]",
    cg_tol: "Conjugate-gradient tolerance [1e-8]",
    cg_max_iters: "Conjugate-gradient iteration cap [500]",
    base_size: "Prototype base-set size Z, 0 for none [300]",
    oos_neighbors: "Active prototypes per query [25]",
    top_k: "Ranking depth for MAP [100]",
    radius: "Hash-lookup Hamming radius [2]",
    ap_normalization: "database or truncated [database]",
    encoder: "Query encoder: kernel or prototype [kernel]",
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub clusters: usize,
    pub per_cluster: usize,
    pub dims: Vec<usize>,
    pub view_noise: f64,
    pub queries: usize,
    pub corruption: CorruptionKind,
    pub fraction: f64,
    pub train: TrainConfig,
    pub top_k: usize,
    pub radius: usize,
    pub ap_normalization: ApNormalization,
    pub encoder: Encoder,
    /// Resolved `key = value` pairs, in key order.
    resolved: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoder {
    Kernel,
    Prototype,
}

/// Strips comments and blank lines; keys may use `-` or `_`.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", i + 1);
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key {key:?}", i + 1);
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_flags(flags: &ConfigFlags) -> Result<Self> {
        let mut pairs = match &flags.config {
            Some(path) => load_pairs(path)?,
            None => BTreeMap::new(),
        };
        for (k, v) in flags.pairs() {
            pairs.insert(k.to_string(), v.to_string());
        }
        Self::from_pairs(pairs)
    }

    pub fn from_pairs(pairs: BTreeMap<String, String>) -> Result<Self> {
        let mut r = Reader { pairs: &pairs, used: BTreeMap::new() };
        let seed = r.get("seed", 0u64)?;

        let (mut landmarks, mut anchors) = (300usize, 3usize);
        match r.text("preset", "none").as_str() {
            "none" => {}
            "cifar10" => (landmarks, anchors) = (300, 3),
            "nuswide" => (landmarks, anchors) = (500, 5),
            other => bail!("preset: unknown value {other:?} (cifar10, nuswide)"),
        }
        let landmarks = r.get("landmarks", landmarks)?;
        let anchors = r.get("anchors", anchors)?;

        let hyper = HyperParams {
            gamma: r.get("gamma", 1e-4)?,
            delta: r.get("delta", 1e-6)?,
            alpha: r.get("alpha", 0.1)?,
            beta: r.get("beta", 1.0)?,
            lambda: r.get("lambda", 1e-3)?,
            bits: r.get("bits", 32usize)?,
            outer_iters: r.get("outer_iters", 60usize)?,
        };
        let alm = AlmConfig {
            rho: r.get("alm_rho", 1.3)?,
            mu_max: r.get("alm_mu_max", 1e8)?,
            tol: r.get("alm_tol", 1e-6)?,
            max_iters: r.get("alm_max_iters", 300usize)?,
            constraint: match r.text("constraint", "nonneg").as_str() {
                "nonneg" => ConstraintMode::Nonneg,
                "simplex" => ConstraintMode::Simplex,
                other => bail!("constraint: unknown value {other:?} (nonneg, simplex)"),
            },
            ..AlmConfig::default()
        };
        let landmark_mode = match r.text("landmark_mode", "kmeans").as_str() {
            "kmeans" => LandmarkMode::KMeans { iters: 10 },
            "uniform" => LandmarkMode::Uniform,
            other => bail!("landmark_mode: unknown value {other:?} (kmeans, uniform)"),
        };
        let kernel_mode = match r.text("kernel_mode", "kmeans").as_str() {
            "kmeans" => KernelLandmarkMode::KMeans { iters: 10 },
            "uniform" => KernelLandmarkMode::UniformSample,
            other => bail!("kernel_mode: unknown value {other:?} (kmeans, uniform)"),
        };
        let kernel_landmarks = if pairs.contains_key("kernel_landmarks") { Some(r.get("kernel_landmarks", 0usize)?) } else { None };
        let query_mode = QueryKernelMode::parse(&r.text("query_mode", "concat")).map_err(|e| anyhow::anyhow!("query_mode: {e}"))?;
        let code_solver = match r.text("code_solver", "woodbury").as_str() {
            "woodbury" => CodeSolver::Woodbury,
            "cg" => CodeSolver::ConjugateGradient { tol: r.get("cg_tol", 1e-8)?, max_iters: r.get("cg_max_iters", 500usize)? },
            other => bail!("code_solver: unknown value {other:?} (woodbury, cg)"),
        };
        let recovery = match r.text("recovery", "alm").as_str() {
            "alm" => Recovery::Alm,
            "view-mean" => Recovery::ViewMean,
            other => bail!("recovery: unknown value {other:?} (alm, view-mean)"),
        };
        let train = TrainConfig {
            hyper,
            alm,
            graph: GraphConfig { landmarks, k: anchors, mode: landmark_mode, bandwidth: None },
            kernel: KernelSetup { landmarks: kernel_landmarks, mode: kernel_mode, self_tuning_k: r.get("self_tuning_k", 7usize)?, query_mode },
            oos: OosConfig { base_size: r.get("base_size", 300usize)?, neighbors: r.get("oos_neighbors", 25usize)?, ..OosConfig::default() },
            recovery,
            orthogonalize: r.get("orthogonalize", true)?,
            code_solver,
            objective_tol: r.get("objective_tol", 1e-4)?,
            seed,
        };

        let dims_text = r.text("dims", "32,48");
        let dims = dims_text
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("dims: expected comma-separated integers, got {dims_text:?}"))?;
        let corruption = match r.text("corruption", "gaussian").as_str() {
            "gaussian" => CorruptionKind::GaussianFraction,
            "block" => CorruptionKind::BlockZero,
            other => bail!("corruption: unknown value {other:?} (gaussian, block)"),
        };
        let ap_normalization = ApNormalization::parse(&r.text("ap_normalization", "database"))
            .map_err(|e| anyhow::anyhow!("ap_normalization: {e}"))?;
        let encoder = match r.text("encoder", "kernel").as_str() {
            "kernel" => Encoder::Kernel,
            "prototype" => Encoder::Prototype,
            other => bail!("encoder: unknown value {other:?} (kernel, prototype)"),
        };
        let cfg = Self {
            seed,
            clusters: r.get("clusters", 10usize)?,
            per_cluster: r.get("per_cluster", 200usize)?,
            dims,
            view_noise: r.get("view_noise", 1.0)?,
            queries: r.get("n_queries", 0usize)?,
            corruption,
            fraction: r.get("fraction", 0.2)?,
            train,
            top_k: r.get("top_k", 100usize)?,
            radius: r.get("radius", 2usize)?,
            ap_normalization,
            encoder,
            resolved: r.used,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.train;
        t.hyper.validate()?;
        t.alm_config().validate()?;
        if t.graph.landmarks == 0 {
            bail!("landmarks: must be >= 1");
        }
        if t.graph.k == 0 || t.graph.k > t.graph.landmarks {
            bail!("anchors: must lie in 1..={} (landmarks), got {}", t.graph.landmarks, t.graph.k);
        }
        if t.kernel.landmarks == Some(0) {
            bail!("kernel_landmarks: must be >= 1");
        }
        if t.kernel.self_tuning_k == 0 {
            bail!("self_tuning_k: must be >= 1");
        }
        if t.oos.base_size > 0 && t.oos.neighbors == 0 {
            bail!("oos_neighbors: must be >= 1 when base_size > 0");
        }
        if !(t.objective_tol > 0.0) {
            bail!("objective_tol: must be > 0, got {}", t.objective_tol);
        }
        if self.top_k == 0 {
            bail!("top_k: must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            bail!("fraction: must lie in [0, 1], got {}", self.fraction);
        }
        if !(self.view_noise >= 0.0) {
            bail!("view_noise: must be >= 0, got {}", self.view_noise);
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            bail!("dims: every view needs at least one dimension");
        }
        Ok(())
    }

    /// Every resolved key as config text; reparsing it gives the same config.
    pub fn render(&self) -> String {
        self.resolved.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn load_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_pairs(&text).with_context(|| format!("in {}", path.display()))
}

struct Reader<'a> {
    pairs: &'a BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Reader<'_> {
    fn text(&mut self, key: &str, default: &str) -> String {
        let v = self.pairs.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.used.insert(key.to_string(), v.clone());
        v
    }

    fn get<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: std::str::FromStr + ToString,
    {
        match self.pairs.get(key) {
            None => {
                self.used.insert(key.to_string(), default.to_string());
                Ok(default)
            }
            Some(v) => {
                let parsed = v.parse::<T>().map_err(|_| anyhow::anyhow!("{key}: cannot parse {v:?}"))?;
                self.used.insert(key.to_string(), v.clone());
                Ok(parsed)
            }
        }
    }
}
