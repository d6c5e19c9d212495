//! Browser demo: planted low-rank recovery, retrieval on synthetic data, and
//! the singular-value spectrum before and after recovery. Every export takes
//! plain numbers and returns a JSON string.

use mvhash::alm::{self, AlmConfig};
use mvhash::dataset::{corrupt, split, synth_multiview, CorruptionKind, CorruptionSpec};
use mvhash::eval::{self, ApNormalization, PrPoint};
use mvhash::math;
use mvhash::trainer::{self, GraphConfig, HyperParams, OosConfig, Recovery, TrainConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct RecoveryRun {
    pub residual: Vec<f64>,
    pub coupling: Vec<f64>,
    pub iterations: usize,
    pub relative_error: f64,
    pub detected: usize,
    pub corrupted: usize,
    /// Singular values of the true matrix, the corrupted view mean and the
    /// recovered matrix.
    pub spectrum_truth: Vec<f64>,
    pub spectrum_mean: Vec<f64>,
    pub spectrum_recovered: Vec<f64>,
}

/// Planted instance: a rank-`rank` nonnegative `rows x cols` matrix seen
/// through three views, each with `corrupt_pct` percent of its columns
/// perturbed by uniform noise of width `magnitude`.
pub fn planted_recovery(rows: usize, cols: usize, rank: usize, corrupt_pct: f64, magnitude: f64, alpha: f64, lambda: f64, seed: u64) -> Result<RecoveryRun, String> {
    if rows == 0 || cols == 0 || rank == 0 {
        return Err("rows, cols and rank must be positive".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = DMatrix::from_fn(rows, rank, |_, _| rng.random::<f64>());
    let v = DMatrix::from_fn(rank, cols, |_, _| rng.random::<f64>());
    let truth = &u * &v;
    let n_bad = ((corrupt_pct / 100.0 * cols as f64).round() as usize).min(cols);
    let mut views = Vec::new();
    let mut bad = Vec::new();
    for _ in 0..3 {
        let mut k = truth.clone();
        let mut idx: Vec<usize> = (0..cols).collect();
        for i in 0..n_bad {
            let j = rng.random_range(i..cols);
            idx.swap(i, j);
        }
        for &c in &idx[..n_bad] {
            for r in 0..rows {
                k[(r, c)] = (k[(r, c)] + magnitude * (rng.random::<f64>() - 0.5)).max(0.0);
            }
        }
        bad.push(idx[..n_bad].to_vec());
        views.push(k);
    }
    let cfg = AlmConfig { alpha, lambda, ..AlmConfig::default() };
    let rec = alm::recover(&views, &cfg).map_err(|e| e.to_string())?;
    let mut detected = 0;
    for (m, cols_m) in bad.iter().enumerate() {
        let norms: Vec<f64> = rec.e[m].column_iter().map(|c| c.norm()).collect();
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        detected += cols_m.iter().filter(|c| order[..n_bad].contains(c)).count();
    }
    let mean = views.iter().skip(1).fold(views[0].clone(), |acc, k| acc + k) / 3.0;
    let spectrum = |m: &DMatrix<f64>| -> Result<Vec<f64>, String> {
        Ok(math::singular_values(m).map_err(|e| e.to_string())?.iter().take(12).copied().collect())
    };
    Ok(RecoveryRun {
        relative_error: (&rec.khat - &truth).norm() / truth.norm(),
        residual: rec.diagnostics.recon_residual.clone(),
        coupling: rec.diagnostics.coupling_residual.clone(),
        iterations: rec.diagnostics.iterations,
        detected,
        corrupted: 3 * n_bad,
        spectrum_truth: spectrum(&truth)?,
        spectrum_mean: spectrum(&mean)?,
        spectrum_recovered: spectrum(&rec.khat)?,
    })
}

#[derive(Debug, Serialize)]
pub struct RetrievalSide {
    pub map: f64,
    pub lookup: f64,
    pub pr_curve: Vec<PrPoint>,
    pub objective: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct RetrievalRun {
    pub full: RetrievalSide,
    pub ablation: RetrievalSide,
    pub random_map: f64,
    pub database: usize,
    pub queries: usize,
}

/// Trains on synthetic 10-cluster two-view data with `corrupt_pct` percent
/// of entries hit by Gaussian noise, with and without recovery, and scores
/// held-out queries.
pub fn retrieval(per_cluster: usize, noise: f64, corrupt_pct: f64, bits: usize, lambda: f64, seed: u64) -> Result<RetrievalRun, String> {
    let err = |e: mvhash::error::Error| e.to_string();
    let ds = synth_multiview(10, per_cluster, &[32, 48], noise, seed).map_err(err)?;
    let spec = CorruptionSpec::new(CorruptionKind::GaussianFraction, corrupt_pct / 100.0, seed + 1).map_err(err)?;
    let ds = corrupt(&ds, &spec).map_err(err)?;
    let n_query = (ds.len() / 10).max(1);
    let (db, q) = split(&ds, n_query, seed + 2).map_err(err)?;
    let (dl, ql) = (db.labels().unwrap_or_default(), q.labels().unwrap_or_default());
    let landmarks = 100.min(db.len());
    let run = |recovery: Recovery| -> Result<RetrievalSide, String> {
        let cfg = TrainConfig {
            hyper: HyperParams { bits, lambda, ..HyperParams::default() },
            graph: GraphConfig { landmarks, ..GraphConfig::default() },
            oos: OosConfig { base_size: 0, ..OosConfig::default() },
            recovery,
            seed,
            ..TrainConfig::default()
        };
        let out = trainer::train(&db, &cfg).map_err(err)?;
        let dbc = out.database_codes().map_err(err)?;
        let qc = out.model.encode_dataset(&q).map_err(err)?;
        let report = eval::evaluate(&qc, &dbc, ql, dl, 100, 2, ApNormalization::Database).map_err(err)?;
        Ok(RetrievalSide { map: report.map, lookup: report.lookup.mean, pr_curve: report.pr_curve, objective: out.objective_trace })
    };
    let full = run(Recovery::Alm)?;
    let ablation = run(Recovery::ViewMean)?;
    let rq = eval::random_codes(q.len(), bits, seed);
    let rd = eval::random_codes(db.len(), bits, seed + 1);
    let random_map = eval::mean_average_precision(&rq, &rd, ql, dl, 100, ApNormalization::Database).map_err(err)?;
    Ok(RetrievalRun { full, ablation, random_map, database: db.len(), queries: q.len() })
}

#[derive(Debug, Serialize)]
pub struct ShrinkCurve {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub rank_before: usize,
    pub rank_after: usize,
}

/// Singular values of a random low-rank-plus-noise matrix before and after
/// singular value thresholding at `tau`.
pub fn shrink_curve(tau: f64, seed: u64) -> Result<ShrinkCurve, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(30, 4, |_, _| rng.random::<f64>());
    let b = DMatrix::from_fn(4, 60, |_, _| rng.random::<f64>());
    let m = a * b + DMatrix::from_fn(30, 60, |_, _| 0.3 * (rng.random::<f64>() - 0.5));
    let q = math::svt(&m, tau).map_err(|e| e.to_string())?;
    let sv = |x: &DMatrix<f64>| -> Result<Vec<f64>, String> { Ok(math::singular_values(x).map_err(|e| e.to_string())?.iter().copied().collect()) };
    let rank = |x: &DMatrix<f64>| math::numerical_rank(x, 1e-9).unwrap_or(0);
    Ok(ShrinkCurve { before: sv(&m)?, after: sv(&q)?, rank_before: rank(&m), rank_after: rank(&q) })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = plantedRecovery)]
#[allow(clippy::too_many_arguments)]
pub fn planted_recovery_js(rows: usize, cols: usize, rank: usize, corrupt_pct: f64, magnitude: f64, alpha: f64, lambda: f64, seed: u32) -> Result<String, JsValue> {
    to_js(planted_recovery(rows, cols, rank, corrupt_pct, magnitude, alpha, lambda, seed as u64))
}

#[wasm_bindgen(js_name = retrieval)]
pub fn retrieval_js(per_cluster: usize, noise: f64, corrupt_pct: f64, bits: usize, lambda: f64, seed: u32) -> Result<String, JsValue> {
    to_js(retrieval(per_cluster, noise, corrupt_pct, bits, lambda, seed as u64))
}

#[wasm_bindgen(js_name = shrinkCurve)]
pub fn shrink_curve_js(tau: f64, seed: u32) -> Result<String, JsValue> {
    to_js(shrink_curve(tau, seed as u64))
}
