//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use mvhash::codes::BinaryCodes;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn uniform(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random::<f64>())
}

pub fn nuclear(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.sum()
}

pub fn svt_objective(q: &DMatrix<f64>, m: &DMatrix<f64>, tau: f64) -> f64 {
    tau * nuclear(q) + 0.5 * (q - m).norm_squared()
}

/// Largest amount by which a random perturbation of `q` improves the SVT
/// objective; positive means `q` is not optimal.
pub fn svt_perturbation_gap(q: &DMatrix<f64>, m: &DMatrix<f64>, tau: f64, trials: usize, eps: f64, rng: &mut ChaCha8Rng) -> f64 {
    let base = svt_objective(q, m, tau);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let p = gaussian(q.nrows(), q.ncols(), rng);
        let p = &p * (eps / p.norm());
        worst = worst.max(base - svt_objective(&(q + p), m, tau));
    }
    worst
}

/// Best value of `kappa ||e|| + 0.5 ||e - c||^2` over `e = s c`, `s` on a grid.
pub fn l21_column_grid(c: &[f64], kappa: f64, steps: usize) -> f64 {
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    (0..=steps)
        .map(|i| {
            let s = i as f64 / steps as f64;
            kappa * s * norm + 0.5 * (1.0 - s).powi(2) * norm * norm
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn l21_objective_column(e: &[f64], c: &[f64], kappa: f64) -> f64 {
    let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    kappa * n + 0.5 * e.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Simplex projection by bisection on the threshold of `max(v - theta, 0)`.
pub fn simplex_bisection(v: &[f64]) -> Vec<f64> {
    let total = |t: f64| v.iter().map(|x| (x - t).max(0.0)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|x| (x - t).max(0.0)).collect()
}

/// Closest point of a grid over the 3-simplex.
pub fn simplex_grid3(v: &[f64], steps: usize) -> Vec<f64> {
    let mut best = (f64::INFINITY, vec![0.0; 3]);
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let w = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
            let d: f64 = w.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.0 {
                best = (d, w.to_vec());
            }
        }
    }
    best.1
}

pub fn random_signs(n: usize, bits: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<i8>> {
    (0..n).map(|_| (0..bits).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()).collect()
}

pub fn hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Reference MAP: explicit distances, a full sort on (distance, index), and
/// the AP formula with the whole-database denominator or its top-k cap.
pub fn brute_map(q: &[Vec<i8>], db: &[Vec<i8>], ql: &[i64], dl: &[i64], top_k: usize, truncated: bool) -> f64 {
    let mut total = 0.0;
    for (qi, qc) in q.iter().enumerate() {
        let mut order: Vec<(usize, usize)> = db.iter().enumerate().map(|(j, c)| (hamming(qc, c), j)).collect();
        order.sort();
        let l_q = dl.iter().filter(|&&l| l == ql[qi]).count();
        if l_q == 0 {
            continue;
        }
        let mut hits = 0.0;
        let mut ap = 0.0;
        for (z, &(_, j)) in order.iter().take(top_k).enumerate() {
            if dl[j] == ql[qi] {
                hits += 1.0;
                ap += hits / (z + 1) as f64;
            }
        }
        let denom = if truncated { l_q.min(top_k) } else { l_q };
        total += ap / denom as f64;
    }
    total / q.len() as f64
}

/// Reference lookup: (mean, std, coverage).
pub fn brute_lookup(q: &[Vec<i8>], db: &[Vec<i8>], ql: &[i64], dl: &[i64], radius: usize) -> (f64, f64, f64) {
    let mut precs = Vec::new();
    let mut covered = 0;
    for (qi, qc) in q.iter().enumerate() {
        let mut ret = 0.0;
        let mut rel = 0.0;
        for (j, c) in db.iter().enumerate() {
            if hamming(qc, c) <= radius {
                ret += 1.0;
                if dl[j] == ql[qi] {
                    rel += 1.0;
                }
            }
        }
        if ret > 0.0 {
            covered += 1;
            precs.push(rel / ret);
        } else {
            precs.push(0.0);
        }
    }
    let n = precs.len() as f64;
    let mean = precs.iter().sum::<f64>() / n;
    let std = (precs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, std, covered as f64 / n)
}

/// Reference PR curve: (recall, precision) for every radius.
pub fn brute_pr(q: &[Vec<i8>], db: &[Vec<i8>], ql: &[i64], dl: &[i64]) -> Vec<(f64, f64)> {
    let bits = q[0].len();
    (0..=bits)
        .map(|r| {
            let mut prec = 0.0;
            let mut rec = 0.0;
            let mut with_rel = 0;
            for (qi, qc) in q.iter().enumerate() {
                let mut ret = 0;
                let mut rel = 0;
                let mut l_q = 0;
                for (j, c) in db.iter().enumerate() {
                    let relevant = dl[j] == ql[qi];
                    l_q += relevant as usize;
                    if hamming(qc, c) <= r {
                        ret += 1;
                        rel += relevant as usize;
                    }
                }
                if ret > 0 {
                    prec += rel as f64 / ret as f64;
                }
                if l_q > 0 {
                    rec += rel as f64 / l_q as f64;
                    with_rel += 1;
                }
            }
            let recall = if with_rel == 0 { 0.0 } else { rec / with_rel as f64 };
            (recall, prec / q.len() as f64)
        })
        .collect()
}

pub fn codes(signs: &[Vec<i8>]) -> BinaryCodes {
    BinaryCodes::from_signs(signs).unwrap()
}

/// Random code instance whose codes cluster by label so metrics are non-trivial.
pub fn metric_instance(rng: &mut ChaCha8Rng, nq: usize, ndb: usize, bits: usize, classes: i64) -> (Vec<Vec<i8>>, Vec<Vec<i8>>, Vec<i64>, Vec<i64>) {
    let protos = random_signs(classes as usize, bits, rng);
    let draw = |n: usize, rng: &mut ChaCha8Rng| {
        let mut cs = Vec::new();
        let mut ls = Vec::new();
        for _ in 0..n {
            let l = rng.random_range(0..classes);
            let c: Vec<i8> = protos[l as usize].iter().map(|&b| if rng.random::<f64>() < 0.2 { -b } else { b }).collect();
            cs.push(c);
            ls.push(l);
        }
        (cs, ls)
    };
    let (q, ql) = draw(nq, rng);
    let (db, dl) = draw(ndb, rng);
    (q, db, ql, dl)
}
