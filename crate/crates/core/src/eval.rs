//! Retrieval metrics over packed codes: Hamming ranking MAP, radius lookup
//! precision and precision-recall over the radius sweep.
//!
//! Relevance is label equality. Ranking ties are broken by ascending
//! database index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codes::BinaryCodes;
use crate::error::{invalid, Result};
use crate::par;

/// Denominator of a query's average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApNormalization {
    /// Relevant items in the whole database.
    Database,
    /// `min(L_q, top_k)`, so a perfect top-k list scores 1.
    Truncated,
}

impl ApNormalization {
    pub fn name(self) -> &'static str {
        match self {
            Self::Database => "database",
            Self::Truncated => "truncated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "database" => Ok(Self::Database),
            "truncated" => Ok(Self::Truncated),
            _ => invalid(format!("unknown AP normalization '{s}' (database, truncated)")),
        }
    }
}

/// `(1/L_q) sum_z P_q(z) rel_q(z)` over the ranked list.
pub fn average_precision(ranked: &[bool], l_q: usize) -> Result<f64> {
    if l_q == 0 {
        return invalid("average precision is undefined with no relevant items");
    }
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (z, &rel) in ranked.iter().enumerate() {
        if rel {
            hits += 1;
            acc += hits as f64 / (z + 1) as f64;
        }
    }
    Ok(acc / l_q as f64)
}

/// Database indices by ascending Hamming distance to query `q`, ties by index.
pub fn hamming_rank(queries: &BinaryCodes, q: usize, db: &BinaryCodes) -> Vec<usize> {
    let dist = queries.distances_to(q, db);
    let mut buckets = vec![Vec::new(); queries.bits() + 1];
    for (j, &d) in dist.iter().enumerate() {
        buckets[d as usize].push(j);
    }
    buckets.concat()
}

fn check_inputs(queries: &BinaryCodes, db: &BinaryCodes, q_labels: &[i64], db_labels: &[i64]) -> Result<()> {
    if queries.is_empty() {
        return invalid("query set is empty");
    }
    if db.is_empty() {
        return invalid("database is empty");
    }
    if queries.bits() != db.bits() {
        return invalid(format!("query codes have {} bits, database codes {}", queries.bits(), db.bits()));
    }
    if q_labels.len() != queries.len() || db_labels.len() != db.len() {
        return invalid(format!(
            "label counts ({}, {}) do not match code counts ({}, {})",
            q_labels.len(),
            db_labels.len(),
            queries.len(),
            db.len()
        ));
    }
    Ok(())
}

/// AP of every query over its top `top_k` ranked items. Queries without any
/// relevant database item score 0.
pub fn average_precisions(
    queries: &BinaryCodes,
    db: &BinaryCodes,
    q_labels: &[i64],
    db_labels: &[i64],
    top_k: usize,
    norm: ApNormalization,
) -> Result<Vec<f64>> {
    check_inputs(queries, db, q_labels, db_labels)?;
    if top_k == 0 {
        return invalid("top_k must be >= 1");
    }
    let aps = par::map_range(queries.len(), |q| {
        let label = q_labels[q];
        let l_q = db_labels.iter().filter(|&&l| l == label).count();
        if l_q == 0 {
            return 0.0;
        }
        let order = hamming_rank(queries, q, db);
        let ranked: Vec<bool> = order.iter().take(top_k).map(|&j| db_labels[j] == label).collect();
        let denom = match norm {
            ApNormalization::Database => l_q,
            ApNormalization::Truncated => l_q.min(top_k),
        };
        average_precision(&ranked, denom).unwrap_or(0.0)
    });
    Ok(aps)
}

pub fn mean_average_precision(
    queries: &BinaryCodes,
    db: &BinaryCodes,
    q_labels: &[i64],
    db_labels: &[i64],
    top_k: usize,
    norm: ApNormalization,
) -> Result<f64> {
    let aps = average_precisions(queries, db, q_labels, db_labels, top_k, norm)?;
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LookupStats {
    pub mean: f64,
    pub std: f64,
    /// Fraction of queries whose ball is non-empty.
    pub coverage: f64,
    /// Mean over queries with a non-empty ball; 0 if there are none.
    pub mean_nonempty: f64,
}

/// Precision of every database item within `radius`; empty balls score 0.
pub fn hash_lookup_precision(
    queries: &BinaryCodes,
    db: &BinaryCodes,
    q_labels: &[i64],
    db_labels: &[i64],
    radius: usize,
) -> Result<LookupStats> {
    check_inputs(queries, db, q_labels, db_labels)?;
    let per_query = par::map_range(queries.len(), |q| {
        let mut retrieved = 0usize;
        let mut relevant = 0usize;
        for j in 0..db.len() {
            if queries.hamming(q, db, j) as usize <= radius {
                retrieved += 1;
                if db_labels[j] == q_labels[q] {
                    relevant += 1;
                }
            }
        }
        if retrieved == 0 {
            None
        } else {
            Some(relevant as f64 / retrieved as f64)
        }
    });
    let n = per_query.len() as f64;
    let vals: Vec<f64> = per_query.iter().map(|p| p.unwrap_or(0.0)).collect();
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let nonempty: Vec<f64> = per_query.iter().flatten().copied().collect();
    let coverage = nonempty.len() as f64 / n;
    let mean_nonempty = if nonempty.is_empty() { 0.0 } else { nonempty.iter().sum::<f64>() / nonempty.len() as f64 };
    Ok(LookupStats { mean, std: var.sqrt(), coverage, mean_nonempty })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub radius: usize,
    pub recall: f64,
    pub precision: f64,
}

/// Mean precision and recall at every radius `0..=P`. Empty retrievals
/// count as precision 0; recall averages over queries with a relevant item.
pub fn pr_curve(queries: &BinaryCodes, db: &BinaryCodes, q_labels: &[i64], db_labels: &[i64]) -> Result<Vec<PrPoint>> {
    check_inputs(queries, db, q_labels, db_labels)?;
    let p = queries.bits();
    // per query: (retrieved, relevant) counts at each exact distance
    let hist = par::map_range(queries.len(), |q| {
        let mut ret = vec![0usize; p + 1];
        let mut rel = vec![0usize; p + 1];
        for j in 0..db.len() {
            let d = queries.hamming(q, db, j) as usize;
            ret[d] += 1;
            if db_labels[j] == q_labels[q] {
                rel[d] += 1;
            }
        }
        (ret, rel)
    });
    let nq = queries.len() as f64;
    let mut cum: Vec<(usize, usize)> = vec![(0, 0); queries.len()];
    let mut out = Vec::with_capacity(p + 1);
    for r in 0..=p {
        let mut prec = 0.0;
        let mut recall = 0.0;
        let mut with_rel = 0usize;
        for (q, (ret, rel)) in hist.iter().enumerate() {
            cum[q].0 += ret[r];
            cum[q].1 += rel[r];
            let (rt, rl) = cum[q];
            if rt > 0 {
                prec += rl as f64 / rt as f64;
            }
            let l_q: usize = rel.iter().sum();
            if l_q > 0 {
                recall += rl as f64 / l_q as f64;
                with_rel += 1;
            }
        }
        out.push(PrPoint {
            radius: r,
            recall: if with_rel == 0 { 0.0 } else { recall / with_rel as f64 },
            precision: prec / nq,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub map: f64,
    pub top_k: usize,
    pub ap_normalization: ApNormalization,
    pub radius: usize,
    pub lookup: LookupStats,
    pub pr_curve: Vec<PrPoint>,
    pub num_queries: usize,
    pub num_database: usize,
    pub bits: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn pr_csv(&self) -> String {
        let mut s = String::from("radius,recall,precision\n");
        for p in &self.pr_curve {
            s.push_str(&format!("{},{},{}\n", p.radius, p.recall, p.precision));
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "MAP@{} = {:.4}\nlookup precision (r={}) = {:.4} +- {:.4}, coverage {:.4}, non-empty mean {:.4}\n",
            self.top_k, self.map, self.radius, self.lookup.mean, self.lookup.std, self.lookup.coverage, self.lookup.mean_nonempty
        )
    }
}

pub fn evaluate(
    queries: &BinaryCodes,
    db: &BinaryCodes,
    q_labels: &[i64],
    db_labels: &[i64],
    top_k: usize,
    radius: usize,
    norm: ApNormalization,
) -> Result<EvalReport> {
    Ok(EvalReport {
        map: mean_average_precision(queries, db, q_labels, db_labels, top_k, norm)?,
        top_k,
        ap_normalization: norm,
        radius,
        lookup: hash_lookup_precision(queries, db, q_labels, db_labels, radius)?,
        pr_curve: pr_curve(queries, db, q_labels, db_labels)?,
        num_queries: queries.len(),
        num_database: db.len(),
        bits: db.bits(),
    })
}

/// Uniform random codes, the chance baseline.
pub fn random_codes(n: usize, bits: usize, seed: u64) -> BinaryCodes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs: Vec<Vec<i8>> = (0..n).map(|_| (0..bits).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()).collect();
    let mut out = BinaryCodes::from_signs(&signs).expect("valid signs");
    if n == 0 {
        out = BinaryCodes::empty(bits);
    }
    out
}
