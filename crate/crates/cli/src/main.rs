mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mvhash::codes::BinaryCodes;
use mvhash::dataset::{corrupt, split, synth_multiview, CorruptionSpec, MultiViewDataset};
use mvhash::eval;
use mvhash::io::{load_dataset, save_dataset};
use mvhash::model_file::{dataset_fingerprint, ModelFile, VERSION};
use mvhash::trainer::{self, HashModel};

use config::{ConfigFlags, Encoder, RunConfig};

/// Robust multi-view hashing.
#[derive(Parser, Debug)]
#[command(name = "mvhash", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a clustered multi-view dataset.
    Synth {
        /// Manifest to write; view and label files go next to it.
        #[arg(long)]
        out: PathBuf,
        /// Manifest for the query split when `n_queries` > 0.
        #[arg(long)]
        query_out: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Corrupt every view of a dataset.
    Corrupt {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Train hash functions; writes the model and `<model>.alm.csv`,
    /// `<model>.objective.csv` traces.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Also write the database codes as text.
        #[arg(long)]
        codes: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Encode every sample of a dataset with a trained model.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Rank the stored database codes against one sample of a dataset.
    Query {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Sample index inside `--data`.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Write the ranking as CSV instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// MAP, hash-lookup precision and the precision-recall curve.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        database: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// JSON report.
        #[arg(long)]
        out: PathBuf,
        /// Precision-recall CSV; defaults to the report path with `.pr.csv`.
        #[arg(long)]
        pr_csv: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Print model metadata.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth { out, query_out, flags } => synth(&RunConfig::from_flags(&flags)?, &out, query_out.as_deref()),
        Command::Corrupt { data, out, flags } => corrupt_cmd(&RunConfig::from_flags(&flags)?, &data, &out),
        Command::Train { data, model, codes, flags } => train(&RunConfig::from_flags(&flags)?, &data, &model, codes.as_deref()),
        Command::Encode { model, data, out, flags } => encode(&RunConfig::from_flags(&flags)?, &model, &data, &out),
        Command::Query { model, data, index, out, flags } => query(&RunConfig::from_flags(&flags)?, &model, &data, index, out.as_deref()),
        Command::Eval { model, database, queries, out, pr_csv, flags } => {
            let pr = pr_csv.unwrap_or_else(|| out.with_extension("pr.csv"));
            eval_cmd(&RunConfig::from_flags(&flags)?, &model, &database, &queries, &out, &pr)
        }
        Command::Inspect { model } => inspect(&model),
    }
}

fn load(path: &Path) -> Result<MultiViewDataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_model(path: &Path) -> Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn check_dims(model: &HashModel, ds: &MultiViewDataset, path: &Path) -> Result<()> {
    if ds.dims() != model.view_dims() {
        bail!(
            "dimension mismatch: {} has view dimensions {:?}, the model expects {:?}",
            path.display(),
            ds.dims(),
            model.view_dims()
        );
    }
    Ok(())
}

fn synth(cfg: &RunConfig, out: &Path, query_out: Option<&Path>) -> Result<()> {
    let ds = synth_multiview(cfg.clusters, cfg.per_cluster, &cfg.dims, cfg.view_noise, cfg.seed)?;
    if cfg.queries == 0 {
        save_dataset(&ds, out).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {} samples, view dims {:?} to {}", ds.len(), ds.dims(), out.display());
        return Ok(());
    }
    let Some(qpath) = query_out else {
        bail!("n_queries = {} needs --query-out", cfg.queries);
    };
    let (db, q) = split(&ds, cfg.queries, cfg.seed.wrapping_add(1))?;
    save_dataset(&db, out).with_context(|| format!("writing {}", out.display()))?;
    save_dataset(&q, qpath).with_context(|| format!("writing {}", qpath.display()))?;
    println!("wrote {} database samples to {} and {} queries to {}", db.len(), out.display(), q.len(), qpath.display());
    Ok(())
}

fn corrupt_cmd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let ds = load(data)?;
    let spec = CorruptionSpec::new(cfg.corruption, cfg.fraction, cfg.seed)?;
    let bad = corrupt(&ds, &spec)?;
    save_dataset(&bad, out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote corrupted copy of {} samples to {}", bad.len(), out.display());
    Ok(())
}

fn train(cfg: &RunConfig, data: &Path, model_path: &Path, codes_path: Option<&Path>) -> Result<()> {
    let ds = load(data)?;
    let out = trainer::train(&ds, &cfg.train)?;
    let codes = out.database_codes()?;
    let file = ModelFile {
        model: out.model.clone(),
        config: cfg.render(),
        database_codes: Some(codes.clone()),
        dataset_fingerprint: Some(dataset_fingerprint(&ds)),
    };
    file.save(model_path).with_context(|| format!("writing {}", model_path.display()))?;
    let alm_csv = match &out.alm {
        Some(d) => d.to_csv(),
        None => String::from("iteration,recon_residual,coupling_residual,objective,mu\n"),
    };
    write(&suffixed(model_path, ".alm.csv"), &alm_csv)?;
    write(&suffixed(model_path, ".objective.csv"), &out.objective_csv())?;
    if let Some(p) = codes_path {
        write(p, &codes.to_text())?;
    }
    if let Some(d) = &out.alm {
        println!("recovery: {} iterations, final residual {:.2e}, converged {}", d.iterations, d.final_residual(), d.converged);
    }
    println!(
        "training: {} outer iterations, final objective {:.6e}, converged {}",
        out.objective_trace.len(),
        out.objective_trace.last().copied().unwrap_or(f64::NAN),
        out.converged
    );
    println!("wrote {}", model_path.display());
    Ok(())
}

fn encode_with(model: &HashModel, ds: &MultiViewDataset, encoder: Encoder) -> Result<BinaryCodes> {
    match encoder {
        Encoder::Kernel => Ok(model.encode_dataset(ds)?),
        Encoder::Prototype => {
            let Some(base) = &model.base else {
                bail!("encoder = prototype needs a model trained with base_size > 0");
            };
            let signs = (0..ds.len()).map(|i| base.encode(&ds.sample(i))).collect::<mvhash::error::Result<Vec<_>>>()?;
            if signs.is_empty() {
                return Ok(BinaryCodes::empty(model.bits()));
            }
            Ok(BinaryCodes::from_signs(&signs)?)
        }
    }
}

fn encode(cfg: &RunConfig, model_path: &Path, data: &Path, out: &Path) -> Result<()> {
    let file = load_model(model_path)?;
    let ds = load(data)?;
    check_dims(&file.model, &ds, data)?;
    let codes = encode_with(&file.model, &ds, cfg.encoder)?;
    write(out, &codes.to_text())?;
    println!("wrote {} codes of {} bits to {}", codes.len(), codes.bits(), out.display());
    Ok(())
}

fn query(cfg: &RunConfig, model_path: &Path, data: &Path, index: usize, out: Option<&Path>) -> Result<()> {
    let file = load_model(model_path)?;
    let Some(db) = &file.database_codes else {
        bail!("{} stores no database codes", model_path.display());
    };
    let ds = load(data)?;
    check_dims(&file.model, &ds, data)?;
    if index >= ds.len() {
        bail!("index {index} is out of range for {} samples", ds.len());
    }
    let q = encode_with(&file.model, &ds.select(&[index]), cfg.encoder)?;
    let ranked = eval::hamming_rank(&q, 0, db);
    let dist = q.distances_to(0, db);
    let mut csv = String::from("rank,database_index,hamming_distance\n");
    for (r, &j) in ranked.iter().take(cfg.top_k).enumerate() {
        csv.push_str(&format!("{},{},{}\n", r + 1, j, dist[j]));
    }
    match out {
        Some(p) => write(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn eval_cmd(cfg: &RunConfig, model_path: &Path, db_path: &Path, q_path: &Path, out: &Path, pr: &Path) -> Result<()> {
    let file = load_model(model_path)?;
    let db = load(db_path)?;
    let q = load(q_path)?;
    check_dims(&file.model, &db, db_path)?;
    check_dims(&file.model, &q, q_path)?;
    let (Some(dl), Some(ql)) = (db.labels(), q.labels()) else {
        bail!("evaluation needs labels on both the database and the queries");
    };
    let stored = match (&file.database_codes, &file.dataset_fingerprint) {
        (Some(c), Some(fp)) if *fp == dataset_fingerprint(&db) => Some(c.clone()),
        _ => None,
    };
    let db_codes = match stored {
        Some(c) => c,
        None => encode_with(&file.model, &db, Encoder::Kernel)?,
    };
    let q_codes = encode_with(&file.model, &q, cfg.encoder)?;
    let report = eval::evaluate(&q_codes, &db_codes, ql, dl, cfg.top_k, cfg.radius, cfg.ap_normalization)?;
    write(out, &report.to_json())?;
    write(pr, &report.pr_csv())?;
    let rq = eval::random_codes(q.len(), file.model.bits(), cfg.seed);
    let rd = eval::random_codes(db.len(), file.model.bits(), cfg.seed.wrapping_add(1));
    let baseline = eval::mean_average_precision(&rq, &rd, ql, dl, cfg.top_k, cfg.ap_normalization)?;
    print!("{}", report.summary());
    println!("random-code MAP@{} = {:.4}", cfg.top_k, baseline);
    println!("wrote {} and {}", out.display(), pr.display());
    Ok(())
}

fn inspect(model_path: &Path) -> Result<()> {
    let file = load_model(model_path)?;
    let m = &file.model;
    println!("format version: {VERSION}");
    println!("bits: {}", m.bits());
    println!("views: {} with dimensions {:?}", m.view_dims().len(), m.view_dims());
    println!("kernel landmarks: {}", m.landmarks.count());
    println!("query kernel: {}", m.query_mode.name());
    println!("bandwidths: per view {:?}, concatenated {}", m.kernel.sigmas, m.kernel.sigma_concat);
    match &m.base {
        Some(b) => println!("base set: {} prototypes, {} active, sigma {}", b.len(), b.neighbors, b.sigma),
        None => println!("base set: none"),
    }
    match &file.database_codes {
        Some(c) => println!("database codes: {}", c.len()),
        None => println!("database codes: none"),
    }
    if let Some(fp) = &file.dataset_fingerprint {
        let hex: String = fp.iter().map(|b| format!("{b:02x}")).collect();
        println!("training data sha256: {hex}");
    }
    println!("config:");
    for line in file.config.lines() {
        println!("  {line}");
    }
    Ok(())
}
