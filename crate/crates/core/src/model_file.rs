//! Versioned binary model container.
//!
//! Layout, little-endian throughout: magic `MVHM`, `u32` version, the
//! sections below, then a `u64` checksum equal to the first 8 bytes
//! (little-endian) of the SHA-256 of everything before it.
//!
//! Sections: config text, query mode, `W`, `b`, kernel landmark blocks,
//! kernel bandwidths, optional base set, optional database codes, optional
//! dataset fingerprint. Matrices are `u64 rows, u64 cols` then row-major
//! `f64` values.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::codes::BinaryCodes;
use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, KernelLandmarks, QueryKernelMode};
use crate::oos::BaseSet;
use crate::trainer::HashModel;

pub const MAGIC: &[u8; 4] = b"MVHM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: HashModel,
    /// Training configuration as `key = value` text.
    pub config: String,
    pub database_codes: Option<BinaryCodes>,
    pub dataset_fingerprint: Option<[u8; 32]>,
}

/// SHA-256 over view shapes, values and labels.
pub fn dataset_fingerprint(ds: &MultiViewDataset) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((ds.num_views() as u64).to_le_bytes());
    for v in ds.views() {
        h.update((v.nrows() as u64).to_le_bytes());
        h.update((v.ncols() as u64).to_le_bytes());
        for x in v.iter() {
            h.update(x.to_le_bytes());
        }
    }
    if let Some(labels) = ds.labels() {
        for l in labels {
            h.update(l.to_le_bytes());
        }
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

fn checksum(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    let mut first = [0u8; 8];
    first.copy_from_slice(&d[..8]);
    u64::from_le_bytes(first)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }
    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.f64(m[(i, j)]);
            }
        }
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::CorruptFile(format!("section ends past the payload at byte {}", self.pos)));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()?;
        let n = usize::try_from(n).map_err(|_| Error::CorruptFile("length overflows".into()))?;
        if n.checked_mul(elem).is_none_or(|b| b > self.buf.len() - self.pos) {
            return Err(Error::CorruptFile(format!("length {n} exceeds the payload")));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len(1)?;
        self.take(n)
    }
    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let r = self.u64()? as usize;
        let c = self.len(0)?;
        let total = r.checked_mul(c).filter(|t| t.checked_mul(8).is_some_and(|b| b <= self.buf.len() - self.pos));
        let Some(total) = total else {
            return Err(Error::CorruptFile(format!("matrix {r}x{c} exceeds the payload")));
        };
        let mut vals = Vec::with_capacity(total);
        for _ in 0..total {
            vals.push(self.f64()?);
        }
        Ok(DMatrix::from_row_slice(r, c, &vals))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::CorruptFile(format!("bad presence flag {v}"))),
        }
    }
}

fn mode_tag(mode: QueryKernelMode) -> u8 {
    match mode {
        QueryKernelMode::Concat => 0,
        QueryKernelMode::ViewSum => 1,
        QueryKernelMode::ViewMean => 2,
    }
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        w.bytes(self.config.as_bytes());
        let m = &self.model;
        w.u8(mode_tag(m.query_mode));
        w.matrix(&m.w);
        w.f64s(m.b.as_slice());
        w.u64(m.landmarks.blocks.len() as u64);
        for block in &m.landmarks.blocks {
            w.matrix(block);
        }
        w.f64s(&m.kernel.sigmas);
        w.f64(m.kernel.sigma_concat);
        w.u64(m.kernel.self_tuning_k as u64);
        match &m.base {
            None => w.u8(0),
            Some(base) => {
                w.u8(1);
                w.matrix(&base.centers);
                w.matrix(&base.embeddings);
                w.f64(base.sigma);
                w.u64(base.neighbors as u64);
                w.u8(base.full_sum as u8);
            }
        }
        match &self.database_codes {
            None => w.u8(0),
            Some(codes) => {
                w.u8(1);
                w.u64(codes.bits() as u64);
                w.u64(codes.words().len() as u64);
                for &word in codes.words() {
                    w.u64(word);
                }
            }
        }
        match &self.dataset_fingerprint {
            None => w.u8(0),
            Some(fp) => {
                w.u8(1);
                w.0.extend_from_slice(fp);
            }
        }
        let sum = checksum(&w.0);
        w.u64(sum);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        if bytes.len() < 8 {
            return Err(Error::CorruptFile("truncated before the version field".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Version { found: version, supported: VERSION });
        }
        if bytes.len() < 16 {
            return Err(Error::CorruptFile("truncated before the checksum".into()));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        let actual = checksum(payload);
        if stored != actual {
            return Err(Error::CorruptFile(format!("checksum mismatch: stored {stored:016x}, computed {actual:016x}")));
        }
        let mut r = Reader { buf: payload, pos: 8 };
        let config = String::from_utf8(r.bytes()?.to_vec())
            .map_err(|_| Error::CorruptFile("config snapshot is not UTF-8".into()))?;
        let query_mode = match r.u8()? {
            0 => QueryKernelMode::Concat,
            1 => QueryKernelMode::ViewSum,
            2 => QueryKernelMode::ViewMean,
            t => return Err(Error::CorruptFile(format!("unknown query mode tag {t}"))),
        };
        let w = r.matrix()?;
        let b = DVector::from_vec(r.f64s()?);
        let views = r.len(16)?;
        let blocks = (0..views).map(|_| r.matrix()).collect::<Result<Vec<_>>>()?;
        let landmarks = KernelLandmarks::new(blocks).map_err(|e| Error::CorruptFile(e.to_string()))?;
        let sigmas = r.f64s()?;
        let sigma_concat = r.f64()?;
        let self_tuning_k = r.u64()? as usize;
        let kernel = KernelConfig::new(sigmas, sigma_concat, self_tuning_k).map_err(|e| Error::CorruptFile(e.to_string()))?;
        let base = if r.flag()? {
            let centers = r.matrix()?;
            let embeddings = r.matrix()?;
            let sigma = r.f64()?;
            let neighbors = r.u64()? as usize;
            let full_sum = r.flag()?;
            Some(BaseSet::new(centers, embeddings, sigma, neighbors, full_sum).map_err(|e| Error::CorruptFile(e.to_string()))?)
        } else {
            None
        };
        let database_codes = if r.flag()? {
            let bits = r.u64()? as usize;
            let n = r.len(8)?;
            let words = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            Some(BinaryCodes::from_words(bits, words).map_err(|e| Error::CorruptFile(e.to_string()))?)
        } else {
            None
        };
        let dataset_fingerprint = if r.flag()? { Some(r.take(32)?.try_into().expect("32 bytes")) } else { None };
        if r.pos != payload.len() {
            return Err(Error::CorruptFile(format!("{} trailing bytes", payload.len() - r.pos)));
        }
        if w.nrows() != landmarks.count() || w.ncols() != b.len() || kernel.sigmas.len() != landmarks.num_views() {
            return Err(Error::CorruptFile("model sections disagree on shapes".into()));
        }
        let model = HashModel { w, b, landmarks, kernel, query_mode, base };
        Ok(Self { model, config, database_codes, dataset_fingerprint })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
