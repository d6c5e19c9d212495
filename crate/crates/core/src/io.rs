//! MVH1 view files and dataset manifests.
//!
//! A view file is the magic `MVH1`, then `rows` and `cols` as little-endian
//! `u64`, then `rows * cols` little-endian `f32` in row-major order. Rows
//! are feature dimensions, columns are samples.
//!
//! A manifest is UTF-8 `key = value` lines; `#` starts a comment:
//!
//! ```text
//! name = synthetic
//! view = train.view0.mvh1
//! view = train.view1.mvh1
//! labels = train.labels.txt
//! ```
//!
//! `view` repeats once per view, in order. Relative paths resolve against
//! the manifest's directory. Any file whose name ends in `.gz` is read and
//! written gzip-compressed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::DMatrix;

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};

pub const VIEW_MAGIC: &[u8; 4] = b"MVH1";

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

pub fn open_read(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    Ok(if is_gz(path) { Box::new(BufReader::new(GzDecoder::new(reader))) } else { Box::new(reader) })
}

pub fn open_write(path: &Path) -> Result<Box<dyn Write>> {
    let file = File::create(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let writer = BufWriter::new(file);
    Ok(if is_gz(path) { Box::new(GzEncoder::new(writer, Compression::default())) } else { Box::new(writer) })
}

pub fn write_view<W: Write>(w: &mut W, view: &DMatrix<f32>) -> Result<()> {
    w.write_all(VIEW_MAGIC)?;
    w.write_all(&(view.nrows() as u64).to_le_bytes())?;
    w.write_all(&(view.ncols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(view.ncols() * 4);
    for r in 0..view.nrows() {
        buf.clear();
        for c in 0..view.ncols() {
            buf.extend_from_slice(&view[(r, c)].to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_view<R: Read>(r: &mut R) -> Result<DMatrix<f32>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != VIEW_MAGIC {
        return Err(Error::Format(format!("bad view magic {magic:?}, expected \"MVH1\"")));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows
        .checked_mul(cols)
        .filter(|c| c.checked_mul(4).is_some())
        .ok_or_else(|| Error::Format(format!("view header declares {rows} x {cols} entries")))?;
    let mut bytes = Vec::new();
    r.take(count as u64 * 4).read_to_end(&mut bytes)?;
    if bytes.len() != count * 4 {
        return Err(Error::Format(format!(
            "view body truncated: {} of {} bytes",
            bytes.len(),
            count * 4
        )));
    }
    let mut m = DMatrix::<f32>::zeros(rows, cols);
    for (k, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        let (row, col) = (k / cols, k % cols);
        if !v.is_finite() {
            return Err(Error::Format(format!("non-finite value at row {row}, column {col}")));
        }
        m[(row, col)] = v;
    }
    Ok(m)
}

pub fn save_view(path: &Path, view: &DMatrix<f32>) -> Result<()> {
    let mut w = open_write(path)?;
    write_view(&mut w, view)?;
    w.flush()?;
    Ok(())
}

pub fn load_view(path: &Path) -> Result<DMatrix<f32>> {
    read_view(&mut open_read(path)?).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub name: String,
    pub views: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::from("dataset");
        let mut views = Vec::new();
        let mut labels = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("manifest line {}: expected key = value", lineno + 1)))?;
            let value = value.trim();
            match key.trim() {
                "name" => name = value.to_string(),
                "view" => views.push(PathBuf::from(value)),
                "labels" => labels = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Format(format!("manifest line {}: unknown key {other:?}", lineno + 1)))
                }
            }
        }
        if views.is_empty() {
            return Err(Error::Format("manifest lists no views".into()));
        }
        Ok(Self { name, views, labels })
    }

    pub fn render(&self) -> String {
        let mut s = format!("# mvhash dataset manifest\nname = {}\n", self.name);
        for v in &self.views {
            s.push_str(&format!("view = {}\n", v.display()));
        }
        if let Some(l) = &self.labels {
            s.push_str(&format!("labels = {}\n", l.display()));
        }
        s
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let reader = BufReader::new(open_read(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse().map_err(|_| {
            Error::Format(format!("{}:{}: bad label {t:?}", path.display(), lineno + 1))
        })?);
    }
    Ok(out)
}

pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let mut text = String::new();
    open_read(manifest_path)?.read_to_string(&mut text)?;
    let manifest = Manifest::parse(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut views = Vec::with_capacity(manifest.views.len());
    for (m, p) in manifest.views.iter().enumerate() {
        let view = load_view(&resolve(base, p)).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("view {m}: {msg}")),
            other => other,
        })?;
        if let Some(first) = views.first().map(|v: &DMatrix<f32>| v.ncols()) {
            if view.ncols() != first {
                return Err(Error::Format(format!(
                    "view {m} ({}) has {} samples, view 0 has {first}",
                    p.display(),
                    view.ncols()
                )));
            }
        }
        views.push(view);
    }
    let labels = manifest.labels.as_ref().map(|p| read_labels(&resolve(base, p))).transpose()?;
    MultiViewDataset::new(manifest.name, views, labels)
}

/// Writes the views and labels next to `manifest_path`, named after its
/// file stem, then the manifest itself.
pub fn save_dataset(ds: &MultiViewDataset, manifest_path: &Path) -> Result<()> {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .trim_end_matches(".manifest");
    let mut manifest = Manifest { name: ds.name.clone(), views: Vec::new(), labels: None };
    for (m, view) in ds.views().iter().enumerate() {
        let file = format!("{stem}.view{m}.mvh1");
        save_view(&dir.join(&file), view)?;
        manifest.views.push(PathBuf::from(file));
    }
    if let Some(labels) = ds.labels() {
        let file = format!("{stem}.labels.txt");
        let mut w = open_write(&dir.join(&file))?;
        for l in labels {
            writeln!(w, "{l}")?;
        }
        w.flush()?;
        manifest.labels = Some(PathBuf::from(file));
    }
    let mut w = open_write(manifest_path)?;
    w.write_all(manifest.render().as_bytes())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_multiview;

    #[test]
    fn view_bytes_are_row_major_le() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut buf = Vec::new();
        write_view(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"MVH1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 3);
        assert_eq!(f32::from_le_bytes(buf[20..24].try_into().unwrap()), 1.0);
        assert_eq!(f32::from_le_bytes(buf[24..28].try_into().unwrap()), 2.0);
        assert_eq!(f32::from_le_bytes(buf[32..36].try_into().unwrap()), 4.0);
        assert_eq!(buf.len(), 20 + 24);
        assert_eq!(read_view(&mut buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn nan_reported_with_coordinates() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0f32, 2.0, f32::NAN, 4.0]);
        let mut buf = Vec::new();
        write_view(&mut buf, &m).unwrap();
        let err = read_view(&mut buf.as_slice()).unwrap_err().to_string();
        assert!(err.contains("row 1, column 0"), "{err}");
    }

    #[test]
    fn truncated_view() {
        let m = DMatrix::from_element(3, 3, 1.0f32);
        let mut buf = Vec::new();
        write_view(&mut buf, &m).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(matches!(read_view(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn round_trip_plain_and_gz() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synth_multiview(3, 10, &[5, 7], 0.4, 2).unwrap();
        for name in ["d.manifest", "d.manifest.gz"] {
            let path = dir.path().join(name);
            save_dataset(&ds, &path).unwrap();
            let back = load_dataset(&path).unwrap();
            assert_eq!(back, ds);
        }
    }

    #[test]
    fn manifest_dims_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        for (m, d) in [128usize, 225, 500].iter().enumerate() {
            save_view(&dir.path().join(format!("v{m}.mvh1")), &DMatrix::zeros(*d, 4)).unwrap();
        }
        std::fs::write(dir.path().join("m.txt"), "name = nus\nview = v0.mvh1\nview = v1.mvh1\nview = v2.mvh1\n").unwrap();
        let ds = load_dataset(&dir.path().join("m.txt")).unwrap();
        assert_eq!(ds.dims(), vec![128, 225, 500]);

        save_view(&dir.path().join("a.mvh1"), &DMatrix::zeros(2, 100)).unwrap();
        save_view(&dir.path().join("b.mvh1"), &DMatrix::zeros(2, 99)).unwrap();
        std::fs::write(dir.path().join("bad.txt"), "view = a.mvh1\nview = b.mvh1\n").unwrap();
        let err = load_dataset(&dir.path().join("bad.txt")).unwrap_err();
        assert!(matches!(&err, Error::Format(msg) if msg.contains("view 1")), "{err}");

        std::fs::write(dir.path().join("missing.txt"), "view = nope.mvh1\n").unwrap();
        assert!(matches!(load_dataset(&dir.path().join("missing.txt")), Err(Error::Io(_))));
    }
}
