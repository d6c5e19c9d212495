//! Multi-view datasets, synthetic generation and the two corruption
//! protocols (Gaussian entry noise and zeroed coordinate blocks).

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// `M` feature views of the same `N` objects. View `m` is a `d_m x N`
/// matrix, so sample `i` is column `i` of every view.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    views: Vec<DMatrix<f32>>,
    labels: Option<Vec<i64>>,
    ids: Vec<u64>,
}

impl MultiViewDataset {
    pub fn new(name: impl Into<String>, views: Vec<DMatrix<f32>>, labels: Option<Vec<i64>>) -> Result<Self> {
        let n = views.first().map(|v| v.ncols()).unwrap_or(0);
        let ids = (0..n as u64).collect();
        Self::with_ids(name, views, labels, ids)
    }

    pub fn with_ids(
        name: impl Into<String>,
        views: Vec<DMatrix<f32>>,
        labels: Option<Vec<i64>>,
        ids: Vec<u64>,
    ) -> Result<Self> {
        let Some(first) = views.first() else {
            return invalid("a dataset needs at least one view");
        };
        let n = first.ncols();
        for (m, v) in views.iter().enumerate() {
            if v.nrows() == 0 {
                return invalid(format!("view {m} has zero feature dimensions"));
            }
            if v.ncols() != n {
                return Err(Error::Format(format!(
                    "view {m} has {} samples, view 0 has {n}",
                    v.ncols()
                )));
            }
            if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Format(format!(
                    "view {m} has a non-finite value at row {}, column {}",
                    pos % v.nrows(),
                    pos / v.nrows()
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Format(format!("{} labels for {n} samples", l.len())));
            }
        }
        if ids.len() != n {
            return invalid(format!("{} ids for {n} samples", ids.len()));
        }
        Ok(Self { name: name.into(), views, labels, ids })
    }

    pub fn len(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.nrows()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().sum()
    }

    pub fn view(&self, m: usize) -> &DMatrix<f32> {
        &self.views[m]
    }

    pub fn views(&self) -> &[DMatrix<f32>] {
        &self.views
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn view_f64(&self, m: usize) -> DMatrix<f64> {
        self.views[m].map(|v| v as f64)
    }

    pub fn views_f64(&self) -> Vec<DMatrix<f64>> {
        (0..self.num_views()).map(|m| self.view_f64(m)).collect()
    }

    /// All views stacked into one `d x N` matrix.
    pub fn concat_f64(&self) -> DMatrix<f64> {
        let d = self.total_dim();
        let mut out = DMatrix::zeros(d, self.len());
        let mut row = 0;
        for v in &self.views {
            out.rows_mut(row, v.nrows()).copy_from(&v.map(|x| x as f64));
            row += v.nrows();
        }
        out
    }

    /// Features of sample `i`, one vector per view.
    pub fn sample(&self, i: usize) -> Vec<Vec<f64>> {
        self.views
            .iter()
            .map(|v| v.column(i).iter().map(|&x| x as f64).collect())
            .collect()
    }

    /// Subset in the given order; labels and ids follow.
    pub fn select(&self, indices: &[usize]) -> Self {
        let views = self.views.iter().map(|v| v.select_columns(indices)).collect();
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        let ids = indices.iter().map(|&i| self.ids[i]).collect();
        Self { name: self.name.clone(), views, labels, ids }
    }

    fn with_views(&self, views: Vec<DMatrix<f32>>) -> Self {
        Self { name: self.name.clone(), views, labels: self.labels.clone(), ids: self.ids.clone() }
    }
}

/// Clustered multi-view data: shared latent cluster centers, an independent
/// random linear embedding per view, plus isotropic Gaussian view noise.
/// Labels are cluster indices in cluster-major order.
pub fn synth_multiview(
    n_clusters: usize,
    per_cluster: usize,
    dims: &[usize],
    view_noise: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if dims.is_empty() || dims.contains(&0) {
        return invalid("synthetic views need at least one view and non-zero dimensions");
    }
    if n_clusters == 0 || per_cluster == 0 {
        return invalid("synthetic data needs at least one cluster with one sample");
    }
    if !(view_noise >= 0.0) || !view_noise.is_finite() {
        return invalid(format!("view noise must be a finite value >= 0, got {view_noise}"));
    }
    const LATENT: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = DMatrix::<f64>::from_fn(LATENT, n_clusters, |_, _| {
        StandardNormal.sample(&mut rng)
    });
    let n = n_clusters * per_cluster;
    let labels: Vec<i64> = (0..n).map(|i| (i / per_cluster) as i64).collect();
    let mut views = Vec::with_capacity(dims.len());
    for &d in dims {
        let scale = (1.0 / LATENT as f64).sqrt() * 2.0;
        let embed = DMatrix::<f64>::from_fn(d, LATENT, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        });
        let clean = &embed * &centers;
        let view = DMatrix::<f32>::from_fn(d, n, |r, c| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            (clean[(r, c / per_cluster)] + view_noise * noise) as f32
        });
        views.push(view);
    }
    MultiViewDataset::new("synthetic", views, Some(labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionKind {
    /// Add a standard normal draw to a sampled fraction of entries.
    GaussianFraction,
    /// Zero a contiguous run of coordinates per sample.
    BlockZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub fraction: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, fraction: f64, seed: u64) -> Result<Self> {
        let spec = Self { kind, fraction, seed };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return invalid(format!("corruption fraction must lie in [0, 1], got {}", self.fraction));
        }
        Ok(())
    }
}

pub fn corrupt(ds: &MultiViewDataset, spec: &CorruptionSpec) -> Result<MultiViewDataset> {
    match spec.kind {
        CorruptionKind::GaussianFraction => corrupt_gaussian(ds, spec),
        CorruptionKind::BlockZero => corrupt_block(ds, spec),
    }
}

pub fn corrupt_gaussian(ds: &MultiViewDataset, spec: &CorruptionSpec) -> Result<MultiViewDataset> {
    if spec.kind != CorruptionKind::GaussianFraction {
        return invalid("corrupt_gaussian needs a gaussian-fraction spec");
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let views = ds
        .views()
        .iter()
        .map(|v| {
            let mut out = v.clone();
            let total = out.len();
            let amount = ((spec.fraction * total as f64).round() as usize).min(total);
            let mut picked: Vec<usize> = index::sample(&mut rng, total, amount).into_vec();
            picked.sort_unstable();
            let slice = out.as_mut_slice();
            for idx in picked {
                let noise: f64 = StandardNormal.sample(&mut rng);
                slice[idx] = (slice[idx] as f64 + noise) as f32;
            }
            out
        })
        .collect();
    Ok(ds.with_views(views))
}

/// Length of the zeroed run for a view of dimension `d`.
pub fn block_len(fraction: f64, d: usize) -> usize {
    // the epsilon keeps products like 0.2 * 35 = 7.000000000000001 from rounding up
    (((fraction * d as f64) - 1e-9).ceil().max(0.0) as usize).min(d)
}

pub fn corrupt_block(ds: &MultiViewDataset, spec: &CorruptionSpec) -> Result<MultiViewDataset> {
    if spec.kind != CorruptionKind::BlockZero {
        return invalid("corrupt_block needs a block-zero spec");
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let views = ds
        .views()
        .iter()
        .map(|v| {
            let mut out = v.clone();
            let d = out.nrows();
            let len = block_len(spec.fraction, d);
            if len == 0 {
                return out;
            }
            for mut col in out.column_iter_mut() {
                let start = rng.random_range(0..=d - len);
                col.rows_mut(start, len).fill(0.0);
            }
            out
        })
        .collect();
    Ok(ds.with_views(views))
}

/// Disjoint random train/query split. Both parts keep the original sample
/// order.
pub fn split(ds: &MultiViewDataset, n_query: usize, seed: u64) -> Result<(MultiViewDataset, MultiViewDataset)> {
    let n = ds.len();
    if n_query >= n {
        return invalid(format!("cannot take {n_query} queries from {n} samples"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut query: Vec<usize> = perm[..n_query].to_vec();
    let mut train: Vec<usize> = perm[n_query..].to_vec();
    query.sort_unstable();
    train.sort_unstable();
    Ok((ds.select(&train), ds.select(&query)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MultiViewDataset {
        synth_multiview(4, 25, &[100, 30], 0.3, 5).unwrap()
    }

    #[test]
    fn synth_shapes_and_balance() {
        let ds = synth_multiview(10, 200, &[32, 48], 0.5, 1).unwrap();
        assert_eq!(ds.len(), 2000);
        assert_eq!(ds.num_views(), 2);
        let labels = ds.labels().unwrap();
        for c in 0..10 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 200);
        }
    }

    #[test]
    fn synth_noiseless_clusters_are_constant() {
        let ds = synth_multiview(3, 5, &[4, 6], 0.0, 2).unwrap();
        for v in ds.views() {
            for i in 0..15 {
                assert_eq!(v.column(i), v.column((i / 5) * 5));
            }
        }
    }

    #[test]
    fn synth_deterministic_and_validated() {
        assert_eq!(synth_multiview(3, 5, &[4], 0.1, 9).unwrap(), synth_multiview(3, 5, &[4], 0.1, 9).unwrap());
        assert!(synth_multiview(3, 5, &[], 0.1, 9).is_err());
        assert!(synth_multiview(3, 5, &[4, 0], 0.1, 9).is_err());
    }

    #[test]
    fn mismatched_views_rejected() {
        let a = DMatrix::<f32>::zeros(3, 100);
        let b = DMatrix::<f32>::zeros(3, 99);
        assert!(matches!(MultiViewDataset::new("x", vec![a, b], None), Err(Error::Format(_))));
    }

    #[test]
    fn gaussian_fraction_counts() {
        let ds = MultiViewDataset::new("x", vec![DMatrix::from_element(100, 1000, 1.0f32)], None).unwrap();
        let spec = CorruptionSpec::new(CorruptionKind::GaussianFraction, 0.2, 3).unwrap();
        let out = corrupt_gaussian(&ds, &spec).unwrap();
        let changed = out.view(0).iter().zip(ds.view(0).iter()).filter(|(a, b)| a != b).count();
        assert!((18050..=22050).contains(&changed), "{changed}");

        let none = corrupt_gaussian(&ds, &CorruptionSpec::new(CorruptionKind::GaussianFraction, 0.0, 3).unwrap()).unwrap();
        assert_eq!(none, ds);

        let all = corrupt_gaussian(&ds, &CorruptionSpec::new(CorruptionKind::GaussianFraction, 1.0, 3).unwrap()).unwrap();
        let changed = all.view(0).iter().zip(ds.view(0).iter()).filter(|(a, b)| a != b).count();
        assert!(changed as f64 >= 0.999 * 100_000.0);
    }

    #[test]
    fn fraction_out_of_range() {
        assert!(CorruptionSpec::new(CorruptionKind::BlockZero, 1.5, 0).is_err());
        let bad = CorruptionSpec { kind: CorruptionKind::GaussianFraction, fraction: -0.1, seed: 0 };
        assert!(corrupt_gaussian(&small(), &bad).is_err());
    }

    #[test]
    fn block_zero_runs() {
        let ds = MultiViewDataset::new("x", vec![DMatrix::from_element(100, 50, 2.0f32)], None).unwrap();
        let spec = CorruptionSpec::new(CorruptionKind::BlockZero, 0.25, 4).unwrap();
        let out = corrupt_block(&ds, &spec).unwrap();
        for col in out.view(0).column_iter() {
            let zeros: Vec<usize> = (0..100).filter(|&r| col[r] == 0.0).collect();
            assert_eq!(zeros.len(), 25);
            assert_eq!(zeros[24] - zeros[0], 24);
        }
        let id = corrupt_block(&ds, &CorruptionSpec::new(CorruptionKind::BlockZero, 0.0, 4).unwrap()).unwrap();
        assert_eq!(id, ds);
        let full = corrupt_block(&ds, &CorruptionSpec::new(CorruptionKind::BlockZero, 1.0, 4).unwrap()).unwrap();
        assert!(full.view(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn corruption_keeps_shapes_and_labels() {
        let ds = small();
        for kind in [CorruptionKind::GaussianFraction, CorruptionKind::BlockZero] {
            let out = corrupt(&ds, &CorruptionSpec::new(kind, 0.3, 8).unwrap()).unwrap();
            assert_eq!(out.dims(), ds.dims());
            assert_eq!(out.labels(), ds.labels());
            assert_eq!(out, corrupt(&ds, &CorruptionSpec::new(kind, 0.3, 8).unwrap()).unwrap());
        }
    }

    #[test]
    fn split_partitions() {
        let ds = small();
        let (train, query) = split(&ds, 30, 1).unwrap();
        assert_eq!((train.len(), query.len()), (70, 30));
        let mut all: Vec<u64> = train.ids().iter().chain(query.ids()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<u64>>());
        for (pos, &id) in query.ids().iter().enumerate() {
            assert_eq!(query.labels().unwrap()[pos], ds.labels().unwrap()[id as usize]);
        }
        let (t0, q0) = split(&ds, 0, 1).unwrap();
        assert_eq!(t0, ds);
        assert!(q0.is_empty());
        assert!(split(&ds, 100, 1).is_err());
    }

    #[test]
    fn split_paper_scale_counts() {
        let ds = MultiViewDataset::new("x", vec![DMatrix::<f32>::zeros(1, 60_000)], None).unwrap();
        let (train, query) = split(&ds, 1000, 0).unwrap();
        assert_eq!((train.len(), query.len()), (59_000, 1000));
    }
}
