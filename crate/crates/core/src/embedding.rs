//! Vector primitives shared by every other module.
//!
//! Storage is always `f64`. Files carry `f32`, but every dot product and norm
//! here accumulates in double precision.

use std::collections::HashSet;
use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("embedding has dimension 0".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "embedding entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Embedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for Embedding {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Embedding::new(values)
    }
}

/// `N` row vectors of a shared dimension, optionally labeled.
///
/// Rows are stored contiguously in row-major order. `N = 0` is allowed (an
/// empty vocabulary is a valid file) but the dimension is always at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl EmbeddingSet {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Degenerate("embedding dimension must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} values do not divide into rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "row {} column {} is not finite",
                i / dim,
                i % dim
            )));
        }
        Ok(EmbeddingSet {
            dim,
            data,
            labels: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::EmptyInput("cannot infer dimension from zero rows".into()))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Shape(format!(
                    "row {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    pub fn from_embeddings(rows: &[Embedding]) -> Result<Self> {
        Self::from_rows(rows)
    }

    /// Builds a set from the rows of a matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = m.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(m.row(i).iter());
        }
        Self::from_flat(d, data)
    }

    pub fn with_labels<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                self.len()
            )));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Degenerate(format!("duplicate label `{l}`")));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[i].as_str())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.data)
    }

    /// Returns a copy whose rows are scaled to unit L2 norm.
    pub fn normalized(&self) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows().enumerate() {
            let n = norm(row);
            if n == 0.0 {
                return Err(Error::Degenerate(format!("row {i} has zero norm")));
            }
            data.extend(row.iter().map(|v| v / n));
        }
        Ok(EmbeddingSet {
            dim: self.dim,
            data,
            labels: self.labels.clone(),
        })
    }

    /// Concatenates the rows of `other` below `self`. Labels are kept only when
    /// both sides carry them.
    pub fn concat(&self, other: &EmbeddingSet) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "cannot stack dimension {} onto dimension {}",
                other.dim, self.dim
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        let out = EmbeddingSet {
            dim: self.dim,
            data,
            labels: None,
        };
        match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => out.with_labels(a.iter().chain(b).cloned()),
            _ => Ok(out),
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingSet {
            dim: self.dim,
            data,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }
}

/// H x W grid of `channels`-dimensional feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "feature map {height}x{width}x{channels} has an empty axis"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "feature map {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("feature map contains non-finite values".into()));
        }
        Ok(FeatureMap {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }
}

/// Per-pixel selection over an H x W image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Shape(format!(
                "mask {height}x{width} needs {} entries, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(BinaryMask { height, width, bits })
    }

    pub fn full(height: usize, width: usize) -> Self {
        BinaryMask {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of the angle between `a` and `b`, clamped into `[-1, 1]`.
///
/// Zero-norm inputs are an error rather than a silent 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine of dimension {} against dimension {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("cosine similarity of a zero-norm vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn l2_normalize(a: &[f64]) -> Result<Embedding> {
    let n = norm(a);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Degenerate("cannot normalize a zero-norm vector".into()));
    }
    Embedding::new(a.iter().map(|v| v / n).collect())
}

/// Unweighted mean of the feature vectors under `mask`.
pub fn mask_pool(features: &FeatureMap, mask: &BinaryMask) -> Result<Embedding> {
    if features.height != mask.height || features.width != mask.width {
        return Err(Error::Shape(format!(
            "mask {}x{} does not match feature map {}x{}",
            mask.height, mask.width, features.height, features.width
        )));
    }
    let mut acc = vec![0.0f64; features.channels];
    let mut count = 0usize;
    for (px, &on) in features.data.chunks_exact(features.channels).zip(&mask.bits) {
        if on {
            acc.iter_mut().zip(px).for_each(|(a, v)| *a += v);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    let inv = 1.0 / count as f64;
    Embedding::new(acc.into_iter().map(|v| v * inv).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn cosine_rejects_zero_and_mismatch() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn normalize_examples() {
        let n = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!((n[0] - 0.6).abs() < 1e-15 && (n[1] - 0.8).abs() < 1e-15);
        let unit = [0.0, 1.0, 0.0];
        assert_eq!(l2_normalize(&unit).unwrap().as_slice(), &unit);
        assert!(l2_normalize(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn embedding_rejects_nan_and_empty() {
        assert!(Embedding::new(vec![]).is_err());
        assert!(Embedding::new(vec![1.0, f64::NAN]).is_err());
        assert!(EmbeddingSet::from_flat(2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn labels_must_be_unique_and_aligned() {
        let s = EmbeddingSet::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(s.clone().with_labels(["a"]).is_err());
        assert!(s.clone().with_labels(["a", "a"]).is_err());
        let s = s.with_labels(["a", "b"]).unwrap();
        assert_eq!(s.label(1), Some("b"));
    }

    #[test]
    fn mask_pool_examples() {
        let fm = FeatureMap::new(2, 2, 2, [1.5, -2.0].repeat(4)).unwrap();
        let mask = BinaryMask::new(2, 2, vec![true, false, false, true]).unwrap();
        assert_eq!(mask_pool(&fm, &mask).unwrap().as_slice(), &[1.5, -2.0]);

        let fm = FeatureMap::new(1, 3, 2, vec![1.0, 0.0, 0.0, 1.0, 9.0, 9.0]).unwrap();
        let mask = BinaryMask::new(1, 3, vec![true, true, false]).unwrap();
        assert_eq!(mask_pool(&fm, &mask).unwrap().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn mask_pool_errors() {
        let fm = FeatureMap::new(2, 2, 1, vec![1.0; 4]).unwrap();
        let empty = BinaryMask::new(2, 2, vec![false; 4]).unwrap();
        assert!(matches!(mask_pool(&fm, &empty), Err(Error::EmptyRegion)));
        let wrong = BinaryMask::full(3, 2);
        assert!(matches!(mask_pool(&fm, &wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn mask_pool_matches_pixel_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (h, w, c) = (4, 4, 3);
            let data: Vec<f64> = (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut bits: Vec<bool> = (0..h * w).map(|_| rng.gen_bool(0.4)).collect();
            bits[rng.gen_range(0..h * w)] = true;
            let fm = FeatureMap::new(h, w, c, data.clone()).unwrap();
            let mask = BinaryMask::new(h, w, bits.clone()).unwrap();

            let mut sums = vec![0.0; c];
            let mut count = 0.0;
            for y in 0..h {
                for x in 0..w {
                    if bits[y * w + x] {
                        count += 1.0;
                        for ch in 0..c {
                            sums[ch] += data[(y * w + x) * c + ch];
                        }
                    }
                }
            }
            let pooled = mask_pool(&fm, &mask).unwrap();
            for ch in 0..c {
                assert!((pooled[ch] - sums[ch] / count).abs() < 1e-12);
            }
        }
    }

    fn nonzero_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, d).prop_filter("nonzero", |v| norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn self_cosine_is_one(a in nonzero_vec(6)) {
            prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn cosine_is_scale_invariant_and_symmetric(
            a in nonzero_vec(5), b in nonzero_vec(5), s in 0.01f64..100.0
        ) {
            let base = cosine_similarity(&a, &b).unwrap();
            let scaled: Vec<f64> = a.iter().map(|v| v * s).collect();
            prop_assert!((cosine_similarity(&scaled, &b).unwrap() - base).abs() < 1e-9);
            prop_assert!((cosine_similarity(&b, &a).unwrap() - base).abs() < 1e-15);
        }

        #[test]
        fn normalize_is_idempotent(a in nonzero_vec(7)) {
            let once = l2_normalize(&a).unwrap();
            prop_assert!((once.norm() - 1.0).abs() < 1e-9);
            let twice = l2_normalize(&once).unwrap();
            for (x, y) in once.iter().zip(twice.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn full_mask_pool_is_global_mean(data in prop::collection::vec(-5.0f64..5.0, 3 * 2 * 4)) {
            let fm = FeatureMap::new(3, 2, 4, data.clone()).unwrap();
            let pooled = mask_pool(&fm, &BinaryMask::full(3, 2)).unwrap();
            for ch in 0..4 {
                let mean: f64 = data.iter().skip(ch).step_by(4).sum::<f64>() / 6.0;
                prop_assert!((pooled[ch] - mean).abs() < 1e-12);
            }
        }
    }
}
