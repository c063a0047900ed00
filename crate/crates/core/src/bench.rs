//! Benchmark curation by similarity to a training vocabulary.
//!
//! Every candidate category is scored by its best cosine match in the
//! training vocabulary. An image's similarity is the lowest score among the
//! categories it contains. Images above `sigma1` are filtered out; in the
//! images that stay, categories scoring above `sigma2` are folded into
//! [`OTHERS`].

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{cosine_similarity, EmbeddingSet};
use crate::error::{Error, Result};
use crate::io::encode_emb1;
pub use crate::metrics::OTHERS;

pub const MANIFEST_VERSION: &str = "ovs-bench-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub name: String,
    pub max_train_similarity: f64,
}

/// One line of the image inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub image_id: String,
    pub mask_path: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Kept,
    Filtered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemapRule {
    /// Score above `sigma2`.
    Sigma2,
    /// Listed in the manual exclusion list.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Remap {
    pub from: String,
    pub to: String,
    pub rule: RemapRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub mask_path: String,
    pub categories: Vec<String>,
    pub image_similarity: f64,
    pub decision: Decision,
    pub remapped: Vec<Remap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ImageRecord {
    pub fn inventory(&self) -> InventoryEntry {
        InventoryEntry {
            image_id: self.image_id.clone(),
            mask_path: self.mask_path.clone(),
            categories: self.categories.clone(),
        }
    }

    /// Categories left under their own name.
    pub fn retained(&self) -> impl Iterator<Item = &str> {
        self.categories
            .iter()
            .map(String::as_str)
            .filter(|c| !self.remapped.iter().any(|r| r.from == *c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Image-level filter bound.
    pub sigma1: f64,
    /// Category-level remap bound.
    pub sigma2: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            sigma1: 0.8,
            sigma2: 0.8,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma1.is_finite() || !self.sigma2.is_finite() {
            return Err(Error::Config("thresholds must be finite".into()));
        }
        if self.sigma2 > self.sigma1 {
            return Err(Error::Config(format!(
                "sigma2 ({}) must not exceed sigma1 ({})",
                self.sigma2, self.sigma1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub class_count: usize,
    pub image_count: usize,
}

impl SimilarityStats {
    /// Aligned table in the column order Cls Num., Img Num., Mean, Median,
    /// Min, Max.
    pub fn to_table(&self, dataset: &str) -> String {
        let w = dataset.len().max(7);
        format!(
            "{:<w$}  {:>8}  {:>8}  {:>9}  {:>11}  {:>8}  {:>8}\n{:<w$}  {:>8}  {:>8}  {:>9.4}  {:>11.4}  {:>8.4}  {:>8.4}\n",
            "Dataset",
            "Cls Num.",
            "Img Num.",
            "Mean Sim.",
            "Median Sim.",
            "Min Sim.",
            "Max Sim.",
            dataset,
            self.class_count,
            self.image_count,
            self.mean,
            self.median,
            self.min,
            self.max,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub version: String,
    pub train_vocab_hash: String,
    pub sigma1: f64,
    pub sigma2: f64,
    pub excluded_categories: Vec<String>,
    pub records: Vec<ImageRecord>,
    pub final_categories: Vec<String>,
    pub stats: Option<SimilarityStats>,
}

impl BenchManifest {
    pub fn kept(&self) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(|r| r.decision == Decision::Kept)
    }

    /// Class id of `name` in [`Self::final_categories`].
    pub fn class_id(&self, name: &str) -> Option<u16> {
        self.final_categories
            .iter()
            .position(|c| c == name)
            .and_then(|i| u16::try_from(i).ok())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildStatus {
    Ok,
    /// No image survived; the manifest is still written.
    EmptyBenchmark,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub manifest: BenchManifest,
    pub status: BuildStatus,
}

/// Name-to-score lookup.
#[derive(Debug, Clone)]
pub struct ScoreTable<'a> {
    by_name: HashMap<&'a str, f64>,
}

impl<'a> ScoreTable<'a> {
    pub fn new(scores: &'a [CategoryScore]) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(scores.len());
        for s in scores {
            if by_name.insert(s.name.as_str(), s.max_train_similarity).is_some() {
                return Err(Error::Degenerate(format!("category `{}` is scored twice", s.name)));
            }
        }
        Ok(ScoreTable { by_name })
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnscoredCategory(name.to_owned()))
    }
}

/// Best cosine match of each candidate against the training vocabulary, in
/// candidate order.
pub fn score_categories(candidates: &EmbeddingSet, train_vocab: &EmbeddingSet) -> Result<Vec<CategoryScore>> {
    let names = candidates
        .labels()
        .ok_or_else(|| Error::MissingLabels("candidate vocabulary is unlabeled".into()))?;
    if train_vocab.labels().is_none() {
        return Err(Error::MissingLabels("training vocabulary is unlabeled".into()));
    }
    if train_vocab.is_empty() {
        return Err(Error::EmptyInput("training vocabulary has no rows".into()));
    }
    if candidates.dim() != train_vocab.dim() {
        return Err(Error::Shape(format!(
            "candidates have dimension {} but the training vocabulary has {}",
            candidates.dim(),
            train_vocab.dim()
        )));
    }
    candidates
        .rows()
        .zip(names)
        .map(|(row, name)| {
            let mut best = f64::NEG_INFINITY;
            for t in train_vocab.rows() {
                best = best.max(cosine_similarity(row, t)?);
            }
            Ok(CategoryScore {
                name: name.clone(),
                max_train_similarity: best,
            })
        })
        .collect()
}

/// Lowest score among `categories`.
pub fn image_similarity<S: AsRef<str>>(categories: &[S], scores: &ScoreTable<'_>) -> Result<f64> {
    if categories.is_empty() {
        return Err(Error::EmptyInput("image lists no categories".into()));
    }
    categories
        .iter()
        .try_fold(f64::INFINITY, |acc, c| Ok(acc.min(scores.get(c.as_ref())?)))
}

pub fn similarity_stats(scores: &[CategoryScore]) -> Result<SimilarityStats> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores to summarize".into()));
    }
    let mut v: Vec<f64> = scores.iter().map(|s| s.max_train_similarity).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    Ok(SimilarityStats {
        mean: v.iter().sum::<f64>() / n as f64,
        median,
        min: v[0],
        max: v[n - 1],
        class_count: n,
        image_count: 0,
    })
}

/// SHA-256 over the EMB1 bytes and the labels of a vocabulary.
pub fn vocab_hash(set: &EmbeddingSet) -> Result<String> {
    let bytes = encode_emb1(set).map_err(|k| Error::Degenerate(k.to_string()))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    for l in set.labels().unwrap_or_default() {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l.as_bytes());
    }
    Ok(format!("sha256:{:x}", h.finalize()))
}

/// Applies the filter and remap rules to every inventory entry.
///
/// `excluded` is the manual exclusion list: those categories never survive
/// under their own name and are folded into [`OTHERS`] in kept images. Images
/// left with no category of their own are dropped with a reason.
pub fn filter_and_remap(
    inventory: &[InventoryEntry],
    scores: &[CategoryScore],
    thresholds: Thresholds,
    excluded: &[String],
    train_vocab_hash: &str,
) -> Result<BuildOutcome> {
    thresholds.validate()?;
    let table = ScoreTable::new(scores)?;
    let excluded_set: BTreeSet<&str> = excluded.iter().map(String::as_str).collect();

    let mut records = Vec::with_capacity(inventory.len());
    for entry in inventory {
        if entry.categories.iter().any(|c| c == OTHERS) {
            return Err(Error::Degenerate(format!(
                "image `{}` lists the reserved category `{OTHERS}`",
                entry.image_id
            )));
        }
        let sim = image_similarity(&entry.categories, &table).map_err(|e| match e {
            Error::EmptyInput(_) => Error::EmptyInput(format!("image `{}` lists no categories", entry.image_id)),
            other => other,
        })?;
        let mut record = ImageRecord {
            image_id: entry.image_id.clone(),
            mask_path: entry.mask_path.clone(),
            categories: entry.categories.clone(),
            image_similarity: sim,
            decision: Decision::Filtered,
            remapped: Vec::new(),
            reason: None,
        };
        if sim > thresholds.sigma1 {
            record.reason = Some(format!("image similarity above sigma1 {}", thresholds.sigma1));
            records.push(record);
            continue;
        }
        let mut seen = BTreeSet::new();
        for c in &entry.categories {
            if !seen.insert(c.as_str()) {
                continue;
            }
            let rule = if table.get(c)? > thresholds.sigma2 {
                Some(RemapRule::Sigma2)
            } else if excluded_set.contains(c.as_str()) {
                Some(RemapRule::Excluded)
            } else {
                None
            };
            if let Some(rule) = rule {
                record.remapped.push(Remap {
                    from: c.clone(),
                    to: OTHERS.to_owned(),
                    rule,
                });
            }
        }
        if record.retained().next().is_none() {
            record.reason = Some(format!("every category was remapped to `{OTHERS}`"));
        } else {
            record.decision = Decision::Kept;
        }
        records.push(record);
    }

    let retained: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.decision == Decision::Kept)
        .flat_map(ImageRecord::retained)
        .collect();
    let kept_images = records.iter().filter(|r| r.decision == Decision::Kept).count();
    let final_scores: Vec<CategoryScore> = retained
        .iter()
        .map(|&c| {
            Ok(CategoryScore {
                name: c.to_owned(),
                max_train_similarity: table.get(c)?,
            })
        })
        .collect::<Result<_>>()?;
    let stats = if final_scores.is_empty() {
        None
    } else {
        let mut s = similarity_stats(&final_scores)?;
        s.image_count = kept_images;
        Some(s)
    };
    let mut final_categories: Vec<String> = retained.into_iter().map(str::to_owned).collect();
    final_categories.push(OTHERS.to_owned());

    let status = if kept_images == 0 {
        BuildStatus::EmptyBenchmark
    } else {
        BuildStatus::Ok
    };
    Ok(BuildOutcome {
        manifest: BenchManifest {
            version: MANIFEST_VERSION.to_owned(),
            train_vocab_hash: train_vocab_hash.to_owned(),
            sigma1: thresholds.sigma1,
            sigma2: thresholds.sigma2,
            excluded_categories: excluded_set.into_iter().map(str::to_owned).collect(),
            records,
            final_categories,
            stats,
        },
        status,
    })
}
