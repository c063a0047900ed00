//! Numerical core for open-vocabulary segmentation tooling: gradient-free
//! embedding fusion, proxy calibration by Beta mixing, benchmark curation by
//! vocabulary similarity, and mIoU evaluation.

pub mod bench;
pub mod canonical;
pub mod embedding;
pub mod error;
pub mod gfa;
pub mod io;
pub mod metrics;
pub mod proxy;
pub mod spectral;

pub use embedding::{cosine_similarity, l2_normalize, mask_pool, BinaryMask, Embedding, EmbeddingSet, FeatureMap};
pub use error::{Error, ErrorClass, FormatError, Result};
pub use gfa::{FusionConfig, FusionResult, NormalizeMode, ReduceMode};
pub use metrics::{ConfusionAccumulator, MiouMode, SegMask, IGNORE, OTHERS};
pub use proxy::{Pairing, ProxyBatch, ProxyConfig};
