//! On-disk formats.
//!
//! EMB1 (embeddings):
//!
//! ```text
//! offset 0   magic "EMB1"
//! offset 4   count  u32 LE
//! offset 8   dim    u32 LE
//! offset 12  count * dim f32 LE, row-major
//! ```
//!
//! Labels live next to the binary in `<file>.labels.json` as a JSON array of
//! strings (an object keyed by row index is accepted on read).
//!
//! MSK1 (masks):
//!
//! ```text
//! offset 0   magic "MSK1"
//! offset 4   width  u32 LE
//! offset 8   height u32 LE
//! offset 12  height * width u16 LE class ids, row-major; 65535 = ignore
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::embedding::{Embedding, EmbeddingSet};
use crate::error::{Error, FormatError, Result};
use crate::metrics::SegMask;

pub const EMB1_MAGIC: [u8; 4] = *b"EMB1";
pub const MSK1_MAGIC: [u8; 4] = *b"MSK1";
pub const HEADER_LEN: usize = 12;

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".labels.json");
    PathBuf::from(name)
}

pub fn encode_emb1(set: &EmbeddingSet) -> std::result::Result<Vec<u8>, FormatError> {
    let count = u32::try_from(set.len()).map_err(|_| FormatError::TooLarge(set.len()))?;
    let dim = u32::try_from(set.dim()).map_err(|_| FormatError::TooLarge(set.dim()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + set.as_flat().len() * 4);
    out.extend_from_slice(&EMB1_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for (i, &v) in set.as_flat().iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(FormatError::NonFinite {
                row: i / set.dim(),
                col: i % set.dim(),
            });
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_emb1(bytes: &[u8]) -> std::result::Result<EmbeddingSet, FormatError> {
    let (count, dim) = read_header(bytes, EMB1_MAGIC)?;
    let expected = payload_len(count, dim, 4)?;
    check_len(bytes, expected)?;
    if dim == 0 {
        return Err(FormatError::Sidecar("EMB1 header declares dimension 0".into()));
    }
    let mut data = Vec::with_capacity(count as usize * dim as usize);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(FormatError::NonFinite {
                row: i / dim as usize,
                col: i % dim as usize,
            });
        }
        data.push(v as f64);
    }
    Ok(EmbeddingSet::from_flat(dim as usize, data).expect("validated payload"))
}

/// Writes the binary and, when the set is labeled, its label sidecar.
pub fn write_emb1(path: &Path, set: &EmbeddingSet) -> Result<()> {
    let bytes = encode_emb1(set).map_err(|k| Error::format(path, k))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    if let Some(labels) = set.labels() {
        let side = sidecar_path(path);
        let json = serde_json::to_vec_pretty(labels).map_err(|e| Error::Json {
            path: side.clone(),
            source: e,
        })?;
        fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    }
    Ok(())
}

/// Reads an EMB1 file, attaching labels from its sidecar when one exists.
pub fn read_emb1(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let set = decode_emb1(&bytes).map_err(|k| Error::format(path, k))?;
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(set);
    }
    let labels = read_labels(&side, set.len())?;
    set.with_labels(labels).map_err(|e| {
        Error::format(&side, FormatError::Sidecar(e.to_string()))
    })
}

/// Like [`read_emb1`] but fails when the label sidecar is missing.
pub fn read_labeled_emb1(path: &Path) -> Result<EmbeddingSet> {
    let set = read_emb1(path)?;
    if set.labels().is_none() {
        return Err(Error::MissingLabels(format!(
            "{} has no label sidecar {}",
            path.display(),
            sidecar_path(path).display()
        )));
    }
    Ok(set)
}

fn read_labels(side: &Path, count: usize) -> Result<Vec<String>> {
    let text = fs::read(side).map_err(|e| Error::io(side, e))?;
    let value: serde_json::Value = serde_json::from_slice(&text).map_err(|e| Error::Json {
        path: side.to_path_buf(),
        source: e,
    })?;
    let bad = |msg: String| Error::format(side, FormatError::Sidecar(msg));
    let labels: Vec<String> = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(|v| match v {
                serde_json::Value::String(s) => Ok(s),
                other => Err(bad(format!("label {other} is not a string"))),
            })
            .collect::<Result<_>>()?,
        serde_json::Value::Object(map) => {
            let mut by_index = BTreeMap::new();
            for (k, v) in map {
                let idx: usize = k.parse().map_err(|_| bad(format!("key `{k}` is not a row index")))?;
                let s = v
                    .as_str()
                    .ok_or_else(|| bad(format!("label for row {idx} is not a string")))?;
                by_index.insert(idx, s.to_owned());
            }
            if by_index.keys().copied().ne(0..by_index.len()) {
                return Err(bad("row indices are not contiguous from 0".into()));
            }
            by_index.into_values().collect()
        }
        _ => return Err(bad("expected an array or an object of labels".into())),
    };
    if labels.len() != count {
        return Err(bad(format!("{} labels for {count} rows", labels.len())));
    }
    Ok(labels)
}

pub fn encode_msk1(mask: &SegMask) -> std::result::Result<Vec<u8>, FormatError> {
    let w = u32::try_from(mask.width()).map_err(|_| FormatError::TooLarge(mask.width()))?;
    let h = u32::try_from(mask.height()).map_err(|_| FormatError::TooLarge(mask.height()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + mask.labels().len() * 2);
    out.extend_from_slice(&MSK1_MAGIC);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for id in mask.labels() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_msk1(bytes: &[u8]) -> std::result::Result<SegMask, FormatError> {
    let (w, h) = read_header(bytes, MSK1_MAGIC)?;
    check_len(bytes, payload_len(w, h, 2)?)?;
    let labels = bytes[HEADER_LEN..]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    SegMask::new(w as usize, h as usize, labels).map_err(|e| FormatError::Sidecar(e.to_string()))
}

pub fn write_msk1(path: &Path, mask: &SegMask) -> Result<()> {
    let bytes = encode_msk1(mask).map_err(|k| Error::format(path, k))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_msk1(path: &Path) -> Result<SegMask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_msk1(&bytes).map_err(|k| Error::format(path, k))
}

/// Reads a 16-bit single-channel PNG where each pixel value is a class id.
pub fn read_png_mask(path: &Path) -> Result<SegMask> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let png_err = |e: png::DecodingError| Error::format(path, FormatError::Png(e.to_string()));
    let mut decoder = png::Decoder::new(file);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    if frame.color_type != png::ColorType::Grayscale || frame.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::format(
            path,
            FormatError::Png(format!(
                "expected 16-bit grayscale, got {:?} at {:?}",
                frame.color_type, frame.bit_depth
            )),
        ));
    }
    let labels = buf[..frame.buffer_size()]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    SegMask::new(frame.width as usize, frame.height as usize, labels)
}

pub fn write_png_mask(path: &Path, mask: &SegMask) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let png_err = |e: png::EncodingError| Error::format(path, FormatError::Png(e.to_string()));
    let mut encoder = png::Encoder::new(
        std::io::BufWriter::new(file),
        mask.width() as u32,
        mask.height() as u32,
    );
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder.write_header().map_err(png_err)?;
    let data: Vec<u8> = mask.labels().iter().flat_map(|v| v.to_be_bytes()).collect();
    writer.write_image_data(&data).map_err(png_err)
}

/// Reads a mask by extension: `.png` through the PNG adapter, anything else
/// as MSK1.
pub fn read_mask(path: &Path) -> Result<SegMask> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => read_png_mask(path),
        _ => read_msk1(path),
    }
}

/// Deterministic stand-in for a text encoder: a unit vector drawn from a
/// standard normal seeded by SHA-256 of `(seed, label)`.
pub fn pseudo_encode(label: &str, dim: usize, seed: u64) -> Embedding {
    assert!(dim >= 2, "pseudo_encode needs dim >= 2");
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = crate::embedding::norm(&v);
        if n > 0.0 {
            return Embedding::new(v.into_iter().map(|x| x / n).collect()).expect("finite draw");
        }
    }
}

/// Pseudo-encodes every label into a labeled set.
pub fn pseudo_encode_set(labels: &[String], dim: usize, seed: u64) -> Result<EmbeddingSet> {
    let rows: Vec<Embedding> = labels.iter().map(|l| pseudo_encode(l, dim, seed)).collect();
    if rows.is_empty() {
        return EmbeddingSet::from_flat(dim, Vec::new())?.with_labels(labels.iter().cloned());
    }
    EmbeddingSet::from_embeddings(&rows)?.with_labels(labels.iter().cloned())
}

fn read_header(bytes: &[u8], magic: [u8; 4]) -> std::result::Result<(u32, u32), FormatError> {
    if bytes.len() >= 4 && bytes[..4] != magic {
        return Err(FormatError::BadMagic {
            expected: magic,
            found: bytes[..4].to_vec(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let a = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let b = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    Ok((a, b))
}

fn payload_len(a: u32, b: u32, width: u64) -> std::result::Result<u64, FormatError> {
    (a as u64)
        .checked_mul(b as u64)
        .and_then(|n| n.checked_mul(width))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .ok_or(FormatError::TooLarge(usize::MAX))
}

fn check_len(bytes: &[u8], expected: u64) -> std::result::Result<(), FormatError> {
    let actual = bytes.len() as u64;
    if actual < expected {
        Err(FormatError::Truncated { expected, actual })
    } else if actual > expected {
        Err(FormatError::TrailingBytes { expected, actual })
    } else {
        Ok(())
    }
}
