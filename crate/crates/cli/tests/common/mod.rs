#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ovs_core::io::{pseudo_encode, write_emb1, write_msk1};
use ovs_core::{EmbeddingSet, SegMask, IGNORE};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIM: usize = 32;

pub fn ovs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ovs"))
        .current_dir(dir)
        .args(args)
        .env_remove("OVS_JOBS")
        .output()
        .expect("spawn ovs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[track_caller]
pub fn ok(out: Output) -> Output {
    assert!(out.status.success(), "ovs failed: {}", stderr(&out));
    out
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn labeled(rows: &[Vec<f64>], labels: &[String]) -> EmbeddingSet {
    EmbeddingSet::from_rows(rows).unwrap().with_labels(labels.iter().cloned()).unwrap()
}

pub struct Toy {
    pub train_names: Vec<String>,
    pub train: Vec<Vec<f64>>,
    pub cat_names: Vec<String>,
    pub cats: Vec<Vec<f64>>,
    /// (image_id, categories)
    pub images: Vec<(String, Vec<String>)>,
}

/// Ten candidate categories whose similarity to a twelve-name training
/// vocabulary spreads from near zero up to one, and thirty images of one to
/// four categories each.
pub fn toy_corpus(seed: u64) -> Toy {
    let train_names: Vec<String> = (0..12).map(|i| format!("train_{i}")).collect();
    let train: Vec<Vec<f64>> = train_names
        .iter()
        .map(|n| pseudo_encode(n, DIM, seed).into_vec())
        .collect();
    let cat_names: Vec<String> = (0..10).map(|i| format!("cat_{i}")).collect();
    let cats: Vec<Vec<f64>> = cat_names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let own = pseudo_encode(n, DIM, seed);
            let beta = k as f64 / 9.0;
            let mixed: Vec<f64> = own
                .iter()
                .zip(&train[k])
                .map(|(o, t)| beta * t + (1.0 - beta) * o)
                .collect();
            unit(&mixed)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..30)
        .map(|i| {
            let k = rng.gen_range(1..=4);
            let mut names = cat_names.clone();
            names.shuffle(&mut rng);
            names.truncate(k);
            (format!("img_{i:02}"), names)
        })
        .collect();
    Toy {
        train_names,
        train,
        cat_names,
        cats,
        images,
    }
}

impl Toy {
    pub fn inventory_jsonl(&self) -> String {
        self.images
            .iter()
            .map(|(id, cats)| {
                serde_json::json!({"image_id": id, "mask_path": format!("gt/{id}.msk1"), "categories": cats})
                    .to_string()
                    + "\n"
            })
            .collect()
    }

    pub fn write_inputs(&self, dir: &Path) {
        write_emb1(&dir.join("candidates.emb1"), &labeled(&self.cats, &self.cat_names)).unwrap();
        write_emb1(&dir.join("train.emb1"), &labeled(&self.train, &self.train_names)).unwrap();
        fs::write(dir.join("inventory.jsonl"), self.inventory_jsonl()).unwrap();
    }

    pub fn embedding(&self, name: &str) -> Vec<f64> {
        match self.cat_names.iter().position(|c| c == name) {
            Some(k) => self.cats[k].clone(),
            None => pseudo_encode(name, DIM, 99).into_vec(),
        }
    }
}

/// An 8x8 mask split into horizontal bands, one per id, plus a few ignore
/// pixels.
pub fn band_mask(ids: &[u16], rng: &mut ChaCha8Rng) -> SegMask {
    let (w, h) = (8, 8);
    let labels = (0..w * h)
        .map(|p| {
            if rng.gen_bool(0.05) {
                IGNORE
            } else {
                ids[(p / w) * ids.len() / h]
            }
        })
        .collect();
    SegMask::new(w, h, labels).unwrap()
}

/// Copies `gt` with a fraction of the labeled pixels flipped to other ids.
pub fn noisy_prediction(gt: &SegMask, classes: u16, flip: f64, rng: &mut ChaCha8Rng) -> SegMask {
    let labels = gt
        .labels()
        .iter()
        .map(|&l| {
            if l == IGNORE || rng.gen_bool(flip) {
                rng.gen_range(0..classes)
            } else {
                l
            }
        })
        .collect();
    SegMask::new(gt.width(), gt.height(), labels).unwrap()
}

pub fn write_mask(dir: &Path, id: &str, mask: &SegMask) {
    fs::create_dir_all(dir).unwrap();
    write_msk1(&dir.join(format!("{id}.msk1")), mask).unwrap();
}
