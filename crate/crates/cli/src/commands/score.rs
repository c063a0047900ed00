use anyhow::Result;
use ovs_core::bench::{score_categories, similarity_stats, vocab_hash, CategoryScore, SimilarityStats};
use ovs_core::io::read_labeled_emb1;
use serde::{Deserialize, Serialize};

use crate::output::{to_pretty_json, write_text, RunConfig};
use crate::ScoreArgs;

pub const SCORES_VERSION: &str = "ovs-scores/1";

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreFile {
    pub version: String,
    pub train_vocab_hash: String,
    pub scores: Vec<CategoryScore>,
    pub stats: SimilarityStats,
}

#[derive(Serialize)]
struct Output<'a> {
    #[serde(flatten)]
    file: &'a ScoreFile,
    config: RunConfig,
}

pub fn run(args: &ScoreArgs) -> Result<()> {
    let config = RunConfig::new("score")
        .path("candidates", &args.candidates)
        .path("train_vocab", &args.train_vocab)
        .path("out", &args.out);
    let candidates = read_labeled_emb1(&args.candidates)?;
    let train = read_labeled_emb1(&args.train_vocab)?;
    eprintln!(
        "ovs: scoring {} candidates against {} training categories",
        candidates.len(),
        train.len()
    );
    let scores = score_categories(&candidates, &train)?;
    let stats = similarity_stats(&scores)?;
    let file = ScoreFile {
        version: SCORES_VERSION.to_owned(),
        train_vocab_hash: vocab_hash(&train)?,
        scores,
        stats,
    };
    write_text(&args.out, &to_pretty_json(&Output { file: &file, config }))?;
    print!("{}", file.stats.to_table(&args.dataset_name));
    Ok(())
}
