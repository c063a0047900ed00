use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ovs_core::bench::{filter_and_remap, BenchManifest, BuildStatus, InventoryEntry, Thresholds};
use ovs_core::canonical::to_canonical_json;
use serde::Serialize;

use super::score::ScoreFile;
use crate::output::{read_json, write_text, RunConfig};
use crate::BuildArgs;

#[derive(Serialize)]
struct Output<'a> {
    #[serde(flatten)]
    manifest: &'a BenchManifest,
    status: BuildStatus,
    config: RunConfig,
}

fn read_inventory(path: &Path) -> Result<Vec<InventoryEntry>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}: bad inventory line", path.display(), i + 1))
        })
        .collect()
}

fn read_exclusions(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

pub fn run(args: &BuildArgs) -> Result<()> {
    let thresholds = Thresholds {
        sigma1: args.sigma1,
        sigma2: args.sigma2,
    };
    thresholds.validate()?;
    let mut config = RunConfig::new("build")
        .path("inventory", &args.inventory)
        .path("scores", &args.scores)
        .path("out", &args.out);
    config.sigma1 = Some(args.sigma1);
    config.sigma2 = Some(args.sigma2);
    if let Some(p) = &args.exclude {
        config = config.path("exclude", p);
    }

    let scores: ScoreFile = read_json(&args.scores)?;
    let inventory = read_inventory(&args.inventory)?;
    let excluded = match &args.exclude {
        Some(p) => read_exclusions(p)?,
        None => Vec::new(),
    };
    let outcome = filter_and_remap(&inventory, &scores.scores, thresholds, &excluded, &scores.train_vocab_hash)?;
    let kept = outcome.manifest.kept().count();
    eprintln!(
        "ovs: kept {kept} of {} images, {} categories",
        outcome.manifest.records.len(),
        outcome.manifest.final_categories.len()
    );
    if outcome.status == BuildStatus::EmptyBenchmark {
        eprintln!("ovs: warning: no image survived the filter");
    }
    let json = to_canonical_json(&Output {
        manifest: &outcome.manifest,
        status: outcome.status,
        config,
    })?;
    write_text(&args.out, &json)
}
