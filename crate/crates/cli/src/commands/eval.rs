use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ovs_core::bench::BenchManifest;
use ovs_core::io::read_mask;
use ovs_core::metrics::MiouReport;
use ovs_core::{ConfusionAccumulator, Error, MiouMode, SegMask};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{read_json, to_pretty_json, write_text, RunConfig};
use crate::EvalArgs;

pub const METRICS_VERSION: &str = "ovs-metrics/1";

#[derive(Serialize)]
struct Output {
    version: &'static str,
    manifest_version: String,
    train_vocab_hash: String,
    images_evaluated: usize,
    miou: f64,
    miou_present_classes: f64,
    miou_all_classes: f64,
    report: MiouReport,
    config: RunConfig,
}

/// `<dir>/<image_id>.msk1`, falling back to `.png`.
fn locate(dir: &Path, image_id: &str) -> Option<PathBuf> {
    ["msk1", "png"]
        .iter()
        .map(|ext| dir.join(format!("{image_id}.{ext}")))
        .find(|p| p.is_file())
}

fn load(dir: &Path, image_id: &str, what: &str) -> Result<SegMask> {
    let path = locate(dir, image_id).ok_or_else(|| {
        Error::EmptyInput(format!(
            "no {what} mask for image `{image_id}` in {}",
            dir.display()
        ))
    })?;
    read_mask(&path).with_context(|| format!("{what} mask of image `{image_id}`"))
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let mode: MiouMode = args.miou_mode.into();
    let mut config = RunConfig::new("eval")
        .path("manifest", &args.manifest)
        .path("pred_dir", &args.pred_dir)
        .path("gt_dir", &args.gt_dir);
    if let Some(p) = &args.out {
        config = config.path("out", p);
    }
    config.miou_mode = Some(mode);
    config.include_others = Some(args.include_others);

    let manifest: BenchManifest = read_json(&args.manifest)?;
    let template = ConfusionAccumulator::new(manifest.final_categories.clone())?;
    let kept: Vec<&str> = manifest.kept().map(|r| r.image_id.as_str()).collect();
    eprintln!("ovs: evaluating {} images", kept.len());

    let per_image: Vec<Result<ConfusionAccumulator>> = kept
        .par_iter()
        .map(|&id| {
            let gt = load(&args.gt_dir, id, "ground-truth")?;
            let pred = load(&args.pred_dir, id, "prediction")?;
            let mut acc = template.clone();
            acc.update(&gt, &pred)
                .with_context(|| format!("image `{id}`"))?;
            Ok(acc)
        })
        .collect();
    // Merged in manifest order so the first error and the sums are stable.
    let mut total = template.clone();
    for acc in per_image {
        total.merge(&acc?)?;
    }

    let report = total.miou(mode, args.include_others)?;
    eprint!("{}", report.to_table());
    let out = Output {
        version: METRICS_VERSION,
        manifest_version: manifest.version.clone(),
        train_vocab_hash: manifest.train_vocab_hash.clone(),
        images_evaluated: kept.len(),
        miou: report.miou,
        miou_present_classes: total.miou(MiouMode::PresentClasses, args.include_others)?.miou,
        miou_all_classes: total.miou(MiouMode::AllClasses, args.include_others)?.miou,
        report,
        config,
    };
    let json = to_pretty_json(&out);
    match &args.out {
        Some(p) => write_text(p, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}
