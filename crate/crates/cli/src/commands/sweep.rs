use anyhow::Result;
use ovs_core::io::{read_emb1, read_labeled_emb1, read_mask};
use ovs_core::metrics::{class_count_sweep, Region, SweepConfig, SweepImage, SweepResult};
use ovs_core::{Embedding, Error};
use serde::Serialize;

use crate::output::{run_sidecar, to_pretty_json, write_text, RunConfig};
use crate::{Invalid, SweepArgs};

#[derive(Serialize)]
struct Output<'a> {
    version: &'static str,
    images: usize,
    regions: usize,
    result: &'a SweepResult,
    config: RunConfig,
}

pub const SWEEP_VERSION: &str = "ovs-sweep/1";

fn parse_label(label: &str) -> Result<(&str, u16)> {
    let bad = || Error::Degenerate(format!("region label `{label}` is not `<image_id>:<class_id>`"));
    let (image, class) = label.rsplit_once(':').ok_or_else(bad)?;
    let class = class.parse().map_err(|_| bad())?;
    if image.is_empty() {
        return Err(bad().into());
    }
    Ok((image, class))
}

fn load_images(args: &SweepArgs) -> Result<(Vec<SweepImage>, usize)> {
    let regions = read_labeled_emb1(&args.regions)?;
    let mut images: Vec<(String, SweepImage)> = Vec::new();
    for (i, row) in regions.rows().enumerate() {
        let label = regions.label(i).expect("labeled set");
        let (image_id, class) = parse_label(label)?;
        let slot = match images.iter().position(|(id, _)| id == image_id) {
            Some(k) => k,
            None => {
                let gt = read_mask(&args.gt_dir.join(format!("{image_id}.msk1")))
                    .or_else(|_| read_mask(&args.gt_dir.join(format!("{image_id}.png"))))?;
                images.push((image_id.to_owned(), SweepImage { gt, regions: Vec::new() }));
                images.len() - 1
            }
        };
        let image = &mut images[slot].1;
        let mask = image.gt.binary(class);
        if mask.count() == 0 {
            return Err(Error::Degenerate(format!(
                "region `{label}`: class {class} does not occur in the ground truth"
            ))
            .into());
        }
        image.regions.push(Region {
            mask,
            embedding: Embedding::new(row.to_vec())?,
        });
    }
    let count = regions.len();
    Ok((images.into_iter().map(|(_, im)| im).collect(), count))
}

pub fn run(args: &SweepArgs) -> Result<()> {
    if args.steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Invalid(format!("--steps must be strictly increasing, got {:?}", args.steps)).into());
    }
    let cfg = SweepConfig {
        steps: args.steps.clone(),
        seed: args.seed,
        tie_break: args.tie_break.into(),
        miou_mode: args.miou_mode.into(),
        include_others: args.include_others,
        distractor_source: args.distractors.display().to_string(),
    };
    let mut config = RunConfig::new("sweep")
        .path("regions", &args.regions)
        .path("gt_dir", &args.gt_dir)
        .path("base_classes", &args.base_classes)
        .path("distractors", &args.distractors)
        .path("out", &args.out)
        .extra("steps", &cfg.steps)
        .extra("tie_break", cfg.tie_break);
    config.seed = Some(cfg.seed);
    config.miou_mode = Some(cfg.miou_mode);
    config.include_others = Some(cfg.include_others);

    let base = read_emb1(&args.base_classes)?;
    let distractors = read_emb1(&args.distractors)?;
    let (images, regions) = load_images(args)?;
    eprintln!(
        "ovs: sweeping {} images over {} steps",
        images.len(),
        cfg.steps.len()
    );
    let result = class_count_sweep(&images, &base, &distractors, &cfg)?;
    write_text(&args.out, &result.to_csv())?;
    let json = to_pretty_json(&Output {
        version: SWEEP_VERSION,
        images: images.len(),
        regions,
        result: &result,
        config,
    });
    write_text(&run_sidecar(&args.out), &json)?;
    print!("{json}");
    Ok(())
}
