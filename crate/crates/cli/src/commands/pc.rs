use std::fs;

use anyhow::{Context, Result};
use ovs_core::io::{read_emb1, write_emb1};
use ovs_core::proxy::{build_proxy_batch, gradient_check, proxy_loss, MixRecord, ProxyLoss};
use ovs_core::{Error, ProxyBatch, ProxyConfig};
use serde::Serialize;

use crate::output::{to_pretty_json, write_text, RunConfig};
use crate::{PcArgs, PcLossArgs};

pub const PC_VERSION: &str = "ovs-pc/1";
/// Largest finite-difference discrepancy `--check-grad` accepts.
const GRAD_TOLERANCE: f64 = 1e-4;

fn config(name: &'static str, args: &PcArgs, cfg: &ProxyConfig) -> RunConfig {
    let mut c = RunConfig::new(name)
        .path("fq", &args.fq)
        .path("fc", &args.fc)
        .path("ft", &args.ft);
    if let Some(d) = &args.out_dir {
        c = c.path("out_dir", d);
    }
    c.gamma = Some(cfg.gamma);
    c.seed = Some(cfg.seed);
    c.pairing = Some(cfg.pairing);
    c
}

fn batch(args: &PcArgs) -> Result<(ProxyConfig, ProxyBatch)> {
    let cfg = ProxyConfig {
        gamma: args.gamma,
        seed: args.seed,
        pairing: args.pairing.into(),
    };
    cfg.validate()?;
    let fq = read_emb1(&args.fq)?;
    let fc = read_emb1(&args.fc)?;
    let ft = read_emb1(&args.ft)?;
    let batch = build_proxy_batch(&fq, &fc, &ft, &cfg)?;
    Ok((cfg, batch))
}

#[derive(Serialize)]
struct BatchFile<'a> {
    version: &'static str,
    rows: usize,
    mixes: &'a [MixRecord],
    config: RunConfig,
}

fn write_batch(args: &PcArgs, batch: &ProxyBatch, config: RunConfig) -> Result<String> {
    let json = to_pretty_json(&BatchFile {
        version: PC_VERSION,
        rows: batch.len(),
        mixes: &batch.mixes,
        config,
    });
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_emb1(&dir.join("mixed_query.emb1"), &batch.mixed_query)?;
        write_emb1(&dir.join("mixed_clip.emb1"), &batch.mixed_clip)?;
        write_emb1(&dir.join("mixed_text.emb1"), &batch.mixed_text)?;
        write_text(&dir.join("batch.json"), &json)?;
    }
    Ok(json)
}

pub fn run_sample(args: &PcArgs) -> Result<()> {
    let (cfg, batch) = batch(args)?;
    eprintln!("ovs: mixed {} rows", batch.len());
    let json = write_batch(args, &batch, config("pc-sample", args, &cfg))?;
    print!("{json}");
    Ok(())
}

#[derive(Serialize)]
struct GradCheck {
    max_relative_error: f64,
    step: f64,
    tolerance: f64,
    passed: bool,
}

#[derive(Serialize)]
struct LossReport {
    version: &'static str,
    rows: usize,
    #[serde(flatten)]
    loss: ProxyLoss,
    #[serde(skip_serializing_if = "Option::is_none")]
    grad_check: Option<GradCheck>,
    config: RunConfig,
}

pub fn run_loss(args: &PcLossArgs) -> Result<()> {
    if args.check_grad && !(args.fd_step > 0.0 && args.fd_step.is_finite()) {
        return Err(Error::Config(format!("--fd-step must be > 0, got {}", args.fd_step)).into());
    }
    let (cfg, batch) = batch(&args.pc)?;
    let mut config = config("pc-loss", &args.pc, &cfg);
    if args.check_grad {
        config = config.extra("fd_step", args.fd_step);
    }
    write_batch(&args.pc, &batch, config.clone())?;
    let loss = proxy_loss(&batch)?;
    let grad_check = if args.check_grad {
        let err = gradient_check(&batch, args.fd_step)?;
        eprintln!("ovs: max relative gradient error {err:.3e}");
        Some(GradCheck {
            max_relative_error: err,
            step: args.fd_step,
            tolerance: GRAD_TOLERANCE,
            passed: err < GRAD_TOLERANCE,
        })
    } else {
        None
    };
    let failed = grad_check.as_ref().is_some_and(|g| !g.passed);
    print!(
        "{}",
        to_pretty_json(&LossReport {
            version: PC_VERSION,
            rows: batch.len(),
            loss,
            grad_check,
            config,
        })
    );
    if failed {
        anyhow::bail!("gradient check exceeded tolerance {GRAD_TOLERANCE:e}");
    }
    Ok(())
}
