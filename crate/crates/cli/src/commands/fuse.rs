use anyhow::Result;
use ovs_core::gfa::{gfa_closed_form, gfa_iterate};
use ovs_core::io::{read_emb1, write_emb1};
use ovs_core::{EmbeddingSet, Error, FusionConfig};
use serde::Serialize;

use crate::output::{run_sidecar, to_pretty_json, write_text, RunConfig};
use crate::FuseArgs;

#[derive(Serialize)]
struct Report {
    solver: &'static str,
    iterations_used: usize,
    converged: bool,
    spectral_radius_estimate: f64,
    clip_rows: usize,
    query_rows: usize,
    config: RunConfig,
}

pub fn run(args: &FuseArgs) -> Result<()> {
    let cfg = FusionConfig {
        lambda: args.lambda,
        omega: args.omega,
        max_iters: args.max_iters,
        tolerance: args.tolerance,
        normalize_mode: args.normalize_mode.into(),
        normalize_clip: args.normalize_clip,
    };
    cfg.validate()?;
    let solver = if args.iterate { "iterate" } else { "closed_form" };
    let mut config = RunConfig::new("fuse")
        .path("fq", &args.fq)
        .path("fc", &args.fc)
        .path("out", &args.out)
        .extra("solver", solver)
        .extra("max_iters", cfg.max_iters)
        .extra("tolerance", cfg.tolerance)
        .extra("normalize_clip", cfg.normalize_clip);
    if let Some(p) = &args.out_query {
        config = config.path("out_query", p);
    }
    config.lambda = Some(cfg.lambda);
    config.omega = Some(cfg.omega);
    config.normalize_mode = Some(cfg.normalize_mode);

    let fq = read_emb1(&args.fq)?;
    let fc = read_emb1(&args.fc)?;
    let result = if args.iterate {
        let r = gfa_iterate(&fq, &fc, &cfg)?;
        if !r.converged && r.spectral_radius_estimate >= 1.0 {
            return Err(Error::NonConvergent {
                lambda: cfg.lambda,
                omega: cfg.omega,
                rho: r.spectral_radius_estimate,
            }
            .into());
        }
        if !r.converged {
            eprintln!(
                "ovs: warning: not converged after {} iterations (rho = {:.6})",
                r.iterations_used, r.spectral_radius_estimate
            );
        }
        r
    } else {
        gfa_closed_form(&fq, &fc, &cfg)?
    };
    eprintln!("ovs: spectral radius estimate {:.6}", result.spectral_radius_estimate);

    let mut fused_clip = EmbeddingSet::from_matrix(&result.fused_clip)?;
    if let Some(labels) = fc.labels() {
        fused_clip = fused_clip.with_labels(labels.iter().cloned())?;
    }
    write_emb1(&args.out, &fused_clip)?;
    if let Some(p) = &args.out_query {
        let mut fused_query = EmbeddingSet::from_matrix(&result.fused_query)?;
        if let Some(labels) = fq.labels() {
            fused_query = fused_query.with_labels(labels.iter().cloned())?;
        }
        write_emb1(p, &fused_query)?;
    }

    let report = Report {
        solver,
        iterations_used: result.iterations_used,
        converged: result.converged,
        spectral_radius_estimate: result.spectral_radius_estimate,
        clip_rows: fc.len(),
        query_rows: fq.len(),
        config,
    };
    let json = to_pretty_json(&report);
    write_text(&run_sidecar(&args.out), &json)?;
    print!("{json}");
    Ok(())
}
