//! `xtal losses`: composite structure loss between a predicted and a
//! ground-truth block (heavy atoms, molecule by molecule).

use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use xtal_core::block::Block;
use xtal_core::lattice::Vec3;
use xtal_core::losses::{composite_loss, MaskSource};

use super::{read_text, usage};
use crate::config::JobConfig;
use crate::io::{echo, file_name, pretty, Sink};
use crate::outcome::{Failure, Outcome};

#[derive(Debug, Args)]
pub struct LossesArgs {
    /// Predicted block JSON.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth block JSON with the same atoms in the same order.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub lambda_dist: Option<f64>,
    /// Noise level for the EDM weight on the MSE term.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub inclusion_radius: Option<f64>,
    /// ground_truth or delta_cutoff.
    #[arg(long, value_parser = parse_mask)]
    pub mask_source: Option<MaskSource>,
}

fn parse_mask(s: &str) -> Result<MaskSource, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown mask source '{s}'"))
}

fn heavy_coords(path: &Path) -> Result<Vec<Vec3>, Failure> {
    let block = Block::from_json(&read_text(path).map_err(usage)?).map_err(|e| usage(format!("{}: {e}", file_name(path))))?;
    Ok(block.molecules.iter().flat_map(|m| m.heavy_coords()).collect())
}

pub fn run(args: &LossesArgs, cfg: &mut JobConfig, out: &Path) -> Result<Outcome, Failure> {
    let w = &mut cfg.losses;
    if let Some(v) = args.lambda_dist {
        w.lambda_dist = v;
    }
    if args.sigma.is_some() {
        w.sigma = args.sigma;
    }
    if let Some(v) = args.inclusion_radius {
        w.inclusion_radius = v;
    }
    if let Some(v) = args.mask_source {
        w.mask_source = v;
    }
    cfg.validate_losses()?;
    let pred = heavy_coords(&args.pred)?;
    let gt = heavy_coords(&args.gt)?;
    let report = composite_loss(&pred, &gt, None, &cfg.losses).map_err(usage)?;
    let doc = json!({
        "config": echo("losses", cfg.seed, &cfg.losses),
        "pred": file_name(&args.pred),
        "gt": file_name(&args.gt),
        "atoms": pred.len(),
        "loss": report,
    });
    Sink::create(out)?.write("losses.json", &pretty(&doc))?;
    Ok(Outcome::default())
}
