//! `xtal metrics`: score predicted blocks against reference crystals.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde_json::{json, Value};

use xtal_core::block::Block;
use xtal_core::metrics::{evaluate_sample, MetricsReport, Reference};
use xtal_core::rng::substream;

use super::{load_crystal, read_text, usage};
use crate::config::{JobConfig, MetricsConfig};
use crate::io::{csv_comment, echo, file_name, gather, pretty, stem, Sink};
use crate::outcome::{Failure, Outcome};

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted block JSON files, or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    pub pred: Vec<PathBuf>,
    /// Reference crystals (canonical JSON); the file stem is the target id.
    #[arg(long, num_args = 1.., required = true)]
    pub gt: Vec<PathBuf>,
    /// Keep at most this many samples per target (seeded choice).
    #[arg(long)]
    pub samples: Option<usize>,
}

struct Prediction {
    name: String,
    target: String,
    block: Block,
}

fn load_prediction(path: &Path) -> Result<Prediction, String> {
    let block = Block::from_json(&read_text(path)?).map_err(|e| format!("{}: {e}", file_name(path)))?;
    Ok(Prediction {
        name: file_name(path),
        target: block.target.clone().unwrap_or_else(|| stem(path)),
        block,
    })
}

/// At most `n` samples per target, drawn from a stream named after the
/// target and listed in input order.
fn subsample(preds: Vec<Prediction>, n: usize, seed: u64) -> Vec<Prediction> {
    let mut by_target: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, p) in preds.iter().enumerate() {
        by_target.entry(p.target.clone()).or_default().push(i);
    }
    let mut keep = vec![false; preds.len()];
    for (target, mut idx) in by_target {
        if idx.len() > n {
            idx.shuffle(&mut substream(seed, &format!("metrics.samples.{target}")));
            idx.truncate(n);
        }
        for i in idx {
            keep[i] = true;
        }
    }
    preds.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect()
}

pub fn run(args: &MetricsArgs, cfg: &mut JobConfig, out: &Path) -> Result<Outcome, Failure> {
    if args.samples.is_some() {
        cfg.metrics.samples = args.samples;
    }
    cfg.validate_metrics()?;
    let t = cfg.metrics.thresholds.clone();
    let pred_files = gather(&args.pred, &["json"])?;
    if pred_files.is_empty() {
        return Err(usage("no predictions"));
    }
    let gt_files = gather(&args.gt, &["json"])?;
    if gt_files.is_empty() {
        return Err(usage("no reference crystals"));
    }

    let references: Vec<Reference> = gt_files
        .par_iter()
        .map(|f| {
            let crystal = load_crystal(f)?;
            Reference::from_crystal(stem(f), &crystal, &t).map_err(|e| format!("{}: {e}", file_name(f)))
        })
        .collect::<Result<_, String>>()
        .map_err(usage)?;
    let index: BTreeMap<&str, usize> = references.iter().enumerate().map(|(i, r)| (r.target.as_str(), i)).collect();
    if index.len() != references.len() {
        return Err(usage("duplicate reference id"));
    }

    let mut outcome = Outcome::default();
    let mut preds = Vec::new();
    let mut unmatched = Vec::new();
    let mut errors = Vec::new();
    for result in pred_files.par_iter().map(|f| load_prediction(f)).collect::<Vec<_>>() {
        match result {
            Ok(p) if index.contains_key(p.target.as_str()) => preds.push(p),
            Ok(p) => unmatched.push(json!({ "sample": p.name, "target": p.target })),
            Err(e) => errors.push(e),
        }
    }
    if let Some(n) = cfg.metrics.samples {
        preds = subsample(preds, n, cfg.seed);
    }
    let scored: Vec<Result<_, String>> = preds
        .par_iter()
        .map(|p| {
            evaluate_sample(&p.block, &references[index[p.target.as_str()]], &p.name, &t)
                .map_err(|e| format!("{}: {e}", p.name))
        })
        .collect();
    let mut samples = Vec::new();
    for s in scored {
        match s {
            Ok(m) => samples.push(m),
            Err(e) => errors.push(e),
        }
    }
    for u in &unmatched {
        outcome.warnings.push(format!("unmatched prediction {} (target {})", u["sample"], u["target"]));
    }
    outcome.warnings.extend(errors.iter().cloned());
    if samples.is_empty() {
        return Err(usage("no prediction could be scored"));
    }

    let config = echo("metrics", cfg.seed, &MetricsConfig { thresholds: t.clone(), samples: cfg.metrics.samples });
    let report = MetricsReport::new(samples, t)?;
    let mut doc: Value = serde_json::from_str(&report.to_json()).map_err(|e| Failure::Internal(e.to_string()))?;
    doc["config"] = config.clone();
    doc["unmatched"] = Value::from(unmatched);
    doc["errors"] = Value::from(errors);
    let sink = Sink::create(out)?;
    sink.write("metrics.json", &pretty(&doc))?;
    sink.write("metrics.csv", &format!("{}{}", csv_comment(&config), report.to_csv()))?;
    Ok(outcome)
}
