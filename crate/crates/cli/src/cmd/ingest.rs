//! `xtal ingest`: parse, curate, Niggli-reduce and write the corpus.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use xtal_core::canonical::{from_canonical_json, to_canonical_json};
use xtal_core::crystal::Crystal;
use xtal_core::ingest::{curate, parse_cif, CrystalRecord, CurationDecision};
use xtal_core::niggli::niggli_reduce;
use xtal_core::symop::AffineSymOp;

use super::read_text;
use crate::config::JobConfig;
use crate::io::{echo, file_name, gather, is_json, pretty, stem, Sink};
use crate::outcome::{Failure, Outcome};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// CIF or canonical JSON files, or directories of them.
    pub inputs: Vec<PathBuf>,
    /// Reject records whose R-factor (percent) is at or above this.
    #[arg(long)]
    pub max_r_factor: Option<f64>,
    /// Reject cells with more non-hydrogen atoms than this.
    #[arg(long)]
    pub max_heavy_atoms: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestRow {
    pub input: String,
    pub id: String,
    /// `accepted`, `rejected` or `error`.
    pub status: &'static str,
    pub reason: Option<String>,
}

fn record_for(path: &Path) -> Result<CrystalRecord, String> {
    let text = read_text(path)?;
    if is_json(path) {
        let crystal = from_canonical_json(&text).map_err(|e| e.to_string())?;
        Ok(CrystalRecord {
            crystal,
            provenance: stem(path),
            r_factor: None,
            raw_symops: vec![AffineSymOp::identity()],
            polymeric: false,
        })
    } else {
        parse_cif(&text).map_err(|e| e.to_string())
    }
}

/// Reduced cell with coordinates re-wrapped into it.
fn reduced(crystal: &Crystal) -> Result<Crystal, String> {
    let p = niggli_reduce(&crystal.lattice).map_err(|e| e.to_string())?.change_of_basis;
    crystal.with_basis(&p).map_err(|e| e.to_string())
}

type Processed = (IngestRow, Option<String>);

fn process(path: &Path, cfg: &JobConfig) -> Processed {
    let row = |status, reason: Option<String>| IngestRow {
        input: file_name(path),
        id: stem(path),
        status,
        reason,
    };
    let record = match record_for(path) {
        Ok(r) => r,
        Err(e) => return (row("error", Some(e)), None),
    };
    match curate(&record, &cfg.ingest) {
        CurationDecision::Reject(reason) => (row("rejected", Some(reason)), None),
        CurationDecision::Accept => match reduced(&record.crystal) {
            Ok(c) => (row("accepted", None), Some(to_canonical_json(&c))),
            Err(e) => (row("error", Some(e)), None),
        },
    }
}

pub fn run(args: &IngestArgs, cfg: &mut JobConfig, out: &Path) -> Result<Outcome, Failure> {
    if let Some(r) = args.max_r_factor {
        cfg.ingest.max_r_factor = r;
    }
    if let Some(n) = args.max_heavy_atoms {
        cfg.ingest.max_heavy_atoms_per_cell = n;
    }
    cfg.validate_ingest()?;
    let files = gather(&args.inputs, &["cif", "json"])?;
    if files.is_empty() {
        return Err(Failure::Usage("no inputs".into()));
    }

    let mut results: Vec<Processed> = files.par_iter().map(|f| process(f, cfg)).collect();
    // two inputs with one stem would write the same corpus file
    let mut seen = BTreeSet::new();
    for (row, json) in results.iter_mut() {
        if json.is_some() && !seen.insert(row.id.clone()) {
            row.status = "error";
            row.reason = Some(format!("duplicate id '{}'", row.id));
            *json = None;
        }
    }

    let sink = Sink::create(out)?;
    for (row, json) in &results {
        if let Some(text) = json {
            sink.write(Path::new("corpus").join(format!("{}.json", row.id)), text)?;
        }
    }
    let count = |s: &str| results.iter().filter(|(r, _)| r.status == s).count();
    let accepted = count("accepted");
    let rows: Vec<&IngestRow> = results.iter().map(|(r, _)| r).collect();
    let report = json!({
        "config": echo("ingest", cfg.seed, &cfg.ingest),
        "counts": { "accepted": accepted, "rejected": count("rejected"), "error": count("error") },
        "rows": rows,
    });
    sink.write("ingest_report.json", &pretty(&report))?;

    let mut outcome = Outcome::default();
    if accepted == 0 {
        outcome.warnings.push("no input was accepted".into());
    }
    Ok(outcome)
}
