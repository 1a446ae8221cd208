//! `xtal crop`: one crop file per (crystal, seed).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde_json::{json, Value};

use xtal_core::block::Block;
use xtal_core::crop::{
    centroid_radius_crop, choose_center, distance_row, knn_crop, s4_crop, Crop, CropMethod, CropParams,
};
use xtal_core::supercell::{build_supercell, SupercellPolicy, SupercellSpec};

use super::{load_crystal, usage};
use crate::config::{CropConfig, JobConfig};
use crate::io::{echo, gather, pretty, stem, Sink};
use crate::outcome::{Failure, Outcome};

#[derive(Debug, Args)]
pub struct CropArgs {
    /// Canonical crystal JSON files, or corpus directories.
    pub corpus: Vec<PathBuf>,
    /// s4, knn or centroid_radius.
    #[arg(long)]
    pub method: Option<CropMethod>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long)]
    pub r_cut: Option<f64>,
    #[arg(long)]
    pub p_max: Option<f64>,
    /// Centroid-radius baseline radius (A).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Comma-separated crop seeds; defaults to the root seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Diagonal supercell multiplier the crops are cut from.
    #[arg(long)]
    pub supercell: Option<i64>,
    /// Also write shell-size and stoichiometry histograms.
    #[arg(long)]
    pub stats: bool,
}

/// Cuts one crop with the configured method, the crop seed choosing the
/// center (and, for S4, the shells).
pub fn crop_block(block: &Block, method: CropMethod, params: &CropParams) -> xtal_core::Result<Crop> {
    match method {
        CropMethod::S4 => s4_crop(block, params),
        CropMethod::Knn => {
            let center = choose_center(block, params.seed)?;
            knn_crop(block, center, &distance_row(block, center), params.t_max)
        }
        CropMethod::CentroidRadius => {
            let center = choose_center(block, params.seed)?;
            centroid_radius_crop(block, center, params.radius, params.t_max)
        }
    }
}

/// The block crops are cut from: a diagonal supercell with the central
/// copy of the asymmetric unit as candidate centers.
pub fn crop_source(path: &Path, supercell: i64) -> Result<Block, String> {
    let crystal = load_crystal(path)?;
    let spec = SupercellSpec::diagonal(supercell).map_err(|e| e.to_string())?;
    let sc = build_supercell(&crystal, &spec, SupercellPolicy::CentroidInside).map_err(|e| e.to_string())?;
    let mut block = Block::from_crystal(&sc);
    block.target = Some(stem(path));
    Ok(block)
}

fn apply_flags(args: &CropArgs, c: &mut CropConfig) {
    if let Some(m) = args.method {
        c.method = m;
    }
    if let Some(v) = args.t_max {
        c.params.t_max = v;
    }
    if let Some(v) = args.r_cut {
        c.params.r_cut = v;
    }
    if let Some(v) = args.p_max {
        c.params.p_max = v;
    }
    if let Some(v) = args.radius {
        c.params.radius = v;
    }
    if let Some(v) = &args.seeds {
        c.seeds = v.clone();
    }
    if let Some(v) = args.supercell {
        c.supercell = v;
    }
}

#[derive(Default)]
struct Histograms {
    shells_kept: BTreeMap<usize, usize>,
    /// shell index -> molecules kept in that shell -> crops
    shell_sizes: BTreeMap<usize, BTreeMap<usize, usize>>,
    /// entity -> molecules of that entity in the crop -> crops
    stoichiometry: BTreeMap<String, BTreeMap<usize, usize>>,
    tokens: BTreeMap<usize, usize>,
}

impl Histograms {
    fn add(&mut self, block: &Block, crop: &Crop) {
        *self.tokens.entry(crop.token_count).or_default() += 1;
        if let Some(shells) = &crop.shell_of {
            let mut per_shell: BTreeMap<usize, usize> = BTreeMap::new();
            for &k in shells {
                *per_shell.entry(k).or_default() += 1;
            }
            *self.shells_kept.entry(per_shell.len()).or_default() += 1;
            for (k, n) in per_shell {
                *self.shell_sizes.entry(k).or_default().entry(n).or_default() += 1;
            }
        }
        let mut per_entity: BTreeMap<&str, usize> = block.molecules.iter().map(|m| (m.entity.as_str(), 0)).collect();
        for &m in &crop.molecules {
            *per_entity.entry(block.molecules[m].entity.as_str()).or_default() += 1;
        }
        for (e, n) in per_entity {
            *self.stoichiometry.entry(e.to_string()).or_default().entry(n).or_default() += 1;
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "shells_kept": self.shells_kept,
            "shell_sizes": self.shell_sizes,
            "stoichiometry": self.stoichiometry,
            "tokens": self.tokens,
        })
    }
}

pub fn run(args: &CropArgs, cfg: &mut JobConfig, out: &Path) -> Result<Outcome, Failure> {
    apply_flags(args, &mut cfg.crop);
    cfg.validate_crop()?;
    let files = gather(&args.corpus, &["json"])?;
    if files.is_empty() {
        return Err(Failure::Usage("no inputs".into()));
    }
    let seeds = cfg.crop_seeds();
    let config = echo("crop", cfg.seed, &CropConfig { seeds: seeds.clone(), ..cfg.crop.clone() });

    let sources: Vec<(String, Result<Block, String>)> = files
        .par_iter()
        .map(|f| (stem(f), crop_source(f, cfg.crop.supercell)))
        .collect();
    let mut ids: Vec<&str> = sources.iter().map(|(id, _)| id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(usage(format!("duplicate crystal id '{}'", w[0])));
    }

    let jobs: Vec<(usize, u64)> = (0..sources.len())
        .filter(|&i| sources[i].1.is_ok())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let crops: Vec<xtal_core::Result<(Crop, String)>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let block = sources[i].1.as_ref().expect("only loaded sources are cropped");
            let params = CropParams { seed, ..cfg.crop.params.clone() };
            let crop = crop_block(block, cfg.crop.method, &params)?;
            let json = crop.to_json(block, &params);
            Ok((crop, json))
        })
        .collect();

    let sink = Sink::create(out)?;
    let mut outcome = Outcome::default();
    let mut errors = Vec::new();
    for (id, src) in &sources {
        if let Err(e) = src {
            outcome.warnings.push(format!("{id}: {e}"));
            errors.push(json!({ "id": id, "seed": null, "error": e }));
        }
    }
    let mut manifest_rows = Vec::new();
    let mut hist = Histograms::default();
    for (&(i, seed), result) in jobs.iter().zip(&crops) {
        let id = &sources[i].0;
        match result {
            Ok((crop, text)) => {
                let file = format!("crops/{id}_s{seed}.json");
                let mut doc: Value = serde_json::from_str(text).map_err(|e| Failure::Internal(e.to_string()))?;
                doc["config"] = config.clone();
                sink.write(&file, &pretty(&doc))?;
                hist.add(sources[i].1.as_ref().expect("loaded"), crop);
                manifest_rows.push(json!({
                    "id": id,
                    "seed": seed,
                    "file": file,
                    "center": crop.center,
                    "molecules": crop.molecules.len(),
                    "tokens": crop.token_count,
                }));
            }
            Err(e) => {
                outcome.warnings.push(format!("{id} seed {seed}: {e}"));
                errors.push(json!({ "id": id, "seed": seed, "error": e.to_string() }));
            }
        }
    }
    let manifest = json!({ "config": config, "crops": manifest_rows, "errors": errors });
    sink.write("crop_manifest.json", &pretty(&manifest))?;
    if args.stats {
        let mut stats = hist.to_json();
        stats["config"] = config;
        sink.write("crop_stats.json", &pretty(&stats))?;
    }
    Ok(outcome)
}
