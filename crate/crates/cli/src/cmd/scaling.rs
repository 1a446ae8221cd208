//! `xtal scaling`: the boundary-loss sweep, its log-log fit and an
//! exact-ball pilot fit that calibrates the acceptance band.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::{json, Value};

use xtal_core::crop::CropMethod;
use xtal_core::scaling::{exact_ball_points, fit_scaling_exponent, run_scaling_sweep, sweep_csv, ScalingPoint, ScalingSweepSpec};

use crate::config::{read_structured, JobConfig};
use crate::io::{csv_comment, echo, pretty, Sink};
use crate::outcome::{Failure, Outcome};

/// Accepted range for the fitted exponent of boundary loss per token.
pub const SLOPE_BAND: [f64; 2] = [-0.43, -0.23];
pub const MIN_R_SQUARED: f64 = 0.9;
/// Exact balls must reproduce the surface-to-volume exponent to this.
pub const PILOT_TOLERANCE: f64 = 0.03;
pub const PILOT_SLOPE: f64 = -1.0 / 3.0;

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// Sweep specification (TOML, or JSON by extension); replaces the
    /// configuration's scaling section.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Print the cell plan and write nothing.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub method: Option<CropMethod>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Radii of exact balls around a lattice point: whole multiples of the
/// spacing that stay clear of the block edge.
fn pilot_radii(spec: &ScalingSweepSpec) -> Vec<f64> {
    let k_max = (spec.lattice.extent.saturating_sub(1) / 2).saturating_sub(1).min(9);
    (2..=k_max).map(|k| spec.lattice.spacing * k as f64 + 1e-6).collect()
}

fn pilot(spec: &ScalingSweepSpec, r0: f64) -> Value {
    let radii = pilot_radii(spec);
    match exact_ball_points(&spec.lattice, r0, &radii).and_then(|p| fit_scaling_exponent(&p)) {
        Ok(fit) => json!({
            "radii": radii,
            "fit": fit,
            "expected_slope": PILOT_SLOPE,
            "tolerance": PILOT_TOLERANCE,
            "ok": (fit.slope - PILOT_SLOPE).abs() <= PILOT_TOLERANCE,
        }),
        Err(e) => json!({ "radii": radii, "fit": null, "error": e.to_string(), "ok": false }),
    }
}

type Group = (u64, u64);

fn key(p: &ScalingPoint) -> Group {
    (p.r_cut.to_bits(), p.r0.to_bits())
}

pub fn run(args: &ScalingArgs, cfg: &mut JobConfig, out: &Path) -> Result<Outcome, Failure> {
    if let Some(path) = &args.spec {
        cfg.scaling = read_structured(path)?;
    }
    if let Some(m) = args.method {
        cfg.scaling.method = m;
    }
    cfg.validate_scaling()?;
    let spec = &cfg.scaling;
    let config = echo("scaling", cfg.seed, spec);

    if args.dry_run {
        let cells = spec.cells();
        println!("{}", json!({ "config": config, "cells": cells.len() }));
        println!("r_cut,r0,t_target,seed");
        for c in cells {
            println!("{},{},{},{}", c.r_cut, c.r0, c.t_target, c.seed);
        }
        return Ok(Outcome::default());
    }

    let points = run_scaling_sweep(spec)?;
    let mut groups: BTreeMap<Group, Vec<&ScalingPoint>> = BTreeMap::new();
    for p in &points {
        groups.entry(key(p)).or_default().push(p);
    }
    let mut outcome = Outcome::default();
    let mut fits = Vec::new();
    let mut dat = String::from("# r_cut r0 t_target median_tokens median_ratio\n");
    for g in groups.values() {
        let (r_cut, r0) = (g[0].r_cut, g[0].r0);
        let owned: Vec<ScalingPoint> = g.iter().map(|p| (*p).clone()).collect();
        let fit = match fit_scaling_exponent(&owned) {
            Ok(f) => {
                let in_band = (SLOPE_BAND[0]..=SLOPE_BAND[1]).contains(&f.slope) && f.r_squared >= MIN_R_SQUARED;
                json!({ "r_cut": r_cut, "r0": r0, "fit": f, "in_band": in_band })
            }
            Err(e) => {
                outcome.warnings.push(format!("r_cut {r_cut}, r0 {r0}: {e}"));
                json!({ "r_cut": r_cut, "r0": r0, "fit": null, "error": e.to_string(), "in_band": false })
            }
        };
        fits.push(fit);
        let mut by_t: BTreeMap<usize, Vec<&ScalingPoint>> = BTreeMap::new();
        for p in g {
            by_t.entry(p.t_target).or_default().push(p);
        }
        for (t, ps) in by_t {
            let tokens = median(ps.iter().map(|p| p.tokens as f64).collect());
            let ratio = median(ps.iter().map(|p| p.ratio).collect());
            dat.push_str(&format!("{r_cut} {r0} {t} {tokens} {ratio}\n"));
        }
        dat.push_str("\n\n");
    }
    let r0 = points.first().map_or(spec.r_cuts[0], |p| p.r0);
    let doc = json!({
        "config": config,
        "band": SLOPE_BAND,
        "min_r_squared": MIN_R_SQUARED,
        "fits": fits,
        "pilot": pilot(spec, r0),
    });

    let sink = Sink::create(out)?;
    sink.write("sweep.csv", &format!("{}{}", csv_comment(&config), sweep_csv(&points)))?;
    sink.write("fit.json", &pretty(&doc))?;
    sink.write("scaling.dat", &format!("# config {config}\n{dat}"))?;
    Ok(outcome)
}
