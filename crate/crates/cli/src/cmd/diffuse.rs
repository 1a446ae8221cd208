//! `xtal diffuse`: reverse-time sampling of a Gaussian mixture with the
//! analytic denoiser.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use serde_json::json;

use xtal_core::diffusion::{diagnostics, karras_schedule, reverse_sample, GaussianMixture, SamplerMethod};

use super::usage;
use crate::config::{read_structured, JobConfig};
use crate::io::{csv_comment, echo, is_json, pretty, Sink};
use crate::outcome::{Failure, Outcome};

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    /// Mixture: a JSON list of {weight, mean, std}, or TOML with
    /// `[[mixture]]` tables.
    #[arg(long)]
    pub gmm: Option<PathBuf>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// em, ode or churn.
    #[arg(long)]
    pub method: Option<SamplerMethod>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureFile {
    mixture: GaussianMixture,
}

fn load_mixture(path: &Path) -> Result<GaussianMixture, Failure> {
    if is_json(path) {
        read_structured(path)
    } else {
        Ok(read_structured::<MixtureFile>(path)?.mixture)
    }
}

pub fn samples_csv(dim: usize, samples: &[Vec<f64>]) -> String {
    let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for s in samples {
        let row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn run(args: &DiffuseArgs, cfg: &mut JobConfig, out: &Path) -> Result<Outcome, Failure> {
    let d = &mut cfg.diffuse;
    if let Some(p) = &args.gmm {
        d.mixture = load_mixture(p)?;
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = args.$f { d.$f = v; } )* };
    }
    set!(n, steps, sigma_min, sigma_max, rho, method);
    cfg.validate_diffuse()?;
    let d = &cfg.diffuse;
    let schedule = karras_schedule(d.steps, d.sigma_min, d.sigma_max, d.rho).map_err(usage)?;
    let samples = reverse_sample(&d.mixture, &schedule, d.n, cfg.seed, d.method);
    let config = echo("diffuse", cfg.seed, d);
    let doc = json!({
        "config": config,
        "diagnostics": diagnostics(&d.mixture, &samples),
    });
    let sink = Sink::create(out)?;
    sink.write("samples.csv", &format!("{}{}", csv_comment(&config), samples_csv(d.mixture.dim(), &samples)))?;
    sink.write("diagnostics.json", &pretty(&doc))?;
    Ok(Outcome::default())
}
