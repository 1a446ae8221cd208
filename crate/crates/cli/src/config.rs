//! Job configuration: one file with a section per command, overridden by
//! command-line flags, validated before any work starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use xtal_core::crop::{CropMethod, CropParams};
use xtal_core::diffusion::{karras_schedule, GaussianMixture, GmmComponent, SamplerMethod, DEFAULT_RHO};
use xtal_core::ingest::CurationPolicy;
use xtal_core::losses::LossWeights;
use xtal_core::metrics::MetricThresholds;
use xtal_core::scaling::ScalingSweepSpec;

use crate::outcome::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick. Never echoed into outputs.
    pub parallelism: usize,
    pub ingest: CurationPolicy,
    pub crop: CropConfig,
    pub metrics: MetricsConfig,
    pub losses: LossWeights,
    pub scaling: ScalingSweepSpec,
    pub diffuse: DiffuseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    pub method: CropMethod,
    pub params: CropParams,
    /// One crop per seed per crystal; empty means the root seed alone.
    pub seeds: Vec<u64>,
    /// Diagonal supercell multiplier the crops are cut from.
    pub supercell: i64,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig {
            method: CropMethod::S4,
            params: CropParams::default(),
            seeds: Vec::new(),
            supercell: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub thresholds: MetricThresholds,
    /// Samples kept per target (seeded subsample); all when unset.
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffuseConfig {
    pub mixture: GaussianMixture,
    pub steps: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    pub n: usize,
    pub method: SamplerMethod,
}

/// Two isotropic modes at (-10, -10) and (10, 10), std 0.5, equal weight.
pub fn two_mode_mixture() -> GaussianMixture {
    let c = |m: f64| GmmComponent {
        weight: 0.5,
        mean: vec![m, m],
        std: 0.5,
    };
    GaussianMixture::new(vec![c(-10.0), c(10.0)]).expect("valid mixture")
}

impl Default for DiffuseConfig {
    fn default() -> Self {
        DiffuseConfig {
            mixture: two_mode_mixture(),
            steps: 200,
            sigma_min: 0.002,
            sigma_max: 80.0,
            rho: DEFAULT_RHO,
            n: 10_000,
            method: SamplerMethod::EulerMaruyama,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Reads a TOML document, or JSON when the file ends in `.json`.
pub fn read_structured<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if json {
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

impl JobConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        match path {
            Some(p) => read_structured(p),
            None => Ok(JobConfig::default()),
        }
    }

    pub fn crop_seeds(&self) -> Vec<u64> {
        if self.crop.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.crop.seeds.clone()
        }
    }

    pub fn validate_ingest(&self) -> Result<(), Failure> {
        if !(self.ingest.max_r_factor > 0.0) {
            return Err(invalid(format!("ingest.max_r_factor must be positive, got {}", self.ingest.max_r_factor)));
        }
        Ok(())
    }

    pub fn validate_crop(&self) -> Result<(), Failure> {
        self.crop.params.validate().map_err(invalid)?;
        if self.crop.supercell < 1 {
            return Err(invalid(format!("crop.supercell must be at least 1, got {}", self.crop.supercell)));
        }
        Ok(())
    }

    pub fn validate_metrics(&self) -> Result<(), Failure> {
        self.metrics.thresholds.validate().map_err(invalid)?;
        if self.metrics.samples == Some(0) {
            return Err(invalid("metrics.samples must be at least 1"));
        }
        Ok(())
    }

    pub fn validate_losses(&self) -> Result<(), Failure> {
        let w = &self.losses;
        if !(w.lambda_dist >= 0.0) || !(w.inclusion_radius > 0.0) || !(w.sigma_data > 0.0) {
            return Err(invalid("losses: lambda_dist >= 0, inclusion_radius > 0 and sigma_data > 0 required"));
        }
        if w.sigma.is_some_and(|s| !(s > 0.0)) {
            return Err(invalid("losses.sigma must be positive"));
        }
        Ok(())
    }

    pub fn validate_scaling(&self) -> Result<(), Failure> {
        self.scaling.validate().map_err(invalid)
    }

    pub fn validate_diffuse(&self) -> Result<(), Failure> {
        let d = &self.diffuse;
        karras_schedule(d.steps, d.sigma_min, d.sigma_max, d.rho).map_err(invalid)?;
        Ok(())
    }
}
