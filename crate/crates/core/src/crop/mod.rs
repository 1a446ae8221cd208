//! Cropping finite blocks of whole molecules under a token budget.
//!
//! Every routine works on a [`Block`] laid out from a supercell, measures
//! distances between non-hydrogen atoms only, and counts tokens as
//! non-hydrogen atoms.

mod baseline;
mod boundary;
mod s4;
mod shell;

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::lattice::Vec3;

pub use baseline::{centroid_radius_crop, knn_crop, DEFAULT_CENTROID_RADIUS};
pub use boundary::{contact_boundary, ContactBoundary, ContactEdge};
pub use s4::{adaptive_stoichiometric_sample, choose_center, s4_crop, s4_crop_at, WeightMode};
pub use shell::{distance_row, intermolecular_distance_matrix, shell_decompose, ShellDecomposition, SHELL_TIE_TOL};

pub const CROP_SCHEMA: &str = "xtal.crop.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CropMethod {
    #[default]
    S4,
    Knn,
    CentroidRadius,
}

impl std::str::FromStr for CropMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "s4" => Ok(CropMethod::S4),
            "knn" => Ok(CropMethod::Knn),
            "centroid_radius" | "centroid" => Ok(CropMethod::CentroidRadius),
            other => Err(Error::InvalidParameter(format!("unknown crop method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropParams {
    /// Shell width (A).
    pub r_cut: f64,
    /// Token budget (non-hydrogen atoms).
    pub t_max: usize,
    /// Probability of keeping every shell.
    pub p_max: f64,
    pub seed: u64,
    pub weight_mode: WeightMode,
    /// Centroid-radius baseline only (A).
    pub radius: f64,
}

impl Default for CropParams {
    fn default() -> Self {
        CropParams {
            r_cut: 4.5,
            t_max: 640,
            p_max: 0.8,
            seed: 0,
            weight_mode: WeightMode::default(),
            radius: DEFAULT_CENTROID_RADIUS,
        }
    }
}

impl CropParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_cut > 0.0 && self.r_cut.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_cut must be positive, got {}", self.r_cut)));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidParameter("t_max must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_max) {
            return Err(Error::InvalidParameter(format!("p_max must lie in [0, 1], got {}", self.p_max)));
        }
        if !(self.radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be non-negative, got {}", self.radius)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crop {
    pub method: CropMethod,
    pub center: usize,
    /// Selected molecules in the order they were added (center first).
    pub molecules: Vec<usize>,
    /// Shell index of each selected molecule (0 for the center); S4 only.
    pub shell_of: Option<Vec<usize>>,
    pub token_count: usize,
}

impl Crop {
    pub fn contains(&self, molecule: usize) -> bool {
        self.molecules.contains(&molecule)
    }

    /// The cropped molecules as a block of their own.
    pub fn to_block(&self, block: &Block) -> Block {
        block.subset(&self.molecules)
    }

    pub fn to_json(&self, block: &Block, params: &CropParams) -> String {
        let coords: Vec<Vec<Vec3>> = self
            .molecules
            .iter()
            .map(|&m| block.molecules[m].heavy_coords())
            .collect();
        let doc = CropDoc {
            schema: CROP_SCHEMA,
            target: block.target.as_deref(),
            method: self.method,
            params,
            center: self.center,
            molecules: &self.molecules,
            entities: self.molecules.iter().map(|&m| block.molecules[m].entity.as_str()).collect(),
            shell_of: self.shell_of.as_deref(),
            token_count: self.token_count,
            coords,
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("crop serialises");
        out.push('\n');
        out
    }
}

#[derive(Serialize)]
struct CropDoc<'a> {
    schema: &'a str,
    target: Option<&'a str>,
    method: CropMethod,
    params: &'a CropParams,
    center: usize,
    molecules: &'a [usize],
    entities: Vec<&'a str>,
    shell_of: Option<&'a [usize]>,
    token_count: usize,
    coords: Vec<Vec<Vec3>>,
}

pub(crate) fn oversized(block: &Block, center: usize, t_max: usize) -> Result<usize> {
    let tokens = block.molecules[center].tokens();
    if tokens > t_max {
        return Err(Error::OversizedMolecule { tokens, budget: t_max });
    }
    Ok(tokens)
}
