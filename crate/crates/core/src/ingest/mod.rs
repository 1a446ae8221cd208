//! Ingestion: CIF subset, asymmetric-unit expansion, molecule perception and
//! the dataset curation filters.

pub mod cif;
pub mod curate;
pub mod expand;
pub mod perceive;

use crate::crystal::Crystal;
use crate::symop::AffineSymOp;

pub use cif::parse_cif;
pub use curate::{curate, CurationDecision, CurationPolicy};
pub use expand::{expand_asymmetric_unit, expand_sites};
pub use perceive::{perceive_components, perceive_molecules, Perception};

#[derive(Debug, Clone, PartialEq)]
pub struct CrystalRecord {
    pub crystal: Crystal,
    /// Source identifier (CIF data block name or file stem).
    pub provenance: String,
    /// Conventional R-factor in percent.
    pub r_factor: Option<f64>,
    pub raw_symops: Vec<AffineSymOp>,
    /// Perception found an extended (non-molecular) network.
    pub polymeric: bool,
}
