//! Dataset curation filters.

use serde::{Deserialize, Serialize};

use crate::ingest::CrystalRecord;

/// More bonded neighbours than this marks overlapping (unresolved) sites.
const MAX_DEGREE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationPolicy {
    /// Records with an R-factor at or above this (percent) are rejected.
    pub max_r_factor: f64,
    pub max_heavy_atoms_per_cell: usize,
    pub require_3d: bool,
    pub require_single_molecule_sanity: bool,
}

impl Default for CurationPolicy {
    fn default() -> Self {
        CurationPolicy {
            max_r_factor: 9.0,
            max_heavy_atoms_per_cell: 250,
            require_3d: true,
            require_single_molecule_sanity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "reason", rename_all = "snake_case")]
pub enum CurationDecision {
    Accept,
    Reject(String),
}

impl CurationDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, CurationDecision::Accept)
    }
}

/// Every molecule has a heavy atom and no atom has an implausible number of
/// bonded neighbours.
fn sane(record: &CrystalRecord) -> bool {
    let c = &record.crystal;
    let mut degree = vec![0usize; c.sites.len()];
    for m in &c.molecules {
        if m.atoms.iter().all(|&a| c.sites[a].is_hydrogen()) {
            return false;
        }
        for b in &m.bonds {
            degree[b.a] += 1;
            degree[b.b] += 1;
        }
    }
    degree.iter().all(|&d| d <= MAX_DEGREE)
}

/// Checks, in order: coordinates present (`no_3d`), R-factor (`r_factor`),
/// heavy atoms per cell (`atom_count`), extended networks (`polymeric`),
/// molecule sanity (`sanity`). The first failure is reported. A missing
/// R-factor passes.
pub fn curate(record: &CrystalRecord, policy: &CurationPolicy) -> CurationDecision {
    let reject = |r: &str| CurationDecision::Reject(r.to_string());
    if policy.require_3d && record.crystal.sites.is_empty() {
        return reject("no_3d");
    }
    if record.r_factor.is_some_and(|r| r >= policy.max_r_factor) {
        return reject("r_factor");
    }
    if record.crystal.heavy_atom_count() > policy.max_heavy_atoms_per_cell {
        return reject("atom_count");
    }
    if record.polymeric {
        return reject("polymeric");
    }
    if policy.require_single_molecule_sanity && !sane(record) {
        return reject("sanity");
    }
    CurationDecision::Accept
}
