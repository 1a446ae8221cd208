//! Conformer RMSD under graph symmetry.

use serde::Serialize;

use crate::align::kabsch_align_any;
use crate::block::BlockMolecule;
use crate::error::{Error, Result};
use crate::lattice::Vec3;
use crate::metrics::graph::{isomorphisms, MolGraph};

pub const DEFAULT_AUTOMORPHISM_BUDGET: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformerRmsd {
    pub rmsd: f64,
    pub mappings: usize,
    /// The isomorphism search hit its budget; only the input atom order
    /// was used.
    pub identity_fallback: bool,
}

fn permuted(coords: &[Vec3], mapping: &[usize], n: usize) -> Vec<Vec3> {
    // mapping: pred atom -> gt atom; returns pred coords in gt order
    let mut out = vec![Vec3::zeros(); n];
    for (i, &j) in mapping.iter().enumerate() {
        out[j] = coords[i];
    }
    out
}

/// Minimum over graph isomorphisms of the superposed heavy-atom RMSD.
pub fn conformer_rmsd1(pred: &BlockMolecule, gt: &BlockMolecule, budget: usize) -> Result<ConformerRmsd> {
    let gp = MolGraph::heavy(pred, Some(gt));
    let gg = MolGraph::heavy(gt, None);
    let xp = pred.heavy_coords();
    let xg = gt.heavy_coords();
    let iso = isomorphisms(&gp, &gg, budget);
    if iso.truncated {
        if gp.species != gg.species {
            return Err(Error::NotIsomorphic(format!(
                "isomorphism search exceeded {budget} mappings and atom orders differ"
            )));
        }
        log::warn!("isomorphism search exceeded {budget} mappings; using input atom order");
        return Ok(ConformerRmsd {
            rmsd: kabsch_align_any(&xp, &xg)?.rmsd,
            mappings: 1,
            identity_fallback: true,
        });
    }
    if iso.mappings.is_empty() {
        return Err(Error::NotIsomorphic(format!(
            "{} ({} heavy atoms) and {} ({} heavy atoms) have different graphs",
            pred.entity,
            gp.len(),
            gt.entity,
            gg.len()
        )));
    }
    let mut best = f64::INFINITY;
    for m in &iso.mappings {
        best = best.min(kabsch_align_any(&permuted(&xp, m, xg.len()), &xg)?.rmsd);
    }
    Ok(ConformerRmsd {
        rmsd: best,
        mappings: iso.mappings.len(),
        identity_fallback: false,
    })
}

/// RMSD in the given atom order only (no symmetry search).
pub fn identity_rmsd(pred: &BlockMolecule, gt: &BlockMolecule) -> Result<f64> {
    Ok(kabsch_align_any(&pred.heavy_coords(), &gt.heavy_coords())?.rmsd)
}
