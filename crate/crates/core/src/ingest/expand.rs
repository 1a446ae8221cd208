//! Asymmetric-unit expansion under a list of symmetry operators.

use crate::crystal::{AtomSite, Bond, Crystal, MolecularGraph};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Vec3};
use crate::symop::AffineSymOp;

/// Two images closer than this (A) are the same site.
pub const DEDUP_TOL: f64 = 1e-3;
/// Distinct images closer than this (A) indicate inconsistent input.
pub const CLASH_TOL: f64 = 0.5;

/// Identity first, then the remaining distinct operators in input order.
fn ordered_ops(ops: &[AffineSymOp]) -> Result<Vec<AffineSymOp>> {
    if !ops.iter().any(AffineSymOp::is_identity) {
        return Err(Error::InvalidSymop("operator list lacks the identity".into()));
    }
    let mut out = vec![AffineSymOp::identity()];
    for op in ops {
        if !out.contains(op) {
            out.push(*op);
        }
    }
    Ok(out)
}

/// Applies every operator to every ASU molecule. Images whose atoms all
/// coincide with an existing copy (same species, within [`DEDUP_TOL`]) are
/// dropped; any other contact closer than [`CLASH_TOL`] is an error.
/// Identity images come first and keep the input site order, so the
/// asymmetric unit is molecules `0..asu_mols.len()`.
pub fn expand_asymmetric_unit(
    asu_sites: &[AtomSite],
    asu_mols: &[MolecularGraph],
    ops: &[AffineSymOp],
    lattice: &Lattice,
) -> Result<Crystal> {
    let ops = ordered_ops(ops)?;
    let mut sites: Vec<AtomSite> = asu_sites.to_vec();
    let mut carts: Vec<Vec3> = sites.iter().map(|s| lattice.frac_to_cart(&s.frac)).collect();
    let mut molecules: Vec<MolecularGraph> = asu_mols.to_vec();
    // identity must already be a valid partition
    Crystal::new(lattice.clone(), sites.clone(), molecules.clone(), (0..asu_mols.len()).collect())?;

    for op in &ops[1..] {
        for mol in asu_mols {
            let image: Vec<AtomSite> = mol
                .atoms
                .iter()
                .map(|&a| AtomSite::new(asu_sites[a].z, op.apply(&asu_sites[a].frac)))
                .collect::<Result<_>>()?;
            let image_cart: Vec<Vec3> = image.iter().map(|s| lattice.frac_to_cart(&s.frac)).collect();

            let mut duplicate = false;
            for existing in &molecules {
                if existing.atoms.len() != image.len() {
                    continue;
                }
                let coincident = image.iter().zip(&image_cart).all(|(s, x)| {
                    existing.atoms.iter().any(|&e| {
                        sites[e].z == s.z && lattice.min_image_distance(&carts[e], x) < DEDUP_TOL
                    })
                });
                if coincident {
                    duplicate = true;
                    break;
                }
            }
            if duplicate {
                continue;
            }
            for x in &image_cart {
                if let Some(e) = (0..carts.len()).find(|&e| lattice.min_image_distance(&carts[e], x) < CLASH_TOL) {
                    return Err(Error::SymmetryClash(format!(
                        "image of molecule {} under {op} lies within {CLASH_TOL} A of site {e}",
                        mol.entity
                    )));
                }
            }
            let base = sites.len();
            let local = |a: usize| base + mol.atoms.iter().position(|&x| x == a).expect("bond atom in molecule");
            molecules.push(MolecularGraph {
                atoms: (base..base + image.len()).collect(),
                bonds: mol.bonds.iter().map(|b| Bond::new(local(b.a), local(b.b), b.order)).collect(),
                entity: mol.entity.clone(),
            });
            sites.extend(image);
            carts.extend(image_cart);
        }
    }
    Crystal::new(lattice.clone(), sites, molecules, (0..asu_mols.len()).collect())
}

/// Atom-level expansion used when the asymmetric unit holds molecular
/// fragments (molecules on special positions): images that coincide with
/// an existing site are merged into it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedSites {
    pub sites: Vec<AtomSite>,
    /// For every (op, asu atom): the index of its image in `sites`.
    pub image_of: Vec<Vec<usize>>,
}

pub fn expand_sites(asu_sites: &[AtomSite], ops: &[AffineSymOp], lattice: &Lattice) -> Result<ExpandedSites> {
    let ops = ordered_ops(ops)?;
    let mut sites: Vec<AtomSite> = Vec::new();
    let mut carts: Vec<Vec3> = Vec::new();
    let mut image_of = Vec::with_capacity(ops.len());
    for op in &ops {
        let mut row = Vec::with_capacity(asu_sites.len());
        for s in asu_sites {
            let site = AtomSite::new(s.z, op.apply(&s.frac))?;
            let x = lattice.frac_to_cart(&site.frac);
            let mut found = None;
            for (e, c) in carts.iter().enumerate() {
                let d = lattice.min_image_distance(c, &x);
                if d < DEDUP_TOL && sites[e].z == site.z {
                    found = Some(e);
                    break;
                }
                if d < CLASH_TOL {
                    return Err(Error::SymmetryClash(format!(
                        "image of a {} site under {op} lies {d:.3} A from site {e}",
                        crate::elements::symbol(site.z)
                    )));
                }
            }
            row.push(match found {
                Some(e) => e,
                None => {
                    sites.push(site);
                    carts.push(x);
                    sites.len() - 1
                }
            });
        }
        image_of.push(row);
    }
    Ok(ExpandedSites { sites, image_of })
}
