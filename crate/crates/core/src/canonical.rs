//! Canonical JSON form of a crystal (`xtal.crystal.v1`).
//!
//! Fields are emitted in a fixed order and floats in shortest round-trip
//! form, so serialising a parsed document reproduces it byte for byte.

use serde::{Deserialize, Serialize};

use crate::crystal::{AtomSite, Bond, Crystal, MolecularGraph};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Vec3};

pub const CRYSTAL_SCHEMA: &str = "xtal.crystal.v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteDoc {
    z: u8,
    frac: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoleculeDoc {
    atoms: Vec<u32>,
    bonds: Vec<(u32, u32, u8)>,
    entity: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrystalDoc {
    schema: String,
    lattice: [[f64; 3]; 3],
    sites: Vec<SiteDoc>,
    molecules: Vec<MoleculeDoc>,
    asu: Vec<u32>,
}

/// Converts a serde path such as `sites[0].frac` into a JSON pointer
/// (`/sites/0/frac`).
pub fn pointer_from_path(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::from("/");
    for c in path.chars() {
        match c {
            '.' | '[' => {
                if !out.ends_with('/') {
                    out.push('/');
                }
            }
            ']' => {}
            c => out.push(c),
        }
    }
    out
}

fn schema_err(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

pub fn to_canonical_json(crystal: &Crystal) -> String {
    let doc = CrystalDoc {
        schema: CRYSTAL_SCHEMA.to_string(),
        lattice: crystal.lattice.rows(),
        sites: crystal
            .sites
            .iter()
            .map(|s| SiteDoc {
                z: s.z,
                frac: [s.frac.x, s.frac.y, s.frac.z],
            })
            .collect(),
        molecules: crystal
            .molecules
            .iter()
            .map(|m| MoleculeDoc {
                atoms: m.atoms.iter().map(|&a| a as u32).collect(),
                bonds: m.bonds.iter().map(|b| (b.a as u32, b.b as u32, b.order)).collect(),
                entity: m.entity.clone(),
            })
            .collect(),
        asu: crystal.asu.iter().map(|&k| k as u32).collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("crystal serialises");
    out.push('\n');
    out
}

pub fn from_canonical_json(text: &str) -> Result<Crystal> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: CrystalDoc = serde_path_to_error::deserialize(de)
        .map_err(|e| schema_err(pointer_from_path(&e.path().to_string()), e.inner().to_string()))?;
    if doc.schema != CRYSTAL_SCHEMA {
        return Err(schema_err(
            "/schema",
            format!("expected {CRYSTAL_SCHEMA}, got {}", doc.schema),
        ));
    }
    let lattice = Lattice::from_rows(doc.lattice).map_err(|e| schema_err("/lattice", e.to_string()))?;
    let mut sites = Vec::with_capacity(doc.sites.len());
    for (i, s) in doc.sites.iter().enumerate() {
        if !s.frac.iter().all(|v| (0.0..1.0).contains(v)) {
            return Err(schema_err(format!("/sites/{i}/frac"), "fractional coordinates must lie in [0, 1)"));
        }
        sites.push(AtomSite::new(s.z, Vec3::from(s.frac)).map_err(|e| schema_err(format!("/sites/{i}/z"), e.to_string()))?);
    }
    let molecules = doc
        .molecules
        .into_iter()
        .map(|m| MolecularGraph {
            atoms: m.atoms.iter().map(|&a| a as usize).collect(),
            bonds: m
                .bonds
                .iter()
                .map(|&(a, b, o)| Bond::new(a as usize, b as usize, o))
                .collect(),
            entity: m.entity,
        })
        .collect();
    let asu = doc.asu.iter().map(|&k| k as usize).collect();
    Crystal::new(lattice, sites, molecules, asu).map_err(|e| schema_err("/molecules", e.to_string()))
}
