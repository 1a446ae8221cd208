//! Finite molecular blocks: whole molecules in plain Cartesian space.
//!
//! A block is what the cropping routines consume (a supercell laid out as a
//! finite cluster) and what the metrics compare (predicted samples and
//! reference clusters). Molecules sharing an entity label are assumed to
//! share atom ordering.

use serde::{Deserialize, Serialize};

use crate::crystal::Crystal;
use crate::error::{Error, Result};
use crate::lattice::{Mat3, Vec3};

pub const BLOCK_SCHEMA: &str = "xtal.block.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMolecule {
    pub entity: String,
    pub species: Vec<u8>,
    pub coords: Vec<Vec3>,
    /// Local atom indices with bond order.
    #[serde(default)]
    pub bonds: Vec<(usize, usize, u8)>,
}

impl BlockMolecule {
    pub fn heavy_indices(&self) -> Vec<usize> {
        (0..self.species.len()).filter(|&i| self.species[i] != 1).collect()
    }

    pub fn heavy_coords(&self) -> Vec<Vec3> {
        self.species
            .iter()
            .zip(&self.coords)
            .filter(|(z, _)| **z != 1)
            .map(|(_, x)| *x)
            .collect()
    }

    /// Non-hydrogen atom count (tokens).
    pub fn tokens(&self) -> usize {
        self.species.iter().filter(|&&z| z != 1).count()
    }

    /// Centroid of the heavy atoms (all atoms for hydrogen-only molecules).
    pub fn centroid(&self) -> Vec3 {
        let heavy = self.heavy_coords();
        let pts = if heavy.is_empty() { &self.coords } else { &heavy };
        pts.iter().sum::<Vec3>() / pts.len().max(1) as f64
    }

    /// Hydrogen-free copy with bonds re-indexed.
    pub fn without_hydrogens(&self) -> BlockMolecule {
        let keep = self.heavy_indices();
        let mut map = vec![usize::MAX; self.species.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        BlockMolecule {
            entity: self.entity.clone(),
            species: keep.iter().map(|&i| self.species[i]).collect(),
            coords: keep.iter().map(|&i| self.coords[i]).collect(),
            bonds: self
                .bonds
                .iter()
                .filter(|(a, b, _)| map[*a] != usize::MAX && map[*b] != usize::MAX)
                .map(|&(a, b, o)| (map[a], map[b], o))
                .collect(),
        }
    }

    pub fn transformed(&self, rotation: &Mat3, translation: &Vec3) -> BlockMolecule {
        BlockMolecule {
            coords: self.coords.iter().map(|x| rotation * x + translation).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    #[serde(default)]
    pub target: Option<String>,
    pub molecules: Vec<BlockMolecule>,
    #[serde(default)]
    pub asu: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct BlockDoc {
    schema: String,
    #[serde(flatten)]
    block: Block,
}

impl Block {
    pub fn new(molecules: Vec<BlockMolecule>) -> Self {
        Block {
            target: None,
            molecules,
            asu: Vec::new(),
        }
    }

    /// Lays out every molecule of `crystal` whole, with its centroid in the
    /// unit cell.
    pub fn from_crystal(crystal: &Crystal) -> Block {
        let molecules = crystal
            .molecules
            .iter()
            .enumerate()
            .map(|(k, mol)| {
                let coords = crystal.molecule_cart(k);
                let local = |site: usize| mol.atoms.iter().position(|&a| a == site).unwrap();
                BlockMolecule {
                    entity: mol.entity.clone(),
                    species: mol.atoms.iter().map(|&a| crystal.sites[a].z).collect(),
                    coords,
                    bonds: mol.bonds.iter().map(|b| (local(b.a), local(b.b), b.order)).collect(),
                }
            })
            .collect();
        Block {
            target: None,
            molecules,
            asu: crystal.asu.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    pub fn total_tokens(&self) -> usize {
        self.molecules.iter().map(BlockMolecule::tokens).sum()
    }

    pub fn subset(&self, indices: &[usize]) -> Block {
        Block {
            target: self.target.clone(),
            molecules: indices.iter().map(|&i| self.molecules[i].clone()).collect(),
            asu: Vec::new(),
        }
    }

    pub fn transformed(&self, rotation: &Mat3, translation: &Vec3) -> Block {
        Block {
            molecules: self
                .molecules
                .iter()
                .map(|m| m.transformed(rotation, translation))
                .collect(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        let doc = BlockDoc {
            schema: BLOCK_SCHEMA.to_string(),
            block: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("block serialises")
    }

    pub fn from_json(text: &str) -> Result<Block> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: BlockDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            pointer: crate::canonical::pointer_from_path(&e.path().to_string()),
            message: e.inner().to_string(),
        })?;
        if doc.schema != BLOCK_SCHEMA {
            return Err(Error::Schema {
                pointer: "/schema".into(),
                message: format!("expected {BLOCK_SCHEMA}, got {}", doc.schema),
            });
        }
        for (k, m) in doc.block.molecules.iter().enumerate() {
            if m.species.len() != m.coords.len() || m.species.is_empty() {
                return Err(Error::Schema {
                    pointer: format!("/molecules/{k}"),
                    message: "species and coords must be non-empty and of equal length".into(),
                });
            }
            if let Some(b) = m.bonds.iter().position(|&(a, b, _)| a >= m.species.len() || b >= m.species.len()) {
                return Err(Error::Schema {
                    pointer: format!("/molecules/{k}/bonds/{b}"),
                    message: "bond index out of range".into(),
                });
            }
        }
        Ok(doc.block)
    }
}
