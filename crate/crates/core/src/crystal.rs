//! Periodic crystal data model: sites on the 3-torus, molecular graphs and
//! the asymmetric-unit index set.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lattice::{wrap_to_cell, IMat3, Lattice, Mat3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct AtomSite {
    pub z: u8,
    /// Fractional coordinate, always in [0, 1)^3.
    pub frac: Vec3,
}

impl AtomSite {
    pub fn new(z: u8, frac: Vec3) -> Result<Self> {
        if !(1..=118).contains(&z) {
            return Err(Error::InvalidCrystal(format!("atomic number {z} out of range")));
        }
        if !frac.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCrystal("non-finite fractional coordinate".into()));
        }
        Ok(AtomSite {
            z,
            frac: wrap_to_cell(&frac),
        })
    }

    pub fn is_hydrogen(&self) -> bool {
        self.z == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: u8,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: u8) -> Self {
        Bond {
            a: a.min(b),
            b: a.max(b),
            order,
        }
    }
}

/// One molecule: atom indices into the crystal's site list, bonds between
/// them, and an entity label shared by chemically identical copies.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    pub atoms: Vec<usize>,
    pub bonds: Vec<Bond>,
    pub entity: String,
}

impl MolecularGraph {
    pub fn single_atom(index: usize, entity: impl Into<String>) -> Self {
        MolecularGraph {
            atoms: vec![index],
            bonds: Vec::new(),
            entity: entity.into(),
        }
    }

    /// Adjacency over local positions (0..atoms.len()).
    pub fn local_adjacency(&self) -> Vec<Vec<usize>> {
        let pos = |site: usize| self.atoms.iter().position(|&a| a == site);
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            if let (Some(i), Some(j)) = (pos(b.a), pos(b.b)) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        adj
    }

    fn is_connected(&self) -> bool {
        if self.atoms.len() <= 1 {
            return true;
        }
        let adj = self.local_adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crystal {
    pub lattice: Lattice,
    pub sites: Vec<AtomSite>,
    pub molecules: Vec<MolecularGraph>,
    pub asu: Vec<usize>,
}

impl Crystal {
    pub fn new(
        lattice: Lattice,
        sites: Vec<AtomSite>,
        molecules: Vec<MolecularGraph>,
        asu: Vec<usize>,
    ) -> Result<Self> {
        let n = sites.len();
        let mut owner = vec![usize::MAX; n];
        for (k, mol) in molecules.iter().enumerate() {
            if mol.atoms.is_empty() {
                return Err(Error::InvalidCrystal(format!("molecule {k} has no atoms")));
            }
            for &a in &mol.atoms {
                if a >= n {
                    return Err(Error::InvalidCrystal(format!(
                        "molecule {k} references site {a} of {n}"
                    )));
                }
                if owner[a] != usize::MAX {
                    return Err(Error::InvalidCrystal(format!(
                        "site {a} belongs to molecules {} and {k}",
                        owner[a]
                    )));
                }
                owner[a] = k;
            }
            for b in &mol.bonds {
                if b.a >= n || b.b >= n || owner[b.a] != k || owner[b.b] != k || b.a == b.b {
                    return Err(Error::InvalidCrystal(format!(
                        "molecule {k} has a bond ({}, {}) outside its atoms",
                        b.a, b.b
                    )));
                }
            }
            if !mol.is_connected() {
                return Err(Error::InvalidCrystal(format!("molecule {k} is not connected")));
            }
        }
        if let Some(a) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::InvalidCrystal(format!("site {a} belongs to no molecule")));
        }
        if asu.is_empty() && !molecules.is_empty() {
            return Err(Error::InvalidCrystal("empty asymmetric unit".into()));
        }
        if let Some(&bad) = asu.iter().find(|&&i| i >= molecules.len()) {
            return Err(Error::InvalidCrystal(format!("asu index {bad} out of range")));
        }
        Ok(Crystal {
            lattice,
            sites,
            molecules,
            asu,
        })
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.sites.iter().filter(|s| !s.is_hydrogen()).count()
    }

    /// Fractional coordinates of molecule `k`, made contiguous by walking
    /// its bond graph with minimum-image steps and shifted by a lattice
    /// vector so the centroid lies in [0, 1)^3.
    pub fn molecule_frac(&self, k: usize) -> Vec<Vec3> {
        let mol = &self.molecules[k];
        let fracs: Vec<Vec3> = mol.atoms.iter().map(|&a| self.sites[a].frac).collect();
        unwrap_fracs(&self.lattice, &fracs, &mol.local_adjacency())
    }

    /// Whole-molecule Cartesian coordinates (see [`Crystal::molecule_frac`]).
    pub fn molecule_cart(&self, k: usize) -> Vec<Vec3> {
        self.molecule_frac(k)
            .iter()
            .map(|u| self.lattice.frac_to_cart(u))
            .collect()
    }

    /// Re-expresses the crystal in a new basis `v_j = sum_i p[(i, j)] a_i`
    /// with |det p| = 1. Sites are re-wrapped in the new cell.
    pub fn with_basis(&self, p: &IMat3) -> Result<Crystal> {
        let pf = p.map(|v| v as f64);
        if (pf.determinant().abs() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("change of basis is not unimodular".into()));
        }
        let lattice = self.lattice.transformed(p)?;
        let inv = pf.try_inverse().ok_or(Error::SingularSupercell)?;
        let sites = self
            .sites
            .iter()
            .map(|s| AtomSite::new(s.z, inv * s.frac))
            .collect::<Result<Vec<_>>>()?;
        Crystal::new(lattice, sites, self.molecules.clone(), self.asu.clone())
    }
}

fn check_rotation(rotation: &Mat3) -> Result<()> {
    let dev = (rotation.transpose() * rotation - Mat3::identity()).abs().max();
    let det = rotation.determinant();
    if dev > 1e-8 || (det - 1.0).abs() > 1e-8 {
        return Err(Error::NotARotation(dev.max((det - 1.0).abs())));
    }
    Ok(())
}

/// Makes a bonded atom set contiguous: walks the bond graph from the first
/// atom taking minimum-image steps (spanning tree), then shifts by a lattice
/// vector so the centroid lies in [0, 1)^3. Atoms unreachable from the
/// first atom keep their wrapped positions.
pub fn unwrap_fracs(lattice: &Lattice, fracs: &[Vec3], adjacency: &[Vec<usize>]) -> Vec<Vec3> {
    let mut out = fracs.to_vec();
    if out.is_empty() {
        return out;
    }
    let step = |i: usize, j: usize| {
        let d = fracs[j] - fracs[i];
        lattice.cart_to_frac(&lattice.min_image_vector(&lattice.frac_to_cart(&d)))
    };
    let mut placed = vec![false; out.len()];
    for root in 0..out.len() {
        if placed[root] {
            continue;
        }
        placed[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !placed[j] {
                    out[j] = out[i] + step(i, j);
                    placed[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    let centroid = out.iter().sum::<Vec3>() / out.len() as f64;
    let shift = centroid.map(f64::floor);
    for u in out.iter_mut() {
        *u -= shift;
    }
    out
}

/// Global translation (fractional `translation`, sites re-wrapped) followed
/// by a global rotation of the lattice; fractional coordinates are kept.
pub fn apply_rigid_motion(crystal: &Crystal, rotation: &Mat3, translation: &Vec3) -> Result<Crystal> {
    check_rotation(rotation)?;
    let lattice = crystal.lattice.rotated(rotation)?;
    let sites = crystal
        .sites
        .iter()
        .map(|s| AtomSite::new(s.z, s.frac + translation))
        .collect::<Result<Vec<_>>>()?;
    Crystal::new(lattice, sites, crystal.molecules.clone(), crystal.asu.clone())
}

/// Full minimum-image distance matrix between all sites.
pub fn min_image_distance_matrix(crystal: &Crystal) -> Vec<Vec<f64>> {
    let carts: Vec<Vec3> = crystal
        .sites
        .iter()
        .map(|s| crystal.lattice.frac_to_cart(&s.frac))
        .collect();
    let n = carts.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = crystal.lattice.min_image_distance(&carts[i], &carts[j]);
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    out
}
