//! Supercell expansion by an integer change of basis `U`.

use serde::{Deserialize, Serialize};

use crate::crystal::{AtomSite, Bond, Crystal, MolecularGraph};
use crate::error::{Error, Result};
use crate::lattice::{IMat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SupercellPolicy {
    /// Tile the cell with translations in {-1, 0, 1}^3 around every coset
    /// image and keep the whole molecules whose centroid lands inside the
    /// supercell.
    #[default]
    CentroidInside,
    /// Plain expansion: every site replicated once per coset representative.
    AllCosets,
}

/// Integer supercell matrix with its coset representatives of Z^3 / U Z^3.
#[derive(Debug, Clone, PartialEq)]
pub struct SupercellSpec {
    u: IMat3,
    m: usize,
    coset_reps: Vec<[i64; 3]>,
}

fn adjugate(u: &IMat3) -> IMat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| u[(r0, c0)] * u[(r1, c1)] - u[(r0, c1)] * u[(r1, c0)];
    // adj = cofactor^T
    IMat3::new(
        c(1, 2, 1, 2),
        -c(0, 2, 1, 2),
        c(0, 1, 1, 2),
        -c(1, 2, 0, 2),
        c(0, 2, 0, 2),
        -c(0, 1, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 0, 1),
        c(0, 1, 0, 1),
    )
}

fn det(u: &IMat3) -> i64 {
    u[(0, 0)] * (u[(1, 1)] * u[(2, 2)] - u[(1, 2)] * u[(2, 1)])
        - u[(0, 1)] * (u[(1, 0)] * u[(2, 2)] - u[(1, 2)] * u[(2, 0)])
        + u[(0, 2)] * (u[(1, 0)] * u[(2, 1)] - u[(1, 1)] * u[(2, 0)])
}

impl SupercellSpec {
    /// Columns of `u` are the new lattice vectors expressed in the old
    /// basis. Negative determinants are rejected so the supercell stays
    /// right-handed.
    pub fn new(u: IMat3) -> Result<Self> {
        let d = det(&u);
        if d == 0 {
            return Err(Error::SingularSupercell);
        }
        if d < 0 {
            return Err(Error::InvalidParameter(format!(
                "supercell matrix has det {d} < 0 (left-handed)"
            )));
        }
        let adj = adjugate(&u);
        // bounding box of the supercell corners in old fractional units
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for corner in 0..8 {
            let c = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1].map(|b| b as i64);
            for axis in 0..3 {
                let v: i64 = (0..3).map(|j| u[(axis, j)] * c[j]).sum();
                lo[axis] = lo[axis].min(v);
                hi[axis] = hi[axis].max(v);
            }
        }
        let mut reps = Vec::with_capacity(d as usize);
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let r = [x, y, z];
                    // U^-1 r = adj r / d must lie in [0, 1)^3
                    let inside = (0..3).all(|i| {
                        let num: i64 = (0..3).map(|j| adj[(i, j)] * r[j]).sum();
                        (0..d).contains(&num)
                    });
                    if inside {
                        reps.push(r);
                    }
                }
            }
        }
        debug_assert_eq!(reps.len(), d as usize);
        Ok(SupercellSpec {
            u,
            m: d as usize,
            coset_reps: reps,
        })
    }

    pub fn diagonal(n: i64) -> Result<Self> {
        Self::new(IMat3::from_diagonal_element(n))
    }

    pub fn matrix(&self) -> &IMat3 {
        &self.u
    }

    pub fn multiplicity(&self) -> usize {
        self.m
    }

    pub fn coset_reps(&self) -> &[[i64; 3]] {
        &self.coset_reps
    }

    fn inverse(&self) -> nalgebra::Matrix3<f64> {
        adjugate(&self.u).map(|v| v as f64) / self.m as f64
    }

    /// Index of the coset representative whose cell sits closest to the
    /// supercell centre.
    pub fn central_coset(&self) -> usize {
        let inv = self.inverse();
        let mid = Vec3::repeat(0.5);
        let mut best = (f64::INFINITY, 0);
        for (i, r) in self.coset_reps.iter().enumerate() {
            let f = inv * (Vec3::new(r[0] as f64, r[1] as f64, r[2] as f64) + mid);
            let d = (f - mid).norm();
            if d < best.0 - 1e-12 {
                best = (d, i);
            }
        }
        best.1
    }
}

fn rvec(r: &[i64; 3]) -> Vec3 {
    Vec3::new(r[0] as f64, r[1] as f64, r[2] as f64)
}

/// Expands `crystal` into the supercell `spec`. Molecules keep their entity
/// labels; the asymmetric unit of the result is the copy of the original
/// asymmetric unit in the central coset.
pub fn build_supercell(crystal: &Crystal, spec: &SupercellSpec, policy: SupercellPolicy) -> Result<Crystal> {
    let lattice = crystal.lattice.transformed(&spec.u)?;
    let inv = spec.inverse();
    let n_mol = crystal.molecules.len();
    let mut sites = Vec::with_capacity(crystal.sites.len() * spec.m);
    let mut molecules = Vec::with_capacity(n_mol * spec.m);

    match policy {
        SupercellPolicy::AllCosets => {
            let n = crystal.sites.len();
            for (ci, r) in spec.coset_reps.iter().enumerate() {
                for s in &crystal.sites {
                    sites.push(AtomSite::new(s.z, inv * (s.frac + rvec(r)))?);
                }
                for mol in &crystal.molecules {
                    molecules.push(MolecularGraph {
                        atoms: mol.atoms.iter().map(|a| a + ci * n).collect(),
                        bonds: mol
                            .bonds
                            .iter()
                            .map(|b| Bond::new(b.a + ci * n, b.b + ci * n, b.order))
                            .collect(),
                        entity: mol.entity.clone(),
                    });
                }
            }
        }
        SupercellPolicy::CentroidInside => {
            let whole: Vec<Vec<Vec3>> = (0..n_mol).map(|k| crystal.molecule_frac(k)).collect();
            let super_vec = |t: [i64; 3]| -> Vec3 {
                // supercell translation t expressed in old fractional units
                let tv = rvec(&t);
                spec.u.map(|v| v as f64) * tv
            };
            for r in &spec.coset_reps {
                for (k, mol) in crystal.molecules.iter().enumerate() {
                    let atoms = &whole[k];
                    let centroid = atoms.iter().sum::<Vec3>() / atoms.len() as f64 + rvec(r);
                    let mut kept = None;
                    'tiles: for i in -1..=1 {
                        for j in -1..=1 {
                            for l in -1..=1 {
                                let shift = super_vec([i, j, l]);
                                let g = inv * (centroid + shift);
                                if g.iter().all(|v| (0.0..1.0).contains(v)) {
                                    kept = Some(shift);
                                    break 'tiles;
                                }
                            }
                        }
                    }
                    let shift = match kept {
                        Some(s) => s,
                        // centroid outside the +-1 tiling window: fall back to wrapping
                        None => {
                            let g = inv * centroid;
                            spec.u.map(|v| v as f64) * (-g.map(f64::floor))
                        }
                    };
                    let base = sites.len();
                    let mut local = std::collections::HashMap::new();
                    for (li, (&site, u)) in mol.atoms.iter().zip(atoms).enumerate() {
                        local.insert(site, base + li);
                        let z = crystal.sites[site].z;
                        sites.push(AtomSite::new(z, inv * (u + rvec(r) + shift))?);
                    }
                    molecules.push(MolecularGraph {
                        atoms: (base..base + atoms.len()).collect(),
                        bonds: mol
                            .bonds
                            .iter()
                            .map(|b| Bond::new(local[&b.a], local[&b.b], b.order))
                            .collect(),
                        entity: mol.entity.clone(),
                    });
                }
            }
        }
    }

    let central = spec.central_coset();
    let asu = crystal.asu.iter().map(|&k| central * n_mol + k).collect();
    Crystal::new(lattice, sites, molecules, asu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    fn one_atom() -> Crystal {
        Crystal::new(
            Lattice::cubic(4.0).unwrap(),
            vec![AtomSite::new(6, Vec3::new(0.1, 0.2, 0.3)).unwrap()],
            vec![MolecularGraph::single_atom(0, "A")],
            vec![0],
        )
        .unwrap()
    }

    #[test]
    fn coset_counts_match_determinant() {
        let specs = [
            IMat3::identity(),
            IMat3::from_diagonal_element(2),
            IMat3::from_diagonal_element(3),
            IMat3::new(1, 1, 0, 0, 1, 0, 0, 0, 1),
            IMat3::new(2, 1, 0, -1, 1, 0, 0, 0, 1),
            IMat3::new(1, 2, 0, 0, 2, 1, 1, 0, 2),
        ];
        for u in specs {
            let s = SupercellSpec::new(u).unwrap();
            assert_eq!(s.coset_reps().len(), s.multiplicity(), "{u}");
            let mut seen = s.coset_reps().to_vec();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), s.multiplicity());
        }
    }

    #[test]
    fn singular_is_rejected() {
        let u = IMat3::new(1, 2, 0, 2, 4, 0, 0, 0, 1);
        assert!(matches!(SupercellSpec::new(u), Err(Error::SingularSupercell)));
    }

    #[test]
    fn identity_and_doubling() {
        let c = one_atom();
        for policy in [SupercellPolicy::AllCosets, SupercellPolicy::CentroidInside] {
            let same = build_supercell(&c, &SupercellSpec::diagonal(1).unwrap(), policy).unwrap();
            assert_eq!(same, c);
            let big = build_supercell(&c, &SupercellSpec::diagonal(2).unwrap(), policy).unwrap();
            assert_eq!(big.molecules.len(), 8);
            assert!((big.lattice.matrix() - c.lattice.matrix() * 2.0).abs().max() < 1e-12);
        }
    }

    #[test]
    fn central_coset_of_three() {
        let s = SupercellSpec::diagonal(3).unwrap();
        assert_eq!(s.coset_reps()[s.central_coset()], [1, 1, 1]);
    }
}
