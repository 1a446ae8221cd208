//! Intermolecular steric clashes.

use std::collections::HashMap;

use serde::Serialize;

use crate::block::Block;
use crate::elements::RadiiTable;
use crate::error::Result;
use crate::lattice::Vec3;

/// (molecule, index among its heavy atoms).
pub type HeavyAtom = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clash {
    pub a: HeavyAtom,
    pub b: HeavyAtom,
    pub distance: f64,
    /// `r_a + r_b - slack`.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionReport {
    pub collides: bool,
    pub clashes: Vec<Clash>,
}

/// Heavy-atom pairs from different molecules closer than
/// `r_a + r_b - slack`.
pub fn collision_check(block: &Block, radii: &RadiiTable, slack: f64) -> Result<CollisionReport> {
    let mut atoms: Vec<(HeavyAtom, Vec3, f64)> = Vec::new();
    for (m, mol) in block.molecules.iter().enumerate() {
        let heavy = mol.without_hydrogens();
        for (i, (z, x)) in heavy.species.iter().zip(&heavy.coords).enumerate() {
            atoms.push(((m, i), *x, radii.radius(*z)?));
        }
    }
    let max_r = atoms.iter().map(|a| a.2).fold(0.0, f64::max);
    let size = (2.0 * max_r - slack).max(0.5);
    let cell = |x: &Vec3| [0, 1, 2].map(|i| (x[i] / size).floor() as i64);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (k, a) in atoms.iter().enumerate() {
        grid.entry(cell(&a.1)).or_default().push(k);
    }
    let mut clashes = Vec::new();
    for (k, (ak, xk, rk)) in atoms.iter().enumerate() {
        let c = cell(xk);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &l in bucket {
                        let (al, xl, rl) = &atoms[l];
                        if l <= k || al.0 == ak.0 {
                            continue;
                        }
                        let d = (xk - xl).norm();
                        let limit = rk + rl - slack;
                        if d < limit {
                            clashes.push(Clash {
                                a: *ak,
                                b: *al,
                                distance: d,
                                limit,
                            });
                        }
                    }
                }
            }
        }
    }
    clashes.sort_by(|x, y| (x.a, x.b).cmp(&(y.a, y.b)));
    Ok(CollisionReport {
        collides: !clashes.is_empty(),
        clashes,
    })
}
