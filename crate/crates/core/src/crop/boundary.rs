//! Contact edges crossing the crop boundary.

use std::collections::HashMap;

use serde::Serialize;

use crate::block::Block;
use crate::crop::Crop;
use crate::lattice::Vec3;

/// A heavy atom addressed as (molecule, index among its heavy atoms).
pub type AtomRef = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactEdge {
    pub inside: AtomRef,
    pub outside: AtomRef,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactBoundary {
    pub r0: f64,
    pub edges: Vec<ContactEdge>,
}

impl ContactBoundary {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn cell_of(x: &Vec3, size: f64) -> [i64; 3] {
    [0, 1, 2].map(|i| (x[i] / size).floor() as i64)
}

/// Heavy-atom pairs within `r0` with one atom in the crop and the other
/// outside, found with a cell list of width `r0`. Edges are ordered by
/// inside atom, then outside atom.
pub fn contact_boundary(block: &Block, crop: &Crop, r0: f64) -> ContactBoundary {
    let mut inside = vec![false; block.len()];
    for &m in &crop.molecules {
        inside[m] = true;
    }
    let size = r0.max(1e-6);
    let mut grid: HashMap<[i64; 3], Vec<(AtomRef, Vec3)>> = HashMap::new();
    for (m, mol) in block.molecules.iter().enumerate() {
        if inside[m] {
            continue;
        }
        for (a, x) in mol.heavy_coords().into_iter().enumerate() {
            grid.entry(cell_of(&x, size)).or_default().push(((m, a), x));
        }
    }
    let mut edges = Vec::new();
    for &m in &crop.molecules {
        for (a, x) in block.molecules[m].heavy_coords().into_iter().enumerate() {
            let c = cell_of(&x, size);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                            continue;
                        };
                        for &(outside, y) in bucket {
                            let d = (x - y).norm();
                            if d <= r0 {
                                edges.push(ContactEdge {
                                    inside: (m, a),
                                    outside,
                                    distance: d,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    edges.sort_by(|a, b| (a.inside, a.outside).cmp(&(b.inside, b.outside)));
    ContactBoundary { r0, edges }
}
