//! Bond perception and molecule assignment on the torus.

use std::collections::{BTreeMap, HashMap};

use crate::crystal::{unwrap_fracs, AtomSite, Bond, MolecularGraph};
use crate::elements::{symbol, RadiiTable};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Vec3};

/// Added to the sum of covalent radii when inferring bonds (A).
pub const BOND_SLACK: f64 = 0.4;
/// A molecule whose unwrapped extent exceeds this many cell lengths along
/// any axis is treated as polymeric.
pub const MAX_CELL_SPAN: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Perception {
    pub molecules: Vec<MolecularGraph>,
    /// Per molecule: closes a ring through a lattice translation or spans
    /// more than [`MAX_CELL_SPAN`] cells.
    pub polymeric: Vec<bool>,
}

impl Perception {
    pub fn any_polymeric(&self) -> bool {
        self.polymeric.iter().any(|&p| p)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Bonds inferred from covalent radii under the minimum-image metric.
pub fn infer_bonds(lattice: &Lattice, sites: &[AtomSite]) -> Result<Vec<Bond>> {
    let table = RadiiTable::covalent();
    let radii = sites.iter().map(|s| table.radius(s.z)).collect::<Result<Vec<_>>>()?;
    let carts: Vec<Vec3> = sites.iter().map(|s| lattice.frac_to_cart(&s.frac)).collect();
    let mut bonds = Vec::new();
    for i in 0..sites.len() {
        for j in (i + 1)..sites.len() {
            let cutoff = radii[i] + radii[j] + BOND_SLACK;
            if lattice.min_image_distance(&carts[i], &carts[j]) < cutoff {
                bonds.push(Bond::new(i, j, 1));
            }
        }
    }
    Ok(bonds)
}

/// Sites bonded to a second periodic image of some partner (or to their
/// own image): such contacts only close up through a lattice translation,
/// which the single minimum-image bond per pair cannot represent.
fn periodically_bonded(lattice: &Lattice, sites: &[AtomSite]) -> Result<Vec<bool>> {
    let table = RadiiTable::covalent();
    let radii = sites.iter().map(|s| table.radius(s.z)).collect::<Result<Vec<_>>>()?;
    let basis = crate::niggli::niggli_reduce(lattice)?.reduced;
    let mut shifts = Vec::new();
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                if (i, j, k) != (0, 0, 0) {
                    shifts.push(basis.frac_to_cart(&Vec3::new(i as f64, j as f64, k as f64)));
                }
            }
        }
    }
    let carts: Vec<Vec3> = sites.iter().map(|s| lattice.frac_to_cart(&s.frac)).collect();
    let mut flag = vec![false; sites.len()];
    for i in 0..sites.len() {
        for j in i..sites.len() {
            let cutoff = radii[i] + radii[j] + BOND_SLACK;
            let d = lattice.min_image_vector(&(carts[j] - carts[i]));
            if i != j && d.norm() >= cutoff {
                continue;
            }
            if shifts.iter().any(|t| (d + t).norm() < cutoff) {
                flag[i] = true;
                flag[j] = true;
            }
        }
    }
    Ok(flag)
}

fn hill_formula(species: &[u8]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &z in species {
        *counts.entry(symbol(z)).or_default() += 1;
    }
    let mut out = String::new();
    let mut push = |sym: &str, n: usize| {
        out.push_str(sym);
        if n > 1 {
            out.push_str(&n.to_string());
        }
    };
    let has_carbon = counts.contains_key("C");
    if has_carbon {
        push("C", counts["C"]);
        if let Some(&h) = counts.get("H") {
            push("H", h);
        }
    }
    for (sym, &n) in &counts {
        if has_carbon && (*sym == "C" || *sym == "H") {
            continue;
        }
        push(sym, n);
    }
    out
}

/// Order-independent chemical signature: species multiset, bond types and
/// each atom's neighbour species.
fn signature(sites: &[AtomSite], mol: &MolecularGraph) -> String {
    let z = |a: usize| sites[a].z;
    let mut species: Vec<u8> = mol.atoms.iter().map(|&a| z(a)).collect();
    species.sort_unstable();
    let mut bond_types: Vec<(u8, u8, u8)> = mol
        .bonds
        .iter()
        .map(|b| (z(b.a).min(z(b.b)), z(b.a).max(z(b.b)), b.order))
        .collect();
    bond_types.sort_unstable();
    let mut neighbours: HashMap<usize, Vec<u8>> = HashMap::new();
    for b in &mol.bonds {
        neighbours.entry(b.a).or_default().push(z(b.b));
        neighbours.entry(b.b).or_default().push(z(b.a));
    }
    let mut env: Vec<(u8, Vec<u8>)> = mol
        .atoms
        .iter()
        .map(|&a| {
            let mut n = neighbours.remove(&a).unwrap_or_default();
            n.sort_unstable();
            (z(a), n)
        })
        .collect();
    env.sort();
    format!("{species:?}|{bond_types:?}|{env:?}")
}

/// Assigns entity labels: the Hill formula, suffixed `#2`, `#3`, ... when
/// distinct connectivities share a formula. Labels follow first appearance.
pub fn assign_entities(sites: &[AtomSite], molecules: &mut [MolecularGraph]) {
    let mut by_signature: HashMap<String, String> = HashMap::new();
    let mut per_formula: HashMap<String, usize> = HashMap::new();
    for mol in molecules.iter_mut() {
        let sig = signature(sites, mol);
        let label = by_signature.entry(sig).or_insert_with(|| {
            let formula = hill_formula(&mol.atoms.iter().map(|&a| sites[a].z).collect::<Vec<_>>());
            let n = per_formula.entry(formula.clone()).or_default();
            *n += 1;
            if *n == 1 {
                formula
            } else {
                format!("{formula}#{n}")
            }
        });
        mol.entity = label.clone();
    }
}

/// Connected components of the bond graph, ordered by smallest atom index,
/// with the polymeric flag computed per component. Explicit bonds are used
/// as given; otherwise they are inferred with [`infer_bonds`].
pub fn perceive_components(
    lattice: &Lattice,
    sites: &[AtomSite],
    explicit_bonds: Option<&[Bond]>,
) -> Result<Perception> {
    let n = sites.len();
    let mut periodic = vec![false; n];
    let bonds = match explicit_bonds {
        Some(b) => {
            if let Some(bad) = b.iter().find(|b| b.a >= n || b.b >= n || b.a == b.b) {
                return Err(Error::InvalidCrystal(format!(
                    "bond ({}, {}) references a missing site",
                    bad.a, bad.b
                )));
            }
            let mut v = b.to_vec();
            v.sort();
            v.dedup_by(|x, y| x.a == y.a && x.b == y.b);
            v
        }
        None => {
            periodic = periodically_bonded(lattice, sites)?;
            infer_bonds(lattice, sites)?
        }
    };

    let mut uf = UnionFind((0..n).collect());
    for b in &bonds {
        uf.union(b.a, b.b);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut owner = vec![0usize; n];
    let mut molecules: Vec<MolecularGraph> = Vec::with_capacity(groups.len());
    for (k, atoms) in groups.into_values().enumerate() {
        for &a in &atoms {
            owner[a] = k;
        }
        molecules.push(MolecularGraph {
            atoms,
            bonds: Vec::new(),
            entity: String::new(),
        });
    }
    for b in bonds {
        molecules[owner[b.a]].bonds.push(b);
    }

    let polymeric = molecules
        .iter()
        .map(|mol| mol.atoms.iter().any(|&a| periodic[a]) || is_polymeric(lattice, sites, mol))
        .collect();
    assign_entities(sites, &mut molecules);
    Ok(Perception { molecules, polymeric })
}

fn is_polymeric(lattice: &Lattice, sites: &[AtomSite], mol: &MolecularGraph) -> bool {
    let fracs: Vec<Vec3> = mol.atoms.iter().map(|&a| sites[a].frac).collect();
    let adj = mol.local_adjacency();
    let unwrapped = unwrap_fracs(lattice, &fracs, &adj);
    // every bond must close with its minimum-image step in the unwrapped frame
    for (i, nbrs) in adj.iter().enumerate() {
        for &j in nbrs {
            let d = fracs[j] - fracs[i];
            let step = lattice.cart_to_frac(&lattice.min_image_vector(&lattice.frac_to_cart(&d)));
            if (unwrapped[j] - unwrapped[i] - step).abs().max() > 1e-6 {
                return true;
            }
        }
    }
    (0..3).any(|axis| {
        let (lo, hi) = unwrapped
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u[axis]), hi.max(u[axis])));
        hi - lo > MAX_CELL_SPAN
    })
}

/// Molecules of `sites`, failing with [`Error::Polymeric`] when any
/// component is an extended network.
pub fn perceive_molecules(
    lattice: &Lattice,
    sites: &[AtomSite],
    explicit_bonds: Option<&[Bond]>,
) -> Result<Vec<MolecularGraph>> {
    let p = perceive_components(lattice, sites, explicit_bonds)?;
    if let Some(k) = p.polymeric.iter().position(|&x| x) {
        return Err(Error::Polymeric(format!(
            "molecule {k} ({}) is an extended network",
            p.molecules[k].entity
        )));
    }
    Ok(p.molecules)
}
