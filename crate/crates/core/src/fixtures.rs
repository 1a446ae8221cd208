//! Small synthetic molecules and crystals shared by the tests, the CLI
//! demos and the acceptance suite.

use nalgebra::{Rotation3, Unit};

use crate::crystal::{AtomSite, Bond, Crystal, MolecularGraph};
use crate::elements::symbol;
use crate::error::Result;
use crate::ingest::expand_asymmetric_unit;
use crate::lattice::{wrap_to_cell, Lattice, Mat3, Vec3};
use crate::symop::{parse_symop, AffineSymOp};

/// A rigid molecule in its own Cartesian frame, centred near the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeTemplate {
    pub entity: String,
    pub species: Vec<u8>,
    pub coords: Vec<Vec3>,
    pub bonds: Vec<(usize, usize, u8)>,
}

/// Planar C6H6 in the xy-plane (C-C 1.39 A, C-H 1.09 A, aromatic ring
/// bonds recorded as order 4).
pub fn benzene() -> MoleculeTemplate {
    let mut species = Vec::new();
    let mut coords = Vec::new();
    let mut bonds = Vec::new();
    for k in 0..6 {
        let t = (k as f64 * 60.0).to_radians();
        species.push(6);
        coords.push(Vec3::new(t.cos(), t.sin(), 0.0) * 1.39);
        bonds.push((k, (k + 1) % 6, 4));
    }
    for k in 0..6 {
        let t = (k as f64 * 60.0).to_radians();
        species.push(1);
        coords.push(Vec3::new(t.cos(), t.sin(), 0.0) * 2.48);
        bonds.push((k, k + 6, 1));
    }
    MoleculeTemplate {
        entity: "C6H6".into(),
        species,
        coords,
        bonds,
    }
}

/// Carbon monoxide along x.
pub fn carbon_monoxide() -> MoleculeTemplate {
    MoleculeTemplate {
        entity: "CO".into(),
        species: vec![6, 8],
        coords: vec![Vec3::new(-0.565, 0.0, 0.0), Vec3::new(0.565, 0.0, 0.0)],
        bonds: vec![(0, 1, 3)],
    }
}

/// Straight chain of `n` carbons along x, 1.5 A apart.
pub fn carbon_chain(n: usize) -> MoleculeTemplate {
    let half = (n as f64 - 1.0) / 2.0;
    MoleculeTemplate {
        entity: format!("C{n}"),
        species: vec![6; n],
        coords: (0..n).map(|i| Vec3::new((i as f64 - half) * 1.5, 0.0, 0.0)).collect(),
        bonds: (1..n).map(|i| (i - 1, i, 1)).collect(),
    }
}

/// Heavy-atom butane skeleton with the C1-C2-C3-C4 torsion set to
/// `torsion_deg` (C-C 1.53 A, angles 112 degrees).
pub fn butane(torsion_deg: f64) -> MoleculeTemplate {
    let bond = 1.53;
    let theta = 112f64.to_radians();
    let b = Vec3::new(0.0, 0.0, 0.0);
    let c = Vec3::new(bond, 0.0, 0.0);
    let a = b + Vec3::new(-theta.cos(), theta.sin(), 0.0) * bond;
    // place d from (a, b, c) with the requested dihedral
    let phi = torsion_deg.to_radians();
    let bc = (c - b).normalize();
    let n = (b - a).cross(&bc).normalize();
    let m = n.cross(&bc);
    let local = Vec3::new(-theta.cos(), theta.sin() * phi.cos(), theta.sin() * phi.sin());
    let d = c + (bc * local.x + m * local.y + n * local.z) * bond;
    let centroid = (a + b + c + d) / 4.0;
    MoleculeTemplate {
        entity: "C4".into(),
        species: vec![6; 4],
        coords: [a, b, c, d].iter().map(|x| x - centroid).collect(),
        bonds: vec![(0, 1, 1), (1, 2, 1), (2, 3, 1)],
    }
}

/// Rotation about `axis` by `deg` degrees.
pub fn rotation(axis: Vec3, deg: f64) -> Mat3 {
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), deg.to_radians()).into_inner()
}

/// One asymmetric-unit molecule: a template rotated by `rotation` and
/// centred at fractional position `center`.
#[derive(Debug, Clone)]
pub struct Placement {
    pub template: MoleculeTemplate,
    pub rotation: Mat3,
    pub center: Vec3,
}

impl Placement {
    pub fn new(template: MoleculeTemplate, rotation: Mat3, center: Vec3) -> Self {
        Placement {
            template,
            rotation,
            center,
        }
    }

    /// Unwrapped fractional coordinates of the placed atoms.
    pub fn fracs(&self, lattice: &Lattice) -> Vec<Vec3> {
        let origin = lattice.frac_to_cart(&self.center);
        self.template
            .coords
            .iter()
            .map(|x| lattice.cart_to_frac(&(self.rotation * x + origin)))
            .collect()
    }
}

fn asu_parts(lattice: &Lattice, placements: &[Placement]) -> Result<(Vec<AtomSite>, Vec<MolecularGraph>)> {
    let mut sites = Vec::new();
    let mut mols = Vec::new();
    for p in placements {
        let base = sites.len();
        for (z, u) in p.template.species.iter().zip(p.fracs(lattice)) {
            sites.push(AtomSite::new(*z, wrap_to_cell(&u))?);
        }
        mols.push(MolecularGraph {
            atoms: (base..base + p.template.species.len()).collect(),
            bonds: p
                .template
                .bonds
                .iter()
                .map(|&(a, b, o)| Bond::new(base + a, base + b, o))
                .collect(),
            entity: p.template.entity.clone(),
        });
    }
    Ok((sites, mols))
}

/// Expands the placed asymmetric unit under `ops` (Jones-faithful
/// strings; the identity is added when missing).
pub fn molecular_crystal(lattice: Lattice, ops: &[&str], placements: &[Placement]) -> Result<Crystal> {
    let mut parsed: Vec<AffineSymOp> = ops.iter().map(|s| parse_symop(s)).collect::<Result<_>>()?;
    if !parsed.iter().any(AffineSymOp::is_identity) {
        parsed.insert(0, AffineSymOp::identity());
    }
    let (sites, mols) = asu_parts(&lattice, placements)?;
    expand_asymmetric_unit(&sites, &mols, &parsed, &lattice)
}

/// Benzene in P2_1 with two molecules per cell.
pub fn benzene_p21() -> Result<Crystal> {
    let lattice = Lattice::from_parameters(7.6, 9.4, 7.2, 90.0, 104.0, 90.0)?;
    let r = rotation(Vec3::new(1.0, 0.3, 0.2), 50.0) * rotation(Vec3::z(), 12.0);
    molecular_crystal(
        lattice,
        &["x,y,z", "-x,y+1/2,-z"],
        &[Placement::new(benzene(), r, Vec3::new(0.25, 0.2, 0.3))],
    )
}

/// The same motif packed tighter (C...C contacts near 3.9 A), so the first
/// shell at the default 4.5 A cut is populated.
pub fn benzene_p21_dense() -> Result<Crystal> {
    let lattice = Lattice::from_parameters(6.688, 8.272, 6.336, 90.0, 104.0, 90.0)?;
    let r = rotation(Vec3::new(1.0, 0.3, 0.2), 50.0) * rotation(Vec3::z(), 12.0);
    molecular_crystal(
        lattice,
        &["x,y,z", "-x,y+1/2,-z"],
        &[Placement::new(benzene(), r, Vec3::new(0.25, 0.2, 0.3))],
    )
}

/// Benzene centred on a cell face so its atoms wrap across the boundary.
pub fn benzene_straddling() -> Result<Crystal> {
    let lattice = Lattice::from_parameters(7.0, 7.5, 8.0, 90.0, 95.0, 90.0)?;
    molecular_crystal(
        lattice,
        &["x,y,z"],
        &[Placement::new(benzene(), rotation(Vec3::y(), 35.0), Vec3::new(0.0, 0.5, 0.5))],
    )
}

/// Two carbon monoxides and one benzene per cell (2:1 by molecule count).
pub fn co_benzene_cocrystal() -> Result<Crystal> {
    let lattice = Lattice::from_parameters(9.0, 9.0, 7.0, 90.0, 95.0, 90.0)?;
    molecular_crystal(
        lattice,
        &["x,y,z"],
        &[
            Placement::new(carbon_monoxide(), rotation(Vec3::z(), 30.0), Vec3::new(0.75, 0.25, 0.75)),
            Placement::new(carbon_monoxide(), rotation(Vec3::y(), 60.0), Vec3::new(0.25, 0.75, 0.75)),
            Placement::new(benzene(), rotation(Vec3::x(), 20.0), Vec3::new(0.25, 0.25, 0.25)),
        ],
    )
}

/// Parallel eight-carbon chains, elongated along a.
pub fn chain_crystal() -> Result<Crystal> {
    let lattice = Lattice::from_parameters(13.0, 4.6, 4.8, 90.0, 90.0, 90.0)?;
    molecular_crystal(
        lattice,
        &["x,y,z"],
        &[Placement::new(carbon_chain(8), Mat3::identity(), Vec3::new(0.5, 0.5, 0.5))],
    )
}

/// Minimal CIF text for an asymmetric unit given as placements, with
/// labels `<symbol><n>` and optional explicit bonds.
pub fn to_cif(name: &str, lattice: &Lattice, ops: &[&str], placements: &[Placement], with_bonds: bool) -> String {
    let [a, b, c, al, be, ga] = lattice.parameters();
    let mut out = format!(
        "data_{name}\n_cell_length_a {a:.6}\n_cell_length_b {b:.6}\n_cell_length_c {c:.6}\n\
         _cell_angle_alpha {al:.6}\n_cell_angle_beta {be:.6}\n_cell_angle_gamma {ga:.6}\n\
         _refine_ls_R_factor_gt 0.041\nloop_\n_symmetry_equiv_pos_as_xyz\n"
    );
    for op in ops {
        out.push_str(&format!("'{op}'\n"));
    }
    out.push_str("loop_\n_atom_site_label\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n");
    let mut labels = Vec::new();
    let mut n = 0;
    for p in placements {
        let mut local = Vec::new();
        for (z, u) in p.template.species.iter().zip(p.fracs(lattice)) {
            n += 1;
            let label = format!("{}{n}", symbol(*z));
            let w = wrap_to_cell(&u);
            out.push_str(&format!("{label} {} {:.7} {:.7} {:.7}\n", symbol(*z), w.x, w.y, w.z));
            local.push(label);
        }
        labels.push(local);
    }
    if with_bonds {
        out.push_str("loop_\n_geom_bond_atom_site_label_1\n_geom_bond_atom_site_label_2\n_ccdc_geom_bond_type\n");
        for (p, local) in placements.iter().zip(&labels) {
            for &(i, j, o) in &p.template.bonds {
                let code = match o {
                    2 => "D",
                    3 => "T",
                    4 => "A",
                    _ => "S",
                };
                out.push_str(&format!("{} {} {code}\n", local[i], local[j]));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(benzene_p21().unwrap().molecules.len(), 2);
        assert_eq!(benzene_straddling().unwrap().molecules.len(), 1);
        let co = co_benzene_cocrystal().unwrap();
        let ents: Vec<&str> = co.asu.iter().map(|&k| co.molecules[k].entity.as_str()).collect();
        assert_eq!(ents, ["CO", "CO", "C6H6"]);
        assert_eq!(chain_crystal().unwrap().heavy_atom_count(), 8);
    }

    #[test]
    fn butane_torsion() {
        for t in [60.0, 180.0, -75.0] {
            let m = butane(t);
            let [a, b, c, d] = [m.coords[0], m.coords[1], m.coords[2], m.coords[3]];
            let (b1, b2, b3) = (b - a, c - b, d - c);
            let n1 = b1.cross(&b2);
            let n2 = b2.cross(&b3);
            let y = n1.cross(&n2).dot(&b2.normalize());
            let got = y.atan2(n1.dot(&n2)).to_degrees();
            assert!((got - t).abs() < 1e-9 || (got - t).abs() > 359.999, "{got} vs {t}");
            assert!(((c - b).norm() - 1.53).abs() < 1e-12 && ((d - c).norm() - 1.53).abs() < 1e-12);
        }
    }
}
