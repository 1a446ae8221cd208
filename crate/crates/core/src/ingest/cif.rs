//! Reader for the CIF subset needed for geometry: cell parameters, the
//! atom-site loop, the symmetry-operator loop, the bond loop and the
//! refinement R-factor. Only the first data block is read.

use std::collections::HashMap;

use crate::crystal::{AtomSite, Bond, Crystal};
use crate::elements::atomic_number;
use crate::error::{Error, Result};
use crate::ingest::expand::{expand_sites, DEDUP_TOL};
use crate::ingest::perceive::perceive_components;
use crate::ingest::CrystalRecord;
use crate::lattice::{Lattice, Vec3};
use crate::symop::{parse_symop, AffineSymOp};

#[derive(Debug, Clone, PartialEq)]
struct Token {
    text: String,
    quoted: bool,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate();
    while let Some((lineno, line)) = lines.next() {
        if let Some(first) = line.strip_prefix(';') {
            let mut field = first.to_string();
            let mut closed = false;
            for (_, next) in lines.by_ref() {
                if next.starts_with(';') {
                    closed = true;
                    break;
                }
                field.push('\n');
                field.push_str(next);
            }
            if !closed {
                return Err(Error::Cif(format!("unterminated text field starting on line {}", lineno + 1)));
            }
            out.push(Token {
                text: field,
                quoted: true,
            });
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c == '#' {
                break;
            } else if c == '\'' || c == '"' {
                // a quote only closes when followed by whitespace or end of line
                let mut j = i + 1;
                while j < chars.len() && !(chars[j] == c && chars.get(j + 1).is_none_or(|n| n.is_whitespace())) {
                    j += 1;
                }
                if j >= chars.len() {
                    return Err(Error::Cif(format!("unterminated quote on line {}", lineno + 1)));
                }
                out.push(Token {
                    text: chars[i + 1..j].iter().collect(),
                    quoted: true,
                });
                i = j + 1;
            } else {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                out.push(Token {
                    text: chars[start..i].iter().collect(),
                    quoted: false,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Default)]
struct DataBlock {
    name: String,
    items: HashMap<String, String>,
    loops: Vec<Loop>,
}

#[derive(Debug)]
struct Loop {
    tags: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Loop {
    fn column(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }
}

impl DataBlock {
    fn find_loop(&self, tag: &str) -> Option<&Loop> {
        self.loops.iter().find(|l| l.column(tag).is_some())
    }
}

fn is_reserved(t: &Token) -> bool {
    if t.quoted {
        return false;
    }
    let lower = t.text.to_ascii_lowercase();
    lower.starts_with('_') || lower == "loop_" || lower.starts_with("data_") || lower.starts_with("save_")
}

fn parse_block(tokens: &[Token]) -> Result<DataBlock> {
    let mut block = DataBlock::default();
    let mut seen_data = false;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        let lower = t.text.to_ascii_lowercase();
        if !t.quoted && lower.starts_with("data_") {
            if seen_data {
                break;
            }
            seen_data = true;
            block.name = t.text[5..].to_string();
            i += 1;
        } else if !t.quoted && lower == "loop_" {
            i += 1;
            let mut tags = Vec::new();
            while i < tokens.len() && !tokens[i].quoted && tokens[i].text.starts_with('_') {
                tags.push(tokens[i].text.to_ascii_lowercase());
                i += 1;
            }
            let mut values = Vec::new();
            while i < tokens.len() && !is_reserved(&tokens[i]) {
                values.push(tokens[i].text.clone());
                i += 1;
            }
            if tags.is_empty() {
                return Err(Error::Cif("loop_ without tags".into()));
            }
            if values.len() % tags.len() != 0 {
                return Err(Error::Cif(format!(
                    "loop starting with {} has {} values for {} columns",
                    tags[0],
                    values.len(),
                    tags.len()
                )));
            }
            let rows = values.chunks(tags.len()).map(<[String]>::to_vec).collect();
            block.loops.push(Loop { tags, rows });
        } else if !t.quoted && t.text.starts_with('_') {
            let value = tokens
                .get(i + 1)
                .filter(|v| !is_reserved(v))
                .ok_or_else(|| Error::Cif(format!("tag {} has no value", t.text)))?;
            block.items.insert(lower, value.text.clone());
            i += 2;
        } else {
            i += 1;
        }
    }
    Ok(block)
}

/// Numeric CIF value with any standard uncertainty `(n)` removed; `?` and
/// `.` are missing values.
fn number(text: &str) -> Option<f64> {
    let t = text.trim();
    if t == "?" || t == "." {
        return None;
    }
    let t = t.split('(').next().unwrap_or(t);
    t.parse().ok()
}

fn required(block: &DataBlock, tag: &str) -> Result<f64> {
    let raw = block
        .items
        .get(tag)
        .ok_or_else(|| Error::Cif(format!("missing {tag}")))?;
    number(raw).ok_or_else(|| Error::Cif(format!("{tag} has non-numeric value '{raw}'")))
}

fn bond_order(code: &str) -> u8 {
    match code.trim().to_ascii_uppercase().as_str() {
        "D" | "2" => 2,
        "T" | "3" => 3,
        // aromatic bonds are kept distinct from single/double
        "A" => 4,
        _ => 1,
    }
}

/// Parses a site-symmetry code `n_klm` (operator n, translation k-5, l-5,
/// m-5); `.` is the identity.
fn site_symmetry(code: &str, ops: &[AffineSymOp]) -> Result<(AffineSymOp, Vec3)> {
    let code = code.trim();
    if code == "." || code == "?" || code.is_empty() {
        return Ok((AffineSymOp::identity(), Vec3::zeros()));
    }
    let bad = || Error::Cif(format!("bad site symmetry code '{code}'"));
    let (n, shift) = match code.split_once('_') {
        Some((n, t)) => (n, Some(t)),
        None => (code, None),
    };
    let n: usize = n.parse().map_err(|_| bad())?;
    let op = *ops.get(n.wrapping_sub(1)).ok_or_else(bad)?;
    let t = match shift {
        Some(t) if t.len() == 3 && t.chars().all(|c| c.is_ascii_digit()) => {
            let d: Vec<f64> = t.chars().map(|c| c.to_digit(10).unwrap() as f64 - 5.0).collect();
            Vec3::new(d[0], d[1], d[2])
        }
        Some(_) => return Err(bad()),
        None => Vec3::zeros(),
    };
    Ok((op, t))
}

struct AsuAtom {
    label: String,
    z: u8,
    frac: Vec3,
    occupancy: f64,
}

fn atom_sites(block: &DataBlock) -> Result<Vec<AsuAtom>> {
    let Some(lp) = block.find_loop("_atom_site_fract_x") else {
        return Ok(Vec::new());
    };
    let col = |t: &str| lp.column(t);
    let (cx, cy, cz) = match (col("_atom_site_fract_x"), col("_atom_site_fract_y"), col("_atom_site_fract_z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::Cif("atom-site loop lacks fractional coordinates".into())),
    };
    let c_label = col("_atom_site_label");
    let c_type = col("_atom_site_type_symbol");
    let c_occ = col("_atom_site_occupancy");
    let mut atoms: Vec<AsuAtom> = Vec::new();
    let mut by_label: HashMap<String, usize> = HashMap::new();
    for (r, row) in lp.rows.iter().enumerate() {
        let label = c_label.map(|c| row[c].clone()).unwrap_or_else(|| format!("_{r}"));
        let element = c_type.map(|c| row[c].as_str()).unwrap_or(label.as_str());
        let z = atomic_number(element)?;
        let (Some(x), Some(y), Some(zc)) = (number(&row[cx]), number(&row[cy]), number(&row[cz])) else {
            // sites without coordinates carry no geometry
            continue;
        };
        let occupancy = c_occ.and_then(|c| number(&row[c])).unwrap_or(1.0);
        let atom = AsuAtom {
            label: label.clone(),
            z,
            frac: Vec3::new(x, y, zc),
            occupancy,
        };
        match by_label.get(&label) {
            Some(&k) => {
                if occupancy > atoms[k].occupancy {
                    atoms[k] = atom;
                }
            }
            None => {
                by_label.insert(label, atoms.len());
                atoms.push(atom);
            }
        }
    }
    Ok(atoms)
}

fn symops(block: &DataBlock) -> Result<Vec<AffineSymOp>> {
    for tag in ["_symmetry_equiv_pos_as_xyz", "_space_group_symop_operation_xyz"] {
        if let Some(lp) = block.find_loop(tag) {
            let c = lp.column(tag).unwrap();
            return lp.rows.iter().map(|row| parse_symop(&row[c])).collect();
        }
        if let Some(v) = block.items.get(tag) {
            return Ok(vec![parse_symop(v)?]);
        }
    }
    Ok(vec![AffineSymOp::identity()])
}

fn r_factor(block: &DataBlock) -> Option<f64> {
    let raw = ["_refine_ls_r_factor_gt", "_refine_ls_r_factor_all"]
        .iter()
        .find_map(|t| block.items.get(*t).and_then(|v| number(v)))?;
    // stored as a fraction in CIF; values above 1 are already percentages
    Some(if raw <= 1.0 { raw * 100.0 } else { raw })
}

/// Bonds as pairs of fractional positions (first endpoint in the ASU,
/// second possibly a symmetry image).
fn bond_endpoints(
    block: &DataBlock,
    atoms: &[AsuAtom],
    ops: &[AffineSymOp],
) -> Result<Option<Vec<(Vec3, Vec3, u8)>>> {
    let Some(lp) = block.find_loop("_geom_bond_atom_site_label_1") else {
        return Ok(None);
    };
    let c1 = lp.column("_geom_bond_atom_site_label_1").unwrap();
    let c2 = lp
        .column("_geom_bond_atom_site_label_2")
        .ok_or_else(|| Error::Cif("bond loop lacks _geom_bond_atom_site_label_2".into()))?;
    let c_sym1 = lp.column("_geom_bond_site_symmetry_1");
    let c_sym2 = lp.column("_geom_bond_site_symmetry_2");
    let c_type = lp.column("_ccdc_geom_bond_type");
    let find = |label: &str| {
        atoms
            .iter()
            .find(|a| a.label == label)
            .ok_or_else(|| Error::Cif(format!("bond references unknown atom label '{label}'")))
    };
    let mut out = Vec::with_capacity(lp.rows.len());
    for row in &lp.rows {
        let (a, b) = (find(&row[c1])?, find(&row[c2])?);
        let (op1, t1) = site_symmetry(c_sym1.map_or(".", |c| row[c].as_str()), ops)?;
        let (op2, t2) = site_symmetry(c_sym2.map_or(".", |c| row[c].as_str()), ops)?;
        let order = c_type.map_or(1, |c| bond_order(&row[c]));
        out.push((op1.apply_unwrapped(&a.frac) + t1, op2.apply_unwrapped(&b.frac) + t2, order));
    }
    Ok(Some(out))
}

fn site_at(lattice: &Lattice, carts: &[Vec3], frac: &Vec3) -> Option<usize> {
    let x = lattice.frac_to_cart(frac);
    carts
        .iter()
        .position(|c| lattice.min_image_distance(c, &x) < 10.0 * DEDUP_TOL)
}

/// Parses one CIF document into an expanded, perceived crystal.
///
/// The asymmetric unit is expanded site by site (images on special
/// positions merge), bonds from the bond loop are propagated to every
/// image, and molecules are the connected components over the full cell.
/// Without a bond loop, bonds are inferred from covalent radii. The
/// asymmetric-unit molecules are those holding identity-image atoms.
pub fn parse_cif(text: &str) -> Result<CrystalRecord> {
    let block = parse_block(&tokenize(text)?)?;
    let lattice = Lattice::from_parameters(
        required(&block, "_cell_length_a")?,
        required(&block, "_cell_length_b")?,
        required(&block, "_cell_length_c")?,
        required(&block, "_cell_angle_alpha")?,
        required(&block, "_cell_angle_beta")?,
        required(&block, "_cell_angle_gamma")?,
    )?;
    let ops = symops(&block)?;
    let atoms = atom_sites(&block)?;
    let bonds = bond_endpoints(&block, &atoms, &ops)?;
    let asu_sites = atoms
        .iter()
        .map(|a| AtomSite::new(a.z, a.frac))
        .collect::<Result<Vec<_>>>()?;

    let expanded = expand_sites(&asu_sites, &ops, &lattice)?;
    let carts: Vec<Vec3> = expanded.sites.iter().map(|s| lattice.frac_to_cart(&s.frac)).collect();
    let explicit: Option<Vec<Bond>> = bonds.map(|list| {
        let mut out = Vec::new();
        let mut all_ops = vec![AffineSymOp::identity()];
        all_ops.extend(ops.iter().filter(|o| !o.is_identity()));
        for (p, q, order) in &list {
            for op in &all_ops {
                let a = site_at(&lattice, &carts, &op.apply(p));
                let b = site_at(&lattice, &carts, &op.apply(q));
                if let (Some(a), Some(b)) = (a, b) {
                    if a != b {
                        out.push(Bond::new(a, b, *order));
                    }
                }
            }
        }
        out
    });
    let perception = perceive_components(&lattice, &expanded.sites, explicit.as_deref())?;

    let mut owner = vec![0usize; expanded.sites.len()];
    for (k, m) in perception.molecules.iter().enumerate() {
        for &a in &m.atoms {
            owner[a] = k;
        }
    }
    let mut asu: Vec<usize> = expanded.image_of.first().map_or(Vec::new(), |row| row.iter().map(|&a| owner[a]).collect());
    asu.sort_unstable();
    asu.dedup();
    let polymeric = perception.any_polymeric();
    let r_factor = r_factor(&block);
    let crystal = Crystal::new(lattice, expanded.sites, perception.molecules, asu)?;
    Ok(CrystalRecord {
        crystal,
        provenance: block.name,
        r_factor,
        raw_symops: ops,
        polymeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "data_one
_cell_length_a 10
_cell_length_b 10
_cell_length_c 10.0(2)
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
loop_
_atom_site_label
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
C1 C 0.1 0.2 0.3
";

    #[test]
    fn minimal_file() {
        let r = parse_cif(MINIMAL).unwrap();
        assert_eq!(r.provenance, "one");
        assert_eq!(r.crystal.sites.len(), 1);
        assert_eq!(r.crystal.molecules.len(), 1);
        assert!((r.crystal.lattice.matrix() - crate::lattice::Mat3::identity() * 10.0).abs().max() < 1e-10);
        assert_eq!(r.raw_symops, vec![AffineSymOp::identity()]);
        assert!(r.r_factor.is_none());
    }

    #[test]
    fn missing_cell_is_an_error() {
        let text = MINIMAL.replace("_cell_length_b 10\n", "");
        let err = parse_cif(&text).unwrap_err();
        assert!(err.to_string().contains("_cell_length_b"), "{err}");
    }

    #[test]
    fn tokenizer_handles_quotes_and_comments() {
        let toks = tokenize("_a 'x, y, z' # note\n_b \"it's\"\n;\nmulti\nline\n;\n").unwrap();
        let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["_a", "x, y, z", "_b", "it's", "\nmulti\nline"]);
    }

    #[test]
    fn uncertainty_is_stripped() {
        assert_eq!(number("1.2345(6)"), Some(1.2345));
        assert_eq!(number("?"), None);
    }

    #[test]
    fn site_symmetry_codes() {
        let ops = vec![AffineSymOp::identity(), parse_symop("-x,-y,-z").unwrap()];
        let (op, t) = site_symmetry("2_655", &ops).unwrap();
        assert_eq!(op, ops[1]);
        assert_eq!(t, Vec3::new(1.0, 0.0, 0.0));
        assert!(site_symmetry("3_555", &ops).is_err());
    }
}
