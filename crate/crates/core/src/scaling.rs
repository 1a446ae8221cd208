//! Boundary-loss scaling on synthetic lattices.
//!
//! A crop cut out of an infinite structure loses the interactions that
//! cross its boundary. With a local unit loss (1 per heavy-atom contact
//! within `r0`) the boundary loss per token of a compact crop should fall
//! off like `T^(-1/3)`. This module builds the test lattices, measures the
//! ratio on crops and fits the exponent on a log-log scale.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::crop::{
    centroid_radius_crop, choose_center, contact_boundary, distance_row, knn_crop, s4_crop_at, shell_decompose, Crop,
    CropMethod, CropParams,
};
use crate::crystal::{AtomSite, Bond, Crystal, MolecularGraph};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Vec3};
use crate::supercell::{build_supercell, SupercellPolicy, SupercellSpec};

/// Carbon-carbon spacing inside the linear test molecules (A).
const CHAIN_BOND: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    #[default]
    SimpleCubic,
    Fcc,
    /// Rock-salt arrangement of two molecule types.
    TwoComponentCubic,
}

impl LatticeKind {
    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::SimpleCubic => "simple_cubic",
            LatticeKind::Fcc => "fcc",
            LatticeKind::TwoComponentCubic => "two_component_cubic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticLatticeSpec {
    pub kind: LatticeKind,
    /// Nearest-neighbour distance between molecule centres (A).
    pub spacing: f64,
    /// Supercell multiplier along each axis of the conventional cell.
    pub extent: usize,
    /// Linear carbon chains of this length sit on every lattice point.
    pub atoms_per_molecule: usize,
}

impl Default for SyntheticLatticeSpec {
    fn default() -> Self {
        SyntheticLatticeSpec {
            kind: LatticeKind::SimpleCubic,
            spacing: 4.0,
            extent: 21,
            atoms_per_molecule: 1,
        }
    }
}

impl SyntheticLatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {}", self.spacing)));
        }
        if self.extent < 3 {
            return Err(Error::InvalidParameter(format!("extent must be at least 3, got {}", self.extent)));
        }
        if self.atoms_per_molecule == 0 {
            return Err(Error::InvalidParameter("atoms_per_molecule must be positive".into()));
        }
        let length = (self.atoms_per_molecule - 1) as f64 * CHAIN_BOND;
        if length + 1.0 > self.spacing {
            return Err(Error::InvalidParameter(format!(
                "{} atom chains ({length:.2} A) do not fit at spacing {}",
                self.atoms_per_molecule, self.spacing
            )));
        }
        Ok(())
    }
}

fn unit_cell(spec: &SyntheticLatticeSpec) -> Result<Crystal> {
    let (edge, points, species): (f64, Vec<Vec3>, Vec<(u8, &str)>) = match spec.kind {
        LatticeKind::SimpleCubic => (spec.spacing, vec![Vec3::zeros()], vec![(6, "C")]),
        LatticeKind::Fcc => (
            spec.spacing * std::f64::consts::SQRT_2,
            vec![
                Vec3::zeros(),
                Vec3::new(0.5, 0.5, 0.0),
                Vec3::new(0.5, 0.0, 0.5),
                Vec3::new(0.0, 0.5, 0.5),
            ],
            vec![(6, "C"); 4],
        ),
        LatticeKind::TwoComponentCubic => {
            let mut pts = Vec::new();
            let mut kinds = Vec::new();
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        pts.push(Vec3::new(i as f64, j as f64, k as f64) * 0.5);
                        kinds.push(if (i + j + k) % 2 == 0 { (6, "C") } else { (7, "N") });
                    }
                }
            }
            (spec.spacing * 2.0, pts, kinds)
        }
    };
    let lattice = Lattice::cubic(edge)?;
    let n = spec.atoms_per_molecule;
    let mut sites = Vec::new();
    let mut molecules = Vec::new();
    for (p, (z, element)) in points.iter().zip(&species) {
        let base = sites.len();
        for a in 0..n {
            // chain along x, centred on the lattice point
            let offset = (a as f64 - (n - 1) as f64 / 2.0) * CHAIN_BOND / edge;
            let u = crate::lattice::wrap_to_cell(&(p + Vec3::new(offset, 0.0, 0.0)));
            sites.push(AtomSite::new(*z, u)?);
        }
        let entity = if n == 1 { element.to_string() } else { format!("{element}{n}") };
        molecules.push(MolecularGraph {
            atoms: (base..base + n).collect(),
            bonds: (1..n).map(|a| Bond::new(base + a - 1, base + a, 1)).collect(),
            entity,
        });
    }
    let asu = match spec.kind {
        LatticeKind::TwoComponentCubic => vec![0, 1],
        _ => vec![0],
    };
    Crystal::new(lattice, sites, molecules, asu)
}

/// The synthetic crystal expanded to `extent^3` conventional cells. The
/// asymmetric unit is the copy in the central cell.
pub fn synth_lattice(spec: &SyntheticLatticeSpec) -> Result<Crystal> {
    spec.validate()?;
    let cell = unit_cell(spec)?;
    let sc = SupercellSpec::diagonal(spec.extent as i64)?;
    build_supercell(&cell, &sc, SupercellPolicy::CentroidInside)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub kind: LatticeKind,
    pub spacing: f64,
    pub r_cut: f64,
    pub r0: f64,
    pub seed: u64,
    pub t_target: usize,
    pub tokens: usize,
    pub boundary_edges: usize,
    /// Boundary loss under the unit contact loss (equals the edge count).
    pub boundary_loss: f64,
    pub ratio: f64,
}

/// Boundary edges at contact radius `r0` and their count per crop token.
pub fn boundary_loss_ratio(block: &Block, crop: &Crop, r0: f64) -> Result<(usize, f64)> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter(format!("r0 must be positive, got {r0}")));
    }
    if crop.token_count == 0 {
        return Err(Error::InvalidParameter("crop has no tokens".into()));
    }
    let edges = contact_boundary(block, crop, r0).len();
    Ok((edges, edges as f64 / crop.token_count as f64))
}

/// Every molecule whose heavy-atom distance to `center` is within
/// `radius`, regardless of budget.
pub fn exact_ball_crop(block: &Block, center: usize, radius: f64) -> Crop {
    let row = distance_row(block, center);
    let molecules: Vec<usize> = (0..block.len()).filter(|&m| row[m] <= radius).collect();
    Crop {
        method: CropMethod::CentroidRadius,
        center,
        token_count: molecules.iter().map(|&m| block.molecules[m].tokens()).sum(),
        molecules,
        shell_of: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares of `log ratio` on `log tokens`.
pub fn fit_scaling_exponent(points: &[ScalingPoint]) -> Result<ScalingFit> {
    let mut distinct: Vec<usize> = points.iter().map(|p| p.tokens).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if points.len() < 5 || distinct.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} points with {} distinct token counts; need 5",
            points.len(),
            distinct.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.ratio > 0.0) || p.tokens == 0) {
        return Err(Error::InsufficientData(format!(
            "non-positive ratio {} at {} tokens",
            p.ratio, p.tokens
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.tokens as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ratio.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        n_points: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSweepSpec {
    pub lattice: SyntheticLatticeSpec,
    pub method: CropMethod,
    pub r_cuts: Vec<f64>,
    /// Contact radii; empty means `r0 = r_cut` for every cell.
    pub r0s: Vec<f64>,
    pub token_targets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub p_max: f64,
}

impl Default for ScalingSweepSpec {
    fn default() -> Self {
        ScalingSweepSpec {
            lattice: SyntheticLatticeSpec::default(),
            method: CropMethod::S4,
            r_cuts: vec![4.5],
            r0s: Vec::new(),
            token_targets: vec![30, 60, 120, 240, 480, 960, 1920],
            seeds: (0..32).collect(),
            p_max: 0.8,
        }
    }
}

/// One sweep cell: (r_cut, r0, token target, seed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub r_cut: f64,
    pub r0: f64,
    pub t_target: usize,
    pub seed: u64,
}

impl ScalingSweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if self.r_cuts.is_empty() || self.token_targets.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter("r_cuts, token_targets and seeds must be non-empty".into()));
        }
        if let Some(r) = self.r_cuts.iter().chain(&self.r0s).find(|r| !(**r > 0.0)) {
            return Err(Error::InvalidParameter(format!("radii must be positive, got {r}")));
        }
        if self.token_targets.contains(&0) {
            return Err(Error::InvalidParameter("token targets must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.p_max) {
            return Err(Error::InvalidParameter(format!("p_max must lie in [0, 1], got {}", self.p_max)));
        }
        Ok(())
    }

    /// Cells in output order.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &r_cut in &self.r_cuts {
            let r0s = if self.r0s.is_empty() { vec![r_cut] } else { self.r0s.clone() };
            for r0 in r0s {
                for &t_target in &self.token_targets {
                    for &seed in &self.seeds {
                        cells.push(SweepCell { r_cut, r0, t_target, seed });
                    }
                }
            }
        }
        cells.sort_by(|a, b| {
            a.r_cut
                .total_cmp(&b.r_cut)
                .then(a.r0.total_cmp(&b.r0))
                .then(a.t_target.cmp(&b.t_target))
                .then(a.seed.cmp(&b.seed))
        });
        cells
    }
}

/// Runs every sweep cell on one synthetic block. Rows come back in cell
/// order whatever the thread count.
pub fn run_scaling_sweep(spec: &ScalingSweepSpec) -> Result<Vec<ScalingPoint>> {
    spec.validate()?;
    let block = Block::from_crystal(&synth_lattice(&spec.lattice)?);
    let cells = spec.cells();
    // distance rows depend only on the center
    let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
    for cell in &cells {
        let c = choose_center(&block, cell.seed)?;
        rows.entry(c).or_insert_with(|| distance_row(&block, c));
    }
    cells
        .par_iter()
        .map(|cell| {
            let params = CropParams {
                r_cut: cell.r_cut,
                t_max: cell.t_target,
                p_max: spec.p_max,
                seed: cell.seed,
                ..CropParams::default()
            };
            params.validate()?;
            let center = choose_center(&block, cell.seed)?;
            let row = &rows[&center];
            let crop = match spec.method {
                CropMethod::S4 => s4_crop_at(&block, &shell_decompose(row, center, cell.r_cut), &params)?,
                CropMethod::Knn => knn_crop(&block, center, row, cell.t_target)?,
                CropMethod::CentroidRadius => centroid_radius_crop(&block, center, params.radius, cell.t_target)?,
            };
            let (edges, ratio) = boundary_loss_ratio(&block, &crop, cell.r0)?;
            Ok(ScalingPoint {
                kind: spec.lattice.kind,
                spacing: spec.lattice.spacing,
                r_cut: cell.r_cut,
                r0: cell.r0,
                seed: cell.seed,
                t_target: cell.t_target,
                tokens: crop.token_count,
                boundary_edges: edges,
                boundary_loss: edges as f64,
                ratio,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "kind,spacing,r_cut,r0,seed,tokens,boundary_edges,ratio";

pub fn sweep_csv(points: &[ScalingPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.kind.name(),
            p.spacing,
            p.r_cut,
            p.r0,
            p.seed,
            p.tokens,
            p.boundary_edges,
            p.ratio
        ));
    }
    out
}

/// Exact-ball crops of increasing radius around the central molecule, one
/// point per distinct size: the reference run for the fitted exponent.
pub fn exact_ball_points(spec: &SyntheticLatticeSpec, r0: f64, radii: &[f64]) -> Result<Vec<ScalingPoint>> {
    let block = Block::from_crystal(&synth_lattice(spec)?);
    let center = *block.asu.first().ok_or_else(|| Error::InvalidParameter("empty asymmetric unit".into()))?;
    radii
        .iter()
        .map(|&r| {
            let crop = exact_ball_crop(&block, center, r);
            let (edges, ratio) = boundary_loss_ratio(&block, &crop, r0)?;
            Ok(ScalingPoint {
                kind: spec.kind,
                spacing: spec.spacing,
                r_cut: r,
                r0,
                seed: 0,
                t_target: crop.token_count,
                tokens: crop.token_count,
                boundary_edges: edges,
                boundary_loss: edges as f64,
                ratio,
            })
        })
        .collect()
}

/// Contact degree of every atom of a periodic crystal at radius `r0`
/// (all atoms, intra- and intermolecular), counted over periodic images.
pub fn contact_degrees(crystal: &Crystal, r0: f64) -> Vec<usize> {
    let l = &crystal.lattice;
    let inv = l.matrix().try_inverse().expect("lattice is non-singular");
    // plane spacings bound how many images can fall within r0
    let reach: Vec<i64> = (0..3)
        .map(|i| {
            let h = 1.0 / inv.column(i).norm();
            (r0 / h).ceil() as i64
        })
        .collect();
    let carts: Vec<Vec3> = crystal.sites.iter().map(|s| l.frac_to_cart(&s.frac)).collect();
    (0..carts.len())
        .into_par_iter()
        .map(|i| {
            let mut n = 0;
            for (j, y) in carts.iter().enumerate() {
                for a in -reach[0]..=reach[0] {
                    for b in -reach[1]..=reach[1] {
                        for c in -reach[2]..=reach[2] {
                            if i == j && a == 0 && b == 0 && c == 0 {
                                continue;
                            }
                            let shift = l.frac_to_cart(&Vec3::new(a as f64, b as f64, c as f64));
                            if (y + shift - carts[i]).norm() <= r0 {
                                n += 1;
                            }
                        }
                    }
                }
            }
            n
        })
        .collect()
}

/// `|boundary(B_k)| / |B_k|^(2/3)` for the ball `B_k` of integer points
/// with `|x| <= k` in the unit cubic lattice, the boundary being the
/// nearest-neighbour bonds leaving the ball.
pub fn cubic_ball_surface_ratio(k: i64) -> f64 {
    let inside = |x: i64, y: i64, z: i64| x * x + y * y + z * z <= k * k;
    let (mut volume, mut surface) = (0usize, 0usize);
    for x in -k..=k {
        for y in -k..=k {
            for z in -k..=k {
                if !inside(x, y, z) {
                    continue;
                }
                volume += 1;
                for (dx, dy, dz) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
                    if !inside(x + dx, y + dy, z + dz) {
                        surface += 1;
                    }
                }
            }
        }
    }
    surface as f64 / (volume as f64).powf(2.0 / 3.0)
}
