//! Packing similarity: superposing a predicted block onto a reference
//! molecular cluster molecule by molecule.
//!
//! An open approximation of cluster comparison. Every same-entity
//! (reference, prediction) pair is tried as an anchor. From the anchor
//! superposition the correspondence grows outward, accepting a predicted
//! molecule when its centroid lies within a fraction of the reference
//! molecule's nearest-centroid spacing and its orientation differs by at
//! most an angle threshold; the joint fit is redone after each acceptance.
//! Pairs that fail the tolerances in the final joint frame are dropped, so
//! every reported pair is valid under the reported superposition.

use std::collections::HashMap;

use serde::Serialize;

use crate::align::{kabsch_align_any, RigidMotion};
use crate::block::Block;
use crate::crystal::Crystal;
use crate::error::{Error, Result};
use crate::lattice::{Mat3, Vec3};
use crate::metrics::graph::{isomorphisms, MolGraph};
use crate::metrics::MetricThresholds;
use crate::niggli::niggli_reduce;
use crate::supercell::{build_supercell, SupercellPolicy, SupercellSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingMatch {
    pub n_matched: usize,
    pub cluster_size: usize,
    /// Joint superposition RMSD over the matched molecules' heavy atoms.
    pub rmsd_cluster: f64,
    /// (reference molecule, predicted molecule) pairs.
    pub correspondence: Vec<(usize, usize)>,
}

/// The `size` molecules whose centroids are nearest the first
/// asymmetric-unit molecule in the central cell of a 3x3x3 supercell of
/// the Niggli-reduced crystal (ties by molecule index). The center comes
/// first.
pub fn reference_cluster(crystal: &Crystal, size: usize) -> Result<Block> {
    let reduced = match niggli_reduce(&crystal.lattice) {
        Ok(r) => crystal.with_basis(&r.change_of_basis)?,
        Err(_) => crystal.clone(),
    };
    let spec = SupercellSpec::diagonal(3)?;
    let sc = build_supercell(&reduced, &spec, SupercellPolicy::CentroidInside)?;
    let block = Block::from_crystal(&sc);
    let center = *sc
        .asu
        .first()
        .ok_or_else(|| Error::InvalidCrystal("crystal has no asymmetric unit".into()))?;
    let c = block.molecules[center].centroid();
    let mut order: Vec<(f64, usize)> = block
        .molecules
        .iter()
        .enumerate()
        .map(|(m, mol)| ((mol.centroid() - c).norm(), m))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let chosen: Vec<usize> = order.iter().take(size).map(|&(_, m)| m).collect();
    let mut cluster = block.subset(&chosen);
    cluster.asu = vec![0];
    Ok(cluster)
}

fn rotation_angle_deg(r: &Mat3) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Unit vector from the first to the last atom when every atom lies on
/// that line (a zero vector for single atoms); `None` otherwise.
fn linear_axis(xs: &[Vec3]) -> Option<Vec3> {
    let (Some(a), Some(b)) = (xs.first(), xs.last()) else {
        return Some(Vec3::zeros());
    };
    let d = b - a;
    if d.norm() < 1e-8 {
        return (xs.len() == 1).then(Vec3::zeros);
    }
    let u = d.normalize();
    xs.iter().all(|x| (x - a).cross(&u).norm() < 1e-6).then_some(u)
}

struct Prepared {
    gt_coords: Vec<Vec<Vec3>>,
    gt_centroids: Vec<Vec3>,
    spacing: Vec<f64>,
    pred_coords: Vec<Vec<Vec3>>,
    pred_centroids: Vec<Vec3>,
    /// Atom mappings (pred atom -> gt atom) per entity, indexed through
    /// `maps_of` for every gt molecule.
    mapping_sets: Vec<Vec<Vec<usize>>>,
    maps_of: Vec<Option<usize>>,
    /// compat[g][p]: same entity with known mappings.
    compat: Vec<Vec<bool>>,
}

fn in_gt_order(coords: &[Vec3], mapping: &[usize]) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros(); coords.len()];
    for (i, &j) in mapping.iter().enumerate() {
        out[j] = coords[i];
    }
    out
}

fn prepare(pred: &Block, gt: &Block, budget: usize) -> Result<Prepared> {
    let gt_coords: Vec<Vec<Vec3>> = gt.molecules.iter().map(|m| m.heavy_coords()).collect();
    let gt_centroids: Vec<Vec3> = gt.molecules.iter().map(|m| m.centroid()).collect();
    let spacing = (0..gt_centroids.len())
        .map(|i| {
            (0..gt_centroids.len())
                .filter(|&j| j != i)
                .map(|j| (gt_centroids[i] - gt_centroids[j]).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut mappings = HashMap::new();
    for g in &gt.molecules {
        if mappings.contains_key(&g.entity) {
            continue;
        }
        let Some(p) = pred.molecules.iter().find(|p| p.entity == g.entity) else {
            continue;
        };
        let iso = isomorphisms(&MolGraph::heavy(p, Some(g)), &MolGraph::heavy(g, None), budget);
        let maps = if iso.truncated || iso.mappings.is_empty() {
            if p.tokens() == g.tokens() && p.without_hydrogens().species == g.without_hydrogens().species {
                if iso.truncated {
                    log::warn!("automorphism budget exceeded for {}; using atom order", g.entity);
                }
                vec![(0..g.tokens()).collect()]
            } else {
                continue;
            }
        } else {
            iso.mappings
        };
        mappings.insert(g.entity.clone(), maps);
    }
    if mappings.is_empty() {
        return Err(Error::NoCompatibleMolecule);
    }
    let mut names: Vec<&String> = mappings.keys().collect();
    names.sort();
    let maps_of: Vec<Option<usize>> = gt
        .molecules
        .iter()
        .map(|g| names.iter().position(|n| **n == g.entity))
        .collect();
    let compat = gt
        .molecules
        .iter()
        .zip(&maps_of)
        .map(|(g, m)| pred.molecules.iter().map(|p| m.is_some() && p.entity == g.entity).collect())
        .collect();
    let mapping_sets = names.iter().map(|n| mappings[*n].clone()).collect();
    Ok(Prepared {
        gt_coords,
        gt_centroids,
        spacing,
        pred_coords: pred.molecules.iter().map(|m| m.heavy_coords()).collect(),
        pred_centroids: pred.molecules.iter().map(|m| m.centroid()).collect(),
        mapping_sets,
        maps_of,
        compat,
    })
}

impl Prepared {
    fn maps(&self, g: usize) -> &[Vec<usize>] {
        self.maps_of[g].map_or(&[], |i| self.mapping_sets[i].as_slice())
    }

    fn compatible(&self, g: usize, p: usize) -> bool {
        self.compat[g][p]
    }

    fn tolerance(&self, g: usize, t: &MetricThresholds) -> f64 {
        t.distance_fraction * self.spacing[g]
    }

    /// Raw coordinates of pred molecule `p` in the atom order of gt
    /// molecule `g` that, once moved by `motion`, lies closest to it.
    fn raw_ordered(&self, g: usize, p: usize, motion: &RigidMotion) -> Vec<Vec3> {
        let raw = &self.pred_coords[p];
        let mut best = (f64::INFINITY, 0);
        for (k, m) in self.maps(g).iter().enumerate() {
            let dev: f64 = m
                .iter()
                .enumerate()
                .map(|(i, &j)| (motion.apply(&raw[i]) - self.gt_coords[g][j]).norm_squared())
                .sum();
            if dev < best.0 {
                best = (dev, k);
            }
        }
        match self.maps(g).get(best.1) {
            Some(m) => in_gt_order(raw, m),
            None => raw.clone(),
        }
    }

    /// Rotation (degrees) superposing moved `p` onto `g` under the atom
    /// mapping closest in the frame, so symmetric molecules are not
    /// penalised for a relabelling.
    fn orientation(&self, g: usize, p: usize, motion: &RigidMotion) -> f64 {
        let moved = motion.apply_all(&self.raw_ordered(g, p, motion));
        let gt = &self.gt_coords[g];
        if let Some(axis) = linear_axis(gt) {
            // any spin about the axis superposes a linear molecule
            return match moved.len() {
                0 | 1 => 0.0,
                n => (moved[n - 1] - moved[0]).normalize().dot(&axis).clamp(-1.0, 1.0).acos().to_degrees(),
            };
        }
        kabsch_align_any(&moved, gt).map_or(180.0, |a| rotation_angle_deg(&a.motion.rotation))
    }

    fn accepts(&self, g: usize, p: usize, motion: &RigidMotion, t: &MetricThresholds) -> bool {
        let d = (motion.apply(&self.pred_centroids[p]) - self.gt_centroids[g]).norm();
        d <= self.tolerance(g, t) && self.orientation(g, p, motion) <= t.angle_deg
    }

    /// Joint superposition of the matched pred molecules onto the
    /// reference, atom mappings chosen in `frame` and then once more in the
    /// fitted frame.
    fn joint(&self, matched: &[(usize, usize)], frame: &RigidMotion) -> Option<(RigidMotion, f64)> {
        let ys: Vec<Vec3> = matched.iter().flat_map(|&(g, _)| self.gt_coords[g].iter().copied()).collect();
        let fit = |frame: &RigidMotion| {
            let xs: Vec<Vec3> = matched.iter().flat_map(|&(g, p)| self.raw_ordered(g, p, frame)).collect();
            kabsch_align_any(&xs, &ys).ok().map(|a| (a.motion, a.rmsd))
        };
        let (m1, _) = fit(frame)?;
        fit(&m1)
    }

    /// Number of reference molecules with a compatible pred centroid
    /// within tolerance under `frame`; a cheap score for anchor frames.
    fn centroid_score(&self, frame: &RigidMotion, t: &MetricThresholds) -> usize {
        let moved: Vec<Vec3> = self.pred_centroids.iter().map(|c| frame.apply(c)).collect();
        (0..self.gt_centroids.len())
            .filter(|&g| {
                (0..moved.len()).any(|p| self.compatible(g, p) && (moved[p] - self.gt_centroids[g]).norm() <= self.tolerance(g, t))
            })
            .count()
    }

    /// Anchor frame for (g, p): among the superpositions given by every
    /// atom mapping, the one that brings the most centroids into place.
    fn anchor_frame(&self, g: usize, p: usize, t: &MetricThresholds) -> Option<RigidMotion> {
        let mut best: Option<(usize, f64, RigidMotion)> = None;
        for m in self.maps(g) {
            let Ok(a) = kabsch_align_any(&in_gt_order(&self.pred_coords[p], m), &self.gt_coords[g]) else {
                continue;
            };
            let score = self.centroid_score(&a.motion, t);
            let better = best
                .as_ref()
                .is_none_or(|(s, r, _)| score > *s || (score == *s && a.rmsd < *r - 1e-12));
            if better {
                best = Some((score, a.rmsd, a.motion));
            }
        }
        best.map(|b| b.2)
    }

    /// Greedy growth outward from the anchor; the joint superposition is
    /// refitted after every accepted molecule.
    fn extend(&self, anchor: (usize, usize), start: &RigidMotion, t: &MetricThresholds) -> (Vec<(usize, usize)>, RigidMotion) {
        let (g0, p0) = anchor;
        let mut matched = vec![anchor];
        let mut motion = *start;
        // atom orders are fixed when a pair is accepted
        let mut xs = self.raw_ordered(g0, p0, &motion);
        let mut ys = self.gt_coords[g0].clone();
        let mut used = vec![false; self.pred_coords.len()];
        used[p0] = true;
        let mut order: Vec<usize> = (0..self.gt_coords.len()).filter(|&g| g != g0).collect();
        order.sort_by(|&a, &b| {
            let da = (self.gt_centroids[a] - self.gt_centroids[g0]).norm();
            let db = (self.gt_centroids[b] - self.gt_centroids[g0]).norm();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        for g in order {
            let mut candidates: Vec<(f64, usize)> = (0..self.pred_coords.len())
                .filter(|&p| !used[p] && self.compatible(g, p))
                .map(|p| ((motion.apply(&self.pred_centroids[p]) - self.gt_centroids[g]).norm(), p))
                .filter(|&(d, _)| d <= self.tolerance(g, t))
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some(&(_, p)) = candidates.iter().find(|&&(_, p)| self.orientation(g, p, &motion) <= t.angle_deg) {
                matched.push((g, p));
                used[p] = true;
                xs.extend(self.raw_ordered(g, p, &motion));
                ys.extend(self.gt_coords[g].iter().copied());
                if let Ok(a) = kabsch_align_any(&xs, &ys) {
                    motion = a.motion;
                }
            }
        }
        (matched, motion)
    }

    /// Drops pairs that fail the tolerances in the final joint frame, worst
    /// relative centroid deviation first, until every remaining pair
    /// passes.
    fn prune(
        &self,
        mut matched: Vec<(usize, usize)>,
        mut frame: RigidMotion,
        t: &MetricThresholds,
    ) -> Option<(Vec<(usize, usize)>, f64)> {
        loop {
            let (motion, rmsd) = self.joint(&matched, &frame)?;
            let deviation = |&(g, p): &(usize, usize)| {
                (motion.apply(&self.pred_centroids[p]) - self.gt_centroids[g]).norm() / self.spacing[g]
            };
            let worst = matched
                .iter()
                .enumerate()
                .filter(|(_, &(g, p))| !self.accepts(g, p, &motion, t))
                .max_by(|(_, a), (_, b)| deviation(a).total_cmp(&deviation(b)))
                .map(|(i, _)| i);
            match worst {
                None => {
                    matched.sort_unstable();
                    return Some((matched, rmsd));
                }
                Some(_) if matched.len() == 1 => return None,
                Some(i) => {
                    matched.remove(i);
                    frame = motion;
                }
            }
        }
    }
}

fn better(a: &PackingMatch, b: &PackingMatch) -> bool {
    a.n_matched > b.n_matched || (a.n_matched == b.n_matched && a.rmsd_cluster < b.rmsd_cluster - 1e-12)
}

/// Best molecule correspondence between `pred` and the reference
/// `cluster`.
pub fn match_packing(pred: &Block, cluster: &Block, t: &MetricThresholds) -> Result<PackingMatch> {
    let prep = prepare(pred, cluster, t.automorphism_budget)?;
    let mut best: Option<PackingMatch> = None;
    let mut seen = std::collections::HashSet::new();
    for g in 0..cluster.len() {
        for p in 0..pred.len() {
            // an anchor already inside the best correspondence grows back into it
            if !prep.compatible(g, p) || best.as_ref().is_some_and(|b| b.correspondence.contains(&(g, p))) {
                continue;
            }
            let Some(frame) = prep.anchor_frame(g, p, t) else {
                continue;
            };
            let (first, refined) = prep.extend((g, p), &frame, t);
            // one more greedy pass from the refined frame
            let (second, refined2) = prep.extend((g, p), &refined, t);
            let (grown, frame) = if second.len() > first.len() { (second, refined2) } else { (first, refined) };
            let mut key = grown.clone();
            key.sort_unstable();
            if !seen.insert(key) {
                continue;
            }
            let Some((matched, rmsd)) = prep.prune(grown, frame, t) else {
                continue;
            };
            let candidate = PackingMatch {
                n_matched: matched.len(),
                cluster_size: cluster.len(),
                rmsd_cluster: rmsd,
                correspondence: matched,
            };
            if best.as_ref().is_none_or(|b| better(&candidate, b)) {
                best = Some(candidate);
            }
        }
    }
    best.ok_or(Error::NoCompatibleMolecule)
}
