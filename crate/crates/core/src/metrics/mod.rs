//! Evaluation metrics for predicted molecular blocks: collision rate,
//! conformer recovery, packing similarity and approximate solves, with
//! sample- and crystal-level aggregation.

mod collision;
mod graph;
mod packing;
mod rmsd;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{Block, BlockMolecule};
use crate::crystal::Crystal;
use crate::elements::{RadiiKind, RadiiTable};
use crate::error::{Error, Result};

pub use collision::{collision_check, Clash, CollisionReport};
pub use graph::{isomorphisms, Isomorphisms, MolGraph};
pub use packing::{match_packing, reference_cluster, PackingMatch};
pub use rmsd::{conformer_rmsd1, identity_rmsd, ConformerRmsd, DEFAULT_AUTOMORPHISM_BUDGET};

pub const METRICS_SCHEMA: &str = "xtal.metrics.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricThresholds {
    pub collision_slack: f64,
    pub rec_rmsd1: f64,
    pub sol_rmsd15: f64,
    pub pac_min_matched: usize,
    pub cluster_size: usize,
    /// Centroid tolerance as a fraction of the reference nearest-centroid
    /// spacing.
    pub distance_fraction: f64,
    /// Orientation tolerance (degrees).
    pub angle_deg: f64,
    pub automorphism_budget: usize,
    pub radii: RadiiKind,
}

impl Default for MetricThresholds {
    fn default() -> Self {
        MetricThresholds {
            collision_slack: 0.7,
            rec_rmsd1: 0.5,
            sol_rmsd15: 2.0,
            pac_min_matched: 8,
            cluster_size: 15,
            distance_fraction: 0.5,
            angle_deg: 45.0,
            automorphism_budget: DEFAULT_AUTOMORPHISM_BUDGET,
            radii: RadiiKind::default(),
        }
    }
}

impl MetricThresholds {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("collision_slack", self.collision_slack),
            ("rec_rmsd1", self.rec_rmsd1),
            ("sol_rmsd15", self.sol_rmsd15),
            ("distance_fraction", self.distance_fraction),
            ("angle_deg", self.angle_deg),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.pac_min_matched == 0 || self.cluster_size == 0 || self.automorphism_budget == 0 {
            return Err(Error::InvalidParameter(
                "pac_min_matched, cluster_size and automorphism_budget must be positive".into(),
            ));
        }
        if self.pac_min_matched > self.cluster_size {
            return Err(Error::InvalidParameter(format!(
                "pac_min_matched {} exceeds cluster_size {}",
                self.pac_min_matched, self.cluster_size
            )));
        }
        Ok(())
    }

    pub fn radii_table(&self) -> &'static RadiiTable {
        RadiiTable::shipped(self.radii)
    }
}

/// What a prediction is scored against: the asymmetric-unit conformers and
/// the reference cluster of one target.
#[derive(Debug, Clone)]
pub struct Reference {
    pub target: String,
    pub conformers: Vec<BlockMolecule>,
    pub cluster: Block,
}

impl Reference {
    pub fn from_crystal(target: impl Into<String>, crystal: &Crystal, t: &MetricThresholds) -> Result<Self> {
        let block = Block::from_crystal(crystal);
        let conformers = crystal.asu.iter().map(|&k| block.molecules[k].clone()).collect();
        Ok(Reference {
            target: target.into(),
            conformers,
            cluster: reference_cluster(crystal, t.cluster_size)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SampleFlags {
    pub collision: bool,
    pub packing_similar: bool,
    pub conformer_recovered: bool,
    pub solved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleMetrics {
    pub target: String,
    pub sample: String,
    pub flags: SampleFlags,
    pub n_clashes: usize,
    /// Best conformer RMSD over predicted molecules (A).
    pub rmsd1: Option<f64>,
    pub n_matched: usize,
    pub rmsd_cluster: Option<f64>,
    pub correspondence: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Smallest RMSD1 of any predicted molecule to a same-entity reference
/// conformer.
pub fn best_conformer_rmsd(pred: &Block, conformers: &[BlockMolecule], budget: usize) -> Option<ConformerRmsd> {
    let mut best: Option<ConformerRmsd> = None;
    for p in &pred.molecules {
        for g in conformers.iter().filter(|g| g.entity == p.entity) {
            if let Ok(r) = conformer_rmsd1(p, g, budget) {
                if best.as_ref().is_none_or(|b| r.rmsd < b.rmsd) {
                    best = Some(r);
                }
            }
        }
    }
    best
}

pub fn evaluate_sample(pred: &Block, reference: &Reference, sample: &str, t: &MetricThresholds) -> Result<SampleMetrics> {
    let mut warnings = Vec::new();
    let col = collision_check(pred, t.radii_table(), t.collision_slack)?;
    let rmsd1 = best_conformer_rmsd(pred, &reference.conformers, t.automorphism_budget);
    if rmsd1.as_ref().is_some_and(|r| r.identity_fallback) {
        warnings.push("automorphism budget exceeded; identity correspondence used".into());
    }
    let packing = match match_packing(pred, &reference.cluster, t) {
        Ok(m) => Some(m),
        Err(Error::NoCompatibleMolecule) => {
            warnings.push("no graph-compatible molecule for packing".into());
            None
        }
        Err(e) => return Err(e),
    };
    let packing_similar = packing.as_ref().is_some_and(|m| m.n_matched >= t.pac_min_matched);
    let flags = SampleFlags {
        collision: col.collides,
        packing_similar,
        conformer_recovered: rmsd1.as_ref().is_some_and(|r| r.rmsd < t.rec_rmsd1),
        solved: !col.collides && packing_similar && packing.as_ref().is_some_and(|m| m.rmsd_cluster < t.sol_rmsd15),
    };
    Ok(SampleMetrics {
        target: reference.target.clone(),
        sample: sample.to_string(),
        flags,
        n_clashes: col.clashes.len(),
        rmsd1: rmsd1.map(|r| r.rmsd),
        n_matched: packing.as_ref().map_or(0, |m| m.n_matched),
        rmsd_cluster: packing.as_ref().map(|m| m.rmsd_cluster),
        correspondence: packing.map(|m| m.correspondence).unwrap_or_default(),
        warnings,
    })
}

/// True iff some sample is collision-free, packing-similar and within the
/// cluster RMSD threshold.
pub fn approximately_solved(samples: &[Block], cluster: &Block, t: &MetricThresholds) -> Result<bool> {
    for s in samples {
        if collision_check(s, t.radii_table(), t.collision_slack)?.collides {
            continue;
        }
        match match_packing(s, cluster, t) {
            Ok(m) if m.n_matched >= t.pac_min_matched && m.rmsd_cluster < t.sol_rmsd15 => return Ok(true),
            Ok(_) | Err(Error::NoCompatibleMolecule) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(false)
}

/// Scores `(reference index, sample name, block)` triples in parallel;
/// results keep the input order.
pub fn evaluate_corpus(
    references: &[Reference],
    samples: &[(usize, String, Block)],
    t: &MetricThresholds,
) -> Result<Vec<SampleMetrics>> {
    samples
        .par_iter()
        .map(|(r, name, block)| {
            let reference = references
                .get(*r)
                .ok_or_else(|| Error::InvalidParameter(format!("reference index {r} out of range")))?;
            evaluate_sample(block, reference, name, t)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub col_s: f64,
    pub pac_s: f64,
    pub pac_c: f64,
    pub rec_s: f64,
    pub rec_c: f64,
    pub sol_c: f64,
    pub n_targets: usize,
    pub n_samples: usize,
}

/// Sample-level rates are means over all samples; crystal-level rates are
/// the fraction of targets with at least one passing sample.
pub fn aggregate<'a, I>(records: I) -> Result<Aggregates>
where
    I: IntoIterator<Item = (&'a str, SampleFlags)>,
{
    let mut by_target: BTreeMap<&str, SampleFlags> = BTreeMap::new();
    let (mut n, mut col, mut pac, mut rec) = (0usize, 0usize, 0usize, 0usize);
    for (target, f) in records {
        n += 1;
        col += f.collision as usize;
        pac += f.packing_similar as usize;
        rec += f.conformer_recovered as usize;
        let any = by_target.entry(target).or_default();
        any.packing_similar |= f.packing_similar;
        any.conformer_recovered |= f.conformer_recovered;
        any.solved |= f.solved;
    }
    if n == 0 {
        return Err(Error::EmptyInput("no samples to aggregate".into()));
    }
    let nt = by_target.len() as f64;
    let count = |g: fn(&SampleFlags) -> bool| by_target.values().filter(|f| g(f)).count() as f64 / nt;
    Ok(Aggregates {
        col_s: col as f64 / n as f64,
        pac_s: pac as f64 / n as f64,
        pac_c: count(|f| f.packing_similar),
        rec_s: rec as f64 / n as f64,
        rec_c: count(|f| f.conformer_recovered),
        sol_c: count(|f| f.solved),
        n_targets: by_target.len(),
        n_samples: n,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub schema: &'static str,
    pub thresholds: MetricThresholds,
    pub radii_source: String,
    pub samples: Vec<SampleMetrics>,
    pub aggregates: Aggregates,
}

impl MetricsReport {
    pub fn new(samples: Vec<SampleMetrics>, thresholds: MetricThresholds) -> Result<Self> {
        let aggregates = aggregate(samples.iter().map(|s| (s.target.as_str(), s.flags)))?;
        Ok(MetricsReport {
            schema: METRICS_SCHEMA,
            radii_source: thresholds.radii_table().source.clone(),
            thresholds,
            samples,
            aggregates,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Aggregates in the column order Col_S, Pac_S, Pac_C, Rec_S, Rec_C,
    /// Sol_C.
    pub fn to_csv(&self) -> String {
        let a = &self.aggregates;
        format!(
            "Col_S,Pac_S,Pac_C,Rec_S,Rec_C,Sol_C\n{},{},{},{},{},{}\n",
            a.col_s, a.pac_s, a.pac_c, a.rec_s, a.rec_c, a.sol_c
        )
    }
}
