//! Stochastic shell sampling with stoichiometry-preserving frontier
//! subsampling.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::crop::shell::{distance_row, shell_decompose, ShellDecomposition};
use crate::crop::{oversized, Crop, CropMethod, CropParams};
use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};

/// How the per-type weight `R_t / |B_t|` is used when drawing from the
/// frontier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Each remaining molecule of type t carries weight `R_t / |B_t|`, so a
    /// type is picked with probability proportional to its remaining
    /// target `R_t`.
    #[default]
    PerMolecule,
    /// The type itself is picked with probability proportional to
    /// `R_t / |B_t|`.
    PerType,
}

/// Central molecule drawn uniformly from the block's asymmetric unit.
pub fn choose_center(block: &Block, seed: u64) -> Result<usize> {
    if block.asu.is_empty() {
        return Err(Error::InvalidParameter("block has no asymmetric-unit molecules".into()));
    }
    let mut rng = substream(seed, "center");
    Ok(block.asu[rng.random_range(0..block.asu.len())])
}

/// Draws the central molecule, builds its shells and crops.
pub fn s4_crop(block: &Block, params: &CropParams) -> Result<Crop> {
    params.validate()?;
    let center = choose_center(block, params.seed)?;
    let shells = shell_decompose(&distance_row(block, center), center, params.r_cut);
    s4_crop_at(block, &shells, params)
}

/// Shell sampling around a fixed center whose shells are already known.
pub fn s4_crop_at(block: &Block, shells: &ShellDecomposition, params: &CropParams) -> Result<Crop> {
    let center = shells.center;
    let mut tokens = oversized(block, center, params.t_max)?;

    let mut kept = shells.n_shells();
    if kept >= 1 && !substream(params.seed, "b_max").random_bool(params.p_max) {
        kept = substream(params.seed, "k_max").random_range(1..=kept);
    }

    let mut molecules = vec![center];
    let mut shell_of = vec![0];
    let mut i = 1;
    while i <= kept {
        let shell = &shells.shells[i];
        let add: usize = shell.iter().map(|&m| block.molecules[m].tokens()).sum();
        if tokens + add > params.t_max {
            break;
        }
        tokens += add;
        molecules.extend(shell);
        shell_of.extend(std::iter::repeat_n(i, shell.len()));
        i += 1;
    }

    if i == 1 && kept >= 1 {
        let extra = adaptive_stoichiometric_sample(
            block,
            &shells.shells[1],
            center,
            params.t_max,
            params.seed,
            params.weight_mode,
        );
        for m in extra {
            tokens += block.molecules[m].tokens();
            molecules.push(m);
            shell_of.push(1);
        }
    }

    Ok(Crop {
        method: CropMethod::S4,
        center,
        molecules,
        shell_of: Some(shell_of),
        token_count: tokens,
    })
}

fn pick_weighted(rng: &mut StreamRng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if x < w {
                return Some(i);
            }
            x -= w;
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Subsamples `frontier` towards the asymmetric unit's type proportions.
///
/// Targets are `R_t = round(p_t |S|)` (half away from zero) with the
/// center's type decremented once. Each draw picks a type, then a molecule
/// of that type uniformly; types whose target is used up get weight 0.
/// Sampling stops when the next molecule would exceed `t_max`, when the
/// frontier is exhausted, or when every remaining weight is 0. Returns the
/// added molecules in draw order (the center is not included).
pub fn adaptive_stoichiometric_sample(
    block: &Block,
    frontier: &[usize],
    center: usize,
    t_max: usize,
    seed: u64,
    mode: WeightMode,
) -> Vec<usize> {
    let entity = |m: usize| block.molecules[m].entity.as_str();
    let mut asu_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &m in &block.asu {
        *asu_counts.entry(entity(m)).or_default() += 1;
    }
    let asu_total = block.asu.len().max(1) as f64;

    // buckets keyed by type; frontier order is preserved within a bucket
    let mut buckets: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &m in frontier {
        if m != center {
            buckets.entry(entity(m)).or_default().push(m);
        }
    }
    let size = buckets.values().map(Vec::len).sum::<usize>() as f64;
    let types: Vec<&str> = buckets.keys().copied().collect();
    let mut targets: Vec<i64> = types
        .iter()
        .map(|t| {
            let p = asu_counts.get(t).copied().unwrap_or(0) as f64 / asu_total;
            (p * size).round() as i64
        })
        .collect();
    if let Some(k) = types.iter().position(|&t| t == entity(center)) {
        targets[k] -= 1;
    }

    let mut type_rng = substream(seed, "type");
    let mut mol_rng = substream(seed, "molecule");
    let mut tokens = block.molecules[center].tokens();
    let mut out = Vec::new();
    while tokens < t_max {
        let weights: Vec<f64> = types
            .iter()
            .zip(&targets)
            .map(|(t, &r)| {
                let n = buckets[t].len();
                if n == 0 || r <= 0 {
                    return 0.0;
                }
                let w = r as f64 / n as f64;
                match mode {
                    WeightMode::PerMolecule => w * n as f64,
                    WeightMode::PerType => w,
                }
            })
            .collect();
        let Some(k) = pick_weighted(&mut type_rng, &weights) else {
            break;
        };
        let bucket = buckets.get_mut(types[k]).expect("type bucket");
        let pos = mol_rng.random_range(0..bucket.len());
        let m = bucket[pos];
        let add = block.molecules[m].tokens();
        if tokens + add > t_max {
            break;
        }
        tokens += add;
        out.push(m);
        bucket.remove(pos);
        targets[k] -= 1;
    }
    out
}
