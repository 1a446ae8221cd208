//! Intermolecular distances and shell layers around a central molecule.

use rayon::prelude::*;

use crate::block::Block;
use crate::lattice::Vec3;

fn min_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            best = best.min((x - y).norm_squared());
        }
    }
    best.sqrt()
}

fn heavy(block: &Block) -> Vec<Vec<Vec3>> {
    block.molecules.iter().map(|m| m.heavy_coords()).collect()
}

/// Closest heavy-atom distance from molecule `center` to every molecule of
/// the block (0 for the center itself). Molecules without heavy atoms are
/// infinitely far away.
pub fn distance_row(block: &Block, center: usize) -> Vec<f64> {
    let coords = heavy(block);
    let c = &coords[center];
    (0..coords.len())
        .into_par_iter()
        .map(|j| if j == center { 0.0 } else { min_distance(c, &coords[j]) })
        .collect()
}

/// Symmetric matrix of closest heavy-atom distances between molecules.
pub fn intermolecular_distance_matrix(block: &Block) -> Vec<Vec<f64>> {
    let coords = heavy(block);
    let n = coords.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| min_distance(&coords[i], &coords[j])).collect())
        .collect();
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &d) in row.iter().enumerate() {
            let j = i + 1 + k;
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    out
}

/// Shell layers: `shells[0]` is the center, and shell `k >= 1` holds the
/// molecules not yet assigned with `d <= k * r_cut`. Intermediate shells
/// may be empty; the list ends at the outermost non-empty shell.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellDecomposition {
    pub center: usize,
    pub r_cut: f64,
    pub shells: Vec<Vec<usize>>,
    pub distances: Vec<f64>,
}

impl ShellDecomposition {
    /// Number of shells beyond the center, empty ones included.
    pub fn n_shells(&self) -> usize {
        self.shells.len() - 1
    }

    /// Number of non-empty shells beyond the center.
    pub fn k_count(&self) -> usize {
        self.shells[1..].iter().filter(|s| !s.is_empty()).count()
    }

    /// Shell index per molecule (`None` when unreachable).
    pub fn shell_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.distances.len()];
        for (k, shell) in self.shells.iter().enumerate() {
            for &m in shell {
                out[m] = Some(k);
            }
        }
        out
    }

    /// Annulus reading of shell `k`: `[(k - 1) r_cut, k r_cut]`, with the
    /// lower bound exclusive for k >= 2.
    pub fn annulus(&self, k: usize) -> (f64, f64) {
        (k.saturating_sub(1) as f64 * self.r_cut, k as f64 * self.r_cut)
    }
}

/// Distances within this of a shell boundary count as on it (A), so exact
/// ties such as a lattice translation of length `k * r_cut` stay inward
/// under rigid motions of the input.
pub const SHELL_TIE_TOL: f64 = 1e-9;

/// Shell index for a non-center molecule at distance `d`: the smallest
/// `k >= 1` with `d <= k * r_cut` (up to [`SHELL_TIE_TOL`]).
fn shell_index(d: f64, r_cut: f64) -> usize {
    let inside = |k: usize| d <= k as f64 * r_cut + SHELL_TIE_TOL;
    let mut k = ((d / r_cut).ceil() as usize).max(1);
    while k > 1 && inside(k - 1) {
        k -= 1;
    }
    while !inside(k) {
        k += 1;
    }
    k
}

pub fn shell_decompose(distances: &[f64], center: usize, r_cut: f64) -> ShellDecomposition {
    let mut shells: Vec<Vec<usize>> = vec![vec![center]];
    for (m, &d) in distances.iter().enumerate() {
        if m == center || !d.is_finite() {
            continue;
        }
        let k = shell_index(d, r_cut);
        if shells.len() <= k {
            shells.resize(k + 1, Vec::new());
        }
        shells[k].push(m);
    }
    ShellDecomposition {
        center,
        r_cut,
        shells,
        distances: distances.to_vec(),
    }
}
