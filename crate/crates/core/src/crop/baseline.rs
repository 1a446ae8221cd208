//! Nearest-neighbour and centroid-radius crops.

use crate::block::Block;
use crate::crop::{oversized, Crop, CropMethod};
use crate::error::Result;

pub const DEFAULT_CENTROID_RADIUS: f64 = 15.0;

/// Adds candidates in the given order until the next one would exceed the
/// budget.
fn greedy(block: &Block, center: usize, order: Vec<(f64, usize)>, t_max: usize, method: CropMethod) -> Result<Crop> {
    let mut tokens = oversized(block, center, t_max)?;
    let mut molecules = vec![center];
    for (_, m) in order {
        let add = block.molecules[m].tokens();
        if tokens + add > t_max {
            break;
        }
        tokens += add;
        molecules.push(m);
    }
    Ok(Crop {
        method,
        center,
        molecules,
        shell_of: None,
        token_count: tokens,
    })
}

fn sorted(mut order: Vec<(f64, usize)>) -> Vec<(f64, usize)> {
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order
}

/// Whole molecules in ascending closest-atom distance from `center`
/// (`distances` as from [`super::distance_row`]); ties by molecule index.
pub fn knn_crop(block: &Block, center: usize, distances: &[f64], t_max: usize) -> Result<Crop> {
    let order = distances
        .iter()
        .enumerate()
        .filter(|&(m, d)| m != center && d.is_finite())
        .map(|(m, &d)| (d, m))
        .collect();
    greedy(block, center, sorted(order), t_max, CropMethod::Knn)
}

/// Whole molecules whose heavy-atom centroid lies within `radius` of the
/// center's, in ascending centroid distance; ties by molecule index.
pub fn centroid_radius_crop(block: &Block, center: usize, radius: f64, t_max: usize) -> Result<Crop> {
    let c = block.molecules[center].centroid();
    let order = block
        .molecules
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != center)
        .map(|(m, mol)| ((mol.centroid() - c).norm(), m))
        .filter(|&(d, _)| d <= radius)
        .collect();
    greedy(block, center, sorted(order), t_max, CropMethod::CentroidRadius)
}
