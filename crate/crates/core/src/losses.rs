//! Structure losses: aligned MSE, smooth LDDT, distogram cross-entropy,
//! variance-exploding forward noising and their weighted sum.
//!
//! Gradients are taken with the alignment held fixed (no gradient through
//! the superposition).

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::align::kabsch_align;
use crate::error::{Error, Result};
use crate::lattice::Vec3;
use crate::rng::substream;

fn same_len(pred: &[Vec3], gt: &[Vec3]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted points against {} reference points",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Ground truth superposed onto the prediction.
pub fn align_ground_truth(pred: &[Vec3], gt: &[Vec3]) -> Result<Vec<Vec3>> {
    same_len(pred, gt)?;
    let a = kabsch_align(gt, pred, None)?;
    Ok(a.motion.apply_all(gt))
}

/// Mean over atoms of the squared deviation divided by 3 (per-coordinate
/// mean squared error), after superposing `gt` onto `pred`.
pub fn aligned_mse(pred: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    let gt_al = align_ground_truth(pred, gt)?;
    let sq: f64 = pred.iter().zip(&gt_al).map(|(p, g)| (p - g).norm_squared()).sum();
    Ok(sq / (3.0 * pred.len() as f64))
}

pub fn aligned_mse_grad(pred: &[Vec3], gt: &[Vec3]) -> Result<Vec<Vec3>> {
    let gt_al = align_ground_truth(pred, gt)?;
    let scale = 2.0 / (3.0 * pred.len() as f64);
    Ok(pred.iter().zip(&gt_al).map(|(p, g)| (p - g) * scale).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    /// Pairs with reference distance below the inclusion radius, averaged
    /// over the mask.
    #[default]
    GroundTruth,
    /// Pairs with `delta < 15`, summed over the mask and divided by
    /// `d (d - 1)`.
    DeltaCutoff,
}

pub const DEFAULT_INCLUSION_RADIUS: f64 = 15.0;
const LDDT_THRESHOLDS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const DELTA_CUTOFF: f64 = 15.0;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn epsilon(delta: f64) -> f64 {
    0.25 * LDDT_THRESHOLDS.iter().map(|c| sigmoid(c - delta)).sum::<f64>()
}

fn epsilon_slope(delta: f64) -> f64 {
    -0.25
        * LDDT_THRESHOLDS
            .iter()
            .map(|c| {
                let s = sigmoid(c - delta);
                s * (1.0 - s)
            })
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SLddtBreakdown {
    pub l: DMatrix<f64>,
    pub l_gt: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub epsilon: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub value: f64,
}

fn distances(x: &[Vec3]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| (x[i] - x[j]).norm())
}

fn lddt_mask(l_gt: &DMatrix<f64>, delta: &DMatrix<f64>, radius: f64, source: MaskSource) -> DMatrix<bool> {
    let n = l_gt.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        i != j
            && match source {
                MaskSource::GroundTruth => l_gt[(i, j)] < radius,
                MaskSource::DeltaCutoff => delta[(i, j)] < DELTA_CUTOFF,
            }
    })
}

fn normaliser(mask: &DMatrix<bool>, source: MaskSource) -> f64 {
    let n = mask.nrows() as f64;
    match source {
        MaskSource::GroundTruth => mask.iter().filter(|&&m| m).count() as f64,
        MaskSource::DeltaCutoff => n * (n - 1.0),
    }
}

pub fn smooth_lddt(pred: &[Vec3], gt: &[Vec3], radius: f64, source: MaskSource) -> Result<SLddtBreakdown> {
    same_len(pred, gt)?;
    if pred.len() < 2 {
        return Err(Error::InvalidParameter("smooth LDDT needs at least two atoms".into()));
    }
    let l = distances(pred);
    let l_gt = distances(gt);
    let delta = (&l - &l_gt).abs();
    let eps = delta.map(epsilon);
    let mask = lddt_mask(&l_gt, &delta, radius, source);
    let norm = normaliser(&mask, source);
    let total: f64 = eps.iter().zip(mask.iter()).filter(|(_, &m)| m).map(|(e, _)| e).sum();
    let value = if norm > 0.0 { total / norm } else { 0.0 };
    Ok(SLddtBreakdown {
        l,
        l_gt,
        delta,
        epsilon: eps,
        mask,
        value,
    })
}

/// `1 - smooth_lddt`, so perfect agreement is the minimum.
pub fn sldd_loss(pred: &[Vec3], gt: &[Vec3], radius: f64, source: MaskSource) -> Result<f64> {
    Ok(1.0 - smooth_lddt(pred, gt, radius, source)?.value)
}

/// Gradient of [`sldd_loss`] with respect to `pred` (mask held fixed).
pub fn sldd_loss_grad(pred: &[Vec3], gt: &[Vec3], radius: f64, source: MaskSource) -> Result<Vec<Vec3>> {
    let b = smooth_lddt(pred, gt, radius, source)?;
    let norm = normaliser(&b.mask, source);
    let n = pred.len();
    let mut grad = vec![Vec3::zeros(); n];
    if norm <= 0.0 {
        return Ok(grad);
    }
    for i in 0..n {
        for j in 0..n {
            if !b.mask[(i, j)] || b.l[(i, j)] == 0.0 {
                continue;
            }
            let diff = b.l[(i, j)] - b.l_gt[(i, j)];
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            // d(value)/dL_ij for this ordered pair
            let g = epsilon_slope(b.delta[(i, j)]) * sign / norm;
            let unit = (pred[i] - pred[j]) / b.l[(i, j)];
            grad[i] += unit * g;
            grad[j] -= unit * g;
        }
    }
    // loss = 1 - value
    Ok(grad.into_iter().map(|g| -g).collect())
}

/// Distance bins: `edges` split the line into `edges.len() + 1` bins with
/// open outer bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistogramBins {
    pub edges: Vec<f64>,
}

impl Default for DistogramBins {
    /// 64 bins over [2, 22] A: 63 evenly spaced edges, open at both ends.
    fn default() -> Self {
        DistogramBins::uniform(2.0, 22.0, 64)
    }
}

impl DistogramBins {
    /// `n_bins` bins with `n_bins - 1` evenly spaced edges from `lo` to `hi`.
    pub fn uniform(lo: f64, hi: f64, n_bins: usize) -> Self {
        let n_edges = n_bins.saturating_sub(1);
        let edges = match n_edges {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n_edges)
                .map(|k| lo + (hi - lo) * k as f64 / (n_edges - 1) as f64)
                .collect(),
        };
        DistogramBins { edges }
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin(&self, d: f64) -> usize {
        self.edges.partition_point(|&e| e <= d)
    }
}

/// Pair logits of shape (d, d, n_bins), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLogits {
    pub n: usize,
    pub n_bins: usize,
    pub data: Vec<f64>,
}

impl PairLogits {
    pub fn new(n: usize, n_bins: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n * n_bins {
            return Err(Error::ShapeMismatch(format!(
                "{} logits for shape ({n}, {n}, {n_bins})",
                data.len()
            )));
        }
        Ok(PairLogits { n, n_bins, data })
    }

    pub fn zeros(n: usize, n_bins: usize) -> Self {
        PairLogits {
            n,
            n_bins,
            data: vec![0.0; n * n * n_bins],
        }
    }

    fn idx(&self, i: usize, j: usize, b: usize) -> usize {
        (i * self.n + j) * self.n_bins + b
    }

    pub fn get(&self, i: usize, j: usize, b: usize) -> f64 {
        self.data[self.idx(i, j, b)]
    }

    pub fn set(&mut self, i: usize, j: usize, b: usize, v: f64) {
        let k = self.idx(i, j, b);
        self.data[k] = v;
    }

    /// Softmax of the symmetrised logits for pair (i, j).
    fn probs(&self, i: usize, j: usize) -> Vec<f64> {
        let sym: Vec<f64> = (0..self.n_bins)
            .map(|b| 0.5 * (self.get(i, j, b) + self.get(j, i, b)))
            .collect();
        let m = sym.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = sym.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }
}

fn check_distogram(logits: &PairLogits, gt: &[Vec3], bins: &DistogramBins) -> Result<()> {
    if logits.n != gt.len() || logits.n_bins != bins.n_bins() {
        return Err(Error::ShapeMismatch(format!(
            "logits ({0}, {0}, {1}) against {2} atoms and {3} bins",
            logits.n,
            logits.n_bins,
            gt.len(),
            bins.n_bins()
        )));
    }
    if gt.len() < 2 {
        return Err(Error::InvalidParameter("distogram loss needs at least two atoms".into()));
    }
    Ok(())
}

/// Mean cross-entropy over ordered pairs i != j between the softmax of the
/// symmetrised logits and the bin of the reference distance.
pub fn distogram_loss(logits: &PairLogits, gt: &[Vec3], bins: &DistogramBins) -> Result<f64> {
    check_distogram(logits, gt, bins)?;
    let n = gt.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let target = bins.bin((gt[i] - gt[j]).norm());
            let p = logits.probs(i, j);
            total -= p[target].max(f64::MIN_POSITIVE).ln();
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Gradient of [`distogram_loss`] with respect to the logits. The loss does
/// not depend on predicted coordinates.
pub fn distogram_loss_grad(logits: &PairLogits, gt: &[Vec3], bins: &DistogramBins) -> Result<PairLogits> {
    check_distogram(logits, gt, bins)?;
    let n = gt.len();
    let pairs = (n * (n - 1)) as f64;
    let mut grad = PairLogits::zeros(n, logits.n_bins);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let target = bins.bin((gt[i] - gt[j]).norm());
            let p = logits.probs(i, j);
            for (b, pb) in p.iter().enumerate() {
                let y = if b == target { 1.0 } else { 0.0 };
                grad.set(i, j, b, (pb - y) / pairs);
            }
        }
    }
    Ok(grad)
}

/// `x0 + sigma * eps` with standard normal `eps` per coordinate.
pub fn ve_forward_noise(x0: &[Vec3], sigma: f64, seed: u64) -> Result<Vec<Vec3>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be positive, got {sigma}")));
    }
    let mut rng = substream(seed, "noise");
    Ok(x0
        .iter()
        .map(|x| {
            let eps = Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            x + eps * sigma
        })
        .collect())
}

/// EDM loss weight `(sigma^2 + sigma_data^2) / (sigma * sigma_data)^2`.
pub fn edm_weight(sigma: f64, sigma_data: f64) -> f64 {
    (sigma * sigma + sigma_data * sigma_data) / (sigma * sigma_data).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_dist: f64,
    pub sigma_data: f64,
    /// When set, the MSE term is scaled by [`edm_weight`] at this noise level.
    pub sigma: Option<f64>,
    pub inclusion_radius: f64,
    pub mask_source: MaskSource,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_dist: 1.0,
            sigma_data: 16.0,
            sigma: None,
            inclusion_radius: DEFAULT_INCLUSION_RADIUS,
            mask_source: MaskSource::GroundTruth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub mse: f64,
    pub slddt_score: f64,
    pub slddt_loss: f64,
    pub distogram: f64,
    pub lambda_dist: f64,
    pub total: f64,
}

/// `w * mse + (1 - slddt) + lambda_dist * distogram`, with `w` the EDM
/// weight when a noise level is given and 1 otherwise. Without logits the
/// distogram term is 0.
pub fn composite_loss(
    pred: &[Vec3],
    gt: &[Vec3],
    logits: Option<(&PairLogits, &DistogramBins)>,
    weights: &LossWeights,
) -> Result<LossReport> {
    if !(weights.lambda_dist >= 0.0) {
        return Err(Error::InvalidParameter("lambda_dist must be non-negative".into()));
    }
    let mse = aligned_mse(pred, gt)?;
    let gt_al = align_ground_truth(pred, gt)?;
    let slddt_score = smooth_lddt(pred, &gt_al, weights.inclusion_radius, weights.mask_source)?.value;
    let distogram = match logits {
        Some((l, bins)) => distogram_loss(l, gt, bins)?,
        None => 0.0,
    };
    let w = weights.sigma.map_or(1.0, |s| edm_weight(s, weights.sigma_data));
    let slddt_loss = 1.0 - slddt_score;
    Ok(LossReport {
        mse,
        slddt_score,
        slddt_loss,
        distogram,
        lambda_dist: weights.lambda_dist,
        total: w * mse + slddt_loss + weights.lambda_dist * distogram,
    })
}
