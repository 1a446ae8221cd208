//! Rigid superposition of corresponding point sets (Kabsch).

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::lattice::{Mat3, Vec3};

/// `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidMotion {
    pub fn identity() -> Self {
        RigidMotion {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    pub fn apply_all(&self, xs: &[Vec3]) -> Vec<Vec3> {
        xs.iter().map(|x| self.apply(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub motion: RigidMotion,
    pub rmsd: f64,
}

/// Relative size of the second principal extent below which a point set
/// counts as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

fn weighted_centroid(xs: &[Vec3], w: &[f64]) -> Vec3 {
    let total: f64 = w.iter().sum();
    xs.iter().zip(w).map(|(x, wi)| x * *wi).sum::<Vec3>() / total
}

fn is_degenerate(xs: &[Vec3], w: &[f64], c: &Vec3) -> bool {
    let scatter: Mat3 = xs
        .iter()
        .zip(w)
        .map(|(x, wi)| {
            let d = x - c;
            d * d.transpose() * *wi
        })
        .sum();
    let mut ev: Vec<f64> = scatter.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[0] <= f64::MIN_POSITIVE || ev[1] <= COLLINEAR_TOL * ev[0]
}

fn check_inputs(moving: &[Vec3], target: &[Vec3], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    if moving.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} moving points against {} target points",
            moving.len(),
            target.len()
        )));
    }
    if moving.is_empty() {
        return Err(Error::DegenerateAlignment);
    }
    let w = match weights {
        Some(w) if w.len() != moving.len() => {
            return Err(Error::ShapeMismatch(format!("{} weights for {} points", w.len(), moving.len())))
        }
        Some(w) if w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 => {
            return Err(Error::InvalidParameter("alignment weights must be non-negative and not all zero".into()))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; moving.len()],
    };
    Ok(w)
}

fn solve(moving: &[Vec3], target: &[Vec3], w: &[f64], pm: &Vec3, pt: &Vec3) -> Alignment {
    let h: Mat3 = moving
        .iter()
        .zip(target)
        .zip(w)
        .map(|((p, q), wi)| (p - pm) * (q - pt).transpose() * *wi)
        .sum();
    let svd = SVD::new(h, true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let translation = pt - rotation * pm;
    let motion = RigidMotion { rotation, translation };
    let total: f64 = w.iter().sum();
    let sq: f64 = moving
        .iter()
        .zip(target)
        .zip(w)
        .map(|((p, q), wi)| (motion.apply(p) - q).norm_squared() * wi)
        .sum();
    Alignment {
        motion,
        rmsd: (sq / total).sqrt(),
    }
}

/// Proper rotation and translation taking `moving` onto `target` with
/// minimal (weighted) RMSD. Fails on coincident or collinear input, where
/// the rotation is not unique.
pub fn kabsch_align(moving: &[Vec3], target: &[Vec3], weights: Option<&[f64]>) -> Result<Alignment> {
    let w = check_inputs(moving, target, weights)?;
    let pm = weighted_centroid(moving, &w);
    let pt = weighted_centroid(target, &w);
    if is_degenerate(moving, &w, &pm) || is_degenerate(target, &w, &pt) {
        return Err(Error::DegenerateAlignment);
    }
    Ok(solve(moving, target, &w, &pm, &pt))
}

/// Like [`kabsch_align`] but accepts degenerate input (single atoms,
/// linear molecules) and returns one of the optimal motions.
pub fn kabsch_align_any(moving: &[Vec3], target: &[Vec3]) -> Result<Alignment> {
    let w = check_inputs(moving, target, None)?;
    let pm = weighted_centroid(moving, &w);
    let pt = weighted_centroid(target, &w);
    Ok(solve(moving, target, &w, &pm, &pt))
}
