//! Periodic lattice geometry.
//!
//! Lattice vectors are stored as the ROWS of a 3x3 matrix `L` (a, b, c in
//! Angstrom). A fractional coordinate `u` maps to Cartesian space as
//! `x = L^T u = u0*a + u1*b + u2*c`.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::niggli;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type IMat3 = Matrix3<i64>;

/// Smallest accepted cell volume (A^3).
pub const MIN_VOLUME: f64 = 1e-8;

/// Fractional components this close to 1.0 wrap to 0.0.
pub const WRAP_SNAP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Lattice {
    rows: Mat3,
    to_frac: Mat3,
    reduced: OnceLock<Option<Reduced>>,
}

#[derive(Debug, Clone)]
struct Reduced {
    cart: Mat3,
    to_frac: Mat3,
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
    }
}

impl Lattice {
    /// Builds a lattice from a row-vector matrix. Rejects |det| < 1e-8 and
    /// left-handed bases.
    pub fn new(rows: Mat3) -> Result<Self> {
        let det = rows.determinant();
        if !det.is_finite() || det.abs() < MIN_VOLUME {
            return Err(Error::DegenerateLattice(det));
        }
        if det < 0.0 {
            return Err(Error::LeftHandedLattice(det));
        }
        let to_frac = rows
            .transpose()
            .try_inverse()
            .ok_or(Error::DegenerateLattice(det))?;
        Ok(Lattice {
            rows,
            to_frac,
            reduced: OnceLock::new(),
        })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Mat3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        ))
    }

    pub fn cubic(a: f64) -> Result<Self> {
        Self::new(Mat3::from_diagonal_element(a))
    }

    /// Cell from lengths (A) and angles (degrees) in the standard
    /// crystallographic orientation: a along x, b in the xy-plane.
    pub fn from_parameters(a: f64, b: f64, c: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cell lengths must be positive, got ({a}, {b}, {c})"
            )));
        }
        let (ca, cb) = (alpha.to_radians().cos(), beta.to_radians().cos());
        let (sg, cg) = gamma.to_radians().sin_cos();
        if sg.abs() < 1e-12 {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} is degenerate")));
        }
        let cx = c * cb;
        let cy = c * (ca - cb * cg) / sg;
        let cz2 = c * c - cx * cx - cy * cy;
        if cz2 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cell angles ({alpha}, {beta}, {gamma}) do not form a cell"
            )));
        }
        Self::from_rows([[a, 0.0, 0.0], [b * cg, b * sg, 0.0], [cx, cy, cz2.sqrt()]])
    }

    /// Row-vector matrix (row i is lattice vector i).
    pub fn matrix(&self) -> &Mat3 {
        &self.rows
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let r = &self.rows;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ]
    }

    pub fn vector(&self, i: usize) -> Vec3 {
        self.rows.row(i).transpose()
    }

    pub fn volume(&self) -> f64 {
        self.rows.determinant()
    }

    /// Gram matrix of the lattice vectors.
    pub fn metric_tensor(&self) -> Mat3 {
        self.rows * self.rows.transpose()
    }

    pub fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.vector(i).norm())
    }

    /// (a, b, c, alpha, beta, gamma) with angles in degrees.
    pub fn parameters(&self) -> [f64; 6] {
        let [a, b, c] = self.lengths();
        let angle = |i: usize, j: usize, li: f64, lj: f64| {
            (self.vector(i).dot(&self.vector(j)) / (li * lj)).clamp(-1.0, 1.0).acos().to_degrees()
        };
        [a, b, c, angle(1, 2, b, c), angle(0, 2, a, c), angle(0, 1, a, b)]
    }

    pub fn frac_to_cart(&self, u: &Vec3) -> Vec3 {
        self.rows.transpose() * u
    }

    pub fn cart_to_frac(&self, x: &Vec3) -> Vec3 {
        self.to_frac * x
    }

    /// Lattice spanned by new vectors `v_j = sum_i p[(i, j)] * a_i`.
    pub fn transformed(&self, p: &IMat3) -> Result<Lattice> {
        let pf = p.map(|v| v as f64);
        Lattice::new(pf.transpose() * self.rows)
    }

    /// Lattice with every vector rotated: `v -> R v`.
    pub fn rotated(&self, rotation: &Mat3) -> Result<Lattice> {
        Lattice::new(self.rows * rotation.transpose())
    }

    fn reduced(&self) -> Option<&Reduced> {
        self.reduced
            .get_or_init(|| {
                let red = niggli::niggli_reduce(self).ok()?;
                Some(Reduced {
                    cart: red.reduced.rows.transpose(),
                    to_frac: red.reduced.to_frac,
                })
            })
            .as_ref()
    }

    /// Shortest periodic image of the displacement `d` (Cartesian).
    pub fn min_image_vector(&self, d: &Vec3) -> Vec3 {
        let (cart, to_frac, range) = match self.reduced() {
            Some(r) => (r.cart, r.to_frac, 1),
            None => (self.rows.transpose(), self.to_frac, 3),
        };
        let mut f = to_frac * d;
        f.apply(|v| *v -= v.round());
        let base = cart * f;
        let mut best = base;
        let mut best_n2 = base.norm_squared();
        for i in -range..=range {
            for j in -range..=range {
                for k in -range..=range {
                    if i == 0 && j == 0 && k == 0 {
                        continue;
                    }
                    let v = base + cart * Vec3::new(i as f64, j as f64, k as f64);
                    let n2 = v.norm_squared();
                    if n2 < best_n2 {
                        best_n2 = n2;
                        best = v;
                    }
                }
            }
        }
        best
    }

    /// Minimum-image distance between two Cartesian points.
    pub fn min_image_distance(&self, x1: &Vec3, x2: &Vec3) -> f64 {
        self.min_image_vector(&(x2 - x1)).norm()
    }
}

/// Wraps one fractional component into [0, 1).
pub fn wrap_component(x: f64) -> f64 {
    let mut w = x - x.floor();
    if w >= 1.0 - WRAP_SNAP {
        w = 0.0;
    }
    // normalises -0.0
    w + 0.0
}

/// Wraps a fractional triple onto the 3-torus [0, 1)^3.
pub fn wrap_to_cell(u: &Vec3) -> Vec3 {
    u.map(wrap_component)
}

/// Minimum distance between two atom sets, either periodic (minimum image
/// under `lattice`) or plain Euclidean when `lattice` is `None`.
pub fn molecular_min_distance(lattice: Option<&Lattice>, a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMolecule);
    }
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            let d = match lattice {
                Some(l) => l.min_image_distance(x, y),
                None => (x - y).norm(),
            };
            best = best.min(d);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triclinic() -> Lattice {
        Lattice::from_rows([[7.1, 0.0, 0.0], [2.3, 6.4, 0.0], [-1.7, 2.2, 8.9]]).unwrap()
    }

    #[test]
    fn cubic_conversions() {
        let l = Lattice::cubic(10.0).unwrap();
        let x = l.frac_to_cart(&Vec3::new(0.5, 0.5, 0.5));
        assert!((x - Vec3::new(5.0, 5.0, 5.0)).norm() < 1e-12);
        let u = l.cart_to_frac(&Vec3::new(5.0, 5.0, 5.0));
        assert!((u - Vec3::new(0.5, 0.5, 0.5)).norm() < 1e-12);
        assert_eq!(l.frac_to_cart(&Vec3::zeros()), Vec3::zeros());
        assert_eq!(l.cart_to_frac(&Vec3::zeros()), Vec3::zeros());
    }

    #[test]
    fn frac_to_cart_matches_longhand() {
        let l = triclinic();
        let r = l.rows();
        let u = [0.31, -0.72, 1.45];
        let x = l.frac_to_cart(&Vec3::from(u));
        for c in 0..3 {
            let expect = u[0] * r[0][c] + u[1] * r[1][c] + u[2] * r[2][c];
            assert!((x[c] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_and_left_handed() {
        assert!(matches!(
            Lattice::from_rows([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
            Err(Error::DegenerateLattice(_))
        ));
        assert!(matches!(
            Lattice::from_rows([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]),
            Err(Error::LeftHandedLattice(_))
        ));
    }

    #[test]
    fn wrap_examples() {
        let w = wrap_to_cell(&Vec3::new(1.25, -0.25, 0.0));
        assert_eq!(w, Vec3::new(0.25, 0.75, 0.0));
        let w = wrap_to_cell(&Vec3::new(0.999999, 1.0 - 1e-16, 0.0));
        assert_eq!(w[0], 0.999999);
        assert_eq!(w[1], 0.0);
        assert_eq!(wrap_component(-1e-17), 0.0);
    }

    #[test]
    fn min_image_across_boundary() {
        let l = Lattice::cubic(10.0).unwrap();
        let a = l.frac_to_cart(&Vec3::new(0.05, 0.0, 0.0));
        let b = l.frac_to_cart(&Vec3::new(0.95, 0.0, 0.0));
        assert!((l.min_image_distance(&a, &b) - 1.0).abs() < 1e-12);
        assert_eq!(l.min_image_distance(&a, &a), 0.0);
    }

    #[test]
    fn cell_parameters_cubic() {
        let l = Lattice::from_parameters(10.0, 10.0, 10.0, 90.0, 90.0, 90.0).unwrap();
        assert!((l.matrix() - Mat3::from_diagonal_element(10.0)).abs().max() < 1e-10);
    }

    #[test]
    fn molecular_distance_empty_is_error() {
        assert!(matches!(
            molecular_min_distance(None, &[], &[Vec3::zeros()]),
            Err(Error::EmptyMolecule)
        ));
        let d = molecular_min_distance(None, &[Vec3::zeros()], &[Vec3::new(3.0, 0.0, 0.0)]).unwrap();
        assert_eq!(d, 3.0);
    }
}
