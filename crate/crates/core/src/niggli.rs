//! Krivy-Gruber Niggli reduction with epsilon stabilisation.
//!
//! Every transformation used here has determinant +1, so handedness is
//! preserved and the accumulated change of basis is unimodular.

use crate::error::{Error, Result};
use crate::lattice::{IMat3, Lattice, Mat3};

pub const MAX_ITERATIONS: usize = 10_000;

/// Relative tolerance; the absolute epsilon on metric entries is
/// `NIGGLI_EPS * V^(2/3)`.
pub const NIGGLI_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct NiggliReduction {
    pub reduced: Lattice,
    /// Reduced vector j is `sum_i change_of_basis[(i, j)] * original_i`.
    pub change_of_basis: IMat3,
}

#[derive(Debug, Clone, Copy)]
struct Params {
    a: f64,
    b: f64,
    c: f64,
    xi: f64,
    eta: f64,
    zeta: f64,
    eps: f64,
}

impl Params {
    fn new(basis: &Mat3, eps: f64) -> Self {
        let g = basis.transpose() * basis;
        Params {
            a: g[(0, 0)],
            b: g[(1, 1)],
            c: g[(2, 2)],
            xi: 2.0 * g[(1, 2)],
            eta: 2.0 * g[(0, 2)],
            zeta: 2.0 * g[(0, 1)],
            eps,
        }
    }

    fn sign3(&self) -> (i32, i32, i32) {
        let s = |v: f64| {
            if v < -self.eps {
                -1
            } else if v > self.eps {
                1
            } else {
                0
            }
        };
        (s(self.xi), s(self.eta), s(self.zeta))
    }
}

fn imat(v: [i64; 9]) -> IMat3 {
    IMat3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8])
}

fn sgn(v: f64) -> i64 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

fn step1(p: &Params) -> Option<IMat3> {
    let e = p.eps;
    if p.a > p.b + e || ((p.a - p.b).abs() <= e && p.xi.abs() > p.eta.abs() + e) {
        return Some(imat([0, -1, 0, -1, 0, 0, 0, 0, -1]));
    }
    None
}

fn step2(p: &Params) -> Option<IMat3> {
    let e = p.eps;
    if p.b > p.c + e || ((p.b - p.c).abs() <= e && p.eta.abs() > p.zeta.abs() + e) {
        return Some(imat([-1, 0, 0, 0, 0, -1, 0, -1, 0]));
    }
    None
}

fn step3(p: &Params) -> Option<IMat3> {
    let (l, m, n) = p.sign3();
    if l * m * n == 1 {
        let f = |s: i32| if s == -1 { -1 } else { 1 };
        return Some(imat([f(l), 0, 0, 0, f(m), 0, 0, 0, f(n)]));
    }
    None
}

fn step4(p: &Params) -> Option<IMat3> {
    let (l, m, n) = p.sign3();
    if l * m * n == 0 || l * m * n == -1 {
        let mut d = [1i64; 3];
        let mut free = None;
        for (slot, s) in [l, m, n].into_iter().enumerate() {
            if s == 1 {
                d[slot] = -1;
            } else if s == 0 {
                free = Some(slot);
            }
        }
        if d[0] * d[1] * d[2] == -1 {
            if let Some(slot) = free {
                d[slot] = -1;
            }
        }
        if d == [1, 1, 1] {
            return None;
        }
        return Some(imat([d[0], 0, 0, 0, d[1], 0, 0, 0, d[2]]));
    }
    None
}

fn step5(p: &Params) -> Option<IMat3> {
    let e = p.eps;
    if p.xi.abs() > p.b + e
        || ((p.b - p.xi).abs() <= e && 2.0 * p.eta < p.zeta - e)
        || ((p.b + p.xi).abs() <= e && p.zeta < -e)
    {
        return Some(imat([1, 0, 0, 0, 1, -sgn(p.xi), 0, 0, 1]));
    }
    None
}

fn step6(p: &Params) -> Option<IMat3> {
    let e = p.eps;
    if p.eta.abs() > p.a + e
        || ((p.a - p.eta).abs() <= e && 2.0 * p.xi < p.zeta - e)
        || ((p.a + p.eta).abs() <= e && p.zeta < -e)
    {
        return Some(imat([1, 0, -sgn(p.eta), 0, 1, 0, 0, 0, 1]));
    }
    None
}

fn step7(p: &Params) -> Option<IMat3> {
    let e = p.eps;
    if p.zeta.abs() > p.a + e
        || ((p.a - p.zeta).abs() <= e && 2.0 * p.xi < p.eta - e)
        || ((p.a + p.zeta).abs() <= e && p.eta < -e)
    {
        return Some(imat([1, -sgn(p.zeta), 0, 0, 1, 0, 0, 0, 1]));
    }
    None
}

fn step8(p: &Params) -> Option<IMat3> {
    let e = p.eps;
    let s = p.xi + p.eta + p.zeta + p.a + p.b;
    if s < -e || (s.abs() <= e && 2.0 * (p.a + p.eta) + p.zeta > e) {
        return Some(imat([1, 0, 1, 0, 1, 1, 0, 0, 1]));
    }
    None
}

/// Niggli-reduces `lattice`, returning the reduced cell and the integer
/// change of basis relating it to the input.
pub fn niggli_reduce(lattice: &Lattice) -> Result<NiggliReduction> {
    let eps = NIGGLI_EPS * lattice.volume().powf(2.0 / 3.0);
    let mut basis = lattice.matrix().transpose();
    let mut total = IMat3::identity();

    let mut apply = |m: IMat3, basis: &mut Mat3| {
        *basis *= m.map(|v| v as f64);
        total *= m;
    };

    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        if let Some(m) = step1(&Params::new(&basis, eps)) {
            apply(m, &mut basis);
        }
        if let Some(m) = step2(&Params::new(&basis, eps)) {
            apply(m, &mut basis);
            continue;
        }
        if let Some(m) = step3(&Params::new(&basis, eps)) {
            apply(m, &mut basis);
        }
        if let Some(m) = step4(&Params::new(&basis, eps)) {
            apply(m, &mut basis);
        }
        let mut restarted = false;
        for step in [step5, step6, step7, step8] {
            if let Some(m) = step(&Params::new(&basis, eps)) {
                apply(m, &mut basis);
                restarted = true;
                break;
            }
        }
        if !restarted {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NiggliDivergence(MAX_ITERATIONS));
    }
    let reduced = lattice.transformed(&total)?;
    Ok(NiggliReduction {
        reduced,
        change_of_basis: total,
    })
}

/// Checks the Niggli main and special conditions on a metric tensor.
pub fn is_niggli_reduced(g: &Mat3, eps: f64) -> bool {
    let p = Params {
        a: g[(0, 0)],
        b: g[(1, 1)],
        c: g[(2, 2)],
        xi: 2.0 * g[(1, 2)],
        eta: 2.0 * g[(0, 2)],
        zeta: 2.0 * g[(0, 1)],
        eps,
    };
    let e = eps;
    if p.a > p.b + e || p.b > p.c + e {
        return false;
    }
    if (p.a - p.b).abs() <= e && p.xi.abs() > p.eta.abs() + e {
        return false;
    }
    if (p.b - p.c).abs() <= e && p.eta.abs() > p.zeta.abs() + e {
        return false;
    }
    let (l, m, n) = p.sign3();
    let all_pos = l == 1 && m == 1 && n == 1;
    let all_nonpos = l <= 0 && m <= 0 && n <= 0;
    if !(all_pos || all_nonpos) {
        return false;
    }
    step5(&p).is_none() && step6(&p).is_none() && step7(&p).is_none() && step8(&p).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_fixed_point() {
        let l = Lattice::cubic(5.0).unwrap();
        let r = niggli_reduce(&l).unwrap();
        assert_eq!(r.change_of_basis, IMat3::identity());
        assert_eq!(r.reduced, l);
    }

    #[test]
    fn sheared_cell_reduces_to_cubic_metric() {
        let sheared = Lattice::from_rows([[4.0, 0.0, 0.0], [4.0, 5.0, 0.0], [0.0, 0.0, 6.0]]).unwrap();
        let r = niggli_reduce(&sheared).unwrap();
        let g = r.reduced.metric_tensor();
        let expect = Mat3::from_diagonal(&nalgebra::Vector3::new(16.0, 25.0, 36.0));
        assert!((g - expect).abs().max() < 1e-9, "{g}");
        assert_eq!(r.change_of_basis.map(|v| v as f64).determinant().abs(), 1.0);
    }

    #[test]
    fn reduction_is_idempotent() {
        let l = Lattice::from_rows([[3.0, 0.2, 0.0], [5.1, 4.0, 0.3], [-7.0, 1.0, 9.0]]).unwrap();
        let once = niggli_reduce(&l).unwrap();
        let twice = niggli_reduce(&once.reduced).unwrap();
        assert_eq!(twice.change_of_basis, IMat3::identity());
        let eps = NIGGLI_EPS * l.volume().powf(2.0 / 3.0);
        assert!(is_niggli_reduced(&once.reduced.metric_tensor(), eps));
    }
}
