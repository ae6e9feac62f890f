//! Dimension-generic (d = 2 or 3) vector math, bearing geometry, and the
//! weighted distance-sum objective with its derivatives.
//!
//! Everything here is a pure function of its inputs. The dimension is a
//! run-time property carried by [`Vector`] so that planar and spatial
//! scenarios share one code path; unused trailing components are kept at
//! exactly `0.0`, which makes bitwise comparison and hashing sane.

use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Pairs of points closer than this are treated as coincident.
pub const COINCIDENCE_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeomError {
    #[error("the zero bearing has no projection matrix")]
    ZeroBearing,
    #[error("point coincides with beacon {0}")]
    CoincidentBeacon(usize),
}

/// A 2- or 3-dimensional vector. Components beyond `dim` are always 0.
#[derive(Clone, Copy, PartialEq)]
pub struct Vector {
    comps: [f64; 3],
    dim: usize,
}

impl Vector {
    pub fn new(comps: &[f64]) -> Self {
        assert!(
            comps.len() == 2 || comps.len() == 3,
            "vector dimension must be 2 or 3, got {}",
            comps.len()
        );
        let mut c = [0.0; 3];
        c[..comps.len()].copy_from_slice(comps);
        Vector {
            comps: c,
            dim: comps.len(),
        }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Vector::new(&[x, y])
    }

    pub fn xyz(x: f64, y: f64, z: f64) -> Self {
        Vector::new(&[x, y, z])
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3);
        Vector {
            comps: [0.0; 3],
            dim,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.comps[..self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.comps[0] * other.comps[0]
            + self.comps[1] * other.comps[1]
            + self.comps[2] * other.comps[2]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.as_slice().iter().map(|c| c.abs()).sum()
    }

    pub fn norm_linf(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        (*self - *other).norm()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero input.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        if n < COINCIDENCE_EPS {
            None
        } else {
            Some(self.map(|c| c / n))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        let mut out = Vector::zero(self.dim);
        for i in 0..self.dim {
            out.comps[i] = f(self.comps[i]);
        }
        out
    }

    pub fn scaled_add(&self, s: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            out.comps[i] += s * other.comps[i];
        }
        out
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl Add for Vector {
    type Output = Vector;
    fn add(self, rhs: Vector) -> Vector {
        self.scaled_add(1.0, &rhs)
    }
}

impl AddAssign for Vector {
    fn add_assign(&mut self, rhs: Vector) {
        *self = *self + rhs;
    }
}

impl Sub for Vector {
    type Output = Vector;
    fn sub(self, rhs: Vector) -> Vector {
        self.scaled_add(-1.0, &rhs)
    }
}

impl Neg for Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.map(|c| -c)
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    fn mul(self, s: f64) -> Vector {
        self.map(|c| c * s)
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.as_slice().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for c in self.as_slice() {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct VecVisitor;
        impl<'de> Visitor<'de> for VecVisitor {
            type Value = Vector;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a sequence of 2 or 3 finite numbers")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Vector, A::Error> {
                let mut comps = Vec::with_capacity(3);
                while let Some(c) = seq.next_element::<f64>()? {
                    comps.push(c);
                    if comps.len() > 3 {
                        return Err(serde::de::Error::invalid_length(comps.len(), &self));
                    }
                }
                if comps.len() < 2 {
                    return Err(serde::de::Error::invalid_length(comps.len(), &self));
                }
                if comps.iter().any(|c| !c.is_finite()) {
                    return Err(serde::de::Error::custom("vector component is not finite"));
                }
                Ok(Vector::new(&comps))
            }
        }
        deserializer.deserialize_seq(VecVisitor)
    }
}

/// Unit direction toward a target, or the zero vector for a coincident pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bearing(Vector);

impl Bearing {
    /// Wraps a vector that is already unit (or exactly zero).
    pub fn from_unit(v: Vector) -> Self {
        debug_assert!(v.norm_sq() == 0.0 || (v.norm() - 1.0).abs() < 1e-9);
        Bearing(v)
    }

    pub fn zero(dim: usize) -> Self {
        Bearing(Vector::zero(dim))
    }

    #[inline]
    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.norm_sq() == 0.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Bearing from one point toward another; coincident points give the zero
/// bearing by convention.
pub fn bearing(from: &Vector, to: &Vector) -> Bearing {
    let z = *to - *from;
    match z.normalized() {
        Some(u) => Bearing(u),
        None => Bearing::zero(from.dim()),
    }
}

/// Small dense square matrix sized by the runtime dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix {
    entries: [f64; 9],
    dim: usize,
}

impl Matrix {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3);
        Matrix {
            entries: [0.0; 9],
            dim,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zero(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn outer(v: &Vector) -> Self {
        let d = v.dim();
        let mut m = Matrix::zero(d);
        for i in 0..d {
            for j in 0..d {
                m.set(i, j, v[i] * v[j]);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[3 * i + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[3 * i + j] = v;
    }

    pub fn add_scaled(&mut self, s: f64, other: &Matrix) {
        debug_assert_eq!(self.dim, other.dim);
        for k in 0..9 {
            self.entries[k] += s * other.entries[k];
        }
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        let d = self.dim;
        debug_assert_eq!(d, v.dim());
        let mut out = Vector::zero(d);
        for i in 0..d {
            for j in 0..d {
                out.comps[i] += self.get(i, j) * v[j];
            }
        }
        out
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let mut a = *self;
        let scale = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max(a.get(i, j).abs()))
            .max(1.0);
        for _ in 0..64 {
            let mut off = 0.0f64;
            for i in 0..d {
                for j in (i + 1)..d {
                    off = off.max(a.get(i, j).abs());
                }
            }
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a.get(p, q);
                    if apq.abs() <= 1e-18 * scale {
                        continue;
                    }
                    let tau = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // rotate rows/columns p and q
                    for k in 0..d {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..d {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..d).map(|i| a.get(i, i)).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eigs
    }

    pub fn lambda_min(&self) -> f64 {
        self.sym_eigenvalues()[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.sym_eigenvalues().last().unwrap()
    }
}

/// Orthogonal projector `I - g gᵀ` onto the complement of a unit bearing.
pub fn proj(g: &Bearing) -> Result<Matrix, GeomError> {
    if g.is_zero() {
        return Err(GeomError::ZeroBearing);
    }
    let mut m = Matrix::identity(g.dim());
    m.add_scaled(-1.0, &Matrix::outer(g.as_vector()));
    Ok(m)
}

/// Weighted sum of distances from `p` to the beacon positions.
pub fn objective(p: &Vector, positions: &[Vector], weights: &[f64]) -> f64 {
    debug_assert_eq!(positions.len(), weights.len());
    positions
        .iter()
        .zip(weights)
        .map(|(pi, w)| w * p.dist(pi))
        .sum()
}

/// Gradient of [`objective`]: `-Σ ωᵢ gᵢ`, with the zero-bearing convention
/// applied term-wise at coincident points.
pub fn grad_f(p: &Vector, positions: &[Vector], weights: &[f64]) -> Vector {
    let mut g = Vector::zero(p.dim());
    for (pi, w) in positions.iter().zip(weights) {
        g = g.scaled_add(-w, bearing(p, pi).as_vector());
    }
    g
}

/// Hessian of [`objective`]: `Σ ωᵢ P_{gᵢ} / dᵢ`. Fails on a beacon.
pub fn hessian_f(p: &Vector, positions: &[Vector], weights: &[f64]) -> Result<Matrix, GeomError> {
    let mut h = Matrix::zero(p.dim());
    for (i, (pi, w)) in positions.iter().zip(weights).enumerate() {
        let d = p.dist(pi);
        if d < COINCIDENCE_EPS {
            return Err(GeomError::CoincidentBeacon(i));
        }
        let pg = proj(&bearing(p, pi)).expect("non-coincident pair has a unit bearing");
        h.add_scaled(w / d, &pg);
    }
    Ok(h)
}

/// `Σ ωᵢ P_{gᵢ}` evaluated at `p`; beacons coincident with `p` contribute 0.
pub fn proj_sum(p: &Vector, positions: &[Vector], weights: &[f64]) -> Matrix {
    let mut m = Matrix::zero(p.dim());
    for (pi, w) in positions.iter().zip(weights) {
        if let Ok(pg) = proj(&bearing(p, pi)) {
            m.add_scaled(*w, &pg);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hexagon() -> Vec<Vector> {
        [[1., 1.], [0., 2.], [-1., 1.], [-1., -1.], [0., -2.], [1., -1.]]
            .iter()
            .map(|c| Vector::new(c))
            .collect()
    }

    #[test]
    fn bearing_normalizes() {
        let b = bearing(&Vector::xy(0.0, 0.0), &Vector::xy(3.0, 4.0));
        assert_eq!(b.as_vector().as_slice(), &[0.6, 0.8]);
    }

    #[test]
    fn bearing_of_coincident_points_is_zero() {
        let p = Vector::xy(1.5, -0.25);
        assert!(bearing(&p, &p).is_zero());
    }

    #[test]
    fn bearing_sign() {
        let b = bearing(&Vector::xy(1.0, 0.0), &Vector::xy(0.0, 0.0));
        assert_eq!(b.as_vector().as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn proj_axis_cases() {
        let p = proj(&bearing(&Vector::xy(0.0, 0.0), &Vector::xy(1.0, 0.0))).unwrap();
        assert_eq!(p.get(0, 0), 0.0);
        assert_eq!(p.get(1, 1), 1.0);
        assert_eq!(p.get(0, 1), 0.0);

        let p3 = proj(&bearing(
            &Vector::xyz(0.0, 0.0, 0.0),
            &Vector::xyz(0.0, 2.0, 0.0),
        ))
        .unwrap();
        assert_eq!(p3.get(0, 0), 1.0);
        assert_eq!(p3.get(1, 1), 0.0);
        assert_eq!(p3.get(2, 2), 1.0);
    }

    #[test]
    fn proj_rejects_zero_bearing() {
        assert_eq!(proj(&Bearing::zero(2)), Err(GeomError::ZeroBearing));
    }

    #[test]
    fn objective_hexagon_center() {
        let pos = hexagon();
        let w = vec![1.0; 6];
        let f = objective(&Vector::xy(0.0, 0.0), &pos, &w);
        assert!((f - (4.0 * 2.0f64.sqrt() + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn objective_at_single_beacon_is_zero() {
        let p = Vector::xy(0.7, -0.3);
        // single-beacon degenerate field only exercises the distance sum
        assert_eq!(objective(&p, &[p], &[1.0]), 0.0);
    }

    #[test]
    fn objective_cube_center() {
        let mut pos = Vec::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    pos.push(Vector::xyz(sx, sy, sz));
                }
            }
        }
        let f = objective(&Vector::xyz(0.0, 0.0, 0.0), &pos, &[1.0; 8]);
        assert!((f - 8.0 * 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grad_vanishes_at_symmetric_center() {
        let g = grad_f(&Vector::xy(0.0, 0.0), &hexagon(), &[1.0; 6]);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn grad_points_back_from_outside() {
        let g = grad_f(&Vector::xy(10.0, 0.0), &hexagon(), &[1.0; 6]);
        assert!(g[0] > 0.0);
    }

    #[test]
    fn hessian_positive_definite_off_line() {
        let pos = vec![Vector::xy(0.0, 0.0), Vector::xy(1.0, 0.0), Vector::xy(0.0, 1.0)];
        let h = hessian_f(&Vector::xy(0.3, 0.3), &pos, &[1.0; 3]).unwrap();
        assert!(h.lambda_min() > 0.0);
    }

    #[test]
    fn hessian_singular_on_collinear_line() {
        let pos = vec![Vector::xy(0.0, 0.0), Vector::xy(1.0, 0.0), Vector::xy(2.0, 0.0)];
        let h = hessian_f(&Vector::xy(0.5, 0.0), &pos, &[1.0; 3]).unwrap();
        assert!(h.lambda_min().abs() < 1e-10);
    }

    #[test]
    fn hessian_rejects_beacon_point() {
        let pos = vec![Vector::xy(0.0, 0.0), Vector::xy(1.0, 0.0), Vector::xy(0.0, 1.0)];
        assert_eq!(
            hessian_f(&Vector::xy(1.0, 0.0), &pos, &[1.0; 3]),
            Err(GeomError::CoincidentBeacon(1))
        );
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let mut m = Matrix::zero(3);
        // diag(1,2,3) rotated is hard to write down; use a plain symmetric case
        let vals = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, vals[i][j]);
            }
        }
        let e = m.sym_eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
        assert!((e[2] - 5.0).abs() < 1e-12);
    }

    fn coord() -> impl Strategy<Value = f64> {
        (-1000i32..=1000i32).prop_map(|k| k as f64 / 100.0)
    }

    proptest! {
        #[test]
        fn bearing_is_unit_for_distinct_points(
            a in (coord(), coord()), b in (coord(), coord())
        ) {
            let pa = Vector::xy(a.0, a.1);
            let pb = Vector::xy(b.0, b.1);
            prop_assume!(pa.dist(&pb) > 1e-9);
            let g = bearing(&pa, &pb);
            prop_assert!((g.as_vector().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn proj_is_symmetric_idempotent_annihilating(
            a in (coord(), coord(), coord())
        ) {
            let v = Vector::xyz(a.0, a.1, a.2);
            prop_assume!(v.norm() > 1e-6);
            let g = Bearing::from_unit(v.normalized().unwrap());
            let p = proj(&g).unwrap();
            prop_assert!(p.max_abs_asymmetry() < 1e-12);
            // idempotence: P(P x) == P x on basis vectors
            for k in 0..3 {
                let mut basis = [0.0; 3];
                basis[k] = 1.0;
                let e = Vector::new(&basis);
                let once = p.mul_vec(&e);
                let twice = p.mul_vec(&once);
                prop_assert!((once - twice).norm() < 1e-10);
            }
            prop_assert!(p.mul_vec(g.as_vector()).norm() < 1e-10);
            let eigs = p.sym_eigenvalues();
            prop_assert!(eigs[0].abs() < 1e-10);
            prop_assert!((eigs[1] - 1.0).abs() < 1e-10);
            prop_assert!((eigs[2] - 1.0).abs() < 1e-10);
        }

        #[test]
        fn objective_is_translation_invariant(
            p in (coord(), coord()),
            shift in (coord(), coord()),
        ) {
            let pos = hexagon();
            let w = vec![1.0; 6];
            let pt = Vector::xy(p.0, p.1);
            let sh = Vector::xy(shift.0, shift.1);
            let shifted: Vec<Vector> = pos.iter().map(|b| *b + sh).collect();
            let f0 = objective(&pt, &pos, &w);
            let f1 = objective(&(pt + sh), &shifted, &w);
            prop_assert!((f0 - f1).abs() < 1e-12 * (1.0 + f0.abs()));
        }
    }
}
