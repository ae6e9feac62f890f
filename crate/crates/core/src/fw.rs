//! Fermat-Weber point solvers, independent of any control law.
//!
//! Three routes to the same point keep each other honest: an existence test
//! on the first-order optimality margins, the classical fixed-point
//! iteration, and a refining grid search used as a cross-validation oracle.

use thiserror::Error;

use crate::vecgeom::{bearing, objective, Vector};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// An iterate closer than this to a beacon triggers the escape perturbation.
const BEACON_SNAP: f64 = 1e-9;
const ESCAPE_STEP: f64 = 1e-6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FwError {
    #[error("beacons {0} and {1} are duplicates")]
    DuplicateBeacons(usize, usize),
    #[error("need at least 3 beacons, got {0}")]
    TooFewBeacons(usize),
}

/// Result of a Fermat-Weber solve.
#[derive(Clone, Copy, Debug)]
pub struct FwSolution {
    pub point: Vector,
    /// `‖Σ ωᵢ gᵢ‖` evaluated at `point`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// First-order optimality margins evaluated at every beacon.
#[derive(Clone, Debug, PartialEq)]
pub struct ExistenceReport {
    /// `‖Σ_{i≠k} ωᵢ gᵢ‖ - ω_k` at `p = p_k`, one entry per beacon.
    pub margins: Vec<f64>,
    /// True iff every margin is strictly positive, i.e. the minimum is
    /// interior and distinct from all beacons.
    pub interior_minimum: bool,
}

/// `‖Σ ωᵢ gᵢ(p)‖`, using the zero-bearing convention at beacons.
pub fn residual(p: &Vector, positions: &[Vector], weights: &[f64]) -> f64 {
    let mut s = Vector::zero(p.dim());
    for (pi, w) in positions.iter().zip(weights) {
        s = s.scaled_add(*w, bearing(p, pi).as_vector());
    }
    s.norm()
}

/// Evaluates the interior-minimum condition at every beacon.
pub fn existence_check(positions: &[Vector], weights: &[f64]) -> Result<ExistenceReport, FwError> {
    if positions.len() < 3 {
        return Err(FwError::TooFewBeacons(positions.len()));
    }
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if positions[i].dist(&positions[j]) < BEACON_SNAP {
                return Err(FwError::DuplicateBeacons(i, j));
            }
        }
    }
    let margins: Vec<f64> = positions
        .iter()
        .enumerate()
        .map(|(k, pk)| {
            let mut s = Vector::zero(pk.dim());
            for (i, (pi, w)) in positions.iter().zip(weights).enumerate() {
                if i != k {
                    s = s.scaled_add(*w, bearing(pk, pi).as_vector());
                }
            }
            s.norm() - weights[k]
        })
        .collect();
    let interior_minimum = margins.iter().all(|m| *m > 0.0);
    Ok(ExistenceReport {
        margins,
        interior_minimum,
    })
}

/// Weighted centroid, the default starting point.
pub fn weighted_centroid(positions: &[Vector], weights: &[f64]) -> Vector {
    let wsum: f64 = weights.iter().sum();
    let mut c = Vector::zero(positions[0].dim());
    for (pi, w) in positions.iter().zip(weights) {
        c = c.scaled_add(w / wsum, pi);
    }
    c
}

/// Fixed-point iteration `p ← (Σ ωᵢ/dᵢ)⁻¹ Σ (ωᵢ/dᵢ) pᵢ` run until the
/// optimality residual drops below `tol`.
///
/// An iterate that lands on a beacon would stall there; it is nudged by a
/// small step along the pull of the remaining beacons and iteration resumes.
pub fn weiszfeld(
    positions: &[Vector],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
    start: &Vector,
) -> FwSolution {
    let mut x = *start;
    let mut r = residual(&x, positions, weights);
    for it in 0..max_iter {
        if let Some(k) = positions
            .iter()
            .position(|pi| x.dist(pi) < BEACON_SNAP)
        {
            x = x.scaled_add(ESCAPE_STEP, &escape_direction(&x, positions, weights, k));
            r = residual(&x, positions, weights);
            continue;
        }
        if r <= tol {
            return FwSolution {
                point: x,
                residual: r,
                iterations: it,
                converged: true,
            };
        }
        let mut num = Vector::zero(x.dim());
        let mut den = 0.0;
        for (pi, w) in positions.iter().zip(weights) {
            let c = w / x.dist(pi);
            num = num.scaled_add(c, pi);
            den += c;
        }
        x = num * (1.0 / den);
        r = residual(&x, positions, weights);
    }
    FwSolution {
        point: x,
        residual: r,
        iterations: max_iter,
        converged: r <= tol,
    }
}

/// Default-parameter solve: tolerance 1e-10, 10 000 iterations, centroid start.
pub fn weiszfeld_default(positions: &[Vector], weights: &[f64]) -> FwSolution {
    weiszfeld(
        positions,
        weights,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
        &weighted_centroid(positions, weights),
    )
}

fn escape_direction(x: &Vector, positions: &[Vector], weights: &[f64], skip: usize) -> Vector {
    let mut s = Vector::zero(x.dim());
    for (i, (pi, w)) in positions.iter().zip(weights).enumerate() {
        if i != skip {
            s = s.scaled_add(*w, bearing(x, pi).as_vector());
        }
    }
    match s.normalized() {
        Some(u) => u,
        None => {
            let mut axis = vec![0.0; x.dim()];
            axis[0] = 1.0;
            Vector::new(&axis)
        }
    }
}

/// Grid search over `[lo, hi]`, repeatedly halving the spacing around the
/// incumbent until it reaches `1e-7` (or `refinements` halvings ran out).
///
/// This is deliberately independent of [`weiszfeld`] so the two can
/// cross-validate each other.
pub fn brute_force(
    positions: &[Vector],
    weights: &[f64],
    lo: &Vector,
    hi: &Vector,
    coarse_step: f64,
    refinements: usize,
) -> FwSolution {
    let dim = lo.dim();
    let mut best = *lo;
    let mut best_f = f64::INFINITY;
    let mut evals = 0usize;

    let grid = |center: &Vector, half_span: f64, step: f64,
                    best: &mut Vector, best_f: &mut f64, evals: &mut usize| {
        let n = (2.0 * half_span / step).round() as usize;
        let mut idx = vec![0usize; dim];
        loop {
            let mut comps = [0.0; 3];
            for (k, &i) in idx.iter().enumerate() {
                comps[k] = center[k] - half_span + i as f64 * step;
            }
            let p = Vector::new(&comps[..dim]);
            let f = objective(&p, positions, weights);
            *evals += 1;
            if f < *best_f {
                *best_f = f;
                *best = p;
            }
            // odometer increment
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] <= n {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == dim {
                    return;
                }
            }
        }
    };

    // coarse pass over the requested box
    let span = (0..dim)
        .map(|k| hi[k] - lo[k])
        .fold(0.0f64, f64::max)
        .max(coarse_step);
    let center = (*lo + *hi) * 0.5;
    grid(&center, span / 2.0, coarse_step, &mut best, &mut best_f, &mut evals);

    // refinement passes: margin of 8 steps each side covers the coarse
    // localization error of a convex objective
    let mut step = coarse_step / 2.0;
    for _ in 0..refinements {
        let center = best;
        grid(&center, 8.0 * step, step, &mut best, &mut best_f, &mut evals);
        if step <= 1e-7 {
            break;
        }
        step /= 2.0;
    }

    FwSolution {
        point: best,
        residual: residual(&best, positions, weights),
        iterations: evals,
        converged: step <= 1e-7,
    }
}

/// Padded bounding box of the beacons, which always contains the optimum.
pub fn bounding_box(positions: &[Vector]) -> (Vector, Vector) {
    let dim = positions[0].dim();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in positions {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in dim..3 {
        lo[k] = 0.0;
        hi[k] = 0.0;
    }
    (
        Vector::new(&lo[..dim]).map(|c| c - 1e-3),
        Vector::new(&hi[..dim]).map(|c| c + 1e-3),
    )
}

/// Convenience oracle: brute force over the beacon bounding box.
pub fn brute_force_auto(positions: &[Vector], weights: &[f64]) -> FwSolution {
    let (lo, hi) = bounding_box(positions);
    let span = (0..lo.dim()).map(|k| hi[k] - lo[k]).fold(0.0f64, f64::max);
    brute_force(positions, weights, &lo, &hi, span / 40.0, 40)
}

/// True when `p` lies inside the padded beacon bounding box, within `tol`.
pub fn in_bounding_box(p: &Vector, positions: &[Vector], tol: f64) -> bool {
    let (lo, hi) = bounding_box(positions);
    (0..p.dim()).all(|k| p[k] >= lo[k] - tol && p[k] <= hi[k] + tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hexagon() -> (Vec<Vector>, Vec<f64>) {
        let pos = [[1., 1.], [0., 2.], [-1., 1.], [-1., -1.], [0., -2.], [1., -1.]]
            .iter()
            .map(|c| Vector::new(c))
            .collect();
        (pos, vec![1.0; 6])
    }

    fn cube() -> (Vec<Vector>, Vec<f64>) {
        let mut pos = Vec::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    pos.push(Vector::xyz(sx, sy, sz));
                }
            }
        }
        (pos, vec![1.0; 8])
    }

    #[test]
    fn collinear_middle_beacon_margin() {
        let pos = vec![Vector::xy(0., 0.), Vector::xy(1., 0.), Vector::xy(2., 0.)];
        let rep = existence_check(&pos, &[1.0; 3]).unwrap();
        assert!((rep.margins[1] - (-1.0)).abs() < 1e-12);
        assert!(!rep.interior_minimum);
    }

    #[test]
    fn hexagon_and_cube_are_interior() {
        let (pos, w) = hexagon();
        assert!(existence_check(&pos, &w).unwrap().interior_minimum);
        let (pos, w) = cube();
        assert!(existence_check(&pos, &w).unwrap().interior_minimum);
    }

    #[test]
    fn duplicates_rejected() {
        let pos = vec![Vector::xy(0., 0.), Vector::xy(0., 0.), Vector::xy(1., 1.)];
        assert_eq!(
            existence_check(&pos, &[1.0; 3]),
            Err(FwError::DuplicateBeacons(0, 1))
        );
    }

    #[test]
    fn weiszfeld_finds_hexagon_center() {
        let (pos, w) = hexagon();
        let sol = weiszfeld_default(&pos, &w);
        assert!(sol.converged);
        assert!(sol.point.norm() < 1e-9);
        assert!(sol.residual <= DEFAULT_TOL);
    }

    #[test]
    fn weiszfeld_finds_cube_center() {
        let (pos, w) = cube();
        let sol = weiszfeld_default(&pos, &w);
        assert!(sol.converged);
        assert!(sol.point.norm() < 1e-9);
    }

    #[test]
    fn weiszfeld_matches_analytic_triangle_point() {
        // equilateral 120-degree condition for the unit right triangle
        let pos = vec![Vector::xy(0., 0.), Vector::xy(1., 0.), Vector::xy(0., 1.)];
        let w = vec![1.0; 3];
        let sol = weiszfeld_default(&pos, &w);
        let expect = (3.0 - 3.0f64.sqrt()) / 6.0;
        assert!((sol.point[0] - expect).abs() < 1e-9);
        assert!((sol.point[1] - expect).abs() < 1e-9);

        let bf = brute_force_auto(&pos, &w);
        assert!(bf.point.dist(&sol.point) < 1e-5);
    }

    #[test]
    fn weiszfeld_escapes_beacon_start() {
        let pos = vec![
            Vector::xy(0., 0.),
            Vector::xy(1., 0.),
            Vector::xy(0., 1.),
            Vector::xy(1., 1.),
        ];
        let w = vec![1.0; 4];
        let sol = weiszfeld(&pos, &w, DEFAULT_TOL, DEFAULT_MAX_ITER, &pos[2]);
        assert!(sol.converged);
        assert!((sol.point - Vector::xy(0.5, 0.5)).norm() < 1e-8);
    }

    #[test]
    fn weight_scaling_leaves_point_unchanged() {
        let (pos, w) = hexagon();
        let w2: Vec<f64> = w.iter().map(|x| 7.5 * x).collect();
        let a = weiszfeld_default(&pos, &w);
        let b = weiszfeld_default(&pos, &w2);
        assert!(a.point.dist(&b.point) < 1e-9);
    }

    #[test]
    fn residual_at_beacon_uses_zero_convention() {
        let (pos, w) = hexagon();
        let r = residual(&pos[0], &pos, &w);
        let mut s = Vector::zero(2);
        for (i, (pi, wi)) in pos.iter().zip(&w).enumerate() {
            if i != 0 {
                s = s.scaled_add(*wi, bearing(&pos[0], pi).as_vector());
            }
        }
        assert!((r - s.norm()).abs() < 1e-15);
    }

    #[test]
    fn brute_force_hexagon_and_cube() {
        let (pos, w) = hexagon();
        let sol = brute_force_auto(&pos, &w);
        assert!(sol.point.norm() < 1e-6);
        let (pos, w) = cube();
        let sol = brute_force_auto(&pos, &w);
        assert!(sol.point.norm() < 1e-6);
    }
}
