//! Line-of-sight blockage by a body's convex hull.
//!
//! The hull is stored as half-spaces in the coordinates of its affine span.
//! A full-rank hull blocks a segment when the open segment runs through the
//! hull interior over a non-zero length, so segments that only touch the hull
//! at an endpoint vertex stay visible. A rank-deficient hull (flat or
//! collinear body) is treated as a slab of thickness [`SLAB_THICKNESS`].

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{check_dim, RblError, Result};
use crate::geometry::{geometric_center, PlacedBody, RANK_TOL};

/// Half-thickness of the slab used for rank-deficient hulls (meters).
pub const SLAB_THICKNESS: f64 = 1e-6;

#[derive(Debug, Clone)]
struct HalfSpace {
    normal: DVector<f64>,
    offset: f64,
}

/// Convex-hull occluder built once per body and queried per segment.
#[derive(Debug, Clone)]
pub struct Occluder {
    origin: DVector<f64>,
    /// Orthonormal basis of the hull's affine span (D x r).
    span: DMatrix<f64>,
    /// Orthonormal complement (D x (D - r)).
    complement: DMatrix<f64>,
    faces: Vec<HalfSpace>,
    scale: f64,
}

impl Occluder {
    pub fn new(body: &PlacedBody) -> Self {
        Self::from_points(body.positions())
    }

    /// `points` is D x K.
    pub fn from_points(points: &DMatrix<f64>) -> Self {
        let dim = points.nrows();
        let origin = geometric_center(points);
        let mut centered = points.clone();
        for mut c in centered.column_iter_mut() {
            c -= &origin;
        }
        let scale = points.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        // Left singular vectors give the span; pad with the complement.
        let svd = centered.clone().svd(true, false);
        let u = svd.u.expect("u requested");
        let sv = svd.singular_values;
        let max_sv = sv.iter().cloned().fold(0.0_f64, f64::max);
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        let rank = if max_sv <= 1e-12 * scale {
            0
        } else {
            order.iter().filter(|&&i| sv[i] > RANK_TOL * max_sv).count()
        };
        let basis = full_basis(&u, &order, dim);
        let span = basis.columns(0, rank).into_owned();
        let complement = basis.columns(rank, dim - rank).into_owned();
        let local = span.transpose() * &centered;
        let faces = hull_faces(&local, 1e-9 * scale);
        Self {
            origin,
            span,
            complement,
            faces,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// Rank of the hull's affine span.
    pub fn rank(&self) -> usize {
        self.span.ncols()
    }

    /// True iff the open segment `(p, q)` passes through the hull interior.
    pub fn blocks(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<bool> {
        check_dim(self.dim(), p.len())?;
        check_dim(self.dim(), q.len())?;
        if (p - q).norm() <= 1e-12 * self.scale {
            return Err(RblError::invalid("segment endpoints coincide"));
        }
        let y0 = self.span.transpose() * (p - &self.origin);
        let y1 = self.span.transpose() * (q - &self.origin);
        let seg_len = (q - p).norm();
        if self.rank() == self.dim() {
            return Ok(self.interior_length(&y0, &y1, seg_len) > 1e-9 * self.scale);
        }

        let z0 = self.complement.transpose() * (p - &self.origin);
        let z1 = self.complement.transpose() * (q - &self.origin);
        let in0 = z0.norm() <= SLAB_THICKNESS;
        let in1 = z1.norm() <= SLAB_THICKNESS;
        match (in0, in1) {
            // Segment lies inside the slab: test within the span.
            (true, true) => {
                if self.rank() == 0 {
                    Ok(false)
                } else {
                    Ok(self.interior_length(&y0, &y1, seg_len) > 1e-9 * self.scale)
                }
            }
            // Leaves the slab from one endpoint; only that endpoint touches it.
            (true, false) | (false, true) => Ok(false),
            (false, false) => {
                let dz = &z1 - &z0;
                let dz2 = dz.norm_squared();
                if dz2 <= f64::MIN_POSITIVE {
                    return Ok(false);
                }
                let lambda = -z0.dot(&dz) / dz2;
                if lambda <= 0.0 || lambda >= 1.0 {
                    return Ok(false);
                }
                if (&z0 + &dz * lambda).norm() > SLAB_THICKNESS {
                    return Ok(false);
                }
                let y = &y0 + (&y1 - &y0) * lambda;
                Ok(self.strictly_inside(&y))
            }
        }
    }

    fn strictly_inside(&self, y: &DVector<f64>) -> bool {
        let tol = 1e-10 * self.scale;
        self.faces.iter().all(|f| f.normal.dot(y) < f.offset - tol)
    }

    /// Length (meters) of the open segment inside the strict hull interior.
    fn interior_length(&self, y0: &DVector<f64>, y1: &DVector<f64>, seg_len: f64) -> f64 {
        let tol = 1e-10 * self.scale;
        let d = y1 - y0;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for f in &self.faces {
            let a = f.normal.dot(&d);
            let b = f.offset - tol - f.normal.dot(y0);
            if a.abs() <= 1e-15 * self.scale {
                if b <= 0.0 {
                    return 0.0;
                }
            } else if a > 0.0 {
                hi = hi.min(b / a);
            } else {
                lo = lo.max(b / a);
            }
            if hi <= lo {
                return 0.0;
            }
        }
        (hi - lo) * seg_len
    }
}

fn full_basis(u: &DMatrix<f64>, order: &[usize], dim: usize) -> DMatrix<f64> {
    let mut basis = DMatrix::zeros(dim, dim);
    for (slot, &i) in order.iter().enumerate() {
        basis.set_column(slot, &u.column(i));
    }
    // svd(u) of a D x K matrix with K < D returns only K columns; complete it.
    for slot in order.len()..dim {
        let mut best = DVector::zeros(dim);
        for axis in 0..dim {
            let mut v = DVector::zeros(dim);
            v[axis] = 1.0;
            for prev in 0..slot {
                let b = basis.column(prev).into_owned();
                v -= &b * b.dot(&v);
            }
            if v.norm() > best.norm() {
                best = v;
            }
        }
        basis.set_column(slot, &(best.normalize()));
    }
    basis
}

/// Outward half-spaces `n·y <= b` of the convex hull of the columns of `pts`.
fn hull_faces(pts: &DMatrix<f64>, tol: f64) -> Vec<HalfSpace> {
    match pts.nrows() {
        0 => Vec::new(),
        1 => {
            let max = pts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = pts.iter().cloned().fold(f64::INFINITY, f64::min);
            vec![
                HalfSpace {
                    normal: DVector::from_element(1, 1.0),
                    offset: max,
                },
                HalfSpace {
                    normal: DVector::from_element(1, -1.0),
                    offset: -min,
                },
            ]
        }
        2 => polygon_faces(pts),
        _ => polytope_faces(pts, tol),
    }
}

fn cross2(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain, counter-clockwise.
fn polygon_faces(pts: &DMatrix<f64>) -> Vec<HalfSpace> {
    let mut p: Vec<(f64, f64)> = pts.column_iter().map(|c| (c[0], c[1])).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &pt in iter {
            while hull.len() >= start + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0.0 {
                hull.pop();
            }
            hull.push(pt);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n)
        .map(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len = dx.hypot(dy);
            let normal = DVector::from_vec(vec![dy / len, -dx / len]);
            let offset = normal[0] * a.0 + normal[1] * a.1;
            HalfSpace { normal, offset }
        })
        .collect()
}

/// Facets of a 3D hull by exhaustive supporting-plane search. O(K^4), which
/// is fine for sensor bodies with a few dozen nodes.
fn polytope_faces(pts: &DMatrix<f64>, tol: f64) -> Vec<HalfSpace> {
    let k = pts.ncols();
    let p: Vec<Vector3<f64>> = pts
        .column_iter()
        .map(|c| Vector3::new(c[0], c[1], c[2]))
        .collect();
    let mut faces: Vec<(Vector3<f64>, f64)> = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            for l in (j + 1)..k {
                let n = (p[j] - p[i]).cross(&(p[l] - p[i]));
                let norm = n.norm();
                if norm <= 1e-12 {
                    continue;
                }
                let n = n / norm;
                let b = n.dot(&p[i]);
                let (mut above, mut below) = (false, false);
                for q in &p {
                    let s = n.dot(q) - b;
                    above |= s > tol;
                    below |= s < -tol;
                    if above && below {
                        break;
                    }
                }
                let candidate = match (above, below) {
                    (false, _) => (n, b),
                    (true, false) => (-n, -b),
                    (true, true) => continue,
                };
                let duplicate = faces
                    .iter()
                    .any(|(m, c)| m.dot(&candidate.0) > 1.0 - 1e-9 && (c - candidate.1).abs() <= tol);
                if !duplicate {
                    faces.push(candidate);
                }
            }
        }
    }
    faces
        .into_iter()
        .map(|(n, b)| HalfSpace {
            normal: DVector::from_vec(vec![n.x, n.y, n.z]),
            offset: b,
        })
        .collect()
}

/// True iff the open segment `(p, q)` crosses the interior of the occluder's
/// convex hull.
pub fn line_of_sight_blocked(p: &DVector<f64>, q: &DVector<f64>, occluder: &PlacedBody) -> Result<bool> {
    Occluder::new(occluder).blocks(p, q)
}
