//! Starting point for completion of a two-block EDM whose diagonal blocks
//! are fully known: embed each block, then fit the rigid motion between the
//! embeddings to the known cross distances.

use nalgebra::{DMatrix, DVector, Vector3};

use super::mds::edm_to_points;
use crate::estimators::{lstsq, MAX_ITERATIONS, STEP_TOL};
use crate::geometry::{nearest_rotation, rotation_2d, rotation_3d};
use crate::measurement::PartialEdm;

/// The 24 rotations mapping the cube onto itself (signed permutations
/// with determinant +1); a deterministic cover of SO(3) for multistart.
fn cube_rotations() -> Vec<DMatrix<f64>> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        for signs in 0..8u8 {
            let mut m = DMatrix::zeros(3, 3);
            for (row, &col) in p.iter().enumerate() {
                m[(row, col)] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

fn start_rotations(dim: usize) -> Vec<DMatrix<f64>> {
    if dim == 2 {
        (0..12)
            .map(|k| rotation_2d(std::f64::consts::TAU * k as f64 / 12.0))
            .collect()
    } else {
        cube_rotations()
    }
}

struct Registration<'a> {
    x1: &'a DMatrix<f64>,
    x2: DMatrix<f64>,
    known: &'a [(usize, usize, f64)],
}

impl Registration<'_> {
    fn residuals(&self, r: &DMatrix<f64>, t: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let dim = t.len();
        let n_ang = if dim == 2 { 1 } else { 3 };
        let mut res = DVector::zeros(self.known.len());
        let mut jac = DMatrix::zeros(self.known.len(), n_ang + dim);
        for (row, &(i, j, d)) in self.known.iter().enumerate() {
            let q = r * self.x2.column(j);
            let diff = self.x1.column(i) - &q - t;
            let n = diff.norm();
            res[row] = n - d;
            if n <= 1e-15 {
                continue;
            }
            let u = diff / n;
            if dim == 2 {
                // d(Rq)/dθ = J R q
                jac[(row, 0)] = -(u[1] * q[0] - u[0] * q[1]);
            } else {
                let qxu = Vector3::new(q[0], q[1], q[2]).cross(&Vector3::new(u[0], u[1], u[2]));
                for k in 0..3 {
                    jac[(row, k)] = -qxu[k];
                }
            }
            for k in 0..dim {
                jac[(row, n_ang + k)] = -u[k];
            }
        }
        (res, jac)
    }

    /// Gauss-Newton on SO(D) x R^D with multiplicative rotation updates.
    fn solve(&self, mut r: DMatrix<f64>, mut t: DVector<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
        let dim = t.len();
        let n_ang = if dim == 2 { 1 } else { 3 };
        let update = |r: &DMatrix<f64>, t: &DVector<f64>, step: &DVector<f64>| {
            let dr = if dim == 2 {
                rotation_2d(step[0])
            } else {
                let w = Vector3::new(step[0], step[1], step[2]);
                let angle = w.norm();
                if angle > 0.0 {
                    rotation_3d(&[w[0], w[1], w[2]], angle)
                } else {
                    DMatrix::identity(3, 3)
                }
            };
            (nearest_rotation(&(dr * r)), t + step.rows(n_ang, dim))
        };
        let (mut res, mut jac) = self.residuals(&r, &t);
        let mut cost = res.norm_squared();
        for _ in 0..MAX_ITERATIONS {
            let (mut step, _) = lstsq(&jac, &(-&res));
            if step.norm() < STEP_TOL {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let (r2, t2) = update(&r, &t, &step);
                let (res2, jac2) = self.residuals(&r2, &t2);
                let c2 = res2.norm_squared();
                if c2 <= cost {
                    (r, t, res, jac, cost) = (r2, t2, res2, jac2, c2);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.norm() < STEP_TOL {
                break;
            }
        }
        (r, t, cost)
    }
}

/// D x N points consistent with both diagonal blocks and as many known cross
/// entries as possible, or `None` when the EDM has no usable block structure.
pub(crate) fn register_blocks(partial: &PartialEdm) -> Option<DMatrix<f64>> {
    let (n, s, dim) = (partial.size(), partial.split(), partial.dim());
    if s == 0 || s >= n {
        return None;
    }
    let sq = partial.squared_with_nan();
    let x1 = edm_to_points(&sq.view((0, 0), (s, s)).into_owned(), dim)
        .ok()?
        .points;
    let x2 = edm_to_points(&sq.view((s, s), (n - s, n - s)).into_owned(), dim)
        .ok()?
        .points;
    let known: Vec<(usize, usize, f64)> = (0..s)
        .flat_map(|i| (s..n).map(move |j| (i, j)))
        .filter_map(|(i, j)| partial.squared(i, j).map(|v| (i, j - s, v.max(0.0).sqrt())))
        .collect();
    if known.is_empty() {
        return None;
    }
    let c1 = x1.column_mean();
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for flip in [false, true] {
        let mut x2f = x2.clone();
        if flip {
            x2f.row_mut(0).neg_mut();
        }
        let c2 = x2f.column_mean();
        let reg = Registration {
            x1: &x1,
            x2: x2f,
            known: &known,
        };
        for r0 in start_rotations(dim) {
            let t0 = &c1 - &r0 * &c2;
            let (r, t, cost) = reg.solve(r0, t0);
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                let mut pts = DMatrix::zeros(dim, n);
                pts.columns_mut(0, s).copy_from(&x1);
                let mut placed = &r * &reg.x2;
                for mut col in placed.column_iter_mut() {
                    col += &t;
                }
                pts.columns_mut(s, n - s).copy_from(&placed);
                best = Some((cost, pts));
            }
        }
    }
    best.map(|(_, p)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_group_has_24_proper_rotations() {
        let rs = cube_rotations();
        assert_eq!(rs.len(), 24);
        for (i, a) in rs.iter().enumerate() {
            assert!((a.determinant() - 1.0).abs() < 1e-12);
            for b in &rs[..i] {
                assert!((a - b).norm() > 0.5);
            }
        }
    }
}
