use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::multilateration::{linearized_fix, mirror_candidates, observed, range_model};
use super::{gauss_newton, lstsq, matrix_rank, PointFix};
use crate::error::{check_dim, RblError, Result};
use crate::measurement::{wrap_angle, AnchorSet, Bearing};

/// Residual scaling for the stacked range/angle problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridOptions {
    /// Range noise standard deviation (meters).
    pub range_sigma: f64,
    /// Angle noise standard deviation (radians).
    pub angle_sigma: f64,
    pub initial_guess: Option<Vec<f64>>,
}

impl Default for HybridOptions {
    fn default() -> Self {
        Self {
            range_sigma: 0.1,
            angle_sigma: 1f64.to_radians(),
            initial_guess: None,
        }
    }
}

struct Problem<'a> {
    anchors: &'a AnchorSet,
    ranges: Vec<(usize, f64)>,
    bearings: Vec<(usize, Bearing)>,
    sr: f64,
    sa: f64,
}

impl Problem<'_> {
    fn model(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let dim = x.len();
        let three_d = dim == 3;
        let rows = self.ranges.len() + self.bearings.len() * if three_d { 2 } else { 1 };
        let mut r = DVector::zeros(rows);
        let mut j = DMatrix::zeros(rows, dim);
        let mut row = 0;
        for &(i, d) in &self.ranges {
            let diff = x - self.anchors.anchor(i);
            let n = diff.norm();
            r[row] = (n - d) / self.sr;
            if n > 1e-15 {
                j.set_row(row, &(diff.transpose() / (n * self.sr)));
            }
            row += 1;
        }
        for (i, b) in &self.bearings {
            let diff = x - self.anchors.anchor(*i);
            let rho2 = diff[0] * diff[0] + diff[1] * diff[1];
            let az = diff[1].atan2(diff[0]);
            r[row] = wrap_angle(az - b.azimuth) / self.sa;
            if rho2 > 1e-24 {
                j[(row, 0)] = -diff[1] / rho2 / self.sa;
                j[(row, 1)] = diff[0] / rho2 / self.sa;
            }
            row += 1;
            if three_d {
                let rho = rho2.sqrt();
                let el = diff[2].atan2(rho);
                r[row] = (el - b.elevation.unwrap_or(0.0)) / self.sa;
                let n2 = rho2 + diff[2] * diff[2];
                if rho > 1e-12 {
                    j[(row, 0)] = -diff[2] * diff[0] / (rho * n2) / self.sa;
                    j[(row, 1)] = -diff[2] * diff[1] / (rho * n2) / self.sa;
                }
                if n2 > 1e-24 {
                    j[(row, 2)] = rho / n2 / self.sa;
                }
                row += 1;
            }
        }
        (r, j)
    }

    /// Linear fix from bearing lines (and range-bearing pairs where both exist).
    fn bearing_start(&self, dim: usize) -> Option<DVector<f64>> {
        if self.bearings.is_empty() {
            return None;
        }
        let mut rows: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::new();
        for (i, b) in &self.bearings {
            let a = self.anchors.anchor(*i);
            let u = b.unit_vector();
            let p = DMatrix::identity(dim, dim) - &u * u.transpose();
            let rhs = &p * &a;
            rows.push((p, rhs));
            if let Some(&(_, d)) = self.ranges.iter().find(|(ri, _)| ri == i) {
                rows.push((DMatrix::identity(dim, dim), a + u * d));
            }
        }
        let n = rows.len() * dim;
        let mut a = DMatrix::zeros(n, dim);
        let mut b = DVector::zeros(n);
        for (k, (m, rhs)) in rows.iter().enumerate() {
            a.view_mut((k * dim, 0), (dim, dim)).copy_from(m);
            b.rows_mut(k * dim, dim).copy_from(rhs);
        }
        let (x, rank) = lstsq(&a, &b);
        (rank == dim).then_some(x)
    }
}

/// Point fix from any mix of ranges and angles-of-arrival.
///
/// Gauss-Newton on `[range residuals / σ_r ; wrapped angle residuals / σ_θ]`,
/// started from every available closed-form guess (linearized ranges, both
/// range mirrors, bearing-line intersection, caller guess); the lowest final
/// cost wins.
pub fn localize_point_hybrid(
    anchors: &AnchorSet,
    ranges: &[Option<f64>],
    bearings: &[Option<Bearing>],
    options: &HybridOptions,
) -> Result<PointFix> {
    let dim = anchors.dim();
    check_dim(anchors.len(), bearings.len())?;
    if !(options.range_sigma > 0.0 && options.angle_sigma > 0.0) {
        return Err(RblError::invalid("hybrid sigmas must be positive"));
    }
    let obs = observed(anchors, ranges)?;
    let problem = Problem {
        anchors,
        ranges: ranges
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|d| (i, d)))
            .collect(),
        bearings: bearings
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|b| (i, b)))
            .collect(),
        sr: options.range_sigma,
        sa: options.angle_sigma,
    };
    for (_, b) in &problem.bearings {
        if b.elevation.is_some() != (dim == 3) {
            return Err(RblError::invalid(
                "bearing elevation must be present exactly in 3D",
            ));
        }
    }
    let scalar_count = problem.ranges.len() + problem.bearings.len() * (dim - 1);
    if scalar_count < dim {
        return Err(RblError::TooFewObservations {
            needed: dim,
            available: scalar_count,
        });
    }

    let mut starts = Vec::new();
    let n_r = obs.ranges.len();
    let mut mirrored = false;
    if n_r >= dim {
        let (lin, rank, _) = linearized_fix(&obs, dim);
        if rank >= dim {
            starts.push(lin);
        } else if rank + 1 == dim {
            starts.extend(mirror_candidates(&obs, dim));
            mirrored = true;
        }
    }
    starts.extend(problem.bearing_start(dim));
    if let Some(g) = &options.initial_guess {
        check_dim(dim, g.len())?;
        starts.push(DVector::from_column_slice(g));
    }
    if starts.is_empty() {
        // e.g. one range and one 2D bearing from different anchors
        let c = nalgebra::DVector::from_iterator(dim, (0..dim).map(|r| anchors.positions().row(r).mean()));
        starts.push(c);
    }

    let mut fits: Vec<_> = starts
        .into_iter()
        .map(|s| gauss_newton(s, |x| problem.model(x)))
        .collect();
    fits.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    let best = fits.remove(0);

    let (_, jac) = problem.model(&best.x);
    if matrix_rank(&jac) < dim {
        return Err(RblError::Degenerate(
            "ranges and angles do not fix the point".into(),
        ));
    }

    let tie = |c: f64| (c - best.cost).abs() <= 1e-12 * (1.0 + best.cost);
    let rivals: Vec<DVector<f64>> = fits
        .into_iter()
        .filter(|f| tie(f.cost) && (&f.x - &best.x).norm() > 1e-6 * (1.0 + best.x.norm()))
        .map(|f| f.x)
        .collect();
    let ambiguous = !rivals.is_empty() || (mirrored && problem.bearings.is_empty());
    let mut candidates = vec![best.x.clone()];
    candidates.extend(rivals);

    let residual_rms = if n_r > 0 {
        (range_model(&obs, &best.x, 1.0).0.norm_squared() / n_r as f64).sqrt()
    } else {
        0.0
    };
    Ok(PointFix {
        position: best.x,
        candidates,
        residual_rms,
        iterations: best.iterations,
        converged: best.converged,
        ambiguous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::multilaterate;

    fn bearing(from: &DVector<f64>, to: &DVector<f64>) -> Option<Bearing> {
        Some(Bearing::of(&(to - from)).unwrap())
    }

    #[test]
    fn range_and_azimuth_from_one_anchor() {
        let a = AnchorSet::from_points(2, &[vec![1.0, 2.0]]).unwrap();
        let truth = DVector::from_vec(vec![4.0, 6.0]);
        let d = (&truth - a.anchor(0)).norm();
        let fix = localize_point_hybrid(
            &a,
            &[Some(d)],
            &[bearing(&a.anchor(0), &truth)],
            &HybridOptions::default(),
        )
        .unwrap();
        assert!((fix.position - truth).norm() < 1e-9);
        assert!(!fix.ambiguous);
    }

    #[test]
    fn ranges_only_matches_multilateration() {
        let a = AnchorSet::cube(3, &DVector::zeros(3), 20.0).unwrap();
        let truth = DVector::from_vec(vec![2.0, -1.0, 3.0]);
        let r: Vec<_> = (0..a.len())
            .map(|i| Some((a.anchor(i) - &truth).norm() + 0.01 * (i as f64 - 3.0)))
            .collect();
        let none = vec![None; a.len()];
        let h = localize_point_hybrid(&a, &r, &none, &HybridOptions::default()).unwrap();
        let m = multilaterate(&a, &r, None).unwrap();
        assert!((h.position - m.position).norm() < 1e-9);
    }

    #[test]
    fn angle_breaks_range_mirror() {
        // both points are at the same ranges from the two anchors
        let a = AnchorSet::from_points(2, &[vec![0.0, 0.0], vec![4.0, 0.0]]).unwrap();
        let truth = DVector::from_vec(vec![1.0, -2.0]);
        let mirror = DVector::from_vec(vec![1.0, 2.0]);
        let r: Vec<_> = (0..2).map(|i| Some((a.anchor(i) - &truth).norm())).collect();
        for (i, ri) in r.iter().enumerate() {
            assert!(((a.anchor(i) - &mirror).norm() - ri.unwrap()).abs() < 1e-12);
        }
        let b = vec![bearing(&a.anchor(0), &truth), None];
        let fix = localize_point_hybrid(&a, &r, &b, &HybridOptions::default()).unwrap();
        assert!((fix.position - truth).norm() < 1e-9);
        assert!(!fix.ambiguous);
    }

    #[test]
    fn bearings_only_triangulate_in_3d() {
        let a = AnchorSet::from_points(
            3,
            &[vec![0.0, 0.0, 0.0], vec![10.0, 0.0, 0.0], vec![0.0, 10.0, 5.0]],
        )
        .unwrap();
        let truth = DVector::from_vec(vec![3.0, 4.0, 2.0]);
        let b: Vec<_> = (0..3).map(|i| bearing(&a.anchor(i), &truth)).collect();
        let fix = localize_point_hybrid(&a, &[None, None, None], &b, &HybridOptions::default()).unwrap();
        assert!((fix.position - truth).norm() < 1e-9);
    }

    #[test]
    fn single_bearing_is_unobservable() {
        let a = AnchorSet::from_points(2, &[vec![0.0, 0.0], vec![5.0, 0.0]]).unwrap();
        let b = vec![
            Some(Bearing {
                azimuth: 0.3,
                elevation: None,
            }),
            None,
        ];
        let err = localize_point_hybrid(&a, &[None, None], &b, &HybridOptions::default());
        assert!(err.is_err());
    }
}
