use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::lstsq;
use crate::error::{check_dim, RblError, Result};
use crate::geometry::{quarter_turn, BodyMotion, Conformation, Pose};
use crate::measurement::{AnchorSet, MaskedMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionEstimate {
    pub motion: BodyMotion,
    /// RMS range-rate residual (m/s).
    pub residual_rms: f64,
    pub observations: usize,
}

/// Linear least-squares estimate of `(ω, ṫ)` from range-rates at a known pose.
///
/// Each observed pair contributes `ṙ = uᵀ(ω × q) + uᵀṫ = ωᵀ(q × u) + uᵀṫ`
/// with `q = R c_m` and `u` the unit anchor-to-node direction (2D: the
/// angular coefficient is `uᵀ J q`).
pub fn estimate_motion(
    anchors: &AnchorSet,
    pose: &Pose,
    conf: &Conformation,
    range_rates: &MaskedMatrix,
) -> Result<MotionEstimate> {
    let dim = conf.dim();
    check_dim(dim, anchors.dim())?;
    check_dim(dim, pose.dim())?;
    check_dim(anchors.len(), range_rates.nrows())?;
    check_dim(conf.num_nodes(), range_rates.ncols())?;
    let n_ang = if dim == 2 { 1 } else { 3 };
    let unknowns = n_ang + dim;

    let q_all = pose.rotation() * conf.coords();
    let s_all = pose.transform_points(conf.coords());
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for node in 0..conf.num_nodes() {
        let q = q_all.column(node).into_owned();
        for a in 0..anchors.len() {
            let Some(rate) = range_rates.get(a, node) else {
                continue;
            };
            let diff = s_all.column(node) - anchors.positions().column(a);
            let n = diff.norm();
            if n <= 1e-12 {
                return Err(RblError::Degenerate(format!(
                    "node {node} coincides with anchor {a}"
                )));
            }
            let u = diff / n;
            let mut row = DVector::zeros(unknowns);
            if dim == 2 {
                row[0] = u.dot(&(quarter_turn() * &q));
            } else {
                let qxu = q.fixed_rows::<3>(0).cross(&u.fixed_rows::<3>(0));
                row.rows_mut(0, 3).copy_from(&qxu);
            }
            row.rows_mut(n_ang, dim).copy_from(&u);
            rows.push(row);
            rhs.push(rate);
        }
    }
    if rows.len() < unknowns {
        return Err(RblError::RankDeficient {
            rank: rows.len(),
            required: unknowns,
        });
    }
    let a = DMatrix::from_fn(rows.len(), unknowns, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let (x, rank) = lstsq(&a, &b);
    // relative rank test is too lenient for nearly-collinear geometry; recheck
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if rank < unknowns || min <= 1e-10 * max {
        return Err(RblError::RankDeficient {
            rank: sv.iter().filter(|&&s| s > 1e-10 * max).count(),
            required: unknowns,
        });
    }
    let residual = &a * &x - &b;
    let motion = BodyMotion::new(x.rows(0, n_ang).into_owned(), x.rows(n_ang, dim).into_owned())?;
    Ok(MotionEstimate {
        motion,
        residual_rms: (residual.norm_squared() / b.len() as f64).sqrt(),
        observations: b.len(),
    })
}
