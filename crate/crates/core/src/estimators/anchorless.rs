use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::fit_pose_procrustes;
use crate::completion::edm_to_points;
use crate::error::{check_dim, RblError, Result};
use crate::geometry::{Conformation, Pose};
use crate::measurement::{assemble_two_body_edm, MaskedMatrix};

/// Pose of body 2 expressed in body 1's frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativePoseEstimate {
    pub pose: Pose,
    /// Geometric center of body 2 minus that of body 1, in body 1's frame.
    #[serde(with = "crate::geometry::serde_dvector")]
    pub center_offset: DVector<f64>,
    /// RMS of the cross-distance residuals (meters).
    pub residual_rms: f64,
    /// False when both embedding chiralities fit equally well.
    pub reflection_resolved: bool,
    pub rotation_unique: bool,
}

/// Relative pose of body 2 with respect to body 1 from complete cross
/// distances (K1 x K2, meters).
pub fn relative_pose_anchorless(
    conf1: &Conformation,
    conf2: &Conformation,
    cross: &MaskedMatrix,
) -> Result<RelativePoseEstimate> {
    if !cross.is_complete() {
        return Err(RblError::invalid(
            "cross distances are incomplete; complete the EDM first",
        ));
    }
    let edm = assemble_two_body_edm(conf1, conf2, cross)?;
    relative_pose_from_edm(conf1, conf2, edm.squared_with_nan())
}

struct Candidate {
    pose: Pose,
    score: f64,
    cross_rms: f64,
    rotation_unique: bool,
}

/// Same as [`relative_pose_anchorless`] but from a complete squared EDM
/// over `[body 1 | body 2]`, e.g. the output of completion.
pub fn relative_pose_from_edm(
    conf1: &Conformation,
    conf2: &Conformation,
    squared: &DMatrix<f64>,
) -> Result<RelativePoseEstimate> {
    let dim = conf1.dim();
    check_dim(dim, conf2.dim())?;
    let (k1, k2) = (conf1.num_nodes(), conf2.num_nodes());
    check_dim(k1 + k2, squared.nrows())?;
    check_dim(k1 + k2, squared.ncols())?;
    let emb = edm_to_points(squared, dim)?;
    // Gram eigenvalues, not coordinates: the square root in MDS would
    // inflate round-off in a missing direction
    let top = emb.eigenvalues[0].max(0.0);
    let rank = emb
        .eigenvalues
        .iter()
        .take(dim)
        .filter(|&&l| l > 1e-9 * top)
        .count();
    if rank < dim {
        return Err(RblError::RankDeficient { rank, required: dim });
    }

    let scale = squared.abs().max().sqrt().max(1.0);
    let mut candidates = Vec::with_capacity(2);
    for flip in [false, true] {
        let mut y = emb.points.clone();
        if flip {
            y.row_mut(0).neg_mut();
        }
        let y1 = y.columns(0, k1).into_owned();
        let y2 = y.columns(k1, k2).into_owned();
        let fit1 = fit_pose_procrustes(conf1, &y1, None)?;
        // body-2 nodes expressed in body 1's frame
        let z2 = fit1.pose.inverse().transform_points(&y2);
        let fit2 = fit_pose_procrustes(conf2, &z2, None)?;
        let placed2 = fit2.pose.transform_points(conf2.coords());
        let mut cross_sq = 0.0;
        for i in 0..k1 {
            for j in 0..k2 {
                let d = (conf1.coords().column(i) - placed2.column(j)).norm();
                cross_sq += (d - squared[(i, k1 + j)].max(0.0).sqrt()).powi(2);
            }
        }
        let cross_rms = (cross_sq / (k1 * k2) as f64).sqrt();
        let align =
            fit1.stage2_residual_rms.powi(2) * k1 as f64 + fit2.stage2_residual_rms.powi(2) * k2 as f64;
        candidates.push(Candidate {
            pose: fit2.pose,
            score: (align / (k1 + k2) as f64 + cross_rms.powi(2)).sqrt(),
            cross_rms,
            rotation_unique: fit2.rotation_unique,
        });
    }
    let tie = (candidates[0].score - candidates[1].score).abs() <= 1e-9 * scale;
    let best = if candidates[1].score < candidates[0].score {
        candidates.swap_remove(1)
    } else {
        candidates.swap_remove(0)
    };
    let center_offset = best.pose.transform_point(&conf2.center()) - conf1.center();
    Ok(RelativePoseEstimate {
        pose: best.pose,
        center_offset,
        residual_rms: best.cross_rms,
        reflection_resolved: !tie,
        rotation_unique: best.rotation_unique,
    })
}
