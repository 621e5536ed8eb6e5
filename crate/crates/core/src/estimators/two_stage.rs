use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::multilaterate;
use super::procrustes::{fit_pose_procrustes, PoseEstimate};
use crate::error::{check_dim, RblError, Result};
use crate::geometry::Conformation;
use crate::measurement::{AnchorSet, MaskedRangeMatrix};

/// Per-node weighting in the Procrustes stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `1 / (stage-1 residual variance + 1e-12)`.
    #[default]
    InverseVariance,
    /// Every localized node counts equally (plain least squares).
    Uniform,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOptions {
    pub weighting: Weighting,
}

const WEIGHT_EPS: f64 = 1e-12;

/// Two-stage rigid body localization.
///
/// Stage 1 multilaterates every node with at least D+1 observed ranges;
/// other nodes are dropped. Stage 2 fits the pose to the localized nodes with
/// a weighted Procrustes solve.
pub fn rbl_two_stage(
    anchors: &AnchorSet,
    ranges: &MaskedRangeMatrix,
    conf: &Conformation,
    options: &TwoStageOptions,
) -> Result<PoseEstimate> {
    let dim = conf.dim();
    check_dim(dim, anchors.dim())?;
    check_dim(anchors.len(), ranges.nrows())?;
    check_dim(conf.num_nodes(), ranges.ncols())?;
    let k = conf.num_nodes();

    let mut points = DMatrix::zeros(dim, k);
    let mut weights = vec![0.0; k];
    let mut ambiguous = Vec::new();
    let mut sq_sum = 0.0;
    let mut obs_sum = 0usize;
    let mut iterations = 0;
    let mut most_observed = 0;
    for node in 0..k {
        let col = ranges.column(node);
        let n_obs = col.iter().flatten().count();
        most_observed = most_observed.max(n_obs);
        if n_obs < dim + 1 {
            continue;
        }
        let fix = multilaterate(anchors, &col, None)?;
        if fix.ambiguous {
            ambiguous.push(node);
        }
        iterations = iterations.max(fix.iterations);
        sq_sum += fix.residual_rms.powi(2) * n_obs as f64;
        obs_sum += n_obs;
        points.set_column(node, &fix.position);
        weights[node] = match options.weighting {
            Weighting::InverseVariance => 1.0 / (fix.residual_rms.powi(2) + WEIGHT_EPS),
            Weighting::Uniform => 1.0,
        };
    }
    if obs_sum == 0 {
        return Err(RblError::TooFewObservations {
            needed: dim + 1,
            available: most_observed,
        });
    }

    let mut est = fit_pose_procrustes(conf, &points, Some(&weights))?;
    est.stage1_residual_rms = (sq_sum / obs_sum as f64).sqrt();
    est.iterations_used = iterations;
    est.ambiguous_nodes = ambiguous;
    Ok(est)
}
