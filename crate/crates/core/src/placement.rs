//! Anchor placement by frame-potential minimization, and Monte-Carlo
//! evaluation of a placement through the two-stage estimator.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, RblError, Result};
use crate::estimators::{rbl_two_stage, TwoStageOptions};
use crate::geometry::{apply_pose, check_supported_dim, columns_to_rows, random_pose, Conformation};
use crate::measurement::{simulate_ranges, AnchorSet, VisibilityModel};
use crate::rng::derived_stream;
use crate::stats::RmseSummary;

/// Directions must have unit norm within this tolerance.
pub const UNIT_TOL: f64 = 1e-9;

/// `Σ_i Σ_j <u_i, u_j>²` for the columns of `directions` (D x M).
/// At least `M²/D`, with equality exactly for unit-norm tight frames.
pub fn frame_potential(directions: &DMatrix<f64>) -> Result<f64> {
    for (i, u) in directions.column_iter().enumerate() {
        let n = u.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(RblError::invalid(format!(
                "direction {i} has norm {n}, expected 1"
            )));
        }
    }
    Ok(potential(directions))
}

fn potential(u: &DMatrix<f64>) -> f64 {
    (u.transpose() * u).norm_squared()
}

/// Lower bound of the frame potential of M unit vectors in R^D.
pub fn frame_potential_bound(num: usize, dim: usize) -> f64 {
    let m = num as f64;
    if num >= dim {
        m * m / dim as f64
    } else {
        // an orthonormal set is the best that fewer than D vectors can do
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementProblem {
    pub num_anchors: usize,
    pub dim: usize,
    pub target_center: Vec<f64>,
    /// Anchors sit on the sphere (circle) of this radius around the target (m).
    pub anchor_radius: f64,
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    20
}

impl PlacementProblem {
    pub fn validate(&self) -> Result<()> {
        check_supported_dim(self.dim)?;
        check_dim(self.dim, self.target_center.len())?;
        if self.num_anchors == 0 {
            return Err(RblError::invalid("need at least one anchor"));
        }
        if !(self.anchor_radius > 0.0 && self.anchor_radius.is_finite()) {
            return Err(RblError::invalid("anchor radius must be positive"));
        }
        if self.restarts == 0 {
            return Err(RblError::invalid("need at least one restart"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    /// D x M anchor positions.
    pub positions: DMatrix<f64>,
    /// D x M unit directions from the target to the anchors.
    pub directions: DMatrix<f64>,
    pub frame_potential: f64,
    pub bound: f64,
}

#[derive(Serialize)]
struct PlacementDoc {
    positions: Vec<Vec<f64>>,
    frame_potential: f64,
}

impl Serialize for PlacementResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PlacementDoc {
            positions: columns_to_rows(&self.positions),
            frame_potential: self.frame_potential,
        }
        .serialize(s)
    }
}

impl PlacementResult {
    pub fn anchors(&self) -> Result<AnchorSet> {
        AnchorSet::new(self.positions.clone())
    }
}

/// Anchors at `center + radius · u_i`.
pub fn anchors_from_directions(
    center: &DVector<f64>,
    radius: f64,
    directions: &DMatrix<f64>,
) -> Result<AnchorSet> {
    check_dim(center.len(), directions.nrows())?;
    let mut pos = directions * radius;
    for mut col in pos.column_iter_mut() {
        col += center;
    }
    AnchorSet::new(pos)
}

/// `m` directions packed into a `spread_deg` arc (2D) or onto a cone of
/// that opening angle (3D) around the +x axis.
pub fn clustered_directions(dim: usize, m: usize, spread_deg: f64) -> Result<DMatrix<f64>> {
    check_supported_dim(dim)?;
    let half = spread_deg.to_radians() / 2.0;
    let mut u = DMatrix::zeros(dim, m);
    for i in 0..m {
        let frac = if m > 1 { i as f64 / (m - 1) as f64 } else { 0.5 };
        if dim == 2 {
            let a = -half + 2.0 * half * frac;
            u[(0, i)] = a.cos();
            u[(1, i)] = a.sin();
        } else {
            let phi = std::f64::consts::TAU * i as f64 / m as f64;
            u[(0, i)] = half.cos();
            u[(1, i)] = half.sin() * phi.cos();
            u[(2, i)] = half.sin() * phi.sin();
        }
    }
    Ok(u)
}

fn normalize_columns(u: &mut DMatrix<f64>) {
    for mut c in u.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
}

/// Projected gradient descent of the frame potential on the product of unit
/// spheres, from one random start.
fn descend(mut u: DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let m = u.ncols() as f64;
    let mut fp = potential(&u);
    let mut step = 0.25 / m;
    for _ in 0..5000 {
        let gram = u.transpose() * &u;
        let mut g = &u * &gram * 4.0;
        // drop the radial part of each column's gradient
        for (mut gc, uc) in g.column_iter_mut().zip(u.column_iter()) {
            let radial = gc.dot(&uc);
            gc -= uc * radial;
        }
        if g.norm() < 1e-13 {
            break;
        }
        let mut accepted = false;
        while step > 1e-16 {
            let mut cand = &u - &g * step;
            normalize_columns(&mut cand);
            let f = potential(&cand);
            if f < fp {
                let gain = fp - f;
                u = cand;
                fp = f;
                step *= 1.5;
                accepted = gain > 1e-15 * fp;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (u, fp)
}

/// Anchor directions minimizing the frame potential, best of
/// `problem.restarts` seeded random starts. Restarts run in parallel; each
/// has its own derived seed, so the result does not depend on scheduling.
pub fn optimize_placement(problem: &PlacementProblem) -> Result<PlacementResult> {
    problem.validate()?;
    let (d, m) = (problem.dim, problem.num_anchors);
    let runs: Vec<(DMatrix<f64>, f64)> = (0..problem.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = derived_stream(problem.seed, &[r as u64]);
            let mut u = DMatrix::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            normalize_columns(&mut u);
            descend(u)
        })
        .collect();
    let (directions, _) = runs
        .into_iter()
        .reduce(|best, cand| if cand.1 < best.1 { cand } else { best })
        .expect("at least one restart");
    let center = DVector::from_column_slice(&problem.target_center);
    let anchors = anchors_from_directions(&center, problem.anchor_radius, &directions)?;
    Ok(PlacementResult {
        frame_potential: potential(&directions),
        positions: anchors.positions().clone(),
        directions,
        bound: frame_potential_bound(m, d),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationOptions {
    /// Center of the region the body is placed in.
    pub target_center: Option<Vec<f64>>,
    /// Random translations are uniform in `center ± pose_half_extent` (m).
    pub pose_half_extent: f64,
    pub estimator: TwoStageOptions,
    pub visibility: VisibilityModel,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self {
            target_center: None,
            pose_half_extent: 1.0,
            estimator: TwoStageOptions::default(),
            visibility: VisibilityModel::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementEvaluation {
    pub trials: usize,
    /// Trials where the estimator returned an error.
    pub failures: usize,
    pub translation: Option<RmseSummary>,
    pub rotation: Option<RmseSummary>,
}

/// Monte-Carlo RMSE of the two-stage estimator for a given anchor layout.
/// Trial `i` draws from the stream derived from `(seed, i)`.
pub fn evaluate_placement(
    anchors: &AnchorSet,
    conf: &Conformation,
    sigma: f64,
    trials: usize,
    seed: u64,
    options: &EvaluationOptions,
) -> Result<PlacementEvaluation> {
    check_dim(anchors.dim(), conf.dim())?;
    if trials == 0 {
        return Err(RblError::invalid("trials must be at least 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(RblError::invalid("sigma must be finite and >= 0"));
    }
    let center = match &options.target_center {
        Some(c) => {
            check_dim(conf.dim(), c.len())?;
            DVector::from_column_slice(c)
        }
        None => DVector::zeros(conf.dim()),
    };
    let outcomes: Vec<Option<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = derived_stream(seed, &[i as u64]);
            let truth = random_pose(&mut rng, &center, options.pose_half_extent).ok()?;
            let body = apply_pose(conf, &truth).ok()?;
            let ranges = simulate_ranges(anchors, &body, sigma, options.visibility, &mut rng).ok()?;
            let est = rbl_two_stage(anchors, &ranges, conf, &options.estimator).ok()?;
            Some((
                est.pose.translation_error(&truth),
                est.pose.rotation_error(&truth),
            ))
        })
        .collect();
    let ok: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
    let t: Vec<f64> = ok.iter().map(|e| e.0).collect();
    let r: Vec<f64> = ok.iter().map(|e| e.1).collect();
    Ok(PlacementEvaluation {
        trials,
        failures: trials - ok.len(),
        translation: RmseSummary::from_errors(&t),
        rotation: RmseSummary::from_errors(&r),
    })
}
