//! Pose, relative-pose and motion estimators.

mod anchorless;
mod hybrid;
mod motion;
mod multilateration;
mod procrustes;
mod two_stage;

pub use anchorless::{relative_pose_anchorless, relative_pose_from_edm, RelativePoseEstimate};
pub use hybrid::{localize_point_hybrid, HybridOptions};
pub use motion::{estimate_motion, MotionEstimate};
pub use multilateration::{multilaterate, PointFix};
pub use procrustes::{fit_pose_procrustes, PoseEstimate};
pub use two_stage::{rbl_two_stage, TwoStageOptions, Weighting};

use nalgebra::{DMatrix, DVector};

/// Gauss-Newton stops once a step is shorter than this (meters).
pub const STEP_TOL: f64 = 1e-10;
/// Iteration cap shared by every iterative estimator.
pub const MAX_ITERATIONS: usize = 100;

/// Least-squares solution of `a x = b` through the SVD, with the rank used.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = (max * 1e-12).max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()));
    (x, rank)
}

pub(crate) fn matrix_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max <= f64::MIN_POSITIVE {
        return 0;
    }
    sv.iter().filter(|&&s| s > max * 1e-10).count()
}

#[derive(Debug, Clone)]
pub(crate) struct GaussNewtonOutcome {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Gauss-Newton: full step, halved until the cost does not increase.
/// `model` returns the residual vector and its Jacobian.
pub(crate) fn gauss_newton<F>(x0: DVector<f64>, model: F) -> GaussNewtonOutcome
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let cost_of = |x: &DVector<f64>| model(x).0.norm_squared();
    let mut x = x0;
    let (mut r, mut j) = model(&x);
    let mut cost = r.norm_squared();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (delta, _) = lstsq(&j, &(-&r));
        if delta.norm() < STEP_TOL {
            x += &delta;
            converged = true;
            break;
        }
        let mut step = delta;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &x + &step;
            let c = cost_of(&cand);
            if c <= cost {
                accepted = Some((cand, c));
                break;
            }
            step *= 0.5;
            if step.norm() < STEP_TOL {
                break;
            }
        }
        match accepted {
            Some((cand, c)) => {
                let moved = step.norm();
                x = cand;
                cost = c;
                if moved < STEP_TOL {
                    converged = true;
                    break;
                }
                let next = model(&x);
                r = next.0;
                j = next.1;
            }
            None => {
                // no descent left at machine precision
                converged = true;
                break;
            }
        }
    }
    let cost = model(&x).0.norm_squared();
    GaussNewtonOutcome {
        x,
        cost,
        iterations,
        converged,
    }
}
