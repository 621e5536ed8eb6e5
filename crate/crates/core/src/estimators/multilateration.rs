use nalgebra::{DMatrix, DVector};

use super::{gauss_newton, lstsq};
use crate::error::{check_dim, RblError, Result};
use crate::measurement::AnchorSet;

/// Single-point position fix.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFix {
    pub position: DVector<f64>,
    /// Both mirror solutions when the geometry leaves a reflection ambiguity,
    /// otherwise just `position`.
    pub candidates: Vec<DVector<f64>>,
    /// RMS of the range residuals at `position` (meters).
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ambiguous: bool,
}

pub(crate) struct ObservedRanges {
    pub anchors: Vec<DVector<f64>>,
    pub ranges: Vec<f64>,
}

pub(crate) fn observed(anchors: &AnchorSet, ranges: &[Option<f64>]) -> Result<ObservedRanges> {
    check_dim(anchors.len(), ranges.len())?;
    let mut out = ObservedRanges {
        anchors: Vec::new(),
        ranges: Vec::new(),
    };
    for (i, r) in ranges.iter().enumerate() {
        if let Some(d) = *r {
            if !d.is_finite() || d < 0.0 {
                return Err(RblError::invalid(format!("range {d} to anchor {i} is invalid")));
            }
            out.anchors.push(anchors.anchor(i));
            out.ranges.push(d);
        }
    }
    Ok(out)
}

pub(crate) fn range_model(
    obs: &ObservedRanges,
    x: &DVector<f64>,
    scale: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = obs.ranges.len();
    let dim = x.len();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, dim);
    for (i, (a, d)) in obs.anchors.iter().zip(&obs.ranges).enumerate() {
        let diff = x - a;
        let dist = diff.norm();
        r[i] = (dist - d) / scale;
        if dist > 1e-15 {
            j.set_row(i, &(diff.transpose() / (dist * scale)));
        }
    }
    (r, j)
}

/// Linearized fix from subtracting the first range equation from the others.
/// Returns the solution and the rank of the linear system.
pub(crate) fn linearized_fix(obs: &ObservedRanges, dim: usize) -> (DVector<f64>, usize, DMatrix<f64>) {
    let n = obs.ranges.len();
    let a0 = &obs.anchors[0];
    let d0 = obs.ranges[0];
    let mut a = DMatrix::zeros(n - 1, dim);
    let mut b = DVector::zeros(n - 1);
    for i in 1..n {
        let ai = &obs.anchors[i];
        a.set_row(i - 1, &((ai - a0) * 2.0).transpose());
        b[i - 1] = ai.norm_squared() - a0.norm_squared() - obs.ranges[i].powi(2) + d0 * d0;
    }
    let (x, rank) = if n > 1 { lstsq(&a, &b) } else { (a0.clone(), 0) };
    (x, rank, a)
}

/// Points consistent with the ranges when the linear system leaves one free
/// direction: `x_p ± s n`, mirrored about the anchors' line (2D) or plane (3D).
pub(crate) fn mirror_candidates(obs: &ObservedRanges, dim: usize) -> Vec<DVector<f64>> {
    let (xp, _, a) = linearized_fix(obs, dim);
    let normal = null_direction(&a, dim);
    let a0 = &obs.anchors[0];
    let c = normal.dot(&(&xp - a0));
    // average the quadratic's constant term over all observed ranges
    let e = obs
        .anchors
        .iter()
        .zip(&obs.ranges)
        .map(|(ai, d)| (&xp - ai).norm_squared() - d * d)
        .sum::<f64>()
        / obs.ranges.len() as f64;
    let disc = (c * c - e).max(0.0).sqrt();
    vec![&xp + &normal * (-c + disc), &xp + &normal * (-c - disc)]
}

/// Right singular vector of the smallest singular value (unit length).
fn null_direction(a: &DMatrix<f64>, dim: usize) -> DVector<f64> {
    if a.nrows() == 0 {
        let mut v = DVector::zeros(dim);
        v[dim - 1] = 1.0;
        return v;
    }
    // pad to at least dim rows so v_t is dim x dim
    let mut padded = DMatrix::zeros(a.nrows().max(dim), dim);
    padded.view_mut((0, 0), (a.nrows(), dim)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, &s)| if s < best.1 { (i, s) } else { best },
        );
    v_t.row(idx).transpose().normalize()
}

fn rms_at(obs: &ObservedRanges, x: &DVector<f64>) -> f64 {
    let (r, _) = range_model(obs, x, 1.0);
    (r.norm_squared() / obs.ranges.len() as f64).sqrt()
}

/// Gauss-Newton minimizer of `Σ (||x - a_n|| - d_n)²` over the observed
/// ranges to one node.
///
/// With at least D+1 observed ranges and anchors in general position the
/// start point is the linearized closed-form fix. With exactly D ranges, or
/// with collinear (2D) / coplanar (3D) anchors, both mirror solutions are
/// returned and the fix is flagged ambiguous; `initial_guess` then selects
/// which mirror becomes `position`.
pub fn multilaterate(
    anchors: &AnchorSet,
    ranges: &[Option<f64>],
    initial_guess: Option<&DVector<f64>>,
) -> Result<PointFix> {
    let dim = anchors.dim();
    if let Some(g) = initial_guess {
        check_dim(dim, g.len())?;
    }
    let obs = observed(anchors, ranges)?;
    let n = obs.ranges.len();
    if n < dim {
        return Err(RblError::TooFewObservations {
            needed: dim + 1,
            available: n,
        });
    }

    let (linear, rank, _) = linearized_fix(&obs, dim);
    let starts: Vec<DVector<f64>> = if rank >= dim {
        vec![linear]
    } else if rank + 1 == dim {
        mirror_candidates(&obs, dim)
    } else {
        // fewer constraints still: a ring of solutions
        vec![initial_guess.cloned().unwrap_or(linear)]
    };
    let ambiguous = rank < dim;

    let mut fits: Vec<_> = starts
        .into_iter()
        .map(|s| gauss_newton(s, |x| range_model(&obs, x, 1.0)))
        .collect();

    let pick = match initial_guess {
        Some(g) if fits.len() > 1 => fits
            .iter()
            .enumerate()
            .min_by(|a, b| (&a.1.x - g).norm().total_cmp(&(&b.1.x - g).norm()))
            .map(|(i, _)| i)
            .unwrap_or(0),
        _ => 0,
    };
    let best = fits.swap_remove(pick);
    let mut candidates = vec![best.x.clone()];
    candidates.extend(fits.into_iter().map(|f| f.x));
    Ok(PointFix {
        residual_rms: rms_at(&obs, &best.x),
        position: best.x,
        candidates,
        iterations: best.iterations,
        converged: best.converged,
        ambiguous,
    })
}
