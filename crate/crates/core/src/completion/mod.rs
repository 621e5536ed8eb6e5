//! Low-rank completion of partial EDMs, classical MDS and discrete snapping.

mod alphabet;
mod mds;
mod register;

pub use alphabet::{build_distance_alphabet, snap_to_alphabet, DistanceAlphabet};
pub use mds::{edm_to_points, gram_from_edm, MdsEmbedding, MAX_NEGATIVE_EIGEN_RATIO};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{RblError, Result};
use crate::geometry::squared_distances;
use crate::measurement::{MatrixDoc, PartialEdm};
use mds::sorted_eigen;

/// How known entries are treated during completion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Known entries are restored exactly after every projection.
    #[default]
    Hard,
    /// Known entries may move by up to `tolerance` (squared meters).
    Soft { tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompletionOptions {
    /// Extra rank above D+2 allowed in the low-rank projection.
    pub rank_slack: usize,
    pub max_iterations: usize,
    /// Stop when the relative Frobenius change of an iterate drops below this.
    pub tolerance: f64,
    /// Relative rank residual required to report convergence.
    pub objective_threshold: f64,
    pub mode: ConstraintMode,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        Self {
            rank_slack: 0,
            max_iterations: 500,
            tolerance: 1e-10,
            objective_threshold: 1e-6,
            mode: ConstraintMode::Hard,
        }
    }
}

/// Completed hollow symmetric squared EDM.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    completed: DMatrix<f64>,
    known: DMatrix<bool>,
    dim: usize,
    split: usize,
    pub iterations: usize,
    /// `||E - P_r(E)||_F / ||E||_F` with `P_r` the rank-r truncation.
    pub final_objective: f64,
    pub converged: bool,
}

impl CompletionResult {
    /// Squared distances.
    pub fn completed(&self) -> &DMatrix<f64> {
        &self.completed
    }

    pub fn distances(&self) -> DMatrix<f64> {
        self.completed.map(f64::sqrt)
    }

    /// Mask of the entries that were known before completion.
    pub fn known(&self) -> &DMatrix<bool> {
        &self.known
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub(crate) fn with_completed(&self, completed: DMatrix<f64>) -> Self {
        Self {
            completed,
            ..self.clone()
        }
    }

    /// JSON document with plain distances and the original mask.
    pub fn to_doc(&self) -> MatrixDoc {
        let d = self.distances();
        let mut doc = MatrixDoc::from_parts(&d, &DMatrix::from_element(d.nrows(), d.ncols(), true));
        doc.mask = (0..d.nrows())
            .map(|r| (0..d.ncols()).map(|c| self.known[(r, c)]).collect())
            .collect();
        doc.dim = Some(self.dim);
        doc.split = Some(self.split);
        doc.iterations = Some(self.iterations);
        doc.converged = Some(self.converged);
        doc
    }
}

/// Best rank-`r` approximation of a symmetric matrix, keeping the `r`
/// eigenvalues of largest magnitude.
fn truncate_rank(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let (values, vectors) = sorted_eigen(m.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let mut out = DMatrix::zeros(n, n);
    for &k in idx.iter().take(r) {
        let v = vectors.column(k);
        out += v * v.transpose() * values[k];
    }
    out
}

/// Starting values for the unknown entries: from a rigid registration of
/// the two known blocks when available, else the midpoint of the
/// triangle-inequality bounds, else the mean known entry.
fn initial_fill(partial: &PartialEdm) -> DMatrix<f64> {
    let n = partial.size();
    let known = partial.mask();
    let sq = partial.squared_with_nan();
    let mut e = sq.clone();
    if let Some(points) = register::register_blocks(partial) {
        let guess = squared_distances(&points);
        e.iter_mut()
            .zip(guess.iter())
            .filter(|(v, _)| v.is_nan())
            .for_each(|(v, g)| *v = *g);
        return e;
    }
    let mean = {
        let vals: Vec<f64> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| known[(i, j)])
            .map(|(i, j)| sq[(i, j)])
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    for i in 0..n {
        for j in (i + 1)..n {
            if known[(i, j)] {
                continue;
            }
            let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
            for k in 0..n {
                if known[(i, k)] && known[(k, j)] {
                    let (a, b) = (sq[(i, k)].sqrt(), sq[(k, j)].sqrt());
                    lo = lo.max((a - b).abs());
                    hi = hi.min(a + b);
                }
            }
            let v = if hi.is_finite() {
                (0.5 * (lo + hi)).powi(2)
            } else {
                mean
            };
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
    }
    e
}

fn rank_residual(e: &DMatrix<f64>, r: usize) -> f64 {
    let norm = e.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (e - truncate_rank(e, r)).norm() / norm
}

/// Fill the unknown entries of a partial EDM by alternating projections
/// between the rank-(D+2) matrices and the EDM constraint set (known
/// entries, symmetry, zero diagonal, non-negativity).
pub fn complete_edm(partial: &PartialEdm, options: &CompletionOptions) -> Result<CompletionResult> {
    if let ConstraintMode::Soft { tolerance } = options.mode {
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(RblError::invalid("soft-mode tolerance must be finite and >= 0"));
        }
    }
    let n = partial.size();
    let r = (partial.dim() + 2 + options.rank_slack).min(n);
    let known = partial.mask().clone();
    let target = partial.squared_with_nan();
    if partial.is_complete() {
        return Ok(CompletionResult {
            final_objective: rank_residual(target, r),
            completed: target.clone(),
            known,
            dim: partial.dim(),
            split: partial.split(),
            iterations: 0,
            converged: true,
        });
    }

    let mut e = initial_fill(partial);
    e.fill_diagonal(0.0);
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < options.max_iterations {
        iterations += 1;
        let p = truncate_rank(&e, r);
        let mut next = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                return 0.0;
            }
            let v = (0.5 * (p[(i, j)] + p[(j, i)])).max(0.0);
            if !known[(i, j)] {
                return v;
            }
            let t = target[(i, j)];
            match options.mode {
                ConstraintMode::Hard => t,
                ConstraintMode::Soft { tolerance } => v.clamp((t - tolerance).max(0.0), t + tolerance),
            }
        });
        // keep exact symmetry of restored entries
        next = (&next + next.transpose()) * 0.5;
        for i in 0..n {
            for j in 0..n {
                if known[(i, j)] && options.mode == ConstraintMode::Hard {
                    next[(i, j)] = target[(i, j)];
                }
            }
        }
        let denom = e.norm().max(f64::MIN_POSITIVE);
        change = (&next - &e).norm() / denom;
        e = next;
        if change < options.tolerance {
            break;
        }
    }
    let final_objective = rank_residual(&e, r);
    Ok(CompletionResult {
        completed: e,
        known,
        dim: partial.dim(),
        split: partial.split(),
        iterations,
        converged: change < options.tolerance && final_objective <= options.objective_threshold,
        final_objective,
    })
}
