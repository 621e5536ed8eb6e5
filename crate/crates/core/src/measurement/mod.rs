//! Synthetic wireless observations: anchors, masked range matrices,
//! angle-of-arrival measurements and the partially known hollow EDM.
//!
//! Unobserved entries are never zero. They are stored as NaN and reachable
//! only through `Option`-returning accessors.

mod io;
mod simulate;
mod visibility;

pub use io::{read_matrix_csv, write_matrix_csv, MatrixDoc};
pub use simulate::{
    simulate_aoa, simulate_cross_ranges, simulate_range_rates, simulate_ranges, VisibilityModel,
};
pub use visibility::{line_of_sight_blocked, Occluder, SLAB_THICKNESS};

use std::f64::consts::{PI, TAU};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, RblError, Result};
use crate::geometry::{check_supported_dim, points_to_matrix, squared_distances, Conformation};

/// Minimum separation between two anchors (meters).
pub const MIN_ANCHOR_SEPARATION: f64 = 1e-9;

/// Known world-frame reference nodes (D x M).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    positions: DMatrix<f64>,
}

impl AnchorSet {
    pub fn new(positions: DMatrix<f64>) -> Result<Self> {
        check_supported_dim(positions.nrows())?;
        if positions.ncols() == 0 {
            return Err(RblError::invalid("anchor set needs at least one anchor"));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(RblError::invalid("anchor positions must be finite"));
        }
        for i in 0..positions.ncols() {
            for j in (i + 1)..positions.ncols() {
                if (positions.column(i) - positions.column(j)).norm() < MIN_ANCHOR_SEPARATION {
                    return Err(RblError::invalid(format!("anchors {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { positions })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        check_supported_dim(dim)?;
        Self::new(points_to_matrix(dim, points)?)
    }

    /// The 2^D vertices of an axis-aligned cube (square in 2D) of edge `side`.
    pub fn cube(dim: usize, center: &DVector<f64>, side: f64) -> Result<Self> {
        check_supported_dim(dim)?;
        check_dim(dim, center.len())?;
        let h = side / 2.0;
        let n = 1usize << dim;
        let m = DMatrix::from_fn(dim, n, |r, c| {
            let sign = if (c >> r) & 1 == 1 { 1.0 } else { -1.0 };
            center[r] + sign * h
        });
        Self::new(m)
    }

    pub fn positions(&self) -> &DMatrix<f64> {
        &self.positions
    }

    pub fn dim(&self) -> usize {
        self.positions.nrows()
    }

    pub fn len(&self) -> usize {
        self.positions.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.ncols() == 0
    }

    pub fn anchor(&self, i: usize) -> DVector<f64> {
        self.positions.column(i).into_owned()
    }

    /// Apply the same rigid motion to every anchor.
    pub fn transformed(&self, pose: &crate::geometry::Pose) -> Result<Self> {
        check_dim(self.dim(), pose.dim())?;
        Ok(Self {
            positions: pose.transform_points(&self.positions),
        })
    }
}

/// A matrix of measurements where only masked-in entries carry values.
#[derive(Debug, Clone)]
pub struct MaskedMatrix {
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
}

impl MaskedMatrix {
    /// Entries with `mask == false` are overwritten with NaN.
    pub fn new(mut values: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(RblError::invalid(format!(
                "values {:?} and mask {:?} differ in shape",
                values.shape(),
                mask.shape()
            )));
        }
        for (v, &m) in values.iter_mut().zip(mask.iter()) {
            if m {
                if !v.is_finite() {
                    return Err(RblError::invalid("observed entries must be finite"));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(Self { values, mask })
    }

    /// NaN entries become unobserved.
    pub fn from_nan_sentinel(values: DMatrix<f64>) -> Result<Self> {
        let mask = values.map(|v| !v.is_nan());
        Self::new(values, mask)
    }

    pub fn full(values: DMatrix<f64>) -> Result<Self> {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.mask[(r, c)].then(|| self.values[(r, c)])
    }

    pub fn is_observed(&self, r: usize, c: usize) -> bool {
        self.mask[(r, c)]
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    /// Raw storage; unobserved entries are NaN.
    pub fn values_with_nan(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, r: usize) -> Vec<Option<f64>> {
        (0..self.ncols()).map(|c| self.get(r, c)).collect()
    }

    pub fn column(&self, c: usize) -> Vec<Option<f64>> {
        (0..self.nrows()).map(|r| self.get(r, c)).collect()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Columns `0..k` only.
    pub fn first_columns(&self, k: usize) -> Self {
        Self {
            values: self.values.columns(0, k).into_owned(),
            mask: self.mask.columns(0, k).into_owned(),
        }
    }

    pub fn with_mask(&self, mask: &DMatrix<bool>) -> Result<Self> {
        if mask.shape() != self.mask.shape() {
            return Err(RblError::invalid("mask shape mismatch"));
        }
        let combined = self.mask.zip_map(mask, |a, b| a && b);
        Self::new(self.values.clone(), combined)
    }
}

/// Anchor-to-node distances `d[n, m]` (M x K) with an availability mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedRangeMatrix {
    inner: MaskedMatrix,
    noise_sigma: f64,
}

impl MaskedRangeMatrix {
    pub fn new(values: DMatrix<f64>, mask: DMatrix<bool>, noise_sigma: f64) -> Result<Self> {
        Self::from_masked(MaskedMatrix::new(values, mask)?, noise_sigma)
    }

    pub fn from_masked(inner: MaskedMatrix, noise_sigma: f64) -> Result<Self> {
        if inner
            .values
            .iter()
            .zip(inner.mask.iter())
            .any(|(&v, &m)| m && v < 0.0)
        {
            return Err(RblError::invalid("observed distances must be non-negative"));
        }
        if noise_sigma.is_nan() || noise_sigma < 0.0 {
            return Err(RblError::invalid("noise sigma must be non-negative"));
        }
        Ok(Self { inner, noise_sigma })
    }

    /// Exact, fully observed distances between the columns of two point sets.
    pub fn exact(from: &DMatrix<f64>, to: &DMatrix<f64>) -> Result<Self> {
        check_dim(from.nrows(), to.nrows())?;
        let values = DMatrix::from_fn(from.ncols(), to.ncols(), |r, c| {
            (from.column(r) - to.column(c)).norm()
        });
        Self::from_masked(MaskedMatrix::full(values)?, 0.0)
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn as_masked(&self) -> &MaskedMatrix {
        &self.inner
    }

    pub fn first_columns(&self, k: usize) -> Self {
        Self {
            inner: self.inner.first_columns(k),
            noise_sigma: self.noise_sigma,
        }
    }

    pub fn with_mask(&self, mask: &DMatrix<bool>) -> Result<Self> {
        Ok(Self {
            inner: self.inner.with_mask(mask)?,
            noise_sigma: self.noise_sigma,
        })
    }
}

impl std::ops::Deref for MaskedRangeMatrix {
    type Target = MaskedMatrix;

    fn deref(&self) -> &MaskedMatrix {
        &self.inner
    }
}

/// Direction of a vector: azimuth `atan2(y, x)` and, in 3D, elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bearing {
    pub azimuth: f64,
    pub elevation: Option<f64>,
}

impl Bearing {
    /// Direction of `v`. At the 3D poles the azimuth is defined as 0.
    pub fn of(v: &DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if n <= 1e-12 {
            return Err(RblError::Degenerate(
                "direction of a zero-length vector is undefined".into(),
            ));
        }
        match v.len() {
            2 => Ok(Self {
                azimuth: v[1].atan2(v[0]),
                elevation: None,
            }),
            3 => {
                let rho = v[0].hypot(v[1]);
                let azimuth = if rho <= 1e-12 * n { 0.0 } else { v[1].atan2(v[0]) };
                Ok(Self {
                    azimuth,
                    elevation: Some(v[2].atan2(rho)),
                })
            }
            d => Err(RblError::UnsupportedDimension(d)),
        }
    }

    /// Unit vector pointing along the bearing.
    pub fn unit_vector(&self) -> DVector<f64> {
        let (sa, ca) = self.azimuth.sin_cos();
        match self.elevation {
            None => DVector::from_vec(vec![ca, sa]),
            Some(el) => {
                let (se, ce) = el.sin_cos();
                DVector::from_vec(vec![ce * ca, ce * sa, se])
            }
        }
    }
}

/// Wrap an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Per anchor-node angle-of-arrival observations.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMeasurements {
    azimuth: DMatrix<f64>,
    elevation: Option<DMatrix<f64>>,
    mask: DMatrix<bool>,
    noise_sigma_rad: f64,
}

impl AngleMeasurements {
    pub fn new(
        azimuth: DMatrix<f64>,
        elevation: Option<DMatrix<f64>>,
        mask: DMatrix<bool>,
        noise_sigma_rad: f64,
    ) -> Result<Self> {
        if azimuth.shape() != mask.shape() || elevation.as_ref().is_some_and(|e| e.shape() != mask.shape()) {
            return Err(RblError::invalid("angle matrices and mask differ in shape"));
        }
        for idx in 0..mask.len() {
            if !mask[idx] {
                continue;
            }
            let az = azimuth[idx];
            if !(az > -PI && az <= PI) {
                return Err(RblError::invalid(format!("azimuth {az} outside (-π, π]")));
            }
            if let Some(el) = elevation.as_ref().map(|e| e[idx]) {
                if !(-PI / 2.0..=PI / 2.0).contains(&el) {
                    return Err(RblError::invalid(format!("elevation {el} outside [-π/2, π/2]")));
                }
            }
        }
        Ok(Self {
            azimuth,
            elevation,
            mask,
            noise_sigma_rad,
        })
    }

    pub fn get(&self, n: usize, m: usize) -> Option<Bearing> {
        self.mask[(n, m)].then(|| Bearing {
            azimuth: self.azimuth[(n, m)],
            elevation: self.elevation.as_ref().map(|e| e[(n, m)]),
        })
    }

    pub fn column(&self, m: usize) -> Vec<Option<Bearing>> {
        (0..self.mask.nrows()).map(|n| self.get(n, m)).collect()
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn noise_sigma_rad(&self) -> f64 {
        self.noise_sigma_rad
    }
}

/// Equal when masks match and observed values match; unobserved slots
/// (NaN) are ignored.
fn masked_eq(a: &DMatrix<f64>, am: &DMatrix<bool>, b: &DMatrix<f64>, bm: &DMatrix<bool>) -> bool {
    am == bm
        && a.iter()
            .zip(b.iter())
            .zip(am.iter())
            .all(|((x, y), &m)| !m || x == y)
}

impl PartialEq for MaskedMatrix {
    fn eq(&self, other: &Self) -> bool {
        masked_eq(&self.values, &self.mask, &other.values, &other.mask)
    }
}

/// Hollow squared EDM over a two-block point set (anchors then body nodes,
/// or body 1 then body 2). Both diagonal blocks are fully known; only the
/// cross block may have unknown entries.
#[derive(Debug, Clone)]
pub struct PartialEdm {
    squared: DMatrix<f64>,
    mask: DMatrix<bool>,
    dim: usize,
    split: usize,
}

fn symmetric_tol(m: &DMatrix<f64>) -> f64 {
    let scale = m
        .iter()
        .filter(|v| v.is_finite())
        .fold(1.0_f64, |a, v| a.max(v.abs()));
    1e-9 * scale
}

impl PartialEdm {
    /// `squared` holds squared distances; `split` is the size of the first
    /// block. A split of 0 (or N) means no block layout: any off-diagonal
    /// entry may then be unknown.
    pub fn new(squared: DMatrix<f64>, mask: DMatrix<bool>, dim: usize, split: usize) -> Result<Self> {
        check_supported_dim(dim)?;
        let n = squared.nrows();
        if !squared.is_square() || mask.shape() != squared.shape() {
            return Err(RblError::invalid("EDM must be square and match its mask"));
        }
        if split > n {
            return Err(RblError::invalid("block split exceeds matrix size"));
        }
        let tol = symmetric_tol(&squared);
        let mut squared = squared;
        for i in 0..n {
            if !mask[(i, i)] || squared[(i, i)].abs() > tol {
                return Err(RblError::invalid("EDM diagonal must be known and zero"));
            }
            squared[(i, i)] = 0.0;
            for j in 0..n {
                if mask[(i, j)] != mask[(j, i)] {
                    return Err(RblError::invalid("EDM mask must be symmetric"));
                }
                if !mask[(i, j)] {
                    squared[(i, j)] = f64::NAN;
                    continue;
                }
                let v = squared[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(RblError::invalid("known EDM entries must be finite and >= 0"));
                }
                if (v - squared[(j, i)]).abs() > tol {
                    return Err(RblError::invalid(format!("EDM not symmetric at ({i}, {j})")));
                }
            }
        }
        let has_blocks = split > 0 && split < n;
        for i in 0..n {
            for j in 0..n {
                if has_blocks && (i < split) == (j < split) && !mask[(i, j)] {
                    return Err(RblError::invalid(
                        "only the cross block of a partial EDM may be unknown",
                    ));
                }
            }
        }
        Ok(Self {
            squared,
            mask,
            dim,
            split,
        })
    }

    /// Fully known EDM of a point set (D x N).
    pub fn from_points(points: &DMatrix<f64>, split: usize) -> Result<Self> {
        let n = points.ncols();
        Self::new(
            squared_distances(points),
            DMatrix::from_element(n, n, true),
            points.nrows(),
            split,
        )
    }

    pub fn size(&self) -> usize {
        self.squared.nrows()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn first_block(&self) -> Range<usize> {
        0..self.split
    }

    pub fn second_block(&self) -> Range<usize> {
        self.split..self.size()
    }

    pub fn squared(&self, i: usize, j: usize) -> Option<f64> {
        self.mask[(i, j)].then(|| self.squared[(i, j)])
    }

    pub fn distance(&self, i: usize, j: usize) -> Option<f64> {
        self.squared(i, j).map(f64::sqrt)
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    /// Raw squared values; unknown entries are NaN.
    pub fn squared_with_nan(&self) -> &DMatrix<f64> {
        &self.squared
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn unknown_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count() / 2
    }

    /// Mark additional symmetric cross entries as unknown.
    pub fn hide(&self, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut mask = self.mask.clone();
        let has_blocks = self.split > 0 && self.split < self.size();
        for &(i, j) in pairs {
            if i == j || (has_blocks && (i < self.split) == (j < self.split)) {
                return Err(RblError::invalid(format!(
                    "({i}, {j}) is not a cross-block entry"
                )));
            }
            mask[(i, j)] = false;
            mask[(j, i)] = false;
        }
        Self::new(self.squared.clone(), mask, self.dim, self.split)
    }

    /// Plain-distance view, NaN where unknown.
    pub fn distances_with_nan(&self) -> DMatrix<f64> {
        self.squared.map(f64::sqrt)
    }
}

/// Build the hollow squared EDM of `[anchors | body]` from the anchor layout,
/// the known conformation and the measured cross distances. Body-block entries
/// come from the conformation, so they do not depend on the pose.
pub fn assemble_partial_edm(
    anchors: &AnchorSet,
    conf: &Conformation,
    cross: &MaskedRangeMatrix,
) -> Result<PartialEdm> {
    check_dim(anchors.dim(), conf.dim())?;
    let (m, k) = (anchors.len(), conf.num_nodes());
    if cross.nrows() != m || cross.ncols() != k {
        return Err(RblError::invalid(format!(
            "cross block is {}x{}, expected {m}x{k}",
            cross.nrows(),
            cross.ncols()
        )));
    }
    let n = m + k;
    let anchor_sq = squared_distances(anchors.positions());
    let body_sq = conf.squared_distances();
    let mut sq = DMatrix::from_element(n, n, f64::NAN);
    let mut mask = DMatrix::from_element(n, n, true);
    sq.view_mut((0, 0), (m, m)).copy_from(&anchor_sq);
    sq.view_mut((m, m), (k, k)).copy_from(&body_sq);
    for a in 0..m {
        for b in 0..k {
            let (i, j) = (a, m + b);
            match cross.get(a, b) {
                Some(d) => {
                    sq[(i, j)] = d * d;
                    sq[(j, i)] = d * d;
                }
                None => {
                    mask[(i, j)] = false;
                    mask[(j, i)] = false;
                }
            }
        }
    }
    PartialEdm::new(sq, mask, anchors.dim(), m)
}

/// EDM of two bodies expressed in their own frames plus cross distances
/// (K1 x K2) between them.
pub fn assemble_two_body_edm(
    conf1: &Conformation,
    conf2: &Conformation,
    cross: &MaskedMatrix,
) -> Result<PartialEdm> {
    check_dim(conf1.dim(), conf2.dim())?;
    let (k1, k2) = (conf1.num_nodes(), conf2.num_nodes());
    if cross.nrows() != k1 || cross.ncols() != k2 {
        return Err(RblError::invalid(format!(
            "cross block is {}x{}, expected {k1}x{k2}",
            cross.nrows(),
            cross.ncols()
        )));
    }
    let n = k1 + k2;
    let mut sq = DMatrix::from_element(n, n, f64::NAN);
    let mut mask = DMatrix::from_element(n, n, true);
    sq.view_mut((0, 0), (k1, k1))
        .copy_from(&conf1.squared_distances());
    sq.view_mut((k1, k1), (k2, k2))
        .copy_from(&conf2.squared_distances());
    for a in 0..k1 {
        for b in 0..k2 {
            let (i, j) = (a, k1 + b);
            match cross.get(a, b) {
                Some(d) if d >= 0.0 => {
                    sq[(i, j)] = d * d;
                    sq[(j, i)] = d * d;
                }
                Some(d) => {
                    return Err(RblError::invalid(format!("negative cross distance {d}")));
                }
                None => {
                    mask[(i, j)] = false;
                    mask[(j, i)] = false;
                }
            }
        }
    }
    PartialEdm::new(sq, mask, conf1.dim(), k1)
}

impl PartialEq for PartialEdm {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.split == other.split
            && masked_eq(&self.squared, &self.mask, &other.squared, &other.mask)
    }
}
