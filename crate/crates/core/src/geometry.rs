//! Rigid-body domain types and SO(D) math.
//!
//! A body is a fixed conformation `C` (D x K, one column per sensor node in the
//! body frame). A pose `(R, t)` places it in the world as `S = R C + t 1ᵀ`.
//! Instantaneous node velocities follow `ṡ_i = [ω]× R c_i + ṫ`; in 2D the
//! angular velocity is a scalar and `[ω]×` becomes `ω J` with `J` the
//! quarter-turn matrix.

use nalgebra::{DMatrix, DVector, Rotation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, RblError, Result};

/// Orthogonality / determinant tolerance for rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;

/// Relative singular-value threshold below which a direction counts as absent.
pub const RANK_TOL: f64 = 1e-9;

pub(crate) fn check_supported_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(RblError::UnsupportedDimension(dim))
    }
}

/// Arithmetic mean of the columns of a point matrix.
pub fn geometric_center(points: &DMatrix<f64>) -> DVector<f64> {
    let k = points.ncols().max(1) as f64;
    points.column_sum() / k
}

/// Subtract the geometric center from every column.
pub fn centered(points: &DMatrix<f64>) -> DMatrix<f64> {
    let c = geometric_center(points);
    let mut out = points.clone();
    for mut col in out.column_iter_mut() {
        col -= &c;
    }
    out
}

/// Numerical rank of a matrix relative to its largest singular value.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max <= f64::MIN_POSITIVE {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Affine rank of a point set (rank of the centered coordinates).
pub fn affine_rank(points: &DMatrix<f64>) -> usize {
    if points.ncols() < 2 {
        return 0;
    }
    // Absolute floor so that numerically coincident points count as rank 0.
    let c = centered(points);
    let scale = points.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if c.norm() <= 1e-12 * scale {
        return 0;
    }
    numerical_rank(&c, RANK_TOL)
}

/// Squared pairwise distances between columns.
pub fn squared_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.ncols();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (points.column(i) - points.column(j)).norm_squared()
        }
    })
}

/// Fixed body-frame coordinates of a rigid body's sensor nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConformationRepr", into = "ConformationRepr")]
pub struct Conformation {
    coords: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConformationRepr {
    dim: usize,
    coords: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TryFrom<ConformationRepr> for Conformation {
    type Error = RblError;

    fn try_from(r: ConformationRepr) -> Result<Self> {
        let conf = Conformation::from_points(r.dim, &r.coords)?;
        match r.labels {
            Some(l) => conf.with_labels(l),
            None => Ok(conf),
        }
    }
}

impl From<Conformation> for ConformationRepr {
    fn from(c: Conformation) -> Self {
        ConformationRepr {
            dim: c.dim(),
            coords: columns_to_rows(&c.coords),
            labels: c.labels,
        }
    }
}

pub(crate) fn columns_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().cloned().collect()).collect()
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// Build a D x N matrix from N points of length D.
pub(crate) fn points_to_matrix(dim: usize, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    for p in points {
        check_dim(dim, p.len())?;
    }
    Ok(DMatrix::from_fn(dim, points.len(), |r, c| points[c][r]))
}

impl Conformation {
    /// `coords` is D x K with one column per node.
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        check_supported_dim(coords.nrows())?;
        if coords.ncols() == 0 {
            return Err(RblError::invalid("conformation needs at least one node"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(RblError::invalid("conformation coordinates must be finite"));
        }
        Ok(Self { coords, labels: None })
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        check_supported_dim(dim)?;
        Self::new(points_to_matrix(dim, points)?)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        check_dim(self.num_nodes(), labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn node(&self, k: usize) -> DVector<f64> {
        self.coords.column(k).into_owned()
    }

    /// Keep only the first `k` nodes.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.num_nodes() {
            return Err(RblError::invalid(format!(
                "prefix of {k} nodes from a {}-node conformation",
                self.num_nodes()
            )));
        }
        Ok(Self {
            coords: self.coords.columns(0, k).into_owned(),
            labels: self.labels.as_ref().map(|l| l[..k].to_vec()),
        })
    }

    pub fn center(&self) -> DVector<f64> {
        geometric_center(&self.coords)
    }

    pub fn affine_rank(&self) -> usize {
        affine_rank(&self.coords)
    }

    /// Nodes affinely span R^D, the condition for a unique pose.
    pub fn spans_space(&self) -> bool {
        self.affine_rank() == self.dim()
    }

    pub fn squared_distances(&self) -> DMatrix<f64> {
        squared_distances(&self.coords)
    }
}

/// Rotation `R` in SO(D) and translation `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    t: Vec<f64>,
}

impl TryFrom<PoseRepr> for Pose {
    type Error = RblError;

    fn try_from(p: PoseRepr) -> Result<Self> {
        let d = p.t.len();
        if p.r.len() != d || p.r.iter().any(|row| row.len() != d) {
            return Err(RblError::invalid("pose R must be a square matrix matching t"));
        }
        let r = DMatrix::from_fn(d, d, |i, j| p.r[i][j]);
        Pose::new(r, DVector::from_vec(p.t))
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            r: matrix_rows(&p.rotation),
            t: p.translation.iter().cloned().collect(),
        }
    }
}

/// Check `RᵀR = I` and `det R = +1` within [`ROTATION_TOL`].
pub fn validate_rotation(r: &DMatrix<f64>) -> Result<()> {
    if !r.is_square() {
        return Err(RblError::invalid("rotation must be square"));
    }
    check_supported_dim(r.nrows())?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(RblError::invalid("rotation entries must be finite"));
    }
    let d = r.nrows();
    let ortho = (r.transpose() * r - DMatrix::<f64>::identity(d, d)).abs().max();
    if ortho > ROTATION_TOL {
        return Err(RblError::invalid(format!(
            "rotation is not orthogonal (max |RᵀR - I| = {ortho:e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOL {
        return Err(RblError::invalid(format!(
            "rotation determinant is {det}, expected +1"
        )));
    }
    Ok(())
}

/// Nearest proper rotation to `m` (polar decomposition with det correction).
pub fn nearest_rotation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut diag = DVector::from_element(d, 1.0);
    diag[d - 1] = (&u * &v_t).determinant().signum();
    u * DMatrix::from_diagonal(&diag) * v_t
}

pub fn rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

pub fn rotation_3d(axis: &[f64; 3], angle: f64) -> DMatrix<f64> {
    let axis = Unit::new_normalize(Vector3::new(axis[0], axis[1], axis[2]));
    let r = Rotation3::from_axis_angle(&axis, angle);
    DMatrix::from_iterator(3, 3, r.matrix().iter().cloned())
}

/// Geodesic angle of a rotation matrix (radians, in [0, π]).
pub fn rotation_angle(r: &DMatrix<f64>) -> f64 {
    match r.nrows() {
        2 => r[(1, 0)].atan2(r[(0, 0)]).abs(),
        _ => {
            let sin_vec = Vector3::new(
                r[(2, 1)] - r[(1, 2)],
                r[(0, 2)] - r[(2, 0)],
                r[(1, 0)] - r[(0, 1)],
            );
            let s = 0.5 * sin_vec.norm();
            let c = 0.5 * (r.trace() - 1.0);
            s.atan2(c)
        }
    }
}

/// Geodesic distance between two rotations, `angle(R_a R_bᵀ)`.
pub fn rotation_error(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    rotation_angle(&(estimate * truth.transpose()))
}

impl Pose {
    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        validate_rotation(&rotation)?;
        check_dim(rotation.nrows(), translation.len())?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(RblError::invalid("translation must be finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Re-orthonormalize an arbitrary square matrix before building the pose.
    pub fn from_matrix_orthonormalized(m: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(RblError::invalid("rotation must be square"));
        }
        Self::new(nearest_rotation(&m), translation)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            rotation: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    pub fn planar(theta: f64, tx: f64, ty: f64) -> Self {
        Self {
            rotation: rotation_2d(theta),
            translation: DVector::from_vec(vec![tx, ty]),
        }
    }

    pub fn spatial(axis: [f64; 3], angle: f64, t: [f64; 3]) -> Self {
        Self {
            rotation: rotation_3d(&axis, angle),
            translation: DVector::from_vec(t.to_vec()),
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.nrows()
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    pub fn transform_point(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.rotation * p + &self.translation
    }

    pub fn transform_points(&self, pts: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.rotation * pts;
        for mut col in out.column_iter_mut() {
            col += &self.translation;
        }
        out
    }

    /// `(R1 R2, R1 t2 + t1)`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Result<Pose> {
        check_dim(self.dim(), other.dim())?;
        Ok(Pose {
            rotation: &self.rotation * &other.rotation,
            translation: &self.rotation * &other.translation + &self.translation,
        })
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        let t = -(&rt * &self.translation);
        Pose {
            rotation: rt,
            translation: t,
        }
    }

    pub fn rotation_error(&self, truth: &Pose) -> f64 {
        rotation_error(&self.rotation, &truth.rotation)
    }

    pub fn translation_error(&self, truth: &Pose) -> f64 {
        (&self.translation - &truth.translation).norm()
    }
}

/// Sensor node positions in the world frame (D x K).
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedBody {
    positions: DMatrix<f64>,
}

impl PlacedBody {
    pub fn new(positions: DMatrix<f64>) -> Result<Self> {
        check_supported_dim(positions.nrows())?;
        if positions.ncols() == 0 || positions.iter().any(|v| !v.is_finite()) {
            return Err(RblError::invalid("placed body needs finite positions"));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &DMatrix<f64> {
        &self.positions
    }

    pub fn dim(&self) -> usize {
        self.positions.nrows()
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.ncols()
    }

    pub fn node(&self, k: usize) -> DVector<f64> {
        self.positions.column(k).into_owned()
    }

    pub fn center(&self) -> DVector<f64> {
        geometric_center(&self.positions)
    }
}

/// `s_k = R c_k + t` for every node.
pub fn apply_pose(conf: &Conformation, pose: &Pose) -> Result<PlacedBody> {
    check_dim(conf.dim(), pose.dim())?;
    Ok(PlacedBody {
        positions: pose.transform_points(conf.coords()),
    })
}

/// Uniform random rotation: uniform angle in 2D, Shoemake unit quaternion in 3D.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<DMatrix<f64>> {
    match dim {
        2 => {
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            Ok(rotation_2d(theta))
        }
        3 => {
            let u1: f64 = rng.gen();
            let u2: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let u3: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let a = (1.0 - u1).sqrt();
            let b = u1.sqrt();
            let q = nalgebra::Quaternion::new(b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin());
            let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
            Ok(DMatrix::from_iterator(3, 3, r.matrix().iter().cloned()))
        }
        d => Err(RblError::UnsupportedDimension(d)),
    }
}

/// Random pose with uniform rotation and translation uniform in the box
/// `center ± half_extent` along every axis.
pub fn random_pose<R: Rng + ?Sized>(rng: &mut R, center: &DVector<f64>, half_extent: f64) -> Result<Pose> {
    let dim = center.len();
    let rotation = random_rotation(rng, dim)?;
    let translation = DVector::from_fn(dim, |i, _| {
        if half_extent > 0.0 {
            center[i] + rng.gen_range(-half_extent..half_extent)
        } else {
            center[i]
        }
    });
    Ok(Pose {
        rotation,
        translation,
    })
}

/// Skew-symmetric matrix with `[ω]× v = ω × v`.
pub fn cross_matrix(omega: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dim(3, omega.len())?;
    let (x, y, z) = (omega[0], omega[1], omega[2]);
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[0.0, -z, y, z, 0.0, -x, -y, x, 0.0],
    ))
}

/// Quarter-turn matrix `J`, the 2D stand-in for the cross-product operator.
pub fn quarter_turn() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

/// `DVector` as a plain JSON array.
pub(crate) mod serde_dvector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Angular velocity `ω` (scalar z-rate in 2D) and translational velocity `ṫ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyMotion {
    #[serde(with = "serde_dvector")]
    omega: DVector<f64>,
    #[serde(with = "serde_dvector")]
    t_dot: DVector<f64>,
}

impl BodyMotion {
    /// `omega` has length 1 (2D) or 3 (3D); `t_dot` has length D.
    pub fn new(omega: DVector<f64>, t_dot: DVector<f64>) -> Result<Self> {
        check_supported_dim(t_dot.len())?;
        let expected = if t_dot.len() == 2 { 1 } else { 3 };
        check_dim(expected, omega.len())?;
        if omega.iter().chain(t_dot.iter()).any(|v| !v.is_finite()) {
            return Err(RblError::invalid("motion components must be finite"));
        }
        Ok(Self { omega, t_dot })
    }

    pub fn planar(omega: f64, t_dot: [f64; 2]) -> Self {
        Self {
            omega: DVector::from_vec(vec![omega]),
            t_dot: DVector::from_vec(t_dot.to_vec()),
        }
    }

    pub fn spatial(omega: [f64; 3], t_dot: [f64; 3]) -> Self {
        Self {
            omega: DVector::from_vec(omega.to_vec()),
            t_dot: DVector::from_vec(t_dot.to_vec()),
        }
    }

    pub fn dim(&self) -> usize {
        self.t_dot.len()
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    pub fn t_dot(&self) -> &DVector<f64> {
        &self.t_dot
    }

    /// Matrix form of the angular velocity: `[ω]×` in 3D, `ω J` in 2D.
    pub fn angular_operator(&self) -> DMatrix<f64> {
        if self.dim() == 2 {
            quarter_turn() * self.omega[0]
        } else {
            cross_matrix(&self.omega).expect("3-vector")
        }
    }
}

/// Per-node world-frame velocities (D x K).
pub fn body_velocities(conf: &Conformation, pose: &Pose, motion: &BodyMotion) -> Result<DMatrix<f64>> {
    check_dim(conf.dim(), pose.dim())?;
    check_dim(conf.dim(), motion.dim())?;
    let mut v = motion.angular_operator() * pose.rotation() * conf.coords();
    for mut col in v.column_iter_mut() {
        col += motion.t_dot();
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_stream;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.abs().max()
    }

    #[test]
    fn identity_pose_leaves_body_in_place() {
        let conf = Conformation::from_points(2, &[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        let s = apply_pose(&conf, &Pose::identity(2)).unwrap();
        assert_eq!(s.positions(), conf.coords());
    }

    #[test]
    fn quarter_turn_maps_x_to_y() {
        let conf = Conformation::from_points(2, &[vec![1.0, 0.0]]).unwrap();
        let s = apply_pose(&conf, &Pose::planar(FRAC_PI_2, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(s.node(0)[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.node(0)[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn apply_pose_preserves_pairwise_distances() {
        let mut rng = seed_stream(11);
        let coords = DMatrix::from_fn(3, 6, |_, _| rng.gen_range(-2.0..2.0));
        let conf = Conformation::new(coords).unwrap();
        let pose = random_pose(&mut rng, &DVector::from_vec(vec![5.0, -3.0, 1.0]), 10.0).unwrap();
        let s = apply_pose(&conf, &pose).unwrap();
        // direct recomputation on both point sets
        for i in 0..6 {
            for j in 0..6 {
                let dc = (conf.node(i) - conf.node(j)).norm();
                let ds = (s.node(i) - s.node(j)).norm();
                assert!((dc - ds).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let conf = Conformation::from_points(2, &[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            apply_pose(&conf, &Pose::identity(3)),
            Err(RblError::DimensionMismatch { .. })
        ));
        assert!(Pose::identity(2).compose(&Pose::identity(3)).is_err());
    }

    #[test]
    fn compose_identity_and_inverse() {
        let mut rng = seed_stream(5);
        let p = random_pose(&mut rng, &DVector::zeros(3), 4.0).unwrap();
        let q = Pose::identity(3).compose(&p).unwrap();
        assert_eq!(q, p);
        let e = p.compose(&p.inverse()).unwrap();
        assert!(max_abs(&(e.rotation() - DMatrix::<f64>::identity(3, 3))) < 1e-12);
        assert!(e.translation().norm() < 1e-12);
    }

    #[test]
    fn quarter_turns_add_up() {
        let q = Pose::spatial([0.0, 0.0, 1.0], FRAC_PI_2, [0.0; 3]);
        let h = q.compose(&q).unwrap();
        let expected = rotation_3d(&[0.0, 0.0, 1.0], PI);
        assert!(max_abs(&(h.rotation() - expected)) < 1e-12);
    }

    #[test]
    fn planar_inverse_closed_form() {
        let theta = 0.7;
        let p = Pose::planar(theta, 1.5, -2.0);
        let inv = p.inverse();
        let r_neg = rotation_2d(-theta);
        let t = -(&r_neg * DVector::from_vec(vec![1.5, -2.0]));
        assert!(max_abs(&(inv.rotation() - &r_neg)) < 1e-15);
        assert!((inv.translation() - t).norm() < 1e-15);
        assert_eq!(Pose::identity(2).inverse(), Pose::identity(2));
    }

    #[test]
    fn random_rotations_are_proper_and_deterministic() {
        for dim in [2, 3] {
            let mut rng = seed_stream(99);
            for _ in 0..100 {
                let r = random_rotation(&mut rng, dim).unwrap();
                validate_rotation(&r).unwrap();
                assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
            let a = random_rotation(&mut seed_stream(1), dim).unwrap();
            let b = random_rotation(&mut seed_stream(1), dim).unwrap();
            assert_eq!(a, b);
        }
        assert!(matches!(
            random_rotation(&mut seed_stream(1), 4),
            Err(RblError::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn uniform_so3_has_zero_mean_entries() {
        let mut rng = seed_stream(2024);
        let n = 100_000;
        let mut acc = DMatrix::<f64>::zeros(3, 3);
        for _ in 0..n {
            acc += random_rotation(&mut rng, 3).unwrap();
        }
        acc /= n as f64;
        assert!(max_abs(&acc) < 0.01, "mean entries {acc}");
    }

    #[test]
    fn cross_matrix_matches_cross_product() {
        let w = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let v = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let out = cross_matrix(&w).unwrap() * v;
        assert_eq!(out.as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(cross_matrix(&DVector::zeros(3)).unwrap(), DMatrix::zeros(3, 3));
        assert!(cross_matrix(&DVector::zeros(2)).is_err());

        let mut rng = seed_stream(3);
        for _ in 0..50 {
            let w: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            let v: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            // componentwise formula
            let expected = [
                w[1] * v[2] - w[2] * v[1],
                w[2] * v[0] - w[0] * v[2],
                w[0] * v[1] - w[1] * v[0],
            ];
            let m = cross_matrix(&DVector::from_row_slice(&w)).unwrap();
            assert!(max_abs(&(&m + m.transpose())) == 0.0);
            let got = m * DVector::from_row_slice(&v);
            for i in 0..3 {
                assert!((got[i] - expected[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn velocities_pure_translation_and_circular_motion() {
        let conf = Conformation::from_points(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 1.0]]).unwrap();
        let pose = Pose::spatial([1.0, 2.0, 3.0], 0.4, [3.0, 1.0, 0.0]);
        let still = BodyMotion::spatial([0.0; 3], [1.0, -2.0, 0.5]);
        let v = body_velocities(&conf, &pose, &still).unwrap();
        for col in v.column_iter() {
            assert_eq!(col.iter().cloned().collect::<Vec<_>>(), vec![1.0, -2.0, 0.5]);
        }

        let w = 2.5;
        let spin = BodyMotion::spatial([0.0, 0.0, w], [0.0; 3]);
        let v = body_velocities(&conf, &Pose::identity(3), &spin).unwrap();
        assert_abs_diff_eq!(v[(0, 0)], 0.0);
        assert_abs_diff_eq!(v[(1, 0)], w);
        assert_abs_diff_eq!(v[(2, 0)], 0.0);
    }

    #[test]
    fn geometric_center_cases() {
        let square = Conformation::from_points(
            2,
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert_eq!(square.center().as_slice(), &[0.5, 0.5]);
        let single = Conformation::from_points(3, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(single.center().as_slice(), &[1.0, 2.0, 3.0]);

        let mut rng = seed_stream(8);
        let conf = Conformation::new(DMatrix::from_fn(3, 5, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        let pose = random_pose(&mut rng, &DVector::zeros(3), 3.0).unwrap();
        let s = apply_pose(&conf, &pose).unwrap();
        let expected = pose.transform_point(&conf.center());
        assert!((s.center() - expected).norm() < 1e-12);
    }

    #[test]
    fn rotation_validation_rejects_reflections_and_skew() {
        let reflection = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(Pose::new(reflection, DVector::zeros(2)).is_err());
        let sheared = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(Pose::new(sheared.clone(), DVector::zeros(2)).is_err());
        let fixed = Pose::from_matrix_orthonormalized(sheared, DVector::zeros(2)).unwrap();
        validate_rotation(fixed.rotation()).unwrap();
    }

    #[test]
    fn rotation_angle_recovers_axis_angle() {
        for angle in [0.0, 1e-7, 0.3, 2.0, PI - 1e-6] {
            let r = rotation_3d(&[0.3, -1.0, 0.2], angle);
            assert!((rotation_angle(&r) - angle).abs() < 1e-12);
            assert!((rotation_angle(&rotation_2d(-angle)) - angle).abs() < 1e-12);
        }
    }

    #[test]
    fn json_shapes() {
        let conf = Conformation::from_points(2, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let js = serde_json::to_value(&conf).unwrap();
        assert_eq!(
            js,
            serde_json::json!({"dim": 2, "coords": [[1.0, 2.0], [3.0, 4.0]]})
        );
        let pose = Pose::planar(FRAC_PI_2, 1.0, 2.0);
        let js = serde_json::to_string(&pose).unwrap();
        let back: Pose = serde_json::from_str(&js).unwrap();
        assert!(max_abs(&(back.rotation() - pose.rotation())) == 0.0);
        let bad = r#"{"R": [[1.0, 0.0], [0.0, -1.0]], "t": [0.0, 0.0]}"#;
        assert!(serde_json::from_str::<Pose>(bad).is_err());
    }
}
