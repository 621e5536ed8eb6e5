use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, RblError, Result};
use crate::geometry::{numerical_rank, Conformation, Pose, RANK_TOL};

/// Estimated pose with per-stage diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose,
    /// RMS range residual of the per-node fixes (meters); 0 when stage 1 did not run.
    pub stage1_residual_rms: f64,
    /// RMS distance between fitted and input node positions (meters).
    pub stage2_residual_rms: f64,
    pub iterations_used: usize,
    /// False when the conformation does not pin down the rotation.
    pub rotation_unique: bool,
    /// Nodes that carried positive weight in the fit.
    pub used_nodes: Vec<usize>,
    /// Nodes whose position fix had a mirror ambiguity.
    pub ambiguous_nodes: Vec<usize>,
}

#[derive(Serialize)]
struct Residuals {
    stage1: f64,
    stage2: f64,
}

#[derive(Serialize)]
struct PoseEstimateDoc<'a> {
    #[serde(flatten)]
    pose: &'a Pose,
    residuals: Residuals,
    iterations: usize,
    rotation_unique: bool,
}

impl Serialize for PoseEstimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseEstimateDoc {
            pose: &self.pose,
            residuals: Residuals {
                stage1: self.stage1_residual_rms,
                stage2: self.stage2_residual_rms,
            },
            iterations: self.iterations_used,
            rotation_unique: self.rotation_unique,
        }
        .serialize(s)
    }
}

/// Weighted orthogonal Procrustes (Kabsch) fit of `s_k ≈ R c_k + t`.
///
/// The rotation is `V diag(1, .., det(V Uᵀ)) Uᵀ` from the SVD `H = U Σ Vᵀ`
/// of the weighted cross-covariance of the centered sets, so `det R = +1`
/// even for mirrored input. A proper rotation is unique once the weighted
/// nodes have affine rank D-1; below that the returned rotation is one of
/// many minimizers and `rotation_unique` is false. A single node yields the
/// identity rotation.
pub fn fit_pose_procrustes(
    conf: &Conformation,
    points: &DMatrix<f64>,
    weights: Option<&[f64]>,
) -> Result<PoseEstimate> {
    let dim = conf.dim();
    let k = conf.num_nodes();
    check_dim(dim, points.nrows())?;
    check_dim(k, points.ncols())?;
    let w: Vec<f64> = match weights {
        Some(w) => {
            check_dim(k, w.len())?;
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(RblError::invalid("weights must be finite and non-negative"));
            }
            w.to_vec()
        }
        None => vec![1.0; k],
    };
    let used: Vec<usize> = (0..k).filter(|&i| w[i] > 0.0).collect();
    if used.is_empty() {
        return Err(RblError::invalid("all Procrustes weights are zero"));
    }
    if used
        .iter()
        .any(|&i| points.column(i).iter().any(|v| !v.is_finite()))
    {
        return Err(RblError::invalid("weighted points must be finite"));
    }
    let total: f64 = used.iter().map(|&i| w[i]).sum();
    let c = conf.coords();
    let mut c_bar = DVector::zeros(dim);
    let mut s_bar = DVector::zeros(dim);
    for &i in &used {
        c_bar += c.column(i) * (w[i] / total);
        s_bar += points.column(i) * (w[i] / total);
    }

    let mut h = DMatrix::zeros(dim, dim);
    let mut spread = DMatrix::zeros(dim, used.len());
    for (col, &i) in used.iter().enumerate() {
        let wi = w[i] / total;
        let dc = c.column(i) - &c_bar;
        let ds = points.column(i) - &s_bar;
        h += &dc * ds.transpose() * wi;
        spread.set_column(col, &(dc * wi.sqrt()));
    }
    let scale = c.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let rank = if spread.norm() <= 1e-12 * scale {
        0
    } else {
        numerical_rank(&spread, RANK_TOL)
    };

    let rotation = if rank == 0 {
        DMatrix::identity(dim, dim)
    } else {
        let svd = h.svd(true, true);
        let u = svd.u.expect("u requested");
        let v = svd.v_t.expect("v_t requested").transpose();
        let mut diag = DVector::from_element(dim, 1.0);
        diag[dim - 1] = (&v * u.transpose()).determinant().signum();
        &v * DMatrix::from_diagonal(&diag) * u.transpose()
    };
    let translation = &s_bar - &rotation * &c_bar;
    let pose = Pose::new(rotation, translation)?;

    let sq: f64 = used
        .iter()
        .map(|&i| (points.column(i) - pose.transform_point(&c.column(i).into_owned())).norm_squared())
        .sum();
    Ok(PoseEstimate {
        stage2_residual_rms: (sq / used.len() as f64).sqrt(),
        pose,
        stage1_residual_rms: 0.0,
        iterations_used: 0,
        rotation_unique: rank + 1 >= dim,
        used_nodes: used,
        ambiguous_nodes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_pose, random_pose, rotation_2d};
    use crate::rng::seed_stream;
    use rand::Rng;

    #[test]
    fn recovers_exact_pose() {
        let mut rng = seed_stream(21);
        for dim in [2, 3] {
            for _ in 0..20 {
                let conf =
                    Conformation::new(DMatrix::from_fn(dim, 6, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
                let truth = random_pose(&mut rng, &DVector::zeros(dim), 50.0).unwrap();
                let s = apply_pose(&conf, &truth).unwrap();
                let est = fit_pose_procrustes(&conf, s.positions(), None).unwrap();
                assert!((est.pose.rotation() - truth.rotation()).norm() < 1e-9);
                assert!(est.pose.translation_error(&truth) < 1e-9);
                assert!(est.rotation_unique);
            }
        }
    }

    #[test]
    fn single_node_gives_identity_rotation() {
        let conf = Conformation::from_points(2, &[vec![1.0, 2.0]]).unwrap();
        let s = DMatrix::from_column_slice(2, 1, &[5.0, -1.0]);
        let est = fit_pose_procrustes(&conf, &s, None).unwrap();
        assert_eq!(est.pose.rotation(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(est.pose.translation().as_slice(), &[4.0, -3.0]);
        assert!(!est.rotation_unique);
    }

    #[test]
    fn collinear_nodes_in_3d_are_not_unique() {
        let conf = Conformation::from_points(
            3,
            &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]],
        )
        .unwrap();
        let est = fit_pose_procrustes(&conf, conf.coords(), None).unwrap();
        assert!(!est.rotation_unique);
        assert!(est.stage2_residual_rms < 1e-12);
    }

    #[test]
    fn mirrored_input_still_proper_and_optimal() {
        // brute force over a fine rotation grid finds the best proper fit
        let mut rng = seed_stream(4);
        let conf = Conformation::new(DMatrix::from_fn(2, 5, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        let mirror = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let s = &mirror * conf.coords();
        let est = fit_pose_procrustes(&conf, &s, None).unwrap();
        assert!((est.pose.rotation().determinant() - 1.0).abs() < 1e-12);

        let objective = |r: &DMatrix<f64>| {
            let rc = r * conf.coords();
            let t = crate::geometry::geometric_center(&s) - crate::geometry::geometric_center(&rc);
            (0..5)
                .map(|i| (s.column(i) - rc.column(i) - &t).norm_squared())
                .sum::<f64>()
        };
        let steps = (std::f64::consts::TAU / 1e-3).ceil() as usize;
        let brute = (0..steps)
            .map(|i| objective(&rotation_2d(i as f64 * 1e-3)))
            .fold(f64::INFINITY, f64::min);
        let ours = objective(est.pose.rotation());
        assert!(ours <= brute + 1e-12);
        // grid resolution: objective is smooth, so the grid min is within O(h²)
        assert!(brute - ours < 1e-5 * (1.0 + brute));
    }

    #[test]
    fn weights_are_validated() {
        let conf = Conformation::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(fit_pose_procrustes(&conf, conf.coords(), Some(&[0.0, 0.0])).is_err());
        assert!(fit_pose_procrustes(&conf, conf.coords(), Some(&[1.0, -1.0])).is_err());
        assert!(fit_pose_procrustes(&conf, conf.coords(), Some(&[1.0])).is_err());
    }

    #[test]
    fn zero_weight_nodes_are_ignored() {
        let conf = Conformation::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let pose = Pose::planar(0.4, 2.0, 1.0);
        let mut s = apply_pose(&conf, &pose).unwrap().positions().clone();
        s[(0, 2)] = f64::NAN;
        let est = fit_pose_procrustes(&conf, &s, Some(&[1.0, 1.0, 0.0])).unwrap();
        assert!(est.pose.rotation_error(&pose) < 1e-12);
        assert_eq!(est.used_nodes, vec![0, 1]);
    }

    #[test]
    fn serializes_with_residuals() {
        let conf = Conformation::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let est = fit_pose_procrustes(&conf, conf.coords(), None).unwrap();
        let js = serde_json::to_value(&est).unwrap();
        assert!(js.get("R").is_some() && js.get("t").is_some());
        assert!(js["residuals"].get("stage2").is_some());
    }
}
