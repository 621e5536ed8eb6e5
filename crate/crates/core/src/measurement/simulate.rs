use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::visibility::Occluder;
use super::{wrap_angle, AnchorSet, AngleMeasurements, Bearing, MaskedMatrix, MaskedRangeMatrix};
use crate::error::{check_dim, RblError, Result};
use crate::geometry::{body_velocities, BodyMotion, Conformation, PlacedBody, Pose};

/// Which anchor-node paths are observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityModel {
    /// Every path is line of sight.
    #[default]
    All,
    /// Paths through the interior of the body's convex hull are blocked.
    Hull,
}

fn visibility_mask(
    from: &DMatrix<f64>,
    to: &DMatrix<f64>,
    occluders: &[&PlacedBody],
    model: VisibilityModel,
) -> Result<DMatrix<bool>> {
    let mut mask = DMatrix::from_element(from.ncols(), to.ncols(), true);
    if model == VisibilityModel::All {
        return Ok(mask);
    }
    let occ: Vec<Occluder> = occluders.iter().map(|b| Occluder::new(b)).collect();
    for n in 0..from.ncols() {
        let p = from.column(n).into_owned();
        for m in 0..to.ncols() {
            let q = to.column(m).into_owned();
            for o in &occ {
                if o.blocks(&p, &q)? {
                    mask[(n, m)] = false;
                    break;
                }
            }
        }
    }
    Ok(mask)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(RblError::invalid(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    Ok(())
}

/// Gaussian-noise ranges between every anchor and node, clamped at 0.
///
/// Noise is drawn node by node (all anchors of node 0, then node 1, ...) and
/// for every pair whether it is visible or not, so a body that is a prefix of
/// another sees identical noise on its shared nodes.
pub fn simulate_ranges<R: Rng + ?Sized>(
    anchors: &AnchorSet,
    body: &PlacedBody,
    sigma: f64,
    visibility: VisibilityModel,
    rng: &mut R,
) -> Result<MaskedRangeMatrix> {
    check_sigma(sigma)?;
    check_dim(anchors.dim(), body.dim())?;
    let (m, k) = (anchors.len(), body.num_nodes());
    let mut values = DMatrix::zeros(m, k);
    for node in 0..k {
        let s = body.positions().column(node);
        for a in 0..m {
            let eps: f64 = rng.sample(StandardNormal);
            let d = (anchors.positions().column(a) - s).norm();
            values[(a, node)] = (d + sigma * eps).max(0.0);
        }
    }
    let mask = visibility_mask(anchors.positions(), body.positions(), &[body], visibility)?;
    MaskedRangeMatrix::new(values, mask, sigma)
}

/// Sensor-to-sensor ranges between two bodies (K1 x K2). Under the hull
/// model either body can block a path; blockage is symmetric.
pub fn simulate_cross_ranges<R: Rng + ?Sized>(
    body1: &PlacedBody,
    body2: &PlacedBody,
    sigma: f64,
    visibility: VisibilityModel,
    rng: &mut R,
) -> Result<MaskedRangeMatrix> {
    check_sigma(sigma)?;
    check_dim(body1.dim(), body2.dim())?;
    let (k1, k2) = (body1.num_nodes(), body2.num_nodes());
    let mut values = DMatrix::zeros(k1, k2);
    for j in 0..k2 {
        for i in 0..k1 {
            let eps: f64 = rng.sample(StandardNormal);
            let d = (body1.positions().column(i) - body2.positions().column(j)).norm();
            values[(i, j)] = (d + sigma * eps).max(0.0);
        }
    }
    let mask = visibility_mask(body1.positions(), body2.positions(), &[body1, body2], visibility)?;
    MaskedRangeMatrix::new(values, mask, sigma)
}

/// Angle-of-arrival of every node as seen from every anchor, with
/// independent Gaussian noise on azimuth and elevation.
pub fn simulate_aoa<R: Rng + ?Sized>(
    anchors: &AnchorSet,
    body: &PlacedBody,
    sigma_rad: f64,
    visibility: VisibilityModel,
    rng: &mut R,
) -> Result<AngleMeasurements> {
    check_sigma(sigma_rad)?;
    check_dim(anchors.dim(), body.dim())?;
    let (m, k) = (anchors.len(), body.num_nodes());
    let three_d = anchors.dim() == 3;
    let mut az = DMatrix::zeros(m, k);
    let mut el = DMatrix::zeros(m, k);
    for node in 0..k {
        for a in 0..m {
            let dir = body.node(node) - anchors.anchor(a);
            let b = Bearing::of(&dir)?;
            let n_az: f64 = rng.sample(StandardNormal);
            let mut azimuth = b.azimuth + sigma_rad * n_az;
            if let Some(e) = b.elevation {
                let n_el: f64 = rng.sample(StandardNormal);
                let mut elevation = e + sigma_rad * n_el;
                // going over a pole flips the azimuth
                if elevation > std::f64::consts::FRAC_PI_2 {
                    elevation = std::f64::consts::PI - elevation;
                    azimuth += std::f64::consts::PI;
                } else if elevation < -std::f64::consts::FRAC_PI_2 {
                    elevation = -std::f64::consts::PI - elevation;
                    azimuth += std::f64::consts::PI;
                }
                el[(a, node)] = elevation;
            }
            az[(a, node)] = wrap_angle(azimuth);
        }
    }
    let mask = visibility_mask(anchors.positions(), body.positions(), &[body], visibility)?;
    AngleMeasurements::new(az, three_d.then_some(el), mask, sigma_rad)
}

/// Range-rates `(s_m - a_n)ᵀ ṡ_m / ||s_m - a_n||` with additive Gaussian noise.
pub fn simulate_range_rates<R: Rng + ?Sized>(
    anchors: &AnchorSet,
    conf: &Conformation,
    pose: &Pose,
    motion: &BodyMotion,
    sigma: f64,
    rng: &mut R,
) -> Result<MaskedMatrix> {
    check_sigma(sigma)?;
    check_dim(anchors.dim(), conf.dim())?;
    let body = pose.transform_points(conf.coords());
    let vel = body_velocities(conf, pose, motion)?;
    let (m, k) = (anchors.len(), conf.num_nodes());
    let mut values = DMatrix::zeros(m, k);
    for node in 0..k {
        for a in 0..m {
            let diff = body.column(node) - anchors.positions().column(a);
            let n = diff.norm();
            if n <= 1e-12 {
                return Err(RblError::Degenerate(format!(
                    "node {node} coincides with anchor {a}; range-rate undefined"
                )));
            }
            let eps: f64 = rng.sample(StandardNormal);
            values[(a, node)] = diff.dot(&vel.column(node)) / n + sigma * eps;
        }
    }
    MaskedMatrix::full(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_pose, Pose};
    use crate::rng::seed_stream;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    #[test]
    fn noiseless_ranges_are_exact() {
        let anchors = AnchorSet::cube(3, &DVector::zeros(3), 20.0).unwrap();
        let conf = Conformation::from_points(
            3,
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let body = apply_pose(&conf, &Pose::spatial([1.0, 1.0, 0.0], 0.5, [2.0, 1.0, -1.0])).unwrap();
        let r = simulate_ranges(&anchors, &body, 0.0, VisibilityModel::All, &mut seed_stream(1)).unwrap();
        assert!(r.is_complete());
        for a in 0..anchors.len() {
            for k in 0..3 {
                let d = (anchors.anchor(a) - body.node(k)).norm();
                assert!((r.get(a, k).unwrap() - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hull_visibility_masks_occluded_node() {
        // anchor collinear with two nodes; the far one hides behind the near one
        let anchors = AnchorSet::from_points(2, &[vec![-5.0, 0.0], vec![0.0, 5.0]]).unwrap();
        let body = PlacedBody::new(DMatrix::from_column_slice(2, 2, &[0.0, 0.0, 2.0, 0.0])).unwrap();
        let r = simulate_ranges(&anchors, &body, 0.0, VisibilityModel::Hull, &mut seed_stream(1)).unwrap();
        assert_eq!(r.get(0, 0), Some(5.0));
        assert_eq!(r.get(0, 1), None);
        assert!(r.get(1, 0).is_some() && r.get(1, 1).is_some());
    }

    #[test]
    fn range_noise_has_requested_spread() {
        let anchors = AnchorSet::from_points(2, &[vec![0.0, 0.0]]).unwrap();
        let body = PlacedBody::new(DMatrix::from_column_slice(2, 1, &[30.0, 40.0])).unwrap();
        let mut rng = seed_stream(5);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                simulate_ranges(&anchors, &body, 0.1, VisibilityModel::All, &mut rng)
                    .unwrap()
                    .get(0, 0)
                    .unwrap()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.002, "std {}", var.sqrt());
        assert!((mean - 50.0).abs() < 0.002);
    }

    #[test]
    fn negative_sigma_rejected() {
        let anchors = AnchorSet::from_points(2, &[vec![0.0, 0.0]]).unwrap();
        let body = PlacedBody::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert!(simulate_ranges(&anchors, &body, -0.1, VisibilityModel::All, &mut seed_stream(0)).is_err());
    }

    #[test]
    fn aoa_basic_and_pole() {
        let anchors = AnchorSet::from_points(2, &[vec![0.0, 0.0]]).unwrap();
        let body = PlacedBody::new(DMatrix::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
        let a = simulate_aoa(&anchors, &body, 0.0, VisibilityModel::All, &mut seed_stream(0)).unwrap();
        assert!((a.get(0, 0).unwrap().azimuth - PI / 4.0).abs() < 1e-15);

        let anchors = AnchorSet::from_points(3, &[vec![0.0, 0.0, 0.0]]).unwrap();
        let body = PlacedBody::new(DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0])).unwrap();
        let a = simulate_aoa(&anchors, &body, 0.0, VisibilityModel::All, &mut seed_stream(0)).unwrap();
        let b = a.get(0, 0).unwrap();
        assert_eq!(b.azimuth, 0.0);
        assert!((b.elevation.unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn aoa_noise_stays_wrapped() {
        let anchors = AnchorSet::from_points(2, &[vec![0.0, 0.0]]).unwrap();
        let body = PlacedBody::new(DMatrix::from_column_slice(2, 1, &[-1.0, 0.0])).unwrap();
        let mut rng = seed_stream(9);
        let mut crossed = 0;
        for _ in 0..5000 {
            let a = simulate_aoa(&anchors, &body, 0.2, VisibilityModel::All, &mut rng).unwrap();
            let az = a.get(0, 0).unwrap().azimuth;
            assert!(az > -PI && az <= PI);
            if az < 0.0 {
                crossed += 1;
            }
        }
        // true azimuth is π: roughly half the samples wrap to negative values
        assert!(crossed > 2000 && crossed < 3000);
    }

    #[test]
    fn aoa_translation_invariant_without_noise() {
        let anchors = AnchorSet::cube(3, &DVector::zeros(3), 10.0).unwrap();
        let conf = Conformation::from_points(3, &[vec![1.0, 0.5, 0.0], vec![-1.0, 0.0, 0.3]]).unwrap();
        let pose = Pose::spatial([0.0, 1.0, 0.0], 0.3, [0.5, 0.0, 1.0]);
        let body = apply_pose(&conf, &pose).unwrap();
        let shift = Pose::spatial([1.0, 0.0, 0.0], 0.0, [7.0, -3.0, 2.0]);
        let a1 = simulate_aoa(&anchors, &body, 0.0, VisibilityModel::All, &mut seed_stream(0)).unwrap();
        let moved_anchors = anchors.transformed(&shift).unwrap();
        let moved_body = PlacedBody::new(shift.transform_points(body.positions())).unwrap();
        let a2 = simulate_aoa(
            &moved_anchors,
            &moved_body,
            0.0,
            VisibilityModel::All,
            &mut seed_stream(0),
        )
        .unwrap();
        for n in 0..anchors.len() {
            for m in 0..2 {
                let (b1, b2) = (a1.get(n, m).unwrap(), a2.get(n, m).unwrap());
                assert!((b1.azimuth - b2.azimuth).abs() < 1e-12);
                assert!((b1.elevation.unwrap() - b2.elevation.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aoa_rejects_coincident_nodes() {
        let anchors = AnchorSet::from_points(2, &[vec![1.0, 0.0]]).unwrap();
        let body = PlacedBody::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert!(simulate_aoa(&anchors, &body, 0.0, VisibilityModel::All, &mut seed_stream(0)).is_err());
    }
}
