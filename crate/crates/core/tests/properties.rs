//! Randomized properties across modules.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use rbl_core::completion::{complete_edm, edm_to_points, CompletionOptions};
use rbl_core::estimators::{fit_pose_procrustes, rbl_two_stage, TwoStageOptions};
use rbl_core::geometry::{apply_pose, random_pose, rotation_2d, squared_distances, Conformation};
use rbl_core::measurement::{simulate_ranges, AnchorSet, PartialEdm, VisibilityModel};
use rbl_core::placement::frame_potential;
use rbl_core::rng::{derive_seed, seed_stream};

fn points(dim: usize, n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-5.0..5.0f64, dim * n).prop_map(move |v| DMatrix::from_vec(dim, n, v))
}

fn well_spread(p: &DMatrix<f64>) -> bool {
    rbl_core::geometry::affine_rank(p) == p.nrows()
        && (0..p.ncols()).all(|i| (0..i).all(|j| (p.column(i) - p.column(j)).norm() > 0.2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn procrustes_returns_a_proper_rotation(c in points(3, 5), p in points(3, 5)) {
        let conf = Conformation::new(c).unwrap();
        let est = fit_pose_procrustes(&conf, &p, None).unwrap();
        let r = est.pose.rotation();
        prop_assert!((r.transpose() * r - DMatrix::identity(3, 3)).abs().max() < 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_stage_is_exact_without_noise(c in points(3, 6), seed in any::<u64>()) {
        prop_assume!(well_spread(&c));
        let conf = Conformation::new(c).unwrap();
        let anchors = AnchorSet::cube(3, &DVector::zeros(3), 60.0).unwrap();
        let mut rng = seed_stream(seed);
        let truth = random_pose(&mut rng, &DVector::zeros(3), 10.0).unwrap();
        let body = apply_pose(&conf, &truth).unwrap();
        let ranges = simulate_ranges(&anchors, &body, 0.0, VisibilityModel::All, &mut rng).unwrap();
        let est = rbl_two_stage(&anchors, &ranges, &conf, &TwoStageOptions::default()).unwrap();
        prop_assert!(est.pose.translation_error(&truth) < 1e-6);
        prop_assert!(est.pose.rotation_error(&truth) < 1e-6);
    }

    #[test]
    fn frame_potential_bound_and_rotation_invariance(
        angles in prop::collection::vec(0.0..std::f64::consts::TAU, 1..9),
        spin in 0.0..std::f64::consts::TAU,
    ) {
        let m = angles.len();
        let u = DMatrix::from_fn(2, m, |r, c| if r == 0 { angles[c].cos() } else { angles[c].sin() });
        let fp = frame_potential(&u).unwrap();
        let bound = if m >= 2 { (m * m) as f64 / 2.0 } else { 1.0 };
        prop_assert!(fp >= bound - 1e-9);
        prop_assert!(fp <= (m * m) as f64 + 1e-9);
        let rotated = frame_potential(&(rotation_2d(spin) * &u)).unwrap();
        prop_assert!((fp - rotated).abs() < 1e-9);
    }

    #[test]
    fn mds_round_trip(p in points(3, 7)) {
        let sq = squared_distances(&p);
        let emb = edm_to_points(&sq, 3).unwrap();
        prop_assert!((squared_distances(&emb.points) - &sq).abs().max() < 1e-8);
    }

    #[test]
    fn completion_keeps_known_entries(p in points(2, 8), hide in prop::collection::vec((0usize..4, 4usize..8), 1..4)) {
        let partial = PartialEdm::from_points(&p, 4).unwrap().hide(&hide).unwrap();
        let res = complete_edm(&partial, &CompletionOptions::default()).unwrap();
        let c = res.completed();
        for i in 0..8 {
            prop_assert_eq!(c[(i, i)], 0.0);
            for j in 0..8 {
                prop_assert_eq!(c[(i, j)], c[(j, i)]);
                prop_assert!(c[(i, j)] >= 0.0);
                if let Some(v) = partial.squared(i, j) {
                    prop_assert_eq!(c[(i, j)], v);
                }
            }
        }
    }

    #[test]
    fn derived_seeds_separate_paths(master in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(master, &[a]), derive_seed(master, &[b]));
        prop_assert_ne!(derive_seed(master, &[a, b]), derive_seed(master, &[b, a]));
    }
}
