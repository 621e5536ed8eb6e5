use std::collections::BTreeSet;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CompletionResult;
use crate::error::{check_dim, RblError, Result};
use crate::geometry::{centered, random_rotation, rotation_2d, Conformation};
use crate::rng::seed_stream;

/// Admissible squared cross distances between two bodies, collected over a
/// set of sampled relative rotations and quantized to a fixed step.
///
/// Cross distances vary continuously with rotation, so the set is only
/// finite because of the quantization; treat it as an experimental prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceAlphabet {
    /// Sorted union over all pairs (m²).
    pub values: Vec<f64>,
    /// Sorted per-pair sets, indexed `i * K2 + j`.
    pub per_pair: Vec<Vec<f64>>,
    pub k1: usize,
    pub k2: usize,
    /// Bin width (m²). Values are bin lower edges.
    pub quantization_step: f64,
    pub rotation_samples: usize,
}

fn quantize(v: f64, step: f64) -> f64 {
    (v / step).floor() * step
}

fn sorted_unique(set: &BTreeSet<u64>) -> Vec<f64> {
    set.iter().map(|&bits| f64::from_bits(bits)).collect()
}

/// Enumerate squared cross distances with body 1 centered at the origin and
/// body 2 centered at `(center_distance, 0[, 0])`, rotating only body 2.
///
/// 2D samples the angles `2πk/n`; 3D draws `n` uniform rotations from
/// `seed`. Values are floored to multiples of `quantization_step`, so halving
/// the step never shrinks the set.
pub fn build_distance_alphabet(
    conf1: &Conformation,
    conf2: &Conformation,
    center_distance: f64,
    num_rotation_samples: usize,
    quantization_step: f64,
    seed: u64,
) -> Result<DistanceAlphabet> {
    let dim = conf1.dim();
    check_dim(dim, conf2.dim())?;
    if !(center_distance >= 0.0 && center_distance.is_finite()) {
        return Err(RblError::invalid("center distance must be finite and >= 0"));
    }
    if num_rotation_samples == 0 {
        return Err(RblError::invalid("need at least one rotation sample"));
    }
    if !(quantization_step > 0.0 && quantization_step.is_finite()) {
        return Err(RblError::invalid("quantization step must be positive"));
    }
    let (k1, k2) = (conf1.num_nodes(), conf2.num_nodes());
    let c1 = centered(conf1.coords());
    let c2 = centered(conf2.coords());
    let mut offset = DVector::zeros(dim);
    offset[0] = center_distance;

    let mut rng = seed_stream(seed);
    let rotations: Vec<DMatrix<f64>> = (0..num_rotation_samples)
        .map(|k| {
            if dim == 2 {
                Ok(rotation_2d(TAU * k as f64 / num_rotation_samples as f64))
            } else {
                random_rotation(&mut rng, dim)
            }
        })
        .collect::<Result<_>>()?;

    let mut shared = BTreeSet::new();
    let mut pairs = vec![BTreeSet::new(); k1 * k2];
    for r in &rotations {
        let placed = r * &c2;
        for i in 0..k1 {
            for j in 0..k2 {
                let d = (placed.column(j) + &offset - c1.column(i)).norm_squared();
                // +0.0 folds a -0.0 into the same key
                let q = quantize(d, quantization_step) + 0.0;
                shared.insert(q.to_bits());
                pairs[i * k2 + j].insert(q.to_bits());
            }
        }
    }
    Ok(DistanceAlphabet {
        values: sorted_unique(&shared),
        per_pair: pairs.iter().map(sorted_unique).collect(),
        k1,
        k2,
        quantization_step,
        rotation_samples: num_rotation_samples,
    })
}

fn nearest(set: &[f64], v: f64) -> f64 {
    let idx = set.partition_point(|&a| a < v);
    match (idx.checked_sub(1).map(|i| set[i]), set.get(idx).copied()) {
        (Some(lo), Some(hi)) => {
            if hi - v < v - lo {
                hi
            } else {
                lo
            }
        }
        (Some(lo), None) => lo,
        (None, Some(hi)) => hi,
        (None, None) => v,
    }
}

/// Replace every originally-unknown entry by its nearest alphabet member
/// (ties go to the smaller value). Per-pair sets are used when the
/// alphabet's body sizes match the result's two blocks.
pub fn snap_to_alphabet(result: &CompletionResult, alphabet: &DistanceAlphabet) -> Result<CompletionResult> {
    if alphabet.values.is_empty() {
        return Err(RblError::invalid("alphabet is empty"));
    }
    let n = result.completed().nrows();
    let split = result.split();
    let use_pairs = split == alphabet.k1 && n - split == alphabet.k2;
    let mut out = result.completed().clone();
    for i in 0..n {
        for j in (i + 1)..n {
            if result.known()[(i, j)] {
                continue;
            }
            let set = if use_pairs && i < split && j >= split {
                &alphabet.per_pair[i * alphabet.k2 + (j - split)]
            } else {
                &alphabet.values
            };
            let v = nearest(set, out[(i, j)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(result.with_completed(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::{complete_edm, CompletionOptions};
    use crate::measurement::PartialEdm;

    #[test]
    fn single_node_bodies_give_one_value() {
        let a = Conformation::from_points(3, &[vec![0.3, -1.0, 2.0]]).unwrap();
        let b = Conformation::from_points(3, &[vec![5.0, 5.0, 5.0]]).unwrap();
        let alpha = build_distance_alphabet(&a, &b, 2.0, 17, 0.5, 1).unwrap();
        assert_eq!(alpha.values, vec![4.0]);
    }

    #[test]
    fn matches_exhaustive_quarter_turns() {
        let a = Conformation::from_points(2, &[vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = Conformation::from_points(2, &[vec![0.0, -0.5], vec![0.0, 0.5]]).unwrap();
        // irrational step keeps exact values off bin edges
        let step = 0.1 / std::f64::consts::PI;
        let alpha = build_distance_alphabet(&a, &b, 4.0, 4, step, 0).unwrap();

        // explicit matrices for 0°, 90°, 180°, 270°
        let turns = [
            [1.0, 0.0, 0.0, 1.0],
            [0.0, -1.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0, -1.0],
            [0.0, 1.0, -1.0, 0.0],
        ];
        let mut expected: Vec<f64> = Vec::new();
        for m in turns {
            for p in [(-1.0, 0.0), (1.0, 0.0)] {
                for q in [(0.0, -0.5), (0.0, 0.5)] {
                    let x = m[0] * q.0 + m[1] * q.1 + 4.0 - p.0;
                    let y = m[2] * q.0 + m[3] * q.1 - p.1;
                    expected.push(((x * x + y * y) / step).floor() * step);
                }
            }
        }
        expected.sort_by(f64::total_cmp);
        expected.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(alpha.values.len(), expected.len());
        for (x, y) in alpha.values.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn halving_step_never_shrinks() {
        let a = Conformation::from_points(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.5]]).unwrap();
        let b = Conformation::from_points(3, &[vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let mut prev = 0;
        for k in 0..8 {
            let step = 1.0 / f64::powi(2.0, k);
            let n = build_distance_alphabet(&a, &b, 6.0, 50, step, 7)
                .unwrap()
                .values
                .len();
            assert!(n >= prev);
            prev = n;
        }
    }

    fn two_body_result() -> (CompletionResult, DMatrix<f64>) {
        let p = DMatrix::from_row_slice(
            2,
            8,
            &[
                0.0, 1.0, 0.0, 1.0, 4.0, 5.0, 4.0, 6.0, //
                0.0, 0.0, 1.0, 2.0, 0.0, 1.0, 2.0, 3.0,
            ],
        );
        let full = PartialEdm::from_points(&p, 4).unwrap();
        let truth = full.squared_with_nan().clone();
        let partial = full.hide(&[(0, 7)]).unwrap();
        (
            complete_edm(&partial, &CompletionOptions::default()).unwrap(),
            truth,
        )
    }

    #[test]
    fn snapping_rules() {
        let (res, truth) = two_body_result();
        let alpha = DistanceAlphabet {
            values: vec![10.0, 20.0, 30.0],
            per_pair: Vec::new(),
            k1: 0,
            k2: 0,
            quantization_step: 1.0,
            rotation_samples: 1,
        };
        let mut forced = res.completed().clone();
        forced[(0, 7)] = 15.0;
        forced[(7, 0)] = 15.0;
        let snapped = snap_to_alphabet(&res.with_completed(forced), &alpha).unwrap();
        // tie goes down
        assert_eq!(snapped.completed()[(0, 7)], 10.0);
        assert_eq!(snapped.completed()[(7, 0)], 10.0);
        // known entries untouched
        assert_eq!(snapped.completed()[(0, 2)], truth[(0, 2)]);
        // idempotent
        let again = snap_to_alphabet(&snapped, &alpha).unwrap();
        assert_eq!(again, snapped);
    }

    #[test]
    fn snapping_recovers_alphabet_truth() {
        let (res, truth) = two_body_result();
        // truth (0,7) = 36 + 9 = 45
        let alpha = DistanceAlphabet {
            values: vec![43.0, 45.0, 47.0],
            per_pair: Vec::new(),
            k1: 0,
            k2: 0,
            quantization_step: 2.0,
            rotation_samples: 1,
        };
        assert!((res.completed()[(0, 7)] - 45.0).abs() < 1.0);
        let snapped = snap_to_alphabet(&res, &alpha).unwrap();
        assert_eq!(snapped.completed()[(0, 7)], truth[(0, 7)]);
    }

    #[test]
    fn empty_alphabet_rejected() {
        let (res, _) = two_body_result();
        let alpha = DistanceAlphabet {
            values: Vec::new(),
            per_pair: Vec::new(),
            k1: 0,
            k2: 0,
            quantization_step: 1.0,
            rotation_samples: 0,
        };
        assert!(snap_to_alphabet(&res, &alpha).is_err());
    }
}
