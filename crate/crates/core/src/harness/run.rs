//! Seeded Monte-Carlo sweeps.
//!
//! Every (row, trial) pair is an independent work unit. Trial `i` at noise
//! level `s` draws from streams derived from `(master_seed, s, i)`, shared by
//! every sensor count and anchor layout at that noise level, so rows differ
//! only in what they are meant to compare. Results are collected in order,
//! which makes the table independent of the thread count.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::{AnchorLayout, ExperimentConfig, Scenario};
use super::output::{ResultRow, ResultTable};
use crate::completion::{complete_edm, CompletionOptions};
use crate::error::{RblError, Result};
use crate::estimators::{estimate_motion, rbl_two_stage, relative_pose_anchorless, relative_pose_from_edm};
use crate::geometry::{apply_pose, random_pose, BodyMotion, Conformation, Pose};
use crate::measurement::{
    assemble_two_body_edm, simulate_cross_ranges, simulate_range_rates, simulate_ranges, AnchorSet,
};
use crate::rng::{derive_seed, derived_stream, SeedStream};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "RBL_THREADS";

/// Thread count requested through `RBL_THREADS`, if any.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RblError::config(
                THREADS_ENV,
                format!("expected a positive integer, got `{v}`"),
            )),
        },
    }
}

/// Run the configured sweep using `RBL_THREADS` worker threads (all cores
/// when unset).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_with_threads(config, threads_from_env()?)
}

pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<ResultTable> {
    let mut cfg = config.clone();
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| RblError::config(THREADS_ENV, e.to_string()))?;
    pool.install(|| run(&cfg))
}

struct RowSpec {
    sigma_idx: usize,
    sigma: f64,
    conf: Conformation,
    anchors: Option<AnchorSet>,
    label: &'static str,
}

fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let full = cfg.conformation()?;
    let counts = cfg.sensor_counts();
    let layouts: Vec<(Option<AnchorSet>, &'static str)> = match cfg.scenario {
        Scenario::AnchorlessTwoBody | Scenario::CompletionBenchmark => vec![(None, "none")],
        Scenario::PlacementStudy => vec![
            (Some(cfg.placement.tight(cfg.dim, cfg.master_seed)?), "tight"),
            (Some(cfg.placement.clustered(cfg.dim)?), "clustered"),
        ],
        _ => {
            let label = match cfg.anchors {
                AnchorLayout::Cube { .. } => "cube",
                AnchorLayout::Points(_) => "points",
            };
            vec![(Some(cfg.anchors.build(cfg.dim)?), label)]
        }
    };
    let mut specs = Vec::new();
    for (sigma_idx, &sigma) in cfg.sigma_list.iter().enumerate() {
        for &k in &counts {
            for (anchors, label) in &layouts {
                specs.push(RowSpec {
                    sigma_idx,
                    sigma,
                    conf: full.prefix(k)?,
                    anchors: anchors.clone(),
                    label,
                });
            }
        }
    }
    let trials = cfg.trials;
    let outcomes: Vec<Option<(f64, f64)>> = (0..specs.len() * trials)
        .into_par_iter()
        .map(|unit| {
            let (spec, trial) = (&specs[unit / trials], unit % trials);
            let seed = derive_seed(cfg.master_seed, &[spec.sigma_idx as u64, trial as u64]);
            run_trial(cfg, spec, seed).ok()
        })
        .collect();
    let rows = specs
        .iter()
        .zip(outcomes.chunks(trials))
        .map(|(spec, out)| {
            ResultRow::from_errors(
                spec.sigma,
                spec.conf.num_nodes(),
                cfg.missing_fraction,
                spec.label,
                out,
            )
        })
        .collect();
    Ok(ResultTable {
        scenario: cfg.scenario,
        rows,
    })
}

/// Independent streams for the pose, the noise and the missing-data mask.
fn streams(seed: u64) -> (SeedStream, SeedStream, SeedStream) {
    (
        derived_stream(seed, &[0]),
        derived_stream(seed, &[1]),
        derived_stream(seed, &[2]),
    )
}

fn run_trial(cfg: &ExperimentConfig, spec: &RowSpec, seed: u64) -> Result<(f64, f64)> {
    match cfg.scenario {
        Scenario::RmseVsSensors | Scenario::RmseVsNoise | Scenario::PlacementStudy => {
            pose_trial(cfg, spec, seed)
        }
        Scenario::MotionTracking => motion_trial(cfg, spec, seed),
        Scenario::AnchorlessTwoBody | Scenario::CompletionBenchmark => two_body_trial(cfg, spec, seed),
    }
}

fn anchors_of(spec: &RowSpec) -> Result<&AnchorSet> {
    spec.anchors
        .as_ref()
        .ok_or_else(|| RblError::invalid("scenario needs anchors"))
}

/// Mask dropping each anchor-node pair with probability `fraction`, drawn
/// node by node so a smaller body sees the same mask on its nodes.
fn random_drop_mask(rng: &mut SeedStream, anchors: usize, nodes: usize, fraction: f64) -> DMatrix<bool> {
    let mut mask = DMatrix::from_element(anchors, nodes, true);
    for node in 0..nodes {
        for a in 0..anchors {
            mask[(a, node)] = rng.gen::<f64>() >= fraction;
        }
    }
    mask
}

/// Pose from simulated ranges; returns `(translation error, rotation error)`.
fn estimate_pose(cfg: &ExperimentConfig, spec: &RowSpec, seed: u64) -> Result<(Pose, Pose)> {
    let anchors = anchors_of(spec)?;
    let (mut pose_rng, mut noise_rng, mut mask_rng) = streams(seed);
    let truth = random_pose(&mut pose_rng, &DVector::zeros(cfg.dim), cfg.pose_half_extent)?;
    let body = apply_pose(&spec.conf, &truth)?;
    let mut ranges = simulate_ranges(anchors, &body, spec.sigma, cfg.visibility, &mut noise_rng)?;
    if cfg.missing_fraction > 0.0 {
        let drop = random_drop_mask(
            &mut mask_rng,
            anchors.len(),
            body.num_nodes(),
            cfg.missing_fraction,
        );
        let mask = ranges.as_masked().mask().zip_map(&drop, |a, b| a && b);
        ranges = ranges.with_mask(&mask)?;
    }
    let est = rbl_two_stage(anchors, &ranges, &spec.conf, &cfg.estimator)?;
    Ok((est.pose, truth))
}

fn pose_trial(cfg: &ExperimentConfig, spec: &RowSpec, seed: u64) -> Result<(f64, f64)> {
    let (est, truth) = estimate_pose(cfg, spec, seed)?;
    Ok((est.translation_error(&truth), est.rotation_error(&truth)))
}

/// Velocity errors `(|ṫ - ṫ_true|, |ω - ω_true|)` with the pose itself
/// estimated from the same trial's ranges.
fn motion_trial(cfg: &ExperimentConfig, spec: &RowSpec, seed: u64) -> Result<(f64, f64)> {
    let anchors = anchors_of(spec)?;
    let (est, truth) = estimate_pose(cfg, spec, seed)?;
    let mut rng = derived_stream(seed, &[3]);
    let omega_dist =
        Normal::new(0.0, cfg.motion.omega_sigma).map_err(|e| RblError::config("motion", e.to_string()))?;
    let speed_dist =
        Normal::new(0.0, cfg.motion.speed_sigma).map_err(|e| RblError::config("motion", e.to_string()))?;
    let n_ang = if cfg.dim == 2 { 1 } else { 3 };
    let omega = DVector::from_fn(n_ang, |_, _| omega_dist.sample(&mut rng));
    let t_dot = DVector::from_fn(cfg.dim, |_, _| speed_dist.sample(&mut rng));
    let motion = BodyMotion::new(omega, t_dot)?;
    let rates = simulate_range_rates(anchors, &spec.conf, &truth, &motion, spec.sigma, &mut rng)?;
    let got = estimate_motion(anchors, &est, &spec.conf, &rates)?.motion;
    Ok((
        (got.t_dot() - motion.t_dot()).norm(),
        (got.omega() - motion.omega()).norm(),
    ))
}

/// Relative pose of two identical bodies from their cross ranges. The
/// completion benchmark hides a share of the cross entries and completes
/// the EDM first.
fn two_body_trial(cfg: &ExperimentConfig, spec: &RowSpec, seed: u64) -> Result<(f64, f64)> {
    let (mut pose_rng, mut noise_rng, mut mask_rng) = streams(seed);
    let center = DVector::zeros(cfg.dim);
    let p1 = random_pose(&mut pose_rng, &center, cfg.pose_half_extent)?;
    let p2 = random_pose(&mut pose_rng, &center, cfg.pose_half_extent)?;
    let b1 = apply_pose(&spec.conf, &p1)?;
    let b2 = apply_pose(&spec.conf, &p2)?;
    let truth = p1.inverse().compose(&p2)?;
    let cross = simulate_cross_ranges(&b1, &b2, spec.sigma, cfg.visibility, &mut noise_rng)?;
    let est = if cfg.scenario == Scenario::AnchorlessTwoBody {
        relative_pose_anchorless(&spec.conf, &spec.conf, cross.as_masked())?
    } else {
        let (k1, k2) = (cross.nrows(), cross.ncols());
        let mut pairs: Vec<(usize, usize)> = (0..k1).flat_map(|i| (0..k2).map(move |j| (i, j))).collect();
        pairs.shuffle(&mut mask_rng);
        let hide = (cfg.missing_fraction * pairs.len() as f64).round() as usize;
        let mut mask = cross.as_masked().mask().clone();
        for &(i, j) in &pairs[..hide] {
            mask[(i, j)] = false;
        }
        let partial = assemble_two_body_edm(&spec.conf, &spec.conf, &cross.as_masked().with_mask(&mask)?)?;
        let done = complete_edm(&partial, &CompletionOptions::default())?;
        relative_pose_from_edm(&spec.conf, &spec.conf, done.completed())?
    };
    Ok((
        est.pose.translation_error(&truth),
        est.pose.rotation_error(&truth),
    ))
}
