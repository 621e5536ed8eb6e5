//! Experiment configuration: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::layout::box_vehicle;
use crate::error::{RblError, Result};
use crate::estimators::{TwoStageOptions, Weighting};
use crate::geometry::Conformation;
use crate::measurement::{AnchorSet, VisibilityModel};
use crate::placement::{anchors_from_directions, clustered_directions, optimize_placement, PlacementProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    RmseVsSensors,
    RmseVsNoise,
    CompletionBenchmark,
    AnchorlessTwoBody,
    MotionTracking,
    PlacementStudy,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::RmseVsSensors => "rmse_vs_sensors",
            Scenario::RmseVsNoise => "rmse_vs_noise",
            Scenario::CompletionBenchmark => "completion_benchmark",
            Scenario::AnchorlessTwoBody => "anchorless_two_body",
            Scenario::MotionTracking => "motion_tracking",
            Scenario::PlacementStudy => "placement_study",
        }
    }
}

/// Where the body layout comes from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformationSource {
    #[default]
    BoxVehicle,
    /// JSON file `{"dim": D, "coords": [[...], ...]}`; relative paths are
    /// resolved against the config file's directory.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AnchorLayout {
    /// Vertices of an axis-aligned cube (square in 2D) around the origin.
    Cube {
        side: f64,
    },
    Points(Vec<Vec<f64>>),
}

impl Default for AnchorLayout {
    fn default() -> Self {
        AnchorLayout::Cube { side: 60.0 }
    }
}

impl AnchorLayout {
    pub fn build(&self, dim: usize) -> Result<AnchorSet> {
        match self {
            AnchorLayout::Cube { side } => AnchorSet::cube(dim, &DVector::zeros(dim), *side),
            AnchorLayout::Points(p) => AnchorSet::from_points(dim, p),
        }
    }
}

/// Settings of the placement study: an optimized tight-frame layout is
/// compared against the same number of anchors packed in a narrow arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementSettings {
    pub num_anchors: usize,
    pub radius: f64,
    pub spread_deg: f64,
    pub restarts: usize,
}

impl Default for PlacementSettings {
    fn default() -> Self {
        Self {
            num_anchors: 6,
            radius: 30.0,
            spread_deg: 5.0,
            restarts: 20,
        }
    }
}

impl PlacementSettings {
    pub fn tight(&self, dim: usize, seed: u64) -> Result<AnchorSet> {
        let res = optimize_placement(&PlacementProblem {
            num_anchors: self.num_anchors,
            dim,
            target_center: vec![0.0; dim],
            anchor_radius: self.radius,
            seed,
            restarts: self.restarts,
        })?;
        res.anchors()
    }

    pub fn clustered(&self, dim: usize) -> Result<AnchorSet> {
        let u = clustered_directions(dim, self.num_anchors, self.spread_deg)?;
        anchors_from_directions(&DVector::zeros(dim), self.radius, &u)
    }
}

/// Random body velocities for the tracking scenario: every component of
/// `ω` (rad/s) and `ṫ` (m/s) is zero-mean Gaussian with these deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSettings {
    pub omega_sigma: f64,
    pub speed_sigma: f64,
}

impl Default for MotionSettings {
    fn default() -> Self {
        Self {
            omega_sigma: 0.5,
            speed_sigma: 10.0,
        }
    }
}

fn default_dim() -> usize {
    3
}

fn default_sigmas() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.5]
}

fn default_trials() -> usize {
    100
}

fn default_half_extent() -> f64 {
    10.0
}

fn default_estimator() -> TwoStageOptions {
    TwoStageOptions {
        weighting: Weighting::Uniform,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub conformation: ConformationSource,
    #[serde(default)]
    pub anchors: AnchorLayout,
    /// Range noise standard deviations (m).
    #[serde(default = "default_sigmas")]
    pub sigma_list: Vec<f64>,
    /// Sensors per body. Filled from the layout size when omitted.
    #[serde(default)]
    pub sensor_counts: Option<Vec<usize>>,
    /// Fraction of measurements dropped at random.
    #[serde(default)]
    pub missing_fraction: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_estimator")]
    pub estimator: TwoStageOptions,
    /// Body translations are uniform in `± pose_half_extent` (m) per axis.
    #[serde(default = "default_half_extent")]
    pub pose_half_extent: f64,
    #[serde(default)]
    pub visibility: VisibilityModel,
    #[serde(default)]
    pub placement: PlacementSettings,
    #[serde(default)]
    pub motion: MotionSettings,
}

impl ExperimentConfig {
    /// Defaults for everything but the scenario.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            dim: default_dim(),
            conformation: ConformationSource::default(),
            anchors: AnchorLayout::default(),
            sigma_list: default_sigmas(),
            sensor_counts: None,
            missing_fraction: 0.0,
            trials: default_trials(),
            master_seed: 0,
            estimator: default_estimator(),
            pose_half_extent: default_half_extent(),
            visibility: VisibilityModel::All,
            placement: PlacementSettings::default(),
            motion: MotionSettings::default(),
        }
    }

    /// The full body layout.
    pub fn conformation(&self) -> Result<Conformation> {
        match &self.conformation {
            ConformationSource::BoxVehicle => box_vehicle(self.dim, None),
            ConformationSource::File(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| RblError::io(p, e))?;
                serde_json::from_str(&text).map_err(|source| RblError::Parse {
                    path: p.display().to_string(),
                    source,
                })
            }
        }
    }

    pub fn sensor_counts(&self) -> Vec<usize> {
        self.sensor_counts.clone().unwrap_or_default()
    }

    /// Check every field and fill the layout-dependent defaults.
    pub fn validate(&mut self) -> Result<()> {
        fn field(name: &str, reason: impl Into<String>) -> RblError {
            RblError::config(name, reason)
        }
        if self.dim != 2 && self.dim != 3 {
            return Err(field("dim", format!("must be 2 or 3, got {}", self.dim)));
        }
        if self.trials == 0 {
            return Err(field("trials", "must be at least 1"));
        }
        if self.sigma_list.is_empty() {
            return Err(field("sigma_list", "must not be empty"));
        }
        if let Some(s) = self.sigma_list.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(field(
                "sigma_list",
                format!("noise levels must be finite and >= 0, got {s}"),
            ));
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return Err(field("missing_fraction", "must be in [0, 1)"));
        }
        if !(self.pose_half_extent.is_finite() && self.pose_half_extent >= 0.0) {
            return Err(field("pose_half_extent", "must be finite and >= 0"));
        }
        let conf = self
            .conformation()
            .map_err(|e| field("conformation", e.to_string()))?;
        if conf.dim() != self.dim {
            return Err(field(
                "conformation",
                format!("layout is {}D but dim is {}", conf.dim(), self.dim),
            ));
        }
        let nodes = conf.num_nodes();
        let counts = self.sensor_counts.get_or_insert_with(|| default_counts(nodes));
        if counts.is_empty() {
            return Err(field("sensor_counts", "must not be empty"));
        }
        if let Some(k) = counts.iter().find(|&&k| k < 2) {
            return Err(field(
                "sensor_counts",
                format!("{k} sensor(s) cannot fix a pose; need at least 2"),
            ));
        }
        if let Some(k) = counts.iter().find(|&&k| k > nodes) {
            return Err(field(
                "sensor_counts",
                format!("{k} exceeds the {nodes} nodes of the layout"),
            ));
        }
        match &self.anchors {
            AnchorLayout::Cube { side } if !(side.is_finite() && *side > 0.0) => {
                return Err(field("anchors", "cube side must be positive"));
            }
            a => {
                a.build(self.dim).map_err(|e| field("anchors", e.to_string()))?;
            }
        }
        let p = &self.placement;
        if p.num_anchors == 0 || p.restarts == 0 {
            return Err(field("placement", "num_anchors and restarts must be at least 1"));
        }
        if !(p.radius.is_finite() && p.radius > 0.0) {
            return Err(field("placement", "radius must be positive"));
        }
        if !(p.spread_deg > 0.0 && p.spread_deg <= 360.0) {
            return Err(field("placement", "spread_deg must be in (0, 360]"));
        }
        let m = &self.motion;
        if !(m.omega_sigma.is_finite()
            && m.omega_sigma >= 0.0
            && m.speed_sigma.is_finite()
            && m.speed_sigma >= 0.0)
        {
            return Err(field("motion", "deviations must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|e| RblError::io(path, e))
    }
}

/// Even counts up to the layout size, plus the full layout.
fn default_counts(nodes: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (2..=nodes.min(10)).step_by(2).collect();
    if nodes > 10 {
        v.push(nodes.min(14));
    }
    if v.is_empty() {
        v.push(nodes);
    }
    v
}

/// Parse, resolve relative paths, validate and fill defaults.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| RblError::io(path, e))?;
    parse_config(&text, path)
}

/// Like [`load_config`] for in-memory text; `origin` names the source in
/// errors and anchors relative conformation paths.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|source| RblError::Parse {
        path: origin.display().to_string(),
        source,
    })?;
    if let ConformationSource::File(p) = &mut cfg.conformation {
        if p.is_relative() {
            if let Some(dir) = origin.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
