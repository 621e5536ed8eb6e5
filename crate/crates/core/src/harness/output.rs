//! Result tables and their CSV / JSON / plot-data emission.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::Scenario;
use crate::error::{RblError, Result};
use crate::stats::RmseSummary;

/// One sweep point. Columns keep this order in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sigma: f64,
    pub sensors: usize,
    pub missing_fraction: f64,
    /// Anchor layout label (`cube`, `points`, `tight`, `clustered`, `none`).
    pub anchors: String,
    pub trials: usize,
    pub failures: usize,
    /// Empty when every trial failed.
    pub translation_rmse: Option<f64>,
    pub translation_se: Option<f64>,
    pub rotation_rmse: Option<f64>,
    pub rotation_se: Option<f64>,
}

impl ResultRow {
    pub(crate) fn from_errors(
        sigma: f64,
        sensors: usize,
        missing_fraction: f64,
        anchors: &str,
        outcomes: &[Option<(f64, f64)>],
    ) -> Self {
        let ok: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
        let t = RmseSummary::from_errors(&ok.iter().map(|e| e.0).collect::<Vec<_>>());
        let r = RmseSummary::from_errors(&ok.iter().map(|e| e.1).collect::<Vec<_>>());
        Self {
            sigma,
            sensors,
            missing_fraction,
            anchors: anchors.to_string(),
            trials: outcomes.len(),
            failures: outcomes.len() - ok.len(),
            translation_rmse: t.map(|s| s.rmse),
            translation_se: t.map(|s| s.se),
            rotation_rmse: r.map(|s| s.rmse),
            rotation_se: r.map(|s| s.se),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub scenario: Scenario,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// The row at `(sigma, sensors)`, first match.
    pub fn row(&self, sigma: f64, sensors: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sigma == sigma && r.sensors == sensors)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|source| RblError::Csv {
                path: "<memory>".into(),
                source,
            })?;
        }
        let bytes = w.into_inner().expect("in-memory writer");
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(scenario: Scenario, text: &str) -> Result<Self> {
        let rows = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()
            .map_err(|source| RblError::Csv {
                path: "<memory>".into(),
                source,
            })?;
        Ok(Self { scenario, rows })
    }

    /// `(x, y, series)` points per metric; the x axis and the series key
    /// depend on the scenario.
    pub fn plot_data(&self) -> Vec<(&'static str, Vec<PlotPoint>)> {
        let by_sensors = matches!(
            self.scenario,
            Scenario::RmseVsSensors | Scenario::AnchorlessTwoBody | Scenario::CompletionBenchmark
        );
        let metric = |name: &'static str, pick: fn(&ResultRow) -> Option<f64>| {
            let pts = self
                .rows
                .iter()
                .filter_map(|r| {
                    let y = pick(r)?;
                    let (x, series) = if by_sensors {
                        (r.sensors as f64, format!("sigma={}", r.sigma))
                    } else if self.scenario == Scenario::PlacementStudy {
                        (r.sigma, format!("{} K={}", r.anchors, r.sensors))
                    } else {
                        (r.sigma, format!("K={}", r.sensors))
                    };
                    Some(PlotPoint { x, y, series })
                })
                .collect();
            (name, pts)
        };
        vec![
            metric("translation_rmse", |r| r.translation_rmse),
            metric("rotation_rmse", |r| r.rotation_rmse),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    PlotData,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "plot-data" => Ok(Self::PlotData),
            _ => Err(format!("unknown format `{s}`; use csv, json or plot-data")),
        }
    }
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| RblError::io(&path, e))?;
    Ok(path)
}

/// Write the table into `out_dir` (created if missing) and return the paths
/// written: `results.csv`, `results.json`, or one `plot_<metric>.csv` per
/// metric.
pub fn emit_results(table: &ResultTable, format: OutputFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(RblError::invalid("result table is empty"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| RblError::io(out_dir, e))?;
    match format {
        OutputFormat::Csv => Ok(vec![write(out_dir.join("results.csv"), &table.to_csv()?)?]),
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(table).expect("table serializes");
            Ok(vec![write(out_dir.join("results.json"), &text)?])
        }
        OutputFormat::PlotData => table
            .plot_data()
            .into_iter()
            .map(|(name, pts)| {
                let path = out_dir.join(format!("plot_{name}.csv"));
                let mut w = csv::Writer::from_path(&path).map_err(|source| RblError::Csv {
                    path: path.display().to_string(),
                    source,
                })?;
                for p in &pts {
                    w.serialize(p).map_err(|source| RblError::Csv {
                        path: path.display().to_string(),
                        source,
                    })?;
                }
                w.flush().map_err(|e| RblError::io(&path, e))?;
                Ok(path)
            })
            .collect(),
    }
}
