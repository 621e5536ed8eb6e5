//! Command-line front end: run experiments, optimize anchor placements,
//! complete EDMs and validate configs.
//!
//! Exit codes: 0 success, 2 invalid input or config, 3 failure while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use rbl_core::completion::{complete_edm, CompletionOptions};
use rbl_core::harness::{
    box_vehicle, emit_results, load_config, run_experiment, threads_from_env, ExperimentConfig, OutputFormat,
};
use rbl_core::measurement::{write_matrix_csv, MatrixDoc, PartialEdm};
use rbl_core::placement::{evaluate_placement, optimize_placement, EvaluationOptions, PlacementProblem};
use rbl_core::RblError;

#[derive(Parser)]
#[command(name = "rbl", version, about = "Rigid body localization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of Monte-Carlo trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// csv, json or plot-data.
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write its result table.
    Run { config: PathBuf },
    /// Optimize an anchor placement, optionally evaluating it.
    Placement { config: PathBuf },
    /// Complete a partial EDM: one JSON file, or a values CSV plus an
    /// optional 0/1 mask CSV.
    Complete {
        #[arg(required = true, num_args = 1..=2)]
        files: Vec<PathBuf>,
        /// Embedding dimension (CSV input, or JSON without a `dim` field).
        #[arg(long)]
        dim: Option<usize>,
        /// Size of the first block.
        #[arg(long)]
        split: Option<usize>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

/// Error tagged with the exit code it maps to.
enum Failure {
    Invalid(RblError),
    Runtime(RblError),
}

type Outcome = Result<(), Failure>;

fn io_error(path: &Path, source: std::io::Error) -> RblError {
    RblError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn invalid(e: RblError) -> Failure {
    Failure::Invalid(e)
}

fn runtime(e: RblError) -> Failure {
    Failure::Runtime(e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(&cli, config),
        Command::Placement { config } => cmd_placement(&cli, config),
        Command::Complete { files, dim, split } => cmd_complete(&cli, files, *dim, *split),
        Command::Validate { config } => cmd_validate(&cli, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn load_with_overrides(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Failure> {
    let mut cfg = load_config(path).map_err(invalid)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    cfg.validate().map_err(invalid)?;
    threads_from_env().map_err(invalid)?;
    Ok(cfg)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn cmd_run(cli: &Cli, path: &Path) -> Outcome {
    let cfg = load_with_overrides(cli, path)?;
    let start = Instant::now();
    let table = run_experiment(&cfg).map_err(runtime)?;
    eprintln!(
        "{}: {} rows x {} trials in {:.2} s",
        cfg.scenario.name(),
        table.rows.len(),
        cfg.trials,
        start.elapsed().as_secs_f64()
    );
    report(&emit_results(&table, cli.format, &cli.out_dir).map_err(runtime)?);
    Ok(())
}

fn cmd_validate(cli: &Cli, path: &Path) -> Outcome {
    let cfg = load_with_overrides(cli, path)?;
    println!(
        "ok: {} in {}D, {} noise levels x {} sensor counts, {} trials each",
        cfg.scenario.name(),
        cfg.dim,
        cfg.sigma_list.len(),
        cfg.sensor_counts().len(),
        cfg.trials
    );
    Ok(())
}

/// Placement input: the problem plus an optional Monte-Carlo evaluation
/// on the built-in vehicle.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementJob {
    problem: PlacementProblem,
    #[serde(default)]
    evaluation: Option<EvaluationJob>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluationJob {
    sigma_list: Vec<f64>,
    #[serde(default = "default_eval_trials")]
    trials: usize,
    /// Sensors on the box vehicle.
    #[serde(default = "default_eval_sensors")]
    sensors: usize,
    #[serde(default)]
    options: EvaluationOptions,
}

fn default_eval_trials() -> usize {
    100
}

fn default_eval_sensors() -> usize {
    4
}

#[derive(serde::Serialize)]
struct EvaluationRow {
    sigma: f64,
    sensors: usize,
    trials: usize,
    failures: usize,
    translation_rmse: Option<f64>,
    translation_se: Option<f64>,
    rotation_rmse: Option<f64>,
    rotation_se: Option<f64>,
}

fn cmd_placement(cli: &Cli, path: &Path) -> Outcome {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(io_error(path, e)))?;
    let mut job: PlacementJob = serde_json::from_str(&text).map_err(|source| {
        invalid(RblError::Parse {
            path: path.display().to_string(),
            source,
        })
    })?;
    if let Some(seed) = cli.seed {
        job.problem.seed = seed;
    }
    job.problem.validate().map_err(invalid)?;
    let conf = match &job.evaluation {
        Some(ev) => {
            if ev.sigma_list.is_empty() {
                return Err(invalid(RblError::Config {
                    field: "evaluation.sigma_list".into(),
                    reason: "must not be empty".into(),
                }));
            }
            Some(box_vehicle(job.problem.dim, Some(ev.sensors)).map_err(invalid)?)
        }
        None => None,
    };

    let result = optimize_placement(&job.problem).map_err(runtime)?;
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| runtime(io_error(&cli.out_dir, e)))?;
    let out = cli.out_dir.join("placement.json");
    let doc = serde_json::to_string_pretty(&result).expect("placement serializes");
    std::fs::write(&out, doc).map_err(|e| runtime(io_error(&out, e)))?;
    eprintln!(
        "frame potential {:.9} (bound {:.9})",
        result.frame_potential, result.bound
    );
    let mut written = vec![out];

    if let (Some(ev), Some(conf)) = (&job.evaluation, conf) {
        let trials = cli.trials.unwrap_or(ev.trials);
        let anchors = result.anchors().map_err(runtime)?;
        let csv_path = cli.out_dir.join("placement_evaluation.csv");
        let mut w = csv::Writer::from_path(&csv_path).map_err(|source| {
            runtime(RblError::Csv {
                path: csv_path.display().to_string(),
                source,
            })
        })?;
        for (i, &sigma) in ev.sigma_list.iter().enumerate() {
            let seed = rbl_core::rng::derive_seed(job.problem.seed, &[i as u64]);
            let e = evaluate_placement(&anchors, &conf, sigma, trials, seed, &ev.options).map_err(invalid)?;
            w.serialize(EvaluationRow {
                sigma,
                sensors: ev.sensors,
                trials: e.trials,
                failures: e.failures,
                translation_rmse: e.translation.map(|s| s.rmse),
                translation_se: e.translation.map(|s| s.se),
                rotation_rmse: e.rotation.map(|s| s.rmse),
                rotation_se: e.rotation.map(|s| s.se),
            })
            .map_err(|source| {
                runtime(RblError::Csv {
                    path: csv_path.display().to_string(),
                    source,
                })
            })?;
        }
        w.flush().map_err(|e| runtime(io_error(&csv_path, e)))?;
        written.push(csv_path);
    }
    report(&written);
    Ok(())
}

fn cmd_complete(cli: &Cli, files: &[PathBuf], dim: Option<usize>, split: Option<usize>) -> Outcome {
    let is_json = files[0].extension().is_some_and(|e| e == "json");
    let partial = if is_json {
        if files.len() > 1 {
            return Err(invalid(RblError::InvalidInput(
                "a JSON EDM carries its own mask; pass a single file".into(),
            )));
        }
        let mut doc = MatrixDoc::read(&files[0]).map_err(invalid)?;
        if split.is_some() {
            doc.split = split;
        }
        PartialEdm::from_doc(&doc, dim).map_err(invalid)?
    } else {
        let dim =
            dim.ok_or_else(|| invalid(RblError::InvalidInput("--dim is required for CSV input".into())))?;
        PartialEdm::read_csv(
            &files[0],
            files.get(1).map(PathBuf::as_path),
            dim,
            split.unwrap_or(0),
        )
        .map_err(invalid)?
    };
    let result = complete_edm(&partial, &CompletionOptions::default()).map_err(runtime)?;
    eprintln!(
        "{} iterations, objective {:.3e}, converged: {}",
        result.iterations, result.final_objective, result.converged
    );
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| runtime(io_error(&cli.out_dir, e)))?;
    let out = match cli.format {
        OutputFormat::Json => {
            let p = cli.out_dir.join("completed.json");
            result.to_doc().write(&p).map_err(runtime)?;
            p
        }
        OutputFormat::Csv | OutputFormat::PlotData => {
            let p = cli.out_dir.join("completed.csv");
            write_matrix_csv(&p, &result.distances()).map_err(runtime)?;
            p
        }
    };
    report(&[out]);
    Ok(())
}
