//! Command-line front end.
//!
//! ```text
//! softgrasp [--scene S] [--params P] [--seed N] [--out DIR] calibrate
//! softgrasp ... grasp <OBJECT>
//! softgrasp ... evaluate [--objects a,b,...]
//! softgrasp ... report
//! ```
//!
//! `calibrate` writes the finger models that `grasp` and `evaluate` read back
//! from `DIR/models`. Every file is written through a temp file and renamed, and
//! every subcommand computes all of its outputs before writing the first one.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::calibration::{calibrate_fingers, write_dataset, CalibrationModel, FingerCalibration};
use crate::config::{write_atomic, ParamsConfig, SceneConfig};
use crate::error::{Error, Result};
use crate::harness::{
    emit_report, load_results, render_table, run_comparison, trial_rng, Experiment, RESULTS_FILE,
};
use crate::optimizer::{interactive_grasp, OptimizedGrasp, Rig};

#[derive(Debug, Parser)]
#[command(
    name = "softgrasp",
    version,
    about = "Proprioceptive soft-finger grasping"
)]
pub struct Cli {
    /// Scene file (gripper, response, objects). Defaults to the built-in scene.
    #[arg(long, global = true)]
    pub scene: Option<PathBuf>,
    /// Params file (optimizer, calibration, harness). Defaults to the built-in params.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Overrides the params file seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated object ids to keep.
    #[arg(long, global = true, value_delimiter = ',')]
    pub objects: Option<Vec<String>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate per-finger datasets, fit models, write the metrics table.
    Calibrate,
    /// Run one interactive grasp on the object's nominal pose.
    Grasp { object: String },
    /// Compare conventional and interactive grasping over the object set.
    Evaluate,
    /// Re-render table.csv and plotdata.csv from a saved results.json.
    Report,
}

/// Resolved inputs of a run.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub scene: SceneConfig,
    pub params: ParamsConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub objects: Option<Vec<String>>,
}

impl RunManifest {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let scene = match &cli.scene {
            Some(p) => SceneConfig::load(p)?,
            None => SceneConfig::builtin(),
        };
        let params = match &cli.params {
            Some(p) => ParamsConfig::load(p)?,
            None => ParamsConfig::builtin(),
        };
        let seed = cli.seed.unwrap_or(params.seed);
        if let Some(ids) = &cli.objects {
            scene.select(ids)?;
        }
        Ok(Self {
            scene,
            params,
            seed,
            out: cli.out.clone(),
            objects: cli.objects.clone(),
        })
    }

    fn models_dir(&self) -> PathBuf {
        self.out.join("models")
    }
}

pub fn model_path(dir: &Path, finger: usize) -> PathBuf {
    dir.join(format!("finger{}.json", finger + 1))
}

pub fn load_rig(manifest: &RunManifest) -> Result<Rig> {
    let dir = manifest.models_dir();
    let mut models = Vec::with_capacity(3);
    for i in 0..3 {
        let path = model_path(&dir, i);
        if !path.exists() {
            return Err(Error::Usage(format!(
                "no calibrated model at {}; run `softgrasp calibrate --out {}` first",
                path.display(),
                manifest.out.display()
            )));
        }
        models.push(CalibrationModel::load(&path)?);
    }
    let models: [CalibrationModel; 3] = models.try_into().expect("three models");
    Ok(Rig {
        geometry: manifest.scene.geometry,
        fingers: manifest.scene.response.finger_models(),
        models,
        mu: manifest.scene.mu,
        grip: manifest.scene.grip,
    })
}

/// Runs the three-finger calibration on the scene's object shapes.
pub fn calibrate(manifest: &RunManifest) -> Result<[FingerCalibration; 3]> {
    let objects = manifest
        .scene
        .objects
        .iter()
        .map(|o| o.object())
        .collect::<Result<Vec<_>>>()?;
    calibrate_fingers(
        &objects,
        &manifest.scene.response.finger_models(),
        &manifest.params.calibration,
        manifest.seed,
    )
}

/// One row per metric, one column per finger.
pub fn metrics_csv(runs: &[FingerCalibration; 3], seed: u64) -> String {
    let mut out = String::from("metric,finger1,finger2,finger3,seed\n");
    let rows: [(&str, fn(&FingerCalibration) -> f64); 5] = [
        ("fn_rmse", |c| c.metrics.fn_rmse),
        ("fn_r2", |c| c.metrics.fn_r2),
        ("tz_rmse", |c| c.metrics.tz_rmse),
        ("tz_r2", |c| c.metrics.tz_r2),
        ("success_rate", |c| c.metrics.sign_success),
    ];
    for (name, get) in rows {
        let _ = writeln!(
            out,
            "{name},{:.6},{:.6},{:.6},{seed}",
            get(&runs[0]),
            get(&runs[1]),
            get(&runs[2])
        );
    }
    out
}

pub fn cmd_calibrate(manifest: &RunManifest) -> Result<String> {
    let runs = calibrate(manifest)?;
    let dir = manifest.models_dir();
    let metrics = metrics_csv(&runs, manifest.seed);
    for (i, run) in runs.iter().enumerate() {
        let data = manifest
            .out
            .join("datasets")
            .join(format!("finger{}.csv", i + 1));
        write_dataset(&data, &run.samples)?;
        run.model.save(&model_path(&dir, i))?;
    }
    write_atomic(
        &manifest.out.join("calibration_metrics.csv"),
        metrics.as_bytes(),
    )?;
    log::info!("calibration written under {}", manifest.out.display());
    Ok(metrics)
}

#[derive(Debug, Serialize)]
struct GraspRecord<'a> {
    object: &'a str,
    seed: u64,
    grasp: &'a OptimizedGrasp,
}

pub fn grasp_summary(object: &str, g: &OptimizedGrasp) -> String {
    let modes: Vec<String> = g.transitions.iter().map(|m| m.to_string()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "object {object} (class {})", g.shape_class);
    let _ = writeln!(s, "configuration: {}", modes.join(" -> "));
    let _ = writeln!(
        s,
        "base rotation {:.2} deg, torque iterations {}, converged {}",
        g.config.base_rotation.to_degrees(),
        g.torque_iterations,
        g.converged
    );
    if let Some(f) = g.released_finger {
        let _ = writeln!(s, "released finger {}", f + 1);
    }
    for f in &g.state.fingers {
        let _ = writeln!(
            s,
            "finger {}: F_n {:.3} N, T_z {:+.4} N*m, |F_t| {:.3} N",
            f.finger + 1,
            f.normal_force,
            f.torque_z,
            f.tangential.norm()
        );
    }
    let _ = writeln!(
        s,
        "margin {:.3} N -> {:.3} N",
        g.margin_before, g.margin_after
    );
    s
}

pub fn cmd_grasp(manifest: &RunManifest, object: &str) -> Result<String> {
    let entry = manifest.scene.find(object)?;
    let rig = load_rig(manifest)?;
    let (mut rng, _) = trial_rng(manifest.seed, object, 0);
    let g = interactive_grasp(
        &entry.object()?,
        entry.class,
        &rig,
        &manifest.params.optimization,
        &mut rng,
    )?;
    let record = GraspRecord {
        object,
        seed: manifest.seed,
        grasp: &g,
    };
    let mut json = serde_json::to_string_pretty(&record).expect("grasp serializes");
    json.push('\n');
    write_atomic(
        &manifest.out.join(format!("grasp_{object}.json")),
        json.as_bytes(),
    )?;
    Ok(grasp_summary(object, &g))
}

pub fn cmd_evaluate(manifest: &RunManifest) -> Result<String> {
    let rig = load_rig(manifest)?;
    let objects = match &manifest.objects {
        Some(ids) => manifest.scene.select(ids)?,
        None => manifest.scene.objects.clone(),
    };
    let ex = Experiment {
        rig: &rig,
        optimization: &manifest.params.optimization,
        noise: manifest.scene.noise,
        disturbance: &manifest.params.harness.disturbance,
    };
    let comparison = run_comparison(
        &objects,
        manifest.params.harness.trials_per_object,
        &ex,
        manifest.seed,
    )?;
    emit_report(&comparison, &manifest.out)?;
    Ok(render_table(&comparison))
}

pub fn cmd_report(manifest: &RunManifest) -> Result<String> {
    let comparison = load_results(&manifest.out.join(RESULTS_FILE))?;
    emit_report(&comparison, &manifest.out)?;
    Ok(render_table(&comparison))
}

pub fn run(cli: &Cli) -> Result<String> {
    let manifest = RunManifest::from_cli(cli)?;
    match &cli.command {
        Command::Calibrate => cmd_calibrate(&manifest),
        Command::Grasp { object } => cmd_grasp(&manifest, object),
        Command::Evaluate => cmd_evaluate(&manifest),
        Command::Report => cmd_report(&manifest),
    }
}

/// Entry point of the binary: usage and configuration errors exit with 2,
/// everything else with 1.
pub fn main_with(cli: Cli) -> ExitCode {
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config(_) | Error::Parse { .. } | Error::Io { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
