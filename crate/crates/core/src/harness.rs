//! Repeated grasp trials and the conventional-vs-interactive comparison.
//!
//! Every trial perturbs the object's nominal pose, grasps it once with each
//! policy, and shakes both grasps with the same disturbance schedule. A shake is
//! a threshold check: the grasp survives an amplitude iff it is in equilibrium
//! and the amplitude does not exceed its anti-disturbance margin.
//!
//! Trials run in parallel. Each one seeds its own ChaCha stream from a SHA-256
//! of `(master seed, object id, trial index)`, so results do not depend on
//! scheduling and outputs are byte-identical across runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{write_atomic, SceneObject};
use crate::error::{Error, Result};
use crate::mechanics::residual_torque_capacity;
use crate::optimizer::{
    conventional_grasp, interactive_grasp, OptimizationParams, OptimizedGrasp, Rig,
};
use crate::scene::{perturb_pose, BaseMode, PoseNoiseSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceSpec {
    /// External force magnitudes, N, applied in the worst direction.
    pub amplitudes: Vec<f64>,
    /// External torque about the object centroid, N·m.
    pub external_torque: Option<f64>,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            amplitudes: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            external_torque: None,
        }
    }
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.amplitudes.iter().all(|a| a.is_finite() && *a >= 0.0) {
            return Err(Error::Config("disturbance amplitudes must be >= 0".into()));
        }
        if self.amplitudes.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config(
                "disturbance amplitudes must be nondecreasing".into(),
            ));
        }
        if let Some(t) = self.external_torque {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config("external torque must be >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Conventional,
    Interactive,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Conventional => "conventional",
            Policy::Interactive => "interactive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShakeOutcome {
    pub success: bool,
    /// First amplitude the grasp did not survive.
    pub failure_amplitude: Option<f64>,
    pub margin: f64,
}

pub fn shake_test(grasp: &OptimizedGrasp, spec: &DisturbanceSpec) -> ShakeOutcome {
    let first = spec.amplitudes.first().copied().unwrap_or(0.0);
    if !grasp.state.equilibrated {
        return ShakeOutcome {
            success: false,
            failure_amplitude: Some(first),
            margin: 0.0,
        };
    }
    let margin = grasp.margin_after;
    let torque_holds = spec
        .external_torque
        .is_none_or(|t| t <= residual_torque_capacity(&grasp.state));
    if !torque_holds {
        return ShakeOutcome {
            success: false,
            failure_amplitude: Some(first),
            margin,
        };
    }
    let failure_amplitude = spec.amplitudes.iter().copied().find(|a| *a > margin);
    ShakeOutcome {
        success: failure_amplitude.is_none(),
        failure_amplitude,
        margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub object: String,
    pub policy: Policy,
    pub trial: usize,
    pub success: bool,
    pub failure_amplitude: Option<f64>,
    pub margin: f64,
    pub final_mode: BaseMode,
    pub converged: bool,
    /// Seed of this trial's random stream (first 8 bytes, little endian).
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub object: String,
    pub conventional_successes: usize,
    pub interactive_successes: usize,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub seed: u64,
    pub n_trials: usize,
    pub rows: Vec<TableRow>,
    pub trials: Vec<TrialResult>,
}

impl Comparison {
    pub fn row(&self, object: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.object == object)
    }
}

/// 32-byte seed of one trial.
pub fn trial_seed(master: u64, object: &str, trial: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((object.len() as u64).to_le_bytes());
    h.update(object.as_bytes());
    h.update((trial as u64).to_le_bytes());
    h.finalize().into()
}

pub fn trial_rng(master: u64, object: &str, trial: usize) -> (ChaCha8Rng, u64) {
    let seed = trial_seed(master, object, trial);
    let short = u64::from_le_bytes(seed[..8].try_into().expect("8 bytes"));
    (ChaCha8Rng::from_seed(seed), short)
}

/// Fixed inputs shared by every trial of a comparison.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    pub rig: &'a Rig,
    pub optimization: &'a OptimizationParams,
    pub noise: PoseNoiseSpec,
    pub disturbance: &'a DisturbanceSpec,
}

fn run_trial(
    ex: &Experiment<'_>,
    object: &SceneObject,
    trial: usize,
    master: u64,
) -> Result<[TrialResult; 2]> {
    let (mut rng, seed) = trial_rng(master, &object.id, trial);
    let shape = perturb_pose(&object.object()?, &ex.noise, &mut rng);
    let conventional = conventional_grasp(&shape, ex.rig)?;
    let interactive = interactive_grasp(&shape, object.class, ex.rig, ex.optimization, &mut rng)?;
    let result = |policy: Policy, grasp: &OptimizedGrasp| {
        let shake = shake_test(grasp, ex.disturbance);
        TrialResult {
            object: object.id.clone(),
            policy,
            trial,
            success: shake.success,
            failure_amplitude: shake.failure_amplitude,
            margin: shake.margin,
            final_mode: grasp.config.base_mode,
            converged: grasp.converged,
            seed,
        }
    };
    Ok([
        result(Policy::Conventional, &conventional),
        result(Policy::Interactive, &interactive),
    ])
}

/// Runs `n_trials` paired trials per object and tallies successes.
pub fn run_comparison(
    objects: &[SceneObject],
    n_trials: usize,
    ex: &Experiment<'_>,
    seed: u64,
) -> Result<Comparison> {
    if n_trials == 0 {
        return Err(Error::Usage("n_trials must be >= 1".into()));
    }
    ex.disturbance.validate()?;
    ex.noise.validate()?;
    let jobs: Vec<(usize, usize)> = (0..objects.len())
        .flat_map(|o| (0..n_trials).map(move |t| (o, t)))
        .collect();
    let pairs: Vec<[TrialResult; 2]> = jobs
        .par_iter()
        .map(|(o, t)| run_trial(ex, &objects[*o], *t, seed))
        .collect::<Result<_>>()?;
    let trials: Vec<TrialResult> = pairs.into_iter().flatten().collect();
    let rows = objects
        .iter()
        .map(|o| {
            let count = |p: Policy| {
                trials
                    .iter()
                    .filter(|r| r.object == o.id && r.policy == p && r.success)
                    .count()
            };
            TableRow {
                object: o.id.clone(),
                conventional_successes: count(Policy::Conventional),
                interactive_successes: count(Policy::Interactive),
                n_trials,
            }
        })
        .collect();
    Ok(Comparison {
        seed,
        n_trials,
        rows,
        trials,
    })
}

pub const RESULTS_FILE: &str = "results.json";
pub const TABLE_FILE: &str = "table.csv";
pub const PLOTDATA_FILE: &str = "plotdata.csv";

fn csv_bytes(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let err = |e: csv::Error| Error::parse(path, e);
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::parse(path, e))
}

fn table_csv(c: &Comparison, path: &Path) -> Result<Vec<u8>> {
    let rows = c
        .rows
        .iter()
        .map(|r| {
            vec![
                r.object.clone(),
                r.conventional_successes.to_string(),
                r.interactive_successes.to_string(),
                r.n_trials.to_string(),
                c.seed.to_string(),
            ]
        })
        .collect();
    csv_bytes(
        path,
        &[
            "object",
            "conventional_successes",
            "interactive_successes",
            "n_trials",
            "seed",
        ],
        rows,
    )
}

fn plotdata_csv(c: &Comparison, path: &Path) -> Result<Vec<u8>> {
    let rows = c
        .trials
        .iter()
        .map(|t| {
            vec![
                t.object.clone(),
                t.policy.name().to_string(),
                t.trial.to_string(),
                format!("{}", t.margin),
                t.success.to_string(),
                t.final_mode.to_string(),
                c.seed.to_string(),
            ]
        })
        .collect();
    csv_bytes(
        path,
        &[
            "object",
            "policy",
            "trial",
            "margin",
            "success",
            "final_mode",
            "seed",
        ],
        rows,
    )
}

/// Writes `results.json`, `table.csv` and `plotdata.csv` into `dir`. All three
/// are rendered before any is written.
pub fn emit_report(c: &Comparison, dir: &Path) -> Result<Vec<PathBuf>> {
    let results = dir.join(RESULTS_FILE);
    let table = dir.join(TABLE_FILE);
    let plot = dir.join(PLOTDATA_FILE);
    let mut json = serde_json::to_string_pretty(c).expect("comparison serializes");
    json.push('\n');
    let files = [
        (results, json.into_bytes()),
        (table.clone(), table_csv(c, &table)?),
        (plot.clone(), plotdata_csv(c, &plot)?),
    ];
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

pub fn load_results(path: &Path) -> Result<Comparison> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Plain-text rendering of the comparison table.
pub fn render_table(c: &Comparison) -> String {
    let width = c
        .rows
        .iter()
        .map(|r| r.object.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  conventional  interactive   (seed {}, {} trials/object)",
        "object", c.seed, c.n_trials
    );
    for r in &c.rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}/{:<6}  {:>5}/{:<6}",
            r.object, r.conventional_successes, r.n_trials, r.interactive_successes, r.n_trials
        );
    }
    out
}
