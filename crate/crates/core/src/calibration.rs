//! Deformation-to-reaction calibration.
//!
//! A calibration run presses primitive objects against one finger at random
//! depth, twist and centroid offset, records the 11-value sample
//! `(a1..a5, Fx, Fy, Fz, Tx, Ty, Tz)`, and fits
//!
//! - a ridge regression from the five losses to `F_n = Fx` (and to `T_z`, which
//!   is only reported), and
//! - one-vs-rest logistic classifiers from the losses to `sign(T_z)` over
//!   `{-1, 0, +1}`, where labels with `|T_z| < τ_z` count as 0.
//!
//! Features are z-scored with constants taken from the training split only, and
//! every loss term is a mean over samples, so duplicating the training set leaves
//! the fitted weights unchanged.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{patch_from_hit, ray_hit, rotate, unit_from_angle, ObjectShape};
use crate::sensor::{react, sense, DeformationVector, FingerResponseModel, ReactionWrench, FIBERS};

pub const DATASET_HEADER: [&str; 11] = [
    "a1", "a2", "a3", "a4", "a5", "Fx", "Fy", "Fz", "Tx", "Ty", "Tz",
];

/// Minimum number of samples `fit` accepts.
pub const MIN_FIT_SAMPLES: usize = 50;

/// One calibration record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub deformation: DeformationVector,
    pub wrench: ReactionWrench,
}

impl SensorSample {
    pub fn normal_force(&self) -> f64 {
        self.wrench.fx
    }

    pub fn torque_z(&self) -> f64 {
        self.wrench.tz
    }

    pub fn to_row(&self) -> [f64; 11] {
        let mut row = [0.0; 11];
        row[..5].copy_from_slice(&self.deformation.0);
        row[5..].copy_from_slice(&self.wrench.as_array());
        row
    }

    pub fn from_row(row: &[f64; 11]) -> Self {
        let mut a = [0.0; FIBERS];
        a.copy_from_slice(&row[..5]);
        let mut w = [0.0; 6];
        w.copy_from_slice(&row[5..]);
        Self {
            deformation: DeformationVector(a),
            wrench: ReactionWrench::from_array(w),
        }
    }
}

/// Bounds of the random presses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PressSpec {
    /// Depth is uniform in `[0, max_depth]`, m.
    pub max_depth: f64,
    /// Twist magnitude is `max_twist·u²` with `u` uniform and a random sign, rad.
    pub max_twist: f64,
    /// Fraction of presses applied without twist.
    pub straight_fraction: f64,
    /// Centroid offset is uniform in `[-max_offset, max_offset]`, m.
    pub max_offset: f64,
    /// Pad width used to size the conformed patch, m.
    pub pad_width: f64,
}

impl Default for PressSpec {
    fn default() -> Self {
        Self {
            max_depth: 0.006,
            max_twist: 0.3,
            straight_fraction: 0.45,
            max_offset: 0.008,
            pad_width: 0.02,
        }
    }
}

impl PressSpec {
    pub fn validate(&self) -> Result<()> {
        let bounds = [
            self.max_depth,
            self.max_twist,
            self.max_offset,
            self.pad_width,
        ];
        if !bounds.iter().all(|b| b.is_finite() && *b >= 0.0) {
            return Err(Error::Config("press bounds must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.straight_fraction) {
            return Err(Error::Config("straight_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Presses random objects against the finger and records sensed losses with the
/// matching ground-truth wrench.
pub fn generate_dataset<R: Rng + ?Sized>(
    objects: &[ObjectShape],
    n: usize,
    finger: &FingerResponseModel,
    press: &PressSpec,
    rng: &mut R,
) -> Result<Vec<SensorSample>> {
    if n == 0 {
        return Err(Error::Usage("dataset size must be positive".into()));
    }
    if objects.is_empty() {
        return Err(Error::Usage(
            "at least one calibration object required".into(),
        ));
    }
    press.validate()?;
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let object = &objects[rng.random_range(0..objects.len())];
        let approach = unit_from_angle(rng.random::<f64>() * TAU);
        let standoff = object.shape.circumradius() + 0.05;
        let origin = object.centroid() - approach * standoff;
        let depth = press.max_depth * rng.random::<f64>();
        let twist = if rng.random::<f64>() < press.straight_fraction {
            0.0
        } else {
            // Squared draw: dense near zero, where the sign dead band sits.
            let magnitude = press.max_twist * rng.random::<f64>().powi(2);
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        };
        let offset = press.max_offset * (2.0 * rng.random::<f64>() - 1.0);
        let Some(hit) = ray_hit(object, &origin, &approach) else {
            continue;
        };
        let facing = rotate(&hit.normal, twist);
        let mut contact = patch_from_hit(object, &hit, &facing, depth, press.pad_width);
        contact.offset = offset;
        samples.push(SensorSample {
            deformation: sense(&contact, twist, finger, rng),
            wrench: react(&contact, twist, finger),
        });
    }
    Ok(samples)
}

/// Seeded shuffle, then the first `train_fraction` of the samples train.
pub fn train_test_split(
    samples: &[SensorSample],
    train_fraction: f64,
    seed: u64,
) -> (Vec<SensorSample>, Vec<SensorSample>) {
    let mut shuffled = samples.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((samples.len() as f64) * train_fraction).round() as usize;
    let test = shuffled.split_off(n_train.min(shuffled.len()));
    (shuffled, test)
}

/// Maps a torque to its sign class with a dead band.
pub fn sign_label(tz: f64, dead_band: f64) -> i8 {
    if tz.abs() < dead_band {
        0
    } else if tz > 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Ridge penalty on normalized features.
    pub ridge_lambda: f64,
    /// L2 penalty of the sign classifier.
    pub classifier_lambda: f64,
    /// Zero-sign dead band τ_z, N·m.
    pub tz_dead_band: f64,
    /// Relative cost of the zero class in the classifier loss. Classes are
    /// first weighted to equal total mass; values below 1 then trade zero-label
    /// accuracy for fewer twisted contacts read as 0.
    pub zero_class_cost: f64,
    pub newton_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge_lambda: 1e-6,
            classifier_lambda: 1e-4,
            tz_dead_band: 0.005,
            zero_class_cost: 0.3,
            newton_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegressor {
    pub weights: [f64; FIBERS],
    pub intercept: f64,
}

impl LinearRegressor {
    fn eval(&self, z: &[f64; FIBERS]) -> f64 {
        self.intercept + self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Held-out scores, one column of the per-finger metrics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMetrics {
    pub fn_rmse: f64,
    pub fn_r2: f64,
    pub tz_rmse: f64,
    pub tz_r2: f64,
    pub sign_success: f64,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub feature_mean: [f64; FIBERS],
    pub feature_scale: [f64; FIBERS],
    pub normal_force: LinearRegressor,
    pub torque_z: LinearRegressor,
    /// Logistic weights `[w1..w5, bias]` for the classes `-1, 0, +1`.
    pub sign_classifier: [[f64; FIBERS + 1]; 3],
    pub tz_dead_band: f64,
    pub train_samples: usize,
    pub seed: Option<u64>,
    pub metrics: Option<CalibrationMetrics>,
}

/// Estimated normal force and twist-torque sign for one reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub normal_force: f64,
    pub tz_sign: i8,
    pub tz: f64,
}

const CLASSES: [i8; 3] = [-1, 0, 1];

impl CalibrationModel {
    fn normalize(&self, a: &DeformationVector) -> [f64; FIBERS] {
        std::array::from_fn(|j| (a.0[j] - self.feature_mean[j]) / self.feature_scale[j])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        crate::config::write_atomic(path, format!("{json}\n").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

pub fn predict(model: &CalibrationModel, a: &DeformationVector) -> Prediction {
    let z = model.normalize(a);
    let scores = model.sign_classifier.map(|w| {
        w[FIBERS]
            + w[..FIBERS]
                .iter()
                .zip(&z)
                .map(|(wi, x)| wi * x)
                .sum::<f64>()
    });
    let best = (0..3).fold(0, |b, c| if scores[c] > scores[b] { c } else { b });
    Prediction {
        normal_force: model.normal_force.eval(&z),
        tz_sign: CLASSES[best],
        tz: model.torque_z.eval(&z),
    }
}

pub fn fit(samples: &[SensorSample], options: &FitOptions) -> Result<CalibrationModel> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples given, at least {MIN_FIT_SAMPLES} required",
            samples.len()
        )));
    }
    if !samples
        .iter()
        .all(|s| s.to_row().iter().all(|v| v.is_finite()))
    {
        return Err(Error::Fit("non-finite sample values".into()));
    }
    if !(options.ridge_lambda >= 0.0 && options.classifier_lambda > 0.0) {
        return Err(Error::Fit("regularization must be nonnegative".into()));
    }
    if !(options.zero_class_cost > 0.0 && options.zero_class_cost.is_finite()) {
        return Err(Error::Fit("zero_class_cost must be positive".into()));
    }
    let m = samples.len();
    let mf = m as f64;
    let mut mean = [0.0; FIBERS];
    for s in samples {
        for j in 0..FIBERS {
            mean[j] += s.deformation.0[j] / mf;
        }
    }
    let mut scale = [0.0; FIBERS];
    for s in samples {
        for j in 0..FIBERS {
            scale[j] += (s.deformation.0[j] - mean[j]).powi(2) / mf;
        }
    }
    let scale = scale.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    let z = DMatrix::from_fn(m, FIBERS, |i, j| {
        (samples[i].deformation.0[j] - mean[j]) / scale[j]
    });

    let fn_labels: Vec<f64> = samples.iter().map(|s| s.normal_force()).collect();
    let tz_labels: Vec<f64> = samples.iter().map(|s| s.torque_z()).collect();
    let normal_force = ridge(&z, &fn_labels, options.ridge_lambda)?;
    let torque_z = ridge(&z, &tz_labels, options.ridge_lambda)?;

    let signs: Vec<i8> = tz_labels
        .iter()
        .map(|t| sign_label(*t, options.tz_dead_band))
        .collect();
    let sign_classifier = one_vs_rest(
        &z,
        &signs,
        options.zero_class_cost,
        options.classifier_lambda,
        options.newton_iterations,
    )?;

    Ok(CalibrationModel {
        feature_mean: mean,
        feature_scale: scale,
        normal_force,
        torque_z,
        sign_classifier,
        tz_dead_band: options.tz_dead_band,
        train_samples: m,
        seed: None,
        metrics: None,
    })
}

/// Ridge on centered targets: `(ZᵀZ/m + λI) w = Zᵀ(y - ȳ)/m`, intercept `ȳ`.
fn ridge(z: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LinearRegressor> {
    let m = z.nrows() as f64;
    let y_mean = y.iter().sum::<f64>() / m;
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    let gram = z.transpose() * z / m + DMatrix::identity(FIBERS, FIBERS) * lambda;
    let rhs = z.transpose() * yc / m;
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            // Only reachable with λ = 0; constant features give a zero column.
            let svd = gram.svd(true, true);
            svd.solve(&rhs, 1e-12)
                .map_err(|e| Error::Fit(format!("singular normal equations: {e}")))?
        }
    };
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::Fit("regression weights are not finite".into()));
    }
    Ok(LinearRegressor {
        weights: std::array::from_fn(|j| w[j]),
        intercept: y_mean,
    })
}

/// One-vs-rest logistic classifiers over the classes `-1, 0, +1`. Every class
/// carries the same total weight (the zero class scaled by `zero_cost`), so the
/// decision boundaries follow the label dead band rather than class frequencies.
fn one_vs_rest(
    z: &DMatrix<f64>,
    labels: &[i8],
    zero_cost: f64,
    lambda: f64,
    iterations: usize,
) -> Result<[[f64; FIBERS + 1]; 3]> {
    let counts = CLASSES.map(|c| labels.iter().filter(|l| **l == c).count());
    let raw: Vec<f64> = labels
        .iter()
        .map(|l| {
            let c = CLASSES
                .iter()
                .position(|k| k == l)
                .expect("label in classes");
            let cost = if *l == 0 { zero_cost } else { 1.0 };
            cost / counts[c] as f64
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mut out = [[0.0; FIBERS + 1]; 3];
    for (c, class) in CLASSES.iter().enumerate() {
        if counts[c] == 0 {
            // Never predicted: nothing in training supports it.
            out[c][FIBERS] = f64::MIN;
            continue;
        }
        let y: Vec<f64> = labels
            .iter()
            .map(|l| f64::from(u8::from(l == class)))
            .collect();
        out[c] = weighted_logistic(z, &y, &weights, lambda, iterations)?;
    }
    Ok(out)
}

/// Binary logistic regression by Newton's method on the weighted cross-entropy
/// plus `lambda/2 ‖w‖²` (the bias is not penalized). Weights sum to one.
fn weighted_logistic(
    z: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    lambda: f64,
    iterations: usize,
) -> Result<[f64; FIBERS + 1]> {
    let d = FIBERS + 1;
    let x = DMatrix::from_fn(
        z.nrows(),
        d,
        |i, j| if j < FIBERS { z[(i, j)] } else { 1.0 },
    );
    let mut w = DVector::<f64>::zeros(d);
    for _ in 0..iterations {
        let mut grad = DVector::<f64>::zeros(d);
        let mut hess = DMatrix::<f64>::zeros(d, d);
        for j in 0..FIBERS {
            grad[j] = lambda * w[j];
            hess[(j, j)] = lambda;
        }
        for i in 0..x.nrows() {
            let row = x.row(i);
            let p = sigmoid(row.dot(&w.transpose()));
            let r = weights[i] * (p - y[i]);
            let h = weights[i] * p * (1.0 - p);
            for a in 0..d {
                grad[a] += r * row[a];
                for b in 0..d {
                    hess[(a, b)] += h * row[a] * row[b];
                }
            }
        }
        // A tiny floor keeps the bias direction solvable on separable data.
        for a in 0..d {
            hess[(a, a)] += 1e-12;
        }
        let step = hess
            .cholesky()
            .ok_or_else(|| Error::Fit("classifier Hessian not positive definite".into()))?
            .solve(&grad);
        w -= &step;
        if step.norm() < 1e-12 {
            break;
        }
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::Fit("classifier weights are not finite".into()));
    }
    Ok(std::array::from_fn(|a| w[a]))
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Usage(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::Usage("empty input".into()));
    }
    Ok(())
}

/// Root mean square of the residuals.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y.len(), y_hat.len())?;
    let ss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y.len(), y_hat.len())?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (mean - v).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::Domain(
            "R² undefined: target values are constant".into(),
        ));
    }
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (b - a).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn classification_success_rate(labels: &[i8], predictions: &[i8]) -> Result<f64> {
    check_lengths(labels.len(), predictions.len())?;
    let hits = labels
        .iter()
        .zip(predictions)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Scores a model on held-out samples.
pub fn evaluate(model: &CalibrationModel, test: &[SensorSample]) -> Result<CalibrationMetrics> {
    let preds: Vec<Prediction> = test
        .iter()
        .map(|s| predict(model, &s.deformation))
        .collect();
    let fn_true: Vec<f64> = test.iter().map(|s| s.normal_force()).collect();
    let fn_hat: Vec<f64> = preds.iter().map(|p| p.normal_force).collect();
    let tz_true: Vec<f64> = test.iter().map(|s| s.torque_z()).collect();
    let tz_hat: Vec<f64> = preds.iter().map(|p| p.tz).collect();
    let labels: Vec<i8> = tz_true
        .iter()
        .map(|t| sign_label(*t, model.tz_dead_band))
        .collect();
    let signs: Vec<i8> = preds.iter().map(|p| p.tz_sign).collect();
    Ok(CalibrationMetrics {
        fn_rmse: rmse(&fn_true, &fn_hat)?,
        fn_r2: r_squared(&fn_true, &fn_hat)?,
        tz_rmse: rmse(&tz_true, &tz_hat)?,
        tz_r2: r_squared(&tz_true, &tz_hat)?,
        sign_success: classification_success_rate(&labels, &signs)?,
        test_samples: test.len(),
    })
}

/// Sizes of a full three-finger calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationParams {
    pub samples_per_finger: usize,
    pub train_fraction: f64,
    pub press: PressSpec,
    pub fit: FitOptions,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            samples_per_finger: 2000,
            train_fraction: 0.8,
            press: PressSpec::default(),
            fit: FitOptions::default(),
        }
    }
}

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        self.press.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        let n_train = (self.samples_per_finger as f64 * self.train_fraction).round() as usize;
        if n_train < MIN_FIT_SAMPLES || n_train == self.samples_per_finger {
            return Err(Error::Config(format!(
                "samples_per_finger {} leaves too few train or test samples",
                self.samples_per_finger
            )));
        }
        Ok(())
    }
}

/// Dataset, fitted model and held-out scores of one finger.
#[derive(Debug, Clone)]
pub struct FingerCalibration {
    pub samples: Vec<SensorSample>,
    pub model: CalibrationModel,
    pub metrics: CalibrationMetrics,
}

/// Calibrates each finger on its own ChaCha stream of `seed`.
pub fn calibrate_fingers(
    objects: &[ObjectShape],
    fingers: &[FingerResponseModel; 3],
    params: &CalibrationParams,
    seed: u64,
) -> Result<[FingerCalibration; 3]> {
    params.validate()?;
    let run = |i: usize| -> Result<FingerCalibration> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let samples = generate_dataset(
            objects,
            params.samples_per_finger,
            &fingers[i],
            &params.press,
            &mut rng,
        )?;
        let (train, test) =
            train_test_split(&samples, params.train_fraction, seed.wrapping_add(i as u64));
        let mut model = fit(&train, &params.fit)?;
        let metrics = evaluate(&model, &test)?;
        model.seed = Some(seed);
        model.metrics = Some(metrics);
        Ok(FingerCalibration {
            samples,
            model,
            metrics,
        })
    };
    Ok([run(0)?, run(1)?, run(2)?])
}

/// Formats a value with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.8e}")
    }
}

pub fn write_dataset(path: &Path, samples: &[SensorSample]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::parse(path, e);
    wtr.write_record(DATASET_HEADER).map_err(csv_err)?;
    for s in samples {
        wtr.write_record(s.to_row().iter().map(|v| format_sig9(*v)))
            .map_err(csv_err)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::parse(path, e))?;
    crate::config::write_atomic(path, &bytes)
}

pub fn read_dataset(path: &Path) -> Result<Vec<SensorSample>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let header = rdr.headers().map_err(|e| Error::parse(path, e))?.clone();
    if header.iter().ne(DATASET_HEADER.iter().copied()) {
        return Err(Error::parse(path, "unexpected dataset header"));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::parse(path, e))?;
        if record.len() != 11 {
            return Err(Error::parse(path, "expected 11 columns"));
        }
        let mut row = [0.0; 11];
        for (k, field) in record.iter().enumerate() {
            row[k] = field
                .parse()
                .map_err(|e| Error::parse(path, format!("column {}: {e}", k + 1)))?;
        }
        out.push(SensorSample::from_row(&row));
    }
    Ok(out)
}
