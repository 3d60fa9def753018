//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! `cargo test --release --test acceptance` runs it on its own.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softgrasp::calibration::{calibrate_fingers, r_squared, rmse, FingerCalibration};
use softgrasp::cli::{cmd_calibrate, cmd_evaluate, RunManifest};
use softgrasp::config::ShapeClass;
use softgrasp::harness::{run_comparison, Experiment};
use softgrasp::optimizer::*;
use softgrasp::scene::*;
use softgrasp::sensor::flux_loss;

use common::{
    base_rotation_grid_min, object, proximal_grid_min, rectangle, simplex_grid, square, sum_abs_tz,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, || format!("{what}: {a} vs {b}"))
}

fn flux_cases() -> Check {
    for (i0, i, want) in [
        (1.0, 1.0, 0.0),
        (10.0, 1.0, 10.0),
        (2.0, 1.0, 3.010299956639812),
    ] {
        let got = flux_loss(i0, i).map_err(|e| e.to_string())?;
        close(got, want, 1e-12, &format!("flux_loss({i0}, {i})"))?;
    }
    Ok("3 cases".into())
}

fn metric_identities() -> Check {
    let e = |r: softgrasp::error::Result<f64>| r.map_err(|e| e.to_string());
    close(e(rmse(&[0.0, 0.0], &[1.0, 1.0]))?, 1.0, 1e-9, "rmse")?;
    close(
        e(rmse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]))?,
        (2.0f64 / 3.0).sqrt(),
        1e-9,
        "rmse",
    )?;
    close(
        e(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]))?,
        0.0,
        1e-9,
        "r2",
    )?;
    close(
        e(r_squared(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]))?,
        -3.0,
        1e-9,
        "r2",
    )?;
    close(
        e(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]))?,
        1.0,
        1e-9,
        "r2",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let m = rng.random_range(2..50);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y_hat: Vec<f64> = y.iter().map(|v| v + rng.random_range(-3.0..3.0)).collect();
        let mean = y.iter().sum::<f64>() / m as f64;
        let ss_tot: f64 = y.iter().map(|v| (mean - v).powi(2)).sum();
        let r = e(rmse(&y, &y_hat))?;
        let lhs = e(r_squared(&y, &y_hat))?;
        close(lhs, 1.0 - m as f64 * r * r / ss_tot, 1e-9, "R² identity")?;
    }
    Ok("5 hand cases, identity on 1000 random vectors".into())
}

fn calibrate_scene(sigma: f64) -> Result<[FingerCalibration; 3], String> {
    let mut scene = common::scene();
    scene.response.noise_sigma = sigma;
    let params = common::params();
    let objects: Vec<_> = scene.objects.iter().map(|o| o.object().unwrap()).collect();
    calibrate_fingers(
        &objects,
        &scene.response.finger_models(),
        &params.calibration,
        params.seed,
    )
    .map_err(|e| e.to_string())
}

fn calibration_quality() -> Check {
    let runs = calibrate_scene(0.15)?;
    let mut line = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let m = &r.metrics;
        ensure(m.fn_r2 >= 0.88 && m.sign_success >= 0.94, || {
            format!(
                "finger {}: F_n R² {:.4}, sign success {:.4}",
                i + 1,
                m.fn_r2,
                m.sign_success
            )
        })?;
        line.push(format!(
            "f{} R² {:.3} sign {:.3}",
            i + 1,
            m.fn_r2,
            m.sign_success
        ));
    }
    Ok(line.join(", "))
}

fn noiseless_recovery() -> Check {
    let runs = calibrate_scene(0.0)?;
    let worst = runs
        .iter()
        .map(|r| r.metrics.fn_r2)
        .fold(f64::INFINITY, f64::min);
    ensure(worst >= 0.999, || format!("worst F_n R² {worst}"))?;
    Ok(format!("worst F_n R² {worst:.6}"))
}

fn optimizer_certificates() -> Check {
    let rig = common::noisy_rig();
    let params = OptimizationParams::default();
    let shapes = [
        (square(), ShapeClass::Cube),
        (rectangle(), ShapeClass::Cuboid),
        (ShapeKind::Triangle { side: 0.06 }, ShapeClass::Prism),
        (ShapeKind::Circle { radius: 0.03 }, ShapeClass::Sphere),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut converged = 0;
    let mut worst_tz: f64 = 0.0;
    for (shape, class) in shapes {
        for k in 0..20 {
            let pose = Pose2::new(
                rng.random_range(-0.005..0.005),
                rng.random_range(-0.005..0.005),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let obj = ObjectShape::new(shape, pose).map_err(|e| e.to_string())?;
            let g = interactive_grasp(&obj, Some(class), rig, &params, &mut rng)
                .map_err(|e| e.to_string())?;
            if !g.converged {
                continue;
            }
            converged += 1;
            let tz = max_abs_torque(&g.state);
            worst_tz = worst_tz.max(tz);
            let imbalance = g.state.normal_imbalance().norm();
            let at = || format!("{} pose {k}", shape.name());
            ensure(tz <= 0.01, || format!("{}: |T_z| {tz}", at()))?;
            ensure(imbalance <= 0.1, || {
                format!("{}: imbalance {imbalance}", at())
            })?;
            ensure(g.margin_after >= g.margin_before - 1e-9, || {
                format!("{}: margin {} -> {}", at(), g.margin_before, g.margin_after)
            })?;
        }
    }
    ensure(converged >= 40, || {
        format!("only {converged}/80 grasps converged")
    })?;
    Ok(format!(
        "{converged}/80 converged, worst |T_z| {worst_tz:.4} N*m"
    ))
}

fn oracle_equivalence() -> Check {
    let rig = common::noisy_rig();
    let params = OptimizationParams::default();
    let tolerance = 2.0 * rig.fingers[0].torsional_stiffness * params.rotation_step;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cases = 0;
    for shape in [square(), rectangle()] {
        for (x, y, theta) in [(0.0, 0.0, 0.0), (0.003, -0.002, 7.0), (-0.004, 0.001, -9.0)] {
            let obj = object(shape, x, y, theta);
            for mode in [BaseMode::Circular, BaseMode::Lateral] {
                let start = GripperConfiguration::new(mode, 0.0, rig.grip);
                let out = torque_optimize(&obj, &start, rig, &params, &mut rng)
                    .map_err(|e| e.to_string())?;
                let at = format!("{} {mode} ({x}, {y}, {theta}°)", shape.name());
                ensure(out.converged, || format!("{at} did not converge"))?;
                let achieved = sum_abs_tz(&out.episode);
                let grid = base_rotation_grid_min(&obj, mode, rig)
                    .min(proximal_grid_min(&obj, &start, rig));
                ensure(achieved <= grid + tolerance, || {
                    format!("{at}: Σ|T_z| {achieved} vs grid {grid}")
                })?;
                cases += 1;
            }
        }
    }
    let unit = |deg: f64| unit_from_angle(deg.to_radians());
    let normals = [unit(0.0), unit(90.0), unit(180.0)];
    let points = normals.map(|n| -n * 0.03);
    for min_grip in [0.0, params.min_grip] {
        let oracle = simplex_grid(&normals, 30.0, min_grip);
        let b = balance_normal_forces(&normals, &points, Vec2::zeros(), 30.0, min_grip, 50)
            .map_err(|e| e.to_string())?;
        for j in 0..3 {
            close(
                b.magnitudes[j],
                oracle[j],
                1e-3,
                &format!("F_min {min_grip} magnitude {j}"),
            )?;
        }
    }
    Ok(format!(
        "{cases} torque cases within {tolerance:.4} N*m, simplex grid to 1e-3 N"
    ))
}

fn table_direction() -> Check {
    let scene = common::scene();
    let params = common::params();
    let rig = common::noisy_rig();
    let ex = Experiment {
        rig,
        optimization: &params.optimization,
        noise: scene.noise,
        disturbance: &params.harness.disturbance,
    };
    let c = run_comparison(&scene.objects, 20, &ex, params.seed).map_err(|e| e.to_string())?;
    for row in &c.rows {
        let (conv, inter) = (row.conventional_successes, row.interactive_successes);
        let class = scene.find(&row.object).map_err(|e| e.to_string())?.class;
        ensure(inter >= conv, || {
            format!("{}: {inter} < {conv}", row.object)
        })?;
        if ["cube", "cuboid", "potted_meat_can"].contains(&row.object.as_str()) {
            ensure(inter >= conv + 8, || {
                format!("{}: gap {conv} -> {inter}", row.object)
            })?;
        }
        if matches!(class, Some(ShapeClass::Sphere | ShapeClass::Cylinder)) {
            ensure(inter.abs_diff(conv) <= 1, || {
                format!("{}: {conv} vs {inter}", row.object)
            })?;
        }
    }
    let summary: Vec<String> = c
        .rows
        .iter()
        .map(|r| {
            format!(
                "{} {}/{}",
                r.object, r.conventional_successes, r.interactive_successes
            )
        })
        .collect();
    Ok(summary.join(", "))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = RunManifest {
        scene: common::scene(),
        params: common::params(),
        seed: common::params().seed,
        out: dir.path().to_path_buf(),
        objects: None,
    };
    cmd_calibrate(&manifest).map_err(|e| e.to_string())?;
    let files = ["results.json", "table.csv"];
    let read = || -> Result<Vec<Vec<u8>>, String> {
        cmd_evaluate(&manifest).map_err(|e| e.to_string())?;
        files
            .iter()
            .map(|f| fs::read(dir.path().join(f)).map_err(|e| e.to_string()))
            .collect()
    };
    let first = read()?;
    let second = read()?;
    for (f, (a, b)) in files.iter().zip(first.iter().zip(&second)) {
        ensure(a == b, || format!("{f} differs between runs"))?;
    }
    Ok("results.json and table.csv byte-identical".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Check); 8] = [
        ("flux loss exactness", Duration::from_secs(1), flux_cases),
        (
            "metric identities",
            Duration::from_secs(5),
            metric_identities,
        ),
        (
            "calibration quality",
            Duration::from_secs(30),
            calibration_quality,
        ),
        (
            "noiseless recovery",
            Duration::from_secs(30),
            noiseless_recovery,
        ),
        (
            "optimizer certificates",
            Duration::from_secs(60),
            optimizer_certificates,
        ),
        (
            "oracle equivalence",
            Duration::from_secs(120),
            oracle_equivalence,
        ),
        (
            "policy comparison direction",
            Duration::from_secs(180),
            table_direction,
        ),
        ("determinism", Duration::from_secs(180), determinism),
    ];
    let mut failed = 0;
    for (n, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!(
                "{detail}; took {:.1}s, budget {}s",
                elapsed.as_secs_f64(),
                budget.as_secs()
            )),
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "criterion {}: PASS {name} ({:.2}s) {detail}",
                n + 1,
                elapsed.as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "criterion {}: FAIL {name} ({:.2}s) {why}",
                    n + 1,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
