//! Contact resolution against independent geometry oracles.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softgrasp::scene::*;

/// Point-in-convex-polygon by half-planes (CCW vertices).
fn inside(verts: &[Vec2], p: &Vec2) -> bool {
    (0..verts.len()).all(|k| {
        let a = verts[k];
        let b = verts[(k + 1) % verts.len()];
        cross(&(b - a), &(p - a)) >= 0.0
    })
}

/// Marches along the ray until it enters the polygon, then bisects the entry.
fn march_entry(verts: &[Vec2], origin: &Vec2, dir: &Vec2) -> Option<Vec2> {
    let step = 1e-4;
    let mut t = 0.0;
    while t < 0.3 {
        let next = t + step;
        if inside(verts, &(origin + dir * next)) {
            let (mut lo, mut hi) = (t, next);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if inside(verts, &(origin + dir * mid)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(origin + dir * hi);
        }
        t = next;
    }
    None
}

#[test]
fn rotated_square_contacts_match_marching_oracle() {
    let geometry = GripperGeometry::default();
    let object = ObjectShape::new(
        ShapeKind::Square { side: 0.05 },
        Pose2::new(0.0, 0.0, 17f64.to_radians()),
    )
    .unwrap();
    let verts = object.vertices();
    for mode in [BaseMode::Circular, BaseMode::Lateral, BaseMode::Parallel] {
        let config = GripperConfiguration::new(mode, 0.0, 6.0);
        let frames = geometry.finger_frames(&config);
        for (i, patch) in resolve_contacts(&object, &config, &geometry) {
            let patch = patch.expect("every finger meets the square");
            let oracle = march_entry(&verts, &frames[i].base, &frames[i].approach).unwrap();
            assert!(
                (patch.point - oracle).norm() < 1e-9,
                "{mode} finger {i}: {:?} vs {:?}",
                patch.point,
                oracle
            );
            assert!(object.boundary_distance(&patch.point) < 1e-12);
            // The inward normal is orthogonal to the face and points into the square.
            assert!((patch.normal.norm() - 1.0).abs() < NORMAL_TOLERANCE);
            assert!(inside(&verts, &(patch.point + patch.normal * 1e-6)));
        }
    }
}

#[test]
fn circle_contacts_match_closed_form() {
    let geometry = GripperGeometry::default();
    let object = ObjectShape::new(
        ShapeKind::Circle { radius: 0.03 },
        Pose2::new(0.004, -0.002, 0.0),
    )
    .unwrap();
    let config = GripperConfiguration::new(BaseMode::Circular, 0.3, 6.0);
    let frames = geometry.finger_frames(&config);
    for (i, patch) in resolve_contacts(&object, &config, &geometry) {
        let patch = patch.unwrap();
        let point = patch.point;
        assert!(((point - object.centroid()).norm() - 0.03).abs() < 1e-12);
        // The hit lies on the approach ray.
        assert!(cross(&(point - frames[i].base), &frames[i].approach).abs() < 1e-12);
        let expected = (object.centroid() - point).normalize();
        assert!((patch.normal - expected).norm() < 1e-12);
    }
}

fn arb_shape() -> impl Strategy<Value = ShapeKind> {
    prop_oneof![
        (0.02..0.05f64).prop_map(|radius| ShapeKind::Circle { radius }),
        (0.03..0.08f64).prop_map(|side| ShapeKind::Square { side }),
        (0.03..0.09f64, 0.03..0.07f64)
            .prop_map(|(width, height)| ShapeKind::Rectangle { width, height }),
        (0.04..0.09f64).prop_map(|side| ShapeKind::Triangle { side }),
    ]
}

fn arb_mode() -> impl Strategy<Value = BaseMode> {
    prop_oneof![
        Just(BaseMode::Circular),
        Just(BaseMode::Lateral),
        Just(BaseMode::Parallel)
    ]
}

proptest! {
    /// Rotating object and gripper together about the grasp center rotates every
    /// contact the same way and leaves depths, extents and offsets unchanged.
    #[test]
    fn contacts_are_rotation_equivariant(
        shape in arb_shape(),
        mode in arb_mode(),
        x in -0.005..0.005f64,
        y in -0.005..0.005f64,
        theta in 0.0..(2.0 * PI),
        phi in -PI..PI,
        rho in -0.5..0.5f64,
    ) {
        let geometry = GripperGeometry::default();
        let object = ObjectShape::new(shape, Pose2::new(x, y, theta)).unwrap();
        let config = GripperConfiguration::new(mode, rho, 6.0);
        let mut turned_config = config;
        turned_config.base_rotation += phi;
        let turned = object.transformed(phi, Vec2::zeros());
        let a = resolve_contacts(&object, &config, &geometry);
        let b = resolve_contacts(&turned, &turned_config, &geometry);
        let frames = geometry.finger_frames(&config);
        let verts = object.vertices();
        let turned_verts = turned.vertices();
        for ((i, pa), (j, pb)) in a.iter().zip(&b) {
            prop_assert_eq!(i, j);
            match (pa, pb) {
                (Some(pa), Some(pb)) => {
                    prop_assert!((rotate(&pa.point, phi) - pb.point).norm() < 1e-9);
                    prop_assert!((rotate(&pa.normal, phi) - pb.normal).norm() < 1e-7);
                    prop_assert!((pa.depth - pb.depth).abs() < 1e-12);
                    prop_assert!((pa.extent - pb.extent).abs() < 1e-9);
                    prop_assert!((pa.offset - pb.offset).abs() < 1e-9);
                }
                (None, None) => {}
                // A ray within rounding of a corner or a tangent may flip; anything
                // else is a real disagreement.
                (Some(p), None) | (None, Some(p)) => {
                    let approach = if pa.is_some() {
                        frames[*i].approach
                    } else {
                        rotate(&frames[*i].approach, phi)
                    };
                    let corners = if pa.is_some() { &verts } else { &turned_verts };
                    let grazing = p.normal.dot(&approach) < 1e-5;
                    let at_corner = corners.iter().any(|v| (v - p.point).norm() < 1e-8);
                    prop_assert!(grazing || at_corner, "finger {} flipped", i);
                }
            }
        }
    }

    /// Contact points lie on the boundary with unit inward normals.
    #[test]
    fn contacts_lie_on_boundary(
        shape in arb_shape(),
        mode in arb_mode(),
        theta in 0.0..(2.0 * PI),
        rho in -1.0..1.0f64,
    ) {
        let geometry = GripperGeometry::default();
        let object = ObjectShape::new(shape, Pose2::new(0.001, -0.002, theta)).unwrap();
        let config = GripperConfiguration::new(mode, rho, 6.0);
        for (_, patch) in resolve_contacts(&object, &config, &geometry) {
            if let Some(p) = patch {
                prop_assert!(object.boundary_distance(&p.point) < 1e-9);
                prop_assert!((p.normal.norm() - 1.0).abs() < 1e-12);
                prop_assert!(p.extent <= geometry.pad_width + 1e-12);
                prop_assert!(p.offset.abs() <= 0.5 * geometry.pad_width + 1e-12);
            }
        }
    }
}

#[test]
fn pose_noise_has_disc_and_uniform_statistics() {
    // Uniform disc of radius r: per-axis std r/2. Uniform angle on ±h: std h/√3.
    let noise = PoseNoiseSpec {
        translation_radius: 0.01,
        rotation_half_range: 10f64.to_radians(),
    };
    let object =
        ObjectShape::new(ShapeKind::Square { side: 0.05 }, Pose2::new(0.0, 0.0, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 40_000;
    let (mut sx, mut sy, mut sxx, mut syy, mut stt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut max_r: f64 = 0.0;
    for _ in 0..n {
        let p = perturb_pose(&object, &noise, &mut rng).pose;
        let dt = wrap_angle(p.theta - 1.0);
        assert!(dt.abs() <= noise.rotation_half_range + 1e-12);
        max_r = max_r.max(p.x.hypot(p.y));
        sx += p.x;
        sy += p.y;
        sxx += p.x * p.x;
        syy += p.y * p.y;
        stt += dt * dt;
    }
    let n = n as f64;
    let std_x = (sxx / n - (sx / n).powi(2)).sqrt();
    let std_y = (syy / n - (sy / n).powi(2)).sqrt();
    let std_t = (stt / n).sqrt();
    assert!(max_r <= 0.01 + 1e-15);
    assert!((std_x - 0.005).abs() < 0.05 * 0.005, "std_x {std_x}");
    assert!((std_y - 0.005).abs() < 0.05 * 0.005, "std_y {std_y}");
    let expected_t = noise.rotation_half_range / 3f64.sqrt();
    assert!(
        (std_t - expected_t).abs() < 0.05 * expected_t,
        "std_t {std_t}"
    );
}

#[test]
fn noise_is_reproducible_from_seed() {
    let object = ObjectShape::new(
        ShapeKind::Circle { radius: 0.03 },
        Pose2::new(0.0, 0.0, 0.0),
    )
    .unwrap();
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perturb_pose(&object, &PoseNoiseSpec::default(), &mut rng)
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}
