//! Shared scene builders for the criterion benchmarks in `benches/`.

use nalgebra::Vector3;
use regsweep_core::dataio::{DynamicBox, GroundRings, MotionSpec, Pole, SceneSpec};
use regsweep_core::{make_scene, SyntheticScene};

/// A mid-sized highway-like scene: ring-sampled ground, a few poles, one
/// moving box, blind spots, and forward motion.
pub fn highway_scene() -> SyntheticScene {
    let spec = SceneSpec {
        ground_rings: Some(GroundRings {
            radius_min: 1.5,
            radius_max: 40.0,
            rings: 40,
            points_per_ring: 360,
            z: -1.7,
        }),
        poles: (0..8)
            .map(|i| Pole {
                x: -30.0 + 8.0 * i as f64,
                y: if i % 2 == 0 { 7.0 } else { -7.0 },
                z_min: -1.0,
                z_max: 5.0,
                spacing: 0.25,
            })
            .collect(),
        dynamic_box: Some(DynamicBox {
            center: [6.0, 3.0, 0.0],
            size: [4.0, 2.0, 1.5],
            spacing: 0.2,
            displacement: [2.5, 0.0, 0.0],
        }),
        blind_spot_radius: Some(5.0),
        noise_sigma: 0.01,
        ego_motion: MotionSpec {
            translation: [1.2, 0.0, 0.0],
            yaw_deg: 0.5,
        },
        ..SceneSpec::default()
    };
    make_scene(&spec, 42).expect("benchmark scene is valid")
}

/// Dense flat grid used for index build/query benchmarks.
pub fn grid_points(n_side: usize, spacing: f64) -> Vec<Vector3<f64>> {
    (0..n_side)
        .flat_map(|i| {
            (0..n_side).map(move |j| {
                Vector3::new(
                    i as f64 * spacing,
                    j as f64 * spacing,
                    ((i * 7 + j * 13) % 11) as f64 * 0.01,
                )
            })
        })
        .collect()
}
