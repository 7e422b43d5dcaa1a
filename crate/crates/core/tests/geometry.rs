use colorvox::camera::{project_homogeneous, Camera, Intrinsics};
use colorvox::synth::make_azimuth_cameras;
use colorvox::volumes::{GridDims, VoxelFrame};
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

fn test_camera() -> Camera {
    Camera::look_at(
        Intrinsics {
            fx: 90.0,
            fy: 110.0,
            cx: 30.0,
            cy: 34.0,
            img_w: 64,
            img_h: 72,
        },
        [3.0, -4.0, -25.0],
        [8.0, 8.0, 8.0],
        [0.0, -1.0, 0.0],
    )
    .unwrap()
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [0.0f64..16.0, 0.0f64..16.0, 0.0f64..16.0]
}

/// Rotation about the vertical axis that advances the azimuth by `theta`.
fn azimuth_rotation(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

proptest! {
    #[test]
    fn homogeneous_scale_leaves_pixels_unchanged(p in point(), lambda in 1e-3f64..1e3) {
        let cam = test_camera();
        let q = cam.project(p).unwrap();
        let uv = project_homogeneous(&(cam.projection_matrix() * lambda), p).unwrap();
        prop_assert!((uv[0] - q.u).abs() < 1e-9 && (uv[1] - q.v).abs() < 1e-9);
    }

    #[test]
    fn world_rotation_is_absorbed_by_the_camera(
        p in point(),
        axis in [-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0],
        angle in -3.0f64..3.0,
    ) {
        let axis = Vector3::from(axis);
        prop_assume!(axis.norm() > 1e-3);
        let q = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner();
        let cam = test_camera();
        let moved = Camera::new(cam.intrinsics, cam.rotation * q, cam.translation).unwrap();
        let rotated_p: [f64; 3] = (q.transpose() * Vector3::from(p)).into();
        let a = cam.project(p).unwrap();
        let b = moved.project(rotated_p).unwrap();
        prop_assert!((a.u - b.u).abs() < 1e-8 && (a.v - b.v).abs() < 1e-8);
        prop_assert!((a.depth - b.depth).abs() < 1e-9);
    }

    #[test]
    fn azimuth_cameras_are_rotation_equivariant(p in point(), k in 0usize..11, elevation in -40.0f64..40.0) {
        let dims = GridDims::cube(16).unwrap();
        let frame = VoxelFrame::default();
        let cams = make_azimuth_cameras(12, elevation, 60.0, &dims, &frame, Intrinsics::centered(200.0, 128)).unwrap();
        let c = Vector3::from(frame.grid_center(&dims));
        let r = azimuth_rotation(30f64.to_radians());
        let rotated: [f64; 3] = (r.transpose() * (Vector3::from(p) - c) + c).into();
        let a = cams[k].project(rotated).unwrap();
        let b = cams[k + 1].project(p).unwrap();
        prop_assert!((a.u - b.u).abs() < 1e-8 && (a.v - b.v).abs() < 1e-8, "{:?} vs {:?}", a, b);
    }
}

#[test]
fn twelve_cameras_step_thirty_degrees() {
    let dims = GridDims::cube(8).unwrap();
    let frame = VoxelFrame::default();
    let cams = make_azimuth_cameras(12, 0.0, 30.0, &dims, &frame, Intrinsics::centered(80.0, 64)).unwrap();
    let c = Vector3::from(frame.grid_center(&dims));
    for k in 0..12 {
        let a = cams[k].center() - c;
        let b = cams[(k + 1) % 12].center() - c;
        let angle = (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos();
        assert!((angle.to_degrees() - 30.0).abs() < 1e-9);
    }
    let single = make_azimuth_cameras(1, 0.0, 30.0, &dims, &frame, Intrinsics::centered(80.0, 64)).unwrap();
    assert_eq!(single[0], cams[0]);
}
