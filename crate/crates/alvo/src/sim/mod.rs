//! Deterministic raycast renderer of dark scenes with a steerable spotlight.
//!
//! Per pixel: cast a ray, intersect the nearest surface, shade it with
//! `ambient + spot` irradiance (two-sided Lambert, inverse-square falloff,
//! soft cone edge), add counter-based Gaussian noise and quantize to 8 bits.
//! The depth channel carries the camera-frame z of the hit in meters.

pub mod noise;
pub mod scene;

use nalgebra::Vector3;
use thiserror::Error;

use crate::camera::{CameraModel, PixelPoint};
use crate::frame::Frame;
use crate::geometry::{interpolate, Pose};
use scene::{Scene, Surface, TrajectoryScript};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("time {t} outside script range [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },
}

/// Ground-truth body pose at time `t`: linear in translation, spherical in
/// rotation between the bracketing script samples.
pub fn sample_ground_truth(script: &TrajectoryScript, t: f64) -> Result<Pose, SimError> {
    let samples = &script.samples;
    let (start, end) = (script.start_time(), script.end_time());
    if t < start || t > end || samples.is_empty() {
        return Err(SimError::TimeOutOfRange { t, start, end });
    }
    // Index of the first sample with timestamp >= t.
    let idx = samples.partition_point(|(ts, _)| *ts < t);
    if idx == 0 {
        return Ok(samples[0].1);
    }
    let (t1, p1) = samples[idx - 1];
    let (t2, p2) = samples[idx];
    if t == t1 {
        return Ok(p1);
    }
    let alpha = (t - t1) / (t2 - t1);
    Ok(interpolate(&p1, &p2, alpha))
}

/// Result of the pan/tilt forward kinematics.
#[derive(Debug, Clone, Copy)]
pub struct BeamPose {
    pub pose: Pose,
    /// True when either joint was clamped to its limit.
    pub clamped: bool,
}

/// Joint angle limits for [`beam_pose`], radians.
#[derive(Debug, Clone, Copy)]
pub struct JointLimits {
    pub pan: (f64, f64),
    pub tilt: (f64, f64),
}

impl Default for JointLimits {
    fn default() -> Self {
        JointLimits {
            pan: (-std::f64::consts::PI, std::f64::consts::PI),
            tilt: (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
        }
    }
}

/// Spotlight pose for given pan/tilt joint angles:
/// `robot ∘ arm_base ∘ rot_z(pan) ∘ rot_y(tilt)`. The beam points along the
/// resulting +x axis. Angles outside the limits are clamped and flagged.
pub fn beam_pose(
    robot_pose: &Pose,
    arm_base: &Pose,
    pan: f64,
    tilt: f64,
    limits: &JointLimits,
) -> BeamPose {
    let cp = pan.clamp(limits.pan.0, limits.pan.1);
    let ct = tilt.clamp(limits.tilt.0, limits.tilt.1);
    let clamped = cp != pan || ct != tilt;
    let pan_rot = Pose::from_axis_angle(&Vector3::z(), cp, Vector3::zeros());
    let tilt_rot = Pose::from_axis_angle(&Vector3::y(), ct, Vector3::zeros());
    BeamPose {
        pose: robot_pose
            .compose(arm_base)
            .compose(&pan_rot)
            .compose(&tilt_rot),
        clamped,
    }
}

/// World-space beam origin and unit direction from a beam pose.
pub fn beam_ray(beam: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    (beam.translation(), beam.transform_vector(&Vector3::x()))
}

struct SurfaceCache {
    world_to_local: Pose,
    half_u: f64,
    half_v: f64,
}

fn intersect(
    cache: &SurfaceCache,
    origin_local: &Vector3<f64>,
    dir_local: &Vector3<f64>,
) -> Option<(f64, f64, f64)> {
    // Plane z = 0 in the surface frame.
    if dir_local.z.abs() < 1e-12 {
        return None;
    }
    let t = -origin_local.z / dir_local.z;
    if t <= 1e-6 {
        return None;
    }
    let u = origin_local.x + t * dir_local.x;
    let v = origin_local.y + t * dir_local.y;
    if u.abs() > cache.half_u || v.abs() > cache.half_v {
        return None;
    }
    Some((t, u, v))
}

/// Irradiance arriving at a world point on a surface with the given normal.
fn irradiance_at(
    scene: &Scene,
    spot_origin: &Vector3<f64>,
    spot_dir: &Vector3<f64>,
    spot_enabled: bool,
    ambient: f64,
    point: &Vector3<f64>,
    normal: &Vector3<f64>,
) -> f64 {
    let mut irr = ambient;
    if spot_enabled && scene.spotlight.power > 0.0 {
        let to_point = point - spot_origin;
        let r2 = to_point.norm_squared();
        if r2 > 1e-12 {
            let r = r2.sqrt();
            let dir = to_point / r;
            let angle = spot_dir.dot(&dir).clamp(-1.0, 1.0).acos();
            let cone = scene.spotlight.cone_factor(angle);
            if cone > 0.0 {
                // Two-sided Lambert: surfaces reflect from either face.
                let lambert = normal.dot(&dir).abs();
                irr += scene.spotlight.power / r2 * cone * lambert;
            }
        }
    }
    irr
}

/// Everything [`render`] needs besides the scene itself.
#[derive(Debug, Clone, Copy)]
pub struct RenderInputs {
    /// Camera pose in the world (body pose composed with the extrinsic).
    pub camera_pose: Pose,
    /// Spotlight pose in the world, beam along +x.
    pub beam: Pose,
    pub spot_enabled: bool,
    /// Overrides the scene ambient when set (lights-on baseline).
    pub ambient_override: Option<f64>,
    pub frame_index: u64,
    pub timestamp: f64,
}

/// Render one grayscale + depth frame. Pure function of its inputs: the
/// same scene, poses and seed give a bit-identical raster regardless of
/// how many worker threads are used.
pub fn render(scene: &Scene, inputs: &RenderInputs, camera: &CameraModel) -> Frame {
    let w = camera.width;
    let h = camera.height;
    let ambient = inputs.ambient_override.unwrap_or(scene.ambient);
    let (spot_origin, spot_dir) = beam_ray(&inputs.beam);

    let caches: Vec<SurfaceCache> = scene
        .surfaces
        .iter()
        .map(|s| SurfaceCache {
            world_to_local: s.pose.inverse(),
            half_u: s.extent.0 / 2.0,
            half_v: s.extent.1 / 2.0,
        })
        .collect();

    let cam_origin = inputs.camera_pose.translation();
    let cam_rot = inputs.camera_pose.rotation_matrix();

    let mut intensity = vec![0u8; (w * h) as usize];
    let mut depth = vec![f32::NAN; (w * h) as usize];

    // Sub-pixel shading offsets: a center ray (which also supplies the
    // depth channel) plus four corner rays, averaged to anti-alias
    // texture edges.
    const TAPS: [(f64, f64); 5] = [
        (0.0, 0.0),
        (-0.25, -0.25),
        (0.25, -0.25),
        (-0.25, 0.25),
        (0.25, 0.25),
    ];

    let shade_ray = |pix: PixelPoint| -> (f64, Option<f64>) {
        let dir_cam = camera.ray_direction(&pix);
        let dir_world = cam_rot * dir_cam;
        let mut best: Option<(f64, usize, f64, f64)> = None;
        for (i, cache) in caches.iter().enumerate() {
            let o_local = cache.world_to_local.transform_point(&cam_origin);
            let d_local = cache.world_to_local.transform_vector(&dir_world);
            if let Some((t, u, v)) = intersect(cache, &o_local, &d_local) {
                if best.map(|(bt, ..)| t < bt).unwrap_or(true) {
                    best = Some((t, i, u, v));
                }
            }
        }
        match best {
            Some((t, i, u, v)) => {
                let surf: &Surface = &scene.surfaces[i];
                let hit = cam_origin + dir_world * t;
                let normal = surf.pose.transform_vector(&Vector3::z());
                let irr = irradiance_at(
                    scene,
                    &spot_origin,
                    &spot_dir,
                    inputs.spot_enabled,
                    ambient,
                    &hit,
                    &normal,
                );
                (
                    surf.albedo(u, v) * irr * camera.exposure_gain * 255.0,
                    Some(dir_cam.z * t),
                )
            }
            None => (0.0, None),
        }
    };

    let render_row = |y: u32, int_row: &mut [u8], depth_row: &mut [f32]| {
        for x in 0..w {
            let mut value = 0.0;
            let mut depth_z = None;
            for (k, (ox, oy)) in TAPS.iter().enumerate() {
                let (v, z) = shade_ray(PixelPoint::new(x as f64 + ox, y as f64 + oy));
                value += v;
                if k == 0 {
                    // The center ray defines the depth channel, so
                    // unprojection reproduces the surface point exactly.
                    depth_z = z;
                }
            }
            value /= TAPS.len() as f64;
            if let Some(z) = depth_z {
                depth_row[x as usize] = z as f32;
            }
            let noisy = value.round()
                + if scene.noise_sigma > 0.0 {
                    (noise::gaussian(scene.rng_seed, inputs.frame_index, x, y) * scene.noise_sigma)
                        .round()
                } else {
                    0.0
                };
            int_row[x as usize] = noisy.clamp(0.0, 255.0) as u8;
        }
    };

    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8);
    if threads <= 1 || h < 32 {
        for y in 0..h {
            let start = (y * w) as usize;
            let end = start + w as usize;
            let (int_row, depth_row) = (&mut intensity[start..end], &mut depth[start..end]);
            render_row(y, int_row, depth_row);
        }
    } else {
        let rows_per = h.div_ceil(threads as u32);
        let int_chunks: Vec<&mut [u8]> = intensity.chunks_mut((rows_per * w) as usize).collect();
        let depth_chunks: Vec<&mut [f32]> = depth.chunks_mut((rows_per * w) as usize).collect();
        std::thread::scope(|scope| {
            for (chunk_idx, (int_chunk, depth_chunk)) in
                int_chunks.into_iter().zip(depth_chunks).enumerate()
            {
                let render_row = &render_row;
                scope.spawn(move || {
                    let y0 = chunk_idx as u32 * rows_per;
                    for (dy, (int_row, depth_row)) in int_chunk
                        .chunks_mut(w as usize)
                        .zip(depth_chunk.chunks_mut(w as usize))
                        .enumerate()
                    {
                        render_row(y0 + dy as u32, int_row, depth_row);
                    }
                });
            }
        });
    }

    Frame {
        index: inputs.frame_index,
        timestamp: inputs.timestamp,
        width: w,
        height: h,
        intensity,
        depth: Some(depth),
        enhanced: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scene::{AlbedoTexture, SpotLight, TextureKind};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn wall_at(x: f64, extent: (f64, f64), albedo: f64) -> Surface {
        // Plane perpendicular to world x, normal -x (toward the origin).
        Surface {
            pose: Pose::from_euler(0.0, FRAC_PI_2, 0.0, Vector3::new(x, 0.0, 0.0)),
            extent,
            base_albedo: albedo,
            textures: Vec::new(),
        }
    }

    fn simple_script() -> TrajectoryScript {
        TrajectoryScript {
            samples: vec![
                (0.0, Pose::identity()),
                (10.0, Pose::from_translation(2.0, 0.0, 0.0)),
            ],
            camera_extrinsic: scene::forward_camera_extrinsic(),
            arm_base_extrinsic: Pose::identity(),
        }
    }

    fn test_scene(surfaces: Vec<Surface>, ambient: f64, noise_sigma: f64, power: f64) -> Scene {
        Scene {
            surfaces,
            ambient,
            noise_sigma,
            rng_seed: 11,
            spotlight: SpotLight {
                power,
                ..SpotLight::default()
            },
            trajectory: simple_script(),
        }
    }

    fn forward_inputs() -> RenderInputs {
        let cam_pose = Pose::identity().compose(&scene::forward_camera_extrinsic());
        RenderInputs {
            camera_pose: cam_pose,
            beam: Pose::identity(),
            spot_enabled: true,
            ambient_override: None,
            frame_index: 0,
            timestamp: 0.0,
        }
    }

    #[test]
    fn no_light_no_signal() {
        let scene = test_scene(vec![wall_at(2.0, (4.0, 4.0), 1.0)], 0.0, 0.0, 0.0);
        let frame = render(&scene, &forward_inputs(), &CameraModel::default());
        assert!(frame.intensity.iter().all(|&v| v == 0));
    }

    #[test]
    fn on_axis_perpendicular_wall_closed_form() {
        // Wall 2 m ahead, albedo 1, power 2, gain 1, no noise: the axis
        // pixel receives power/r^2 = 0.5, i.e. 255 * 0.5 = 127.5 before
        // quantization. The anti-aliasing taps sit a hair below the
        // center value, so the pixel lands on either side of the round.
        let scene = test_scene(vec![wall_at(2.0, (6.0, 6.0), 1.0)], 0.0, 0.0, 2.0);
        let cam = CameraModel::default();
        let frame = render(&scene, &forward_inputs(), &cam);
        let axis = frame.pixel(cam.cx as u32, cam.cy as u32);
        assert!((127..=129).contains(&axis), "axis pixel {axis}");
        // Depth at the axis pixel is the wall distance.
        let d = frame.depth_at(cam.cx as u32, cam.cy as u32).unwrap();
        assert!((d - 2.0).abs() < 1e-6);
    }

    #[test]
    fn outside_cone_is_at_noise_floor() {
        let scene = test_scene(vec![wall_at(2.0, (40.0, 40.0), 1.0)], 0.0, 0.0, 2.0);
        let cam = CameraModel::default();
        let frame = render(&scene, &forward_inputs(), &cam);
        // A corner pixel views the wall far off the beam axis.
        let corner = frame.pixel(0, 0);
        assert_eq!(corner, 0);
    }

    #[test]
    fn misses_have_no_depth_and_noise_floor_intensity() {
        let scene = test_scene(vec![], 0.5, 0.0, 2.0);
        let frame = render(&scene, &forward_inputs(), &CameraModel::default());
        assert!(frame.intensity.iter().all(|&v| v == 0));
        assert!(frame.depth.as_ref().unwrap().iter().all(|d| d.is_nan()));
    }

    #[test]
    fn dark_scene_bounded_by_noise_floor() {
        // Ambient 0, spotlight off: every pixel within 5 sigma of zero.
        let scene = test_scene(vec![wall_at(2.0, (6.0, 6.0), 1.0)], 0.0, 2.0, 0.0);
        let mut inputs = forward_inputs();
        inputs.spot_enabled = false;
        let frame = render(&scene, &inputs, &CameraModel::default());
        let max = *frame.intensity.iter().max().unwrap();
        assert!(max as f64 <= 5.0 * scene.noise_sigma, "max {max}");
    }

    #[test]
    fn render_is_deterministic() {
        let mut scene = test_scene(vec![wall_at(2.0, (6.0, 6.0), 0.8)], 0.1, 2.0, 2.0);
        scene.surfaces[0].textures.push(AlbedoTexture {
            kind: TextureKind::Checkerboard {
                cell: 0.2,
                low: 0.1,
                high: 0.9,
            },
            region: (-3.0, -3.0, 3.0, 3.0),
        });
        let cam = CameraModel::default();
        let a = render(&scene, &forward_inputs(), &cam);
        let b = render(&scene, &forward_inputs(), &cam);
        assert_eq!(a, b);
    }

    #[test]
    fn more_power_never_darkens_noise_free_pixels() {
        let scene_lo = test_scene(vec![wall_at(2.0, (10.0, 10.0), 0.7)], 0.05, 0.0, 1.0);
        let mut scene_hi = scene_lo.clone();
        scene_hi.spotlight.power = 3.0;
        let cam = CameraModel::default();
        let lo = render(&scene_lo, &forward_inputs(), &cam);
        let hi = render(&scene_hi, &forward_inputs(), &cam);
        for (a, b) in lo.intensity.iter().zip(hi.intensity.iter()) {
            assert!(b >= a);
        }
    }

    #[test]
    fn depth_unprojects_back_onto_the_surface() {
        let scene = test_scene(vec![wall_at(2.0, (8.0, 8.0), 1.0)], 0.2, 0.0, 2.0);
        let cam = CameraModel::default();
        let inputs = forward_inputs();
        let frame = render(&scene, &inputs, &cam);
        let cache = SurfaceCache {
            world_to_local: scene.surfaces[0].pose.inverse(),
            half_u: 4.0,
            half_v: 4.0,
        };
        for (x, y) in [(30u32, 40u32), (106, 100), (180, 150), (5, 190)] {
            let Some(z) = frame.depth_at(x, y) else {
                continue;
            };
            let p_cam = cam.unproject(&PixelPoint::new(x as f64, y as f64), z);
            let p_world = inputs.camera_pose.transform_point(&p_cam);
            // The reconstructed point lies on the plane z_local = 0.
            let local = cache.world_to_local.transform_point(&p_world);
            assert!(local.z.abs() < 1e-6, "plane distance {}", local.z);
        }
    }

    #[test]
    fn energy_stays_inside_the_dilated_cone() {
        let scene = test_scene(vec![wall_at(2.0, (40.0, 40.0), 1.0)], 0.0, 0.0, 2.0);
        let cam = CameraModel::default();
        let inputs = forward_inputs();
        let frame = render(&scene, &inputs, &cam);
        let (origin, dir) = beam_ray(&inputs.beam);
        let half = scene.spotlight.cone_full_angle / 2.0 + scene.spotlight.edge_softness;
        for y in 0..cam.height {
            for x in 0..cam.width {
                if frame.pixel(x, y) == 0 {
                    continue;
                }
                let z = frame.depth_at(x, y).unwrap();
                let p_cam = cam.unproject(&PixelPoint::new(x as f64, y as f64), z);
                let p_world = inputs.camera_pose.transform_point(&p_cam);
                let to_p = (p_world - origin).normalize();
                let angle = dir.dot(&to_p).clamp(-1.0, 1.0).acos();
                assert!(angle <= half + 1e-9, "lit pixel ({x},{y}) at {angle} rad");
            }
        }
    }

    #[test]
    fn ground_truth_sampling() {
        let script = simple_script();
        // Exact sample timestamps return the sample poses.
        let p0 = sample_ground_truth(&script, 0.0).unwrap();
        assert!(p0.translation().norm() < 1e-12);
        let p_end = sample_ground_truth(&script, 10.0).unwrap();
        assert!((p_end.translation() - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        // Linear midpoint.
        let mid = sample_ground_truth(&script, 5.0).unwrap();
        assert!((mid.translation() - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        // Out of range errors.
        assert!(sample_ground_truth(&script, -0.1).is_err());
        assert!(sample_ground_truth(&script, 10.1).is_err());
    }

    #[test]
    fn ground_truth_slerp_midpoint() {
        let script = TrajectoryScript {
            samples: vec![
                (0.0, Pose::identity()),
                (
                    2.0,
                    Pose::from_axis_angle(&Vector3::z(), FRAC_PI_2, Vector3::zeros()),
                ),
            ],
            camera_extrinsic: Pose::identity(),
            arm_base_extrinsic: Pose::identity(),
        };
        let mid = sample_ground_truth(&script, 1.0).unwrap();
        assert!((mid.rotation_angle() - FRAC_PI_4).abs() < 1e-9);
    }

    #[test]
    fn beam_pose_kinematics() {
        let limits = JointLimits::default();
        // Zero joints: beam along the arm base forward axis.
        let b = beam_pose(&Pose::identity(), &Pose::identity(), 0.0, 0.0, &limits);
        let (_, dir) = beam_ray(&b.pose);
        assert!((dir - Vector3::x()).norm() < 1e-12);
        assert!(!b.clamped);

        // Pan of pi/2 swings the beam about the vertical axis.
        let b = beam_pose(
            &Pose::identity(),
            &Pose::identity(),
            FRAC_PI_2,
            0.0,
            &limits,
        );
        let (_, dir) = beam_ray(&b.pose);
        assert!((dir - Vector3::y()).norm() < 1e-9);

        // Composite pan/tilt matches the direct matrix product.
        let (pan, tilt) = (0.4, -0.2);
        let b = beam_pose(&Pose::identity(), &Pose::identity(), pan, tilt, &limits);
        let expected = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), pan)
            * nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), tilt);
        let diff = b.pose.rotation_matrix() - expected.into_inner();
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn beam_pose_clamps_out_of_limit_joints() {
        let limits = JointLimits {
            pan: (-0.5, 0.5),
            tilt: (-0.5, 0.5),
        };
        let b = beam_pose(&Pose::identity(), &Pose::identity(), 1.0, 0.0, &limits);
        assert!(b.clamped);
        let expected = beam_pose(&Pose::identity(), &Pose::identity(), 0.5, 0.0, &limits);
        assert!((b.pose.rotation_matrix() - expected.pose.rotation_matrix()).norm() < 1e-12);
    }
}
