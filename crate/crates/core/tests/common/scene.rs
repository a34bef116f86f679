//! Synthetic scenes with known analytic geometry.

use std::path::{Path, PathBuf};

use polymap::camera::{CameraIntrinsics, CameraPose, Mat3, Point3};
use polymap::grid::ImageGrid;
use polymap::io;
use polymap::pipeline::{FrameBundle, PipelineConfig};
use polymap::refine::RansacParams;
use polymap::snic::SuperpixelPartition;
use polymap::{DepthGrid, LabelGrid, MaskGrid, RgbGrid};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

pub const CORRIDOR_SIZE: usize = 96;
pub const CORRIDOR_FOCAL: f64 = 96.0;
pub const CORRIDOR_PITCH_DEG: f64 = 20.0;
pub const GROUND_Y: f64 = 1.5;
pub const NEAR_WALL_Z: f64 = 3.0;
/// Vertical extent of the near wall (a barrier the camera sees over).
pub const NEAR_WALL_Y: (f64, f64) = (0.3, 1.5);
pub const FAR_WALL_Z: f64 = 6.0;
/// Pixels whose true depth changes faster than this per pixel are reported
/// as invalid, mimicking a sensor failing at grazing incidence.
pub const SLANT_LIMIT: f64 = 0.05;
pub const FRAME_SPACING: f64 = 1.2;

pub const ROAD: u8 = 0;
pub const BUILDING: u8 = 2;
pub const FENCE: u8 = 4;

/// A corridor running along world x, viewed side-on by a camera pitched
/// down; the camera travels along the corridor. Every surface is a world
/// plane: ground y=1.5, a low near wall at z=3 and the far wall at z=6.
pub struct Corridor {
    pub intrinsics: CameraIntrinsics<f64>,
    rotation: Mat3<f64>,
}

pub struct CorridorFrame {
    pub depth: DepthGrid,
    pub mask: MaskGrid,
    pub labels: LabelGrid,
    pub rgb: RgbGrid,
    pub pose: CameraPose<f64>,
}

impl Default for Corridor {
    fn default() -> Self {
        let (s, c) = CORRIDOR_PITCH_DEG.to_radians().sin_cos();
        Self {
            intrinsics: CameraIntrinsics::new(
                CORRIDOR_FOCAL,
                CORRIDOR_FOCAL,
                (CORRIDOR_SIZE as f64 - 1.0) / 2.0,
                (CORRIDOR_SIZE as f64 - 1.0) / 2.0,
            )
            .unwrap(),
            rotation: Mat3::new([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]]),
        }
    }
}

impl Corridor {
    pub fn pose(&self, frame: u64) -> CameraPose<f64> {
        CameraPose::new(
            self.rotation,
            Point3::new(FRAME_SPACING * frame as f64, 0.0, 0.0),
        )
        .unwrap()
    }

    /// World-frame ray through pixel (u, v) for a camera at any position
    /// (orientation is shared by all frames).
    fn ray(&self, u: f64, v: f64) -> Point3<f64> {
        self.rotation.mul_vec(&self.intrinsics.ray_direction(u, v))
    }

    /// True depth and surface label for the ray through (u, v).
    /// Depth equals the ray parameter because the camera-frame ray has unit z.
    pub fn true_hit(&self, u: f64, v: f64) -> (f64, u8) {
        let d = self.ray(u, v);
        let mut best = (FAR_WALL_Z / d.z, BUILDING);
        if d.y > 0.0 {
            let t = GROUND_Y / d.y;
            if t < best.0 {
                best = (t, ROAD);
            }
        }
        let t_near = NEAR_WALL_Z / d.z;
        let y_at = t_near * d.y;
        if (NEAR_WALL_Y.0..=NEAR_WALL_Y.1).contains(&y_at) && t_near < best.0 {
            best = (t_near, FENCE);
        }
        best
    }

    /// Renders one frame; depth noise `sigma` is applied to valid pixels.
    pub fn render(&self, frame: u64, sigma: f64, rng: &mut ChaCha8Rng) -> CorridorFrame {
        let n = CORRIDOR_SIZE;
        let pose = self.pose(frame);
        let cam_x = pose.translation().x;
        let mut depth = ImageGrid::filled(n, n, 0.0f64).unwrap();
        let mut mask = ImageGrid::filled(n, n, false).unwrap();
        let mut labels = ImageGrid::filled(n, n, BUILDING).unwrap();
        let mut rgb = ImageGrid::filled(n, n, [0u8; 3]).unwrap();

        for y in 0..n {
            for x in 0..n {
                let (u, v) = (x as f64, y as f64);
                let (t, label) = self.true_hit(u, v);
                labels.set(x, y, label);

                // Grazing-incidence validity: central-difference slant.
                let du = (self.true_hit(u + 0.5, v).0 - self.true_hit(u - 0.5, v).0).abs();
                let dv = (self.true_hit(u, v + 0.5).0 - self.true_hit(u, v - 0.5).0).abs();
                let valid = du.max(dv) <= SLANT_LIMIT && t < 50.0;
                if valid {
                    let noisy = (t + super::normal(rng, sigma)).max(0.05);
                    depth.set(x, y, noisy);
                    mask.set(x, y, true);
                }

                // World-anchored texture so frames actually differ.
                let hit = self.ray(u, v).scale(t);
                let (wx, wy, wz) = (hit.x + cam_x, hit.y, hit.z);
                let base = match label {
                    ROAD => [90u8, 90, 95],
                    FENCE => [160, 120, 60],
                    _ => [70, 90, 140],
                };
                let speck = (((wx * 2.0).floor() as i64 * 7349
                    + ((wy + wz) * 2.0).floor() as i64 * 2971)
                    .rem_euclid(25)) as i16
                    - 12;
                rgb.set(
                    x,
                    y,
                    [0, 1, 2].map(|c| (i16::from(base[c]) + speck).clamp(0, 255) as u8),
                );
            }
        }
        CorridorFrame {
            depth,
            mask,
            labels,
            rgb,
            pose,
        }
    }

    /// Writes `count` frames plus poses and a frame index under `dir`;
    /// returns the bundles and the pose file path.
    pub fn write_sequence(
        &self,
        dir: &Path,
        count: u64,
        sigma: f64,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<FrameBundle>, PathBuf) {
        let mut poses_text = String::new();
        let mut bundles = Vec::new();
        for frame in 0..count {
            let rendered = self.render(frame, sigma, rng);
            let rgb_path = dir.join(format!("rgb_{frame}.png"));
            let depth_path = dir.join(format!("depth_{frame}.png"));
            let labels_path = dir.join(format!("labels_{frame}.png"));
            io::save_rgb(&rendered.rgb, &rgb_path).unwrap();
            io::save_depth(&rendered.depth, &rendered.mask, 256.0, &depth_path).unwrap();
            io::save_labels(&rendered.labels, &labels_path).unwrap();
            let r = rendered.pose.rotation().rows;
            let t = rendered.pose.translation();
            poses_text.push_str(&format!(
                "{:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}\n",
                r[0][0], r[0][1], r[0][2], t.x, r[1][0], r[1][1], r[1][2], t.y, r[2][0],
                r[2][1], r[2][2], t.z
            ));
            bundles.push(FrameBundle {
                frame_id: frame,
                rgb: rgb_path,
                depth: depth_path,
                labels: labels_path,
                pose: rendered.pose,
            });
        }
        let poses_path = dir.join("poses.txt");
        std::fs::write(&poses_path, poses_text).unwrap();
        (bundles, poses_path)
    }

    /// Pipeline configuration for this scene.
    pub fn config(&self, snic_k: usize, poses_path: &Path) -> PipelineConfig {
        PipelineConfig {
            intrinsics: self.intrinsics,
            snic_k,
            snic_spatial_norm: None,
            snic_color_norm: 100.0,
            snic_lambda: 10.0,
            epsilon: 0.0,
            ransac: RansacParams {
                iterations: 200,
                inlier_threshold: 0.15,
                min_inliers: 0.5,
                rng_seed: 42,
            },
            road_class: ROAD,
            sky_class: 10,
            depth_scale: 256.0,
            color_mode: polymap::map::ColorMode::Semantic,
            ply_format: polymap::map::PlyFormat::Ascii,
            poses_path: Some(poses_path.to_path_buf()),
            palette_path: None,
        }
    }

    /// Distance from a world point to the nearest analytic surface plane.
    pub fn surface_distance(&self, p: &Point3<f64>) -> f64 {
        let to_ground = (p.y - GROUND_Y).abs();
        let to_near = (p.z - NEAR_WALL_Z).abs();
        let to_far = (p.z - FAR_WALL_Z).abs();
        to_ground.min(to_near).min(to_far)
    }
}

/// A piecewise-planar depth scene on a rectangular patch partition, for the
/// refinement-improvement acceptance check.
pub struct PlanarScene {
    pub partition: SuperpixelPartition<f64>,
    pub truth: DepthGrid,
    pub mask: MaskGrid,
}

pub fn piecewise_planar_scene(rng: &mut ChaCha8Rng, w: usize, h: usize) -> PlanarScene {
    let (cols, rows) = (4usize, 4usize);
    let mut assignment = ImageGrid::filled(w, h, 0u32).unwrap();
    let mut planes = Vec::new();
    for _ in 0..rows * cols {
        planes.push((
            rng.random_range(-0.03..0.03),
            rng.random_range(-0.03..0.03),
            rng.random_range(6.0..20.0),
        ));
    }
    let mut truth = ImageGrid::filled(w, h, 0.0f64).unwrap();
    for y in 0..h {
        for x in 0..w {
            let patch = (y * rows / h) * cols + (x * cols / w);
            assignment.set(x, y, patch as u32);
            let (a, b, c) = planes[patch];
            truth.set(x, y, a * x as f64 + b * y as f64 + c);
        }
    }
    PlanarScene {
        partition: SuperpixelPartition::from_assignment(assignment).unwrap(),
        truth,
        mask: ImageGrid::filled(w, h, true).unwrap(),
    }
}

/// Root-mean-square difference over masked pixels.
pub fn rms_vs(a: &DepthGrid, b: &DepthGrid, mask: &MaskGrid) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for ((x, y), &m) in mask.iter() {
        if m {
            let d = a.get(x, y) - b.get(x, y);
            acc += d * d;
            n += 1;
        }
    }
    (acc / n as f64).sqrt()
}
