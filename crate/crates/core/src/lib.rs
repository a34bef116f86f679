//! Polygonal 3D semantic mapping from per-frame monocular inputs.
//!
//! Given RGB images with dense depth, per-pixel semantic labels and camera
//! poses, this crate builds a memory-compact large-scale map out of
//! per-superpixel polygons:
//!
//! 1. [`snic`] — semantic-aware non-iterative clustering partitions each
//!    frame into superpixels using a joint spatial/color/label distance.
//! 2. [`refine`] — every superpixel's depth is replaced by a fitted slanted
//!    plane; the road surface is additionally smoothed with RANSAC.
//! 3. [`polygon`] — superpixel regions are traced into closed lattice
//!    contours and simplified into polygons, so only vertices are stored.
//! 4. [`map`] — polygons are lifted through the plane, camera and pose into
//!    the world frame, accumulated across frames and exported as PLY.
//!
//! [`eval`] provides the depth/segmentation losses and metrics used to score
//! any predictor against ground truth, and [`pipeline`] ties all stages into
//! the end-to-end runner behind the `polymap` CLI.
//!
//! All geometry and metrics are generic over the scalar type via [`Real`]
//! (`f32` or `f64`); the type aliases at the crate root fix the default
//! `f64` working precision used by the pipeline.

pub mod camera;
pub mod color;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod map;
pub mod pipeline;
pub mod polygon;
pub mod refine;
pub mod scalar;
pub mod snic;

pub use error::{Error, Result};
pub use scalar::Real;

/// Boolean validity raster; accompanies every depth grid (false = no data).
pub type MaskGrid = grid::ImageGrid<bool>;
/// Semantic label raster (class ids, 255 = ignore).
pub type LabelGrid = grid::ImageGrid<u8>;
/// Superpixel assignment raster (ids `0..k_actual`).
pub type AssignmentGrid = grid::ImageGrid<u32>;
/// 8-bit RGB raster.
pub type RgbGrid = grid::ImageGrid<[u8; 3]>;

/// Depth raster in meters at the default working precision.
pub type DepthGrid = grid::ImageGrid<f64>;
/// CIELAB raster at the default working precision.
pub type LabGrid = grid::ImageGrid<[f64; 3]>;

pub type Point3d = camera::Point3<f64>;
pub type Point3f = camera::Point3<f32>;
pub type IntrinsicsD = camera::CameraIntrinsics<f64>;
pub type PoseD = camera::CameraPose<f64>;
