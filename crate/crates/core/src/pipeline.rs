//! End-to-end pipeline: configuration, frame table and the multi-frame
//! runner behind the CLI.
//!
//! Per frame: CIELAB conversion → superpixel clustering → per-superpixel
//! plane refinement → RANSAC road smoothing → boundary polygonization →
//! label/color assignment → world-frame lifting. Frames run on a bounded
//! worker pool; accumulation into the map and the PLY export are serialized
//! in frame-id order, so identical inputs (seed included) produce
//! byte-identical output.
//!
//! Road-touching superpixels are refit from the smoothed depth after the
//! RANSAC stage so the polygons they export agree with the smoothed road
//! surface.

use std::collections::{HashMap, HashSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::color::rgb_grid_to_lab;
use crate::error::{Error, Result};
use crate::io;
use crate::map::{
    assign_label, export_ply_to_path, lift_polygon, mean_rgb, ColorMode, MapPolygon3D,
    MemoryStats, Palette, PlyFormat, SemanticMap,
};
use crate::polygon::{contour_to_polygon, trace_boundary};
use crate::refine::{apply_planes, fit_plane, ransac_ground, GroundOutcome, RansacParams};
use crate::snic::{run_snic, SnicParams};

/// Paths and pose of one input frame.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    pub frame_id: u64,
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub labels: PathBuf,
    pub pose: CameraPose<f64>,
}

/// Fully resolved pipeline configuration (working precision f64).
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub intrinsics: CameraIntrinsics<f64>,
    pub snic_k: usize,
    /// Spatial normalizer; `None` means the per-frame grid-cell area.
    pub snic_spatial_norm: Option<f64>,
    pub snic_color_norm: f64,
    pub snic_lambda: f64,
    /// Polygon simplification tolerance in pixels (0 = lossless).
    pub epsilon: f64,
    pub ransac: RansacParams<f64>,
    pub road_class: u8,
    pub sky_class: u8,
    pub depth_scale: f64,
    pub color_mode: ColorMode,
    pub ply_format: PlyFormat,
    /// Pose file; required by the multi-frame pipeline, unused by
    /// single-frame stages.
    pub poses_path: Option<PathBuf>,
    pub palette_path: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snic_k < 1 {
            return Err(Error::Config("snic_k must be >= 1".into()));
        }
        if let Some(s) = self.snic_spatial_norm {
            if s <= 0.0 || s.is_nan() {
                return Err(Error::Config("snic_spatial_norm must be positive".into()));
            }
        }
        if self.snic_color_norm <= 0.0 || self.snic_color_norm.is_nan() {
            return Err(Error::Config("snic_color_norm must be positive".into()));
        }
        if self.snic_lambda < 0.0 {
            return Err(Error::Config("snic_lambda must be non-negative".into()));
        }
        if self.epsilon < 0.0 {
            return Err(Error::Config("epsilon must be non-negative".into()));
        }
        if self.depth_scale <= 0.0 || self.depth_scale.is_nan() {
            return Err(Error::Config("depth_scale must be positive".into()));
        }
        self.ransac
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    fn snic_params(&self, width: usize, height: usize) -> SnicParams<f64> {
        SnicParams {
            k_superpixels: self.snic_k,
            spatial_norm: self
                .snic_spatial_norm
                .unwrap_or((width * height) as f64 / self.snic_k as f64),
            color_norm: self.snic_color_norm,
            semantic_penalty: self.snic_lambda,
        }
    }
}

/// Builds a [`PipelineConfig`] from `key=value` lines plus overrides
/// (command-line flags win over the file).
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    values: HashMap<String, String>,
    base_dir: PathBuf,
}

const CONFIG_KEYS: &[&str] = &[
    "fx",
    "fy",
    "cx",
    "cy",
    "snic_k",
    "snic_spatial_norm",
    "snic_color_norm",
    "snic_lambda",
    "epsilon",
    "ransac_iterations",
    "ransac_threshold",
    "ransac_min_inliers",
    "ransac_seed",
    "road_class",
    "sky_class",
    "depth_scale",
    "color_mode",
    "ply_format",
    "poses",
    "palette",
];

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a config file; `#` starts a comment line.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut builder = Self {
            values: HashMap::new(),
            base_dir: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{}: line {} is not key=value",
                    path.display(),
                    lineno + 1
                )));
            };
            builder.set(key.trim(), value.trim())?;
        }
        Ok(builder)
    }

    /// Sets or overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("cannot parse {key}='{raw}'"))
            }),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::Config(format!("missing required config key '{key}'")))
    }

    fn resolve_path(&self, raw: &str) -> PathBuf {
        let p = PathBuf::from(raw);
        if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn build(&self) -> Result<PipelineConfig> {
        let intrinsics = CameraIntrinsics::new(
            self.require::<f64>("fx")?,
            self.require::<f64>("fy")?,
            self.require::<f64>("cx")?,
            self.require::<f64>("cy")?,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let ransac = RansacParams {
            iterations: self.parse("ransac_iterations")?.unwrap_or(200),
            inlier_threshold: self.parse("ransac_threshold")?.unwrap_or(0.15),
            min_inliers: self.parse("ransac_min_inliers")?.unwrap_or(0.5),
            // No hidden randomness: the seed must be stated.
            rng_seed: self.require("ransac_seed")?,
        };
        let color_mode = match self.values.get("color_mode").map(String::as_str) {
            None | Some("semantic") => ColorMode::Semantic,
            Some("rgb") => ColorMode::Rgb,
            Some(other) => {
                return Err(Error::Config(format!(
                    "color_mode must be 'semantic' or 'rgb', got '{other}'"
                )))
            }
        };
        let ply_format = match self.values.get("ply_format").map(String::as_str) {
            None | Some("ascii") => PlyFormat::Ascii,
            Some("binary") => PlyFormat::BinaryLittleEndian,
            Some(other) => {
                return Err(Error::Config(format!(
                    "ply_format must be 'ascii' or 'binary', got '{other}'"
                )))
            }
        };
        let config = PipelineConfig {
            intrinsics,
            snic_k: self.require("snic_k")?,
            snic_spatial_norm: self.parse("snic_spatial_norm")?,
            snic_color_norm: self.parse("snic_color_norm")?.unwrap_or(100.0),
            snic_lambda: self.parse("snic_lambda")?.unwrap_or(10.0),
            epsilon: self.parse("epsilon")?.unwrap_or(0.0),
            ransac,
            road_class: self.parse("road_class")?.unwrap_or(0),
            sky_class: self.parse("sky_class")?.unwrap_or(10),
            depth_scale: self.parse("depth_scale")?.unwrap_or(256.0),
            color_mode,
            ply_format,
            poses_path: self.values.get("poses").map(|raw| self.resolve_path(raw)),
            palette_path: self
                .values
                .get("palette")
                .map(|raw| self.resolve_path(raw)),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Reads the frame index (`frame_id rgb depth labels` per line), resolving
/// relative paths against the index file's directory and attaching the pose
/// whose line number equals the frame id.
pub fn read_frame_index(path: &Path, poses: &[CameraPose<f64>]) -> Result<Vec<FrameBundle>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading frame index {}", path.display()), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |raw: &str| -> PathBuf {
        let p = PathBuf::from(raw);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let mut frames = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::format(
                path,
                format!("line {}: expected 4 fields, got {}", lineno + 1, fields.len()),
            ));
        }
        let frame_id: u64 = fields[0].parse().map_err(|_| {
            Error::format(path, format!("line {}: bad frame id '{}'", lineno + 1, fields[0]))
        })?;
        if !seen.insert(frame_id) {
            return Err(Error::format(
                path,
                format!("line {}: duplicate frame id {frame_id}", lineno + 1),
            ));
        }
        let pose = *poses.get(frame_id as usize).ok_or_else(|| {
            Error::format(
                path,
                format!(
                    "line {}: frame id {frame_id} has no pose (pose file has {} lines)",
                    lineno + 1,
                    poses.len()
                ),
            )
        })?;
        frames.push(FrameBundle {
            frame_id,
            rgb: resolve(fields[1]),
            depth: resolve(fields[2]),
            labels: resolve(fields[3]),
            pose,
        });
    }
    if frames.is_empty() {
        return Err(Error::format(path, "no frames listed"));
    }
    Ok(frames)
}

/// Wall-clock stage breakdown of one frame, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub frame_id: u64,
    pub snic_ms: f64,
    pub refine_ms: f64,
    pub polygonize_ms: f64,
    pub lift_ms: f64,
    pub total_ms: f64,
}

/// Result of processing a whole sequence.
#[derive(Debug)]
pub struct PipelineReport {
    pub stats: MemoryStats,
    pub timings: Vec<FrameTiming>,
    /// Frames that failed, with the error text (processing continued).
    pub skipped: Vec<(u64, String)>,
    pub map_path: PathBuf,
    pub polygon_count: usize,
}

/// Per-frame stage output, before accumulation into the map.
#[derive(Debug)]
pub struct FrameOutput {
    pub frame_id: u64,
    pub polygons: Vec<MapPolygon3D<f64>>,
    /// Valid-depth pixels represented by the lifted polygons.
    pub dense_points: usize,
    pub timing: FrameTiming,
}

/// Runs one frame through every stage. Pure given the inputs and config.
pub fn process_frame(config: &PipelineConfig, frame: &FrameBundle) -> Result<FrameOutput> {
    let started = Instant::now();
    let rgb = io::load_rgb(&frame.rgb)?;
    let (depth, mask) = io::load_depth::<f64>(&frame.depth, config.depth_scale)?;
    let labels = io::load_labels(&frame.labels)?;
    if !rgb.same_dims(&depth) || !rgb.same_dims(&labels) {
        return Err(Error::InvalidInput(format!(
            "frame {}: raster dimensions differ (rgb {}x{}, depth {}x{}, labels {}x{})",
            frame.frame_id,
            rgb.width(),
            rgb.height(),
            depth.width(),
            depth.height(),
            labels.width(),
            labels.height()
        )));
    }

    let t0 = Instant::now();
    let lab = rgb_grid_to_lab::<f64>(&rgb);
    let partition = run_snic(&lab, &labels, &config.snic_params(rgb.width(), rgb.height()))?;
    let snic_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t0 = Instant::now();
    let (refined, rmask, mut planes) = apply_planes(&partition, &depth, &mask)?;
    let (ground, refined, rmask) = ransac_ground(
        &refined,
        &rmask,
        &labels,
        config.road_class,
        &config.intrinsics,
        &config.ransac,
    )?;
    match &ground {
        GroundOutcome::Smoothed { inliers, .. } => {
            log::debug!("frame {}: road smoothed ({inliers} inliers)", frame.frame_id);
            // Planes of road-touching superpixels are refit so the exported
            // polygons agree with the smoothed surface.
            let mut touches_road = vec![false; partition.k_actual()];
            for (i, &l) in labels.as_slice().iter().enumerate() {
                if l == config.road_class {
                    touches_road[partition.assignment().as_slice()[i] as usize] = true;
                }
            }
            let mut samples: Vec<Vec<(f64, f64, f64)>> =
                vec![Vec::new(); partition.k_actual()];
            for ((x, y), &id) in partition.assignment().iter() {
                if touches_road[id as usize] && *rmask.get(x, y) {
                    samples[id as usize].push((x as f64, y as f64, *refined.get(x, y)));
                }
            }
            for (id, pts) in samples.iter().enumerate() {
                if touches_road[id] && !pts.is_empty() {
                    let mut plane = fit_plane(pts)?;
                    plane.superpixel_id = id as u32;
                    planes[id] = plane;
                }
            }
        }
        GroundOutcome::SkippedInsufficientPoints { road_pixels } => {
            log::warn!(
                "frame {}: road smoothing skipped, only {road_pixels} road points",
                frame.frame_id
            );
        }
        GroundOutcome::SkippedNoConsensus => {
            log::warn!("frame {}: road smoothing found no consensus", frame.frame_id);
        }
    }
    let refine_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t0 = Instant::now();
    let mut region_polys = Vec::new();
    for id in 0..partition.k_actual() as u32 {
        let label = assign_label(&partition, id, &labels)?;
        if label == config.sky_class {
            continue;
        }
        if !planes[id as usize].valid {
            log::debug!(
                "frame {}: superpixel {id} has no valid depth, skipped",
                frame.frame_id
            );
            continue;
        }
        match trace_boundary(&partition, id)
            .and_then(|c| contour_to_polygon(&c, config.epsilon, id))
        {
            Ok(poly) => region_polys.push((poly, label)),
            Err(e) => {
                log::warn!("frame {}: superpixel {id} not polygonized: {e}", frame.frame_id);
            }
        }
    }
    let polygonize_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t0 = Instant::now();
    let colors = mean_rgb(&partition, &rgb)?;
    let mut valid_pixels = vec![0usize; partition.k_actual()];
    for (i, &id) in partition.assignment().as_slice().iter().enumerate() {
        if rmask.as_slice()[i] {
            valid_pixels[id as usize] += 1;
        }
    }
    let mut polygons = Vec::with_capacity(region_polys.len());
    let mut dense_points = 0usize;
    for (poly, label) in region_polys {
        let id = poly.superpixel_id;
        match lift_polygon(
            &poly,
            &planes[id as usize],
            &config.intrinsics,
            &frame.pose,
            label,
            colors[id as usize],
            frame.frame_id,
        ) {
            Ok(lifted) => {
                dense_points += valid_pixels[id as usize];
                polygons.push(lifted);
            }
            Err(e) => {
                log::warn!("frame {}: superpixel {id} not lifted: {e}", frame.frame_id);
            }
        }
    }
    let lift_ms = t0.elapsed().as_secs_f64() * 1e3;

    Ok(FrameOutput {
        frame_id: frame.frame_id,
        polygons,
        dense_points,
        timing: FrameTiming {
            frame_id: frame.frame_id,
            snic_ms,
            refine_ms,
            polygonize_ms,
            lift_ms,
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    })
}

/// Processes all frames, accumulates the map and writes `map.ply`,
/// `stats.txt` and `timings.txt` into `out_dir`.
///
/// Per-frame failures are reported in the result and do not abort the run;
/// configuration problems do.
pub fn run_pipeline(
    config: &PipelineConfig,
    frames: &[FrameBundle],
    out_dir: &Path,
) -> Result<PipelineReport> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::Config("no frames to process".into()));
    }
    let mut ids = HashSet::new();
    for f in frames {
        if !ids.insert(f.frame_id) {
            return Err(Error::Config(format!("duplicate frame id {}", f.frame_id)));
        }
    }
    let palette = match &config.palette_path {
        Some(p) => Palette::load(p)?,
        None => Palette::default(),
    };
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;

    let mut results: Vec<(u64, Result<FrameOutput>)> = frames
        .par_iter()
        .map(|frame| (frame.frame_id, process_frame(config, frame)))
        .collect();
    results.sort_by_key(|(id, _)| *id);

    let mut map = SemanticMap::new();
    let mut stats = MemoryStats::default();
    let mut timings = Vec::new();
    let mut skipped = Vec::new();
    for (frame_id, result) in results {
        match result {
            Ok(output) => {
                map.accumulate(
                    frame_id,
                    output.polygons,
                    config.sky_class,
                    output.dense_points,
                    &mut stats,
                )?;
                timings.push(output.timing);
            }
            Err(e) => {
                log::warn!("frame {frame_id} skipped: {e}");
                skipped.push((frame_id, e.to_string()));
            }
        }
    }
    if map.is_empty() {
        return Err(Error::NoData);
    }

    let map_path = out_dir.join("map.ply");
    export_ply_to_path(&map, &palette, config.color_mode, config.ply_format, &map_path)?;

    let stats_path = out_dir.join("stats.txt");
    let mut stats_out = format!(
        "{stats}\npolygons={}\nframes={}\n",
        map.polygons().len(),
        map.frame_count()
    );
    for (id, err) in &skipped {
        stats_out.push_str(&format!("skipped_frame={id} error={err}\n"));
    }
    std::fs::write(&stats_path, stats_out)
        .map_err(|e| Error::io(format!("writing {}", stats_path.display()), e))?;

    let timings_path = out_dir.join("timings.txt");
    let mut timing_file = std::fs::File::create(&timings_path)
        .map_err(|e| Error::io(format!("creating {}", timings_path.display()), e))?;
    writeln!(timing_file, "frame snic_ms refine_ms polygonize_ms lift_ms total_ms")
        .map_err(|e| Error::io("writing timings", e))?;
    for t in &timings {
        writeln!(
            timing_file,
            "{} {:.3} {:.3} {:.3} {:.3} {:.3}",
            t.frame_id, t.snic_ms, t.refine_ms, t.polygonize_ms, t.lift_ms, t.total_ms
        )
        .map_err(|e| Error::io("writing timings", e))?;
    }

    Ok(PipelineReport {
        stats,
        timings,
        skipped,
        polygon_count: map.polygons().len(),
        map_path,
    })
}
