//! `polymap` — polygonal 3D semantic mapping from monocular frames.
//!
//! Exit codes: 0 on full success, 2 when some frames were skipped, 1 on
//! configuration or processing errors. Log verbosity is controlled by the
//! `RUST_LOG` environment variable.

use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polymap::color::rgb_grid_to_lab;
use polymap::error::Error;
use polymap::eval::{
    depth_metrics, scale_invariant_loss, segmentation_iou, DEFAULT_CATEGORY_MAP,
};
use polymap::grid::ImageGrid;
use polymap::io::{
    load_assignment, load_depth, load_labels, load_poses, load_rgb, save_assignment,
    save_depth, write_centroids, write_planes, write_polygons, IGNORE_LABEL, NUM_CLASSES,
};
use polymap::map::assign_label;
use polymap::pipeline::{read_frame_index, run_pipeline, ConfigBuilder, PipelineConfig};
use polymap::polygon::{boundary_pixel_count, contour_to_polygon, trace_boundary};
use polymap::refine::{apply_planes, ransac_ground, GroundOutcome};
use polymap::snic::{run_snic_with_stats, SnicParams, SuperpixelPartition};

#[derive(Parser)]
#[command(name = "polymap", version, about = "Polygonal 3D semantic mapping pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// key=value config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key (repeatable); flags win over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn build(&self) -> polymap::Result<PipelineConfig> {
        let mut builder = ConfigBuilder::from_file(&self.config)?;
        for item in &self.overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("--set expects KEY=VALUE, got '{item}'"))
            })?;
            builder.set(key.trim(), value.trim())?;
        }
        builder.build()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full multi-frame pipeline and export the map.
    Pipeline {
        #[command(flatten)]
        config: ConfigArgs,
        /// Frame index file: `frame_id rgb depth labels` per line.
        #[arg(long)]
        frames: PathBuf,
        /// Output directory for map.ply, stats.txt and timings.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster one frame into superpixels.
    Superpixel {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Target superpixel count.
        #[arg(long)]
        k: usize,
        /// Spatial normalizer (default: grid cell area).
        #[arg(long)]
        spatial_norm: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        color_norm: f64,
        /// Semantic penalty added when labels differ.
        #[arg(long, default_value_t = 10.0)]
        lambda: f64,
        /// 16-bit assignment raster output.
        #[arg(long)]
        out_assignment: PathBuf,
        /// Centroid summary text output.
        #[arg(long)]
        out_centroids: PathBuf,
    },
    /// Refine a depth raster with per-superpixel planes and road RANSAC.
    Refine {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out_depth: PathBuf,
        /// Plane table output: `id valid a b c` per line.
        #[arg(long)]
        out_planes: PathBuf,
    },
    /// Trace superpixels into polygons and store their vertices.
    Polygonize {
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Simplification tolerance in pixels (0 = lossless).
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Polygon text output: `id label v0u v0v …` per line.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted depth and/or label rasters against ground truth.
    Evaluate {
        #[arg(long, requires = "gt_depth")]
        pred_depth: Option<PathBuf>,
        #[arg(long)]
        gt_depth: Option<PathBuf>,
        #[arg(long, default_value_t = 256.0)]
        depth_scale: f64,
        #[arg(long, requires = "gt_labels")]
        pred_labels: Option<PathBuf>,
        #[arg(long)]
        gt_labels: Option<PathBuf>,
        /// Optional JSON report file.
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> polymap::Result<ExitCode> {
    match cli.command {
        Command::Pipeline { config, frames, out } => cmd_pipeline(&config, &frames, &out),
        Command::Superpixel {
            image,
            labels,
            k,
            spatial_norm,
            color_norm,
            lambda,
            out_assignment,
            out_centroids,
        } => cmd_superpixel(
            &image,
            &labels,
            k,
            spatial_norm,
            color_norm,
            lambda,
            &out_assignment,
            &out_centroids,
        ),
        Command::Refine {
            config,
            depth,
            assignment,
            labels,
            out_depth,
            out_planes,
        } => cmd_refine(&config, &depth, &assignment, &labels, &out_depth, &out_planes),
        Command::Polygonize {
            assignment,
            labels,
            epsilon,
            out,
        } => cmd_polygonize(&assignment, &labels, epsilon, &out),
        Command::Evaluate {
            pred_depth,
            gt_depth,
            depth_scale,
            pred_labels,
            gt_labels,
            out_json,
        } => cmd_evaluate(
            pred_depth.as_deref(),
            gt_depth.as_deref(),
            depth_scale,
            pred_labels.as_deref(),
            gt_labels.as_deref(),
            out_json.as_deref(),
        ),
    }
}

fn cmd_pipeline(
    config_args: &ConfigArgs,
    frames_path: &std::path::Path,
    out_dir: &std::path::Path,
) -> polymap::Result<ExitCode> {
    let config = config_args.build()?;
    let poses_path = config
        .poses_path
        .clone()
        .ok_or_else(|| Error::Config("the pipeline needs a 'poses' config key".into()))?;
    let poses = load_poses::<f64>(&poses_path)?;
    let frames = read_frame_index(frames_path, &poses)?;
    let report = run_pipeline(&config, &frames, out_dir)?;

    println!("map={}", report.map_path.display());
    println!("polygons={}", report.polygon_count);
    println!("{}", report.stats);
    let total_ms: f64 = report.timings.iter().map(|t| t.total_ms).sum();
    println!(
        "frames_done={} frames_skipped={} total_ms={:.1}",
        report.timings.len(),
        report.skipped.len(),
        total_ms
    );
    if report.skipped.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for (id, err) in &report.skipped {
            eprintln!("skipped frame {id}: {err}");
        }
        Ok(ExitCode::from(2))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_superpixel(
    image: &std::path::Path,
    labels_path: &std::path::Path,
    k: usize,
    spatial_norm: Option<f64>,
    color_norm: f64,
    lambda: f64,
    out_assignment: &std::path::Path,
    out_centroids: &std::path::Path,
) -> polymap::Result<ExitCode> {
    let rgb = load_rgb(image)?;
    let labels = load_labels(labels_path)?;
    let lab = rgb_grid_to_lab::<f64>(&rgb);
    let params = SnicParams {
        k_superpixels: k,
        spatial_norm: spatial_norm.unwrap_or((rgb.width() * rgb.height()) as f64 / k as f64),
        color_norm,
        semantic_penalty: lambda,
    };
    let (partition, stats) = run_snic_with_stats(&lab, &labels, &params)?;
    save_assignment(partition.assignment(), out_assignment)?;
    let file = std::fs::File::create(out_centroids)
        .map_err(|e| Error::io(format!("creating {}", out_centroids.display()), e))?;
    let mut w = BufWriter::new(file);
    write_centroids(&partition, &mut w)?;
    w.flush().map_err(|e| Error::io("flushing centroid summary", e))?;
    println!(
        "superpixels={} assignments={} queue_pushes={}",
        partition.k_actual(),
        stats.assignments,
        stats.pushes
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_refine(
    config_args: &ConfigArgs,
    depth_path: &std::path::Path,
    assignment_path: &std::path::Path,
    labels_path: &std::path::Path,
    out_depth: &std::path::Path,
    out_planes: &std::path::Path,
) -> polymap::Result<ExitCode> {
    let config = config_args.build()?;
    let (depth, mask) = load_depth::<f64>(depth_path, config.depth_scale)?;
    let assignment = load_assignment(assignment_path)?;
    let labels = load_labels(labels_path)?;
    let partition = SuperpixelPartition::<f64>::from_assignment(assignment)?;
    let (refined, rmask, planes) = apply_planes(&partition, &depth, &mask)?;
    let (outcome, refined, rmask) = ransac_ground(
        &refined,
        &rmask,
        &labels,
        config.road_class,
        &config.intrinsics,
        &config.ransac,
    )?;
    match outcome {
        GroundOutcome::Smoothed { inliers, .. } => {
            println!("road=smoothed inliers={inliers}");
        }
        GroundOutcome::SkippedInsufficientPoints { road_pixels } => {
            println!("road=skipped reason=insufficient_points road_pixels={road_pixels}");
        }
        GroundOutcome::SkippedNoConsensus => println!("road=skipped reason=no_consensus"),
    }
    save_depth(&refined, &rmask, config.depth_scale, out_depth)?;
    let file = std::fs::File::create(out_planes)
        .map_err(|e| Error::io(format!("creating {}", out_planes.display()), e))?;
    let mut w = BufWriter::new(file);
    write_planes(&planes, &mut w)?;
    w.flush().map_err(|e| Error::io("flushing plane table", e))?;
    println!("superpixels={}", planes.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_polygonize(
    assignment_path: &std::path::Path,
    labels_path: &std::path::Path,
    epsilon: f64,
    out: &std::path::Path,
) -> polymap::Result<ExitCode> {
    let assignment = load_assignment(assignment_path)?;
    let labels = load_labels(labels_path)?;
    let partition = SuperpixelPartition::<f64>::from_assignment(assignment)?;
    let mut polygons = Vec::new();
    for id in 0..partition.k_actual() as u32 {
        let label = assign_label(&partition, id, &labels)?;
        match trace_boundary(&partition, id).and_then(|c| contour_to_polygon(&c, epsilon, id)) {
            Ok(poly) => polygons.push((poly, label)),
            Err(e) => log::warn!("superpixel {id} not polygonized: {e}"),
        }
    }
    let file = std::fs::File::create(out)
        .map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    let mut w = BufWriter::new(file);
    write_polygons(&polygons, &mut w)?;
    w.flush().map_err(|e| Error::io("flushing polygon file", e))?;

    let vertices: usize = polygons.iter().map(|(p, _)| p.vertices.len()).sum();
    let boundary = boundary_pixel_count(&partition);
    println!(
        "polygons={} vertices={} boundary_pixels={} vertex_ratio={:.4}",
        polygons.len(),
        vertices,
        boundary,
        vertices as f64 / boundary.max(1) as f64
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(
    pred_depth: Option<&std::path::Path>,
    gt_depth: Option<&std::path::Path>,
    depth_scale: f64,
    pred_labels: Option<&std::path::Path>,
    gt_labels: Option<&std::path::Path>,
    out_json: Option<&std::path::Path>,
) -> polymap::Result<ExitCode> {
    let mut report: Vec<(String, f64)> = Vec::new();

    if let (Some(pred), Some(gt)) = (pred_depth, gt_depth) {
        let (pred, pred_mask) = load_depth::<f64>(pred, depth_scale)?;
        let (gt, gt_mask) = load_depth::<f64>(gt, depth_scale)?;
        if !pred.same_dims(&gt) {
            return Err(Error::InvalidInput(
                "predicted and ground-truth depth differ in size".into(),
            ));
        }
        // Score where both rasters carry a measurement.
        let mut mask = ImageGrid::filled(gt.width(), gt.height(), false)?;
        for ((x, y), &m) in gt_mask.iter() {
            mask.set(x, y, m && *pred_mask.get(x, y));
        }
        let m = depth_metrics(&pred, &gt, &mask)?;
        let si = scale_invariant_loss(&pred, &gt, &mask)?;
        report.push(("mean_error".into(), m.mean_error));
        report.push(("rms_error".into(), m.rms_error));
        report.push(("abs_rel".into(), m.abs_rel));
        report.push(("sq_rel".into(), m.sq_rel));
        report.push(("delta1".into(), m.delta1));
        report.push(("delta2".into(), m.delta2));
        report.push(("delta3".into(), m.delta3));
        report.push(("si_loss".into(), si.value()));
    }

    if let (Some(pred), Some(gt)) = (pred_labels, gt_labels) {
        let pred = load_labels(pred)?;
        let gt = load_labels(gt)?;
        let m = segmentation_iou::<f64>(&pred, &gt, NUM_CLASSES, &DEFAULT_CATEGORY_MAP, IGNORE_LABEL)?;
        report.push(("iou_class".into(), m.mean_iou_class));
        report.push(("iou_category".into(), m.mean_iou_category));
        for (class, iou) in m.per_class_iou.iter().enumerate() {
            if let Some(iou) = iou {
                report.push((format!("class_{class}_iou"), *iou));
            }
        }
    }

    if report.is_empty() {
        return Err(Error::Config(
            "evaluate needs --pred-depth/--gt-depth and/or --pred-labels/--gt-labels".into(),
        ));
    }
    for (key, value) in &report {
        println!("{key}={value:.6}");
    }
    if let Some(path) = out_json {
        let mut body = String::from("{\n");
        for (i, (key, value)) in report.iter().enumerate() {
            let sep = if i + 1 == report.len() { "" } else { "," };
            body.push_str(&format!("  \"{key}\": {value:.9}{sep}\n"));
        }
        body.push_str("}\n");
        std::fs::write(path, body)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    Ok(ExitCode::SUCCESS)
}
