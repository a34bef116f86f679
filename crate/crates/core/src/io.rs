//! File formats: 16-bit depth and assignment rasters, 8-bit label rasters,
//! pose lists and the line-oriented text outputs.
//!
//! Depth rasters follow the 16-bit convention `depth = raw / depth_scale`
//! with raw value 0 meaning "no measurement"; every loader hands back the
//! validity mask alongside the values.

use std::io::Write;
use std::path::Path;

use image::DynamicImage;

use crate::camera::{nearest_rotation, CameraPose, Mat3, Point3};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::polygon::Polygon2D;
use crate::refine::PlaneParams;
use crate::scalar::Real;
use crate::snic::SuperpixelPartition;
use crate::{AssignmentGrid, LabelGrid, MaskGrid, RgbGrid};

/// Number of semantic classes in the label convention (ids `0..19`, 255 =
/// ignore).
pub const NUM_CLASSES: usize = 19;
/// Ignore id in label rasters.
pub const IGNORE_LABEL: u8 = 255;

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::format(path, format!("cannot decode image: {e}")))
}

/// Loads an RGB image (any decodable color layout is converted to RGB8).
pub fn load_rgb(path: &Path) -> Result<RgbGrid> {
    let img = open_image(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]).collect();
    ImageGrid::from_vec(w, h, data)
}

pub fn save_rgb(rgb: &RgbGrid, path: &Path) -> Result<()> {
    let mut data = Vec::with_capacity(rgb.len() * 3);
    for &[r, g, b] in rgb.as_slice() {
        data.extend_from_slice(&[r, g, b]);
    }
    let buf = image::ImageBuffer::<image::Rgb<u8>, Vec<u8>>::from_raw(
        rgb.width() as u32,
        rgb.height() as u32,
        data,
    )
    .expect("grid invariant guarantees buffer size");
    buf.save(path)
        .map_err(|e| Error::format(path, format!("cannot write RGB raster: {e}")))
}

/// Loads a 16-bit single-channel depth raster; `depth = raw / depth_scale`,
/// raw 0 = invalid.
pub fn load_depth<S: Real>(path: &Path, depth_scale: S) -> Result<(ImageGrid<S>, MaskGrid)> {
    if depth_scale <= S::zero() || depth_scale.is_nan() {
        return Err(Error::InvalidInput(format!(
            "depth_scale must be positive, got {depth_scale}"
        )));
    }
    let img = open_image(path)?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::format(
            path,
            format!(
                "expected 16-bit single-channel depth raster, got {:?}",
                img.color()
            ),
        ));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let mut depth = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for p in buf.pixels() {
        let raw = p.0[0];
        mask.push(raw != 0);
        depth.push(if raw == 0 {
            S::zero()
        } else {
            S::of(f64::from(raw)) / depth_scale
        });
    }
    Ok((
        ImageGrid::from_vec(w, h, depth)?,
        ImageGrid::from_vec(w, h, mask)?,
    ))
}

/// Saves a depth grid as 16-bit PNG: `raw = round(depth · depth_scale)`,
/// masked-out pixels become raw 0.
pub fn save_depth<S: Real>(
    depth: &ImageGrid<S>,
    mask: &MaskGrid,
    depth_scale: S,
    path: &Path,
) -> Result<()> {
    if !depth.same_dims(mask) {
        return Err(Error::InvalidInput(
            "save_depth: depth and mask dimensions differ".into(),
        ));
    }
    let mut buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(
        depth.width() as u32,
        depth.height() as u32,
    );
    for ((x, y), &d) in depth.iter() {
        let raw = if *mask.get(x, y) {
            let scaled = (d * depth_scale).as_f64().round();
            scaled.clamp(0.0, f64::from(u16::MAX)) as u16
        } else {
            0
        };
        buf.put_pixel(x as u32, y as u32, image::Luma([raw]));
    }
    buf.save(path)
        .map_err(|e| Error::format(path, format!("cannot write depth raster: {e}")))
}

/// Loads an 8-bit label raster; values must be `< NUM_CLASSES` or the
/// ignore id 255.
pub fn load_labels(path: &Path) -> Result<LabelGrid> {
    let img = open_image(path)?;
    let DynamicImage::ImageLuma8(buf) = img else {
        return Err(Error::format(
            path,
            format!(
                "expected 8-bit single-channel label raster, got {:?}",
                img.color()
            ),
        ));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    for (i, p) in buf.pixels().enumerate() {
        let v = p.0[0];
        if v != IGNORE_LABEL && usize::from(v) >= NUM_CLASSES {
            return Err(Error::format(
                path,
                format!(
                    "label value {v} at pixel ({}, {}) outside 0..{NUM_CLASSES} (or 255)",
                    i % w,
                    i / w
                ),
            ));
        }
    }
    ImageGrid::from_vec(w, h, buf.into_raw())
}

pub fn save_labels(labels: &LabelGrid, path: &Path) -> Result<()> {
    let buf = image::ImageBuffer::<image::Luma<u8>, Vec<u8>>::from_raw(
        labels.width() as u32,
        labels.height() as u32,
        labels.as_slice().to_vec(),
    )
    .expect("grid invariant guarantees buffer size");
    buf.save(path)
        .map_err(|e| Error::format(path, format!("cannot write label raster: {e}")))
}

/// Loads a superpixel assignment raster (16-bit ids).
pub fn load_assignment(path: &Path) -> Result<AssignmentGrid> {
    let img = open_image(path)?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::format(
            path,
            format!(
                "expected 16-bit single-channel assignment raster, got {:?}",
                img.color()
            ),
        ));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let data = buf.pixels().map(|p| u32::from(p.0[0])).collect();
    ImageGrid::from_vec(w, h, data)
}

/// Saves an assignment raster; fails if any id exceeds the 16-bit range.
pub fn save_assignment(assignment: &AssignmentGrid, path: &Path) -> Result<()> {
    let mut buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(
        assignment.width() as u32,
        assignment.height() as u32,
    );
    for ((x, y), &id) in assignment.iter() {
        if id > u32::from(u16::MAX) {
            return Err(Error::InvalidInput(format!(
                "superpixel id {id} does not fit the 16-bit assignment raster"
            )));
        }
        buf.put_pixel(x as u32, y as u32, image::Luma([id as u16]));
    }
    buf.save(path)
        .map_err(|e| Error::format(path, format!("cannot write assignment raster: {e}")))
}

/// Loads camera-to-world poses, one per line: 12 whitespace-separated reals
/// forming the row-major 3x4 `[R | t]` matrix (odometry convention).
///
/// Rotations must be orthonormal within 1e-3 (file precision) and are then
/// projected onto the nearest exact rotation.
pub fn load_poses<S: Real>(path: &Path) -> Result<Vec<CameraPose<S>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading poses {}", path.display()), e))?;
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::format(path, format!("line {}: bad number '{tok}'", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != 12 {
            return Err(Error::format(
                path,
                format!("line {}: expected 12 values, got {}", lineno + 1, vals.len()),
            ));
        }
        let m = Mat3::new([
            [S::of(vals[0]), S::of(vals[1]), S::of(vals[2])],
            [S::of(vals[4]), S::of(vals[5]), S::of(vals[6])],
            [S::of(vals[8]), S::of(vals[9]), S::of(vals[10])],
        ]);
        let t = Point3::new(S::of(vals[3]), S::of(vals[7]), S::of(vals[11]));
        let ortho = m.orthonormality_error();
        if ortho > S::of(1e-3) {
            return Err(Error::format(
                path,
                format!(
                    "line {}: rotation deviates from orthonormal by {}",
                    lineno + 1,
                    ortho.as_f64()
                ),
            ));
        }
        let r = nearest_rotation(&m).ok_or_else(|| {
            Error::format(
                path,
                format!("line {}: rotation block is not a proper rotation", lineno + 1),
            )
        })?;
        poses.push(CameraPose::new(r, t)?);
    }
    if poses.is_empty() {
        return Err(Error::format(path, "no poses found"));
    }
    Ok(poses)
}

/// Writes the per-superpixel plane table: `id valid a b c` per line.
pub fn write_planes<S: Real, W: Write>(planes: &[PlaneParams<S>], w: &mut W) -> Result<()> {
    for p in planes {
        writeln!(
            w,
            "{} {} {} {} {}",
            p.superpixel_id,
            u8::from(p.valid),
            p.a.as_f64(),
            p.b.as_f64(),
            p.c.as_f64()
        )
        .map_err(|e| Error::io("writing plane table", e))?;
    }
    Ok(())
}

/// Writes the centroid summary: `id count u v L a b seed_label` per line.
pub fn write_centroids<S: Real, W: Write>(
    partition: &SuperpixelPartition<S>,
    w: &mut W,
) -> Result<()> {
    for (id, c) in partition.centroids().iter().enumerate() {
        let [u, v] = c.spatial();
        let [l, a, b] = c.color();
        writeln!(
            w,
            "{} {} {:.4} {:.4} {:.4} {:.4} {:.4} {}",
            id,
            c.pixel_count(),
            u.as_f64(),
            v.as_f64(),
            l.as_f64(),
            a.as_f64(),
            b.as_f64(),
            c.seed_label()
        )
        .map_err(|e| Error::io("writing centroid summary", e))?;
    }
    Ok(())
}

/// Writes polygons as text: `id label v0u v0v v1u v1v …` per line.
pub fn write_polygons<S: Real, W: Write>(
    polygons: &[(Polygon2D<S>, u8)],
    w: &mut W,
) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("writing polygon file", e);
    for (poly, label) in polygons {
        write!(w, "{} {}", poly.superpixel_id, label).map_err(io_err)?;
        for &[u, v] in &poly.vertices {
            write!(w, " {} {}", u.as_f64(), v.as_f64()).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    Ok(())
}
