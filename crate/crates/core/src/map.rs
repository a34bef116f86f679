//! World-frame polygon map: lifting, accumulation and PLY export.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::camera::{CameraIntrinsics, CameraPose, Point3};
use crate::error::{Error, Result};
use crate::polygon::Polygon2D;
use crate::refine::PlaneParams;
use crate::scalar::Real;
use crate::snic::SuperpixelPartition;
use crate::{LabelGrid, RgbGrid};

/// One stored polygon: world-frame vertices plus semantics and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPolygon3D<S> {
    /// Ordered world-frame vertices. All take their depth from one slanted
    /// depth plane; they are exactly coplanar for a fronto-parallel plane
    /// (zero u/v slopes) and approximately so otherwise, since a slanted
    /// depth plane back-projects to a gently curved surface.
    pub vertices: Vec<Point3<S>>,
    pub semantic_label: u8,
    /// Mean RGB of the source superpixel.
    pub rgb: [u8; 3],
    pub frame_id: u64,
    pub superpixel_id: u32,
}

/// Append-only collection of map polygons.
#[derive(Debug, Clone, Default)]
pub struct SemanticMap<S> {
    polygons: Vec<MapPolygon3D<S>>,
    frame_ids: HashSet<u64>,
}

/// Vertex-count bookkeeping backing the compression report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MemoryStats {
    /// Total polygon vertices stored in the map.
    pub stored_vertices: usize,
    /// Valid-depth pixels the stored polygons stand in for.
    pub equivalent_dense_points: usize,
}

impl MemoryStats {
    pub fn compression_ratio(&self) -> f64 {
        if self.equivalent_dense_points == 0 {
            0.0
        } else {
            self.stored_vertices as f64 / self.equivalent_dense_points as f64
        }
    }
}

impl fmt::Display for MemoryStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stored_vertices={} equivalent_dense_points={} compression_ratio={:.6}",
            self.stored_vertices,
            self.equivalent_dense_points,
            self.compression_ratio()
        )
    }
}

/// Vertex color source for export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    /// Class palette color of the polygon's semantic label.
    Semantic,
    /// Mean RGB of the source superpixel.
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Class palette: id, display color and name per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaletteEntry {
    pub id: u8,
    pub rgb: [u8; 3],
    pub name: String,
}

impl Default for Palette {
    /// The conventional 19-class urban palette (Cityscapes colors).
    fn default() -> Self {
        let table: [(u8, [u8; 3], &str); 19] = [
            (0, [128, 64, 128], "road"),
            (1, [244, 35, 232], "sidewalk"),
            (2, [70, 70, 70], "building"),
            (3, [102, 102, 156], "wall"),
            (4, [190, 153, 153], "fence"),
            (5, [153, 153, 153], "pole"),
            (6, [250, 170, 30], "traffic_light"),
            (7, [220, 220, 0], "traffic_sign"),
            (8, [107, 142, 35], "vegetation"),
            (9, [152, 251, 152], "terrain"),
            (10, [70, 130, 180], "sky"),
            (11, [220, 20, 60], "person"),
            (12, [255, 0, 0], "rider"),
            (13, [0, 0, 142], "car"),
            (14, [0, 0, 70], "truck"),
            (15, [0, 60, 100], "bus"),
            (16, [0, 80, 100], "train"),
            (17, [0, 0, 230], "motorcycle"),
            (18, [119, 11, 32], "bicycle"),
        ];
        Palette {
            entries: table
                .iter()
                .map(|&(id, rgb, name)| PaletteEntry {
                    id,
                    rgb,
                    name: name.to_string(),
                })
                .collect(),
        }
    }
}

impl Palette {
    /// Parses `class_id r g b name` lines; `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::format(
                    origin,
                    format!("line {}: expected 5 fields, got {}", lineno + 1, fields.len()),
                ));
            }
            let parse_u8 = |s: &str, what: &str| -> Result<u8> {
                s.parse().map_err(|_| {
                    Error::format(origin, format!("line {}: bad {what} '{s}'", lineno + 1))
                })
            };
            entries.push(PaletteEntry {
                id: parse_u8(fields[0], "class id")?,
                rgb: [
                    parse_u8(fields[1], "red")?,
                    parse_u8(fields[2], "green")?,
                    parse_u8(fields[3], "blue")?,
                ],
                name: fields[4].to_string(),
            });
        }
        if entries.is_empty() {
            return Err(Error::format(origin, "palette file has no entries"));
        }
        Ok(Palette { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading palette {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    pub fn color_of(&self, label: u8) -> [u8; 3] {
        self.entries
            .iter()
            .find(|e| e.id == label)
            .map(|e| e.rgb)
            .unwrap_or([0, 0, 0])
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }
}

/// Lifts a 2D polygon into the world frame.
///
/// Each vertex takes its depth from the superpixel plane, is back-projected
/// through the intrinsics and transformed by the camera-to-world pose;
/// vertex order is preserved. A non-positive plane depth at any vertex makes
/// the whole polygon degenerate.
pub fn lift_polygon<S: Real>(
    poly: &Polygon2D<S>,
    plane: &PlaneParams<S>,
    k: &CameraIntrinsics<S>,
    pose: &CameraPose<S>,
    semantic_label: u8,
    rgb: [u8; 3],
    frame_id: u64,
) -> Result<MapPolygon3D<S>> {
    if !plane.valid {
        return Err(Error::DegenerateGeometry(format!(
            "superpixel {} has no valid depth plane",
            poly.superpixel_id
        )));
    }
    let mut vertices = Vec::with_capacity(poly.vertices.len());
    for &[u, v] in &poly.vertices {
        let depth = plane.depth_at(u, v);
        if depth <= S::zero() || !depth.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "superpixel {}: plane depth {depth} at vertex ({u}, {v})",
                poly.superpixel_id
            )));
        }
        let cam = k.back_project(u, v, depth)?;
        vertices.push(pose.transform_to_world(&cam));
    }
    Ok(MapPolygon3D {
        vertices,
        semantic_label,
        rgb,
        frame_id,
        superpixel_id: poly.superpixel_id,
    })
}

/// Majority semantic label of a superpixel; ties break to the smaller id.
pub fn assign_label<S: Real>(
    partition: &SuperpixelPartition<S>,
    id: u32,
    labels: &LabelGrid,
) -> Result<u8> {
    if !partition.assignment().same_dims(labels) {
        return Err(Error::InvalidInput(
            "assign_label: partition and label dimensions differ".into(),
        ));
    }
    let mut counts = [0usize; 256];
    let mut seen = false;
    for (i, &a) in partition.assignment().as_slice().iter().enumerate() {
        if a == id {
            counts[labels.as_slice()[i] as usize] += 1;
            seen = true;
        }
    }
    if !seen {
        return Err(Error::SuperpixelNotFound(id));
    }
    let mut best = 0usize;
    for (label, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = label;
        }
    }
    Ok(best as u8)
}

/// Mean RGB per superpixel id (rounded to nearest).
pub fn mean_rgb<S: Real>(partition: &SuperpixelPartition<S>, rgb: &RgbGrid) -> Result<Vec<[u8; 3]>> {
    if !partition.assignment().same_dims(rgb) {
        return Err(Error::InvalidInput(
            "mean_rgb: partition and image dimensions differ".into(),
        ));
    }
    let k = partition.k_actual();
    let mut sums = vec![[0u64; 3]; k];
    let mut counts = vec![0u64; k];
    for (i, &a) in partition.assignment().as_slice().iter().enumerate() {
        let px = rgb.as_slice()[i];
        let s = &mut sums[a as usize];
        for c in 0..3 {
            s[c] += u64::from(px[c]);
        }
        counts[a as usize] += 1;
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| {
            if n == 0 {
                [0, 0, 0]
            } else {
                [0, 1, 2].map(|c| (s[c] as f64 / n as f64).round() as u8)
            }
        })
        .collect())
}

impl<S: Real> SemanticMap<S> {
    pub fn new() -> Self {
        Self {
            polygons: Vec::new(),
            frame_ids: HashSet::new(),
        }
    }

    pub fn polygons(&self) -> &[MapPolygon3D<S>] {
        &self.polygons
    }

    pub fn frame_count(&self) -> usize {
        self.frame_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    /// Appends one frame's polygons.
    ///
    /// Sky-labeled polygons are dropped (their depth is meaningless), the
    /// stats pick up the surviving vertex count, and `dense_points` reports
    /// how many valid-depth pixels this frame's polygons represent.
    pub fn accumulate(
        &mut self,
        frame_id: u64,
        frame_polygons: Vec<MapPolygon3D<S>>,
        sky_class: u8,
        dense_points: usize,
        stats: &mut MemoryStats,
    ) -> Result<()> {
        if !self.frame_ids.insert(frame_id) {
            return Err(Error::DuplicateFrame(frame_id));
        }
        stats.equivalent_dense_points += dense_points;
        for poly in frame_polygons {
            if poly.semantic_label == sky_class {
                continue;
            }
            if poly.frame_id != frame_id {
                return Err(Error::InvalidInput(format!(
                    "polygon tagged frame {} accumulated into frame {}",
                    poly.frame_id, frame_id
                )));
            }
            stats.stored_vertices += poly.vertices.len();
            self.polygons.push(poly);
        }
        Ok(())
    }
}

/// Writes the map as PLY 1.0 with per-vertex colors.
///
/// Polygons are emitted in (frame_id, superpixel_id) order and
/// fan-triangulated; non-convex polygons fall back to ear clipping. The
/// byte stream is a deterministic function of the map, mode and format.
pub fn export_ply<S: Real>(
    map: &SemanticMap<S>,
    palette: &Palette,
    mode: ColorMode,
    format: PlyFormat,
    w: &mut dyn Write,
) -> Result<()> {
    if map.is_empty() {
        return Err(Error::NoData);
    }
    let mut order: Vec<usize> = (0..map.polygons.len()).collect();
    order.sort_by_key(|&i| (map.polygons[i].frame_id, map.polygons[i].superpixel_id));

    let vertex_count: usize = map.polygons.iter().map(|p| p.vertices.len()).sum();
    let face_count: usize = map
        .polygons
        .iter()
        .map(|p| p.vertices.len().saturating_sub(2))
        .sum();

    let io_err = |e: std::io::Error| Error::io("writing PLY stream", e);
    let format_line = match format {
        PlyFormat::Ascii => "format ascii 1.0",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0",
    };
    write!(
        w,
        "ply\n{format_line}\nelement vertex {vertex_count}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         element face {face_count}\n\
         property list uchar int vertex_indices\nend_header\n"
    )
    .map_err(io_err)?;

    let mut base = 0usize;
    let mut faces: Vec<[usize; 3]> = Vec::with_capacity(face_count);
    for &i in &order {
        let poly = &map.polygons[i];
        let color = match mode {
            ColorMode::Semantic => palette.color_of(poly.semantic_label),
            ColorMode::Rgb => poly.rgb,
        };
        for v in &poly.vertices {
            match format {
                PlyFormat::Ascii => {
                    writeln!(
                        w,
                        "{} {} {} {} {} {}",
                        v.x.as_f64() as f32,
                        v.y.as_f64() as f32,
                        v.z.as_f64() as f32,
                        color[0],
                        color[1],
                        color[2]
                    )
                    .map_err(io_err)?;
                }
                PlyFormat::BinaryLittleEndian => {
                    for coord in [v.x, v.y, v.z] {
                        w.write_all(&(coord.as_f64() as f32).to_le_bytes())
                            .map_err(io_err)?;
                    }
                    w.write_all(&color).map_err(io_err)?;
                }
            }
        }
        for tri in triangulate(&poly.vertices) {
            faces.push([tri[0] + base, tri[1] + base, tri[2] + base]);
        }
        base += poly.vertices.len();
    }

    for face in faces {
        match format {
            PlyFormat::Ascii => {
                writeln!(w, "3 {} {} {}", face[0], face[1], face[2]).map_err(io_err)?;
            }
            PlyFormat::BinaryLittleEndian => {
                w.write_all(&[3u8]).map_err(io_err)?;
                for idx in face {
                    w.write_all(&(idx as i32).to_le_bytes()).map_err(io_err)?;
                }
            }
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Convenience wrapper writing to a file path.
pub fn export_ply_to_path<S: Real>(
    map: &SemanticMap<S>,
    palette: &Palette,
    mode: ColorMode,
    format: PlyFormat,
    path: &Path,
) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut writer = BufWriter::new(file);
    export_ply(map, palette, mode, format, &mut writer)
}

/// Triangulates a planar simple polygon into local-index triangles.
///
/// Convex polygons fan from vertex 0; non-convex ones are ear-clipped in
/// their dominant projection plane. Always yields `n - 2` triangles.
fn triangulate<S: Real>(vertices: &[Point3<S>]) -> Vec<[usize; 3]> {
    let n = vertices.len();
    if n < 3 {
        return Vec::new();
    }
    if n == 3 {
        return vec![[0, 1, 2]];
    }
    let normal = newell_normal(vertices);
    if is_convex(vertices, &normal) {
        return (1..n - 1).map(|i| [0, i, i + 1]).collect();
    }
    ear_clip(vertices, &normal)
}

/// Newell's method: robust polygon normal (unnormalized).
fn newell_normal<S: Real>(vertices: &[Point3<S>]) -> Point3<S> {
    let mut nx = S::zero();
    let mut ny = S::zero();
    let mut nz = S::zero();
    let n = vertices.len();
    for i in 0..n {
        let a = &vertices[i];
        let b = &vertices[(i + 1) % n];
        nx = nx + (a.y - b.y) * (a.z + b.z);
        ny = ny + (a.z - b.z) * (a.x + b.x);
        nz = nz + (a.x - b.x) * (a.y + b.y);
    }
    Point3::new(nx, ny, nz)
}

fn is_convex<S: Real>(vertices: &[Point3<S>], normal: &Point3<S>) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let a = &vertices[i];
        let b = &vertices[(i + 1) % n];
        let c = &vertices[(i + 2) % n];
        let cross = b.sub(a).cross(&c.sub(b));
        if cross.dot(normal) < S::zero() {
            return false;
        }
    }
    true
}

/// Ear clipping in the dominant 2D projection of the polygon plane.
fn ear_clip<S: Real>(vertices: &[Point3<S>], normal: &Point3<S>) -> Vec<[usize; 3]> {
    let n = vertices.len();
    // Project out the dominant normal axis, keeping orientation positive.
    let (ax, ay, flip) = {
        let (nx, ny, nz) = (normal.x.abs(), normal.y.abs(), normal.z.abs());
        if nz >= nx && nz >= ny {
            (0, 1, normal.z < S::zero())
        } else if ny >= nx {
            (2, 0, normal.y < S::zero())
        } else {
            (1, 2, normal.x < S::zero())
        }
    };
    let coords = |i: usize| -> [S; 2] {
        let v = &vertices[i];
        let c = [v.x, v.y, v.z];
        if flip {
            [c[ay], c[ax]]
        } else {
            [c[ax], c[ay]]
        }
    };
    let cross2 = |o: [S; 2], a: [S; 2], b: [S; 2]| -> S {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut triangles = Vec::with_capacity(n - 2);
    let mut guard = 0usize;
    while remaining.len() > 3 && guard < n * n {
        guard += 1;
        let m = remaining.len();
        let mut clipped = false;
        for i in 0..m {
            let (pi, ci, ni) = (
                remaining[(i + m - 1) % m],
                remaining[i],
                remaining[(i + 1) % m],
            );
            let (p, c, q) = (coords(pi), coords(ci), coords(ni));
            if cross2(p, c, q) <= S::zero() {
                continue; // reflex corner
            }
            // No other remaining vertex may sit inside the candidate ear.
            let mut blocked = false;
            for &oi in &remaining {
                if oi == pi || oi == ci || oi == ni {
                    continue;
                }
                let o = coords(oi);
                if cross2(p, c, o) >= S::zero()
                    && cross2(c, q, o) >= S::zero()
                    && cross2(q, p, o) >= S::zero()
                {
                    blocked = true;
                    break;
                }
            }
            if blocked {
                continue;
            }
            triangles.push([pi, ci, ni]);
            remaining.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            // Numerically stuck (nearly collinear corners): clip greedily.
            let (pi, ci, ni) = (remaining[0], remaining[1], remaining[2]);
            triangles.push([pi, ci, ni]);
            remaining.remove(1);
        }
    }
    triangles.push([remaining[0], remaining[1], remaining[2]]);
    triangles
}
