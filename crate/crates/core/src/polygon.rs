//! Superpixel regions as closed polygons.
//!
//! Boundary tracing walks the *cracks* between pixels instead of pixel
//! centers, so every 4-connected region — including single-pixel-wide necks
//! — has an exact outline. Contour points live on the pixel-corner lattice:
//! lattice point `(i, j)` sits at pixel coordinates `(i - 0.5, j - 0.5)`,
//! since pixel `(x, y)` is the unit cell with corners `(x ∓ 0.5, y ∓ 0.5)`.
//!
//! With simplification tolerance 0 the polygonization is lossless:
//! rasterizing the polygon reproduces the region's pixel set exactly.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::snic::SuperpixelPartition;

/// Closed outer contour of a region, one lattice point per boundary edge.
///
/// Points are ordered so that the shoelace signed area is positive and
/// equals the region's pixel count; the last point connects back to the
/// first. (`y` grows downward, so positive shoelace orientation looks
/// clockwise on screen.)
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryContour {
    pub points: Vec<(u32, u32)>,
}

impl BoundaryContour {
    /// Contour points converted to pixel coordinates (half-integers).
    pub fn pixel_points<S: Real>(&self) -> Vec<[S; 2]> {
        self.points
            .iter()
            .map(|&(i, j)| {
                [
                    S::of(f64::from(i)) - S::of(0.5),
                    S::of(f64::from(j)) - S::of(0.5),
                ]
            })
            .collect()
    }

    /// Signed shoelace area in lattice units (positive by construction).
    pub fn signed_area(&self) -> i64 {
        let pts = &self.points;
        let n = pts.len();
        let mut twice = 0i64;
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            twice += i64::from(x0) * i64::from(y1) - i64::from(x1) * i64::from(y0);
        }
        twice / 2
    }
}

/// Closed simple polygon in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D<S> {
    /// Ordered vertices; the last connects back to the first. Vertices lie
    /// on the pixel-corner lattice (half-integer coordinates) when produced
    /// from a contour.
    pub vertices: Vec<[S; 2]>,
    pub superpixel_id: u32,
}

// Crack-walk directions in lattice coordinates (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    East,
    South,
    West,
    North,
}

impl Dir {
    fn step(self, (x, y): (i64, i64)) -> (i64, i64) {
        match self {
            Dir::East => (x + 1, y),
            Dir::South => (x, y + 1),
            Dir::West => (x - 1, y),
            Dir::North => (x, y - 1),
        }
    }

    fn left(self) -> Self {
        match self {
            Dir::East => Dir::North,
            Dir::North => Dir::West,
            Dir::West => Dir::South,
            Dir::South => Dir::East,
        }
    }

    fn right(self) -> Self {
        match self {
            Dir::East => Dir::South,
            Dir::South => Dir::West,
            Dir::West => Dir::North,
            Dir::North => Dir::East,
        }
    }

    /// Cells adjacent to the edge leaving corner `c` in this direction:
    /// (left-of-travel, right-of-travel). Cell `(i, j)` is pixel `(i, j)`.
    fn edge_cells(self, (x, y): (i64, i64)) -> ((i64, i64), (i64, i64)) {
        match self {
            Dir::East => ((x, y - 1), (x, y)),
            Dir::South => ((x, y), (x - 1, y)),
            Dir::West => ((x - 1, y), (x - 1, y - 1)),
            Dir::North => ((x - 1, y - 1), (x, y - 1)),
        }
    }
}

/// Traces the outer contour of superpixel `id`.
///
/// The walk keeps the region on the right of the travel direction, visiting
/// each boundary crack edge exactly once. Interior holes cannot occur in
/// seeded-growth partitions; if the traced area disagrees with the pixel
/// count a hole is present and an error is returned.
pub fn trace_boundary<S: Real>(
    partition: &SuperpixelPartition<S>,
    id: u32,
) -> Result<BoundaryContour> {
    let grid = partition.assignment();
    let inside = |(cx, cy): (i64, i64)| -> bool {
        grid.in_bounds(cx, cy) && *grid.get(cx as usize, cy as usize) == id
    };

    let mut pixel_count = 0usize;
    let mut start: Option<(usize, usize)> = None;
    for ((x, y), &v) in grid.iter() {
        if v == id {
            pixel_count += 1;
            if start.is_none() {
                start = Some((x, y));
            }
        }
    }
    let Some((sx, sy)) = start else {
        return Err(Error::SuperpixelNotFound(id));
    };

    // The topmost-leftmost pixel's top-left corner starts the walk heading
    // east along the pixel's top edge; the region is below (right of) it.
    let start_corner = (sx as i64, sy as i64);
    let start_dir = Dir::East;
    let mut corner = start_corner;
    let mut dir = start_dir;
    let mut points = Vec::new();
    let max_steps = 4 * grid.len() + 4;

    loop {
        points.push((corner.0 as u32, corner.1 as u32));
        corner = dir.step(corner);
        // Turn policy: inner corner -> left, straight edge -> straight,
        // outer corner -> right.
        let (ahead_left, ahead_right) = dir.edge_cells(corner);
        dir = if inside(ahead_left) {
            dir.left()
        } else if inside(ahead_right) {
            dir
        } else {
            dir.right()
        };
        if corner == start_corner && dir == start_dir {
            break;
        }
        if points.len() > max_steps {
            return Err(Error::DegenerateRegion(format!(
                "contour of superpixel {id} did not close"
            )));
        }
    }

    let contour = BoundaryContour { points };
    if contour.signed_area() != pixel_count as i64 {
        return Err(Error::DegenerateRegion(format!(
            "superpixel {id} encloses holes (area {} != {} pixels)",
            contour.signed_area(),
            pixel_count
        )));
    }
    Ok(contour)
}

/// Converts a traced contour into a polygon.
///
/// `epsilon = 0` removes collinear points only (lossless); `epsilon > 0`
/// additionally runs Ramer–Douglas–Peucker so every dropped contour point
/// stays within `epsilon` pixels of the simplified outline. If
/// simplification would leave fewer than 3 vertices the lossless polygon is
/// returned instead.
pub fn contour_to_polygon<S: Real>(
    contour: &BoundaryContour,
    epsilon: S,
    superpixel_id: u32,
) -> Result<Polygon2D<S>> {
    if epsilon < S::zero() || epsilon.is_nan() {
        return Err(Error::InvalidInput(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    let corners = remove_collinear(&contour.points)?;
    let mut vertices: Vec<[S; 2]> = corners
        .iter()
        .map(|&(i, j)| {
            [
                S::of(f64::from(i)) - S::of(0.5),
                S::of(f64::from(j)) - S::of(0.5),
            ]
        })
        .collect();

    if epsilon > S::zero() && vertices.len() > 3 {
        let simplified = rdp_closed(&vertices, epsilon);
        if simplified.len() >= 3 {
            vertices = simplified;
        }
    }
    Ok(Polygon2D {
        vertices,
        superpixel_id,
    })
}

/// Keeps only direction changes of the cyclic lattice contour.
fn remove_collinear(points: &[(u32, u32)]) -> Result<Vec<(u32, u32)>> {
    let mut distinct = points.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateRegion(format!(
            "contour has only {} distinct points",
            distinct.len()
        )));
    }
    let n = points.len();
    let dir = |a: (u32, u32), b: (u32, u32)| -> (i64, i64) {
        let d = (
            i64::from(b.0) - i64::from(a.0),
            i64::from(b.1) - i64::from(a.1),
        );
        // Normalize so multi-step runs compare equal to unit steps.
        let g = d.0.abs().max(d.1.abs()).max(1);
        (d.0 / g, d.1 / g)
    };
    let mut kept = Vec::new();
    for i in 0..n {
        let prev = points[(i + n - 1) % n];
        let cur = points[i];
        let next = points[(i + 1) % n];
        if dir(prev, cur) != dir(cur, next) {
            kept.push(cur);
        }
    }
    if kept.len() < 3 {
        return Err(Error::DegenerateRegion(
            "contour collapses to fewer than 3 corners".into(),
        ));
    }
    Ok(kept)
}

/// RDP for a closed polygon: anchor at vertex 0 (always a true region
/// corner) and the vertex farthest from it, simplify both chains.
fn rdp_closed<S: Real>(vertices: &[[S; 2]], epsilon: S) -> Vec<[S; 2]> {
    let far = vertices
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|(_, a), (_, b)| {
            dist_sq(vertices[0], **a)
                .partial_cmp(&dist_sq(vertices[0], **b))
                .unwrap()
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    if far == 0 {
        return vertices.to_vec();
    }
    let mut first = rdp_chain(&vertices[..=far], epsilon);
    let mut second_pts: Vec<[S; 2]> = vertices[far..].to_vec();
    second_pts.push(vertices[0]);
    let second = rdp_chain(&second_pts, epsilon);
    // Drop duplicated anchors when joining.
    first.pop();
    let mut out = first;
    out.extend_from_slice(&second[..second.len() - 1]);
    out
}

/// Classic recursive RDP over an open chain; keeps both endpoints.
fn rdp_chain<S: Real>(chain: &[[S; 2]], epsilon: S) -> Vec<[S; 2]> {
    if chain.len() <= 2 {
        return chain.to_vec();
    }
    let (first, last) = (chain[0], chain[chain.len() - 1]);
    let mut max_d = S::zero();
    let mut max_i = 0usize;
    for (i, &p) in chain.iter().enumerate().skip(1).take(chain.len() - 2) {
        let d = point_segment_distance(p, first, last);
        if d > max_d {
            max_d = d;
            max_i = i;
        }
    }
    if max_d <= epsilon {
        return vec![first, last];
    }
    let mut left = rdp_chain(&chain[..=max_i], epsilon);
    let right = rdp_chain(&chain[max_i..], epsilon);
    left.pop();
    left.extend_from_slice(&right);
    left
}

fn dist_sq<S: Real>(a: [S; 2], b: [S; 2]) -> S {
    let du = a[0] - b[0];
    let dv = a[1] - b[1];
    du * du + dv * dv
}

/// Distance from `p` to the segment `a..b`.
pub fn point_segment_distance<S: Real>(p: [S; 2], a: [S; 2], b: [S; 2]) -> S {
    let len_sq = dist_sq(a, b);
    if len_sq == S::zero() {
        return dist_sq(p, a).sqrt();
    }
    let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / len_sq;
    let t = t.max(S::zero()).min(S::one());
    let proj = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    dist_sq(p, proj).sqrt()
}

/// Pixels whose centers lie inside the polygon (even-odd rule), clipped to
/// `width` x `height`, sorted row-major.
pub fn rasterize_polygon<S: Real>(
    poly: &Polygon2D<S>,
    width: usize,
    height: usize,
) -> Vec<(u32, u32)> {
    let verts = &poly.vertices;
    if verts.len() < 3 {
        return Vec::new();
    }
    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    for v in verts {
        min_v = min_v.min(v[1].as_f64());
        max_v = max_v.max(v[1].as_f64());
    }
    let y_lo = min_v.ceil().max(0.0) as i64;
    let y_hi = max_v.floor().min(height as f64 - 1.0) as i64;

    let mut pixels = Vec::new();
    let mut crossings: Vec<f64> = Vec::new();
    for y in y_lo..=y_hi {
        let yc = y as f64;
        crossings.clear();
        for i in 0..verts.len() {
            let a = verts[i];
            let b = verts[(i + 1) % verts.len()];
            let (ay, by) = (a[1].as_f64(), b[1].as_f64());
            if (ay > yc) != (by > yc) {
                let (ax, bx) = (a[0].as_f64(), b[0].as_f64());
                crossings.push(ax + (yc - ay) * (bx - ax) / (by - ay));
            }
        }
        crossings.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in crossings.chunks_exact(2) {
            // Fill centers x in [pair0, pair1): a center exactly on the left
            // crossing is inside, on the right crossing outside.
            let x_lo = pair[0].ceil().max(0.0) as i64;
            let x_hi = (pair[1].ceil() - 1.0).min(width as f64 - 1.0) as i64;
            for x in x_lo..=x_hi {
                pixels.push((x as u32, y as u32));
            }
        }
    }
    pixels.sort_unstable_by_key(|&(x, y)| (y, x));
    pixels
}

/// Pixels with a 4-neighbor in another superpixel or outside the image.
pub fn boundary_pixel_count<S: Real>(partition: &SuperpixelPartition<S>) -> usize {
    let grid = partition.assignment();
    let mut count = 0usize;
    for ((x, y), &id) in grid.iter() {
        let mut boundary = false;
        for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !grid.in_bounds(nx, ny) || *grid.get(nx as usize, ny as usize) != id {
                boundary = true;
                break;
            }
        }
        if boundary {
            count += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ImageGrid;
    use crate::snic::SuperpixelPartition;

    /// Partition with region 1 at the given pixels, region 0 elsewhere.
    /// Region 0 is padded to stay 4-connected in these fixtures.
    fn partition_with(
        w: usize,
        h: usize,
        pixels: &[(usize, usize)],
    ) -> SuperpixelPartition<f64> {
        let mut grid = ImageGrid::filled(w, h, 0u32).unwrap();
        for &(x, y) in pixels {
            grid.set(x, y, 1);
        }
        SuperpixelPartition::from_assignment(grid).unwrap()
    }

    #[test]
    fn single_pixel_unit_square() {
        let part = partition_with(8, 8, &[(3, 5)]);
        let contour = trace_boundary(&part, 1).unwrap();
        assert_eq!(contour.points, vec![(3, 5), (4, 5), (4, 6), (3, 6)]);
        assert_eq!(contour.signed_area(), 1);

        let poly = contour_to_polygon::<f64>(&contour, 0.0, 1).unwrap();
        assert_eq!(poly.vertices.len(), 4);
        assert_eq!(poly.vertices[0], [2.5, 4.5]);
        assert_eq!(rasterize_polygon(&poly, 8, 8), vec![(3, 5)]);
    }

    #[test]
    fn rectangle_2x3_perimeter() {
        // 2 wide, 3 tall: perimeter is 10 unit edges -> 10 lattice points.
        let pixels: Vec<(usize, usize)> = (0..2)
            .flat_map(|x| (0..3).map(move |y| (x + 2, y + 1)))
            .collect();
        let part = partition_with(8, 8, &pixels);
        let contour = trace_boundary(&part, 1).unwrap();
        assert_eq!(contour.points.len(), 10);
        assert_eq!(contour.signed_area(), 6);

        let poly = contour_to_polygon::<f64>(&contour, 0.0, 1).unwrap();
        assert_eq!(poly.vertices.len(), 4);
        let mut expect: Vec<(u32, u32)> = pixels.iter().map(|&(x, y)| (x as u32, y as u32)).collect();
        expect.sort_unstable_by_key(|&(x, y)| (y, x));
        assert_eq!(rasterize_polygon(&poly, 8, 8), expect);
    }

    #[test]
    fn l_shape_has_six_corners() {
        let pixels = [(1, 1), (2, 1), (3, 1), (3, 2), (3, 3)];
        let part = partition_with(6, 6, &pixels);
        let contour = trace_boundary(&part, 1).unwrap();
        let poly = contour_to_polygon::<f64>(&contour, 0.0, 1).unwrap();
        assert_eq!(poly.vertices.len(), 6);
        let mut expect: Vec<(u32, u32)> =
            pixels.iter().map(|&(x, y)| (x as u32, y as u32)).collect();
        expect.sort_unstable_by_key(|&(x, y)| (y, x));
        assert_eq!(rasterize_polygon(&poly, 6, 6), expect);
    }

    #[test]
    fn missing_superpixel_is_an_error() {
        let part = partition_with(4, 4, &[(1, 1)]);
        assert!(matches!(
            trace_boundary(&part, 9),
            Err(Error::SuperpixelNotFound(9))
        ));
    }

    #[test]
    fn full_image_region() {
        let grid = ImageGrid::filled(5, 4, 0u32).unwrap();
        let part = SuperpixelPartition::<f64>::from_assignment(grid).unwrap();
        let contour = trace_boundary(&part, 0).unwrap();
        assert_eq!(contour.signed_area(), 20);
        assert_eq!(contour.points.len(), 18);
        let poly = contour_to_polygon::<f64>(&contour, 0.0, 0).unwrap();
        assert_eq!(poly.vertices.len(), 4);
        assert_eq!(rasterize_polygon(&poly, 5, 4).len(), 20);
    }

    #[test]
    fn staircase_rdp_respects_deviation_bound() {
        // Diagonal staircase region.
        let mut pixels = Vec::new();
        for s in 0..6usize {
            for t in 0..=s {
                pixels.push((t + 1, s + 1));
            }
        }
        let part = partition_with(9, 9, &pixels);
        let contour = trace_boundary(&part, 1).unwrap();
        let exact = contour_to_polygon::<f64>(&contour, 0.0, 1).unwrap();
        let eps = 1.5;
        let poly = contour_to_polygon::<f64>(&contour, eps, 1).unwrap();
        assert!(poly.vertices.len() < exact.vertices.len());
        assert!(poly.vertices.len() >= 3);

        // Brute-force deviation check over every original contour point.
        for p in contour.pixel_points::<f64>() {
            let mut best = f64::INFINITY;
            for i in 0..poly.vertices.len() {
                let a = poly.vertices[i];
                let b = poly.vertices[(i + 1) % poly.vertices.len()];
                best = best.min(point_segment_distance(p, a, b));
            }
            assert!(best <= eps + 1e-9, "point {p:?} deviates {best}");
        }
    }

    #[test]
    fn negative_epsilon_rejected() {
        let part = partition_with(4, 4, &[(1, 1)]);
        let contour = trace_boundary(&part, 1).unwrap();
        assert!(contour_to_polygon::<f64>(&contour, -1.0, 1).is_err());
    }

    #[test]
    fn neck_region_round_trips() {
        // Two 2x2 blobs joined by a single-pixel-wide neck.
        let pixels = [
            (1, 1),
            (2, 1),
            (1, 2),
            (2, 2),
            (3, 2),
            (4, 1),
            (5, 1),
            (4, 2),
            (5, 2),
        ];
        let part = partition_with(8, 8, &pixels);
        let contour = trace_boundary(&part, 1).unwrap();
        assert_eq!(contour.signed_area(), pixels.len() as i64);
        let poly = contour_to_polygon::<f64>(&contour, 0.0, 1).unwrap();
        let mut expect: Vec<(u32, u32)> =
            pixels.iter().map(|&(x, y)| (x as u32, y as u32)).collect();
        expect.sort_unstable_by_key(|&(x, y)| (y, x));
        assert_eq!(rasterize_polygon(&poly, 8, 8), expect);
    }
}
