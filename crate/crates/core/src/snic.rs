//! Semantic-aware non-iterative superpixel clustering.
//!
//! Superpixels are grown from regular-grid seeds with a single global
//! priority queue: the entry with the smallest distance to its cluster
//! centroid is popped, its pixel joins that cluster exactly once, the
//! centroid's running means are updated, and the pixel's 4-neighbors are
//! pushed with their distance to the updated centroid. The distance couples
//! normalized spatial and CIELAB color terms with a semantic penalty that is
//! zero when the candidate pixel's label matches the cluster seed's label
//! and `semantic_penalty` otherwise, so cluster growth resists crossing
//! label boundaries.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;
use crate::{AssignmentGrid, LabelGrid};

const UNASSIGNED: u32 = u32::MAX;

/// Clustering parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnicParams<S> {
    /// Target superpixel count; the seeded count may differ by grid rounding.
    pub k_superpixels: usize,
    /// Normalizer for the squared spatial distance. A good default is the
    /// grid cell area `width·height/k`.
    pub spatial_norm: S,
    /// Normalizer for the squared CIELAB distance (default 100).
    pub color_norm: S,
    /// Additive penalty inside the square root when the candidate pixel's
    /// semantic label differs from the cluster seed's label (default 10).
    pub semantic_penalty: S,
}

impl<S: Real> SnicParams<S> {
    pub fn validate(&self) -> Result<()> {
        if self.k_superpixels < 1 {
            return Err(Error::InvalidInput("k_superpixels must be >= 1".into()));
        }
        let bad_norm = |v: S| v <= S::zero() || v.is_nan();
        if bad_norm(self.spatial_norm) || bad_norm(self.color_norm) {
            return Err(Error::InvalidInput(
                "spatial and color normalizers must be positive".into(),
            ));
        }
        if self.semantic_penalty < S::zero() || !self.semantic_penalty.is_finite() {
            return Err(Error::InvalidInput(
                "semantic penalty must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A candidate pixel as seen by the distance function.
#[derive(Debug, Clone, Copy)]
pub struct PixelSample<S> {
    /// (u, v) position in pixels.
    pub spatial: [S; 2],
    /// CIELAB color.
    pub color: [S; 3],
    /// Semantic class id.
    pub label: u8,
}

/// Running per-cluster statistics. Means are exact arithmetic means of the
/// member pixels (sums are kept, means computed on demand).
#[derive(Debug, Clone)]
pub struct ClusterCentroid<S> {
    spatial_sum: [S; 2],
    color_sum: [S; 3],
    seed_label: u8,
    pixel_count: usize,
}

impl<S: Real> ClusterCentroid<S> {
    fn new(seed_label: u8) -> Self {
        Self {
            spatial_sum: [S::zero(); 2],
            color_sum: [S::zero(); 3],
            seed_label,
            pixel_count: 0,
        }
    }

    fn add(&mut self, sample: &PixelSample<S>) {
        self.spatial_sum[0] = self.spatial_sum[0] + sample.spatial[0];
        self.spatial_sum[1] = self.spatial_sum[1] + sample.spatial[1];
        for c in 0..3 {
            self.color_sum[c] = self.color_sum[c] + sample.color[c];
        }
        self.pixel_count += 1;
    }

    /// Mean (u, v) of the member pixels.
    pub fn spatial(&self) -> [S; 2] {
        let n = S::of(self.pixel_count.max(1) as f64);
        [self.spatial_sum[0] / n, self.spatial_sum[1] / n]
    }

    /// Mean CIELAB color of the member pixels.
    pub fn color(&self) -> [S; 3] {
        let n = S::of(self.pixel_count.max(1) as f64);
        [
            self.color_sum[0] / n,
            self.color_sum[1] / n,
            self.color_sum[2] / n,
        ]
    }

    /// Semantic label of the seed pixel; constant over the cluster's life.
    pub fn seed_label(&self) -> u8 {
        self.seed_label
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }
}

/// Pixel-to-superpixel assignment plus per-cluster statistics.
#[derive(Debug, Clone)]
pub struct SuperpixelPartition<S> {
    assignment: AssignmentGrid,
    centroids: Vec<ClusterCentroid<S>>,
    k_actual: usize,
}

impl<S: Real> SuperpixelPartition<S> {
    pub fn assignment(&self) -> &AssignmentGrid {
        &self.assignment
    }

    pub fn centroids(&self) -> &[ClusterCentroid<S>] {
        &self.centroids
    }

    /// Number of non-empty superpixels; ids are `0..k_actual`.
    pub fn k_actual(&self) -> usize {
        self.k_actual
    }

    pub fn width(&self) -> usize {
        self.assignment.width()
    }

    pub fn height(&self) -> usize {
        self.assignment.height()
    }

    /// Rebuilds a partition from a bare assignment raster (as loaded from a
    /// file). Ids must cover `0..k` without gaps and every region must be
    /// 4-connected. Centroid colors are zero and seed labels are 0: only the
    /// spatial statistics are recoverable from the raster alone.
    pub fn from_assignment(assignment: AssignmentGrid) -> Result<Self> {
        let mut max_id = 0u32;
        for &id in assignment.as_slice() {
            if id == UNASSIGNED {
                return Err(Error::InvalidInput(
                    "assignment contains unassigned pixels".into(),
                ));
            }
            max_id = max_id.max(id);
        }
        let k = max_id as usize + 1;
        let mut centroids: Vec<ClusterCentroid<S>> =
            (0..k).map(|_| ClusterCentroid::new(0)).collect();
        for ((x, y), &id) in assignment.iter() {
            centroids[id as usize].add(&PixelSample {
                spatial: [S::of(x as f64), S::of(y as f64)],
                color: [S::zero(); 3],
                label: 0,
            });
        }
        if let Some(empty) = centroids.iter().position(|c| c.pixel_count == 0) {
            return Err(Error::InvalidInput(format!(
                "assignment ids are not contiguous: id {empty} is empty"
            )));
        }
        // Single scan: every id must form exactly one 4-connected component.
        let slice = assignment.as_slice();
        let mut seen = vec![false; assignment.len()];
        let mut component_found = vec![false; k];
        let mut stack = Vec::new();
        for start in 0..assignment.len() {
            if seen[start] {
                continue;
            }
            let id = slice[start];
            if component_found[id as usize] {
                return Err(Error::InvalidInput(format!(
                    "superpixel {id} is not 4-connected"
                )));
            }
            component_found[id as usize] = true;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = assignment.coords_of(i);
                for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if assignment.in_bounds(nx, ny) {
                        let ni = assignment.index_of(nx as usize, ny as usize);
                        if !seen[ni] && slice[ni] == id {
                            seen[ni] = true;
                            stack.push(ni);
                        }
                    }
                }
            }
        }
        Ok(Self {
            assignment,
            centroids,
            k_actual: k,
        })
    }

    /// Flood-fill check that region `id` forms one 4-connected component.
    pub fn region_is_connected(&self, id: u32) -> bool {
        let grid = &self.assignment;
        let total = grid
            .as_slice()
            .iter()
            .filter(|&&v| v == id)
            .count();
        if total == 0 {
            return false;
        }
        let start = grid.as_slice().iter().position(|&v| v == id).unwrap();
        let mut seen = vec![false; grid.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut reached = 0usize;
        while let Some(i) = stack.pop() {
            reached += 1;
            let (x, y) = grid.coords_of(i);
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if grid.in_bounds(nx, ny) {
                    let ni = grid.index_of(nx as usize, ny as usize);
                    if !seen[ni] && grid.as_slice()[ni] == id {
                        seen[ni] = true;
                        stack.push(ni);
                    }
                }
            }
        }
        reached == total
    }
}

/// Queue diagnostics from one clustering run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SnicStats {
    /// Pop events that assigned a pixel; equals the pixel count on success.
    pub assignments: usize,
    /// Total queue pushes (seeds included).
    pub pushes: usize,
}

/// Places seeds on a regular grid with step ≈ `sqrt(w·h/k)`.
///
/// Returns `(x, y)` positions, row-major; the count matches `k` up to grid
/// rounding (within roughly [0.75k, 1.3k]).
pub fn init_seeds(width: usize, height: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    if k < 1 {
        return Err(Error::InvalidInput("seed count must be >= 1".into()));
    }
    if k > width * height {
        return Err(Error::InvalidInput(format!(
            "cannot place {k} seeds in a {width}x{height} image"
        )));
    }
    let (w, h) = (width as f64, height as f64);
    // Choose a rows x cols layout with product near k: prefer layouts whose
    // count stays within the grid-rounding band, then the squarest cells,
    // then the closest count.
    let mut best: Option<(usize, usize, (bool, f64, usize))> = None;
    for rows in 1..=height.min(k) {
        let cols = ((k as f64 / rows as f64).round() as usize).clamp(1, width);
        let count = rows * cols;
        let out_of_band = (count as f64) < 0.75 * k as f64 || (count as f64) > 1.3 * k as f64;
        let aspect_dev = ((w / cols as f64) / (h / rows as f64)).ln().abs();
        let key = (out_of_band, aspect_dev, count.abs_diff(k));
        if best.as_ref().is_none_or(|(_, _, k0)| key < *k0) {
            best = Some((rows, cols, key));
        }
    }
    let (rows, cols, _) = best.unwrap();
    let mut seeds = Vec::with_capacity(rows * cols);
    for j in 0..rows {
        for i in 0..cols {
            let x = ((i as f64 + 0.5) * w / cols as f64) as usize;
            let y = ((j as f64 + 0.5) * h / rows as f64) as usize;
            seeds.push((x.min(width - 1), y.min(height - 1)));
        }
    }
    Ok(seeds)
}

/// The joint sample-to-centroid distance:
/// `sqrt(‖Δspatial‖²/s + ‖Δcolor‖²/m + h)` with `h = 0` when the labels
/// match and `semantic_penalty` otherwise.
pub fn snic_distance<S: Real>(
    pixel: &PixelSample<S>,
    centroid: &ClusterCentroid<S>,
    params: &SnicParams<S>,
) -> S {
    let cs = centroid.spatial();
    let cc = centroid.color();
    let du = pixel.spatial[0] - cs[0];
    let dv = pixel.spatial[1] - cs[1];
    let spatial_sq = du * du + dv * dv;
    let mut color_sq = S::zero();
    for (pc, mc) in pixel.color.iter().zip(&cc) {
        let d = *pc - *mc;
        color_sq = color_sq + d * d;
    }
    let h = if pixel.label == centroid.seed_label {
        S::zero()
    } else {
        params.semantic_penalty
    };
    (spatial_sq / params.spatial_norm + color_sq / params.color_norm + h).sqrt()
}

// Queue entries order by (distance bits, pixel index, centroid id). The
// distance is non-negative, so its IEEE bit pattern as u64 sorts like the
// value and gives a cheap total order with deterministic tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct QueueEntry {
    dist_bits: u64,
    pixel: u32,
    centroid: u32,
}

/// Runs the clustering; see [`run_snic_with_stats`] for queue diagnostics.
pub fn run_snic<S: Real>(
    image_lab: &ImageGrid<[S; 3]>,
    labels: &LabelGrid,
    params: &SnicParams<S>,
) -> Result<SuperpixelPartition<S>> {
    run_snic_with_stats(image_lab, labels, params).map(|(p, _)| p)
}

/// Runs the clustering and reports queue statistics.
pub fn run_snic_with_stats<S: Real>(
    image_lab: &ImageGrid<[S; 3]>,
    labels: &LabelGrid,
    params: &SnicParams<S>,
) -> Result<(SuperpixelPartition<S>, SnicStats)> {
    params.validate()?;
    if !image_lab.same_dims(labels) {
        return Err(Error::InvalidInput(format!(
            "image {}x{} and label {}x{} grids differ in size",
            image_lab.width(),
            image_lab.height(),
            labels.width(),
            labels.height()
        )));
    }
    let (width, height) = (image_lab.width(), image_lab.height());
    let total = width * height;
    let seeds = init_seeds(width, height, params.k_superpixels)?;

    let sample_at = |index: usize| -> PixelSample<S> {
        let (x, y) = image_lab.coords_of(index);
        PixelSample {
            spatial: [S::of(x as f64), S::of(y as f64)],
            color: image_lab.as_slice()[index],
            label: labels.as_slice()[index],
        }
    };

    let mut centroids: Vec<ClusterCentroid<S>> = seeds
        .iter()
        .map(|&(x, y)| ClusterCentroid::new(*labels.get(x, y)))
        .collect();

    let mut assignment = ImageGrid::filled(width, height, UNASSIGNED)?;
    let mut heap: BinaryHeap<Reverse<QueueEntry>> = BinaryHeap::with_capacity(total * 2);
    let mut stats = SnicStats::default();

    for (cid, &(x, y)) in seeds.iter().enumerate() {
        heap.push(Reverse(QueueEntry {
            dist_bits: 0,
            pixel: assignment.index_of(x, y) as u32,
            centroid: cid as u32,
        }));
        stats.pushes += 1;
    }

    let mut assigned = 0usize;
    while let Some(Reverse(entry)) = heap.pop() {
        let index = entry.pixel as usize;
        if assignment.as_slice()[index] != UNASSIGNED {
            continue;
        }
        let cid = entry.centroid;
        assignment.as_mut_slice()[index] = cid;
        assigned += 1;
        stats.assignments += 1;
        let centroid = &mut centroids[cid as usize];
        centroid.add(&sample_at(index));

        if assigned == total {
            break;
        }

        let (x, y) = assignment.coords_of(index);
        let centroid = &centroids[cid as usize];
        for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !assignment.in_bounds(nx, ny) {
                continue;
            }
            let ni = assignment.index_of(nx as usize, ny as usize);
            if assignment.as_slice()[ni] != UNASSIGNED {
                continue;
            }
            let d = snic_distance(&sample_at(ni), centroid, params);
            let d64 = d.as_f64();
            debug_assert!(d64.is_finite() && d64 >= 0.0, "bad snic distance {d64}");
            heap.push(Reverse(QueueEntry {
                dist_bits: d64.to_bits(),
                pixel: ni as u32,
                centroid: cid,
            }));
            stats.pushes += 1;
        }
    }

    debug_assert_eq!(assigned, total);
    let k_actual = centroids.len();
    Ok((
        SuperpixelPartition {
            assignment,
            centroids,
            k_actual,
        },
        stats,
    ))
}
