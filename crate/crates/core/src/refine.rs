//! Per-superpixel slanted-plane depth refinement and RANSAC road smoothing.
//!
//! Every superpixel's depth is modeled as `depth(u, v) = a·u + b·v + c`
//! fitted by least squares over its valid pixels, replacing per-pixel noise
//! with one plane per region. The road surface is then smoothed globally:
//! road-labeled pixels are back-projected to 3D, a dominant plane is found
//! with RANSAC, refit on the consensus set, and road depth is re-rendered
//! from ray-plane intersections.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::{CameraIntrinsics, Point3};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;
use crate::snic::SuperpixelPartition;
use crate::{LabelGrid, MaskGrid};

/// Slanted depth plane of one superpixel: `depth(u, v) = a·u + b·v + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneParams<S> {
    /// Depth change per pixel along u.
    pub a: S,
    /// Depth change per pixel along v.
    pub b: S,
    /// Depth offset.
    pub c: S,
    pub superpixel_id: u32,
    /// False when the superpixel had no valid depth to fit.
    pub valid: bool,
}

impl<S: Real> PlaneParams<S> {
    pub fn invalid(superpixel_id: u32) -> Self {
        Self {
            a: S::zero(),
            b: S::zero(),
            c: S::zero(),
            superpixel_id,
            valid: false,
        }
    }

    /// Plane depth at pixel coordinates `(u, v)`.
    #[inline]
    pub fn depth_at(&self, u: S, v: S) -> S {
        self.a * u + self.b * v + self.c
    }
}

/// 3D plane in Hessian normal form: `normal · p = offset`, |normal| = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane3<S> {
    pub normal: Point3<S>,
    pub offset: S,
}

impl<S: Real> Plane3<S> {
    pub fn signed_distance(&self, p: &Point3<S>) -> S {
        self.normal.dot(p) - self.offset
    }

    /// Canonical orientation: flips so the largest normal component is
    /// positive, for comparisons.
    pub fn canonical(&self) -> Self {
        let n = &self.normal;
        let lead = if n.z.abs() >= n.x.abs() && n.z.abs() >= n.y.abs() {
            n.z
        } else if n.y.abs() >= n.x.abs() {
            n.y
        } else {
            n.x
        };
        if lead < S::zero() {
            Plane3 {
                normal: n.scale(-S::one()),
                offset: -self.offset,
            }
        } else {
            *self
        }
    }
}

/// RANSAC configuration. The seed is explicit: there is no hidden global
/// randomness anywhere in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams<S> {
    pub iterations: usize,
    /// Point-to-plane inlier distance in meters.
    pub inlier_threshold: S,
    /// Minimum consensus fraction of the candidate points in (0, 1].
    pub min_inliers: S,
    pub rng_seed: u64,
}

impl<S: Real> RansacParams<S> {
    pub fn new(iterations: usize, inlier_threshold: S, min_inliers: S, rng_seed: u64) -> Result<Self> {
        let p = Self {
            iterations,
            inlier_threshold,
            min_inliers,
            rng_seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidInput("ransac iterations must be >= 1".into()));
        }
        if self.inlier_threshold <= S::zero() || self.inlier_threshold.is_nan() {
            return Err(Error::InvalidInput(
                "ransac inlier threshold must be positive".into(),
            ));
        }
        let f = self.min_inliers;
        if f.is_nan() || f <= S::zero() || f > S::one() {
            return Err(Error::InvalidInput(
                "ransac min_inliers must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Pipeline defaults; the seed must still be chosen by the caller.
    pub fn defaults_with_seed(rng_seed: u64) -> Self {
        Self {
            iterations: 200,
            inlier_threshold: S::of(0.15),
            min_inliers: S::of(0.5),
            rng_seed,
        }
    }
}

/// What happened to the road surface in [`ransac_ground`].
#[derive(Debug, Clone, PartialEq)]
pub enum GroundOutcome<S> {
    /// Road depth was re-rendered from the fitted plane.
    Smoothed { plane: Plane3<S>, inliers: usize },
    /// Fewer than 3 road points with valid depth; depth left untouched.
    SkippedInsufficientPoints { road_pixels: usize },
    /// No hypothesis reached the consensus fraction; depth left untouched.
    SkippedNoConsensus,
}

/// Least-squares fit of `depth = a·u + b·v + c` over `(u, v, depth)` samples.
///
/// Coordinates are centered before solving the normal equations, which makes
/// the system block-diagonal and well conditioned. With fewer than 3 points,
/// or when the points are collinear in (u, v), the fit degenerates to the
/// constant plane `(0, 0, mean depth)`, still flagged valid.
pub fn fit_plane<S: Real>(pixels: &[(S, S, S)]) -> Result<PlaneParams<S>> {
    if pixels.is_empty() {
        return Err(Error::NoData);
    }
    let n = S::of(pixels.len() as f64);
    let mut mean_u = S::zero();
    let mut mean_v = S::zero();
    let mut mean_d = S::zero();
    for &(u, v, d) in pixels {
        mean_u = mean_u + u;
        mean_v = mean_v + v;
        mean_d = mean_d + d;
    }
    mean_u = mean_u / n;
    mean_v = mean_v / n;
    mean_d = mean_d / n;

    let constant = PlaneParams {
        a: S::zero(),
        b: S::zero(),
        c: mean_d,
        superpixel_id: 0,
        valid: true,
    };
    if pixels.len() < 3 {
        return Ok(constant);
    }

    let mut suu = S::zero();
    let mut suv = S::zero();
    let mut svv = S::zero();
    let mut sud = S::zero();
    let mut svd = S::zero();
    for &(u, v, d) in pixels {
        let du = u - mean_u;
        let dv = v - mean_v;
        let dd = d - mean_d;
        suu = suu + du * du;
        suv = suv + du * dv;
        svv = svv + dv * dv;
        sud = sud + du * dd;
        svd = svd + dv * dd;
    }
    let det = suu * svv - suv * suv;
    let rank_floor = suu.max(svv).max(S::one()) * S::epsilon() * S::of(64.0);
    // Rank-deficient (u, v) scatter: collinear or coincident pixels.
    if det <= rank_floor || det.is_nan() {
        return Ok(constant);
    }
    let a = (svv * sud - suv * svd) / det;
    let b = (suu * svd - suv * sud) / det;
    let c = mean_d - a * mean_u - b * mean_v;
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Ok(constant);
    }
    Ok(PlaneParams {
        a,
        b,
        c,
        superpixel_id: 0,
        valid: true,
    })
}

/// Replaces depth inside every superpixel with its fitted plane.
///
/// Superpixels without any valid-depth pixel become invalid planes and
/// masked-out depth; plane depths ≤ 0 are clamped to invalid as well.
/// Invalid output pixels carry depth 0.
pub fn apply_planes<S: Real>(
    partition: &SuperpixelPartition<S>,
    depth: &ImageGrid<S>,
    mask: &MaskGrid,
) -> Result<(ImageGrid<S>, MaskGrid, Vec<PlaneParams<S>>)> {
    if !depth.same_dims(mask)
        || depth.width() != partition.width()
        || depth.height() != partition.height()
    {
        return Err(Error::InvalidInput(
            "apply_planes: depth, mask and partition dimensions differ".into(),
        ));
    }

    let k = partition.k_actual();
    let mut samples: Vec<Vec<(S, S, S)>> = vec![Vec::new(); k];
    for ((x, y), &id) in partition.assignment().iter() {
        if *mask.get(x, y) {
            samples[id as usize].push((S::of(x as f64), S::of(y as f64), *depth.get(x, y)));
        }
    }

    let mut planes = Vec::with_capacity(k);
    for (id, pts) in samples.iter().enumerate() {
        if pts.is_empty() {
            planes.push(PlaneParams::invalid(id as u32));
        } else {
            let mut plane = fit_plane(pts)?;
            plane.superpixel_id = id as u32;
            planes.push(plane);
        }
    }

    let mut out_depth = ImageGrid::filled(depth.width(), depth.height(), S::zero())?;
    let mut out_mask = ImageGrid::filled(depth.width(), depth.height(), false)?;
    for ((x, y), &id) in partition.assignment().iter() {
        let plane = &planes[id as usize];
        if !plane.valid {
            continue;
        }
        let d = plane.depth_at(S::of(x as f64), S::of(y as f64));
        if d > S::zero() && d.is_finite() {
            out_depth.set(x, y, d);
            out_mask.set(x, y, true);
        }
    }
    Ok((out_depth, out_mask, planes))
}

/// RANSAC plane search over a 3D point set.
///
/// Hypotheses come from 3 distinct random points; the best consensus set is
/// refit by least squares. Returns `None` when no hypothesis reaches
/// `min_inliers` (or fewer than 3 points are given). Deterministic for a
/// fixed `rng_seed`.
pub fn ransac_plane<S: Real>(
    points: &[Point3<S>],
    params: &RansacParams<S>,
) -> Option<(Plane3<S>, Vec<usize>)> {
    params.validate().ok()?;
    let n = points.len();
    if n < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let required = (params.min_inliers * S::of(n as f64)).ceil().as_f64() as usize;
    let required = required.max(3);

    let mut best_count = 0usize;
    let mut best_plane: Option<Plane3<S>> = None;
    for _ in 0..params.iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        while j == i {
            j = rng.random_range(0..n);
        }
        let mut l = rng.random_range(0..n);
        while l == i || l == j {
            l = rng.random_range(0..n);
        }
        let e1 = points[j].sub(&points[i]);
        let e2 = points[l].sub(&points[i]);
        let Some(normal) = e1.cross(&e2).normalized() else {
            continue;
        };
        let plane = Plane3 {
            offset: normal.dot(&points[i]),
            normal,
        };
        let count = points
            .iter()
            .filter(|p| plane.signed_distance(p).abs() < params.inlier_threshold)
            .count();
        if count > best_count {
            best_count = count;
            best_plane = Some(plane);
        }
    }

    let plane = best_plane?;
    if best_count < required {
        return None;
    }
    let inliers: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() < params.inlier_threshold)
        .map(|(i, _)| i)
        .collect();
    let subset: Vec<Point3<S>> = inliers.iter().map(|&i| points[i]).collect();
    let refit = fit_plane_3d(&subset).unwrap_or(plane);
    Some((refit, inliers))
}

/// Total-least-squares plane through 3D points: centroid plus the smallest
/// principal direction of the covariance. `None` for fewer than 3 points or
/// a degenerate (collinear) configuration.
pub fn fit_plane_3d<S: Real>(points: &[Point3<S>]) -> Option<Plane3<S>> {
    if points.len() < 3 {
        return None;
    }
    let n = S::of(points.len() as f64);
    let mut c = Point3::zero();
    for p in points {
        c = c.add(p);
    }
    let c = c.scale(S::one() / n);
    let mut cov = [[S::zero(); 3]; 3];
    for p in points {
        let d = p.sub(&c);
        let v = [d.x, d.y, d.z];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] = cov[i][j] + v[i] * v[j];
            }
        }
    }
    let (_, axis) = sym3_min_eigen(&cov)?;
    let normal = axis.normalized()?;
    Some(Plane3 {
        offset: normal.dot(&c),
        normal,
    })
}

/// Smallest eigenpair of a symmetric 3x3 matrix via cyclic Jacobi rotations.
fn sym3_min_eigen<S: Real>(m: &[[S; 3]; 3]) -> Option<(S, Point3<S>)> {
    let mut a = *m;
    let mut q = [[S::zero(); 3]; 3];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = S::one();
    }
    let scale = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .fold(S::zero(), |acc, (i, j)| acc.max(m[i][j].abs()))
        .max(S::one());
    let tol = scale * S::epsilon() * S::of(8.0);

    for _ in 0..64 {
        // largest off-diagonal element
        let (mut p, mut r, mut off) = (0usize, 1usize, a[0][1].abs());
        for &(i, j) in &[(0usize, 2usize), (1, 2)] {
            if a[i][j].abs() > off {
                off = a[i][j].abs();
                p = i;
                r = j;
            }
        }
        if off <= tol {
            break;
        }
        let theta = (a[r][r] - a[p][p]) / (S::of(2.0) * a[p][r]);
        let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
        let cos = S::one() / (t * t + S::one()).sqrt();
        let sin = t * cos;
        // rotate rows/cols p and r
        let app = a[p][p];
        let arr = a[r][r];
        let apr = a[p][r];
        a[p][p] = cos * cos * app - S::of(2.0) * sin * cos * apr + sin * sin * arr;
        a[r][r] = sin * sin * app + S::of(2.0) * sin * cos * apr + cos * cos * arr;
        a[p][r] = S::zero();
        a[r][p] = S::zero();
        let other = 3 - p - r;
        let aop = a[other][p];
        let aor = a[other][r];
        a[other][p] = cos * aop - sin * aor;
        a[p][other] = a[other][p];
        a[other][r] = sin * aop + cos * aor;
        a[r][other] = a[other][r];
        for row in q.iter_mut() {
            let (qp, qr) = (row[p], row[r]);
            row[p] = cos * qp - sin * qr;
            row[r] = sin * qp + cos * qr;
        }
    }

    let mut min_i = 0usize;
    for i in 1..3 {
        if a[i][i] < a[min_i][min_i] {
            min_i = i;
        }
    }
    let axis = Point3::new(q[0][min_i], q[1][min_i], q[2][min_i]);
    if !axis.is_finite() {
        return None;
    }
    Some((a[min_i][min_i], axis))
}

/// Smooths road depth with a global RANSAC plane.
///
/// Road-labeled pixels with valid depth are back-projected to the camera
/// frame; the dominant plane found by [`ransac_plane`] (refit on its
/// consensus set) re-renders the depth of **all** road-labeled pixels from
/// the ray-plane intersection. Non-road pixels are returned bit-identical.
/// Too few road points or no consensus leaves the depth untouched and
/// reports a skip outcome.
pub fn ransac_ground<S: Real>(
    depth: &ImageGrid<S>,
    mask: &MaskGrid,
    labels: &LabelGrid,
    road_class: u8,
    k: &CameraIntrinsics<S>,
    params: &RansacParams<S>,
) -> Result<(GroundOutcome<S>, ImageGrid<S>, MaskGrid)> {
    params.validate()?;
    if !depth.same_dims(mask) || !depth.same_dims(labels) {
        return Err(Error::InvalidInput(
            "ransac_ground: depth, mask and label dimensions differ".into(),
        ));
    }

    let mut road_points = Vec::new();
    for ((x, y), &label) in labels.iter() {
        if label == road_class && *mask.get(x, y) {
            let p = k.back_project(S::of(x as f64), S::of(y as f64), *depth.get(x, y))?;
            road_points.push(p);
        }
    }
    if road_points.len() < 3 {
        return Ok((
            GroundOutcome::SkippedInsufficientPoints {
                road_pixels: road_points.len(),
            },
            depth.clone(),
            mask.clone(),
        ));
    }

    let Some((plane, inliers)) = ransac_plane(&road_points, params) else {
        return Ok((GroundOutcome::SkippedNoConsensus, depth.clone(), mask.clone()));
    };

    let mut out_depth = depth.clone();
    let mut out_mask = mask.clone();
    for ((x, y), &label) in labels.iter() {
        if label != road_class {
            continue;
        }
        let dir = k.ray_direction(S::of(x as f64), S::of(y as f64));
        let denom = plane.normal.dot(&dir);
        let t = plane.offset / denom;
        // The ray has unit z, so the intersection parameter is the depth.
        if denom.abs() > S::epsilon() && t > S::zero() && t.is_finite() {
            out_depth.set(x, y, t);
            out_mask.set(x, y, true);
        } else {
            out_depth.set(x, y, S::zero());
            out_mask.set(x, y, false);
        }
    }
    Ok((
        GroundOutcome::Smoothed {
            plane,
            inliers: inliers.len(),
        },
        out_depth,
        out_mask,
    ))
}
