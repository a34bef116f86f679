//! Depth/segmentation losses and evaluation metrics.
//!
//! All functions are pure, operate over masked pixels only, and treat the
//! mask as the single source of validity (depth 0 never reaches them).

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;
use crate::{LabelGrid, MaskGrid};

/// Probabilities are clamped to this floor before `ln` so that degenerate
/// zero-probability predictions yield a large finite loss instead of ∞.
pub const PROB_FLOOR: f64 = 1e-12;

/// Per-pixel probability tolerance for the "rows sum to one" precondition.
pub const PROB_SUM_TOL: f64 = 1e-6;

/// Grouping of the 19 urban classes into 7 categories
/// (flat, construction, object, nature, sky, human, vehicle).
pub const DEFAULT_CATEGORY_MAP: [u8; 19] = [
    0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 4, 5, 5, 6, 6, 6, 6, 6, 6,
];

/// A single non-negative loss value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue<S>(pub S);

impl<S: Real> LossValue<S> {
    pub fn value(&self) -> S {
        self.0
    }
}

/// Depth error metrics over the masked pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics<S> {
    /// Mean absolute error, in depth units.
    pub mean_error: S,
    /// Root of the mean squared error, in depth units.
    pub rms_error: S,
    /// Mean of |pred - gt| / gt.
    pub abs_rel: S,
    /// Mean of (pred - gt)² / gt, in depth units.
    pub sq_rel: S,
    /// Fraction of pixels with max(pred/gt, gt/pred) < 1.25.
    pub delta1: S,
    /// Same threshold at 1.25².
    pub delta2: S,
    /// Same threshold at 1.25³.
    pub delta3: S,
}

/// Per-class and aggregated intersection-over-union.
#[derive(Debug, Clone, PartialEq)]
pub struct SegMetrics<S> {
    /// IoU per class id; `None` when the class appears in neither grid.
    pub per_class_iou: Vec<Option<S>>,
    /// Mean over classes present in prediction or ground truth.
    pub mean_iou_class: S,
    /// Mean over categories present, after mapping classes through the
    /// category table.
    pub mean_iou_category: S,
}

/// Per-pixel class probability raster: `num_classes` values per pixel,
/// pixel-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbGrid<S> {
    width: usize,
    height: usize,
    num_classes: usize,
    data: Vec<S>,
}

impl<S: Real> ClassProbGrid<S> {
    pub fn from_vec(
        width: usize,
        height: usize,
        num_classes: usize,
        data: Vec<S>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || num_classes == 0 {
            return Err(Error::InvalidInput(
                "probability grid dimensions must be positive".into(),
            ));
        }
        if data.len() != width * height * num_classes {
            return Err(Error::InvalidInput(format!(
                "probability data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                num_classes
            )));
        }
        Ok(Self {
            width,
            height,
            num_classes,
            data,
        })
    }

    /// Uniform distribution over all classes at every pixel.
    pub fn uniform(width: usize, height: usize, num_classes: usize) -> Result<Self> {
        let p = S::one() / S::of(num_classes as f64);
        Self::from_vec(
            width,
            height,
            num_classes,
            vec![p; width * height * num_classes],
        )
    }

    /// Probability 1 on the labelled class at every pixel.
    pub fn one_hot(labels: &LabelGrid, num_classes: usize) -> Result<Self> {
        let mut data = vec![S::zero(); labels.len() * num_classes];
        for (i, &l) in labels.as_slice().iter().enumerate() {
            if usize::from(l) >= num_classes {
                return Err(Error::InvalidInput(format!(
                    "label {l} out of range for {num_classes} classes"
                )));
            }
            data[i * num_classes + usize::from(l)] = S::one();
        }
        Self::from_vec(labels.width(), labels.height(), num_classes, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize, class: usize) -> S {
        debug_assert!(x < self.width && y < self.height && class < self.num_classes);
        self.data[(y * self.width + x) * self.num_classes + class]
    }

    fn row(&self, index: usize) -> &[S] {
        &self.data[index * self.num_classes..(index + 1) * self.num_classes]
    }
}

fn check_same_dims<A, B>(a: &ImageGrid<A>, b: &ImageGrid<B>, what: &str) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::InvalidInput(format!(
            "{what}: grid dimensions differ ({}x{} vs {}x{})",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Scale-invariant log-depth loss over masked pixels:
/// `mean(d²) - (Σd)²/(2n²)` with `d = ln(pred) - ln(gt)`.
pub fn scale_invariant_loss<S: Real>(
    pred: &ImageGrid<S>,
    gt: &ImageGrid<S>,
    mask: &MaskGrid,
) -> Result<LossValue<S>> {
    check_same_dims(pred, gt, "scale_invariant_loss")?;
    check_same_dims(pred, mask, "scale_invariant_loss")?;

    let mut n = 0usize;
    let mut sum = S::zero();
    let mut sum_sq = S::zero();
    for (i, &m) in mask.as_slice().iter().enumerate() {
        if !m {
            continue;
        }
        let (p, g) = (pred.as_slice()[i], gt.as_slice()[i]);
        if p <= S::zero() || g <= S::zero() || !p.is_finite() || !g.is_finite() {
            let (x, y) = mask.coords_of(i);
            return Err(Error::InvalidInput(format!(
                "non-positive depth under mask at ({x}, {y}): pred={p} gt={g}"
            )));
        }
        let d = p.ln() - g.ln();
        sum = sum + d;
        sum_sq = sum_sq + d * d;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let n_s = S::of(n as f64);
    let loss = sum_sq / n_s - (sum * sum) / (S::of(2.0) * n_s * n_s);
    // Algebraically Var(d) + mean(d)²/2 ≥ 0; clamp rounding residue.
    Ok(LossValue(loss.max(S::zero())))
}

/// Mean over masked pixels of `-ln(p(true class))`, with probabilities
/// clamped to [`PROB_FLOOR`].
pub fn cross_entropy_loss<S: Real>(
    pred: &ClassProbGrid<S>,
    gt: &LabelGrid,
    mask: &MaskGrid,
) -> Result<LossValue<S>> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::InvalidInput(
            "cross_entropy_loss: probability and label grids differ in size".into(),
        ));
    }
    check_same_dims(gt, mask, "cross_entropy_loss")?;

    let sum_tol = S::of(PROB_SUM_TOL);
    let floor = S::of(PROB_FLOOR);
    let mut n = 0usize;
    let mut total = S::zero();
    for (i, &m) in mask.as_slice().iter().enumerate() {
        if !m {
            continue;
        }
        let row = pred.row(i);
        let mut sum = S::zero();
        for &p in row {
            if p < S::zero() || !p.is_finite() {
                let (x, y) = mask.coords_of(i);
                return Err(Error::InvalidInput(format!(
                    "negative or non-finite probability at ({x}, {y})"
                )));
            }
            sum = sum + p;
        }
        if (sum - S::one()).abs() > sum_tol {
            let (x, y) = mask.coords_of(i);
            return Err(Error::InvalidInput(format!(
                "probabilities at ({x}, {y}) sum to {sum}, expected 1"
            )));
        }
        let label = usize::from(gt.as_slice()[i]);
        if label >= pred.num_classes() {
            let (x, y) = mask.coords_of(i);
            return Err(Error::InvalidInput(format!(
                "label {label} at ({x}, {y}) out of range for {} classes",
                pred.num_classes()
            )));
        }
        total = total - row[label].max(floor).ln();
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(LossValue((total / S::of(n as f64)).max(S::zero())))
}

/// Affine combination `alpha·ls + (1-alpha)·ld`; `alpha` defaults to 0.75
/// in the pipeline.
pub fn combined_loss<S: Real>(
    ls: LossValue<S>,
    ld: LossValue<S>,
    alpha: S,
) -> Result<LossValue<S>> {
    if !(S::zero()..=S::one()).contains(&alpha) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(LossValue(alpha * ls.0 + (S::one() - alpha) * ld.0))
}

/// Mean/RMS/relative depth errors and δ-threshold accuracies.
pub fn depth_metrics<S: Real>(
    pred: &ImageGrid<S>,
    gt: &ImageGrid<S>,
    mask: &MaskGrid,
) -> Result<DepthMetrics<S>> {
    check_same_dims(pred, gt, "depth_metrics")?;
    check_same_dims(pred, mask, "depth_metrics")?;

    let mut n = 0usize;
    let mut abs_sum = S::zero();
    let mut sq_sum = S::zero();
    let mut abs_rel_sum = S::zero();
    let mut sq_rel_sum = S::zero();
    let mut d1 = 0usize;
    let mut d2 = 0usize;
    let mut d3 = 0usize;
    let t1 = S::of(1.25);
    let t2 = t1 * t1;
    let t3 = t2 * t1;

    for (i, &m) in mask.as_slice().iter().enumerate() {
        if !m {
            continue;
        }
        let (p, g) = (pred.as_slice()[i], gt.as_slice()[i]);
        if p <= S::zero() || g <= S::zero() || !p.is_finite() || !g.is_finite() {
            let (x, y) = mask.coords_of(i);
            return Err(Error::InvalidInput(format!(
                "non-positive depth under mask at ({x}, {y}): pred={p} gt={g}"
            )));
        }
        let err = p - g;
        abs_sum = abs_sum + err.abs();
        sq_sum = sq_sum + err * err;
        abs_rel_sum = abs_rel_sum + err.abs() / g;
        sq_rel_sum = sq_rel_sum + err * err / g;
        let ratio = (p / g).max(g / p);
        if ratio < t1 {
            d1 += 1;
        }
        if ratio < t2 {
            d2 += 1;
        }
        if ratio < t3 {
            d3 += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let n_s = S::of(n as f64);
    Ok(DepthMetrics {
        mean_error: abs_sum / n_s,
        rms_error: (sq_sum / n_s).sqrt(),
        abs_rel: abs_rel_sum / n_s,
        sq_rel: sq_rel_sum / n_s,
        delta1: S::of(d1 as f64) / n_s,
        delta2: S::of(d2 as f64) / n_s,
        delta3: S::of(d3 as f64) / n_s,
    })
}

/// Per-class IoU plus class/category means.
///
/// Pixels whose ground-truth label equals `ignore_id` are excluded entirely.
/// Classes appearing in neither grid are excluded from the means; classes
/// predicted but absent from ground truth count with IoU 0.
pub fn segmentation_iou<S: Real>(
    pred: &LabelGrid,
    gt: &LabelGrid,
    num_classes: usize,
    category_map: &[u8],
    ignore_id: u8,
) -> Result<SegMetrics<S>> {
    check_same_dims(pred, gt, "segmentation_iou")?;
    if category_map.len() != num_classes {
        return Err(Error::InvalidInput(format!(
            "category map has {} entries for {} classes",
            category_map.len(),
            num_classes
        )));
    }
    if num_classes == 0 || num_classes > usize::from(ignore_id) {
        return Err(Error::InvalidInput(format!(
            "num_classes {num_classes} incompatible with ignore id {ignore_id}"
        )));
    }

    let num_categories = usize::from(*category_map.iter().max().unwrap()) + 1;
    // tp/fp/fn per class, then per category.
    let mut class_counts = vec![[0u64; 3]; num_classes];
    let mut cat_counts = vec![[0u64; 3]; num_categories];

    for (i, (&p, &g)) in pred
        .as_slice()
        .iter()
        .zip(gt.as_slice().iter())
        .enumerate()
    {
        for (which, v) in [("prediction", p), ("ground truth", g)] {
            if v != ignore_id && usize::from(v) >= num_classes {
                let (x, y) = gt.coords_of(i);
                return Err(Error::InvalidInput(format!(
                    "{which} label {v} at ({x}, {y}) out of range"
                )));
            }
        }
        if g == ignore_id {
            continue;
        }
        let gi = usize::from(g);
        let gc = usize::from(category_map[gi]);
        if p == ignore_id {
            class_counts[gi][2] += 1;
            cat_counts[gc][2] += 1;
            continue;
        }
        let pi = usize::from(p);
        let pc = usize::from(category_map[pi]);
        if pi == gi {
            class_counts[gi][0] += 1;
        } else {
            class_counts[pi][1] += 1;
            class_counts[gi][2] += 1;
        }
        if pc == gc {
            cat_counts[gc][0] += 1;
        } else {
            cat_counts[pc][1] += 1;
            cat_counts[gc][2] += 1;
        }
    }

    let iou_of = |counts: &[u64; 3]| -> Option<S> {
        let denom = counts[0] + counts[1] + counts[2];
        if denom == 0 {
            None
        } else {
            Some(S::of(counts[0] as f64) / S::of(denom as f64))
        }
    };
    let per_class_iou: Vec<Option<S>> = class_counts.iter().map(iou_of).collect();
    let per_cat_iou: Vec<Option<S>> = cat_counts.iter().map(iou_of).collect();
    let mean = |ious: &[Option<S>]| -> S {
        let present: Vec<S> = ious.iter().filter_map(|v| *v).collect();
        if present.is_empty() {
            S::zero()
        } else {
            present.iter().copied().sum::<S>() / S::of(present.len() as f64)
        }
    };

    Ok(SegMetrics {
        mean_iou_class: mean(&per_class_iou),
        mean_iou_category: mean(&per_cat_iou),
        per_class_iou,
    })
}
