//! Independent brute-force oracles for the loss and metric operations.
//!
//! These deliberately use different algebra and loop structure than the
//! library: values are materialized into vectors and every statistic gets
//! its own explicit pass.

use polymap::eval::ClassProbGrid;
use polymap::grid::ImageGrid;
use polymap::{LabelGrid, MaskGrid};

/// Two-pass scale-invariant loss: materialize all log-differences, then
/// apply the two-term formula directly.
pub fn si_loss(pred: &ImageGrid<f64>, gt: &ImageGrid<f64>, mask: &MaskGrid) -> f64 {
    let mut diffs = Vec::new();
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            if *mask.get(x, y) {
                diffs.push(pred.get(x, y).ln() - gt.get(x, y).ln());
            }
        }
    }
    let n = diffs.len() as f64;
    let mean_sq = diffs.iter().map(|d| d * d).sum::<f64>() / n;
    let sum = diffs.iter().sum::<f64>();
    mean_sq - sum * sum / (2.0 * n * n)
}

pub fn cross_entropy(pred: &ClassProbGrid<f64>, gt: &LabelGrid, mask: &MaskGrid) -> f64 {
    let mut losses = Vec::new();
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            if *mask.get(x, y) {
                let p = pred.prob(x, y, usize::from(*gt.get(x, y)));
                losses.push(-p.max(1e-12).ln());
            }
        }
    }
    losses.iter().sum::<f64>() / losses.len() as f64
}

pub struct DepthMetricsOracle {
    pub mean_error: f64,
    pub rms_error: f64,
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub delta: [f64; 3],
}

pub fn depth_metrics(
    pred: &ImageGrid<f64>,
    gt: &ImageGrid<f64>,
    mask: &MaskGrid,
) -> DepthMetricsOracle {
    let mut pairs = Vec::new();
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            if *mask.get(x, y) {
                pairs.push((*pred.get(x, y), *gt.get(x, y)));
            }
        }
    }
    let n = pairs.len() as f64;
    let mean_error = pairs.iter().map(|(p, g)| (p - g).abs()).sum::<f64>() / n;
    let rms_error = (pairs.iter().map(|(p, g)| (p - g) * (p - g)).sum::<f64>() / n).sqrt();
    let abs_rel = pairs.iter().map(|(p, g)| (p - g).abs() / g).sum::<f64>() / n;
    let sq_rel = pairs.iter().map(|(p, g)| (p - g) * (p - g) / g).sum::<f64>() / n;
    let mut delta = [0.0; 3];
    for (k, d) in delta.iter_mut().enumerate() {
        let thresh = 1.25f64.powi(k as i32 + 1);
        *d = pairs
            .iter()
            .filter(|(p, g)| (p / g).max(g / p) < thresh)
            .count() as f64
            / n;
    }
    DepthMetricsOracle {
        mean_error,
        rms_error,
        abs_rel,
        sq_rel,
        delta,
    }
}

pub struct IouOracle {
    pub per_class: Vec<Option<f64>>,
    pub mean_class: f64,
    pub mean_category: f64,
}

/// Confusion-matrix route: fill the full matrix, then read IoUs off it.
pub fn segmentation_iou(
    pred: &LabelGrid,
    gt: &LabelGrid,
    num_classes: usize,
    category_map: &[u8],
    ignore: u8,
) -> IouOracle {
    let confusion = |pred: &LabelGrid, gt: &LabelGrid, n: usize, map: &dyn Fn(u8) -> usize| {
        let mut m = vec![vec![0u64; n + 1]; n]; // extra column: pred == ignore
        for (p, g) in pred.as_slice().iter().zip(gt.as_slice()) {
            if *g == ignore {
                continue;
            }
            let col = if *p == ignore { n } else { map(*p) };
            m[map(*g)][col] += 1;
        }
        m
    };
    let ious = |m: &[Vec<u64>], n: usize| -> Vec<Option<f64>> {
        (0..n)
            .map(|c| {
                let tp = m[c][c];
                let row: u64 = m[c].iter().sum();
                let col: u64 = m.iter().map(|r| r[c]).sum();
                let denom = row + col - tp;
                if denom == 0 {
                    None
                } else {
                    Some(tp as f64 / denom as f64)
                }
            })
            .collect()
    };
    let mean = |v: &[Option<f64>]| {
        let present: Vec<f64> = v.iter().flatten().copied().collect();
        if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        }
    };

    let class_matrix = confusion(pred, gt, num_classes, &|v| usize::from(v));
    let per_class = ious(&class_matrix, num_classes);
    let ncat = usize::from(*category_map.iter().max().unwrap()) + 1;
    let cat_matrix = confusion(pred, gt, ncat, &|v| usize::from(category_map[usize::from(v)]));
    let per_cat = ious(&cat_matrix, ncat);
    IouOracle {
        mean_class: mean(&per_class),
        mean_category: mean(&per_cat),
        per_class,
    }
}
