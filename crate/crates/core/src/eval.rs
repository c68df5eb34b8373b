//! Segmentation scoring: binarization, IoU, per-sequence summaries and
//! pixel-wise cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{plane::ensure_same_dims, BinaryMask, SoftMask};

/// Clamp applied to predicted probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// `p >= threshold` is foreground.
pub fn binarize(prob: &SoftMask, threshold: f64) -> BinaryMask {
    prob.map(|p| p >= threshold)
}

/// Intersection over union with a machine-epsilon guard, so two empty masks score 1.
pub fn iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    let (mut inter, mut n_pred, mut n_gt) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        inter += (p && g) as usize;
        n_pred += p as usize;
        n_gt += g as usize;
    }
    let eps = f64::EPSILON;
    let union = (n_pred + n_gt - inter) as f64;
    Ok((inter as f64 + eps) / (union + eps))
}

/// Per-sequence IoU summary, all values in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_frame: Vec<f64>,
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    pub frame_count: usize,
}

/// Percentile by linear interpolation between order statistics of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and 5th/95th percentiles of per-frame IoU values given in [0,1].
pub fn sequence_summary(scores: &[f64]) -> Result<ScoreReport> {
    if scores.is_empty() {
        return Err(Error::invalid("scores", "cannot summarize an empty sequence"));
    }
    let per_frame: Vec<f64> = scores.iter().map(|s| s * 100.0).collect();
    let mut sorted = per_frame.clone();
    sorted.sort_by(f64::total_cmp);
    // summing in sorted order keeps the mean independent of frame order
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(ScoreReport {
        mean,
        p5: percentile(&sorted, 5.0),
        p95: percentile(&sorted, 95.0),
        frame_count: per_frame.len(),
        per_frame,
    })
}

/// Two-class pixel-wise cross-entropy, summed over pixels.
pub fn cross_entropy(pred: &SoftMask, gt: &BinaryMask) -> Result<f64> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    Ok(pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .map(|(&p, &g)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if g {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binarize_inclusive() {
        assert!(binarize(&SoftMask::filled(3, 3, 0.5), 0.5)
            .as_slice()
            .iter()
            .all(|&v| v));
        assert!(!binarize(&SoftMask::filled(3, 3, 0.49), 0.5).any());
        let p = SoftMask::from_fn(4, 4, |y, x| (y * 4 + x) as f64 / 15.0);
        let b = binarize(&p, 0.5);
        assert_eq!(binarize(&b.to_soft(), 0.5), b);
    }

    #[test]
    fn iou_cases() {
        let a = BinaryMask::from_fn(10, 10, |y, _| y < 3);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let empty = BinaryMask::new(10, 10);
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
        let left = BinaryMask::from_fn(10, 10, |y, x| y == 0 && x < 10);
        let right = BinaryMask::from_fn(10, 10, |y, x| y == 9 && x < 10);
        let j = iou(&left, &right).unwrap();
        assert!((j - f64::EPSILON / (20.0 + f64::EPSILON)).abs() < 1e-30);
        assert!(iou(&a, &BinaryMask::new(5, 5)).is_err());
    }

    #[test]
    fn half_overlap() {
        let a = BinaryMask::from_fn(4, 4, |_, x| x < 2);
        let b = BinaryMask::from_fn(4, 4, |_, x| x < 1);
        assert!((iou(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn summary_single() {
        let r = sequence_summary(&[1.0]).unwrap();
        assert_eq!((r.mean, r.p5, r.p95, r.frame_count), (100.0, 100.0, 100.0, 1));
        assert!(sequence_summary(&[]).is_err());
    }

    #[test]
    fn summary_uniform_list() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let r = sequence_summary(&scores).unwrap();
        assert!((r.mean - 49.5).abs() < 1e-9);
        assert!((r.p5 - 4.95).abs() < 1e-9);
        assert!((r.p95 - 94.05).abs() < 1e-9);
        let mut rev = scores.clone();
        rev.reverse();
        let r2 = sequence_summary(&rev).unwrap();
        assert_eq!((r.mean, r.p5, r.p95), (r2.mean, r2.p5, r2.p95));
    }

    #[test]
    fn cross_entropy_cases() {
        let gt = BinaryMask::from_vec(1, 1, vec![true]).unwrap();
        let ce = cross_entropy(&SoftMask::filled(1, 1, 0.5), &gt).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
        let gt = BinaryMask::from_fn(3, 3, |y, x| y == x);
        let ce = cross_entropy(&gt.to_soft(), &gt).unwrap();
        assert!(ce < 1e-5);
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in proptest::collection::vec(any::<bool>(), 36), b in proptest::collection::vec(any::<bool>(), 36)) {
            let a = BinaryMask::from_vec(6, 6, a).unwrap();
            let b = BinaryMask::from_vec(6, 6, b).unwrap();
            let ab = iou(&a, &b).unwrap();
            prop_assert_eq!(ab, iou(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn cross_entropy_decreases_toward_truth(p in 0.0f64..1.0, t in 0.0f64..1.0, g in any::<bool>()) {
            // moving the prediction a fraction t of the way to the label never raises the loss
            let gt = BinaryMask::from_vec(1, 1, vec![g]).unwrap();
            let target = if g { 1.0 } else { 0.0 };
            let closer = p + t * (target - p);
            let before = cross_entropy(&SoftMask::filled(1, 1, p), &gt).unwrap();
            let after = cross_entropy(&SoftMask::filled(1, 1, closer), &gt).unwrap();
            prop_assert!(after <= before + 1e-12);
        }
    }
}
