use serde::{Deserialize, Serialize};

use super::mask::{mask_iou, InstanceMaskSet};
use crate::error::{Error, Result};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|k| (50 + 5 * k) as f64 / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub ap50: f64,
    pub ap75: f64,
    pub ap_coco: f64,
}

/// Prediction order: descending score, ties by position.
fn ranked(pred: &InstanceMaskSet) -> Result<Vec<usize>> {
    let scores = pred
        .masks()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            m.score
                .ok_or_else(|| Error::InvalidArgument(format!("prediction {i} has no score")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(order)
}

fn iou_matrix(pred: &InstanceMaskSet, truth: &InstanceMaskSet) -> Result<Vec<Vec<f64>>> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    Ok(pred
        .masks()
        .iter()
        .map(|p| truth.masks().iter().map(|t| mask_iou(p, t)).collect())
        .collect())
}

/// TP flags in ranked order. Each prediction takes the unmatched truth of
/// highest IoU at or above the threshold (first truth on ties).
fn match_ranked(order: &[usize], iou: &[Vec<f64>], n_truth: usize, thresh: f64) -> Vec<bool> {
    let mut taken = vec![false; n_truth];
    order
        .iter()
        .map(|&p| {
            let mut best: Option<(usize, f64)> = None;
            for (t, &v) in iou[p].iter().enumerate() {
                if !taken[t] && v >= thresh && best.is_none_or(|(_, b)| v > b) {
                    best = Some((t, v));
                }
            }
            match best {
                Some((t, _)) => {
                    taken[t] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// 101-point interpolated AP (×100) of a ranked TP/FP sequence.
pub fn interpolated_ap(tp: &[bool], n_truth: usize) -> f64 {
    if n_truth == 0 {
        return if tp.is_empty() { 100.0 } else { 0.0 };
    }
    let mut recall = Vec::with_capacity(tp.len());
    let mut precision = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        hits += t as usize;
        recall.push(hits as f64 / n_truth as f64);
        precision.push(hits as f64 / (k + 1) as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for r in 0..=100 {
        let r = r as f64 / 100.0;
        while k < recall.len() && recall[k] < r {
            k += 1;
        }
        if k == recall.len() {
            break;
        }
        sum += precision[k];
    }
    100.0 * sum / 101.0
}

pub fn average_precision(
    pred: &InstanceMaskSet,
    truth: &InstanceMaskSet,
    iou_thresh: f64,
) -> Result<f64> {
    let order = ranked(pred)?;
    let iou = iou_matrix(pred, truth)?;
    Ok(interpolated_ap(
        &match_ranked(&order, &iou, truth.len(), iou_thresh),
        truth.len(),
    ))
}

pub fn ap_report(pred: &InstanceMaskSet, truth: &InstanceMaskSet) -> Result<ApReport> {
    let order = ranked(pred)?;
    let iou = iou_matrix(pred, truth)?;
    let ap = |t: f64| interpolated_ap(&match_ranked(&order, &iou, truth.len(), t), truth.len());
    let all = coco_thresholds().map(ap);
    Ok(ApReport {
        ap50: all[0],
        ap75: all[5],
        ap_coco: all.iter().sum::<f64>() / all.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::super::mask::Mask;
    use super::*;

    const W: usize = 64;

    fn rect(x0: usize, y0: usize, w: usize, h: usize, score: Option<f64>) -> Mask {
        Mask::from_predicate(W, W, score, move |x, y| {
            (x0..x0 + w).contains(&x) && (y0..y0 + h).contains(&y)
        })
    }

    fn set(masks: Vec<Mask>) -> InstanceMaskSet {
        InstanceMaskSet::new(W, W, masks).unwrap()
    }

    /// Max precision over ranks reaching each recall level, by enumeration.
    fn oracle(tp: &[bool], n_truth: usize) -> f64 {
        let prefix: Vec<(f64, f64)> = (1..=tp.len())
            .map(|k| {
                let h = tp[..k].iter().filter(|&&t| t).count() as f64;
                (h / n_truth as f64, h / k as f64)
            })
            .collect();
        let total: f64 = (0..=100)
            .map(|r| {
                prefix
                    .iter()
                    .filter(|(rec, _)| *rec >= r as f64 / 100.0)
                    .map(|(_, p)| *p)
                    .fold(0.0, f64::max)
            })
            .sum();
        100.0 * total / 101.0
    }

    #[test]
    fn perfect_and_empty() {
        let truth = set(vec![rect(0, 0, 5, 5, None), rect(10, 10, 6, 4, None)]);
        let pred = set(vec![
            rect(10, 10, 6, 4, Some(0.2)),
            rect(0, 0, 5, 5, Some(0.9)),
        ]);
        let r = ap_report(&pred, &truth).unwrap();
        assert_eq!((r.ap50, r.ap75, r.ap_coco), (100.0, 100.0, 100.0));
        assert_eq!(average_precision(&set(vec![]), &truth, 0.5).unwrap(), 0.0);
        assert_eq!(
            average_precision(&set(vec![]), &set(vec![]), 0.5).unwrap(),
            100.0
        );
        assert_eq!(average_precision(&pred, &set(vec![]), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn two_tp_one_fp() {
        let truth = set(vec![rect(0, 0, 5, 5, None), rect(20, 20, 5, 5, None)]);
        let pred = set(vec![
            rect(0, 0, 5, 5, Some(0.9)),
            rect(40, 40, 5, 5, Some(0.8)),
            rect(20, 20, 5, 5, Some(0.7)),
        ]);
        let ap = average_precision(&pred, &truth, 0.5).unwrap();
        let expected = oracle(&[true, false, true], 2);
        assert!((ap - expected).abs() < 1e-12);
        assert!((ap - 83.5).abs() < 0.5, "{ap}");
    }

    #[test]
    fn straddle_iou_06() {
        let truth = set(vec![rect(0, 0, 8, 10, None), rect(30, 30, 8, 10, None)]);
        // 8x10 shifted by 2 columns: inter 60, union 100, IoU 0.6.
        let pred = set(vec![
            rect(2, 0, 8, 10, Some(0.9)),
            rect(32, 30, 8, 10, Some(0.5)),
        ]);
        assert!((mask_iou(&pred.masks()[0], &truth.masks()[0]) - 0.6).abs() < 1e-12);
        let r = ap_report(&pred, &truth).unwrap();
        assert_eq!(r.ap50, 100.0);
        assert_eq!(r.ap75, 0.0);
        let per: Vec<f64> = coco_thresholds()
            .iter()
            .map(|&t| average_precision(&pred, &truth, t).unwrap())
            .collect();
        assert!((r.ap_coco - per.iter().sum::<f64>() / 10.0).abs() < 1e-12);
        assert!((r.ap_coco - 30.0).abs() < 1e-9);
    }

    #[test]
    fn best_iou_truth_wins() {
        let truth = set(vec![rect(0, 0, 10, 10, None), rect(4, 0, 10, 10, None)]);
        // First prediction overlaps both truths; taking truth 0 would orphan the second.
        let pred = set(vec![
            rect(3, 0, 10, 10, Some(1.0)),
            rect(0, 0, 10, 10, Some(0.5)),
        ]);
        let order = ranked(&pred).unwrap();
        let iou = iou_matrix(&pred, &truth).unwrap();
        assert_eq!(match_ranked(&order, &iou, 2, 0.5), vec![true, true]);
        assert_eq!(average_precision(&pred, &truth, 0.5).unwrap(), 100.0);
    }

    #[test]
    fn requires_scores() {
        let truth = set(vec![rect(0, 0, 5, 5, None)]);
        assert!(average_precision(&truth, &truth, 0.5).is_err());
    }
}
