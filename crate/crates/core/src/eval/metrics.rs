use std::collections::BTreeMap;

use super::detect::iou;
use crate::error::{Error, Result};
use crate::rawframe::BoundingBox;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Operating confidence for precision, recall and F1.
pub const DEFAULT_CONF_THRESHOLD: f32 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAp {
    pub class_id: u16,
    pub truths: usize,
    pub ap: f64,
    /// One point per ranked detection.
    pub curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    /// Classes that have at least one ground-truth box.
    pub classes: Vec<ClassAp>,
    pub map: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// A detection ranked inside its class: (frame, index within frame).
type Ranked = (usize, usize);

/// Greedy matching in descending confidence order. Each detection takes the
/// unmatched same-class truth of its frame with the highest IoU (lowest index
/// on ties) if that IoU reaches `threshold`. Returns, per class, the ranked
/// detections with their TP flag, and the truth count per class.
fn match_greedy(
    detections: &[Vec<BoundingBox>],
    truths: &[Vec<BoundingBox>],
    threshold: f64,
    min_conf: Option<f32>,
) -> (BTreeMap<u16, Vec<(Ranked, bool)>>, BTreeMap<u16, usize>) {
    let mut truth_counts: BTreeMap<u16, usize> = BTreeMap::new();
    for t in truths.iter().flatten() {
        *truth_counts.entry(t.class_id).or_default() += 1;
    }
    let mut by_class: BTreeMap<u16, Vec<Ranked>> = BTreeMap::new();
    for (f, dets) in detections.iter().enumerate() {
        for (i, d) in dets.iter().enumerate() {
            if min_conf.is_none_or(|c| d.confidence >= c) {
                by_class.entry(d.class_id).or_default().push((f, i));
            }
        }
    }
    let mut out = BTreeMap::new();
    for (class, mut ranked) in by_class {
        // Stable sort keeps (frame, index) order among equal confidences.
        ranked.sort_by(|a, b| {
            detections[b.0][b.1].confidence.total_cmp(&detections[a.0][a.1].confidence)
        });
        let mut used: Vec<Vec<bool>> = truths.iter().map(|t| vec![false; t.len()]).collect();
        let flags = ranked
            .into_iter()
            .map(|(f, i)| {
                let d = &detections[f][i];
                let mut best: Option<(f64, usize)> = None;
                for (j, t) in truths[f].iter().enumerate() {
                    if t.class_id != class || used[f][j] {
                        continue;
                    }
                    let v = iou(d, t);
                    if v >= threshold && best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, j));
                    }
                }
                if let Some((_, j)) = best {
                    used[f][j] = true;
                }
                ((f, i), best.is_some())
            })
            .collect();
        out.insert(class, flags);
    }
    (out, truth_counts)
}

/// All-points interpolated area under the precision envelope.
pub fn average_precision(curve: &[PrPoint]) -> f64 {
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, env) in curve.iter().zip(envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    ap
}

/// Detection accuracy over aligned frames.
///
/// mAP averages AP over classes that appear in the ground truth. With no
/// ground truth at all it is 1 when there are no detections and 0 otherwise.
pub fn evaluate(
    detections: &[Vec<BoundingBox>],
    truths: &[Vec<BoundingBox>],
    iou_threshold: f64,
) -> Result<ApResult> {
    evaluate_at(detections, truths, iou_threshold, DEFAULT_CONF_THRESHOLD)
}

pub fn evaluate_at(
    detections: &[Vec<BoundingBox>],
    truths: &[Vec<BoundingBox>],
    iou_threshold: f64,
    conf_threshold: f32,
) -> Result<ApResult> {
    if detections.len() != truths.len() {
        return Err(Error::mismatch(truths.len(), detections.len()));
    }
    let (matched, truth_counts) = match_greedy(detections, truths, iou_threshold, None);
    let mut classes = Vec::new();
    for (&class_id, &n) in &truth_counts {
        let mut tp = 0usize;
        let curve: Vec<PrPoint> = matched
            .get(&class_id)
            .map(|flags| {
                flags
                    .iter()
                    .enumerate()
                    .map(|(k, &(_, hit))| {
                        tp += hit as usize;
                        PrPoint { recall: tp as f64 / n as f64, precision: tp as f64 / (k + 1) as f64 }
                    })
                    .collect()
            })
            .unwrap_or_default();
        classes.push(ClassAp { class_id, truths: n, ap: average_precision(&curve), curve });
    }
    let total_dets: usize = detections.iter().map(Vec::len).sum();
    let map = if classes.is_empty() {
        if total_dets == 0 { 1.0 } else { 0.0 }
    } else {
        classes.iter().map(|c| c.ap).sum::<f64>() / classes.len() as f64
    };

    let (op, _) = match_greedy(detections, truths, iou_threshold, Some(conf_threshold));
    let kept: usize = op.values().map(Vec::len).sum();
    let tp: usize = op.values().flatten().filter(|(_, hit)| *hit).count();
    let n_truth: usize = truth_counts.values().sum();
    let precision = if kept == 0 { 1.0 } else { tp as f64 / kept as f64 };
    let recall = if n_truth == 0 { 1.0 } else { tp as f64 / n_truth as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(ApResult { classes, map, precision, recall, f1 })
}
