//! Object-detection metrics: IoU, greedy matching, AP, mAP@.5,
//! mAP@.5:.95, and a class confusion matrix with a background class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundingBox, ClassLabel, Detection};

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApInterp {
    /// Area under the monotone precision envelope at every recall change.
    Continuous,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    #[serde(rename = "11point")]
    ElevenPoint,
}

impl std::str::FromStr for ApInterp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(ApInterp::Continuous),
            "11point" => Ok(ApInterp::ElevenPoint),
            other => Err(Error::InvalidValue(format!(
                "ap interpolation `{other}` (expected continuous or 11point)"
            ))),
        }
    }
}

/// Greedy matching of one image's predictions to its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub iou_threshold: f64,
    /// Per prediction, in input order: matched GT index, or `None` (FP).
    pub pred_to_gt: Vec<Option<usize>>,
    /// Per GT: matching prediction index, or `None` (FN).
    pub gt_to_pred: Vec<Option<usize>>,
    pub confidences: Vec<f64>,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.pred_to_gt.iter().filter(|m| m.is_some()).count()
    }

    pub fn fp(&self) -> usize {
        self.pred_to_gt.len() - self.tp()
    }

    pub fn fn_count(&self) -> usize {
        self.gt_to_pred.iter().filter(|m| m.is_none()).count()
    }

    pub fn scored(&self) -> impl Iterator<Item = ScoredPred> + '_ {
        self.confidences
            .iter()
            .zip(&self.pred_to_gt)
            .map(|(&confidence, m)| ScoredPred {
                confidence,
                tp: m.is_some(),
            })
    }
}

/// Predictions in descending confidence (input order on ties) each claim
/// the unclaimed GT box with the highest IoU at or above `thr`. Labels are
/// ignored; filter by class first for per-class matching.
pub fn match_boxes(preds: &[(f64, BoundingBox)], gts: &[BoundingBox], thr: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].0.total_cmp(&preds[a].0));
    let mut pred_to_gt = vec![None; preds.len()];
    let mut gt_to_pred = vec![None; gts.len()];
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_to_pred[g].is_some() {
                continue;
            }
            let v = iou(&preds[p].1, gt);
            if v >= thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            pred_to_gt[p] = Some(g);
            gt_to_pred[g] = Some(p);
        }
    }
    MatchResult {
        iou_threshold: thr,
        pred_to_gt,
        gt_to_pred,
        confidences: preds.iter().map(|p| p.0).collect(),
    }
}

pub fn match_detections<C: ClassLabel>(
    preds: &[Detection<C>],
    gts: &[Detection<C>],
    thr: f64,
) -> MatchResult {
    let p: Vec<_> = preds.iter().map(|d| (d.confidence, d.bbox)).collect();
    let g: Vec<_> = gts.iter().map(|d| d.bbox).collect();
    match_boxes(&p, &g, thr)
}

/// Match only the detections of `class`.
pub fn match_class<C: ClassLabel>(
    preds: &[Detection<C>],
    gts: &[Detection<C>],
    class: C,
    thr: f64,
) -> MatchResult {
    let p: Vec<_> = preds
        .iter()
        .filter(|d| d.label == class)
        .map(|d| (d.confidence, d.bbox))
        .collect();
    let g: Vec<_> = gts
        .iter()
        .filter(|d| d.label == class)
        .map(|d| d.bbox)
        .collect();
    match_boxes(&p, &g, thr)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPred {
    pub confidence: f64,
    pub tp: bool,
}

/// AP of one class over a dataset. `None` when there are neither GT boxes
/// nor predictions; 0 when there are predictions but no GT.
pub fn average_precision(scored: &[ScoredPred], n_gt: usize, interp: ApInterp) -> Option<f64> {
    if n_gt == 0 {
        return if scored.is_empty() { None } else { Some(0.0) };
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut recall = Vec::with_capacity(sorted.len());
    let mut precision = Vec::with_capacity(sorted.len());
    let mut tp = 0usize;
    for (k, s) in sorted.iter().enumerate() {
        if s.tp {
            tp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    // Precision envelope: running max from the right.
    let mut envelope = precision.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let ap = match interp {
        ApInterp::Continuous => {
            let mut prev_recall = 0.0;
            let mut area = 0.0;
            for (r, p) in recall.iter().zip(&envelope) {
                if *r > prev_recall {
                    area += (r - prev_recall) * p;
                    prev_recall = *r;
                }
            }
            area
        }
        ApInterp::ElevenPoint => {
            let mut sum = 0.0;
            for i in 0..=10 {
                let level = i as f64 / 10.0;
                let p = recall
                    .iter()
                    .position(|&r| r >= level - 1e-12)
                    .map_or(0.0, |k| envelope[k]);
                sum += p;
            }
            sum / 11.0
        }
    };
    Some(ap)
}

/// One image's predictions and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalImage<C> {
    pub preds: Vec<Detection<C>>,
    pub gts: Vec<Detection<C>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApResult<C> {
    pub class: C,
    pub n_gt: usize,
    pub n_pred: usize,
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapResult<C> {
    pub per_class: Vec<ApResult<C>>,
    pub map: f64,
    /// Number of classes averaged (classes with ground truth).
    pub n: usize,
}

fn class_ap<C: ClassLabel>(
    images: &[EvalImage<C>],
    class: C,
    thr: f64,
    interp: ApInterp,
) -> ApResult<C> {
    let mut scored = Vec::new();
    let mut n_gt = 0;
    for img in images {
        let m = match_class(&img.preds, &img.gts, class, thr);
        n_gt += m.gt_to_pred.len();
        scored.extend(m.scored());
    }
    ApResult {
        class,
        n_gt,
        n_pred: scored.len(),
        ap: average_precision(&scored, n_gt, interp),
    }
}

/// Mean of per-class APs, over the classes that have ground truth.
pub fn mean_ap<C>(per_class: Vec<ApResult<C>>) -> Result<MapResult<C>> {
    let included: Vec<f64> = per_class
        .iter()
        .filter(|r| r.n_gt > 0)
        .filter_map(|r| r.ap)
        .collect();
    if included.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    Ok(MapResult {
        map: included.iter().sum::<f64>() / included.len() as f64,
        n: included.len(),
        per_class,
    })
}

pub fn map_at<C: ClassLabel>(
    images: &[EvalImage<C>],
    thr: f64,
    interp: ApInterp,
) -> Result<MapResult<C>> {
    mean_ap(
        C::ALL
            .iter()
            .map(|&c| class_ap(images, c, thr, interp))
            .collect(),
    )
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// mAP averaged over [`coco_thresholds`]; per-class APs are the
/// per-threshold means.
pub fn map_range<C: ClassLabel>(images: &[EvalImage<C>], interp: ApInterp) -> Result<MapResult<C>> {
    let runs: Vec<MapResult<C>> = coco_thresholds()
        .iter()
        .map(|&t| map_at(images, t, interp))
        .collect::<Result<_>>()?;
    let k = runs.len() as f64;
    let per_class = (0..C::ALL.len())
        .map(|i| {
            let first = &runs[0].per_class[i];
            let ap = first.ap.map(|_| {
                runs.iter()
                    .map(|r| r.per_class[i].ap.unwrap_or(0.0))
                    .sum::<f64>()
                    / k
            });
            ApResult {
                class: first.class,
                n_gt: first.n_gt,
                n_pred: first.n_pred,
                ap,
            }
        })
        .collect();
    Ok(MapResult {
        map: runs.iter().map(|r| r.map).sum::<f64>() / k,
        n: runs[0].n,
        per_class,
    })
}

/// Precision and recall of one class at IoU `thr`, counting only
/// predictions with confidence >= `conf_thr`.
pub fn precision_recall<C: ClassLabel>(
    images: &[EvalImage<C>],
    class: C,
    thr: f64,
    conf_thr: f64,
) -> (f64, f64) {
    let (mut tp, mut n_pred, mut n_gt) = (0, 0, 0);
    for img in images {
        let preds: Vec<_> = img
            .preds
            .iter()
            .filter(|d| d.confidence >= conf_thr)
            .copied()
            .collect();
        let m = match_class(&preds, &img.gts, class, thr);
        tp += m.tp();
        n_pred += m.pred_to_gt.len();
        n_gt += m.gt_to_pred.len();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(tp, n_pred), ratio(tp, n_gt))
}

/// One row of the per-class results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionRow {
    pub class: String,
    pub labels: usize,
    pub precision: f64,
    pub recall: f64,
    pub map50: f64,
    pub map50_95: f64,
}

/// `all` row followed by one row per class that has ground truth.
pub fn detection_table<C: ClassLabel>(
    images: &[EvalImage<C>],
    conf_thr: f64,
    interp: ApInterp,
) -> Result<Vec<DetectionRow>> {
    let at50 = map_at(images, 0.5, interp)?;
    let range = map_range(images, interp)?;
    let mut rows = Vec::new();
    for (a, r) in at50.per_class.iter().zip(&range.per_class) {
        if a.n_gt == 0 {
            continue;
        }
        let (p, rec) = precision_recall(images, a.class, 0.5, conf_thr);
        rows.push(DetectionRow {
            class: a.class.code().to_string(),
            labels: a.n_gt,
            precision: p,
            recall: rec,
            map50: a.ap.unwrap_or(0.0),
            map50_95: r.ap.unwrap_or(0.0),
        });
    }
    let n = rows.len() as f64;
    let all = DetectionRow {
        class: "all".into(),
        labels: rows.iter().map(|r| r.labels).sum(),
        precision: rows.iter().map(|r| r.precision).sum::<f64>() / n,
        recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
        map50: at50.map,
        map50_95: range.map,
    };
    rows.insert(0, all);
    Ok(rows)
}

/// Rows are ground-truth classes, columns predicted classes; the last row
/// and column are background.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<u32>>,
}

impl ConfusionMatrix {
    pub fn new<C: ClassLabel>() -> Self {
        let mut labels: Vec<String> = C::ALL.iter().map(|c| c.code().to_string()).collect();
        labels.push("background".into());
        let n = labels.len();
        ConfusionMatrix {
            labels,
            matrix: vec![vec![0; n]; n],
        }
    }

    pub fn background(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn get(&self, gt: usize, pred: usize) -> u32 {
        self.matrix[gt][pred]
    }

    /// Accumulate one image.
    pub fn add<C: ClassLabel>(&mut self, preds: &[Detection<C>], gts: &[Detection<C>], thr: f64) {
        let bg = self.background();
        let m = match_detections(preds, gts, thr);
        for (p, g) in m.pred_to_gt.iter().enumerate() {
            let col = preds[p].label.index();
            let row = g.map_or(bg, |g| gts[g].label.index());
            self.matrix[row][col] += 1;
        }
        for (g, p) in m.gt_to_pred.iter().enumerate() {
            if p.is_none() {
                self.matrix[gts[g].label.index()][bg] += 1;
            }
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| i == j || v == 0))
    }
}

/// Class-agnostic IoU matching, then label comparison.
pub fn detection_confusion<C: ClassLabel>(
    preds: &[Detection<C>],
    gts: &[Detection<C>],
    thr: f64,
) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new::<C>();
    cm.add(preds, gts, thr);
    cm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DamageClass as D;

    fn corner_box(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1).unwrap()
    }

    fn det(c: D, b: BoundingBox, conf: f64) -> Detection<D> {
        Detection::new(c, b, conf).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = corner_box(0.1, 0.1, 0.3, 0.4);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &corner_box(0.5, 0.5, 0.7, 0.7)), 0.0);
        let v = iou(
            &corner_box(0.0, 0.0, 0.2, 0.2),
            &corner_box(0.1, 0.1, 0.3, 0.3),
        );
        assert!((v - 1.0 / 7.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn match_examples() {
        let g = corner_box(0.1, 0.1, 0.3, 0.3);
        let m = match_boxes(&[(0.9, g)], &[g], 0.5);
        assert_eq!((m.tp(), m.fp(), m.fn_count()), (1, 0, 0));

        let m = match_boxes(&[(0.8, g), (0.9, g)], &[g], 0.5);
        assert_eq!(m.pred_to_gt, vec![None, Some(0)]);

        // IoU 1/7 below threshold
        let p = corner_box(0.0, 0.0, 0.2, 0.2);
        let m = match_boxes(&[(0.9, p)], &[g], 0.5);
        assert_eq!((m.tp(), m.fp(), m.fn_count()), (0, 1, 1));
    }

    #[test]
    fn ap_examples() {
        let s = |c: f64, tp: bool| ScoredPred { confidence: c, tp };
        assert_eq!(
            average_precision(&[s(0.9, true)], 1, ApInterp::Continuous),
            Some(1.0)
        );
        assert_eq!(
            average_precision(&[s(0.9, true), s(0.8, false)], 1, ApInterp::Continuous),
            Some(1.0)
        );
        assert_eq!(
            average_precision(&[s(0.9, false), s(0.8, true)], 1, ApInterp::Continuous),
            Some(0.5)
        );
        assert_eq!(average_precision(&[], 0, ApInterp::Continuous), None);
        assert_eq!(
            average_precision(&[s(0.5, false)], 0, ApInterp::Continuous),
            Some(0.0)
        );
        assert_eq!(average_precision(&[], 3, ApInterp::Continuous), Some(0.0));
        // 11-point: [FP, TP] with one GT -> 0.5 at every level
        let v =
            average_precision(&[s(0.9, false), s(0.8, true)], 1, ApInterp::ElevenPoint).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        // half recall, perfect precision: levels 0..0.5 -> 1, rest 0
        let v = average_precision(&[s(0.9, true)], 2, ApInterp::ElevenPoint).unwrap();
        assert!((v - 6.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn map_examples() {
        let b1 = corner_box(0.1, 0.1, 0.3, 0.3);
        let b2 = corner_box(0.5, 0.5, 0.7, 0.7);
        // Green: perfect. NF: one FP above the TP -> AP 0.5.
        let img = EvalImage {
            preds: vec![
                det(D::Green, b1, 0.9),
                det(D::NormalFracture, b1, 0.95),
                det(D::NormalFracture, b2, 0.6),
            ],
            gts: vec![det(D::Green, b1, 1.0), det(D::NormalFracture, b2, 1.0)],
        };
        let m = map_at(std::slice::from_ref(&img), 0.5, ApInterp::Continuous).unwrap();
        assert_eq!(m.n, 2);
        assert!((m.map - 0.75).abs() < 1e-15);
        let r = map_range(&[img], ApInterp::Continuous).unwrap();
        assert!((r.map - 0.75).abs() < 1e-12);

        let single = EvalImage {
            preds: vec![det(D::Green, b1, 0.9)],
            gts: vec![det(D::Green, b1, 1.0)],
        };
        assert_eq!(
            map_at(std::slice::from_ref(&single), 0.5, ApInterp::Continuous)
                .unwrap()
                .map,
            1.0
        );
        assert_eq!(map_range(&[single], ApInterp::Continuous).unwrap().map, 1.0);

        let empty = EvalImage::<D> {
            preds: vec![det(D::Green, b1, 0.9)],
            gts: vec![],
        };
        assert!(matches!(
            map_at(&[empty], 0.5, ApInterp::Continuous),
            Err(Error::NoGroundTruth)
        ));
    }

    #[test]
    fn confusion_examples() {
        let b1 = corner_box(0.1, 0.1, 0.3, 0.3);
        let b2 = corner_box(0.5, 0.5, 0.7, 0.7);
        let gts = vec![det(D::Green, b1, 1.0), det(D::Missing, b2, 1.0)];
        let cm = detection_confusion(&gts, &gts, 0.5);
        assert!(cm.is_diagonal());
        assert_eq!(cm.get(D::Green.index(), D::Green.index()), 1);

        let cm = detection_confusion(&[det(D::LowThermal, b1, 0.7)], &[], 0.5);
        assert_eq!(cm.get(cm.background(), D::LowThermal.index()), 1);

        // pred M_Th over GT NF with IoU 0.8
        let gt = corner_box(0.1, 0.1, 0.3, 0.3);
        let pred = corner_box(0.1, 0.1, 0.3, 0.26);
        assert!((iou(&gt, &pred) - 0.8).abs() < 1e-12);
        let cm = detection_confusion(
            &[det(D::MediumThermal, pred, 0.9)],
            &[det(D::NormalFracture, gt, 1.0)],
            0.5,
        );
        assert_eq!(
            cm.get(D::NormalFracture.index(), D::MediumThermal.index()),
            1
        );
        // unmatched GT goes to the background column
        let cm = detection_confusion(&[], &[det(D::NormalFracture, gt, 1.0)], 0.5);
        assert_eq!(cm.get(D::NormalFracture.index(), cm.background()), 1);
    }

    #[test]
    fn table_has_all_row() {
        let b1 = corner_box(0.1, 0.1, 0.3, 0.3);
        let img = EvalImage {
            preds: vec![det(D::Green, b1, 0.9), det(D::Missing, b1, 0.1)],
            gts: vec![det(D::Green, b1, 1.0)],
        };
        let rows = detection_table(&[img], 0.25, ApInterp::Continuous).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].class, "all");
        assert_eq!(rows[1].class, "G_G");
        assert_eq!((rows[1].precision, rows[1].recall), (1.0, 1.0));
        assert_eq!(
            "11point".parse::<ApInterp>().unwrap(),
            ApInterp::ElevenPoint
        );
        assert!("vo".parse::<ApInterp>().is_err());
    }
}
