//! Non-maximum suppression, matching, average precision, the upper-bound
//! study and the occupancy predicate.

mod ap;
mod occupancy;
mod study;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FrameRecord;
use crate::error::{Error, Result};
use crate::geometry::Bounds;
use crate::representations::{
    convert_mask, mask_to_bounding_box, representation_iou, ClassLabel, InstanceMask, IouConfig,
    Representation, RepresentationSpec,
};

pub use ap::{average_precision_exact, average_precision_f64, average_precision_ranked};
pub use occupancy::{occupancy_predicate, region_overlap_fraction, Occupancy, OccupancyConfig};
pub use study::{upper_bound_study, UpperBoundTable};

/// One predicted object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", try_from = "RawDetection")]
pub struct Detection {
    /// Tie-break key; unique within a frame.
    pub id: u64,
    pub frame_id: String,
    pub class: ClassLabel,
    pub confidence: f64,
    pub representation: Representation,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawDetection {
    id: u64,
    frame_id: String,
    class: ClassLabel,
    confidence: f64,
    representation: Representation,
}

impl TryFrom<RawDetection> for Detection {
    type Error = Error;
    fn try_from(r: RawDetection) -> Result<Self> {
        Detection::new(r.id, r.frame_id, r.class, r.confidence, r.representation)
    }
}

impl Detection {
    pub fn new(
        id: u64,
        frame_id: impl Into<String>,
        class: ClassLabel,
        confidence: f64,
        representation: Representation,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::precondition(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            id,
            frame_id: frame_id.into(),
            class,
            confidence,
            representation,
        })
    }
}

/// Descending confidence, then ascending id.
fn rank_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.confidence.total_cmp(&a.confidence).then(a.id.cmp(&b.id))
}

fn rep_bounds(r: &Representation) -> Option<Bounds> {
    r.enclosing_box().map(|b| b.bounds())
}

fn mask_bounds(m: &InstanceMask) -> Option<Bounds> {
    m.grid().occupied_bounds().map(|(x0, y0, x1, y1)| Bounds {
        min_x: x0 as f64,
        min_y: y0 as f64,
        max_x: (x1 + 1) as f64,
        max_y: (y1 + 1) as f64,
    })
}

fn disjoint(a: Option<Bounds>, b: Option<Bounds>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => {
            a.max_x < b.min_x || b.max_x < a.min_x || a.max_y < b.min_y || b.max_y < a.min_y
        }
        _ => true,
    }
}

fn pair_iou(a: &Representation, b: &Representation, cfg: &IouConfig) -> Result<f64> {
    if disjoint(rep_bounds(a), rep_bounds(b)) {
        return Ok(0.0);
    }
    representation_iou(a.into(), b.into(), cfg)
}

/// Greedy per-class suppression. Detections are visited by descending
/// confidence (ties by id) and kept when their IoU with every kept detection
/// of the same class is below `iou_threshold`. The result is in visiting
/// order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Result<Vec<Detection>> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::precondition(format!(
            "NMS threshold {iou_threshold} outside (0, 1)"
        )));
    }
    if let Some(first) = dets.first() {
        if dets.iter().any(|d| d.frame_id != first.frame_id) {
            return Err(Error::precondition("NMS input mixes frames"));
        }
    }
    let cfg = IouConfig::default();
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| rank_order(a, b));
    let mut kept: Vec<&Detection> = Vec::new();
    for d in order {
        let mut keep = true;
        for k in kept.iter().filter(|k| k.class == d.class) {
            if pair_iou(&k.representation, &d.representation, &cfg)? >= iou_threshold {
                keep = false;
                break;
            }
        }
        if keep {
            kept.push(d);
        }
    }
    Ok(kept.into_iter().cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EvalMode {
    /// Against the truth mask converted to the detection's representation.
    #[default]
    RepVsRep,
    /// Against the truth mask itself.
    RepVsInstance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub mode: EvalMode,
    /// Sub-cells per mask pixel in the raster IoU.
    pub supersample: usize,
    /// In rep-vs-rep mode, score polygon detections by their enclosing box
    /// against the truth's bounding box.
    pub polygon_box_mode: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            mode: EvalMode::RepVsRep,
            supersample: 4,
            polygon_box_mode: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::precondition(format!(
                "IoU threshold {} outside (0, 1)",
                self.iou_threshold
            )));
        }
        if self.supersample == 0 {
            return Err(Error::precondition("supersampling factor must be positive"));
        }
        Ok(())
    }

    fn iou_config(&self) -> IouConfig {
        IouConfig {
            supersample: self.supersample,
            ..IouConfig::default()
        }
    }
}

/// A ground-truth object.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub id: u32,
    pub mask: InstanceMask,
}

/// The ground truth of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    pub frame_id: String,
    pub objects: Vec<GroundTruth>,
}

impl FrameTruth {
    pub fn from_record(record: &FrameRecord) -> Result<Self> {
        let masks = record.instance_masks()?;
        Ok(Self {
            frame_id: record.frame_id.clone(),
            objects: record
                .instances
                .iter()
                .zip(masks)
                .map(|(inst, mask)| GroundTruth { id: inst.id, mask })
                .collect(),
        })
    }
}

/// Outcome for one detection or one missed truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchRecord {
    pub frame_id: String,
    pub class: ClassLabel,
    /// Absent for a missed truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Absent for a false positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<u32>,
    /// IoU of the matched pair, or for a false positive the best IoU with a
    /// truth still unmatched when it was ranked.
    pub iou: f64,
}

impl MatchRecord {
    pub fn is_true_positive(&self) -> bool {
        self.detection.is_some() && self.truth.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Matches the detections of one frame against its truths. Per class,
/// detections in descending confidence take the unmatched truth of highest
/// IoU (ties to the lower truth id) when that IoU reaches the threshold.
pub fn match_detections(
    dets: &[Detection],
    truth: &FrameTruth,
    cfg: &EvalConfig,
) -> Result<Vec<MatchRecord>> {
    cfg.validate()?;
    if let Some(d) = dets.iter().find(|d| d.frame_id != truth.frame_id) {
        return Err(Error::precondition(format!(
            "detection {} belongs to frame {}, not {}",
            d.id, d.frame_id, truth.frame_id
        )));
    }
    let iou_cfg = cfg.iou_config();
    let mut converted: HashMap<(usize, RepresentationSpec), Representation> = HashMap::new();
    let mut records = Vec::new();
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| a.class.cmp(&b.class).then(rank_order(a, b)));
    let mut used = vec![false; truth.objects.len()];
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        let mut best_any = 0.0f64;
        for (ti, gt) in truth.objects.iter().enumerate() {
            if gt.mask.class() != d.class || used[ti] {
                continue;
            }
            let iou = truth_iou(d, ti, &gt.mask, cfg, &iou_cfg, &mut converted)?;
            best_any = best_any.max(iou);
            let better = match best {
                None => true,
                Some((bi, bv)) => iou > bv || (iou == bv && gt.id < truth.objects[bi].id),
            };
            if better {
                best = Some((ti, iou));
            }
        }
        let hit = best.filter(|(_, v)| *v >= cfg.iou_threshold);
        if let Some((ti, _)) = hit {
            used[ti] = true;
        }
        records.push(MatchRecord {
            frame_id: truth.frame_id.clone(),
            class: d.class,
            detection: Some(d.id),
            confidence: Some(d.confidence),
            truth: hit.map(|(ti, _)| truth.objects[ti].id),
            iou: hit.map(|(_, v)| v).unwrap_or(best_any),
        });
    }
    for (ti, gt) in truth.objects.iter().enumerate() {
        if !used[ti] {
            records.push(MatchRecord {
                frame_id: truth.frame_id.clone(),
                class: gt.mask.class(),
                detection: None,
                confidence: None,
                truth: Some(gt.id),
                iou: 0.0,
            });
        }
    }
    Ok(records)
}

fn truth_iou(
    d: &Detection,
    ti: usize,
    mask: &InstanceMask,
    cfg: &EvalConfig,
    iou_cfg: &IouConfig,
    cache: &mut HashMap<(usize, RepresentationSpec), Representation>,
) -> Result<f64> {
    let rep = &d.representation;
    if disjoint(rep_bounds(rep), mask_bounds(mask)) {
        return Ok(0.0);
    }
    match cfg.mode {
        EvalMode::RepVsInstance => representation_iou(rep.into(), mask.into(), iou_cfg),
        EvalMode::RepVsRep => {
            let (pred, spec) = match rep {
                Representation::Box(_) => (rep.clone(), RepresentationSpec::BoundingBox),
                Representation::OrientedBox(_) => (rep.clone(), RepresentationSpec::RotatedBox),
                Representation::Ellipse(_) => (rep.clone(), RepresentationSpec::Ellipse),
                Representation::PolarPolygon(p) => {
                    if cfg.polygon_box_mode {
                        match rep.enclosing_box() {
                            Some(b) => (b.into(), RepresentationSpec::BoundingBox),
                            None => return Ok(0.0),
                        }
                    } else {
                        (
                            rep.clone(),
                            RepresentationSpec::Polygon {
                                points: p.point_count(),
                            },
                        )
                    }
                }
            };
            let gt = match cache.get(&(ti, spec)) {
                Some(g) => g.clone(),
                None => {
                    let g = match spec {
                        RepresentationSpec::BoundingBox => mask_to_bounding_box(mask)?.into(),
                        s => convert_mask(mask, s)?,
                    };
                    cache.insert((ti, spec), g.clone());
                    g
                }
            };
            pair_iou(&pred, &gt, iou_cfg)
        }
    }
}

/// Average precision of one class over a full match list; `None` when the
/// class has no ground truth.
pub fn average_precision(matches: &[MatchRecord], class: ClassLabel) -> Option<f64> {
    let truths = matches
        .iter()
        .filter(|m| m.class == class && m.truth.is_some())
        .count();
    let mut ranked: Vec<&MatchRecord> = matches
        .iter()
        .filter(|m| m.class == class && m.detection.is_some())
        .collect();
    ranked.sort_by(|a, b| {
        b.confidence
            .unwrap_or(0.0)
            .total_cmp(&a.confidence.unwrap_or(0.0))
            .then_with(|| a.frame_id.cmp(&b.frame_id))
            .then(a.detection.cmp(&b.detection))
    });
    let hits: Vec<bool> = ranked.iter().map(|m| m.truth.is_some()).collect();
    average_precision_ranked(&hits, truths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    /// Classes with ground truth only.
    #[serde(rename = "perClassAP")]
    pub per_class_ap: BTreeMap<ClassLabel, f64>,
    #[serde(rename = "mAP")]
    pub map: f64,
    pub counts: BTreeMap<ClassLabel, MatchCounts>,
    pub matches: Vec<MatchRecord>,
}

/// Matches every frame and aggregates per class. Detections must refer to
/// frames present in `truths`.
pub fn evaluate(dets: &[Detection], truths: &[FrameTruth], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let mut by_frame: HashMap<&str, Vec<Detection>> = HashMap::new();
    let index: HashMap<&str, usize> = truths
        .iter()
        .enumerate()
        .map(|(i, t)| (t.frame_id.as_str(), i))
        .collect();
    if index.len() != truths.len() {
        return Err(Error::precondition("duplicate frame id in ground truth"));
    }
    for d in dets {
        if !index.contains_key(d.frame_id.as_str()) {
            return Err(Error::precondition(format!(
                "detection {} refers to unknown frame {}",
                d.id, d.frame_id
            )));
        }
        by_frame
            .entry(d.frame_id.as_str())
            .or_default()
            .push(d.clone());
    }
    let mut order: Vec<&FrameTruth> = truths.iter().collect();
    order.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    let per_frame: Vec<Vec<MatchRecord>> = order
        .par_iter()
        .map(|t| {
            let empty = Vec::new();
            let fd = by_frame.get(t.frame_id.as_str()).unwrap_or(&empty);
            match_detections(fd, t, cfg)
        })
        .collect::<Result<_>>()?;
    let matches: Vec<MatchRecord> = per_frame.into_iter().flatten().collect();

    let mut counts: BTreeMap<ClassLabel, MatchCounts> = BTreeMap::new();
    for m in &matches {
        let c = counts.entry(m.class).or_default();
        match (m.detection, m.truth) {
            (Some(_), Some(_)) => c.tp += 1,
            (Some(_), None) => c.fp += 1,
            (None, _) => c.fn_ += 1,
        }
    }
    let mut per_class_ap = BTreeMap::new();
    for class in ClassLabel::ALL {
        if let Some(ap) = average_precision(&matches, class) {
            per_class_ap.insert(class, ap);
        }
    }
    if per_class_ap.is_empty() {
        return Err(Error::UndefinedMap);
    }
    let map = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
    Ok(EvalReport {
        per_class_ap,
        map,
        counts,
        matches,
    })
}
