//! Candidate assignment, objectness targets and the three detector losses,
//! evaluated as plain functions (no gradients).
//!
//! * [`loss_std`]: classification over every candidate plus box regression
//!   over base-matched candidates.
//! * [`loss_oln`]: box regression and objectness over base-matched
//!   candidates only; background contributes nothing.
//! * [`loss_good`]: the same form as `loss_oln`, summed over base- and
//!   pseudo-matched candidates.
//!
//! `L_cls` is binary cross-entropy, `L_reg` the mean absolute error of the
//! four corners normalized by image size, and `L_obj` the absolute error.
//! Empty sums are 0.

use serde::{Deserialize, Serialize};

use crate::dataset::ImageInfo;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::pseudolabel::AnnotationPool;

pub const DEFAULT_POSITIVE_IOU: f64 = 0.5;

/// Lower bound on the argument of `ln` inside the cross-entropy.
pub const BCE_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: u64,
    /// Anchor or proposal box used for matching.
    pub anchor: BBox,
    /// Predicted foreground probability.
    pub label_prob: f64,
    /// Regressed box.
    pub predicted_box: BBox,
    pub objectness: f64,
}

impl Candidate {
    pub fn new(
        candidate_id: u64,
        anchor: BBox,
        label_prob: f64,
        predicted_box: BBox,
        objectness: f64,
    ) -> Result<Self> {
        for (name, v) in [("label_prob", label_prob), ("objectness", objectness)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!(
                    "candidate {candidate_id}: {name} {v} is outside [0, 1]"
                )));
            }
        }
        Ok(Candidate {
            candidate_id,
            anchor,
            label_prob,
            predicted_box,
            objectness,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "id")]
pub enum MatchLabel {
    Base(u64),
    Pseudo(u64),
    Background,
}

/// Regression and objectness targets of a matched candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub bbox: BBox,
    pub objectness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedCandidate {
    pub candidate: Candidate,
    pub label: MatchLabel,
    /// 1 for base matches, 0 otherwise.
    pub label_target: f64,
    pub target: Option<Target>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub image_width: f64,
    pub image_height: f64,
    pub entries: Vec<AssignedCandidate>,
}

impl Assignment {
    pub fn n_cls(&self) -> usize {
        self.entries.len()
    }

    pub fn base_matched(&self) -> impl Iterator<Item = &AssignedCandidate> {
        self.entries
            .iter()
            .filter(|e| matches!(e.label, MatchLabel::Base(_)))
    }

    pub fn pseudo_matched(&self) -> impl Iterator<Item = &AssignedCandidate> {
        self.entries
            .iter()
            .filter(|e| matches!(e.label, MatchLabel::Pseudo(_)))
    }

    pub fn any_matched(&self) -> impl Iterator<Item = &AssignedCandidate> {
        self.entries
            .iter()
            .filter(|e| !matches!(e.label, MatchLabel::Background))
    }

    /// `|B_K|`, the normalizer of the standard and OLN losses.
    pub fn n_reg_base(&self) -> usize {
        self.base_matched().count()
    }

    /// `|B_K ∪ B_N|`, the normalizer of the GOOD loss.
    pub fn n_reg_all(&self) -> usize {
        self.any_matched().count()
    }
}

/// Centerness of `location` inside `target`:
/// `sqrt(min(l,r)/max(l,r) * min(t,b)/max(t,b))`.
pub fn centerness(location: (f64, f64), target: &BBox) -> Result<f64> {
    let (x, y) = location;
    if !target.contains_point(x, y) {
        return Err(Error::validation(format!(
            "location ({x}, {y}) lies outside box [{}, {}, {}, {}]",
            target.x1, target.y1, target.x2, target.y2
        )));
    }
    let ratio = |a: f64, b: f64| {
        let hi = a.max(b);
        if hi > 0.0 {
            a.min(b) / hi
        } else {
            0.0
        }
    };
    let horizontal = ratio(x - target.x1, target.x2 - x);
    let vertical = ratio(y - target.y1, target.y2 - y);
    Ok((horizontal * vertical).sqrt())
}

/// Objectness target of `anchor` against its matched box: the same
/// `sqrt(centerness * IoU)` form used to rank proposals, with centerness
/// taken at the anchor center (0 when the center falls outside).
pub fn objectness_target(anchor: &BBox, matched: &BBox) -> f64 {
    let c = centerness(anchor.center(), matched).unwrap_or(0.0);
    (c * anchor.iou(matched)).sqrt()
}

/// Matches each candidate to the base or pseudo box of maximal IoU on
/// `image`, provided that IoU reaches `positive_iou`. Ties prefer base
/// annotations, then earlier pool entries. Crowd annotations never match.
pub fn assign(
    image: &ImageInfo,
    candidates: &[Candidate],
    pool: &AnnotationPool,
    positive_iou: f64,
) -> Result<Assignment> {
    if !(positive_iou > 0.0 && positive_iou <= 1.0) {
        return Err(Error::validation(format!(
            "positive IoU threshold {positive_iou} must lie in (0, 1]"
        )));
    }
    let base: Vec<_> = pool
        .base_for_image(image.id)
        .filter(|a| !a.is_crowd)
        .collect();
    let pseudo: Vec<_> = pool.pseudo_for_image(image.id).collect();

    let entries = candidates
        .iter()
        .map(|cand| {
            let mut best: Option<(f64, MatchLabel, BBox)> = None;
            let mut consider = |iou: f64, label: MatchLabel, bbox: BBox| {
                if iou >= positive_iou && best.is_none_or(|(b, _, _)| iou > b) {
                    best = Some((iou, label, bbox));
                }
            };
            for a in &base {
                consider(cand.anchor.iou(&a.bbox), MatchLabel::Base(a.annotation_id), a.bbox);
            }
            for p in &pseudo {
                consider(cand.anchor.iou(&p.bbox), MatchLabel::Pseudo(p.pseudo_id), p.bbox);
            }
            match best {
                Some((_, label, bbox)) => AssignedCandidate {
                    candidate: cand.clone(),
                    label,
                    label_target: if matches!(label, MatchLabel::Base(_)) { 1.0 } else { 0.0 },
                    target: Some(Target {
                        bbox,
                        objectness: objectness_target(&cand.anchor, &bbox),
                    }),
                },
                None => AssignedCandidate {
                    candidate: cand.clone(),
                    label: MatchLabel::Background,
                    label_target: 0.0,
                    target: None,
                },
            }
        })
        .collect();

    Ok(Assignment {
        image_width: image.width,
        image_height: image.height,
        entries,
    })
}

pub fn binary_cross_entropy(p: f64, target: f64) -> f64 {
    let q = if target >= 0.5 { p } else { 1.0 - p };
    -q.max(BCE_LOG_FLOOR).ln()
}

/// Mean absolute corner error with x normalized by width and y by height.
pub fn box_l1(pred: &BBox, target: &BBox, width: f64, height: f64) -> f64 {
    let w = if width > 0.0 { width } else { 1.0 };
    let h = if height > 0.0 { height } else { 1.0 };
    ((pred.x1 - target.x1).abs() / w
        + (pred.y1 - target.y1).abs() / h
        + (pred.x2 - target.x2).abs() / w
        + (pred.y2 - target.y2).abs() / h)
        / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdLoss {
    pub cls: f64,
    pub reg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectnessLoss {
    pub reg: f64,
    pub obj: f64,
    pub total: f64,
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn reg_term(a: &Assignment, e: &AssignedCandidate) -> f64 {
    let t = e.target.expect("matched candidate carries a target");
    box_l1(&e.candidate.predicted_box, &t.bbox, a.image_width, a.image_height)
}

fn obj_term(e: &AssignedCandidate) -> f64 {
    let t = e.target.expect("matched candidate carries a target");
    (e.candidate.objectness - t.objectness).abs()
}

pub fn loss_std(a: &Assignment) -> StdLoss {
    let cls_sum: f64 = a
        .entries
        .iter()
        .map(|e| binary_cross_entropy(e.candidate.label_prob, e.label_target))
        .sum();
    let reg_sum: f64 = a.base_matched().map(|e| reg_term(a, e)).sum();
    let cls = mean(cls_sum, a.n_cls());
    let reg = mean(reg_sum, a.n_reg_base());
    StdLoss {
        cls,
        reg,
        total: cls + reg,
    }
}

fn objectness_loss<'a>(
    a: &'a Assignment,
    members: impl Iterator<Item = &'a AssignedCandidate>,
) -> ObjectnessLoss {
    let (mut reg_sum, mut obj_sum, mut n) = (0.0, 0.0, 0usize);
    for e in members {
        reg_sum += reg_term(a, e);
        obj_sum += obj_term(e);
        n += 1;
    }
    let reg = mean(reg_sum, n);
    let obj = mean(obj_sum, n);
    ObjectnessLoss {
        reg,
        obj,
        total: reg + obj,
    }
}

pub fn loss_oln(a: &Assignment) -> ObjectnessLoss {
    objectness_loss(a, a.base_matched())
}

pub fn loss_good(a: &Assignment) -> ObjectnessLoss {
    objectness_loss(a, a.any_matched())
}
