//! Pseudo-box pool construction from proposal-network outputs.
//!
//! The pipeline per modality is score → filter against base ground truth →
//! top-k per image; sources are then merged with greedy descending-objectness
//! suppression and appended to the base annotations as an
//! [`AnnotationPool`].
//!
//! Everything here is per image. Outputs are canonically ordered by
//! ascending image id, then descending objectness, so results do not depend
//! on how images were scheduled across threads.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, GroundTruthAnnotation};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Default IoU above which a proposal counts as covering a base annotation.
pub const DEFAULT_GT_FILTER_IOU: f64 = 0.5;
/// Default IoU above which two pseudo boxes from different sources overlap.
pub const DEFAULT_MERGE_IOU: f64 = 0.5;

/// A scored proposal from a Phase-I network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub image_id: u64,
    pub bbox: BBox,
    pub centerness: Option<f64>,
    pub iou_score: Option<f64>,
    pub objectness: f64,
    pub source: String,
}

fn check_unit(name: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::validation(format!("{name} {v} is outside [0, 1]")))
    }
}

impl Proposal {
    /// Proposal whose objectness is derived from its two sub-scores.
    pub fn with_subscores(
        image_id: u64,
        bbox: BBox,
        centerness: f64,
        iou_score: f64,
        source: impl Into<String>,
    ) -> Result<Self> {
        let centerness = check_unit("centerness", centerness)?;
        let iou_score = check_unit("iou score", iou_score)?;
        Ok(Proposal {
            image_id,
            bbox,
            centerness: Some(centerness),
            iou_score: Some(iou_score),
            objectness: objectness_score(centerness, iou_score),
            source: source.into(),
        })
    }

    /// Proposal from an external detector that emits a single combined score.
    pub fn with_score(
        image_id: u64,
        bbox: BBox,
        objectness: f64,
        source: impl Into<String>,
    ) -> Result<Self> {
        Ok(Proposal {
            image_id,
            bbox,
            centerness: None,
            iou_score: None,
            objectness: check_unit("objectness", objectness)?,
            source: source.into(),
        })
    }
}

/// A proposal promoted to a training annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoBox {
    pub pseudo_id: u64,
    pub image_id: u64,
    pub bbox: BBox,
    pub objectness: f64,
    pub source: String,
}

/// Base annotations plus accepted pseudo boxes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationPool {
    pub base: Vec<GroundTruthAnnotation>,
    pub pseudo: Vec<PseudoBox>,
}

impl AnnotationPool {
    /// Checks that no pseudo box overlaps a non-crowd base annotation on its
    /// image by more than `gt_filter_iou`.
    pub fn verify(&self, gt_filter_iou: f64) -> Result<()> {
        let gt = non_crowd_boxes(&self.base);
        for p in &self.pseudo {
            let worst = gt
                .get(&p.image_id)
                .map(|boxes| boxes.iter().map(|b| b.iou(&p.bbox)).fold(0.0, f64::max))
                .unwrap_or(0.0);
            if worst > gt_filter_iou {
                return Err(Error::Invariant(format!(
                    "pseudo box {} on image {} overlaps base ground truth with IoU {worst:.4} > {gt_filter_iou}",
                    p.pseudo_id, p.image_id
                )));
            }
        }
        Ok(())
    }

    pub fn base_for_image(&self, image_id: u64) -> impl Iterator<Item = &GroundTruthAnnotation> {
        self.base.iter().filter(move |a| a.image_id == image_id)
    }

    pub fn pseudo_for_image(&self, image_id: u64) -> impl Iterator<Item = &PseudoBox> {
        self.pseudo.iter().filter(move |p| p.image_id == image_id)
    }
}

/// `sqrt(centerness * iou)`.
pub fn objectness_score(centerness: f64, iou: f64) -> f64 {
    (centerness * iou).sqrt()
}

fn non_crowd_boxes(annotations: &[GroundTruthAnnotation]) -> HashMap<u64, Vec<BBox>> {
    let mut map: HashMap<u64, Vec<BBox>> = HashMap::new();
    for a in annotations.iter().filter(|a| !a.is_crowd) {
        map.entry(a.image_id).or_default().push(a.bbox);
    }
    map
}

/// Drops proposals whose IoU with some non-crowd base annotation on the same
/// image exceeds `threshold`. Order is preserved.
pub fn filter_against_gt(
    proposals: &[Proposal],
    base: &[GroundTruthAnnotation],
    threshold: f64,
) -> Vec<Proposal> {
    let gt = non_crowd_boxes(base);
    proposals
        .iter()
        .filter(|p| match gt.get(&p.image_id) {
            Some(boxes) => boxes.iter().all(|b| b.iou(&p.bbox) <= threshold),
            None => true,
        })
        .cloned()
        .collect()
}

fn by_objectness_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Keeps the `k` highest-objectness proposals per image, ties by input
/// order. Zero-objectness proposals are never promoted. Output is in
/// canonical order and numbered from 1.
pub fn top_k(proposals: &[Proposal], k: usize) -> Vec<PseudoBox> {
    let groups: Vec<(u64, Vec<&Proposal>)> = crate::dataset::group_by_image(proposals, |p| p.image_id)
        .into_iter()
        .collect();
    let per_image: Vec<Vec<PseudoBox>> = groups
        .par_iter()
        .map(|(_, props)| {
            let mut ranked: Vec<&Proposal> =
                props.iter().copied().filter(|p| p.objectness > 0.0).collect();
            ranked.sort_by(|a, b| by_objectness_desc(a.objectness, b.objectness));
            ranked
                .into_iter()
                .take(k)
                .map(|p| PseudoBox {
                    pseudo_id: 0,
                    image_id: p.image_id,
                    bbox: p.bbox,
                    objectness: p.objectness,
                    source: p.source.clone(),
                })
                .collect()
        })
        .collect();
    renumber(per_image)
}

fn renumber(per_image: Vec<Vec<PseudoBox>>) -> Vec<PseudoBox> {
    per_image
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(i, mut p)| {
            p.pseudo_id = i as u64 + 1;
            p
        })
        .collect()
}

/// Merges pseudo boxes from several sources. Per image, boxes are visited by
/// descending objectness (ties by source order, then input order) and kept
/// iff their IoU with every already-kept box is at most `iou_threshold`.
pub fn merge_sources(sources: &[(String, Vec<PseudoBox>)], iou_threshold: f64) -> Vec<PseudoBox> {
    let mut groups: BTreeMap<u64, Vec<&PseudoBox>> = BTreeMap::new();
    for (_, boxes) in sources {
        for b in boxes {
            groups.entry(b.image_id).or_default().push(b);
        }
    }
    let groups: Vec<Vec<&PseudoBox>> = groups.into_values().collect();
    let per_image: Vec<Vec<PseudoBox>> = groups
        .into_par_iter()
        .map(|mut boxes| {
            boxes.sort_by(|a, b| by_objectness_desc(a.objectness, b.objectness));
            let mut kept: Vec<PseudoBox> = Vec::new();
            for b in boxes {
                if kept.iter().all(|k| k.bbox.iou(&b.bbox) <= iou_threshold) {
                    kept.push(b.clone());
                }
            }
            kept
        })
        .collect();
    renumber(per_image)
}

/// Assembles the Phase-II supervision pool and re-checks the overlap
/// invariant.
pub fn build_pool(
    ds_train: &Dataset,
    merged: &[PseudoBox],
    gt_filter_iou: f64,
) -> Result<AnnotationPool> {
    let images: HashSet<u64> = ds_train.images.iter().map(|i| i.id).collect();
    if let Some(p) = merged.iter().find(|p| !images.contains(&p.image_id)) {
        return Err(Error::validation(format!(
            "pseudo box {} references image {} outside the training set",
            p.pseudo_id, p.image_id
        )));
    }
    let pool = AnnotationPool {
        base: ds_train.annotations.clone(),
        pseudo: merged.to_vec(),
    };
    pool.verify(gt_filter_iou)?;
    Ok(pool)
}

/// Full per-modality pipeline: filter against base GT, then top-k.
pub fn pseudo_label_source(
    proposals: &[Proposal],
    base: &[GroundTruthAnnotation],
    k: usize,
    gt_filter_iou: f64,
) -> Vec<PseudoBox> {
    top_k(&filter_against_gt(proposals, base, gt_filter_iou), k)
}
