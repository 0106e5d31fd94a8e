//! Class-agnostic average recall with the open-world novel-class protocol.
//!
//! Matching is greedy per image: detections are visited by descending score
//! (ties by input order) and each takes the unmatched non-crowd ground truth
//! of highest IoU at or above the threshold. A detection that only covers a
//! crowd region is ignored: it neither counts as recall nor uses budget.
//!
//! For the novel-class numbers, every detection whose IoU with some
//! base-class annotation reaches `base_association_iou` is removed before
//! budgeting, then the remaining detections are matched against novel-class
//! ground truth only. Size strata are assigned by ground-truth area.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassSplit, Dataset, GroundTruthAnnotation};
use crate::error::{Error, Result};
use crate::geometry::{BBox, SizeClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub bbox: BBox,
    pub score: f64,
}

impl Detection {
    pub fn new(image_id: u64, bbox: BBox, score: f64) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::validation(format!(
                "detection on image {image_id} has non-finite score {score}"
            )));
        }
        Ok(Detection {
            image_id,
            bbox,
            score,
        })
    }
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn default_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub budget: usize,
    pub iou_thresholds: Vec<f64>,
    pub base_association_iou: f64,
    pub size_strata: bool,
    pub per_class_budget: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            budget: 100,
            iou_thresholds: default_iou_thresholds(),
            base_association_iou: 0.5,
            size_strata: true,
            per_class_budget: 5,
        }
    }
}

impl EvalConfig {
    pub fn with_budget(budget: usize) -> Self {
        EvalConfig {
            budget,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.per_class_budget == 0 {
            return Err(Error::validation("detection budget must be at least 1"));
        }
        if self.iou_thresholds.is_empty() {
            return Err(Error::validation("at least one IoU threshold is required"));
        }
        let mut prev = 0.0;
        for &t in &self.iou_thresholds {
            if !(t > prev && t <= 1.0) {
                return Err(Error::validation(format!(
                    "IoU thresholds must be strictly increasing in (0, 1], got {:?}",
                    self.iou_thresholds
                )));
            }
            prev = t;
        }
        if !(self.base_association_iou > 0.0 && self.base_association_iou <= 1.0) {
            return Err(Error::validation(format!(
                "base association IoU {} must lie in (0, 1]",
                self.base_association_iou
            )));
        }
        Ok(())
    }
}

/// Ground-truth total and per-threshold matched counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallCounts {
    pub total: u64,
    pub matched: Vec<u64>,
}

impl RecallCounts {
    pub fn zeros(n_thresholds: usize) -> Self {
        RecallCounts {
            total: 0,
            matched: vec![0; n_thresholds],
        }
    }

    fn add(&mut self, other: &RecallCounts) {
        self.total += other.total;
        for (m, o) in self.matched.iter_mut().zip(&other.matched) {
            *m += o;
        }
    }

    pub fn recall_at(&self, threshold_index: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched[threshold_index] as f64 / self.total as f64
        }
    }

    /// Mean recall over thresholds; 0 when there is no ground truth.
    pub fn average_recall(&self) -> f64 {
        if self.total == 0 || self.matched.is_empty() {
            return 0.0;
        }
        let sum: f64 = (0..self.matched.len()).map(|i| self.recall_at(i)).sum();
        sum / self.matched.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct GtEntry {
    bbox: BBox,
    crowd: bool,
    size: SizeClass,
    category: u64,
}

impl From<&GroundTruthAnnotation> for GtEntry {
    fn from(a: &GroundTruthAnnotation) -> Self {
        GtEntry {
            bbox: a.bbox,
            crowd: a.is_crowd,
            size: a.bbox.size_class(),
            category: a.category_id,
        }
    }
}

/// Detections of one image in ranking order, with their IoU against every
/// ground truth of the image.
struct RankedImage {
    n_dets: usize,
    gts: Vec<GtEntry>,
    ious: Vec<f64>,
}

impl RankedImage {
    fn new(dets: &[BBox], gts: Vec<GtEntry>) -> Self {
        let mut ious = Vec::with_capacity(dets.len() * gts.len());
        for d in dets {
            ious.extend(gts.iter().map(|g| d.iou(&g.bbox)));
        }
        RankedImage {
            n_dets: dets.len(),
            gts,
            ious,
        }
    }

    /// Greedy matching restricted to the ground truths in `subset`. Returns a
    /// matched flag per element of `subset`.
    fn greedy_match(&self, subset: &[usize], iou_t: f64, budget: usize) -> Vec<bool> {
        let n_gt = self.gts.len();
        let mut matched = vec![false; subset.len()];
        let mut used = 0;
        for d in 0..self.n_dets {
            if used >= budget {
                break;
            }
            let row = &self.ious[d * n_gt..(d + 1) * n_gt];
            let mut best: Option<(usize, f64)> = None;
            let mut covers_crowd = false;
            for (slot, &g) in subset.iter().enumerate() {
                let iou = row[g];
                if iou < iou_t {
                    continue;
                }
                if self.gts[g].crowd {
                    covers_crowd = true;
                } else if !matched[slot] && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((slot, iou));
                }
            }
            match best {
                Some((slot, _)) => {
                    matched[slot] = true;
                    used += 1;
                }
                None if covers_crowd => {}
                None => used += 1,
            }
        }
        matched
    }

    fn counts(&self, subset: &[usize], thresholds: &[f64], budget: usize) -> StratifiedCounts {
        let mut out = StratifiedCounts::zeros(thresholds.len());
        for &g in subset {
            if !self.gts[g].crowd {
                out.all.total += 1;
                out.by_size[self.gts[g].size.index()].total += 1;
            }
        }
        if out.all.total == 0 {
            return out;
        }
        for (t, &iou_t) in thresholds.iter().enumerate() {
            let matched = self.greedy_match(subset, iou_t, budget);
            for (slot, &m) in matched.iter().enumerate() {
                if m {
                    out.all.matched[t] += 1;
                    out.by_size[self.gts[subset[slot]].size.index()].matched[t] += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct StratifiedCounts {
    all: RecallCounts,
    by_size: [RecallCounts; 3],
}

impl StratifiedCounts {
    fn zeros(n: usize) -> Self {
        StratifiedCounts {
            all: RecallCounts::zeros(n),
            by_size: [
                RecallCounts::zeros(n),
                RecallCounts::zeros(n),
                RecallCounts::zeros(n),
            ],
        }
    }

    fn add(&mut self, other: &StratifiedCounts) {
        self.all.add(&other.all);
        for (a, b) in self.by_size.iter_mut().zip(&other.by_size) {
            a.add(b);
        }
    }
}

fn rank_boxes<'a>(dets: impl IntoIterator<Item = &'a Detection>) -> Vec<BBox> {
    let mut dets: Vec<&Detection> = dets.into_iter().collect();
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    dets.into_iter().map(|d| d.bbox).collect()
}

/// `(matched, total)` non-crowd ground truths of a single image at one IoU
/// threshold and budget.
pub fn recall_single(
    dets: &[Detection],
    gts: &[GroundTruthAnnotation],
    iou_t: f64,
    budget: usize,
) -> (u64, u64) {
    let image = RankedImage::new(&rank_boxes(dets), gts.iter().map(GtEntry::from).collect());
    let subset: Vec<usize> = (0..gts.len()).collect();
    let c = image.counts(&subset, &[iou_t], budget);
    (c.all.matched[0], c.all.total)
}

fn group<'a, T>(items: &'a [T], key: impl Fn(&T) -> u64) -> HashMap<u64, Vec<&'a T>> {
    let mut map: HashMap<u64, Vec<&T>> = HashMap::new();
    for item in items {
        map.entry(key(item)).or_default().push(item);
    }
    map
}

/// Counts of all detections against all ground truth over many images.
pub fn recall_counts(
    dets: &[Detection],
    gts: &[GroundTruthAnnotation],
    thresholds: &[f64],
    budget: usize,
) -> RecallCounts {
    let det_map = group(dets, |d| d.image_id);
    let gt_map = group(gts, |g| g.image_id);
    let images: Vec<u64> = gt_map.keys().copied().collect::<BTreeSet<_>>().into_iter().collect();
    images
        .par_iter()
        .map(|id| {
            let gts: Vec<GtEntry> = gt_map[id].iter().map(|g| GtEntry::from(*g)).collect();
            let ranked = rank_boxes(det_map.get(id).into_iter().flatten().copied());
            let subset: Vec<usize> = (0..gts.len()).collect();
            RankedImage::new(&ranked, gts).counts(&subset, thresholds, budget).all
        })
        .reduce(
            || RecallCounts::zeros(thresholds.len()),
            |mut a, b| {
                a.add(&b);
                a
            },
        )
}

/// Mean over `cfg.iou_thresholds` of pooled recall at `cfg.budget`. 0 when
/// there is no non-crowd ground truth.
pub fn average_recall(dets: &[Detection], gts: &[GroundTruthAnnotation], cfg: &EvalConfig) -> f64 {
    recall_counts(dets, gts, &cfg.iou_thresholds, cfg.budget).average_recall()
}

/// Novel-class recall under the base-exclusion protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NovelRecall {
    pub ar: f64,
    pub ar_small: f64,
    pub ar_medium: f64,
    pub ar_large: f64,
    pub counts: RecallCounts,
    pub counts_by_size: [RecallCounts; 3],
    pub excluded_detections: u64,
}

/// Per-image state shared by the novel and per-class evaluations.
struct NovelImage {
    ranked: RankedImage,
    excluded: u64,
}

fn prepare_novel(
    dets: &[Detection],
    ds: &Dataset,
    split: &ClassSplit,
    base_association_iou: f64,
) -> Vec<NovelImage> {
    let det_map = group(dets, |d| d.image_id);
    let gt_map = ds.annotations_by_image();
    ds.images
        .par_iter()
        .map(|img| {
            let anns: &[&GroundTruthAnnotation] = gt_map.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
            let base: Vec<BBox> = anns
                .iter()
                .filter(|a| split.is_base(a.category_id))
                .map(|a| a.bbox)
                .collect();
            let novel: Vec<GtEntry> = anns
                .iter()
                .filter(|a| split.is_novel(a.category_id))
                .map(|a| GtEntry::from(*a))
                .collect();
            let mut excluded = 0;
            let kept = det_map.get(&img.id).into_iter().flatten().copied().filter(|d| {
                let associated = base.iter().any(|b| b.iou(&d.bbox) >= base_association_iou);
                if associated {
                    excluded += 1;
                }
                !associated
            });
            let ranked = rank_boxes(kept.collect::<Vec<_>>());
            NovelImage {
                ranked: RankedImage::new(&ranked, novel),
                excluded,
            }
        })
        .collect()
}

fn novel_from_images(images: &[NovelImage], cfg: &EvalConfig) -> NovelRecall {
    let n = cfg.iou_thresholds.len();
    let total = images
        .par_iter()
        .map(|img| {
            let subset: Vec<usize> = (0..img.ranked.gts.len()).collect();
            img.ranked.counts(&subset, &cfg.iou_thresholds, cfg.budget)
        })
        .reduce(
            || StratifiedCounts::zeros(n),
            |mut a, b| {
                a.add(&b);
                a
            },
        );
    NovelRecall {
        ar: total.all.average_recall(),
        ar_small: total.by_size[0].average_recall(),
        ar_medium: total.by_size[1].average_recall(),
        ar_large: total.by_size[2].average_recall(),
        counts: total.all,
        counts_by_size: total.by_size,
        excluded_detections: images.iter().map(|i| i.excluded).sum(),
    }
}

pub fn ar_novel(dets: &[Detection], ds: &Dataset, split: &ClassSplit, cfg: &EvalConfig) -> NovelRecall {
    let images = prepare_novel(dets, ds, split, cfg.base_association_iou);
    novel_from_images(&images, cfg)
}

fn per_class_from_images(
    images: &[NovelImage],
    cfg: &EvalConfig,
    budget: usize,
) -> BTreeMap<u64, RecallCounts> {
    let n = cfg.iou_thresholds.len();
    images
        .par_iter()
        .map(|img| {
            let mut by_class: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, g) in img.ranked.gts.iter().enumerate() {
                by_class.entry(g.category).or_default().push(i);
            }
            by_class
                .into_iter()
                .map(|(c, subset)| (c, img.ranked.counts(&subset, &cfg.iou_thresholds, budget).all))
                .collect::<BTreeMap<_, _>>()
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (c, counts) in b {
                a.entry(c).or_insert_with(|| RecallCounts::zeros(n)).add(&counts);
            }
            a
        })
        .into_iter()
        .filter(|(_, c)| c.total > 0)
        .collect()
}

/// AR of each novel class with ground truth restricted to that class, at
/// `cfg.budget`. Classes without non-crowd ground truth are omitted.
pub fn per_class_ar(
    dets: &[Detection],
    ds: &Dataset,
    split: &ClassSplit,
    cfg: &EvalConfig,
) -> BTreeMap<u64, f64> {
    let images = prepare_novel(dets, ds, split, cfg.base_association_iou);
    per_class_from_images(&images, cfg, cfg.budget)
        .into_iter()
        .map(|(c, counts)| (c, counts.average_recall()))
        .collect()
}

/// A relative difference, or `undefined` when the reference is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelativeDiff {
    Value(f64),
    Undefined,
}

impl Serialize for RelativeDiff {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RelativeDiff::Value(v) => s.serialize_f64(*v),
            RelativeDiff::Undefined => s.serialize_str("undefined"),
        }
    }
}

/// `(ar_x - ar_ref) / ar_ref` over the shared keys.
pub fn relative_diff(
    ar_x: &BTreeMap<u64, f64>,
    ar_ref: &BTreeMap<u64, f64>,
) -> BTreeMap<u64, RelativeDiff> {
    ar_x.iter()
        .filter_map(|(c, x)| {
            let r = *ar_ref.get(c)?;
            let d = if r == 0.0 {
                RelativeDiff::Undefined
            } else {
                RelativeDiff::Value((x - r) / r)
            };
            Some((*c, d))
        })
        .collect()
}

/// Rounds a ratio to a percentage with one decimal place.
pub fn percent(ratio: f64) -> f64 {
    (ratio * 1000.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStrata {
    pub small: f64,
    pub medium: f64,
    pub large: f64,
    pub counts: [RecallCounts; 3],
}

/// Paper-table style percentages, one decimal place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentSummary {
    pub ar_all: f64,
    pub ar_novel: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar_novel_small: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar_novel_medium: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar_novel_large: Option<f64>,
    pub per_class: BTreeMap<u64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub split: String,
    pub config: EvalConfig,
    pub ar_all: f64,
    pub ar_novel: f64,
    pub novel_by_size: Option<SizeStrata>,
    pub per_class_ar: BTreeMap<u64, f64>,
    pub counts_all: RecallCounts,
    pub counts_novel: RecallCounts,
    pub per_class_counts: BTreeMap<u64, RecallCounts>,
    pub excluded_detections: u64,
    pub warnings: Vec<String>,
    pub percent: PercentSummary,
}

impl EvalReport {
    pub fn ar_novel_small(&self) -> Option<f64> {
        self.novel_by_size.as_ref().map(|s| s.small)
    }

    pub fn ar_novel_medium(&self) -> Option<f64> {
        self.novel_by_size.as_ref().map(|s| s.medium)
    }

    pub fn ar_novel_large(&self) -> Option<f64> {
        self.novel_by_size.as_ref().map(|s| s.large)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        crate::io::read_json(path)
    }
}

/// Full report: AR over all classes, novel AR with strata, per-class AR at
/// `cfg.per_class_budget`.
pub fn evaluate(
    dets: &[Detection],
    ds: &Dataset,
    split: &ClassSplit,
    cfg: &EvalConfig,
    dataset_name: &str,
) -> Result<EvalReport> {
    cfg.validate()?;
    split.check_against(&ds.taxonomy)?;
    let counts_all = recall_counts(dets, &ds.annotations, &cfg.iou_thresholds, cfg.budget);
    let images = prepare_novel(dets, ds, split, cfg.base_association_iou);
    let novel = novel_from_images(&images, cfg);
    let per_class_counts = per_class_from_images(&images, cfg, cfg.per_class_budget);
    let per_class_ar: BTreeMap<u64, f64> = per_class_counts
        .iter()
        .map(|(c, counts)| (*c, counts.average_recall()))
        .collect();

    let mut warnings = Vec::new();
    if counts_all.total == 0 {
        warnings.push("no non-crowd ground truth: AR over all classes reported as 0".to_string());
    }
    if novel.counts.total == 0 {
        warnings.push("no non-crowd novel-class ground truth: novel AR reported as 0".to_string());
    }
    let known: BTreeSet<u64> = ds.images.iter().map(|i| i.id).collect();
    let stray = dets.iter().filter(|d| !known.contains(&d.image_id)).count();
    if stray > 0 {
        warnings.push(format!("{stray} detections reference images outside the dataset and were ignored"));
    }

    let novel_by_size = cfg.size_strata.then(|| SizeStrata {
        small: novel.ar_small,
        medium: novel.ar_medium,
        large: novel.ar_large,
        counts: novel.counts_by_size.clone(),
    });
    let ar_all = counts_all.average_recall();
    let percent_summary = PercentSummary {
        ar_all: percent(ar_all),
        ar_novel: percent(novel.ar),
        ar_novel_small: novel_by_size.as_ref().map(|s| percent(s.small)),
        ar_novel_medium: novel_by_size.as_ref().map(|s| percent(s.medium)),
        ar_novel_large: novel_by_size.as_ref().map(|s| percent(s.large)),
        per_class: per_class_ar.iter().map(|(c, v)| (*c, percent(*v))).collect(),
    };
    Ok(EvalReport {
        dataset: dataset_name.to_string(),
        split: split.name.clone(),
        config: cfg.clone(),
        ar_all,
        ar_novel: novel.ar,
        novel_by_size,
        per_class_ar,
        counts_all,
        counts_novel: novel.counts,
        per_class_counts,
        excluded_detections: novel.excluded_detections,
        warnings,
        percent: percent_summary,
    })
}
