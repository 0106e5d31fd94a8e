//! Naïve reference implementations used to cross-check the library.
//!
//! Nothing here calls into the evaluation, supervision or geometry code of
//! the crate; only plain data types are shared. Everything is written as
//! straightforward nested loops over raw coordinates.

#![allow(dead_code)]

use std::collections::BTreeMap;

use good_core::dataset::{ClassSplit, Dataset, GroundTruthAnnotation};
use good_core::eval::Detection;
use good_core::BBox;

pub fn corners(b: &BBox) -> [f64; 4] {
    [b.x1, b.y1, b.x2, b.y2]
}

pub fn naive_iou(a: &BBox, b: &BBox) -> f64 {
    let [ax1, ay1, ax2, ay2] = corners(a);
    let [bx1, by1, bx2, by2] = corners(b);
    let iw = if ax2 < bx2 { ax2 } else { bx2 } - if ax1 > bx1 { ax1 } else { bx1 };
    let ih = if ay2 < by2 { ay2 } else { by2 } - if ay1 > by1 { ay1 } else { by1 };
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
    if union <= 0.0 {
        0.0
    } else {
        let r = inter / union;
        if r > 1.0 {
            1.0
        } else {
            r
        }
    }
}

fn size_index(b: &BBox) -> usize {
    let a = (b.x2 - b.x1) * (b.y2 - b.y1);
    if a < 1024.0 {
        0
    } else if a < 9216.0 {
        1
    } else {
        2
    }
}

/// Indices of `dets` in ranking order: repeatedly take the highest score,
/// earliest index on ties.
fn ranking(dets: &[&Detection]) -> Vec<usize> {
    let mut taken = vec![false; dets.len()];
    let mut order = Vec::new();
    for _ in 0..dets.len() {
        let mut best: Option<usize> = None;
        for i in 0..dets.len() {
            if taken[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if dets[i].score > dets[b].score => best = Some(i),
                _ => {}
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        order.push(b);
    }
    order
}

/// Matched flags per GT of one image at one threshold.
pub fn naive_match(
    dets: &[&Detection],
    gts: &[&GroundTruthAnnotation],
    iou_t: f64,
    budget: usize,
) -> Vec<bool> {
    let mut matched = vec![false; gts.len()];
    let mut spent = 0usize;
    for d in ranking(dets) {
        if spent == budget {
            break;
        }
        let mut pick: Option<usize> = None;
        let mut pick_iou = -1.0;
        for g in 0..gts.len() {
            if gts[g].is_crowd || matched[g] {
                continue;
            }
            let v = naive_iou(&dets[d].bbox, &gts[g].bbox);
            if v >= iou_t && v > pick_iou {
                pick = Some(g);
                pick_iou = v;
            }
        }
        if let Some(g) = pick {
            matched[g] = true;
            spent += 1;
            continue;
        }
        let mut on_crowd = false;
        for g in 0..gts.len() {
            if gts[g].is_crowd && naive_iou(&dets[d].bbox, &gts[g].bbox) >= iou_t {
                on_crowd = true;
            }
        }
        if !on_crowd {
            spent += 1;
        }
    }
    matched
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NaiveCounts {
    pub total: u64,
    pub matched: Vec<u64>,
}

impl NaiveCounts {
    pub fn ar(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        for m in &self.matched {
            s += *m as f64 / self.total as f64;
        }
        s / self.matched.len() as f64
    }
}

fn image_ids(dets: &[Detection], gts: &[GroundTruthAnnotation]) -> Vec<u64> {
    let mut ids: Vec<u64> = Vec::new();
    for g in gts {
        if !ids.contains(&g.image_id) {
            ids.push(g.image_id);
        }
    }
    let _ = dets;
    ids
}

/// Pooled counts over every image; GT filtered by `keep_gt`.
pub fn naive_counts(
    dets: &[Detection],
    gts: &[GroundTruthAnnotation],
    thresholds: &[f64],
    budget: usize,
) -> NaiveCounts {
    let mut out = NaiveCounts { total: 0, matched: vec![0; thresholds.len()] };
    for img in image_ids(dets, gts) {
        let d: Vec<&Detection> = dets.iter().filter(|d| d.image_id == img).collect();
        let g: Vec<&GroundTruthAnnotation> = gts.iter().filter(|g| g.image_id == img).collect();
        out.total += g.iter().filter(|g| !g.is_crowd).count() as u64;
        for (t, &iou_t) in thresholds.iter().enumerate() {
            out.matched[t] += naive_match(&d, &g, iou_t, budget).iter().filter(|m| **m).count() as u64;
        }
    }
    out
}

pub fn naive_average_recall(
    dets: &[Detection],
    gts: &[GroundTruthAnnotation],
    thresholds: &[f64],
    budget: usize,
) -> f64 {
    naive_counts(dets, gts, thresholds, budget).ar()
}

/// Detections of `image` that survive base exclusion, in input order.
fn surviving<'a>(
    dets: &'a [Detection],
    ds: &'a Dataset,
    split: &ClassSplit,
    image: u64,
    base_iou: f64,
) -> Vec<&'a Detection> {
    let mut out = Vec::new();
    for d in dets.iter().filter(|d| d.image_id == image) {
        let mut hit = false;
        for a in &ds.annotations {
            if a.image_id == image
                && split.base_category_ids.contains(&a.category_id)
                && naive_iou(&d.bbox, &a.bbox) >= base_iou
            {
                hit = true;
            }
        }
        if !hit {
            out.push(d);
        }
    }
    out
}

/// Novel AR plus per-size counts `[small, medium, large]`.
pub fn naive_ar_novel(
    dets: &[Detection],
    ds: &Dataset,
    split: &ClassSplit,
    thresholds: &[f64],
    budget: usize,
    base_iou: f64,
) -> (NaiveCounts, [NaiveCounts; 3]) {
    let n = thresholds.len();
    let mut all = NaiveCounts { total: 0, matched: vec![0; n] };
    let mut sizes: [NaiveCounts; 3] = std::array::from_fn(|_| NaiveCounts { total: 0, matched: vec![0; n] });
    for img in &ds.images {
        let d = surviving(dets, ds, split, img.id, base_iou);
        let g: Vec<&GroundTruthAnnotation> = ds
            .annotations
            .iter()
            .filter(|a| a.image_id == img.id && split.novel_category_ids.contains(&a.category_id))
            .collect();
        for gt in g.iter().filter(|g| !g.is_crowd) {
            all.total += 1;
            sizes[size_index(&gt.bbox)].total += 1;
        }
        for (t, &iou_t) in thresholds.iter().enumerate() {
            let m = naive_match(&d, &g, iou_t, budget);
            for (i, hit) in m.iter().enumerate() {
                if *hit {
                    all.matched[t] += 1;
                    sizes[size_index(&g[i].bbox)].matched[t] += 1;
                }
            }
        }
    }
    (all, sizes)
}

pub fn naive_per_class(
    dets: &[Detection],
    ds: &Dataset,
    split: &ClassSplit,
    thresholds: &[f64],
    budget: usize,
    base_iou: f64,
) -> BTreeMap<u64, f64> {
    let mut out = BTreeMap::new();
    for &c in &split.novel_category_ids {
        let mut counts = NaiveCounts { total: 0, matched: vec![0; thresholds.len()] };
        for img in &ds.images {
            let d = surviving(dets, ds, split, img.id, base_iou);
            let g: Vec<&GroundTruthAnnotation> = ds
                .annotations
                .iter()
                .filter(|a| a.image_id == img.id && a.category_id == c)
                .collect();
            counts.total += g.iter().filter(|g| !g.is_crowd).count() as u64;
            for (t, &iou_t) in thresholds.iter().enumerate() {
                counts.matched[t] += naive_match(&d, &g, iou_t, budget).iter().filter(|m| **m).count() as u64;
            }
        }
        if counts.total > 0 {
            out.insert(c, counts.ar());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// losses

pub struct LossInput<'a> {
    pub width: f64,
    pub height: f64,
    /// (anchor, label_prob, predicted_box, objectness)
    pub candidates: &'a [(BBox, f64, BBox, f64)],
    pub base: &'a [BBox],
    pub pseudo: &'a [BBox],
    pub positive_iou: f64,
}

fn naive_centerness(px: f64, py: f64, b: &BBox) -> f64 {
    if px < b.x1 || px > b.x2 || py < b.y1 || py > b.y2 {
        return 0.0;
    }
    let (l, r, t, bo) = (px - b.x1, b.x2 - px, py - b.y1, b.y2 - py);
    let h = if l.max(r) == 0.0 { 0.0 } else { l.min(r) / l.max(r) };
    let v = if t.max(bo) == 0.0 { 0.0 } else { t.min(bo) / t.max(bo) };
    (h * v).sqrt()
}

/// Returns (std cls, std reg, oln reg, oln obj, good reg, good obj).
pub fn naive_losses(input: &LossInput) -> [f64; 6] {
    let (w, h) = (input.width, input.height);
    let mut cls_sum = 0.0;
    let (mut reg_k, mut obj_k, mut n_k) = (0.0, 0.0, 0usize);
    let (mut reg_n, mut obj_n, mut n_n) = (0.0, 0.0, 0usize);
    for (anchor, p, pred, o) in input.candidates {
        // 0 = background, 1 = base, 2 = pseudo
        let mut kind = 0;
        let mut best_iou = 0.0;
        let mut target = *anchor;
        for b in input.base {
            let v = naive_iou(anchor, b);
            if v >= input.positive_iou && (kind == 0 || v > best_iou) {
                kind = 1;
                best_iou = v;
                target = *b;
            }
        }
        for b in input.pseudo {
            let v = naive_iou(anchor, b);
            if v >= input.positive_iou && (kind == 0 || v > best_iou) {
                kind = 2;
                best_iou = v;
                target = *b;
            }
        }
        let y = if kind == 1 { 1.0 } else { 0.0 };
        let q: f64 = if y == 1.0 { *p } else { 1.0 - *p };
        cls_sum += -(if q < 1e-12 { 1e-12 } else { q }).ln();
        if kind == 0 {
            continue;
        }
        let cx = (anchor.x1 + anchor.x2) / 2.0;
        let cy = (anchor.y1 + anchor.y2) / 2.0;
        let o_star = (naive_centerness(cx, cy, &target) * best_iou).sqrt();
        let l1 = ((pred.x1 - target.x1).abs() / w
            + (pred.y1 - target.y1).abs() / h
            + (pred.x2 - target.x2).abs() / w
            + (pred.y2 - target.y2).abs() / h)
            / 4.0;
        let lo = (o - o_star).abs();
        if kind == 1 {
            reg_k += l1;
            obj_k += lo;
            n_k += 1;
        } else {
            reg_n += l1;
            obj_n += lo;
            n_n += 1;
        }
    }
    let div = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    [
        div(cls_sum, input.candidates.len()),
        div(reg_k, n_k),
        div(reg_k, n_k),
        div(obj_k, n_k),
        div(reg_k + reg_n, n_k + n_n),
        div(obj_k + obj_n, n_k + n_n),
    ]
}
