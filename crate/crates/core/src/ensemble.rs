//! Greedy ordering of pseudo-label sources by utility × uniqueness.
//!
//! Utility is the holdout novel-class AR gain of a source over the baseline
//! detector. Uniqueness is `1 - max overlap` between a source's top-1 boxes
//! and those of every source selected so far, where overlap is the fraction
//! of shared images on which the two top-1 boxes agree at IoU ≥ 0.5.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::geometry::BBox;
use crate::pseudolabel::PseudoBox;

pub const DEFAULT_OVERLAP_IOU: f64 = 0.5;

/// Highest-objectness box per image.
pub type TopOne = BTreeMap<u64, BBox>;

/// Picks each image's highest-objectness box (first on ties).
pub fn top_one(boxes: &[PseudoBox]) -> TopOne {
    let mut best: BTreeMap<u64, (f64, BBox)> = BTreeMap::new();
    for b in boxes {
        match best.get(&b.image_id) {
            Some((score, _)) if *score >= b.objectness => {}
            _ => {
                best.insert(b.image_id, (b.objectness, b.bbox));
            }
        }
    }
    best.into_iter().map(|(id, (_, b))| (id, b)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceCandidate {
    pub source: String,
    pub top1: TopOne,
    pub utility: f64,
}

/// Fraction of images present in both `a` and `b` where the two top-1 boxes
/// have IoU ≥ `iou_t`. `None` when the sources share no image.
pub fn pairwise_overlap(a: &TopOne, b: &TopOne, iou_t: f64) -> Option<f64> {
    let mut common = 0usize;
    let mut agree = 0usize;
    for (id, box_a) in a {
        if let Some(box_b) = b.get(id) {
            common += 1;
            if box_a.iou(box_b) >= iou_t {
                agree += 1;
            }
        }
    }
    (common > 0).then(|| agree as f64 / common as f64)
}

/// Holdout novel AR gain of `holdout` over `baseline`.
pub fn utility(holdout: &EvalReport, baseline: &EvalReport) -> Result<f64> {
    if holdout.dataset != baseline.dataset {
        return Err(Error::validation(format!(
            "report dataset {:?} does not match baseline dataset {:?}",
            holdout.dataset, baseline.dataset
        )));
    }
    if holdout.split != baseline.split || holdout.config.budget != baseline.config.budget {
        return Err(Error::validation(format!(
            "report ({}, budget {}) and baseline ({}, budget {}) were evaluated differently",
            holdout.split, holdout.config.budget, baseline.split, baseline.config.budget
        )));
    }
    Ok(holdout.ar_novel - baseline.ar_novel)
}

/// One step of the greedy ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub source: String,
    pub utility: f64,
    pub uniqueness: f64,
    pub score: f64,
}

fn better(a: &Selection, b: &Selection) -> bool {
    a.score > b.score || (a.score == b.score && a.source < b.source)
}

/// Full greedy ordering of `candidates`. The first pick maximizes utility;
/// each later pick maximizes `utility * uniqueness` against the sources
/// already chosen. Ties go to the lexicographically smaller tag.
pub fn greedy_order(candidates: &[SourceCandidate], iou_t: f64) -> Vec<Selection> {
    let mut remaining: Vec<&SourceCandidate> = candidates.iter().collect();
    let mut chosen: Vec<&SourceCandidate> = Vec::new();
    let mut order = Vec::with_capacity(candidates.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, Selection)> = None;
        for (i, c) in remaining.iter().enumerate() {
            let overlap = chosen
                .iter()
                .filter_map(|s| pairwise_overlap(&c.top1, &s.top1, iou_t))
                .fold(0.0, f64::max);
            let uniqueness = 1.0 - overlap;
            let sel = Selection {
                source: c.source.clone(),
                utility: c.utility,
                uniqueness,
                score: c.utility * uniqueness,
            };
            if best.as_ref().is_none_or(|(_, b)| better(&sel, b)) {
                best = Some((i, sel));
            }
        }
        let (i, sel) = best.expect("remaining is non-empty");
        chosen.push(remaining.remove(i));
        order.push(sel);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64) -> BBox {
        BBox::new(x, 0., x + 10., 10.).unwrap()
    }

    fn top(entries: &[(u64, f64)]) -> TopOne {
        entries.iter().map(|&(id, x)| (id, bx(x))).collect()
    }

    fn cand(source: &str, top1: TopOne, utility: f64) -> SourceCandidate {
        SourceCandidate { source: source.into(), top1, utility }
    }

    #[test]
    fn overlap_examples() {
        let a = top(&[(1, 0.), (2, 0.), (3, 0.), (4, 0.)]);
        assert_eq!(pairwise_overlap(&a, &a, 0.5), Some(1.0));
        let far = top(&[(1, 100.), (2, 100.), (3, 100.), (4, 100.)]);
        assert_eq!(pairwise_overlap(&a, &far, 0.5), Some(0.0));
        let one = top(&[(1, 0.), (2, 100.), (3, 100.), (4, 100.), (5, 0.)]);
        assert_eq!(pairwise_overlap(&a, &one, 0.5), Some(0.25));
        assert_eq!(pairwise_overlap(&a, &top(&[(9, 0.)]), 0.5), None);
    }

    #[test]
    fn top_one_picks_highest() {
        let boxes = vec![
            PseudoBox { pseudo_id: 1, image_id: 1, bbox: bx(0.), objectness: 0.3, source: "d".into() },
            PseudoBox { pseudo_id: 2, image_id: 1, bbox: bx(50.), objectness: 0.8, source: "d".into() },
            PseudoBox { pseudo_id: 3, image_id: 1, bbox: bx(90.), objectness: 0.8, source: "d".into() },
        ];
        assert_eq!(top_one(&boxes)[&1], bx(50.));
    }

    #[test]
    fn single_and_disjoint() {
        let order = greedy_order(&[cand("only", top(&[(1, 0.)]), 0.1)], 0.5);
        assert_eq!(order.len(), 1);
        assert_eq!(order[0].source, "only");

        let order = greedy_order(
            &[cand("low", top(&[(1, 0.)]), 0.02), cand("high", top(&[(1, 100.)]), 0.05)],
            0.5,
        );
        let tags: Vec<&str> = order.iter().map(|s| s.source.as_str()).collect();
        assert_eq!(tags, vec!["high", "low"]);
        assert_eq!(order[1].uniqueness, 1.0);
    }

    #[test]
    fn duplicate_trio() {
        let a = top(&[(1, 0.), (2, 0.), (3, 0.)]);
        let c = top(&[(1, 100.), (2, 100.), (3, 100.)]);
        let order = greedy_order(
            &[cand("B", a.clone(), 0.05), cand("C", c, 0.02), cand("A", a, 0.06)],
            0.5,
        );
        let tags: Vec<&str> = order.iter().map(|s| s.source.as_str()).collect();
        assert_eq!(tags, vec!["A", "C", "B"]);
        assert_eq!(order[2].uniqueness, 0.0);
    }

    #[test]
    fn ties_are_lexicographic() {
        let t = top(&[(1, 0.)]);
        let order = greedy_order(&[cand("zeta", t.clone(), 0.1), cand("alpha", t, 0.1)], 0.5);
        assert_eq!(order[0].source, "alpha");
    }
}
