use std::collections::HashSet;

use good_core::ensemble::{greedy_order, top_one, utility, SourceCandidate, DEFAULT_OVERLAP_IOU};
use good_core::eval::evaluate;
use good_core::io::{read_detections, write_json};
use good_core::pseudolabel::DEFAULT_GT_FILTER_IOU;
use good_core::{carve_holdout, Detection, Error, Result};
use serde::Serialize;

use super::evaluate::config_from;
use super::{check_positive, check_unit, load_data, out_dir, source_pool, write_csv};
use crate::args::EnsembleArgs;
use crate::config::{map_entries, pick, require, tagged_or, Settings};

#[derive(Debug, Serialize)]
struct SourceEntry {
    tag: String,
    pseudo_boxes: usize,
    images_with_top1: usize,
    holdout_ar_novel: f64,
    utility: f64,
}

#[derive(Debug, Serialize)]
struct OrderRow {
    rank: usize,
    source: String,
    utility: f64,
    uniqueness: f64,
    score: f64,
}

#[derive(Debug, Serialize)]
struct Output {
    split: String,
    seed: u64,
    holdout_fraction: f64,
    holdout_images: usize,
    pool_images: usize,
    k: usize,
    overlap_iou: f64,
    baseline_ar_novel: f64,
    sources: Vec<SourceEntry>,
    order: Vec<OrderRow>,
}

fn on_images(dets: Vec<Detection>, keep: &HashSet<u64>) -> Vec<Detection> {
    dets.into_iter().filter(|d| keep.contains(&d.image_id)).collect()
}

pub fn run(args: EnsembleArgs, cfg: &Settings) -> Result<()> {
    let sources = tagged_or(&args.proposals, None, map_entries(&cfg.proposals))?;
    if sources.is_empty() {
        return Err(Error::validation("--proposals is required (TAG=PATH, repeatable)"));
    }
    let detections = tagged_or(&args.detections, None, cfg.detections())?;
    for (tag, _) in &sources {
        if !detections.iter().any(|(t, _)| t == tag) {
            return Err(Error::validation(format!("no --detections entry for source {tag:?}")));
        }
    }
    if let Some((t, _)) = detections.iter().find(|(t, _)| !sources.iter().any(|(s, _)| s == t)) {
        return Err(Error::validation(format!("--detections tag {t:?} has no matching --proposals source")));
    }
    let baseline_path = require(args.baseline, cfg.baseline.clone(), "baseline")?;
    let fraction = pick(args.holdout_fraction, cfg.holdout_fraction, 0.1);
    let seed = pick(args.seed, cfg.seed, 0);
    let k = check_positive("k", pick(args.pseudo.k, cfg.k, 1))?;
    let gt_iou = check_unit("gt-filter-iou", pick(args.pseudo.gt_filter_iou, cfg.gt_filter_iou, DEFAULT_GT_FILTER_IOU))?;
    let overlap_iou = check_unit("overlap-iou", pick(args.overlap_iou, cfg.overlap_iou, DEFAULT_OVERLAP_IOU))?;
    let ec = config_from(args.recall.budget, args.recall.base_assoc_iou, cfg)?;
    let (ds, split, name) = load_data(args.data.dataset, args.data.split, cfg)?;
    let out = out_dir(args.out, cfg)?;

    let (train, _) = super::training(&ds, &split);
    let (rest, holdout) = carve_holdout(&train, fraction, seed)?;
    let holdout_ids: HashSet<u64> = holdout.images.iter().map(|i| i.id).collect();
    let rest_ids: HashSet<u64> = rest.images.iter().map(|i| i.id).collect();
    // utility is measured against every annotation of the holdout images
    let holdout_full = ds.subset_images(&holdout_ids);
    let holdout_name = format!("{name}-holdout");

    let baseline = evaluate(
        &on_images(read_detections(&baseline_path)?, &holdout_ids),
        &holdout_full,
        &split,
        &ec,
        &holdout_name,
    )?;

    let mut entries = Vec::with_capacity(sources.len());
    let mut candidates = Vec::with_capacity(sources.len());
    for (tag, path) in &sources {
        let (boxes, _) = source_pool(tag, path, &rest, &rest_ids, k, gt_iou)?;
        let det_path = &detections.iter().find(|(t, _)| t == tag).expect("checked above").1;
        let report = evaluate(
            &on_images(read_detections(det_path)?, &holdout_ids),
            &holdout_full,
            &split,
            &ec,
            &holdout_name,
        )?;
        let u = utility(&report, &baseline)?;
        let top1 = top_one(&boxes);
        entries.push(SourceEntry {
            tag: tag.clone(),
            pseudo_boxes: boxes.len(),
            images_with_top1: top1.len(),
            holdout_ar_novel: report.ar_novel,
            utility: u,
        });
        candidates.push(SourceCandidate { source: tag.clone(), top1, utility: u });
    }

    let order: Vec<OrderRow> = greedy_order(&candidates, overlap_iou)
        .into_iter()
        .enumerate()
        .map(|(i, s)| OrderRow {
            rank: i + 1,
            source: s.source,
            utility: s.utility,
            uniqueness: s.uniqueness,
            score: s.score,
        })
        .collect();
    write_csv(&out.join("ensemble_order.csv"), &order)?;
    let output = Output {
        split: split.name.clone(),
        seed,
        holdout_fraction: fraction,
        holdout_images: holdout.images.len(),
        pool_images: rest.images.len(),
        k,
        overlap_iou,
        baseline_ar_novel: baseline.ar_novel,
        sources: entries,
        order,
    };
    write_json(out.join("ensemble_order.json"), &output)
}
