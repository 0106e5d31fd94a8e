use good_core::io::{write_json, write_pseudo_pool};
use good_core::pseudolabel::{build_pool, merge_sources, DEFAULT_GT_FILTER_IOU, DEFAULT_MERGE_IOU};
use good_core::{Error, Result};
use serde::Serialize;

use super::{check_positive, check_unit, load_data, out_dir, source_pool, training, SourceStats};
use crate::args::PseudoLabelArgs;
use crate::config::{map_entries, pick, tagged_or, Settings};

#[derive(Debug, Serialize)]
struct Summary {
    split: String,
    k: usize,
    gt_filter_iou: f64,
    merge_iou: f64,
    training_images: usize,
    base_annotations: usize,
    sources: Vec<SourceStats>,
    merged_pseudo_boxes: usize,
    images_with_pseudo_boxes: usize,
}

pub fn run(args: PseudoLabelArgs, cfg: &Settings) -> Result<()> {
    let sources = tagged_or(&args.proposals, None, map_entries(&cfg.proposals))?;
    if sources.is_empty() {
        return Err(Error::validation("--proposals is required (TAG=PATH, repeatable)"));
    }
    let k = check_positive("k", pick(args.pseudo.k, cfg.k, 1))?;
    let gt_iou = check_unit("gt-filter-iou", pick(args.pseudo.gt_filter_iou, cfg.gt_filter_iou, DEFAULT_GT_FILTER_IOU))?;
    let merge_iou = check_unit("merge-iou", pick(args.merge_iou, cfg.merge_iou, DEFAULT_MERGE_IOU))?;
    let (ds, split, _) = load_data(args.data.dataset, args.data.split, cfg)?;
    let out = out_dir(args.out, cfg)?;

    let (train, train_ids) = training(&ds, &split);
    let mut pools = Vec::with_capacity(sources.len());
    let mut stats = Vec::with_capacity(sources.len());
    for (tag, path) in &sources {
        let (boxes, s) = source_pool(tag, path, &train, &train_ids, k, gt_iou)?;
        write_pseudo_pool(out.join(format!("pseudo_{tag}.json")), &boxes)?;
        log::info!("{tag}: {} pseudo boxes", boxes.len());
        pools.push((tag.clone(), boxes));
        stats.push(s);
    }
    let merged = merge_sources(&pools, merge_iou);
    let pool = build_pool(&train, &merged, gt_iou)?;
    write_pseudo_pool(out.join("pseudo_pool.json"), &pool.pseudo)?;

    let mut with_boxes: Vec<u64> = pool.pseudo.iter().map(|p| p.image_id).collect();
    with_boxes.dedup();
    let summary = Summary {
        split: split.name.clone(),
        k,
        gt_filter_iou: gt_iou,
        merge_iou,
        training_images: train.images.len(),
        base_annotations: pool.base.len(),
        sources: stats,
        merged_pseudo_boxes: pool.pseudo.len(),
        images_with_pseudo_boxes: with_boxes.len(),
    };
    write_json(out.join("pseudo_label_summary.json"), &summary)
}
