//! Seeded random instances for oracle comparisons.

#![allow(dead_code)]

use std::collections::BTreeSet;

use good_core::dataset::{Category, ClassSplit, Dataset, GroundTruthAnnotation, ImageInfo, Taxonomy};
use good_core::eval::Detection;
use good_core::BBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const IMAGE_SIDE: f64 = 200.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer-grid box so that equal IoUs (and hence ties) are common.
pub fn grid_box(rng: &mut ChaCha8Rng) -> BBox {
    let w = rng.random_range(2..=150) as f64;
    let h = rng.random_range(2..=150) as f64;
    let x = rng.random_range(0..=(IMAGE_SIDE as i64 - w as i64)) as f64;
    let y = rng.random_range(0..=(IMAGE_SIDE as i64 - h as i64)) as f64;
    BBox::new(x, y, x + w, y + h).unwrap()
}

pub fn nudge(rng: &mut ChaCha8Rng, b: &BBox) -> BBox {
    let mut v = [b.x1, b.y1, b.x2, b.y2];
    for c in &mut v {
        *c += rng.random_range(-6..=6) as f64;
    }
    let (x1, x2) = (v[0].min(v[2]), v[0].max(v[2]));
    let (y1, y2) = (v[1].min(v[3]), v[1].max(v[3]));
    BBox::new(x1, y1, x2, y2).unwrap().clip(IMAGE_SIDE, IMAGE_SIDE)
}

pub struct Instance {
    pub ds: Dataset,
    pub split: ClassSplit,
    pub dets: Vec<Detection>,
}

/// At most `max_images` images and at most `max_boxes` GT and detections
/// per image, four classes, random crowd flags and tied scores.
pub fn random_instance(seed: u64, max_images: usize, max_boxes: usize) -> Instance {
    let mut r = rng(seed);
    let taxonomy = Taxonomy::new(
        (1..=4)
            .map(|id| Category { id, name: format!("c{id}"), supercategory: format!("s{id}") })
            .collect(),
    )
    .unwrap();
    let n_images = r.random_range(1..=max_images);
    let images: Vec<ImageInfo> = (1..=n_images as u64)
        .map(|id| ImageInfo { id, width: IMAGE_SIDE, height: IMAGE_SIDE, file_name: String::new() })
        .collect();
    let mut annotations = Vec::new();
    let mut dets = Vec::new();
    for img in &images {
        let n_gt = r.random_range(0..=max_boxes);
        let mut gts = Vec::new();
        for _ in 0..n_gt {
            let ann = GroundTruthAnnotation {
                annotation_id: annotations.len() as u64 + 1,
                image_id: img.id,
                category_id: r.random_range(1..=4),
                bbox: grid_box(&mut r),
                is_crowd: r.random_bool(0.1),
            };
            gts.push(ann.bbox);
            annotations.push(ann);
        }
        let n_det = r.random_range(0..=max_boxes);
        for _ in 0..n_det {
            let bbox = if !gts.is_empty() && r.random_bool(0.6) {
                let g = gts[r.random_range(0..gts.len())];
                nudge(&mut r, &g)
            } else {
                grid_box(&mut r)
            };
            let score = r.random_range(1..=9) as f64 / 10.0;
            dets.push(Detection::new(img.id, bbox, score).unwrap());
        }
    }
    let mut base = BTreeSet::new();
    for id in 1..=4 {
        if r.random_bool(0.4) {
            base.insert(id);
        }
    }
    let ds = Dataset::new(taxonomy, images, annotations).unwrap();
    let split = ClassSplit::from_base("random", &ds.taxonomy, base).unwrap();
    Instance { ds, split, dets }
}
