use good_core::io::{read_json, write_json, LossCheckFile};
use good_core::supervision::{assign, loss_good, loss_oln, loss_std, ObjectnessLoss, StdLoss};
use good_core::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use super::out_dir;
use crate::config::{require, Settings};
use crate::args::LossCheckArgs;

#[derive(Debug, Serialize)]
struct ImageLosses {
    image_id: u64,
    candidates: usize,
    base_matched: usize,
    pseudo_matched: usize,
    std: StdLoss,
    oln: ObjectnessLoss,
    good: ObjectnessLoss,
}

#[derive(Debug, Serialize)]
struct Means {
    std: StdLoss,
    oln: ObjectnessLoss,
    good: ObjectnessLoss,
}

#[derive(Debug, Serialize)]
struct Output {
    positive_iou: f64,
    images: Vec<ImageLosses>,
    /// Unweighted means over images.
    mean: Means,
}

fn mean_of(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

pub fn run(args: LossCheckArgs, cfg: &Settings) -> Result<()> {
    let path = require(args.assignment, cfg.assignment.clone(), "assignment")?;
    let file: LossCheckFile = read_json(&path)?;
    let positive_iou = args.positive_iou.or(cfg.positive_iou).unwrap_or(file.positive_iou);
    let out = out_dir(args.out, cfg)?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = file.images.iter().find(|i| !seen.insert(i.image_id)) {
        return Err(Error::validation(format!("image {} appears twice in {}", dup.image_id, path.display())));
    }

    let images = file
        .images
        .par_iter()
        .map(|img| {
            let (image, cands, pool) = img.to_parts()?;
            let a = assign(&image, &cands, &pool, positive_iou)?;
            Ok(ImageLosses {
                image_id: image.id,
                candidates: cands.len(),
                base_matched: a.base_matched().count(),
                pseudo_matched: a.pseudo_matched().count(),
                std: loss_std(&a),
                oln: loss_oln(&a),
                good: loss_good(&a),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = images.len();
    let std_mean = |f: fn(&StdLoss) -> f64| mean_of(images.iter().map(|i| f(&i.std)), n);
    let obj_mean = |pick: fn(&ImageLosses) -> &ObjectnessLoss| {
        let reg = mean_of(images.iter().map(|i| pick(i).reg), n);
        let obj = mean_of(images.iter().map(|i| pick(i).obj), n);
        ObjectnessLoss { reg, obj, total: reg + obj }
    };
    let (cls, reg) = (std_mean(|s| s.cls), std_mean(|s| s.reg));
    let mean = Means {
        std: StdLoss { cls, reg, total: cls + reg },
        oln: obj_mean(|i| &i.oln),
        good: obj_mean(|i| &i.good),
    };
    write_json(out.join("losses.json"), &Output { positive_iou, images, mean })
}
