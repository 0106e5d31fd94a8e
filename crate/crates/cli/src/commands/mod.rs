mod analyze;
mod ensemble;
mod evaluate;
mod loss_check;
mod pseudo_label;
mod split_stats;
mod synth;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use good_core::dataset::{builtin_split_definition, load_dataset, SplitDefinition};
use good_core::io::read_proposals;
use good_core::pseudolabel::pseudo_label_source;
use good_core::{training_view, ClassSplit, Dataset, Error, PseudoBox, Result};
use serde::Serialize;

use crate::args::Command;
use crate::config::Settings;

pub fn run(command: Command, cfg: &Settings) -> Result<()> {
    match command {
        Command::SplitStats(a) => split_stats::run(a, cfg),
        Command::PseudoLabel(a) => pseudo_label::run(a, cfg),
        Command::Evaluate(a) => evaluate::run(a, cfg),
        Command::EnsembleOrder(a) => ensemble::run(a, cfg),
        Command::Analyze(a) => analyze::run(a, cfg),
        Command::Synth(a) => synth::run(a, cfg),
        Command::LossCheck(a) => loss_check::run(a, cfg),
    }
}

pub const DEFAULT_SPLIT: &str = "voc";

/// A builtin split name, or else a split file.
pub fn resolve_split(spec: &str, ds: &Dataset) -> Result<ClassSplit> {
    let def = match builtin_split_definition(spec) {
        Ok(def) => def,
        Err(builtin_err) => {
            let path = Path::new(spec);
            if !path.exists() {
                return Err(Error::validation(format!(
                    "{builtin_err}; no split file named {spec:?} either"
                )));
            }
            SplitDefinition::load(path)?
        }
    };
    def.resolve(&ds.taxonomy)
}

/// Dataset, split and a dataset name (the file stem) for reports.
pub fn load_data(
    dataset: Option<PathBuf>,
    split: Option<String>,
    cfg: &Settings,
) -> Result<(Dataset, ClassSplit, String)> {
    let path = crate::config::require(dataset, cfg.dataset.clone(), "dataset")?;
    let ds = load_dataset(&path)?;
    let split_spec = crate::config::pick(split, cfg.split()?, DEFAULT_SPLIT.to_string());
    let split = resolve_split(&split_spec, &ds)?;
    log::info!(
        "{}: {} images, {} annotations; split {} with {} base classes",
        path.display(),
        ds.images.len(),
        ds.annotations.len(),
        split.name,
        split.base_category_ids.len()
    );
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok((ds, split, name))
}

pub fn out_dir(flag: Option<PathBuf>, cfg: &Settings) -> Result<PathBuf> {
    let dir = crate::config::require(flag, cfg.out.clone(), "out")?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

pub fn check_unit(name: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::validation(format!("--{name} must lie in [0, 1], got {v}")))
    }
}

pub fn check_positive(name: &str, v: usize) -> Result<usize> {
    if v > 0 {
        Ok(v)
    } else {
        Err(Error::validation(format!("--{name} must be at least 1")))
    }
}

/// Per-source statistics of the filter / top-k stage.
#[derive(Debug, Clone, Serialize)]
pub struct SourceStats {
    pub tag: String,
    pub proposals: usize,
    pub outside_training_images: usize,
    pub pseudo_boxes: usize,
}

/// Reads one source's proposals and runs it through the GT filter and
/// top-k selection. Proposals on images outside the training view are
/// dropped: those images carry no base supervision.
pub fn source_pool(
    tag: &str,
    path: &Path,
    train: &Dataset,
    train_images: &HashSet<u64>,
    k: usize,
    gt_filter_iou: f64,
) -> Result<(Vec<PseudoBox>, SourceStats)> {
    let all = read_proposals(path, tag)?;
    let n = all.len();
    let inside: Vec<_> = all
        .into_iter()
        .filter(|p| train_images.contains(&p.image_id))
        .collect();
    let outside = n - inside.len();
    if outside > 0 {
        log::info!("{tag}: {outside} of {n} proposals lie on images outside the pool and were ignored");
    }
    let boxes = pseudo_label_source(&inside, &train.annotations, k, gt_filter_iou);
    let stats = SourceStats {
        tag: tag.to_string(),
        proposals: n,
        outside_training_images: outside,
        pseudo_boxes: boxes.len(),
    };
    Ok((boxes, stats))
}

pub fn training(ds: &Dataset, split: &ClassSplit) -> (Dataset, HashSet<u64>) {
    let train = training_view(ds, split);
    let ids = train.images.iter().map(|i| i.id).collect();
    (train, ids)
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
