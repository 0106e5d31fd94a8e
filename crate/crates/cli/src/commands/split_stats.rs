use good_core::dataset::load_dataset;
use good_core::{split_stats, Result};
use serde::Serialize;

use super::{out_dir, resolve_split, write_csv};
use crate::args::SplitStatsArgs;
use crate::config::{require, Settings};

const DEFAULT_SPLITS: [&str; 6] = [
    "supercat-1",
    "supercat-9",
    "supercat-24",
    "supercat-39",
    "supercat-56",
    "supercat-80",
];

#[derive(Debug, Serialize)]
struct Row {
    split: String,
    classes: usize,
    images: usize,
    instances: usize,
}

pub fn run(args: SplitStatsArgs, cfg: &Settings) -> Result<()> {
    let path = require(args.dataset, cfg.dataset.clone(), "dataset")?;
    let out = out_dir(args.out, cfg)?;
    let ds = load_dataset(&path)?;
    let mut specs = if args.split.is_empty() { cfg.splits() } else { args.split };
    if specs.is_empty() {
        specs = DEFAULT_SPLITS.iter().map(|s| s.to_string()).collect();
    }
    let rows = specs
        .iter()
        .map(|spec| {
            let split = resolve_split(spec, &ds)?;
            let s = split_stats(&ds, &split);
            Ok(Row {
                split: split.name,
                classes: s.n_classes,
                images: s.n_images,
                instances: s.n_instances,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    good_core::io::write_json(out.join("split_stats.json"), &rows)?;
    write_csv(&out.join("split_stats.csv"), &rows)
}
