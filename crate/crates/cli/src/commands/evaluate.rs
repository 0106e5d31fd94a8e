use std::collections::BTreeMap;

use good_core::analysis::{render_table, TableLayout};
use good_core::eval::{evaluate, relative_diff, EvalConfig, RelativeDiff};
use good_core::io::{read_detections, write_json, write_text};
use good_core::{Error, EvalReport, Result};
use serde::Serialize;

use super::{check_positive, check_unit, load_data, out_dir, write_csv};
use crate::args::EvaluateArgs;
use crate::config::{pick, tagged_or, Settings};

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    tag: &'a str,
    budget: usize,
    ar_all: f64,
    ar_novel: f64,
    ar_novel_small: Option<f64>,
    ar_novel_medium: Option<f64>,
    ar_novel_large: Option<f64>,
    novel_instances: u64,
    excluded_detections: u64,
}

#[derive(Debug, Serialize)]
struct RelativeEntry {
    ar_all: RelativeDiff,
    ar_novel: RelativeDiff,
    per_class: BTreeMap<u64, RelativeDiff>,
}

fn scalar_diff(x: f64, r: f64) -> RelativeDiff {
    relative_diff(&BTreeMap::from([(0, x)]), &BTreeMap::from([(0, r)]))[&0]
}

pub fn config_from(budget: Option<usize>, base_iou: Option<f64>, cfg: &Settings) -> Result<EvalConfig> {
    let mut ec = EvalConfig::with_budget(check_positive("budget", pick(budget, cfg.budget, 100))?);
    ec.base_association_iou = check_unit("base-assoc-iou", pick(base_iou, cfg.base_assoc_iou, ec.base_association_iou))?;
    Ok(ec)
}

pub fn run(args: EvaluateArgs, cfg: &Settings) -> Result<()> {
    let inputs = tagged_or(&args.detections, Some("detections"), cfg.detections())?;
    if inputs.is_empty() {
        return Err(Error::validation("--detections is required ([TAG=]PATH, repeatable)"));
    }
    let mut ec = config_from(args.recall.budget, args.recall.base_assoc_iou, cfg)?;
    ec.per_class_budget = check_positive(
        "per-class-budget",
        pick(args.per_class_budget, cfg.per_class_budget, ec.per_class_budget),
    )?;
    let reference = args.reference.or(cfg.reference.clone());
    if let Some(r) = &reference {
        if !inputs.iter().any(|(t, _)| t == r) {
            return Err(Error::validation(format!("--reference {r:?} names no detection tag")));
        }
    }
    let (ds, split, dataset_name) = load_data(args.data.dataset, args.data.split, cfg)?;
    let out = out_dir(args.out, cfg)?;

    let mut reports: Vec<(String, EvalReport)> = Vec::with_capacity(inputs.len());
    for (tag, path) in &inputs {
        let dets = read_detections(path)?;
        let report = evaluate(&dets, &ds, &split, &ec, &dataset_name)?;
        for w in &report.warnings {
            log::warn!("{tag}: {w}");
        }
        write_json(out.join(format!("report_{tag}.json")), &report)?;
        reports.push((tag.clone(), report));
    }

    let rows: Vec<SummaryRow> = reports
        .iter()
        .map(|(tag, r)| SummaryRow {
            tag,
            budget: r.config.budget,
            ar_all: r.percent.ar_all,
            ar_novel: r.percent.ar_novel,
            ar_novel_small: r.percent.ar_novel_small,
            ar_novel_medium: r.percent.ar_novel_medium,
            ar_novel_large: r.percent.ar_novel_large,
            novel_instances: r.counts_novel.total,
            excluded_detections: r.excluded_detections,
        })
        .collect();
    write_csv(&out.join("summary.csv"), &rows)?;

    let table_rows: Vec<(String, &EvalReport)> = reports.iter().map(|(t, r)| (t.clone(), r)).collect();
    write_text(out.join("table.md"), &render_table(&table_rows, &TableLayout::default())?)?;

    if let Some(r) = reference {
        let base = &reports.iter().find(|(t, _)| *t == r).expect("checked above").1;
        let diffs: BTreeMap<&str, RelativeEntry> = reports
            .iter()
            .filter(|(t, _)| *t != r)
            .map(|(t, x)| {
                (
                    t.as_str(),
                    RelativeEntry {
                        ar_all: scalar_diff(x.ar_all, base.ar_all),
                        ar_novel: scalar_diff(x.ar_novel, base.ar_novel),
                        per_class: relative_diff(&x.per_class_ar, &base.per_class_ar),
                    },
                )
            })
            .collect();
        write_json(out.join("relative_diff.json"), &serde_json::json!({ "reference": r, "diffs": diffs }))?;
    }
    Ok(())
}
