use good_core::analysis::{overlap_matrix, render_table, size_histogram, TableLayout, DEFAULT_SIZE_EDGES};
use good_core::ensemble::{top_one, DEFAULT_OVERLAP_IOU};
use good_core::io::{write_json, write_text};
use good_core::pseudolabel::DEFAULT_GT_FILTER_IOU;
use good_core::{Error, EvalReport, Result};
use serde::Serialize;

use super::{check_positive, check_unit, load_data, out_dir, source_pool, training, write_csv};
use crate::args::AnalyzeArgs;
use crate::config::{map_entries, parse_tagged, pick, tagged_or, Settings};

#[derive(Debug, Serialize)]
struct OverlapCell<'a> {
    source: &'a str,
    against: &'a str,
    overlap: Option<f64>,
}

#[derive(Debug, Serialize)]
struct HistogramBin<'a> {
    source: &'a str,
    lower: f64,
    upper: Option<f64>,
    count: u64,
}

pub fn run(args: AnalyzeArgs, cfg: &Settings) -> Result<()> {
    let sources = tagged_or(&args.proposals, None, map_entries(&cfg.proposals))?;
    let reports = if args.reports.is_empty() {
        let r = map_entries(&cfg.reports);
        crate::config::check_tags(&r)?;
        r
    } else {
        parse_tagged(&args.reports, None)?
    };
    if sources.is_empty() && reports.is_empty() {
        return Err(Error::validation("nothing to analyze: give --proposals and/or --reports"));
    }
    let out = out_dir(args.out, cfg)?;

    if !sources.is_empty() {
        let k = check_positive("k", pick(args.pseudo.k, cfg.k, 1))?;
        let gt_iou = check_unit("gt-filter-iou", pick(args.pseudo.gt_filter_iou, cfg.gt_filter_iou, DEFAULT_GT_FILTER_IOU))?;
        let overlap_iou = check_unit("overlap-iou", pick(args.overlap_iou, cfg.overlap_iou, DEFAULT_OVERLAP_IOU))?;
        let edges = if !args.size_edges.is_empty() {
            args.size_edges
        } else {
            cfg.size_edges.clone().unwrap_or_else(|| DEFAULT_SIZE_EDGES.to_vec())
        };
        let (ds, split, _) = load_data(args.data.dataset, args.data.split, cfg)?;
        let (train, train_ids) = training(&ds, &split);

        let mut tops = Vec::with_capacity(sources.len());
        let mut histograms = Vec::with_capacity(sources.len());
        for (tag, path) in &sources {
            let (boxes, _) = source_pool(tag, path, &train, &train_ids, k, gt_iou)?;
            histograms.push(size_histogram(tag, &boxes, &edges)?);
            tops.push((tag.clone(), top_one(&boxes)));
        }

        let bins: Vec<HistogramBin> = histograms
            .iter()
            .flat_map(|h| {
                let inner = h.counts.iter().enumerate().map(|(i, c)| HistogramBin {
                    source: &h.source,
                    lower: h.edges[i],
                    upper: Some(h.edges[i + 1]),
                    count: *c,
                });
                let overflow = HistogramBin {
                    source: &h.source,
                    lower: *h.edges.last().expect("at least two edges"),
                    upper: None,
                    count: h.overflow,
                };
                inner.chain(std::iter::once(overflow))
            })
            .collect();
        write_json(out.join("size_histograms.json"), &histograms)?;
        write_csv(&out.join("size_histograms.csv"), &bins)?;

        if tops.len() >= 2 {
            let m = overlap_matrix(&tops, overlap_iou)?;
            let cells: Vec<OverlapCell> = m
                .sources
                .iter()
                .enumerate()
                .flat_map(|(i, s)| {
                    let m = &m;
                    m.sources.iter().enumerate().map(move |(j, t)| OverlapCell {
                        source: s,
                        against: t,
                        overlap: m.values[i][j],
                    })
                })
                .collect();
            write_json(out.join("overlap_matrix.json"), &m)?;
            write_csv(&out.join("overlap_matrix.csv"), &cells)?;
        } else {
            log::info!("one proposal source given; skipping the overlap matrix");
        }
    }

    if !reports.is_empty() {
        let loaded = reports
            .iter()
            .map(|(label, path)| Ok((label.clone(), EvalReport::load(path)?)))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<(String, &EvalReport)> = loaded.iter().map(|(l, r)| (l.clone(), r)).collect();
        let layout = if loaded.iter().all(|(_, r)| r.novel_by_size.is_some()) {
            TableLayout::default()
        } else {
            TableLayout {
                columns: vec![good_core::analysis::Metric::ArAll, good_core::analysis::Metric::ArNovel],
                mark_max: true,
            }
        };
        write_text(out.join("table.md"), &render_table(&rows, &layout)?)?;
    }
    Ok(())
}
