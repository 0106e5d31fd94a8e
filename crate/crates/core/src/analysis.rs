//! Diagnostics: cross-source top-1 overlap, pseudo-box size histograms and
//! markdown result tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ensemble::{pairwise_overlap, TopOne};
use crate::error::{Error, Result};
use crate::eval::{percent, EvalReport};
use crate::pseudolabel::PseudoBox;

/// Directional overlap between sources; `values[i][j]` is the overlap of
/// source `i` measured against source `j`, `None` when they share no image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub sources: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn overlap_matrix(sources: &[(String, TopOne)], iou_t: f64) -> Result<OverlapMatrix> {
    if sources.len() < 2 {
        return Err(Error::validation("an overlap matrix needs at least two sources"));
    }
    let values = sources
        .iter()
        .map(|(_, a)| {
            sources
                .iter()
                .map(|(_, b)| pairwise_overlap(a, b, iou_t))
                .collect()
        })
        .collect();
    Ok(OverlapMatrix {
        sources: sources.iter().map(|(t, _)| t.clone()).collect(),
        values,
    })
}

/// sqrt(area) bin edges, in pixels.
pub const DEFAULT_SIZE_EDGES: [f64; 9] = [0.0, 16.0, 32.0, 64.0, 96.0, 128.0, 192.0, 256.0, 512.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeHistogram {
    pub source: String,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Boxes whose size exceeds the last edge.
    pub overflow: u64,
}

impl SizeHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }
}

/// Bins boxes by `sqrt(area)` into `[e_i, e_{i+1})`, the last bin closed.
pub fn size_histogram(source: &str, boxes: &[PseudoBox], edges: &[f64]) -> Result<SizeHistogram> {
    if edges.len() < 2 {
        return Err(Error::validation("a histogram needs at least two edges"));
    }
    if edges[0] > 0.0 {
        return Err(Error::validation(format!(
            "first histogram edge {} must not exceed 0",
            edges[0]
        )));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation(format!(
            "histogram edges must be strictly increasing, got {edges:?}"
        )));
    }
    let n_bins = edges.len() - 1;
    let mut counts = vec![0u64; n_bins];
    let mut overflow = 0;
    for b in boxes {
        let size = b.bbox.area().sqrt();
        if size > edges[n_bins] {
            overflow += 1;
            continue;
        }
        // first edge strictly greater than `size`, minus one
        let idx = edges.partition_point(|e| *e <= size).saturating_sub(1).min(n_bins - 1);
        counts[idx] += 1;
    }
    if overflow > 0 {
        log::warn!("{source}: {overflow} boxes exceed the last histogram edge {}", edges[n_bins]);
    }
    Ok(SizeHistogram {
        source: source.to_string(),
        edges: edges.to_vec(),
        counts,
        overflow,
    })
}

/// A table column backed by one report metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ArAll,
    ArNovel,
    ArNovelSmall,
    ArNovelMedium,
    ArNovelLarge,
}

impl Metric {
    pub fn header(self, budget: usize) -> String {
        match self {
            Metric::ArAll => format!("AR_A@{budget}"),
            Metric::ArNovel => format!("AR_N@{budget}"),
            Metric::ArNovelSmall => format!("AR_N^s@{budget}"),
            Metric::ArNovelMedium => format!("AR_N^m@{budget}"),
            Metric::ArNovelLarge => format!("AR_N^l@{budget}"),
        }
    }

    fn value(self, r: &EvalReport) -> Option<f64> {
        match self {
            Metric::ArAll => Some(r.ar_all),
            Metric::ArNovel => Some(r.ar_novel),
            Metric::ArNovelSmall => r.ar_novel_small(),
            Metric::ArNovelMedium => r.ar_novel_medium(),
            Metric::ArNovelLarge => r.ar_novel_large(),
        }
    }

    pub fn parse(s: &str) -> Result<Metric> {
        Ok(match s {
            "ar_all" => Metric::ArAll,
            "ar_novel" => Metric::ArNovel,
            "ar_novel_small" => Metric::ArNovelSmall,
            "ar_novel_medium" => Metric::ArNovelMedium,
            "ar_novel_large" => Metric::ArNovelLarge,
            other => return Err(Error::validation(format!("unknown table metric {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableLayout {
    pub columns: Vec<Metric>,
    pub mark_max: bool,
}

impl Default for TableLayout {
    fn default() -> Self {
        TableLayout {
            columns: vec![
                Metric::ArAll,
                Metric::ArNovel,
                Metric::ArNovelSmall,
                Metric::ArNovelMedium,
                Metric::ArNovelLarge,
            ],
            mark_max: true,
        }
    }
}

/// Renders `rows` of `(label, report)` as an aligned Markdown table with
/// percentages to one decimal. Column maxima are wrapped in `**` when
/// `layout.mark_max` is set.
pub fn render_table(rows: &[(String, &EvalReport)], layout: &TableLayout) -> Result<String> {
    let Some((_, first)) = rows.first() else {
        return Err(Error::validation("no reports to tabulate"));
    };
    if layout.columns.is_empty() {
        return Err(Error::validation("table layout has no columns"));
    }
    if let Some((label, _)) = rows.iter().find(|(_, r)| r.config != first.config) {
        return Err(Error::validation(format!(
            "report {label:?} was evaluated with a different configuration"
        )));
    }
    let mut cells: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (label, r) in rows {
        let row = layout
            .columns
            .iter()
            .map(|m| {
                m.value(r).map(percent).ok_or_else(|| {
                    Error::validation(format!(
                        "report {label:?} has no {} (size strata disabled)",
                        m.header(r.config.budget)
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        cells.push(row);
    }
    let maxima: Vec<f64> = (0..layout.columns.len())
        .map(|j| cells.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();

    let mut header = vec!["method".to_string()];
    header.extend(layout.columns.iter().map(|m| m.header(first.config.budget)));
    let body: Vec<Vec<String>> = rows
        .iter()
        .zip(&cells)
        .map(|((label, _), row)| {
            let mut line = vec![label.clone()];
            line.extend(row.iter().zip(&maxima).map(|(v, max)| {
                if layout.mark_max && rows.len() > 1 && v == max {
                    format!("**{v:.1}**")
                } else {
                    format!("{v:.1}")
                }
            }));
            line
        })
        .collect();

    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            body.iter()
                .map(|r| r[j].len())
                .chain(std::iter::once(header[j].len()))
                .max()
                .unwrap_or(0)
                .max(3)
        })
        .collect();
    let mut out = String::new();
    let emit = |out: &mut String, cols: &[String]| {
        out.push('|');
        for (j, c) in cols.iter().enumerate() {
            if j == 0 {
                let _ = write!(out, " {c:<w$} |", w = widths[j]);
            } else {
                let _ = write!(out, " {c:>w$} |", w = widths[j]);
            }
        }
        out.push('\n');
    };
    emit(&mut out, &header);
    out.push('|');
    for (j, w) in widths.iter().enumerate() {
        if j == 0 {
            let _ = write!(out, " {} |", "-".repeat(*w));
        } else {
            let _ = write!(out, " {}: |", "-".repeat(w - 1));
        }
    }
    out.push('\n');
    for row in &body {
        emit(&mut out, row);
    }
    Ok(out)
}

/// Reads back a table produced by [`render_table`] as `(label, values)` rows.
pub fn parse_table(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    text.lines()
        .skip(2)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line
                .trim()
                .trim_matches('|')
                .split('|')
                .map(str::trim)
                .collect();
            let (label, values) = cols
                .split_first()
                .ok_or_else(|| Error::parse("table row", line))?;
            let values = values
                .iter()
                .map(|v| {
                    v.trim_matches('*')
                        .parse::<f64>()
                        .map_err(|e| Error::parse(format!("table cell {v:?}"), e))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((label.to_string(), values))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn square(side: f64) -> PseudoBox {
        PseudoBox {
            pseudo_id: 1,
            image_id: 1,
            bbox: BBox::new(0., 0., side, side).unwrap(),
            objectness: 0.9,
            source: "depth".into(),
        }
    }

    #[test]
    fn histogram_examples() {
        let h = size_histogram("d", &[], &DEFAULT_SIZE_EDGES).unwrap();
        assert!(h.counts.iter().all(|c| *c == 0));

        let h = size_histogram("d", &[square(32.)], &[0., 32., 96., f64::INFINITY]).unwrap();
        assert_eq!(h.counts, vec![0, 1, 0]);

        let h = size_histogram("d", &vec![square(20.); 5], &DEFAULT_SIZE_EDGES).unwrap();
        assert_eq!(h.counts.iter().filter(|c| **c > 0).count(), 1);
        assert_eq!(h.counts[1], 5);
    }

    #[test]
    fn histogram_last_bin_closed_and_overflow() {
        let h = size_histogram("d", &[square(512.), square(600.)], &DEFAULT_SIZE_EDGES).unwrap();
        assert_eq!(*h.counts.last().unwrap(), 1);
        assert_eq!(h.overflow, 1);
        assert_eq!(h.total(), 2);
    }

    #[test]
    fn histogram_rejects_bad_edges() {
        assert!(size_histogram("d", &[], &[0.]).is_err());
        assert!(size_histogram("d", &[], &[0., 5., 5.]).is_err());
        assert!(size_histogram("d", &[], &[1., 5.]).is_err());
    }

    #[test]
    fn matrix_needs_two_sources() {
        assert!(overlap_matrix(&[("a".into(), TopOne::new())], 0.5).is_err());
    }
}
