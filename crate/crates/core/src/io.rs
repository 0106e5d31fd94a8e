//! File formats shared across the pipeline.
//!
//! Proposal, detection and pseudo-pool files all use the COCO results
//! layout: a JSON array of records with `image_id`, `bbox` as `[x, y, w, h]`
//! and `score`, plus optional fields per file kind.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{GroundTruthAnnotation, ImageInfo};
use crate::error::{Error, Result};
use crate::eval::Detection;
use crate::geometry::BBox;
use crate::pseudolabel::{AnnotationPool, Proposal, PseudoBox};
use crate::supervision::Candidate;

/// One record of a proposal, detection or pseudo-pool file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudo_id: Option<u64>,
    pub image_id: u64,
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centerness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou_pred: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl ResultRecord {
    fn bbox(&self, index: usize) -> Result<BBox> {
        let [x, y, w, h] = self.bbox;
        BBox::from_xywh(x, y, w, h).map_err(|e| Error::parse(format!("record {index}.bbox"), e))
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

/// Pretty-printed JSON with a trailing newline. Output is a pure function of
/// `value`.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn proposals_from_records(records: &[ResultRecord], default_source: &str) -> Result<Vec<Proposal>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let source = r.source.clone().unwrap_or_else(|| default_source.to_string());
            let proposal = match (r.centerness, r.iou_pred) {
                (Some(c), Some(iou)) => Proposal::with_subscores(r.image_id, r.bbox(i)?, c, iou, source),
                _ => Proposal::with_score(r.image_id, r.bbox(i)?, r.score, source),
            };
            proposal.map_err(|e| Error::parse(format!("record {i}"), e))
        })
        .collect()
}

pub fn read_proposals(path: impl AsRef<Path>, default_source: &str) -> Result<Vec<Proposal>> {
    let path = path.as_ref();
    let records: Vec<ResultRecord> = read_json(path)?;
    proposals_from_records(&records, default_source).map_err(|e| match e {
        Error::Parse { what, message } => Error::Parse {
            what: format!("{} ({what})", path.display()),
            message,
        },
        other => other,
    })
}

pub fn proposal_records(proposals: &[Proposal]) -> Vec<ResultRecord> {
    proposals
        .iter()
        .map(|p| ResultRecord {
            pseudo_id: None,
            image_id: p.image_id,
            bbox: p.bbox.to_xywh(),
            score: p.objectness,
            centerness: p.centerness,
            iou_pred: p.iou_score,
            source: Some(p.source.clone()),
        })
        .collect()
}

pub fn write_proposals(path: impl AsRef<Path>, proposals: &[Proposal]) -> Result<()> {
    write_json(path, &proposal_records(proposals))
}

pub fn pseudo_records(boxes: &[PseudoBox]) -> Vec<ResultRecord> {
    boxes
        .iter()
        .map(|p| ResultRecord {
            pseudo_id: Some(p.pseudo_id),
            image_id: p.image_id,
            bbox: p.bbox.to_xywh(),
            score: p.objectness,
            centerness: None,
            iou_pred: None,
            source: Some(p.source.clone()),
        })
        .collect()
}

pub fn write_pseudo_pool(path: impl AsRef<Path>, boxes: &[PseudoBox]) -> Result<()> {
    write_json(path, &pseudo_records(boxes))
}

/// Reads a pseudo-pool file. Records lacking a `pseudo_id` are numbered by
/// position, starting at 1.
pub fn read_pseudo_pool(path: impl AsRef<Path>, default_source: &str) -> Result<Vec<PseudoBox>> {
    let path = path.as_ref();
    let records: Vec<ResultRecord> = read_json(path)?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(PseudoBox {
                pseudo_id: r.pseudo_id.unwrap_or(i as u64 + 1),
                image_id: r.image_id,
                bbox: r
                    .bbox(i)
                    .map_err(|e| Error::parse(path.display().to_string(), e))?,
                objectness: r.score,
                source: r.source.clone().unwrap_or_else(|| default_source.to_string()),
            })
        })
        .collect()
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let records: Vec<ResultRecord> = read_json(path)?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let bbox = r
                .bbox(i)
                .map_err(|e| Error::parse(path.display().to_string(), e))?;
            Detection::new(r.image_id, bbox, r.score)
                .map_err(|e| Error::parse(format!("{} record {i}", path.display()), e))
        })
        .collect()
}

pub fn detection_records(dets: &[Detection]) -> Vec<ResultRecord> {
    dets.iter()
        .map(|d| ResultRecord {
            pseudo_id: None,
            image_id: d.image_id,
            bbox: d.bbox.to_xywh(),
            score: d.score,
            centerness: None,
            iou_pred: None,
            source: None,
        })
        .collect()
}

pub fn write_detections(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    write_json(path, &detection_records(dets))
}

/// A box with an id, as stored in loss-check files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub id: u64,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub iscrowd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub candidate_id: u64,
    pub anchor: [f64; 4],
    pub label_prob: f64,
    pub predicted_box: [f64; 4],
    pub objectness: f64,
}

/// One image of a loss-check file: head outputs plus the supervision boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCheckImage {
    pub image_id: u64,
    pub width: f64,
    pub height: f64,
    pub candidates: Vec<CandidateRecord>,
    #[serde(default)]
    pub base: Vec<BoxRecord>,
    #[serde(default)]
    pub pseudo: Vec<BoxRecord>,
}

fn default_positive_iou() -> f64 {
    crate::supervision::DEFAULT_POSITIVE_IOU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCheckFile {
    #[serde(default = "default_positive_iou")]
    pub positive_iou: f64,
    pub images: Vec<LossCheckImage>,
}

fn xywh(b: [f64; 4], what: impl FnOnce() -> String) -> Result<BBox> {
    BBox::from_xywh(b[0], b[1], b[2], b[3]).map_err(|e| Error::parse(what(), e))
}

impl LossCheckImage {
    pub fn from_parts(
        image: &ImageInfo,
        candidates: &[Candidate],
        base: &[GroundTruthAnnotation],
        pseudo: &[PseudoBox],
    ) -> Self {
        LossCheckImage {
            image_id: image.id,
            width: image.width,
            height: image.height,
            candidates: candidates
                .iter()
                .map(|c| CandidateRecord {
                    candidate_id: c.candidate_id,
                    anchor: c.anchor.to_xywh(),
                    label_prob: c.label_prob,
                    predicted_box: c.predicted_box.to_xywh(),
                    objectness: c.objectness,
                })
                .collect(),
            base: base
                .iter()
                .map(|a| BoxRecord { id: a.annotation_id, bbox: a.bbox.to_xywh(), iscrowd: a.is_crowd })
                .collect(),
            pseudo: pseudo
                .iter()
                .map(|p| BoxRecord { id: p.pseudo_id, bbox: p.bbox.to_xywh(), iscrowd: false })
                .collect(),
        }
    }

    /// Typed view: image, candidates and a single-image pool.
    pub fn to_parts(&self) -> Result<(ImageInfo, Vec<Candidate>, AnnotationPool)> {
        let id = self.image_id;
        let image = ImageInfo { id, width: self.width, height: self.height, file_name: String::new() };
        let candidates = self
            .candidates
            .iter()
            .map(|c| {
                let what = || format!("image {id} candidate {}", c.candidate_id);
                Candidate::new(
                    c.candidate_id,
                    xywh(c.anchor, what)?,
                    c.label_prob,
                    xywh(c.predicted_box, what)?,
                    c.objectness,
                )
                .map_err(|e| Error::parse(what(), e))
            })
            .collect::<Result<Vec<_>>>()?;
        let base = self
            .base
            .iter()
            .map(|b| {
                Ok(GroundTruthAnnotation {
                    annotation_id: b.id,
                    image_id: id,
                    category_id: 0,
                    bbox: xywh(b.bbox, || format!("image {id} base box {}", b.id))?,
                    is_crowd: b.iscrowd,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let pseudo = self
            .pseudo
            .iter()
            .map(|b| {
                Ok(PseudoBox {
                    pseudo_id: b.id,
                    image_id: id,
                    bbox: xywh(b.bbox, || format!("image {id} pseudo box {}", b.id))?,
                    objectness: 1.0,
                    source: String::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((image, candidates, AnnotationPool { base, pseudo }))
    }
}
