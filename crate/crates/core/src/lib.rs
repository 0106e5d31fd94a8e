//! Non-neural core of a geometry-guided open-world detection pipeline.
//!
//! The crate covers everything around the detectors themselves: COCO-style
//! dataset handling and base/novel class splits, pseudo-label pool
//! construction from proposal files, modality ensembling, the training-loss
//! target math as pure functions, and open-world average recall evaluation.
//! Detector outputs are consumed as files; [`synth`] provides a deterministic
//! stand-in for them.

pub mod analysis;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod pseudolabel;
pub mod supervision;
pub mod synth;

pub use dataset::{
    builtin_split, carve_holdout, load_dataset, split_stats, training_view, Category, ClassSplit,
    Dataset, GroundTruthAnnotation, ImageInfo, SplitStats, Taxonomy,
};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{Detection, EvalConfig, EvalReport};
pub use geometry::{BBox, SizeClass};
pub use pseudolabel::{AnnotationPool, Proposal, PseudoBox};
