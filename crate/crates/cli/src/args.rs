use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "good",
    version,
    about = "Open-world class-agnostic detection toolkit: class splits, geometry-guided pseudo labels, \
             source ensembling and novel-class recall evaluation",
    after_help = "Exit status: 0 on success, 3 for I/O errors, 4 for malformed input files, \
                  5 for invalid arguments or data, 6 for violated pipeline invariants."
)]
pub struct Cli {
    /// Worker threads; 0 uses every available core. Outputs do not depend on
    /// this value [default: 0]
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// TOML file holding flag values (keys as flag names). Explicit flags
    /// take precedence; relative paths resolve against the file's directory
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count base classes, training images and instances per class split
    SplitStats(SplitStatsArgs),
    /// Filter proposals against base annotations, keep the top k per image,
    /// merge sources and write the pseudo-label pool
    PseudoLabel(PseudoLabelArgs),
    /// Average recall over all classes and over novel classes, with size
    /// strata, per-class recall and relative differences
    Evaluate(EvaluateArgs),
    /// Order pseudo-label sources greedily by holdout utility times
    /// uniqueness of their top-1 boxes
    EnsembleOrder(EnsembleArgs),
    /// Top-1 overlap matrix, pseudo-box size histograms and result tables
    Analyze(AnalyzeArgs),
    /// Generate a synthetic corpus with simulated proposal sources
    Synth(SynthArgs),
    /// Evaluate the supervision losses on an assignment file
    LossCheck(LossCheckArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// COCO-format annotation file
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,

    /// Class split: a builtin name (person, voc, supercat-1, supercat-9,
    /// supercat-24, supercat-39, supercat-56, supercat-80) or a JSON file
    /// `{"name": .., "base": [ids or names]}` [default: voc]
    #[arg(long, value_name = "NAME|FILE")]
    pub split: Option<String>,
}

#[derive(Debug, Args)]
pub struct SplitStatsArgs {
    /// COCO-format annotation file
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,

    /// Split to count; repeatable [default: the six cumulative supercategory
    /// splits supercat-1 .. supercat-80]
    #[arg(long, value_name = "NAME|FILE")]
    pub split: Vec<String>,

    /// Output directory; receives split_stats.json and split_stats.csv
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PseudoArgs {
    /// Pseudo boxes kept per image and source. 1 is the value selected on
    /// the holdout set for the geometric cues [default: 1]
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,

    /// Proposals overlapping a base annotation with IoU strictly above this
    /// are discarded [default: 0.5, reusing the merge threshold]
    #[arg(long, value_name = "IOU")]
    pub gt_filter_iou: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PseudoLabelArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Proposal file of one source as TAG=PATH; repeatable. Merge ties
    /// favor sources given earlier
    #[arg(long, value_name = "TAG=PATH")]
    pub proposals: Vec<String>,

    #[command(flatten)]
    pub pseudo: PseudoArgs,

    /// When merging sources, a box is dropped if its IoU with a kept box
    /// exceeds this [default: 0.5]
    #[arg(long, value_name = "IOU")]
    pub merge_iou: Option<f64>,

    /// Output directory; receives pseudo_<tag>.json, pseudo_pool.json and
    /// pseudo_label_summary.json
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecallArgs {
    /// Detections considered per image [default: 100]
    #[arg(long, value_name = "N")]
    pub budget: Option<usize>,

    /// Detections with IoU at least this against any base annotation are
    /// removed before novel-class recall is computed [default: 0.5]
    #[arg(long, value_name = "IOU")]
    pub base_assoc_iou: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Detection file as TAG=PATH or PATH (tag "detections"); repeatable
    #[arg(long, value_name = "[TAG=]PATH")]
    pub detections: Vec<String>,

    #[command(flatten)]
    pub recall: RecallArgs,

    /// Detection budget of the per-class recall [default: 5]
    #[arg(long, value_name = "N")]
    pub per_class_budget: Option<usize>,

    /// Tag whose per-class recall is the reference of the relative
    /// differences (x - ref) / ref
    #[arg(long, value_name = "TAG")]
    pub reference: Option<String>,

    /// Output directory; receives report_<tag>.json, summary.csv, table.md
    /// and, with --reference, relative_diff.json
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Proposal file of one source as TAG=PATH; repeatable
    #[arg(long, value_name = "TAG=PATH")]
    pub proposals: Vec<String>,

    /// Holdout detections of the detector trained with each source's pseudo
    /// labels, as TAG=PATH; one per proposal tag
    #[arg(long, value_name = "TAG=PATH")]
    pub detections: Vec<String>,

    /// Holdout detections of the detector trained on base annotations only
    #[arg(long, value_name = "FILE")]
    pub baseline: Option<PathBuf>,

    /// Fraction of training images set aside to measure utility
    /// [default: 0.1]
    #[arg(long, value_name = "F")]
    pub holdout_fraction: Option<f64>,

    /// Seed of the holdout draw [default: 0]
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    #[command(flatten)]
    pub pseudo: PseudoArgs,

    #[command(flatten)]
    pub recall: RecallArgs,

    /// Two top-1 boxes agree when their IoU reaches this [default: 0.5]
    #[arg(long, value_name = "IOU")]
    pub overlap_iou: Option<f64>,

    /// Output directory; receives ensemble_order.json and ensemble_order.csv
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Proposal file of one source as TAG=PATH; repeatable. Enables the
    /// overlap matrix (two or more sources) and size histograms
    #[arg(long, value_name = "TAG=PATH")]
    pub proposals: Vec<String>,

    #[command(flatten)]
    pub pseudo: PseudoArgs,

    /// Two top-1 boxes agree when their IoU reaches this [default: 0.5]
    #[arg(long, value_name = "IOU")]
    pub overlap_iou: Option<f64>,

    /// Comma-separated sqrt(area) histogram edges in pixels
    /// [default: 0,16,32,64,96,128,192,256,512]
    #[arg(long, value_name = "E0,E1,..", value_delimiter = ',')]
    pub size_edges: Vec<f64>,

    /// Evaluation report as LABEL=PATH; repeatable. Rows of table.md
    #[arg(long, value_name = "LABEL=PATH")]
    pub reports: Vec<String>,

    /// Output directory; receives overlap_matrix.{json,csv},
    /// size_histograms.{json,csv} and table.md as applicable
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Master seed of the corpus and every simulated source [default: 0]
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Number of images [default: 100]
    #[arg(long, value_name = "N")]
    pub n_images: Option<usize>,

    /// JSON corpus specification replacing the built-in mixed corpus; its
    /// seed and image count are overridden by the flags when given
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,

    /// Output directory; receives dataset.json, split.json,
    /// proposals_<tag>.json, detections_baseline.json and loss_check.json
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    /// Assignment file: images with candidates, base and pseudo boxes
    #[arg(long, value_name = "FILE")]
    pub assignment: Option<PathBuf>,

    /// Candidates match a box at IoU at least this [default: the file's
    /// positive_iou, else 0.5]
    #[arg(long, value_name = "IOU")]
    pub positive_iou: Option<f64>,

    /// Output directory; receives losses.json
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}
