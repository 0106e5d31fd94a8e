//! COCO-format ground truth, base/novel class splits and split bookkeeping.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    pub supercategory: String,
}

/// Ordered category list with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Taxonomy {
    pub categories: Vec<Category>,
}

impl Taxonomy {
    pub fn new(categories: Vec<Category>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &categories {
            if !seen.insert(c.id) {
                return Err(Error::validation(format!("duplicate category id {}", c.id)));
            }
            if c.supercategory.is_empty() {
                return Err(Error::validation(format!(
                    "category {} ({}) has an empty supercategory",
                    c.id, c.name
                )));
            }
        }
        Ok(Taxonomy { categories })
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.categories.iter().map(|c| c.id).collect()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.categories.iter().any(|c| c.id == id)
    }

    pub fn by_name(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn by_id(&self, id: u64) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub file_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAnnotation {
    pub annotation_id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
    pub is_crowd: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub taxonomy: Taxonomy,
    pub images: Vec<ImageInfo>,
    pub annotations: Vec<GroundTruthAnnotation>,
}

impl Dataset {
    /// Builds a dataset, checking referential integrity and clipping boxes to
    /// their image bounds.
    pub fn new(
        taxonomy: Taxonomy,
        images: Vec<ImageInfo>,
        mut annotations: Vec<GroundTruthAnnotation>,
    ) -> Result<Self> {
        let mut dims = HashMap::with_capacity(images.len());
        for img in &images {
            if dims.insert(img.id, (img.width, img.height)).is_some() {
                return Err(Error::validation(format!("duplicate image id {}", img.id)));
            }
        }
        let cats = taxonomy.ids();
        let mut ann_ids = HashSet::with_capacity(annotations.len());
        for ann in &mut annotations {
            if !ann_ids.insert(ann.annotation_id) {
                return Err(Error::validation(format!(
                    "duplicate annotation id {}",
                    ann.annotation_id
                )));
            }
            let Some(&(w, h)) = dims.get(&ann.image_id) else {
                return Err(Error::validation(format!(
                    "annotation {} references missing image_id {}",
                    ann.annotation_id, ann.image_id
                )));
            };
            if !cats.contains(&ann.category_id) {
                return Err(Error::validation(format!(
                    "annotation {} references unknown category_id {}",
                    ann.annotation_id, ann.category_id
                )));
            }
            ann.bbox = ann.bbox.clip(w, h);
        }
        Ok(Dataset {
            taxonomy,
            images,
            annotations,
        })
    }

    pub fn image(&self, id: u64) -> Option<&ImageInfo> {
        self.images.iter().find(|i| i.id == id)
    }

    /// Annotations grouped by image id, in input order within each image.
    pub fn annotations_by_image(&self) -> HashMap<u64, Vec<&GroundTruthAnnotation>> {
        let mut map: HashMap<u64, Vec<&GroundTruthAnnotation>> = HashMap::new();
        for ann in &self.annotations {
            map.entry(ann.image_id).or_default().push(ann);
        }
        map
    }

    pub fn image_ids(&self) -> Vec<u64> {
        self.images.iter().map(|i| i.id).collect()
    }

    /// Restricts to the given images, keeping their annotations.
    pub fn subset_images(&self, keep: &HashSet<u64>) -> Dataset {
        Dataset {
            taxonomy: self.taxonomy.clone(),
            images: self
                .images
                .iter()
                .filter(|i| keep.contains(&i.id))
                .cloned()
                .collect(),
            annotations: self
                .annotations
                .iter()
                .filter(|a| keep.contains(&a.image_id))
                .cloned()
                .collect(),
        }
    }

    pub fn to_coco(&self) -> CocoFile {
        CocoFile {
            images: self
                .images
                .iter()
                .map(|i| CocoImage {
                    id: i.id,
                    width: i.width,
                    height: i.height,
                    file_name: i.file_name.clone(),
                })
                .collect(),
            annotations: self
                .annotations
                .iter()
                .map(|a| CocoAnnotation {
                    id: a.annotation_id,
                    image_id: a.image_id,
                    category_id: a.category_id,
                    bbox: a.bbox.to_xywh(),
                    iscrowd: u8::from(a.is_crowd),
                    area: Some(a.bbox.area()),
                })
                .collect(),
            categories: self
                .taxonomy
                .categories
                .iter()
                .map(|c| CocoCategory {
                    id: c.id,
                    name: c.name.clone(),
                    supercategory: Some(c.supercategory.clone()),
                })
                .collect(),
        }
    }

    pub fn from_coco(file: CocoFile) -> Result<Dataset> {
        let categories = file
            .categories
            .into_iter()
            .map(|c| {
                let supercategory = c.supercategory.unwrap_or_default();
                Category {
                    id: c.id,
                    name: c.name,
                    supercategory,
                }
            })
            .collect();
        let taxonomy = Taxonomy::new(categories)?;
        let images = file
            .images
            .into_iter()
            .map(|i| ImageInfo {
                id: i.id,
                width: i.width,
                height: i.height,
                file_name: i.file_name,
            })
            .collect();
        let annotations = file
            .annotations
            .into_iter()
            .map(|a| {
                let [x, y, w, h] = a.bbox;
                let bbox = BBox::from_xywh(x, y, w, h).map_err(|e| {
                    Error::parse(format!("annotations[id={}].bbox", a.id), e)
                })?;
                Ok(GroundTruthAnnotation {
                    annotation_id: a.id,
                    image_id: a.image_id,
                    category_id: a.category_id,
                    bbox,
                    is_crowd: a.iscrowd != 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(taxonomy, images, annotations)
    }
}

/// On-disk COCO annotation schema subset. Unknown fields are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoFile {
    pub images: Vec<CocoImage>,
    #[serde(default)]
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub file_name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    #[serde(default)]
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
    #[serde(default)]
    pub supercategory: Option<String>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text).map_err(|e| match e {
        Error::Parse { what, message } => Error::Parse {
            what: format!("{} ({what})", path.display()),
            message,
        },
        other => other,
    })
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let file: CocoFile =
        serde_json::from_str(text).map_err(|e| Error::parse("COCO annotation file", e))?;
    Dataset::from_coco(file)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_json(path, &ds.to_coco())
}

/// Partition of a taxonomy into known (base) and withheld (novel) classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub name: String,
    pub base_category_ids: BTreeSet<u64>,
    pub novel_category_ids: BTreeSet<u64>,
}

impl ClassSplit {
    /// Base set as given, novel set is the rest of `taxonomy`.
    pub fn from_base(
        name: impl Into<String>,
        taxonomy: &Taxonomy,
        base: BTreeSet<u64>,
    ) -> Result<Self> {
        let name = name.into();
        if let Some(missing) = base.iter().find(|id| !taxonomy.contains(**id)) {
            return Err(Error::validation(format!(
                "split {name}: base category id {missing} is not in the taxonomy"
            )));
        }
        let novel = taxonomy.ids().difference(&base).copied().collect();
        Ok(ClassSplit {
            name,
            base_category_ids: base,
            novel_category_ids: novel,
        })
    }

    pub fn is_base(&self, category_id: u64) -> bool {
        self.base_category_ids.contains(&category_id)
    }

    pub fn is_novel(&self, category_id: u64) -> bool {
        self.novel_category_ids.contains(&category_id)
    }

    /// Checks disjointness and that the union covers exactly `taxonomy`.
    pub fn check_against(&self, taxonomy: &Taxonomy) -> Result<()> {
        if let Some(id) = self.base_category_ids.intersection(&self.novel_category_ids).next() {
            return Err(Error::validation(format!(
                "split {}: category {id} is both base and novel",
                self.name
            )));
        }
        let union: BTreeSet<u64> = self
            .base_category_ids
            .union(&self.novel_category_ids)
            .copied()
            .collect();
        if union != taxonomy.ids() {
            return Err(Error::validation(format!(
                "split {} does not cover the dataset taxonomy",
                self.name
            )));
        }
        Ok(())
    }
}

/// A category reference in a split file: numeric id or category name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CategoryRef {
    Id(u64),
    Name(String),
}

/// Unresolved split definition, as read from a split file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDefinition {
    pub name: String,
    pub base: Vec<CategoryRef>,
}

impl SplitDefinition {
    pub fn resolve(&self, taxonomy: &Taxonomy) -> Result<ClassSplit> {
        let mut base = BTreeSet::new();
        for r in &self.base {
            let id = match r {
                CategoryRef::Id(id) => *id,
                CategoryRef::Name(name) => {
                    taxonomy
                        .by_name(name)
                        .ok_or_else(|| {
                            Error::validation(format!(
                                "split {}: unknown category name {name:?}",
                                self.name
                            ))
                        })?
                        .id
                }
            };
            base.insert(id);
        }
        ClassSplit::from_base(self.name.clone(), taxonomy, base)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("split file {}", path.display()), e))
    }
}

const COCO_CATEGORIES: [(u64, &str, &str); 80] = [
    (1, "person", "person"),
    (2, "bicycle", "vehicle"),
    (3, "car", "vehicle"),
    (4, "motorcycle", "vehicle"),
    (5, "airplane", "vehicle"),
    (6, "bus", "vehicle"),
    (7, "train", "vehicle"),
    (8, "truck", "vehicle"),
    (9, "boat", "vehicle"),
    (10, "traffic light", "outdoor"),
    (11, "fire hydrant", "outdoor"),
    (13, "stop sign", "outdoor"),
    (14, "parking meter", "outdoor"),
    (15, "bench", "outdoor"),
    (16, "bird", "animal"),
    (17, "cat", "animal"),
    (18, "dog", "animal"),
    (19, "horse", "animal"),
    (20, "sheep", "animal"),
    (21, "cow", "animal"),
    (22, "elephant", "animal"),
    (23, "bear", "animal"),
    (24, "zebra", "animal"),
    (25, "giraffe", "animal"),
    (27, "backpack", "accessory"),
    (28, "umbrella", "accessory"),
    (31, "handbag", "accessory"),
    (32, "tie", "accessory"),
    (33, "suitcase", "accessory"),
    (34, "frisbee", "sports"),
    (35, "skis", "sports"),
    (36, "snowboard", "sports"),
    (37, "sports ball", "sports"),
    (38, "kite", "sports"),
    (39, "baseball bat", "sports"),
    (40, "baseball glove", "sports"),
    (41, "skateboard", "sports"),
    (42, "surfboard", "sports"),
    (43, "tennis racket", "sports"),
    (44, "bottle", "kitchen"),
    (46, "wine glass", "kitchen"),
    (47, "cup", "kitchen"),
    (48, "fork", "kitchen"),
    (49, "knife", "kitchen"),
    (50, "spoon", "kitchen"),
    (51, "bowl", "kitchen"),
    (52, "banana", "food"),
    (53, "apple", "food"),
    (54, "sandwich", "food"),
    (55, "orange", "food"),
    (56, "broccoli", "food"),
    (57, "carrot", "food"),
    (58, "hot dog", "food"),
    (59, "pizza", "food"),
    (60, "donut", "food"),
    (61, "cake", "food"),
    (62, "chair", "furniture"),
    (63, "couch", "furniture"),
    (64, "potted plant", "furniture"),
    (65, "bed", "furniture"),
    (67, "dining table", "furniture"),
    (70, "toilet", "furniture"),
    (72, "tv", "electronic"),
    (73, "laptop", "electronic"),
    (74, "mouse", "electronic"),
    (75, "remote", "electronic"),
    (76, "keyboard", "electronic"),
    (77, "cell phone", "electronic"),
    (78, "microwave", "appliance"),
    (79, "oven", "appliance"),
    (80, "toaster", "appliance"),
    (81, "sink", "appliance"),
    (82, "refrigerator", "appliance"),
    (84, "book", "indoor"),
    (85, "clock", "indoor"),
    (86, "vase", "indoor"),
    (87, "scissors", "indoor"),
    (88, "teddy bear", "indoor"),
    (89, "hair drier", "indoor"),
    (90, "toothbrush", "indoor"),
];

/// The 20 PASCAL-VOC classes under their COCO names.
pub const VOC_CLASS_NAMES: [&str; 20] = [
    "person",
    "bird",
    "cat",
    "cow",
    "dog",
    "horse",
    "sheep",
    "airplane",
    "bicycle",
    "boat",
    "bus",
    "car",
    "motorcycle",
    "train",
    "bottle",
    "chair",
    "dining table",
    "potted plant",
    "couch",
    "tv",
];

/// Supercategory groups added cumulatively by the `supercat-N` splits.
const SUPERCATEGORY_STAGES: [&[&str]; 6] = [
    &["person"],
    &["vehicle"],
    &["outdoor", "animal"],
    &["accessory", "sports"],
    &["kitchen", "food"],
    &["furniture", "electronic", "appliance", "indoor"],
];

pub const BUILTIN_SPLITS: [&str; 8] = [
    "person",
    "voc",
    "supercat-1",
    "supercat-9",
    "supercat-24",
    "supercat-39",
    "supercat-56",
    "supercat-80",
];

/// The 80-class COCO detection taxonomy.
pub fn coco_taxonomy() -> Taxonomy {
    Taxonomy {
        categories: COCO_CATEGORIES
            .iter()
            .map(|&(id, name, sup)| Category {
                id,
                name: name.to_string(),
                supercategory: sup.to_string(),
            })
            .collect(),
    }
}

/// Base class names of a builtin split, by COCO category name.
pub fn builtin_split_definition(name: &str) -> Result<SplitDefinition> {
    let names: Vec<&str> = match name {
        "person" => vec!["person"],
        "voc" => VOC_CLASS_NAMES.to_vec(),
        _ => {
            let n: usize = name
                .strip_prefix("supercat-")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| unknown_split(name))?;
            let mut supers: Vec<&str> = Vec::new();
            let mut matched = false;
            for stage in SUPERCATEGORY_STAGES {
                supers.extend_from_slice(stage);
                let count = COCO_CATEGORIES
                    .iter()
                    .filter(|(_, _, s)| supers.contains(s))
                    .count();
                if count == n {
                    matched = true;
                    break;
                }
            }
            if !matched {
                return Err(unknown_split(name));
            }
            COCO_CATEGORIES
                .iter()
                .filter(|(_, _, s)| supers.contains(s))
                .map(|(_, n, _)| *n)
                .collect()
        }
    };
    Ok(SplitDefinition {
        name: name.to_string(),
        base: names
            .into_iter()
            .map(|n| CategoryRef::Name(n.to_string()))
            .collect(),
    })
}

fn unknown_split(name: &str) -> Error {
    Error::validation(format!(
        "unknown split {name:?}; expected one of {}",
        BUILTIN_SPLITS.join(", ")
    ))
}

/// A named benchmark split over the COCO taxonomy.
pub fn builtin_split(name: &str) -> Result<ClassSplit> {
    builtin_split_definition(name)?.resolve(&coco_taxonomy())
}

/// Keeps base-class annotations only, and only images that still have one.
/// Crowd annotations of base classes are kept.
pub fn training_view(ds: &Dataset, split: &ClassSplit) -> Dataset {
    let annotations: Vec<GroundTruthAnnotation> = ds
        .annotations
        .iter()
        .filter(|a| split.is_base(a.category_id))
        .cloned()
        .collect();
    let kept: HashSet<u64> = annotations.iter().map(|a| a.image_id).collect();
    Dataset {
        taxonomy: ds.taxonomy.clone(),
        images: ds
            .images
            .iter()
            .filter(|i| kept.contains(&i.id))
            .cloned()
            .collect(),
        annotations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub n_classes: usize,
    pub n_images: usize,
    pub n_instances: usize,
}

pub fn split_stats(ds: &Dataset, split: &ClassSplit) -> SplitStats {
    let view = training_view(ds, split);
    SplitStats {
        n_classes: split.base_category_ids.len(),
        n_images: view.images.len(),
        n_instances: view.annotations.len(),
    }
}

/// Image-level seeded partition into `(train, holdout)`; holdout receives
/// `ceil(fraction * n_images)` images. Both parts keep the input image order.
pub fn carve_holdout(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::validation(format!(
            "holdout fraction {fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut ids = ds.image_ids();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_holdout = ((fraction * ids.len() as f64).ceil() as usize).min(ids.len());
    let holdout: HashSet<u64> = ids[..n_holdout].iter().copied().collect();
    let train: HashSet<u64> = ids[n_holdout..].iter().copied().collect();
    Ok((ds.subset_images(&train), ds.subset_images(&holdout)))
}

/// Per-image annotation lists keyed in ascending image-id order.
pub fn group_by_image<'a, T, F>(items: &'a [T], key: F) -> BTreeMap<u64, Vec<&'a T>>
where
    F: Fn(&T) -> u64,
{
    let mut map: BTreeMap<u64, Vec<&T>> = BTreeMap::new();
    for item in items {
        map.entry(key(item)).or_default().push(item);
    }
    map
}
