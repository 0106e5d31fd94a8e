//! Deterministic synthetic corpora and proposal-source simulation.
//!
//! Every image draws from its own RNG seeded by `(master seed, image index)`,
//! so generation can run in parallel without changing the output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Category, ClassSplit, Dataset, GroundTruthAnnotation, ImageInfo, Taxonomy};
use crate::error::{Error, Result};
use crate::eval::Detection;
use crate::geometry::BBox;
use crate::pseudolabel::Proposal;
use crate::supervision::Candidate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub id: u64,
    pub name: String,
    pub supercategory: String,
    pub base: bool,
    /// Objects per image, drawn uniformly from `[min_count, max_count]`.
    pub min_count: usize,
    pub max_count: usize,
    /// Side length (sqrt of area) range in pixels.
    pub min_side: f64,
    pub max_side: f64,
}

/// Behaviour of a simulated proposal network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub tag: String,
    /// Probability of proposing an object, indexed small/medium/large.
    pub recall: [f64; 3],
    /// Per-corner Gaussian jitter, pixels.
    pub jitter_sigma: f64,
    pub score_noise_sigma: f64,
    /// Expected false positives per image.
    pub false_positives_per_image: f64,
}

impl SourceProfile {
    pub fn perfect(tag: &str) -> Self {
        SourceProfile {
            tag: tag.to_string(),
            recall: [1.0; 3],
            jitter_sigma: 0.0,
            score_noise_sigma: 0.0,
            false_positives_per_image: 0.0,
        }
    }

    /// Favors large objects.
    pub fn geometry(tag: &str) -> Self {
        SourceProfile {
            tag: tag.to_string(),
            recall: [0.15, 0.55, 0.9],
            jitter_sigma: 2.0,
            score_noise_sigma: 0.05,
            false_positives_per_image: 1.0,
        }
    }

    /// Favors small objects.
    pub fn appearance(tag: &str) -> Self {
        SourceProfile {
            tag: tag.to_string(),
            recall: [0.8, 0.5, 0.25],
            jitter_sigma: 2.0,
            score_noise_sigma: 0.05,
            false_positives_per_image: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.recall.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::validation(format!(
                "profile {}: recall probabilities must lie in [0, 1]",
                self.tag
            )));
        }
        for (name, v) in [
            ("jitter_sigma", self.jitter_sigma),
            ("score_noise_sigma", self.score_noise_sigma),
            ("false_positives_per_image", self.false_positives_per_image),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!(
                    "profile {}: {name} must be finite and non-negative",
                    self.tag
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_images: usize,
    pub image_width: f64,
    pub image_height: f64,
    pub classes: Vec<SynthClass>,
    #[serde(default)]
    pub sources: Vec<SourceProfile>,
    /// Upper bound on pairwise IoU between objects of one image.
    #[serde(default = "default_placement_iou")]
    pub max_placement_iou: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_placement_iou() -> f64 {
    0.3
}

fn default_attempts() -> usize {
    500
}

fn class(id: u64, name: &str, sup: &str, base: bool, count: (usize, usize), side: (f64, f64)) -> SynthClass {
    SynthClass {
        id,
        name: name.to_string(),
        supercategory: sup.to_string(),
        base,
        min_count: count.0,
        max_count: count.1,
        min_side: side.0,
        max_side: side.1,
    }
}

impl SynthSpec {
    /// A mixed corpus: two base classes and four novel ones spanning all
    /// size strata, with a geometry-biased and an appearance-biased source.
    pub fn mixed(seed: u64, n_images: usize) -> Self {
        SynthSpec {
            seed,
            n_images,
            image_width: 640.0,
            image_height: 480.0,
            classes: vec![
                class(1, "walker", "agent", true, (0, 2), (40.0, 160.0)),
                class(2, "cart", "vehicle", true, (0, 1), (60.0, 200.0)),
                class(3, "pebble", "small-things", false, (0, 3), (8.0, 30.0)),
                class(4, "crate", "containers", false, (0, 2), (34.0, 90.0)),
                class(5, "shed", "structures", false, (0, 1), (100.0, 220.0)),
                class(6, "lamp", "fixtures", false, (0, 2), (20.0, 120.0)),
            ],
            sources: vec![
                SourceProfile::geometry("depth"),
                SourceProfile::geometry("normal"),
                SourceProfile::appearance("rgb"),
            ],
            max_placement_iou: default_placement_iou(),
            max_attempts: default_attempts(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::validation("synthetic image size must be positive"));
        }
        let max_fit = self.image_width.min(self.image_height);
        for c in &self.classes {
            if c.min_count > c.max_count {
                return Err(Error::validation(format!("class {}: min_count > max_count", c.name)));
            }
            if !(c.min_side > 0.0 && c.min_side <= c.max_side && c.max_side <= max_fit) {
                return Err(Error::validation(format!(
                    "class {}: side range [{}, {}] must be positive and fit the image",
                    c.name, c.min_side, c.max_side
                )));
            }
        }
        for s in &self.sources {
            s.validate()?;
        }
        Ok(())
    }

    pub fn taxonomy(&self) -> Result<Taxonomy> {
        Taxonomy::new(
            self.classes
                .iter()
                .map(|c| Category {
                    id: c.id,
                    name: c.name.clone(),
                    supercategory: c.supercategory.clone(),
                })
                .collect(),
        )
    }

    pub fn split(&self) -> Result<ClassSplit> {
        ClassSplit::from_base(
            "synthetic",
            &self.taxonomy()?,
            self.classes.iter().filter(|c| c.base).map(|c| c.id).collect(),
        )
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the `index`-th stream under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a, stable across platforms and releases
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn random_box(rng: &mut ChaCha8Rng, side: (f64, f64), width: f64, height: f64) -> BBox {
    let s = if side.1 > side.0 { rng.random_range(side.0..=side.1) } else { side.0 };
    let aspect: f64 = rng.random_range(0.5..=2.0);
    let w = (s * aspect.sqrt()).min(width);
    let h = (s / aspect.sqrt()).min(height);
    let x = rng.random_range(0.0..=(width - w));
    let y = rng.random_range(0.0..=(height - h));
    BBox { x1: x, y1: y, x2: x + w, y2: y + h }
}

fn generate_image(spec: &SynthSpec, index: usize) -> Result<Vec<(u64, BBox)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, index as u64));
    let mut placed: Vec<(u64, BBox)> = Vec::new();
    for c in &spec.classes {
        let count = rng.random_range(c.min_count..=c.max_count);
        for _ in 0..count {
            let mut attempt = 0;
            loop {
                let b = random_box(&mut rng, (c.min_side, c.max_side), spec.image_width, spec.image_height);
                if placed.iter().all(|(_, p)| p.iou(&b) <= spec.max_placement_iou) {
                    placed.push((c.id, b));
                    break;
                }
                attempt += 1;
                if attempt >= spec.max_attempts {
                    return Err(Error::validation(format!(
                        "image {index} is overcrowded: could not place a {} after {} attempts",
                        c.name, spec.max_attempts
                    )));
                }
            }
        }
    }
    Ok(placed)
}

/// Generates a corpus with image ids `1..=n_images` and sequential
/// annotation ids.
pub fn gen_corpus(spec: &SynthSpec) -> Result<(Dataset, ClassSplit)> {
    spec.validate()?;
    let taxonomy = spec.taxonomy()?;
    let split = spec.split()?;
    let per_image: Vec<Vec<(u64, BBox)>> = (0..spec.n_images)
        .into_par_iter()
        .map(|i| generate_image(spec, i))
        .collect::<Result<_>>()?;
    let mut images = Vec::with_capacity(spec.n_images);
    let mut annotations = Vec::new();
    for (i, objects) in per_image.into_iter().enumerate() {
        let image_id = i as u64 + 1;
        images.push(ImageInfo {
            id: image_id,
            width: spec.image_width,
            height: spec.image_height,
            file_name: format!("synth_{image_id:06}.png"),
        });
        for (category_id, bbox) in objects {
            annotations.push(GroundTruthAnnotation {
                annotation_id: annotations.len() as u64 + 1,
                image_id,
                category_id,
                bbox,
                is_crowd: false,
            });
        }
    }
    Ok((Dataset::new(taxonomy, images, annotations)?, split))
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative")
}

fn jitter(rng: &mut ChaCha8Rng, b: &BBox, sigma: f64, width: f64, height: f64) -> BBox {
    if sigma == 0.0 {
        return *b;
    }
    let n = normal(sigma);
    let xs = [b.x1 + n.sample(rng), b.x2 + n.sample(rng)];
    let ys = [b.y1 + n.sample(rng), b.y2 + n.sample(rng)];
    BBox {
        x1: xs[0].min(xs[1]),
        y1: ys[0].min(ys[1]),
        x2: xs[0].max(xs[1]),
        y2: ys[0].max(ys[1]),
    }
    .clip(width, height)
}

fn noisy_score(rng: &mut ChaCha8Rng, base: f64, sigma: f64) -> f64 {
    let noise = if sigma == 0.0 { 0.0 } else { normal(sigma).sample(rng) };
    (base + noise).clamp(0.0, 1.0)
}

fn simulate_image(
    image: &ImageInfo,
    gts: &[&GroundTruthAnnotation],
    profile: &SourceProfile,
    seed: u64,
) -> Vec<Proposal> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ tag_hash(&profile.tag), image.id));
    let mut out = Vec::new();
    let push = |out: &mut Vec<Proposal>, bbox: BBox, score: f64| {
        out.push(
            Proposal::with_subscores(image.id, bbox, score, score, profile.tag.clone())
                .expect("score clamped to [0, 1]"),
        );
    };
    for g in gts.iter().filter(|g| !g.is_crowd) {
        let p = profile.recall[g.bbox.size_class().index()];
        if !rng.random_bool(p) {
            continue;
        }
        let b = jitter(&mut rng, &g.bbox, profile.jitter_sigma, image.width, image.height);
        let score = noisy_score(&mut rng, b.iou(&g.bbox), profile.score_noise_sigma);
        push(&mut out, b, score);
    }
    let rate = profile.false_positives_per_image;
    let n_fp = rate.floor() as usize + usize::from(rng.random_bool(rate.fract()));
    let max_side = (image.width.min(image.height) / 2.0).max(1.0);
    for _ in 0..n_fp {
        let b = random_box(&mut rng, (1.0_f64.min(max_side), max_side), image.width, image.height);
        let best = gts.iter().map(|g| g.bbox.iou(&b)).fold(0.0, f64::max);
        let score = noisy_score(&mut rng, best, profile.score_noise_sigma);
        push(&mut out, b, score);
    }
    out
}

/// Simulated proposals of one source over `ds`, ordered by image.
pub fn simulate_source(ds: &Dataset, profile: &SourceProfile, seed: u64) -> Result<Vec<Proposal>> {
    profile.validate()?;
    let by_image = ds.annotations_by_image();
    let per_image: Vec<Vec<Proposal>> = ds
        .images
        .par_iter()
        .map(|img| {
            let gts: &[&GroundTruthAnnotation] = by_image.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
            simulate_image(img, gts, profile, seed)
        })
        .collect();
    Ok(per_image.into_iter().flatten().collect())
}

/// Proposals reinterpreted as class-agnostic detections.
pub fn as_detections(proposals: &[Proposal]) -> Vec<Detection> {
    proposals
        .iter()
        .map(|p| Detection {
            image_id: p.image_id,
            bbox: p.bbox,
            score: p.objectness,
        })
        .collect()
}

/// Non-crowd ground truths of the picked categories, counted per size class.
pub fn size_census(ds: &Dataset, pick: impl Fn(u64) -> bool) -> [usize; 3] {
    let mut out = [0; 3];
    for a in ds.annotations.iter().filter(|a| !a.is_crowd && pick(a.category_id)) {
        out[a.bbox.size_class().index()] += 1;
    }
    out
}

/// Random detector-head candidates for each image of `ds`: most anchors are
/// jittered copies of a ground truth box, the rest are placed at random.
/// Useful as loss fixtures; the stream is independent of the proposal
/// simulator.
pub fn simulate_candidates(ds: &Dataset, seed: u64, per_image: usize) -> Vec<(u64, Vec<Candidate>)> {
    let by_image = ds.annotations_by_image();
    ds.images
        .par_iter()
        .map(|img| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ tag_hash("candidates"), img.id));
            let gts: &[&GroundTruthAnnotation] = by_image.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
            let max_side = (img.width.min(img.height) / 2.0).max(1.0);
            let cands = (0..per_image)
                .map(|i| {
                    let anchor = if !gts.is_empty() && rng.random_bool(0.7) {
                        let g = gts[rng.random_range(0..gts.len())];
                        jitter(&mut rng, &g.bbox, 4.0, img.width, img.height)
                    } else {
                        random_box(&mut rng, (1.0_f64.min(max_side), max_side), img.width, img.height)
                    };
                    let predicted = jitter(&mut rng, &anchor, 3.0, img.width, img.height);
                    let label_prob = rng.random_range(0.0..=1.0);
                    let objectness = rng.random_range(0.0..=1.0);
                    Candidate::new(i as u64 + 1, anchor, label_prob, predicted, objectness)
                        .expect("probabilities drawn from [0, 1]")
                })
                .collect();
            (img.id, cands)
        })
        .collect()
}
