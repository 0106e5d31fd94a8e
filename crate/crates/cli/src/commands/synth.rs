use std::collections::HashSet;

use good_core::dataset::{save_dataset, CategoryRef, SplitDefinition};
use good_core::io::{read_json, write_json, write_proposals, LossCheckFile, LossCheckImage};
use good_core::pseudolabel::PseudoBox;
use good_core::supervision::DEFAULT_POSITIVE_IOU;
use good_core::synth::{gen_corpus, simulate_candidates, simulate_source, SourceProfile, SynthSpec};
use good_core::{training_view, Error, Result};

use super::out_dir;
use crate::args::SynthArgs;
use crate::config::{pick, Settings};

/// Images included in the loss-check fixture.
const LOSS_CHECK_IMAGES: usize = 16;
const CANDIDATES_PER_IMAGE: usize = 24;

pub fn run(args: SynthArgs, cfg: &Settings) -> Result<()> {
    let seed = args.seed.or(cfg.seed);
    let n_images = args.n_images.or(cfg.n_images);
    let mut spec = match args.spec.or(cfg.spec.clone()) {
        Some(path) => read_json::<SynthSpec>(&path)?,
        None => SynthSpec::mixed(0, 100),
    };
    spec.seed = pick(seed, None, spec.seed);
    spec.n_images = pick(n_images, None, spec.n_images);
    let out = out_dir(args.out, cfg)?;

    let (ds, split) = gen_corpus(&spec)?;
    save_dataset(&ds, out.join("dataset.json"))?;
    let def = SplitDefinition {
        name: split.name.clone(),
        base: split.base_category_ids.iter().map(|id| CategoryRef::Id(*id)).collect(),
    };
    write_json(out.join("split.json"), &def)?;

    let mut seen = HashSet::new();
    for profile in &spec.sources {
        if !seen.insert(profile.tag.as_str()) {
            return Err(Error::validation(format!("source tag {:?} appears twice in the spec", profile.tag)));
        }
        let props = simulate_source(&ds, profile, spec.seed)?;
        write_proposals(out.join(format!("proposals_{}.json", profile.tag)), &props)?;
    }

    // a detector trained on base classes only: it finds base objects
    let train = training_view(&ds, &split);
    let baseline = simulate_source(&train, &SourceProfile::appearance("baseline"), spec.seed)?;
    good_core::io::write_detections(out.join("detections_baseline.json"), &good_core::synth::as_detections(&baseline))?;

    let fixture_ids: HashSet<u64> = ds.images.iter().take(LOSS_CHECK_IMAGES).map(|i| i.id).collect();
    let fixture = ds.subset_images(&fixture_ids);
    let by_image = fixture.annotations_by_image();
    let images = simulate_candidates(&fixture, spec.seed, CANDIDATES_PER_IMAGE)
        .into_iter()
        .map(|(id, cands)| {
            let image = fixture.image(id).expect("candidate image comes from the dataset");
            let anns = by_image.get(&id).cloned().unwrap_or_default();
            let base: Vec<_> = anns.iter().filter(|a| split.is_base(a.category_id)).map(|a| (*a).clone()).collect();
            // novel objects stand in for pseudo boxes
            let pseudo: Vec<PseudoBox> = anns
                .iter()
                .filter(|a| split.is_novel(a.category_id))
                .map(|a| PseudoBox {
                    pseudo_id: a.annotation_id,
                    image_id: id,
                    bbox: a.bbox,
                    objectness: 1.0,
                    source: String::new(),
                })
                .collect();
            LossCheckImage::from_parts(image, &cands, &base, &pseudo)
        })
        .collect();
    write_json(
        out.join("loss_check.json"),
        &LossCheckFile { positive_iou: DEFAULT_POSITIVE_IOU, images },
    )
}
