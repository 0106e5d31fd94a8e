//! Shared fixtures for the benchmarks.

use good_core::eval::Detection;
use good_core::synth::{as_detections, gen_corpus, simulate_source, SourceProfile, SynthSpec};
use good_core::{training_view, ClassSplit, Dataset, Proposal};

/// A mixed synthetic corpus with `n_images` images.
pub fn corpus(seed: u64, n_images: usize) -> (Dataset, ClassSplit, SynthSpec) {
    let spec = SynthSpec::mixed(seed, n_images);
    let (ds, split) = gen_corpus(&spec).expect("mixed spec is valid");
    (ds, split, spec)
}

/// Geometry-profile detections over the whole corpus.
pub fn detections(ds: &Dataset, seed: u64) -> Vec<Detection> {
    as_detections(&simulate_source(ds, &SourceProfile::geometry("bench"), seed).expect("profile is valid"))
}

/// Per-source proposals restricted to the training view, plus that view.
pub fn training_proposals(ds: &Dataset, split: &ClassSplit, spec: &SynthSpec) -> (Dataset, Vec<(String, Vec<Proposal>)>) {
    let train = training_view(ds, split);
    let sources = spec
        .sources
        .iter()
        .map(|p| (p.tag.clone(), simulate_source(&train, p, spec.seed).expect("profile is valid")))
        .collect();
    (train, sources)
}
