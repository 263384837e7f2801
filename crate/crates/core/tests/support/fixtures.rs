//! Feature bundles and labelled samples for the synthetic corpus.

use std::collections::BTreeMap;

use ugvq::features::{BackboneRegistry, FeatureConfig, FeatureExtractor};
use ugvq::model::{QualityTriple, Sample};
use ugvq::synthetic::SyntheticCorpus;
use ugvq::FeatureBundle;

pub fn extractor() -> FeatureExtractor {
    FeatureExtractor::new(&FeatureConfig::default(), &BackboneRegistry::default()).unwrap()
}

/// Bundles from in-memory frames, keyed by video id.
pub fn bundles(corpus: &SyntheticCorpus) -> BTreeMap<String, FeatureBundle> {
    let ex = extractor();
    corpus
        .manifest
        .videos
        .iter()
        .map(|v| {
            let frames = corpus.frames(&v.video_id).unwrap();
            let prompt = &corpus.manifest.prompt(&v.prompt_id).unwrap().text;
            (v.video_id.clone(), ex.extract(&frames, prompt).unwrap())
        })
        .collect()
}

/// Every video with its three labels, in manifest order.
pub fn samples(corpus: &SyntheticCorpus, bundles: &BTreeMap<String, FeatureBundle>) -> Vec<Sample> {
    corpus
        .manifest
        .videos
        .iter()
        .map(|v| {
            let m = corpus.manifest.mos_for(&v.video_id).unwrap();
            Sample {
                video_id: v.video_id.clone(),
                bundle: bundles[&v.video_id].clone(),
                target: QualityTriple::new(m.spatial.unwrap(), m.temporal.unwrap(), m.alignment.unwrap()),
            }
        })
        .collect()
}
