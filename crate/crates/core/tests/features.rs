mod support;

use std::fs;

use ugvq::corpus::{load_manifest, FrameDecoder};
use ugvq::features::{
    extract_all, BackboneRegistry, BackboneSpec, FeatureCache, FeatureConfig, FeatureError, FeatureExtractor,
};
use ugvq::synthetic::{CorpusSpec, SyntheticCorpus};
use ugvq::FeatureBundle;

fn small_spec() -> CorpusSpec {
    CorpusSpec { prompts: 3, videos_per_prompt: 2, ..Default::default() }
}

#[test]
fn decoded_clips_match_in_memory_frames() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = SyntheticCorpus::generate(small_spec());
    let path = corpus.write(dir.path()).unwrap();
    let manifest = load_manifest(&path).unwrap();
    let decoder = FrameDecoder::default();
    let ex = support::fixtures::extractor();
    let in_memory = support::fixtures::bundles(&corpus);
    let clips: Vec<_> = manifest.videos.iter().collect();
    let (bundles, stats) = extract_all(&ex, &decoder, &manifest, &clips, None).unwrap();
    assert_eq!(stats.encoded, clips.len());
    for (clip, b) in clips.iter().zip(&bundles) {
        assert_eq!(b, &in_memory[&clip.video_id]);
        assert_eq!(b.shapes(), ex.shapes());
        assert!(b.is_finite());
    }
}

#[test]
fn cache_hits_skip_encoding_and_corruption_recovers() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = SyntheticCorpus::generate(small_spec());
    corpus.write(&dir.path().join("data")).unwrap();
    let manifest = &corpus.manifest;
    let decoder = FrameDecoder::default();
    let ex = support::fixtures::extractor();
    let cache = FeatureCache::open(dir.path().join("cache"), &ex.fingerprint()).unwrap();
    let clips: Vec<_> = manifest.videos.iter().collect();

    let (first, s1) = extract_all(&ex, &decoder, manifest, &clips, Some(&cache)).unwrap();
    assert_eq!((s1.hits, s1.encoded, s1.recovered), (0, 6, 0));
    let calls = ex.invocations();

    let (second, s2) = extract_all(&ex, &decoder, manifest, &clips, Some(&cache)).unwrap();
    assert_eq!((s2.hits, s2.encoded, s2.recovered), (6, 0, 0));
    assert_eq!(ex.invocations(), calls);
    assert_eq!(first, second);

    let victim = cache.entry_path(&clips[2].video_id);
    let mut bytes = fs::read(&victim).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&victim, &bytes).unwrap();
    fs::write(cache.entry_path(&clips[4].video_id), b"UGVQ").unwrap();

    let (third, s3) = extract_all(&ex, &decoder, manifest, &clips, Some(&cache)).unwrap();
    assert_eq!((s3.hits, s3.encoded, s3.recovered), (4, 2, 2));
    assert_eq!(third, first);
    let (_, s4) = extract_all(&ex, &decoder, manifest, &clips, Some(&cache)).unwrap();
    assert_eq!(s4.hits, 6);
}

#[test]
fn shape_mismatch_under_same_fingerprint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ex = support::fixtures::extractor();
    let cache = FeatureCache::open(dir.path(), &ex.fingerprint()).unwrap();
    let wrong = FeatureBundle {
        spatial: ndarray::Array2::zeros((2, 3)),
        temporal: ndarray::Array2::zeros((1, 3)),
        text: ndarray::Array2::zeros((1, 3)),
    };
    cache.store("v", &wrong).unwrap();
    let err = cache.load("v", ex.shapes()).unwrap_err();
    assert!(matches!(err, FeatureError::FingerprintCollision { .. }), "{err}");
}

#[test]
fn fingerprint_tracks_configuration() {
    let registry = BackboneRegistry::default();
    let base = FeatureConfig::default();
    let fp = |c: &FeatureConfig| FeatureExtractor::new(c, &registry).unwrap().fingerprint();
    assert_eq!(fp(&base), fp(&base.clone()));
    let mut seeded = base.clone();
    seeded.spatial_backbone = seeded.spatial_backbone.clone().with_seed(99);
    assert_ne!(fp(&base), fp(&seeded));
    let mut fewer = base.clone();
    fewer.keyframes = 4;
    assert_ne!(fp(&base), fp(&fewer));
    let mut wider = base.clone();
    wider.text_backbone = BackboneSpec::new("toy-hashed-bow", 32);
    assert_ne!(fp(&base), fp(&wider));
}

#[test]
fn unknown_and_misplaced_backbones_are_rejected() {
    let registry = BackboneRegistry::default();
    let cfg = FeatureConfig { spatial_backbone: BackboneSpec::new("vit-l-14", 768), ..Default::default() };
    let Err(err) = FeatureExtractor::new(&cfg, &registry) else { panic!("unknown backbone accepted") };
    assert!(matches!(err, FeatureError::UnknownBackbone { .. }), "{err}");
    let cfg = FeatureConfig { spatial_backbone: BackboneSpec::new("toy-hashed-bow", 64), ..Default::default() };
    let Err(err) = FeatureExtractor::new(&cfg, &registry) else { panic!("text encoder used for frames") };
    assert!(matches!(err, FeatureError::WrongKind { .. }), "{err}");
}
