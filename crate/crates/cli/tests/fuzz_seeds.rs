//! Replays the checked-in fuzz corpus through every parser. Seeds named
//! `ok-*` must parse; every other seed must be rejected with an error.
//! `cargo test -p ugvq-cli --test fuzz_seeds -- --ignored` rewrites them.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use ugvq::corpus::{decode_raw_clip, encode_raw_clip, parse_manifest, parse_mos_lines, Frame};
use ugvq::eval::{
    evaluate_scores, format_score_file, parse_score_file, EvalOptions, EvalReport, ScoreTable, TrialResult,
};
use ugvq::features::{decode_record, encode_record};
use ugvq::model::{Checkpoint, FusionConfig, InputDims, QualityTriple, Sample, TrainConfig, Trainer, UgvqModel};
use ugvq::subjective::{parse_ratings_csv, process_ratings, MosOptions};
use ugvq::synthetic::{ratings_to_csv, synthetic_ratings, CorpusSpec, RatingSpec, SyntheticCorpus};
use ugvq::{Dimension, FeatureBundle};
use ugvq_cli::config::RunConfig;

const TARGETS: [&str; 9] = [
    "manifest",
    "mos_lines",
    "ratings_csv",
    "raw_clip",
    "feature_record",
    "checkpoint",
    "score_file",
    "eval_report",
    "run_config",
];

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus")
}

/// Same calls as the fuzz targets. `Ok` means the input was accepted.
fn parse(target: &str, data: &[u8]) -> Result<(), String> {
    let text = || std::str::from_utf8(data).map_err(|e| e.to_string());
    match target {
        "manifest" => parse_manifest(text()?).map(drop).map_err(|e| e.to_string()),
        "mos_lines" => parse_mos_lines(text()?).map(drop).map_err(|e| e.to_string()),
        "ratings_csv" => {
            let m = parse_ratings_csv(data).map_err(|e| e.to_string())?;
            process_ratings(&m, &MosOptions::with_screening()).map(drop).map_err(|e| e.to_string())
        }
        "raw_clip" => decode_raw_clip(data).map(drop),
        "feature_record" => decode_record(data).map(drop).map_err(|e| e.to_string()),
        "checkpoint" => {
            let c = Checkpoint::decode(data).map_err(|e| e.to_string())?;
            c.model().map(drop).map_err(|e| e.to_string())
        }
        "score_file" => parse_score_file(text()?).map(drop).map_err(|e| e.to_string()),
        "eval_report" => EvalReport::from_json(text()?).map(drop).map_err(|e| e.to_string()),
        "run_config" => RunConfig::parse(Some(text()?), &[]).map(drop).map_err(|e| e.to_string()),
        other => panic!("unknown target {other}"),
    }
}

#[test]
fn seeds_replay_with_expected_outcomes() {
    for target in TARGETS {
        let dir = corpus_dir().join(target);
        let mut seen = (0, 0);
        for entry in fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let result = parse(target, &fs::read(&path).unwrap());
            if name.starts_with("ok-") {
                assert!(result.is_ok(), "{target}/{name}: {result:?}");
                seen.0 += 1;
            } else {
                assert!(result.is_err(), "{target}/{name} was accepted");
                seen.1 += 1;
            }
        }
        assert!(seen.0 > 0 && seen.1 > 0, "{target}: {seen:?} accepted/rejected seeds");
    }
}

fn bundle(k: f64) -> FeatureBundle {
    let m = |r: usize, c: usize| Array2::from_shape_fn((r, c), |(i, j)| ((i * c + j) as f64 * 0.37 + k).sin());
    FeatureBundle { spatial: m(2, 4), temporal: m(1, 3), text: m(3, 4) }
}

fn write(target: &str, name: &str, bytes: impl AsRef<[u8]>) {
    let dir = corpus_dir().join(target);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(name), bytes).unwrap();
}

fn flip_last(mut bytes: Vec<u8>) -> Vec<u8> {
    let n = bytes.len();
    bytes[n - 1] ^= 0x5A;
    bytes
}

#[test]
#[ignore = "rewrites fuzz/corpus"]
fn regenerate_fuzz_seeds() {
    let mut corpus = SyntheticCorpus::generate(CorpusSpec { prompts: 3, videos_per_prompt: 2, ..Default::default() });
    let tmp = tempfile::tempdir().unwrap();
    let manifest_path = corpus.write(tmp.path()).unwrap();
    let manifest = fs::read_to_string(&manifest_path).unwrap();
    write("manifest", "ok-small.jsonl", &manifest);
    write("manifest", "ok-empty.jsonl", "");
    let first_video = manifest.lines().find(|l| l.contains("\"video\"")).unwrap();
    write("manifest", "bad-unknown-prompt.jsonl", first_video);
    write("manifest", "bad-truncated.jsonl", &manifest[..manifest.len() / 2]);

    let mos: String = manifest.lines().filter(|l| l.contains("\"mos\"")).map(|l| format!("{l}\n")).collect();
    write("mos_lines", "ok-mos.jsonl", &mos);
    write("mos_lines", "bad-prompt-line.jsonl", manifest.lines().next().unwrap());
    write("mos_lines", "bad-out-of-range.jsonl", r#"{"kind":"mos","video_id":"v","spatial":101.0}"#);

    let ratings = ratings_to_csv(&synthetic_ratings(&RatingSpec { observers: 3, videos: 4, seed: 1, planted: None }));
    write("ratings_csv", "ok-small.csv", &ratings);
    write("ratings_csv", "bad-header-only.csv", "observer_id,video_id,dimension,score\n");
    write("ratings_csv", "bad-score.csv", "observer_id,video_id,dimension,score\nobs0,v0,spatial,9\n");

    let frames = vec![Frame::filled(3, 4, 0.25), Frame::filled(3, 4, 0.75)];
    let clip = encode_raw_clip(&frames);
    write("raw_clip", "ok-two-frames.bin", &clip);
    write("raw_clip", "bad-truncated.bin", &clip[..clip.len() - 5]);

    let record = encode_record("fingerprint", "video-0", &bundle(0.0));
    write("feature_record", "ok-record.bin", &record);
    write("feature_record", "bad-flipped.bin", flip_last(record.clone()));
    write("feature_record", "bad-truncated.bin", &record[..record.len() / 2]);

    let samples: Vec<Sample> = (0..4)
        .map(|i| Sample {
            video_id: format!("v{i}"),
            bundle: bundle(i as f64),
            target: QualityTriple::new(10.0 * i as f64, 50.0, 90.0 - 5.0 * i as f64),
        })
        .collect();
    let refs: Vec<&Sample> = samples.iter().collect();
    let fusion = FusionConfig {
        model_dim: 4,
        scma_heads: 2,
        scma_ffn_dim: 8,
        fused_dim: 8,
        regressor_hidden: 8,
        ..Default::default()
    };
    let model = UgvqModel::new(fusion, InputDims::of(&samples[0].bundle), 0).unwrap();
    let mut trainer = Trainer::new(model, TrainConfig { epochs: 1, batch_size: 4, ..Default::default() }, 0).unwrap();
    trainer.fit(&refs, &refs, |_, _| {}).unwrap();
    let ckpt = Checkpoint::selected(&trainer, serde_json::json!({"note": "seed"})).encode();
    write("checkpoint", "ok-tiny.ckpt", &ckpt);
    write("checkpoint", "bad-flipped.ckpt", flip_last(ckpt.clone()));
    write("checkpoint", "bad-empty.ckpt", "");

    let m = &corpus.manifest;
    let table: ScoreTable = m
        .mos
        .iter()
        .map(|e| (e.video_id.clone(), Dimension::ALL.iter().map(|&d| (d, e.get(d).unwrap())).collect()))
        .collect();
    let scores = format_score_file(&table);
    write("score_file", "ok-mos.jsonl", &scores);
    write("score_file", "bad-not-json.jsonl", "video_id spatial\n");

    let videos: Vec<_> = m.videos.iter().collect();
    let opts = EvalOptions { levels: vec![ugvq::eval::Level::Video], ..Default::default() };
    let cells = evaluate_scores(m, &videos, &table, &opts).unwrap();
    let report = EvalReport::from_trials("seed", vec![TrialResult { trial_id: 0, cells }], false);
    write("eval_report", "ok-report.json", report.to_json());
    write("eval_report", "bad-truncated.json", &report.to_json()[..40]);

    write("run_config", "ok-defaults.toml", RunConfig::default().to_toml());
    write("run_config", "ok-small.toml", "seed = 3\n[train]\nepochs = 2\nbatch_size = 4\n");
    write("run_config", "bad-unknown-key.toml", "[train]\nbogus = 1\n");
    write("run_config", "bad-zero-keyframes.toml", "[features]\nkeyframes = 0\n");
}
