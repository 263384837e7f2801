//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per
//! criterion and exits non-zero if any criterion that can be met is not.

mod common;
#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ugvq::corpus::{Frame, FrameDecoder, PromptRecord};
use ugvq::eval::{
    adapter_benchmark, krcc, make_splits, pearson, srcc, AdapterRegistry, BenchmarkReport, EvalOptions, EvalReport,
    Level, MetricAdapter, RowStatus, SPLIT_RATIOS, SPLIT_TOLERANCE,
};
use ugvq::features::plan_keyframes;
use ugvq::model::{predict_all, Ablation, FusionConfig, InputDims, Sample, TrainConfig, Trainer, UgvqModel};
use ugvq::subjective::{process_ratings, MosOptions};
use ugvq::synthetic::{synthetic_ratings, CorpusSpec, RatingSpec, SyntheticCorpus};
use ugvq::Dimension;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn reproduction() -> Outcome {
    Err("not attempted: published table numbers need the original video corpora, pretrained backbone \
         weights and GPU training; criteria 2-12 substitute"
        .into())
}

fn mos_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut elapsed = Duration::ZERO;
    for (seed, planted) in [(0, None), (1, Some((3, 0.07))), (2, Some((7, 0.07)))] {
        let m = synthetic_ratings(&RatingSpec { seed, planted, ..Default::default() });
        ensure(m.observers().len() == 10 && m.conditions().len() == 150, "fixture is not 10 x 50 x 3")?;
        let started = Instant::now();
        let out = process_ratings(&m, &MosOptions::with_screening()).map_err(|e| e.to_string())?;
        elapsed += started.elapsed();
        let rows: Vec<support::Row> = m
            .entries()
            .iter()
            .map(|r| (r.observer_id.clone(), r.video_id.clone(), r.dimension.as_str().into(), f64::from(r.score)))
            .collect();
        let (expected, rejected) = support::mos(&rows);
        ensure(out.report.rejected_observers == rejected, "rejected observers differ from oracle")?;
        if let Some((obs, _)) = planted {
            let id = format!("obs{obs:02}");
            ensure(rejected == [id.clone()], format!("planted {id} not the only rejection: {rejected:?}"))?;
        }
        let mut n = 0;
        for rec in &out.records {
            for (d, dm) in &rec.dimensions {
                worst = worst.max((dm.mos - expected[&(rec.video_id.clone(), d.as_str().into())]).abs());
                n += 1;
            }
        }
        ensure(n == 150 && n == expected.len(), format!("{n} MOS values, expected 150"))?;
    }
    ensure(worst <= 1e-9, format!("max |MOS - oracle| = {worst:e}"))?;
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("max |MOS - oracle| = {worst:.1e} over 3 fixtures, planted observers rejected, {elapsed:.2?}"))
}

fn correlations() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut defined = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..=20);
        let ties = case % 2 == 0;
        let mut draw = || if ties { f64::from(rng.random_range(0..5)) } else { rng.random_range(-1.0..1.0) };
        let x: Vec<f64> = (0..n).map(|_| draw()).collect();
        let y: Vec<f64> = (0..n).map(|_| draw()).collect();
        match (srcc(&x, &y), support::srcc(&x, &y)) {
            (Ok(a), Some(b)) => ensure(close(a, b), format!("SRCC {a} vs {b}"))?,
            (Err(_), None) => {}
            _ => return Err(format!("SRCC definedness differs on {x:?} {y:?}")),
        }
        match (pearson(&x, &y), support::pearson(&x, &y)) {
            (Ok(a), Some(b)) => ensure(close(a, b), format!("PLCC {a} vs {b}"))?,
            (Err(_), None) => {}
            _ => return Err(format!("PLCC definedness differs on {x:?} {y:?}")),
        }
        match (krcc(&x, &y), support::krcc(&x, &y)) {
            (Ok(a), Some(b)) => {
                ensure(a == b, format!("KRCC {a} vs {b}"))?;
                defined += 1;
            }
            (Err(_), None) => {}
            _ => return Err(format!("KRCC definedness differs on {x:?} {y:?}")),
        }
    }
    for n in 2..=20 {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let r: Vec<f64> = x.iter().map(|v| -v).collect();
        for (f, name) in [(srcc as fn(&[f64], &[f64]) -> _, "SRCC"), (krcc, "KRCC"), (pearson, "PLCC")] {
            ensure(f(&x, &x) == Ok(1.0), format!("{name} identity != 1 at n = {n}"))?;
            ensure(f(&x, &r) == Ok(-1.0), format!("{name} reversal != -1 at n = {n}"))?;
        }
    }
    Ok(format!("1000 pairs ({defined} non-degenerate) agree, SRCC/PLCC tol 1e-9, KRCC exact; +/-1 exact"))
}

fn keyframes() -> Outcome {
    let started = Instant::now();
    for n in 1..=100 {
        for ns in 1..=100 {
            let plan = plan_keyframes(n, ns).map_err(|e| e.to_string())?;
            ensure(plan.indices == support::keyframes(n, ns), format!("N = {n}, N_s = {ns}"))?;
        }
    }
    let elapsed = started.elapsed();
    let worked = plan_keyframes(96, 8).map_err(|e| e.to_string())?.indices;
    ensure(worked == [0, 12, 24, 36, 48, 60, 72, 84], format!("N = 96, N_s = 8 gave {worked:?}"))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("10000 (N, N_s) pairs agree, 96/8 -> {worked:?}, {elapsed:.2?}"))
}

fn tiny(model_dim: usize) -> FusionConfig {
    FusionConfig {
        model_dim,
        scma_heads: 2,
        scma_ffn_dim: 2 * model_dim,
        fused_dim: 2 * model_dim,
        regressor_hidden: 4 * model_dim,
        ..FusionConfig::default()
    }
}

fn scma_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let bundles = support::gradcheck::random_bundles(0, 1, (6, 5, 7));
    let model = UgvqModel::new(tiny(8), InputDims::of(&bundles[0]), 23).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for pair in 0..100 {
        let (ta, tb) = (rng.random_range(1..10), rng.random_range(1..10));
        let a = ndarray::Array2::from_shape_fn((ta, 8), |_| rng.random_range(-3.0..3.0));
        let b = ndarray::Array2::from_shape_fn((tb, 8), |_| rng.random_range(-3.0..3.0));
        for scma in model.scma_blocks() {
            let mut g = ugvq::nn::Graph::new(model.params());
            let (na, nb) = (g.input(a.clone()), g.input(b.clone()));
            let ab = scma.forward(&mut g, na, nb).map_err(|e| e.to_string())?;
            let ba = scma.forward(&mut g, nb, na).map_err(|e| e.to_string())?;
            let (ab, ba) = (g.value(ab).row(0).to_vec(), g.value(ba).row(0).to_vec());
            let swapped: Vec<f64> = ba[8..].iter().chain(&ba[..8]).copied().collect();
            ensure(ab == swapped, format!("pair {pair} differs"))?;
            compared += ab.len();
        }
    }
    Ok(format!("100 random pairs x 3 blocks, {compared} values bit-identical"))
}

fn gradient() -> Outcome {
    let started = Instant::now();
    let r = support::gradcheck::check(tiny(8), 5, 4, 1e-4, 1e-6);
    let elapsed = started.elapsed();
    ensure(r.max_rel_error < 1e-4, format!("max relative error {:.2e}", r.max_rel_error))?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("D = 8, batch 4, {} scalars, max relative error {:.2e}, {elapsed:.2?}", r.checked, r.max_rel_error))
}

fn widths() -> Outcome {
    let widths: Vec<usize> =
        Ablation::ALL.iter().map(|&a| FusionConfig::default().with_ablation(a).unified_width()).collect();
    ensure(widths == [1536, 1536, 1536, 3072, 3072, 3072, 4608, 9216], format!("widths {widths:?}"))?;
    let full = FusionConfig::default();
    ensure(full.regressor_hidden == 9216, format!("hidden width {}", full.regressor_hidden))?;
    let bundles = support::gradcheck::random_bundles(1, 1, (6, 5, 7));
    for a in Ablation::ALL {
        let cfg = tiny(8).with_ablation(a);
        let model = UgvqModel::new(cfg.clone(), InputDims::of(&bundles[0]), 0).map_err(|e| e.to_string())?;
        let mut g = ugvq::nn::Graph::new(model.params());
        let f = model.unified_feature(&mut g, &bundles[0]).map_err(|e| e.to_string())?;
        ensure(g.shape(f) == (1, cfg.unified_width()), format!("{a}: built width {:?}", g.shape(f)))?;
    }
    Ok(format!("{widths:?}, hidden 9216"))
}

fn overfit() -> Outcome {
    let started = Instant::now();
    let corpus = SyntheticCorpus::generate(CorpusSpec::default());
    ensure(corpus.manifest.videos.len() == 48, "corpus is not 48 clips")?;
    let clip = &corpus.manifest.videos[0];
    ensure((clip.num_frames, clip.width, clip.height) == (8, 32, 32), "clips are not 8 x 32 x 32")?;
    let samples = support::fixtures::samples(&corpus, &support::fixtures::bundles(&corpus));
    let refs: Vec<&Sample> = samples.iter().collect();
    let model =
        UgvqModel::new(FusionConfig::small(), InputDims::of(&samples[0].bundle), 0).map_err(|e| e.to_string())?;
    // Full batch, so one epoch is one optimizer step.
    let cfg = TrainConfig { lr: 2e-2, lr_decay_every: 0, epochs: 200, batch_size: 48, ..Default::default() };
    let mut trainer = Trainer::new(model, cfg, 0).map_err(|e| e.to_string())?;
    trainer.fit(&refs, &refs, |_, _| {}).map_err(|e| e.to_string())?;
    let pred = predict_all(trainer.model(), &refs, 48).map_err(|e| e.to_string())?;
    let mut got = Vec::new();
    for (j, d) in Dimension::ALL.iter().enumerate() {
        let truth: Vec<f64> = samples.iter().map(|s| s.target.get(*d)).collect();
        let p: Vec<f64> = pred.column(j).to_vec();
        got.push(srcc(&p, &truth).map_err(|e| format!("{d}: {e}"))?);
    }
    let elapsed = started.elapsed();
    let text =
        format!("train SRCC spatial {:.4} temporal {:.4} alignment {:.4}, {elapsed:.1?}", got[0], got[1], got[2]);
    ensure(got.iter().all(|&s| s >= 0.9), text.clone())?;
    within(elapsed, Duration::from_secs(300))?;
    Ok(format!("200 steps: {text}"))
}

fn splits() -> Outcome {
    let corpus = SyntheticCorpus::generate(CorpusSpec { prompts: 468, videos_per_prompt: 1, ..Default::default() });
    let plans = make_splits(&corpus.manifest, 10, 7).map_err(|e| e.to_string())?;
    ensure(plans.len() == 10, "expected 10 plans")?;
    ensure(plans == make_splits(&corpus.manifest, 10, 7).map_err(|e| e.to_string())?, "plans not reproducible")?;
    let mut worst = 0.0f64;
    for (i, p) in plans.iter().enumerate() {
        let train: BTreeSet<_> = p.train.iter().collect();
        ensure(p.val.iter().chain(&p.test).all(|id| !train.contains(id)), format!("trial {i}: prompt overlap"))?;
        for (r, t) in p.ratios().iter().zip(SPLIT_RATIOS) {
            worst = worst.max((r - t).abs());
        }
    }
    ensure(worst <= SPLIT_TOLERANCE, format!("ratio deviation {worst}"))?;
    let sizes = [plans[0].train.len(), plans[0].val.len(), plans[0].test.len()];
    Ok(format!("10 trials disjoint, sizes {sizes:?}, max ratio deviation {:.2} pp, reproducible", worst * 100.0))
}

fn epoch_events(log: &std::path::Path) -> Vec<serde_json::Value> {
    events(log).into_iter().filter(|e| e["event"] == "epoch").collect()
}

fn lr_schedule() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest =
        corpus(&dir.path().join("data"), CorpusSpec { prompts: 10, videos_per_prompt: 2, ..Default::default() });
    let cfg = small_config(dir.path(), "");
    let run = dir.path().join("run");
    let o = ugvq(&[
        "--config",
        p(&cfg),
        "--set",
        "train.lr=1e-5",
        "--set",
        "train.epochs=10",
        "train",
        "--manifest",
        p(&manifest),
        "--out",
        p(&run),
    ]);
    ensure(code(&o) == 0, stderr(&o))?;
    let epochs = epoch_events(&run.join("log.jsonl"));
    ensure(epochs.len() == 10, format!("{} epoch events", epochs.len()))?;
    let mut seen = Vec::new();
    for e in &epochs {
        let (epoch, lr) = (e["epoch"].as_u64().unwrap_or(99), e["lr"].as_f64().unwrap_or(f64::NAN));
        let want = if epoch < 5 { 1e-5 } else { 1e-6 };
        ensure((lr - want).abs() <= 1e-12 * want, format!("epoch {epoch}: lr {lr:e}"))?;
        seen.push(lr);
    }
    Ok(format!("log.jsonl lr {:e} for epochs 0-4, {:e} for 5-9 (rel tol 1e-12)", seen[0], seen[9]))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest =
        corpus(&dir.path().join("data"), CorpusSpec { prompts: 20, videos_per_prompt: 3, ..Default::default() });
    let cfg = small_config(dir.path(), "");
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let base = dir.path().join(name);
        let (train, eval) = (base.join("train"), base.join("eval"));
        let o = ugvq(&[
            "--config",
            p(&cfg),
            "--set",
            "train.epochs=5",
            "train",
            "--manifest",
            p(&manifest),
            "--out",
            p(&train),
        ]);
        ensure(code(&o) == 0, stderr(&o))?;
        let o = ugvq(&[
            "--config",
            p(&cfg),
            "evaluate",
            "--manifest",
            p(&manifest),
            "--checkpoint",
            p(&train.join("model.ckpt")),
            "--out",
            p(&eval),
        ]);
        ensure(code(&o) == 0, stderr(&o))?;
        let losses: Vec<(f64, f64)> = epoch_events(&train.join("log.jsonl"))
            .iter()
            .map(|e| (e["train_loss"].as_f64().unwrap_or(f64::NAN), e["val_loss"].as_f64().unwrap_or(f64::NAN)))
            .collect();
        let report = fs::read_to_string(eval.join("report.json")).map_err(|e| e.to_string())?;
        runs.push((losses, report));
    }
    let (a, b) = (&runs[0], &runs[1]);
    ensure(a.0.len() == 5 && a.0.len() == b.0.len(), "epoch counts differ")?;
    let worst = a.0.iter().zip(&b.0).map(|(x, y)| (x.0 - y.0).abs().max((x.1 - y.1).abs())).fold(0.0, f64::max);
    ensure(worst <= 1e-7, format!("loss difference {worst:e}"))?;
    ensure(a.1 == b.1, "report.json differs between runs")?;
    EvalReport::from_json(&a.1).map_err(|e| e.to_string())?;
    Ok(format!("5 epochs, max loss difference {worst:e}, report.json byte-identical"))
}

struct Constant;

impl MetricAdapter for Constant {
    fn name(&self) -> &str {
        "constant"
    }
    fn dimensions(&self) -> Vec<Dimension> {
        Dimension::ALL.to_vec()
    }
    fn score(&self, _: &[Frame], _: &PromptRecord) -> Result<f64, String> {
        Ok(0.0)
    }
}

fn benchmark() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = corpus(&dir.path().join("data"), CorpusSpec::default());
    let out = dir.path().join("bench");
    let o = ugvq(&["benchmark", "--manifest", p(&manifest), "--adapters", "frame-variance", "--out", p(&out)]);
    ensure(code(&o) == 0, stderr(&o))?;
    let report: BenchmarkReport =
        serde_json::from_str(&fs::read_to_string(out.join("benchmark.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let RowStatus::Ok { cells } = &report.rows[0].status else { return Err("frame-variance row failed".into()) };
    let cell = cells
        .iter()
        .find(|c| c.level == Level::Video && c.dimension == Dimension::Spatial)
        .ok_or("no spatial video cell")?;
    let variance = cell.values.srcc.ok_or("frame-variance SRCC undefined")?;
    ensure(variance > 0.99, format!("frame-variance SRCC {variance:.4}"))?;

    let mut c = SyntheticCorpus::generate(CorpusSpec::default());
    let written = tempfile::tempdir().map_err(|e| e.to_string())?;
    c.write(written.path()).map_err(|e| e.to_string())?;
    let adapters: Vec<Arc<dyn MetricAdapter>> = vec![Arc::new(Constant)];
    let r = adapter_benchmark(&c.manifest, &FrameDecoder::default(), &adapters, &EvalOptions::default())
        .map_err(|e| e.to_string())?;
    let row = &r.rows[0];
    ensure(row.degenerate, "constant adapter not flagged degenerate")?;
    let RowStatus::Ok { cells } = &row.status else { return Err("constant row failed".into()) };
    ensure(
        cells.iter().all(|c| c.values.srcc.is_none() && c.values.krcc.is_none() && c.values.plcc.is_none()),
        "constant adapter produced correlation values",
    )?;
    ensure(r.render_table().contains("n/a"), "table does not mark missing values")?;
    ensure(AdapterRegistry::default().get("frame-variance").is_ok(), "frame-variance not registered")?;
    Ok(format!("frame-variance spatial SRCC {variance:.4}; constant adapter flagged degenerate with n/a cells"))
}

/// Criteria that cannot be met at this scale; they must still report FAIL.
const INFEASIBLE: [usize; 1] = [1];

fn main() {
    let criteria: [Criterion; 12] = [
        ("published numbers", reproduction),
        ("MOS oracle", mos_oracle),
        ("correlation oracle", correlations),
        ("keyframe formula", keyframes),
        ("SCMA half-swap symmetry", scma_symmetry),
        ("gradient check", gradient),
        ("width arithmetic", widths),
        ("overfit sanity", overfit),
        ("split invariants", splits),
        ("learning-rate schedule", lr_schedule),
        ("determinism", determinism),
        ("benchmark harness", benchmark),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut unexpected = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                let note = if INFEASIBLE.contains(&n) { " [known infeasible]" } else { "" };
                println!("FAIL criterion {n} ({name}){note}: {detail}");
                if !INFEASIBLE.contains(&n) {
                    unexpected.push(n);
                }
            }
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
