use std::path::PathBuf;

use clap::Args;
use ugvq::corpus::MosEntry;
use ugvq::subjective::{process_ratings, read_ratings_csv, MosOptions, SubjectiveError};

use super::{prepare_out, required, write};
use crate::config::RunConfig;
use crate::{Classify, CliError, CliResult, ErrorKind};

#[derive(Debug, Args)]
pub struct RatingsArgs {
    /// Ratings CSV with `observer_id,video_id,dimension,score` columns.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Skip outlier screening.
    #[arg(long)]
    pub no_screening: bool,
}

/// Writes `mos.jsonl` (manifest-compatible `mos` lines, sorted by video)
/// and `screening.json`.
pub fn run(mut cfg: RunConfig, args: RatingsArgs) -> CliResult<()> {
    if args.ratings.is_some() {
        cfg.ratings = args.ratings;
    }
    if args.no_screening {
        cfg.screening = false;
    }
    let path = required(cfg.ratings.as_deref(), "ratings file", "ratings")?.to_path_buf();
    cfg.out().usage()?;
    let ratings = read_ratings_csv(&path).map_err(subjective_error)?;
    let opts = if cfg.screening { MosOptions::with_screening() } else { MosOptions::default() };
    let outcome = process_ratings(&ratings, &opts).map_err(subjective_error)?;

    let (out, mut log) = prepare_out(&cfg, "process-ratings")?;
    let mut lines = String::new();
    for r in &outcome.records {
        lines.push_str(&MosEntry::from(r).to_jsonl());
        lines.push('\n');
    }
    write(&out.join("mos.jsonl"), lines)?;
    let report = serde_json::to_string_pretty(&outcome.report).expect("report serialises");
    write(&out.join("screening.json"), report + "\n")?;
    let summary = serde_json::json!({
        "ratings": ratings.len(),
        "videos": outcome.records.len(),
        "removed_ratings": outcome.report.removed_ratings.len(),
        "rejected_observers": outcome.report.rejected_observers,
        "omitted_conditions": outcome.report.omitted_conditions.len(),
    });
    log.emit("mos", summary.clone()).runtime()?;
    log.finish().runtime()?;
    println!(
        "{} ratings -> MOS for {} videos; {} ratings removed; rejected observers: [{}]",
        ratings.len(),
        outcome.records.len(),
        outcome.report.removed_ratings.len(),
        outcome.report.rejected_observers.join(", ")
    );
    Ok(())
}

fn subjective_error(e: SubjectiveError) -> CliError {
    let kind = match e {
        SubjectiveError::Io { .. } => ErrorKind::Runtime,
        _ => ErrorKind::Usage,
    };
    CliError { kind, error: e.into() }
}
