use std::path::PathBuf;

use clap::Args;
use ugvq::corpus::FrameDecoder;
use ugvq::eval::{adapter_benchmark, AdapterRegistry, RowStatus};
use ugvq::Dimension;

use super::{eval_error, load, prepare_out, required, write};
use crate::config::RunConfig;
use crate::{Classify, CliResult};

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Manifest with MOS; overrides `eval_manifest`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Comma-separated adapter names; all registered adapters by default.
    #[arg(long, value_delimiter = ',')]
    pub adapters: Vec<String>,
    /// Restrict columns to one dimension. Repeatable.
    #[arg(long)]
    pub dimension: Vec<Dimension>,
}

/// Writes `benchmark.json` and `benchmark.txt`.
pub fn run(mut cfg: RunConfig, args: BenchmarkArgs) -> CliResult<()> {
    if args.manifest.is_some() {
        cfg.eval_manifest = args.manifest.clone();
    }
    if !args.dimension.is_empty() {
        cfg.eval.dimensions = Dimension::ALL.into_iter().filter(|d| args.dimension.contains(d)).collect();
    }
    let registry = AdapterRegistry::default();
    let names = if args.adapters.is_empty() { registry.names() } else { args.adapters.clone() };
    let adapters = names.iter().map(|n| registry.get(n)).collect::<Result<Vec<_>, _>>().map_err(eval_error)?;
    let manifest_path = required(cfg.eval_manifest(), "evaluation manifest", "eval_manifest")?.to_path_buf();
    cfg.out().usage()?;
    let manifest = load(&manifest_path)?;

    let report =
        adapter_benchmark(&manifest, &FrameDecoder::default(), &adapters, &cfg.eval.options()).map_err(eval_error)?;
    let (out, mut log) = prepare_out(&cfg, "benchmark")?;
    for row in &report.rows {
        let failed = matches!(row.status, RowStatus::Failed { .. });
        log.emit(
            "adapter",
            serde_json::json!({ "adapter": row.adapter, "degenerate": row.degenerate, "failed": failed }),
        )
        .runtime()?;
    }
    log.finish().runtime()?;
    write(&out.join("benchmark.json"), serde_json::to_string_pretty(&report).expect("report serialises") + "\n")?;
    let table = report.render_table();
    write(&out.join("benchmark.txt"), &table)?;
    print!("{table}");
    Ok(())
}
