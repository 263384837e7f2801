use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use ugvq::corpus::{load_manifest, parse_mos_lines, MosEntry};
use ugvq::eval::{EvalReport, TrialResult};
use ugvq::Dimension;

use super::{prepare_out, require_dir, require_file, write};
use crate::config::RunConfig;
use crate::{usage_error, Classify, CliResult};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory to scan for evaluation reports.
    pub dir: PathBuf,
    /// MOS source for distribution plots: a manifest or a `mos.jsonl`.
    /// Defaults to `<dir>/mos.jsonl` when present.
    #[arg(long)]
    pub mos: Option<PathBuf>,
}

/// MOS histogram bins: `BINS` equal-width bins over `[0, 100]`.
pub const BINS: usize = 10;

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_json(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
    Ok(())
}

/// Report name to (logistic PLCC flag, trials by id).
type Runs = BTreeMap<String, (bool, BTreeMap<usize, TrialResult>)>;

/// Trials of every evaluation report under `dir`, grouped by report name.
/// A trial seen in several files (an aggregate and its per-trial file)
/// counts once; conflicting copies are an error.
fn gather(dir: &Path) -> CliResult<Runs> {
    let mut files = Vec::new();
    collect_json(dir, &mut files).with_context(|| format!("scanning {}", dir.display())).usage()?;
    let mut runs = Runs::new();
    for f in files {
        let Ok(text) = fs::read_to_string(&f) else { continue };
        let Ok(report) = EvalReport::from_json(&text) else { continue };
        let entry = runs.entry(report.name.clone()).or_insert((report.plcc_logistic, BTreeMap::new()));
        for t in report.trials {
            match entry.1.get(&t.trial_id) {
                Some(existing) if existing != &t => {
                    return Err(usage_error(format!(
                        "{}: trial {} of {:?} disagrees with another report",
                        f.display(),
                        t.trial_id,
                        report.name
                    )))
                }
                _ => {
                    entry.1.insert(t.trial_id, t);
                }
            }
        }
    }
    Ok(runs)
}

fn load_mos(path: &Path) -> CliResult<Vec<MosEntry>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).usage()?;
    match parse_mos_lines(&text) {
        Ok(m) => Ok(m),
        Err(_) => {
            load_manifest(path).map(|m| m.mos).with_context(|| format!("loading MOS from {}", path.display())).usage()
        }
    }
}

pub fn histogram(values: &[f64]) -> [usize; BINS] {
    let mut bins = [0; BINS];
    for &v in values {
        let b = ((v / 100.0 * BINS as f64).floor() as usize).min(BINS - 1);
        bins[b] += 1;
    }
    bins
}

fn svg(dim: Dimension, bins: &[usize; BINS]) -> String {
    let (w, h, pad) = (400.0, 240.0, 30.0);
    let max = bins.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bar = (w - 2.0 * pad) / BINS as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-size="13" text-anchor="middle">{} MOS</text>"#, w / 2.0, dim);
    for (i, &c) in bins.iter().enumerate() {
        let bh = (h - 2.0 * pad) * c as f64 / max;
        let x = pad + i as f64 * bar;
        let y = h - pad - bh;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{bh:.1}" fill="#4a78a8"><title>{}-{}: {c}</title></rect>"##,
            bar - 2.0,
            i * 100 / BINS,
            (i + 1) * 100 / BINS
        );
    }
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - pad, w - pad);
    for i in (0..=BINS).step_by(2) {
        let x = pad + i as f64 * bar;
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{}" font-size="10" text-anchor="middle">{}</text>"#,
            h - pad + 14.0,
            i * 100 / BINS
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `summary.json`/`summary.txt` (mean ± std over all trials per
/// run) and, given MOS, `mos_histogram.csv` plus one SVG per dimension.
pub fn run(mut cfg: RunConfig, args: ReportArgs) -> CliResult<()> {
    require_dir(&args.dir, "run directory")?;
    let mos_path = match &args.mos {
        Some(p) => {
            require_file(p, "MOS file")?;
            Some(p.clone())
        }
        None => Some(args.dir.join("mos.jsonl")).filter(|p| p.is_file()),
    };
    let runs = gather(&args.dir)?;
    let mos = mos_path.as_deref().map(load_mos).transpose()?;
    if runs.is_empty() && mos.as_ref().is_none_or(Vec::is_empty) {
        return Err(usage_error(format!("{} holds no evaluation reports and no MOS", args.dir.display())));
    }
    if cfg.out.is_none() {
        cfg.out = Some(args.dir.clone());
    }
    let (out, mut log) = prepare_out(&cfg, "report")?;

    if !runs.is_empty() {
        let mut text = String::new();
        let mut merged = Vec::new();
        for (name, (logistic, trials)) in runs {
            let r = EvalReport::from_trials(name, trials.into_values().collect(), logistic);
            text.push_str(&r.render_table());
            text.push('\n');
            merged.push(r);
        }
        write(&out.join("summary.txt"), &text)?;
        write(&out.join("summary.json"), serde_json::to_string_pretty(&merged).expect("summary") + "\n")?;
        log.emit(
            "summary",
            serde_json::json!({ "runs": merged.iter().map(|r| (&r.name, r.trial_count)).collect::<Vec<_>>() }),
        )
        .runtime()?;
        print!("{text}");
    }
    if let Some(mos) = mos {
        let mut csv = String::from("dimension,bin_start,bin_end,count\n");
        for d in Dimension::ALL {
            let values: Vec<f64> = mos.iter().filter_map(|m| m.get(d)).collect();
            let bins = histogram(&values);
            for (i, c) in bins.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{},{c}", d, i * 100 / BINS, (i + 1) * 100 / BINS);
            }
            write(&out.join(format!("mos_histogram_{d}.svg")), svg(d, &bins))?;
            println!("{d}: {} videos, bins {:?}", values.len(), bins);
        }
        write(&out.join("mos_histogram.csv"), csv)?;
        log.emit("histogram", serde_json::json!({ "videos": mos.len() })).runtime()?;
    }
    log.finish().map_err(|e| anyhow!(e)).runtime()?;
    Ok(())
}
