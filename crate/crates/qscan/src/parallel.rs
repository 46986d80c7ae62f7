//! Multi-threaded drivers. Results do not depend on the number of threads:
//! Monte Carlo replicate `r` always uses random stream `r`, and scan chunks
//! are merged in start order.

use rayon::prelude::*;

use qscan_core::scan::{scan_range, ScanSummary, StatMaxima, Summation};
use qscan_core::threshold::{threshold_from_maxima, McEngine};
use qscan_core::{
    detect_regions, GenotypeMatrix, NullModel, PseudoScoreSource, ScanConfig, ScanPlan, ScanReport, ScoreSet,
    ThresholdConfig, ThresholdResult, WindowStat,
};

use crate::error::{QscanError, Result};

/// Runs `f` on a pool with `threads` workers (`None`: rayon's default).
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t.max(1));
    }
    let pool = b
        .build()
        .map_err(|e| QscanError::Config(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn par_replicate_maxima(engine: &McEngine<'_>, n_reps: usize) -> Vec<StatMaxima> {
    (0..n_reps as u64)
        .into_par_iter()
        .map_init(|| engine.scratch(), |s, r| engine.replicate(r, s))
        .collect()
}

/// Parallel counterpart of [`qscan_core::mc_threshold`]; same result.
pub fn par_mc_threshold(
    scores: &ScoreSet,
    data: Option<(&GenotypeMatrix, &NullModel)>,
    scan_cfg: &ScanConfig,
    cfg: &ThresholdConfig,
) -> Result<ThresholdResult> {
    cfg.validate()?;
    scan_cfg.validate(scores.n_variants())?;
    let (source, warnings) = PseudoScoreSource::new(cfg.mode, scores, data)?;
    let mode = source.mode();
    let plan = ScanPlan::new(scores, scan_cfg.l_min, scan_cfg.l_max, &[scan_cfg.method])?;
    if plan.skipped(scan_cfg.method) == plan.n_windows() {
        return Err(qscan_core::Error::NoValidWindow.into());
    }
    let engine = McEngine::new(source, plan, cfg.seed)?;
    let samples = par_replicate_maxima(&engine, cfg.n_reps)
        .into_iter()
        .map(|m| m.get(scan_cfg.method))
        .collect();
    Ok(threshold_from_maxima(
        samples,
        cfg,
        scan_cfg,
        scores.n_variants(),
        warnings,
        mode,
    )?)
}

const SCAN_CHUNK: usize = 2048;

/// Windows with statistic above `h`, scanned in parallel chunks of starts.
pub fn par_candidates(scores: &ScoreSet, cfg: &ScanConfig, h: f64) -> Result<(Vec<WindowStat>, ScanSummary)> {
    cfg.validate(scores.n_variants())?;
    let p = scores.n_variants();
    let chunks: Vec<(usize, usize)> = (0..p)
        .step_by(SCAN_CHUNK)
        .map(|lo| (lo, (lo + SCAN_CHUNK).min(p)))
        .collect();
    let parts: Vec<Result<(Vec<WindowStat>, ScanSummary)>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut out = Vec::new();
            let summary = scan_range(scores, cfg, Summation::Fast, lo..hi, |w| {
                if w.stat > h {
                    out.push(w);
                }
            })?;
            Ok((out, summary))
        })
        .collect();
    let mut all = Vec::new();
    let mut total = ScanSummary::default();
    for part in parts {
        let (mut v, s) = part?;
        all.append(&mut v);
        total += s;
    }
    Ok((all, total))
}

/// Parallel scan followed by the greedy region search.
pub fn par_scan_report(scores: &ScoreSet, cfg: &ScanConfig, h: f64) -> Result<ScanReport> {
    let (candidates, summary) = par_candidates(scores, cfg, h)?;
    let n_candidates = candidates.len();
    Ok(ScanReport {
        threshold: h,
        method: cfg.method,
        n_candidates,
        regions: detect_regions(candidates, h, &scores.positions),
        skipped_windows: summary.skipped,
        config: *cfg,
    })
}
