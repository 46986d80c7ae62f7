//! Result files: region tables, window dumps and JSON reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use flate2::{Compression, GzBuilder};
use serde::{Deserialize, Serialize};

use qscan_core::scan::{scan_range, Summation};
use qscan_core::{DetectedRegion, ScanConfig, ScoreSet, WindowStat};

use crate::error::{QscanError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub rank: usize,
    pub chrom: String,
    /// first and last tested-variant index (0-based, inclusive)
    pub start_index: usize,
    pub end_index: usize,
    pub start_bp: u64,
    pub end_bp: u64,
    pub n_variants: usize,
    pub stat: f64,
}

impl RegionRecord {
    pub fn new(r: &DetectedRegion, scores: &ScoreSet) -> Self {
        Self {
            rank: r.rank,
            chrom: scores.segment_of(r.start).chrom.clone(),
            start_index: r.start,
            end_index: r.end,
            start_bp: r.start_bp,
            end_bp: r.end_bp,
            n_variants: r.end - r.start + 1,
            stat: r.stat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModelSummary {
    pub family: String,
    pub coefficients: Vec<f64>,
    pub covariate_names: Vec<String>,
    pub dispersion: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFile {
    pub method: String,
    pub alpha: f64,
    pub h: f64,
    pub mc_reps: usize,
    pub mc_mode: String,
    pub seed: u64,
    pub n_variants: usize,
    pub l_min: usize,
    pub l_max: usize,
    /// closed-form bound (Q-SCAN only)
    pub bound_upper: Option<f64>,
    pub asymptotic_rate: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReportFile {
    pub n_samples: usize,
    pub n_variants_input: usize,
    pub n_variants_tested: usize,
    pub maf_max: f64,
    pub mac_min: u32,
    pub null_model: NullModelSummary,
    pub threshold: ThresholdFile,
    pub n_candidates: usize,
    pub skipped_windows: usize,
    pub regions: Vec<RegionRecord>,
    pub warnings: Vec<String>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| QscanError::io(path, e))?))
}

pub fn write_regions_tsv(path: &Path, regions: &[RegionRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| QscanError::io(path, e);
    writeln!(w, "rank\tchrom\tstart_index\tend_index\tstart_bp\tend_bp\tn_variants\tstat").map_err(io)?;
    for r in regions {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.rank, r.chrom, r.start_index, r.end_index, r.start_bp, r.end_bp, r.n_variants, r.stat
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_qmax_tsv(path: &Path, samples: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| QscanError::io(path, e);
    writeln!(w, "replicate_rank\tmax_stat").map_err(io)?;
    for (k, s) in samples.iter().enumerate() {
        writeln!(w, "{}\t{s}", k + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Gzip stream with a zeroed timestamp and no file name, so equal content
/// gives equal bytes.
pub fn write_gzip_deterministic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let file = create(path)?;
    let mut gz = GzBuilder::new().mtime(0).write(file, Compression::default());
    body(&mut gz).map_err(|e| QscanError::io(path, e))?;
    let mut file = gz.finish().map_err(|e| QscanError::io(path, e))?;
    file.flush().map_err(|e| QscanError::io(path, e))
}

const WINDOW_CHUNK: usize = 4096;

/// Every window statistic in `(start, end)` order.
pub fn write_windows_tsv_gz(path: &Path, scores: &ScoreSet, cfg: &ScanConfig) -> Result<()> {
    let mut failure = None;
    write_gzip_deterministic(path, |w| {
        writeln!(w, "chrom\tstart_index\tend_index\tstart_bp\tend_bp\tn_variants\tstat")?;
        let p = scores.n_variants();
        let mut chunk: Vec<WindowStat> = Vec::new();
        let mut lo = 0;
        while lo < p {
            let hi = (lo + WINDOW_CHUNK).min(p);
            chunk.clear();
            if let Err(e) = scan_range(scores, cfg, Summation::Fast, lo..hi, |ws| chunk.push(ws)) {
                failure = Some(e);
                return Ok(());
            }
            chunk.sort_unstable_by_key(|ws| (ws.start, ws.end));
            for ws in &chunk {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    scores.segment_of(ws.start).chrom,
                    ws.start,
                    ws.end,
                    scores.positions[ws.start],
                    scores.positions[ws.end],
                    ws.length,
                    ws.stat
                )?;
            }
            lo = hi;
        }
        Ok(())
    })?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
