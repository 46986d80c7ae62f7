//! Text formats: dosage tables, a VCF subset, phenotype/covariate tables and
//! result files.

mod dosage;
mod output;
mod pheno;
mod vcf;

pub use dosage::{parse_dosage_reader, parse_dosage_tsv};
pub use output::{
    write_gzip_deterministic, write_qmax_tsv, write_regions_tsv, write_windows_tsv_gz, NullModelSummary, RegionRecord,
    ScanReportFile, ThresholdFile,
};
pub use pheno::{align_samples, parse_pheno_covar, parse_pheno_reader, DatasetBundle, PhenoTable};
pub use vcf::{parse_vcf_reader, parse_vcf_subset, write_vcf_subset};

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use qscan_core::genotype::GenotypeBuilder;
use qscan_core::{GenotypeMatrix, VariantInfo};

use crate::error::{QscanError, Result};

/// Options shared by the genotype parsers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Variants with a larger fraction of missing calls are dropped.
    pub max_missing: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { max_missing: 0.10 }
    }
}

/// Genotypes read from a file plus what was dropped on the way.
#[derive(Debug, Clone)]
pub struct ParsedGenotypes {
    pub geno: GenotypeMatrix,
    pub sample_ids: Vec<String>,
    pub warnings: Vec<String>,
    pub dropped_missing: usize,
    pub skipped_multiallelic: usize,
    pub skipped_symbolic: usize,
    pub skipped_no_gt: usize,
}

/// Opens a plain or gzip-compressed text file (detected by magic bytes).
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut f = File::open(path).map_err(|e| QscanError::io(path, e))?;
    let mut magic = [0u8; 2];
    let got = f.read(&mut magic).map_err(|e| QscanError::io(path, e))?;
    drop(f);
    let f = File::open(path).map_err(|e| QscanError::io(path, e))?;
    if got == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(f))))
    } else {
        Ok(Box::new(BufReader::new(f)))
    }
}

/// Line reader yielding `(1-based line number, text)` with UTF-8 and IO
/// failures reported against the line.
pub(crate) struct Lines<R> {
    inner: R,
    buf: Vec<u8>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    pub(crate) fn new(inner: R) -> Self {
        Self {
            inner,
            buf: Vec::new(),
            line: 0,
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<Option<(usize, &str)>> {
        self.buf.clear();
        self.line += 1;
        let n = self
            .inner
            .read_until(b'\n', &mut self.buf)
            .map_err(|e| QscanError::parse(self.line, format!("read failed: {e}")))?;
        if n == 0 {
            return Ok(None);
        }
        while matches!(self.buf.last(), Some(b'\n' | b'\r')) {
            self.buf.pop();
        }
        let text = std::str::from_utf8(&self.buf).map_err(|_| QscanError::parse(self.line, "invalid UTF-8"))?;
        Ok(Some((self.line, text)))
    }
}

/// Checks per-chromosome position order and chromosome contiguity.
#[derive(Debug, Default)]
pub(crate) struct OrderCheck {
    last: Option<(String, u64)>,
    finished: HashSet<String>,
}

impl OrderCheck {
    pub(crate) fn check(&mut self, line: usize, chrom: &str, pos: u64) -> Result<()> {
        match &mut self.last {
            Some((c, prev)) if c == chrom => {
                if pos <= *prev {
                    return Err(QscanError::Ordering {
                        line,
                        chrom: chrom.to_string(),
                        pos,
                        prev: *prev,
                    });
                }
                *prev = pos;
            }
            _ => {
                if self.finished.contains(chrom) {
                    return Err(QscanError::parse(
                        line,
                        format!("chromosome {chrom} reappears after another chromosome"),
                    ));
                }
                if let Some((c, _)) = self.last.take() {
                    self.finished.insert(c);
                }
                self.last = Some((chrom.to_string(), pos));
            }
        }
        Ok(())
    }
}

/// Collects variant columns with mean imputation of missing calls.
pub(crate) struct ColumnSink {
    builder: GenotypeBuilder,
    opts: ParseOptions,
    n: usize,
    dense: Vec<f64>,
    pub(crate) warnings: Vec<String>,
    pub(crate) dropped: usize,
}

impl ColumnSink {
    pub(crate) fn new(n: usize, opts: ParseOptions) -> Self {
        Self {
            builder: GenotypeBuilder::new(n),
            opts,
            n,
            dense: vec![0.0; n],
            warnings: Vec::new(),
            dropped: 0,
        }
    }

    /// `calls[i]` is `None` for a missing call.
    pub(crate) fn push(&mut self, line: usize, info: VariantInfo, calls: &[Option<f64>]) -> Result<()> {
        debug_assert_eq!(calls.len(), self.n);
        let missing = calls.iter().filter(|c| c.is_none()).count();
        if missing > 0 {
            let frac = missing as f64 / self.n as f64;
            if frac > self.opts.max_missing || missing == self.n {
                self.dropped += 1;
                self.warnings.push(format!(
                    "line {line}: variant {} dropped, {:.1}% missing exceeds the {:.1}% cap",
                    info.id,
                    100.0 * frac,
                    100.0 * self.opts.max_missing
                ));
                return Ok(());
            }
        }
        let observed: f64 = calls.iter().flatten().sum();
        let mean = observed / (self.n - missing) as f64;
        for (d, c) in self.dense.iter_mut().zip(calls) {
            *d = c.unwrap_or(mean);
        }
        self.builder
            .push_dense(info, &self.dense)
            .map_err(|e| QscanError::parse(line, e.to_string()))
    }

    pub(crate) fn finish(self) -> Result<(GenotypeMatrix, Vec<String>, usize)> {
        if self.builder.is_empty() {
            return Err(qscan_core::Error::NoVariants.into());
        }
        Ok((self.builder.finish()?, self.warnings, self.dropped))
    }
}

pub(crate) fn check_unique_ids(line: usize, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(QscanError::parse(line, format!("duplicate sample id '{id}'")));
        }
    }
    Ok(())
}
