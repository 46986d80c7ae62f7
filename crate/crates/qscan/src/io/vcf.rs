//! Minimal VCF reader: biallelic records with a GT field only.

use std::io::{BufRead, Write};
use std::path::Path;

use qscan_core::{GenotypeMatrix, VariantInfo};

use super::{check_unique_ids, open_text, ColumnSink, Lines, OrderCheck, ParseOptions, ParsedGenotypes};
use crate::error::{QscanError, Result};

pub fn parse_vcf_subset(path: &Path, opts: ParseOptions) -> Result<ParsedGenotypes> {
    parse_vcf_reader(open_text(path)?, opts)
}

pub fn parse_vcf_reader<R: BufRead>(reader: R, opts: ParseOptions) -> Result<ParsedGenotypes> {
    let mut lines = Lines::new(reader);
    let (header_line, sample_ids) = loop {
        match lines.next_line()? {
            None => return Err(QscanError::Format("missing #CHROM header line".into())),
            Some((_, t)) if t.starts_with("##") || t.trim().is_empty() => continue,
            Some((no, t)) if t.starts_with("#CHROM") => {
                let cols: Vec<&str> = t.split('\t').collect();
                if cols.len() < 8 {
                    return Err(QscanError::parse(no, "#CHROM line has fewer than 8 columns"));
                }
                if cols.len() > 8 && cols[8] != "FORMAT" {
                    return Err(QscanError::parse(no, "ninth header column must be FORMAT"));
                }
                let ids: Vec<String> = cols.iter().skip(9).map(|s| s.to_string()).collect();
                if ids.is_empty() {
                    return Err(QscanError::parse(no, "VCF has no sample columns"));
                }
                break (no, ids);
            }
            Some((no, _)) => {
                return Err(QscanError::Format(format!(
                    "missing #CHROM header line before the first record (line {no})"
                )))
            }
        }
    };
    check_unique_ids(header_line, &sample_ids)?;
    let n = sample_ids.len();
    let mut sink = ColumnSink::new(n, opts);
    let mut order = OrderCheck::default();
    let (mut multi, mut symbolic, mut no_gt) = (0, 0, 0);
    let mut calls: Vec<Option<f64>> = Vec::with_capacity(n);
    while let Some((no, text)) = lines.next_line()? {
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != 9 + n {
            return Err(QscanError::parse(
                no,
                format!("expected {} tab-separated fields, found {}", 9 + n, fields.len()),
            ));
        }
        let chrom = fields[0];
        let pos: u64 = fields[1]
            .parse()
            .map_err(|_| QscanError::parse(no, format!("position '{}' is not a non-negative integer", fields[1])))?;
        if chrom.is_empty() {
            return Err(QscanError::parse(no, "empty CHROM"));
        }
        order.check(no, chrom, pos)?;
        let alt = fields[4];
        let alts: Vec<&str> = if alt == "." { Vec::new() } else { alt.split(',').collect() };
        if alts.len() > 1 {
            multi += 1;
            continue;
        }
        if alts.iter().any(|a| a.starts_with('<') || a.contains('[') || a.contains(']') || *a == "*") {
            symbolic += 1;
            continue;
        }
        let n_alleles = 1 + alts.len();
        let Some(gt_index) = fields[8].split(':').position(|f| f == "GT") else {
            no_gt += 1;
            continue;
        };
        calls.clear();
        for (k, sample) in fields[9..].iter().enumerate() {
            let gt = sample.split(':').nth(gt_index).unwrap_or(".");
            calls.push(parse_gt(gt, n_alleles).map_err(|msg| {
                QscanError::parse(no, format!("{msg} for sample {} at {chrom}:{pos}", k + 1))
            })?);
        }
        let id = if fields[2] == "." || fields[2].is_empty() {
            format!("{chrom}:{pos}")
        } else {
            fields[2].to_string()
        };
        let info = VariantInfo {
            chrom: chrom.to_string(),
            pos,
            id,
        };
        sink.push(no, info, &calls)?;
    }
    let (geno, mut warnings, dropped) = sink.finish()?;
    for (count, what) in [(multi, "multiallelic"), (symbolic, "symbolic-ALT"), (no_gt, "GT-less")] {
        if count > 0 {
            warnings.push(format!("skipped {count} {what} records"));
        }
    }
    Ok(ParsedGenotypes {
        geno,
        sample_ids,
        warnings,
        dropped_missing: dropped,
        skipped_multiallelic: multi,
        skipped_symbolic: symbolic,
        skipped_no_gt: no_gt,
    })
}

/// ALT allele count of a diploid GT, `None` when any allele is missing.
fn parse_gt(gt: &str, n_alleles: usize) -> std::result::Result<Option<f64>, String> {
    if gt == "." {
        return Ok(None);
    }
    let mut alleles = gt.split(['/', '|']);
    let (Some(a), Some(b), None) = (alleles.next(), alleles.next(), alleles.next()) else {
        return Err(format!("GT '{gt}' is not diploid"));
    };
    let mut dosage = 0.0;
    let mut missing = false;
    for allele in [a, b] {
        if allele == "." {
            missing = true;
            continue;
        }
        let idx: usize = allele
            .parse()
            .map_err(|_| format!("GT allele '{allele}' is not an index"))?;
        if idx >= n_alleles {
            return Err(format!("GT index {idx} out of range"));
        }
        dosage += idx as f64;
    }
    Ok(if missing { None } else { Some(dosage) })
}

/// Writes integer dosages (0, 1 or 2) as an unphased VCF subset.
pub fn write_vcf_subset<W: Write>(mut w: W, geno: &GenotypeMatrix, sample_ids: &[String]) -> Result<()> {
    if sample_ids.len() != geno.n_samples() {
        return Err(qscan_core::Error::DimensionMismatch {
            what: "sample ids",
            expected: geno.n_samples(),
            found: sample_ids.len(),
        }
        .into());
    }
    let io = |e| QscanError::io("<vcf output>", e);
    writeln!(w, "##fileformat=VCFv4.2").map_err(io)?;
    writeln!(w, "##FORMAT=<ID=GT,Number=1,Type=String,Description=\"Genotype\">").map_err(io)?;
    write!(w, "#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT").map_err(io)?;
    for id in sample_ids {
        write!(w, "\t{id}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    let mut line = String::new();
    for (j, v) in geno.variants().iter().enumerate() {
        line.clear();
        line.push_str(&format!("{}\t{}\t{}\tA\tC\t.\tPASS\t.\tGT", v.chrom, v.pos, v.id));
        for d in geno.dense_column(j) {
            let gt = match d {
                x if x == 0.0 => "0/0",
                x if x == 1.0 => "0/1",
                x if x == 2.0 => "1/1",
                x => {
                    return Err(QscanError::Format(format!(
                        "dosage {x} of variant {} is not an integer genotype",
                        v.id
                    )))
                }
            };
            line.push('\t');
            line.push_str(gt);
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io)?;
    }
    Ok(())
}
