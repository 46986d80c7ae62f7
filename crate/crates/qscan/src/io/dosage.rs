//! Whitespace-separated dosage table.
//!
//! The first non-blank line lists the sample IDs, optionally preceded by three
//! column names for the variant fields (recognised when the first token starts
//! with `#` or is `chrom`). Every other line is `chrom pos id d_1 .. d_n`
//! with dosages in `[0, 2]` or `NA`.

use std::io::BufRead;
use std::path::Path;

use qscan_core::VariantInfo;

use super::{check_unique_ids, open_text, ColumnSink, Lines, OrderCheck, ParseOptions, ParsedGenotypes};
use crate::error::{QscanError, Result};

pub fn parse_dosage_tsv(path: &Path, opts: ParseOptions) -> Result<ParsedGenotypes> {
    parse_dosage_reader(open_text(path)?, opts)
}

pub fn parse_dosage_reader<R: BufRead>(reader: R, opts: ParseOptions) -> Result<ParsedGenotypes> {
    let mut lines = Lines::new(reader);
    let (header_line, sample_ids) = loop {
        match lines.next_line()? {
            None => return Err(QscanError::Format("empty dosage file: no header line".into())),
            Some((_, t)) if t.trim().is_empty() => continue,
            Some((no, t)) => {
                let mut tokens: Vec<&str> = t.split_whitespace().collect();
                let first = tokens[0];
                if first.starts_with('#') || first.eq_ignore_ascii_case("chrom") {
                    if tokens.len() < 3 {
                        return Err(QscanError::parse(no, "header names fewer than three variant columns"));
                    }
                    tokens.drain(..3);
                }
                if tokens.is_empty() {
                    return Err(QscanError::parse(no, "header lists no samples"));
                }
                break (no, tokens.into_iter().map(str::to_string).collect::<Vec<_>>());
            }
        }
    };
    check_unique_ids(header_line, &sample_ids)?;
    let n = sample_ids.len();
    let mut sink = ColumnSink::new(n, opts);
    let mut order = OrderCheck::default();
    let mut calls: Vec<Option<f64>> = Vec::with_capacity(n);
    while let Some((no, text)) = lines.next_line()? {
        if text.trim().is_empty() {
            continue;
        }
        let mut fields = text.split_whitespace();
        let (chrom, pos, id) = match (fields.next(), fields.next(), fields.next()) {
            (Some(c), Some(p), Some(i)) => (c, p, i),
            _ => return Err(QscanError::parse(no, "expected chrom, pos and id before the dosages")),
        };
        let pos: u64 = pos
            .parse()
            .map_err(|_| QscanError::parse(no, format!("position '{pos}' is not a non-negative integer")))?;
        calls.clear();
        for (k, tok) in fields.enumerate() {
            if k >= n {
                return Err(QscanError::parse(no, format!("expected {} fields, found more", n + 3)));
            }
            calls.push(parse_dosage(no, k, tok)?);
        }
        if calls.len() != n {
            return Err(QscanError::parse(
                no,
                format!("expected {} fields, found {}", n + 3, calls.len() + 3),
            ));
        }
        order.check(no, chrom, pos)?;
        let info = VariantInfo {
            chrom: chrom.to_string(),
            pos,
            id: id.to_string(),
        };
        sink.push(no, info, &calls)?;
    }
    let (geno, warnings, dropped) = sink.finish()?;
    Ok(ParsedGenotypes {
        geno,
        sample_ids,
        warnings,
        dropped_missing: dropped,
        skipped_multiallelic: 0,
        skipped_symbolic: 0,
        skipped_no_gt: 0,
    })
}

fn parse_dosage(line: usize, k: usize, tok: &str) -> Result<Option<f64>> {
    if tok == "NA" {
        return Ok(None);
    }
    let v: f64 = tok
        .parse()
        .map_err(|_| QscanError::parse(line, format!("dosage '{tok}' of sample {} is not a number", k + 1)))?;
    if !(0.0..=2.0).contains(&v) {
        return Err(QscanError::parse(
            line,
            format!("dosage {tok} of sample {} is outside [0, 2]", k + 1),
        ));
    }
    Ok(Some(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ParsedGenotypes> {
        parse_dosage_reader(s.as_bytes(), ParseOptions::default())
    }

    #[test]
    fn two_samples_one_variant() {
        let g = parse("s1 s2\nchr1 100 v1 0 2\n").unwrap();
        assert_eq!(g.geno.n_samples(), 2);
        assert_eq!(g.geno.n_variants(), 1);
        assert_eq!(g.geno.maf(0), 0.5);
        assert_eq!(g.sample_ids, ["s1", "s2"]);
    }

    #[test]
    fn header_with_variant_columns() {
        let g = parse("#chrom\tpos\tid\ta\tb\nchr1\t100\tv1\t1\t0\n").unwrap();
        assert_eq!(g.sample_ids, ["a", "b"]);
        assert_eq!(g.geno.dense_column(0), [1.0, 0.0]);
    }

    #[test]
    fn na_is_mean_imputed() {
        let g = parse_dosage_reader(
            "a b c d\nchr1 100 v1 0 1 1 NA\n".as_bytes(),
            ParseOptions { max_missing: 0.25 },
        )
        .unwrap();
        let col = g.geno.dense_column(0);
        assert!((col[3] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn missingness_cap_drops_variant() {
        let g = parse("a b c d\nchr1 100 v1 0 1 1 NA\nchr1 200 v2 0 1 1 2\n").unwrap();
        assert_eq!(g.geno.n_variants(), 1);
        assert_eq!(g.dropped_missing, 1);
        assert!(g.warnings[0].contains("v1"));
    }

    #[test]
    fn shuffled_positions_name_the_line() {
        let e = parse("a b\nchr1 200 v1 0 1\nchr1 100 v2 0 1\n").unwrap_err();
        assert!(matches!(e, QscanError::Ordering { line: 3, .. }), "{e}");
    }

    #[test]
    fn malformed_rows() {
        let cases = [
            ("a b\nchr1 100 v1 0\n", 2),
            ("a b\nchr1 100 v1 0 1 1\n", 2),
            ("a b\nchr1 100 v1 0 x\n", 2),
            ("a b\nchr1 100 v1 0 2.5\n", 2),
            ("a b\nchr1 100 v1 0 -1\n", 2),
            ("a b\nchr1 100 v1 0 inf\n", 2),
            ("a b\nchr1 1e2 v1 0 1\n", 2),
            ("a b\nchr1 100\n", 2),
            ("a b\nchr1 100 v1 0 1\nchr2 50 v2 0 1\nchr1 300 v3 0 1\n", 4),
            ("a a\nchr1 100 v1 0 1\n", 1),
        ];
        for (text, line) in cases {
            match parse(text) {
                Err(QscanError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(matches!(parse(""), Err(QscanError::Format(_))));
        assert!(matches!(parse("a b\n"), Err(QscanError::Core(qscan_core::Error::NoVariants))));
    }

    #[test]
    fn invalid_utf8_is_an_error() {
        let bytes = b"a b\nchr1 100 v1 0 \xff\n";
        let e = parse_dosage_reader(&bytes[..], ParseOptions::default()).unwrap_err();
        assert!(matches!(e, QscanError::Parse { line: 2, .. }));
    }
}
