//! Phenotype/covariate table: header row, sample ID in the first column.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use qscan_core::{CovariateMatrix, Family, GenotypeMatrix, PhenotypeVector};

use super::{check_unique_ids, open_text, Lines};
use crate::error::{QscanError, Result};

/// Selected columns of a phenotype table, rows with missing values removed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenoTable {
    pub sample_ids: Vec<String>,
    pub phenotype: Vec<f64>,
    /// one vector per requested covariate, in request order
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
    pub warnings: Vec<String>,
}

/// Genotypes, phenotype and covariates over the same samples in the same order.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub genotype: GenotypeMatrix,
    pub phenotype: PhenotypeVector,
    pub covariates: CovariateMatrix,
    pub sample_ids: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn parse_pheno_covar(path: &Path, pheno_column: &str, covar_columns: &[String]) -> Result<PhenoTable> {
    parse_pheno_reader(open_text(path)?, pheno_column, covar_columns)
}

fn is_missing(tok: &str) -> bool {
    matches!(tok, "" | "NA" | "na" | "." | "NaN" | "nan")
}

pub fn parse_pheno_reader<R: BufRead>(reader: R, pheno_column: &str, covar_columns: &[String]) -> Result<PhenoTable> {
    let mut lines = Lines::new(reader);
    let (hline, header) = loop {
        match lines.next_line()? {
            None => return Err(QscanError::Format("empty phenotype file".into())),
            Some((_, t)) if t.trim().is_empty() => continue,
            Some((no, t)) => break (no, split(t).map(str::to_string).collect::<Vec<_>>()),
        }
    };
    if header.len() < 2 {
        return Err(QscanError::parse(hline, "phenotype header needs an ID column and at least one value column"));
    }
    let lookup = |name: &str| -> Result<usize> {
        header
            .iter()
            .skip(1)
            .position(|h| h == name)
            .map(|k| k + 1)
            .ok_or_else(|| QscanError::UnknownColumn {
                name: name.to_string(),
                available: header[1..].join(", "),
            })
    };
    let pcol = lookup(pheno_column)?;
    let ccols: Vec<usize> = covar_columns.iter().map(|c| lookup(c)).collect::<Result<_>>()?;
    let mut out = PhenoTable {
        sample_ids: Vec::new(),
        phenotype: Vec::new(),
        covariates: vec![Vec::new(); ccols.len()],
        covariate_names: covar_columns.to_vec(),
        warnings: Vec::new(),
    };
    let mut row_values = Vec::with_capacity(ccols.len());
    while let Some((no, text)) = lines.next_line()? {
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = split(text).collect();
        if fields.len() != header.len() {
            return Err(QscanError::parse(
                no,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        let id = fields[0];
        let value = |col: usize| -> Result<Option<f64>> {
            let tok = fields[col];
            if is_missing(tok) {
                return Ok(None);
            }
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(QscanError::parse(
                    no,
                    format!("value '{tok}' in column {} is not a finite number", header[col]),
                )),
            }
        };
        let Some(y) = value(pcol)? else {
            out.warnings.push(format!("sample {id}: missing phenotype, dropped"));
            continue;
        };
        row_values.clear();
        let mut missing_covar = None;
        for &c in &ccols {
            match value(c)? {
                Some(v) => row_values.push(v),
                None => {
                    missing_covar = Some(&header[c]);
                    break;
                }
            }
        }
        if let Some(name) = missing_covar {
            out.warnings.push(format!("sample {id}: missing covariate {name}, dropped"));
            continue;
        }
        out.sample_ids.push(id.to_string());
        out.phenotype.push(y);
        for (col, &v) in out.covariates.iter_mut().zip(&row_values) {
            col.push(v);
        }
    }
    check_unique_ids(hline, &out.sample_ids)?;
    Ok(out)
}

fn split(line: &str) -> impl Iterator<Item = &str> {
    let tabbed = line.contains('\t');
    let parts: Box<dyn Iterator<Item = &str>> = if tabbed {
        Box::new(line.split('\t'))
    } else {
        Box::new(line.split_whitespace())
    };
    parts
}

/// Intersects the phenotype samples with the genotype samples and orders
/// everything like the genotype file. An intercept is prepended to the
/// covariates.
pub fn align_samples(
    geno: &GenotypeMatrix,
    geno_ids: &[String],
    table: &PhenoTable,
    family: Family,
) -> Result<DatasetBundle> {
    let index: HashMap<&str, usize> = table
        .sample_ids
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let mut geno_rows = Vec::new();
    let mut table_rows = Vec::new();
    for (i, id) in geno_ids.iter().enumerate() {
        if let Some(&k) = index.get(id.as_str()) {
            geno_rows.push(i);
            table_rows.push(k);
        }
    }
    let mut warnings = table.warnings.clone();
    let unmatched = geno_ids.len() - geno_rows.len();
    if unmatched > 0 {
        warnings.push(format!("{unmatched} genotyped samples have no usable phenotype row"));
    }
    if geno_rows.len() < 2 {
        return Err(QscanError::Format(format!(
            "only {} samples shared between genotype and phenotype files",
            geno_rows.len()
        )));
    }
    let n = geno_rows.len();
    let genotype = if n == geno_ids.len() {
        geno.clone()
    } else {
        geno.select_samples(&geno_rows)?
    };
    let phenotype = PhenotypeVector::new(table_rows.iter().map(|&k| table.phenotype[k]).collect(), family)?;
    let columns = table
        .covariates
        .iter()
        .map(|c| table_rows.iter().map(|&k| c[k]).collect())
        .collect();
    let covariates = CovariateMatrix::new(n, columns, table.covariate_names.clone())?;
    Ok(DatasetBundle {
        genotype,
        phenotype,
        covariates,
        sample_ids: geno_rows.iter().map(|&i| geno_ids[i].clone()).collect(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use qscan_core::VariantInfo;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn reorders_to_genotype_order() {
        let table = parse_pheno_reader(
            "id\ty\tage\nc\t3\t30\na\t1\t10\nb\t2\t20\n".as_bytes(),
            "y",
            &names(&["age"]),
        )
        .unwrap();
        let cols = vec![vec![0.0, 1.0, 2.0]];
        let infos = vec![VariantInfo { chrom: "1".into(), pos: 1, id: "v".into() }];
        let geno = GenotypeMatrix::from_dense_columns(3, infos, &cols).unwrap();
        let b = align_samples(&geno, &names(&["a", "b", "c"]), &table, Family::Gaussian).unwrap();
        assert_eq!(b.phenotype.values(), [1.0, 2.0, 3.0]);
        assert_eq!(b.covariates.column(1), [10.0, 20.0, 30.0]);
        assert_eq!(b.covariates.column(0), [1.0, 1.0, 1.0]);
        assert_eq!(b.sample_ids, names(&["a", "b", "c"]));
    }

    #[test]
    fn unknown_column_lists_available() {
        let e = parse_pheno_reader("id y age\na 1 2\n".as_bytes(), "bmi", &[]).unwrap_err();
        match e {
            QscanError::UnknownColumn { available, .. } => assert_eq!(available, "y, age"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_values_drop_samples() {
        let t = parse_pheno_reader("id y x\na NA 1\nb 2 NA\nc 3 4\nd 5 6\n".as_bytes(), "y", &names(&["x"])).unwrap();
        assert_eq!(t.sample_ids, names(&["c", "d"]));
        assert_eq!(t.warnings.len(), 2);
    }

    #[test]
    fn too_few_samples() {
        let t = parse_pheno_reader("id y\na 1\nzz 2\n".as_bytes(), "y", &[]).unwrap();
        let infos = vec![VariantInfo { chrom: "1".into(), pos: 1, id: "v".into() }];
        let geno = GenotypeMatrix::from_dense_columns(2, infos, &[vec![0.0, 1.0]]).unwrap();
        assert!(align_samples(&geno, &names(&["a", "b"]), &t, Family::Gaussian).is_err());
    }

    #[test]
    fn constant_covariate_fails_at_fit_with_its_name() {
        let text = "id y sex\na 1.0 2\nb 2.5 2\nc 0.3 2\nd 1.7 2\n";
        let t = parse_pheno_reader(text.as_bytes(), "y", &names(&["sex"])).unwrap();
        let infos = vec![VariantInfo { chrom: "1".into(), pos: 1, id: "v".into() }];
        let geno = GenotypeMatrix::from_dense_columns(4, infos, &[vec![0.0, 1.0, 0.0, 1.0]]).unwrap();
        let r = align_samples(&geno, &names(&["a", "b", "c", "d"]), &t, Family::Gaussian)
            .and_then(|b| Ok(qscan_core::fit_null(&b.phenotype, &b.covariates)?));
        match r {
            Err(QscanError::Core(qscan_core::Error::SingularDesign { name, .. })) => assert_eq!(name, "sex"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            parse_pheno_reader("id y\na 1 2\n".as_bytes(), "y", &[]),
            Err(QscanError::Parse { line: 2, .. })
        ));
        assert!(parse_pheno_reader("id y\na abc\n".as_bytes(), "y", &[]).is_err());
        assert!(parse_pheno_reader("id y\na 1\na 2\n".as_bytes(), "y", &[]).is_err());
    }
}
