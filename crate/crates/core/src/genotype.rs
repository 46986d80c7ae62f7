//! Genotype dosages stored sparsely by variant.
//!
//! Rare-variant panels are overwhelmingly zero, so each variant column keeps
//! only its non-zero `(sample, dosage)` pairs. Variants are ordered by
//! chromosome block and strictly increasing position within a block.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantInfo {
    pub chrom: String,
    pub pos: u64,
    pub id: String,
}

/// Contiguous run of variants on one chromosome, `[start, end)` in column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub chrom: String,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    n: usize,
    variants: Vec<VariantInfo>,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<f64>,
    allele_sum: Vec<f64>,
    source_index: Vec<usize>,
    segments: Vec<Segment>,
}

/// Column-at-a-time constructor; validation happens in [`GenotypeBuilder::finish`].
#[derive(Debug, Clone)]
pub struct GenotypeBuilder {
    n: usize,
    variants: Vec<VariantInfo>,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<f64>,
}

impl GenotypeBuilder {
    pub fn new(n_samples: usize) -> Self {
        let mut col_ptr = Vec::new();
        col_ptr.push(0);
        Self {
            n: n_samples,
            variants: Vec::new(),
            col_ptr,
            rows: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn with_capacity(n_samples: usize, variants: usize, nnz: usize) -> Self {
        let mut b = Self::new(n_samples);
        b.variants.reserve(variants);
        b.col_ptr.reserve(variants);
        b.rows.reserve(nnz);
        b.vals.reserve(nnz);
        b
    }

    pub fn push_dense(&mut self, info: VariantInfo, dosages: &[f64]) -> Result<()> {
        if dosages.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "dosage column length",
                expected: self.n,
                found: dosages.len(),
            });
        }
        for (i, &d) in dosages.iter().enumerate() {
            check_dosage(d, &info)?;
            if d != 0.0 {
                self.rows.push(i as u32);
                self.vals.push(d);
            }
        }
        self.variants.push(info);
        self.col_ptr.push(self.rows.len());
        Ok(())
    }

    /// `entries` must have strictly increasing sample indices.
    pub fn push_sparse(&mut self, info: VariantInfo, entries: &[(u32, f64)]) -> Result<()> {
        let mut prev: Option<u32> = None;
        for &(i, d) in entries {
            if i as usize >= self.n || prev.is_some_and(|p| p >= i) {
                return Err(Error::InvalidGenotype(format!(
                    "variant {}: sample indices must be increasing and < {}",
                    info.id, self.n
                )));
            }
            prev = Some(i);
            check_dosage(d, &info)?;
            if d != 0.0 {
                self.rows.push(i);
                self.vals.push(d);
            }
        }
        self.variants.push(info);
        self.col_ptr.push(self.rows.len());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn finish(self) -> Result<GenotypeMatrix> {
        let p = self.variants.len();
        GenotypeMatrix::assemble(
            self.n,
            self.variants,
            self.col_ptr,
            self.rows,
            self.vals,
            (0..p).collect(),
        )
    }
}

fn check_dosage(d: f64, info: &VariantInfo) -> Result<()> {
    if !(0.0..=2.0).contains(&d) {
        return Err(Error::InvalidGenotype(format!(
            "variant {} ({}:{}): dosage {d} outside [0, 2]",
            info.id, info.chrom, info.pos
        )));
    }
    Ok(())
}

impl GenotypeMatrix {
    /// Dense convenience constructor; `columns[j]` holds the n dosages of variant j.
    pub fn from_dense_columns(
        n_samples: usize,
        variants: Vec<VariantInfo>,
        columns: &[Vec<f64>],
    ) -> Result<Self> {
        if variants.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                what: "variant annotations",
                expected: columns.len(),
                found: variants.len(),
            });
        }
        let mut b = GenotypeBuilder::new(n_samples);
        for (info, col) in variants.into_iter().zip(columns) {
            b.push_dense(info, col)?;
        }
        b.finish()
    }

    fn assemble(
        n: usize,
        variants: Vec<VariantInfo>,
        col_ptr: Vec<usize>,
        rows: Vec<u32>,
        vals: Vec<f64>,
        source_index: Vec<usize>,
    ) -> Result<Self> {
        let mut segments: Vec<Segment> = Vec::new();
        for (j, v) in variants.iter().enumerate() {
            match segments.last_mut() {
                Some(seg) if seg.chrom == v.chrom => {
                    let prev = &variants[j - 1];
                    if v.pos <= prev.pos {
                        return Err(Error::InvalidGenotype(format!(
                            "positions not strictly increasing on {}: {} then {}",
                            v.chrom, prev.pos, v.pos
                        )));
                    }
                    seg.range.end = j + 1;
                }
                _ => {
                    if segments.iter().any(|s| s.chrom == v.chrom) {
                        return Err(Error::InvalidGenotype(format!(
                            "chromosome {} appears in more than one block",
                            v.chrom
                        )));
                    }
                    segments.push(Segment {
                        chrom: v.chrom.clone(),
                        range: j..j + 1,
                    });
                }
            }
        }
        let allele_sum = col_ptr
            .windows(2)
            .map(|w| vals[w[0]..w[1]].iter().sum())
            .collect();
        Ok(Self {
            n,
            variants,
            col_ptr,
            rows,
            vals,
            allele_sum,
            source_index,
            segments,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_variants(&self) -> usize {
        self.variants.len()
    }

    pub fn variants(&self) -> &[VariantInfo] {
        &self.variants
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Column index of each variant in the matrix this one was filtered from.
    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    /// Non-zero entries of variant `j` as parallel `(sample indices, dosages)`.
    #[inline]
    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.rows[a..b], &self.vals[a..b])
    }

    pub fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.n];
        let (r, v) = self.column(j);
        for (&i, &d) in r.iter().zip(v) {
            out[i as usize] = d;
        }
        out
    }

    pub fn dosage(&self, sample: usize, j: usize) -> f64 {
        let (r, v) = self.column(j);
        match r.binary_search(&(sample as u32)) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Alternate-allele frequency `Σ_i G_ij / 2n`.
    pub fn allele_frequency(&self, j: usize) -> f64 {
        self.allele_sum[j] / (2.0 * self.n as f64)
    }

    pub fn maf(&self, j: usize) -> f64 {
        let f = self.allele_frequency(j);
        f.min(1.0 - f)
    }

    /// Minor allele count (real-valued when dosages were imputed).
    pub fn mac(&self, j: usize) -> f64 {
        let s = self.allele_sum[j];
        s.min(2.0 * self.n as f64 - s)
    }

    /// Keeps the listed columns (in the given, increasing order).
    pub fn select_variants(&self, keep: &[usize]) -> Result<Self> {
        let mut col_ptr = Vec::with_capacity(keep.len() + 1);
        col_ptr.push(0);
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        let mut variants = Vec::with_capacity(keep.len());
        let mut source = Vec::with_capacity(keep.len());
        for &j in keep {
            let (r, v) = self.column(j);
            rows.extend_from_slice(r);
            vals.extend_from_slice(v);
            col_ptr.push(rows.len());
            variants.push(self.variants[j].clone());
            source.push(self.source_index[j]);
        }
        Self::assemble(self.n, variants, col_ptr, rows, vals, source)
    }

    /// Keeps the listed samples, in the given order.
    pub fn select_samples(&self, order: &[usize]) -> Result<Self> {
        let mut new_of_old = alloc::vec![u32::MAX; self.n];
        for (k, &i) in order.iter().enumerate() {
            if i >= self.n {
                return Err(Error::DimensionMismatch {
                    what: "sample index",
                    expected: self.n,
                    found: i,
                });
            }
            new_of_old[i] = k as u32;
        }
        let mut col_ptr = Vec::with_capacity(self.col_ptr.len());
        col_ptr.push(0);
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        let mut buf: Vec<(u32, f64)> = Vec::new();
        for j in 0..self.n_variants() {
            buf.clear();
            let (r, v) = self.column(j);
            for (&i, &d) in r.iter().zip(v) {
                let k = new_of_old[i as usize];
                if k != u32::MAX {
                    buf.push((k, d));
                }
            }
            buf.sort_unstable_by_key(|e| e.0);
            for &(k, d) in &buf {
                rows.push(k);
                vals.push(d);
            }
            col_ptr.push(rows.len());
        }
        Self::assemble(
            order.len(),
            self.variants.clone(),
            col_ptr,
            rows,
            vals,
            self.source_index.clone(),
        )
    }
}

/// Keeps variants with `0 < MAF ≤ maf_max` and minor allele count `≥ mac_min`,
/// preserving order. The returned matrix's [`GenotypeMatrix::source_index`]
/// maps back to the input columns.
pub fn filter_variants(geno: &GenotypeMatrix, maf_max: f64, mac_min: u32) -> Result<GenotypeMatrix> {
    if !(maf_max > 0.0 && maf_max <= 0.5) {
        return Err(Error::InvalidConfig(format!("maf_max {maf_max} not in (0, 0.5]")));
    }
    if mac_min < 1 {
        return Err(Error::InvalidConfig("mac_min must be at least 1".into()));
    }
    let keep: Vec<usize> = (0..geno.n_variants())
        .filter(|&j| {
            let maf = geno.maf(j);
            maf > 0.0 && maf <= maf_max && geno.mac(j) >= f64::from(mac_min)
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::NoVariants);
    }
    geno.select_variants(&keep)
}
