//! Marginal score statistics `U_j = G_jᵀ(Y − η̂₀)/√n` and their banded
//! covariance `Σ̂_jk = G̃_jᵀ Λ G̃_k / n`.
//!
//! `G̃_j = G_j − X (XᵀΛX)⁻¹ XᵀΛ G_j` are the covariate-adjusted genotypes. They
//! are never materialized: with `t_j = XᵀΛG_j` and `B_j = (XᵀΛX)⁻¹ t_j`,
//! `G̃_jᵀΛG̃_k = G_jᵀΛG_k − t_jᵀB_k`, so each band entry costs one sparse dot
//! product plus a q-term correction.

use alloc::vec;
use alloc::vec::Vec;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, Segment};
use crate::linalg;
use crate::null_model::NullModel;

/// Projected variance below this fraction of the raw weighted second moment
/// marks a variant as degenerate (monomorphic or absorbed by the covariates).
const DEGENERATE_REL: f64 = 1e-10;

fn check_samples(geno: &GenotypeMatrix, model: &NullModel) -> Result<()> {
    if geno.n_samples() != model.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "genotype samples vs null model samples",
            expected: model.n_samples(),
            found: geno.n_samples(),
        });
    }
    Ok(())
}

pub fn compute_scores(geno: &GenotypeMatrix, model: &NullModel) -> Result<Vec<f64>> {
    check_samples(geno, model)?;
    let scale = 1.0 / libm::sqrt(geno.n_samples() as f64);
    let r = &model.residuals;
    Ok((0..geno.n_variants())
        .map(|j| {
            let (rows, vals) = geno.column(j);
            rows.iter()
                .zip(vals)
                .map(|(&i, &d)| d * r[i as usize])
                .sum::<f64>()
                * scale
        })
        .collect())
}

/// Covariate projection data for every variant column.
#[derive(Debug, Clone)]
pub struct AdjustedGenotypes<'a> {
    geno: &'a GenotypeMatrix,
    model: &'a NullModel,
    q: usize,
    /// t_j = XᵀΛG_j, p x q
    t: Vec<f64>,
    /// B_j = (XᵀΛX)⁻¹ t_j, p x q
    b: Vec<f64>,
}

impl<'a> AdjustedGenotypes<'a> {
    pub fn new(geno: &'a GenotypeMatrix, model: &'a NullModel) -> Result<Self> {
        check_samples(geno, model)?;
        let x = &model.covariates;
        let q = x.n_covariates();
        let p = geno.n_variants();
        let w = &model.weights;
        let mut t = vec![0.0; p * q];
        let mut b = vec![0.0; p * q];
        for j in 0..p {
            let (rows, vals) = geno.column(j);
            let tj = &mut t[j * q..(j + 1) * q];
            for (c, tc) in tj.iter_mut().enumerate() {
                let col = x.column(c);
                *tc = rows
                    .iter()
                    .zip(vals)
                    .map(|(&i, &d)| col[i as usize] * w[i as usize] * d)
                    .sum();
            }
            linalg::mat_vec(&model.xtwx_inv, q, tj, &mut b[j * q..(j + 1) * q]);
        }
        Ok(Self {
            geno,
            model,
            q,
            t,
            b,
        })
    }

    pub fn genotypes(&self) -> &'a GenotypeMatrix {
        self.geno
    }

    pub fn model(&self) -> &'a NullModel {
        self.model
    }

    /// `B_j`, the covariate regression coefficients of variant `j`.
    pub fn coefficients(&self, j: usize) -> &[f64] {
        &self.b[j * self.q..(j + 1) * self.q]
    }

    /// `n·Σ̂_jj` split as (raw `G_jᵀΛG_j`, projected `G̃_jᵀΛG̃_j`).
    fn diag_parts(&self, j: usize) -> (f64, f64) {
        let (rows, vals) = self.geno.column(j);
        let w = &self.model.weights;
        let raw: f64 = rows
            .iter()
            .zip(vals)
            .map(|(&i, &d)| d * d * w[i as usize])
            .sum();
        let corr: f64 = self.t[j * self.q..(j + 1) * self.q]
            .iter()
            .zip(self.coefficients(j))
            .map(|(a, b)| a * b)
            .sum();
        (raw, raw - corr)
    }

    /// Band of `Σ̂` over the listed columns (in order); entries between
    /// columns on different chromosomes are zero.
    fn band(&self, cols: &[usize], bandwidth: usize) -> BandedMatrix {
        let m = cols.len();
        let q = self.q;
        let n = self.geno.n_samples();
        let inv_n = 1.0 / n as f64;
        let w = &self.model.weights;
        let variants = self.geno.variants();
        let mut out = BandedMatrix::zeros(m, bandwidth);
        let mut scatter = vec![0.0; n];
        for a in 0..m {
            let j = cols[a];
            let (rj, vj) = self.geno.column(j);
            for (&i, &d) in rj.iter().zip(vj) {
                scatter[i as usize] = d * w[i as usize];
            }
            let tj = &self.t[j * q..(j + 1) * q];
            let row = out.row_mut(a);
            for (k, slot) in row.iter_mut().enumerate() {
                let bcol = a + k;
                if bcol >= m {
                    break;
                }
                let jk = cols[bcol];
                if variants[jk].chrom != variants[j].chrom {
                    break;
                }
                let (rk, vk) = self.geno.column(jk);
                let raw: f64 = rk
                    .iter()
                    .zip(vk)
                    .map(|(&i, &d)| scatter[i as usize] * d)
                    .sum();
                let corr: f64 = tj.iter().zip(self.coefficients(jk)).map(|(a, b)| a * b).sum();
                *slot = (raw - corr) * inv_n;
            }
            for &i in rj {
                scatter[i as usize] = 0.0;
            }
        }
        out
    }

    /// `G̃_jᵀ v / √n` for the listed columns: the mean score of each variant
    /// when the phenotype carries an extra additive term `v`.
    pub fn adjusted_inner(&self, cols: &[usize], v: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.geno.n_samples();
        if v.len() != n || out.len() != cols.len() {
            return Err(Error::DimensionMismatch {
                what: "adjusted inner product",
                expected: n,
                found: v.len(),
            });
        }
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.geno.n_variants()) {
            return Err(Error::DimensionMismatch {
                what: "variant column",
                expected: self.geno.n_variants(),
                found: bad,
            });
        }
        let mut xv = vec![0.0; self.q];
        self.model.covariates.xt_weighted(None, v, &mut xv);
        self.pseudo_scores(cols, v, &xv, out);
        Ok(())
    }

    /// Pseudo-scores `Ũ_j = G̃_jᵀ Λ^{1/2} z / √n` for the listed columns, given
    /// `w = Λ^{1/2} z` and `xw = Xᵀ w`. `Cov(Ũ) = Σ̂` exactly when `z ~ N(0, I)`.
    pub(crate) fn pseudo_scores(&self, cols: &[usize], w: &[f64], xw: &[f64], out: &mut [f64]) {
        let scale = 1.0 / libm::sqrt(self.geno.n_samples() as f64);
        for (o, &j) in out.iter_mut().zip(cols) {
            let (rows, vals) = self.geno.column(j);
            let g: f64 = rows.iter().zip(vals).map(|(&i, &d)| d * w[i as usize]).sum();
            let c: f64 = self.coefficients(j).iter().zip(xw).map(|(a, b)| a * b).sum();
            *o = (g - c) * scale;
        }
    }
}

/// Full band of `Σ̂` for every variant column. Monomorphic columns get a zero
/// (up to rounding) diagonal; see [`ScoreSet::compute`] for the filtered form.
pub fn compute_banded_cov(
    geno: &GenotypeMatrix,
    model: &NullModel,
    bandwidth: usize,
) -> Result<BandedMatrix> {
    if bandwidth < 1 {
        return Err(Error::InvalidBandwidth {
            bandwidth,
            reason: "must be at least 1",
        });
    }
    let adj = AdjustedGenotypes::new(geno, model)?;
    let cols: Vec<usize> = (0..geno.n_variants()).collect();
    Ok(adj.band(&cols, bandwidth))
}

/// Score vector and banded covariance over the non-degenerate variants.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub u: Vec<f64>,
    pub cov: BandedMatrix,
    /// Column in the source [`GenotypeMatrix`] of each retained variant.
    pub variant_index: Vec<usize>,
    pub positions: Vec<u64>,
    /// Chromosome blocks over the retained variants.
    pub segments: Vec<Segment>,
}

impl ScoreSet {
    /// Computes scores and the covariance band, dropping variants whose
    /// projected variance is zero (monomorphic or collinear with covariates).
    pub fn compute(geno: &GenotypeMatrix, model: &NullModel, bandwidth: usize) -> Result<Self> {
        if bandwidth < 1 {
            return Err(Error::InvalidBandwidth {
                bandwidth,
                reason: "must be at least 1",
            });
        }
        let adj = AdjustedGenotypes::new(geno, model)?;
        let keep = retained_columns(&adj);
        if keep.is_empty() {
            return Err(Error::NoVariants);
        }
        let all_u = compute_scores(geno, model)?;
        let cov = adj.band(&keep, bandwidth);
        Ok(Self::from_parts_unchecked(geno, &keep, &all_u, cov))
    }

    fn from_parts_unchecked(
        geno: &GenotypeMatrix,
        keep: &[usize],
        all_u: &[f64],
        cov: BandedMatrix,
    ) -> Self {
        let variants = geno.variants();
        let mut segments: Vec<Segment> = Vec::new();
        for (a, &j) in keep.iter().enumerate() {
            match segments.last_mut() {
                Some(s) if s.chrom == variants[j].chrom => s.range.end = a + 1,
                _ => segments.push(Segment {
                    chrom: variants[j].chrom.clone(),
                    range: a..a + 1,
                }),
            }
        }
        Self {
            u: keep.iter().map(|&j| all_u[j]).collect(),
            cov,
            variant_index: keep.to_vec(),
            positions: keep.iter().map(|&j| variants[j].pos).collect(),
            segments,
        }
    }

    /// Assembles a score set from precomputed parts (e.g. a cache file).
    pub fn from_parts(
        u: Vec<f64>,
        cov: BandedMatrix,
        variant_index: Vec<usize>,
        positions: Vec<u64>,
        segments: Vec<Segment>,
    ) -> Result<Self> {
        let p = u.len();
        for (what, len) in [
            ("covariance dimension", cov.dim()),
            ("variant index length", variant_index.len()),
            ("positions length", positions.len()),
        ] {
            if len != p {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: p,
                    found: len,
                });
            }
        }
        let mut next = 0;
        for s in &segments {
            if s.range.start != next || s.range.end <= s.range.start {
                return Err(Error::InvalidConfig("segments must tile the variants".into()));
            }
            next = s.range.end;
        }
        if next != p {
            return Err(Error::InvalidConfig("segments must tile the variants".into()));
        }
        if p == 0 {
            return Err(Error::NoVariants);
        }
        Ok(Self {
            u,
            cov,
            variant_index,
            positions,
            segments,
        })
    }

    /// Single-chromosome score set with identity index mapping (tests, simulations).
    pub fn from_scores(u: Vec<f64>, cov: BandedMatrix) -> Result<Self> {
        let p = u.len();
        let segments = alloc::vec![Segment {
            chrom: "1".into(),
            range: 0..p,
        }];
        Self::from_parts(u, cov, (0..p).collect(), (1..=p as u64).collect(), segments)
    }

    pub fn n_variants(&self) -> usize {
        self.u.len()
    }

    /// Segment containing variant `i`.
    pub fn segment_of(&self, i: usize) -> &Segment {
        let k = self.segments.partition_point(|s| s.range.end <= i);
        &self.segments[k]
    }
}

pub(crate) fn retained_columns(adj: &AdjustedGenotypes<'_>) -> Vec<usize> {
    (0..adj.geno.n_variants())
        .filter(|&j| {
            let (raw, proj) = adj.diag_parts(j);
            raw > 0.0 && proj > DEGENERATE_REL * raw
        })
        .collect()
}
