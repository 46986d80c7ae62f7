//! Synthetic genotypes with local LD, planted signal regions and phenotypes.
//!
//! Haplotypes come from a Gaussian copula: within each block of `block_len`
//! variants a latent AR(1) series with lag-1 correlation `ld_rho` is
//! thresholded at the upper `f_j` quantile, so allele `j` has frequency `f_j`.
//! Individuals are pairs of haplotypes drawn from a fixed pool.

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use qscan_core::genotype::GenotypeBuilder;
use qscan_core::{CovariateMatrix, Family, GenotypeMatrix, Interval, PhenotypeVector, VariantInfo};

use crate::error::{QscanError, Result};

/// Independent generator `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A seed for sub-task `stream` derived from `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdGenotypeModel {
    pub n_haplotypes: usize,
    /// lower end of the log-uniform allele-frequency law; `None` means `0.5 / n`
    pub maf_min: Option<f64>,
    pub maf_max: f64,
    pub ld_rho: f64,
    pub block_len: usize,
    pub seed: u64,
}

impl Default for LdGenotypeModel {
    fn default() -> Self {
        Self {
            n_haplotypes: 20_000,
            maf_min: None,
            maf_max: 0.05,
            ld_rho: 0.5,
            block_len: 100,
            seed: 1,
        }
    }
}

impl LdGenotypeModel {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.ld_rho) {
            return Err(QscanError::Config(format!("ld_rho must lie in [0, 1), got {}", self.ld_rho)));
        }
        if self.block_len == 0 {
            return Err(QscanError::Config("block_len must be at least 1".into()));
        }
        if !(self.maf_max > 0.0 && self.maf_max <= 0.5) {
            return Err(QscanError::Config(format!("maf_max must lie in (0, 0.5], got {}", self.maf_max)));
        }
        Ok(())
    }
}

/// Fixed population of haplotypes, stored as the carriers of each allele.
#[derive(Debug, Clone)]
pub struct HaplotypePool {
    n_haplotypes: usize,
    carriers: Vec<Vec<u32>>,
    freqs: Vec<f64>,
    variants: Vec<VariantInfo>,
}

/// Spacing of simulated variant positions in base pairs.
pub const POSITION_STEP: u64 = 50;

impl HaplotypePool {
    /// Draws `p` variants. Allele frequencies follow the log-uniform law on
    /// `[maf_min, maf_max]` with `maf_min` defaulting to `0.5 / n_samples`.
    pub fn generate(model: &LdGenotypeModel, p: usize, n_samples: usize) -> Result<Self> {
        model.validate()?;
        if p == 0 || n_samples == 0 || model.n_haplotypes == 0 {
            return Err(QscanError::Config("pool needs p, n and n_haplotypes >= 1".into()));
        }
        let lo = model.maf_min.unwrap_or(0.5 / n_samples as f64);
        if !(lo > 0.0 && lo <= model.maf_max) {
            return Err(QscanError::Config(format!("maf_min {lo} must lie in (0, maf_max]")));
        }
        let mut frng = stream_rng(model.seed, u64::MAX);
        let (llo, lhi) = (lo.ln(), model.maf_max.ln());
        let freqs: Vec<f64> = (0..p)
            .map(|_| if llo == lhi { lo } else { frng.random_range(llo..lhi).exp() })
            .collect();
        let std_normal = Normal::standard();
        let cut: Vec<f64> = freqs.iter().map(|&f| std_normal.inverse_cdf(1.0 - f)).collect();
        let rho = model.ld_rho;
        let innov = (1.0 - rho * rho).sqrt();
        let mut carriers: Vec<Vec<u32>> = vec![Vec::new(); p];
        for h in 0..model.n_haplotypes {
            let mut rng = stream_rng(model.seed, h as u64);
            let mut x = 0.0;
            for j in 0..p {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = if j % model.block_len == 0 { z } else { rho * x + innov * z };
                if x > cut[j] {
                    carriers[j].push(h as u32);
                }
            }
        }
        let variants = (0..p)
            .map(|j| VariantInfo {
                chrom: "1".to_string(),
                pos: 1 + POSITION_STEP * j as u64,
                id: format!("sv{}", j + 1),
            })
            .collect();
        Ok(Self {
            n_haplotypes: model.n_haplotypes,
            carriers,
            freqs,
            variants,
        })
    }

    pub fn n_haplotypes(&self) -> usize {
        self.n_haplotypes
    }

    pub fn n_variants(&self) -> usize {
        self.carriers.len()
    }

    /// Target allele frequencies of the generating law.
    pub fn target_frequencies(&self) -> &[f64] {
        &self.freqs
    }

    /// Haplotypes carrying the minor allele of variant `j`, ascending.
    pub fn carriers(&self, j: usize) -> &[u32] {
        &self.carriers[j]
    }

    /// Allele frequency of variant `j` in the pool.
    pub fn pool_frequency(&self, j: usize) -> f64 {
        self.carriers[j].len() as f64 / self.n_haplotypes as f64
    }

    /// `n` individuals built from `2n` distinct haplotypes.
    pub fn sample_individuals<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<(u32, u32)>> {
        if 2 * n > self.n_haplotypes {
            return Err(QscanError::Config(format!(
                "{n} individuals need {} haplotypes, the pool has {}",
                2 * n,
                self.n_haplotypes
            )));
        }
        let picks = index::sample(rng, self.n_haplotypes, 2 * n);
        let picks: Vec<u32> = picks.iter().map(|h| h as u32).collect();
        Ok(picks.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }

    /// `n` individuals whose haplotypes are drawn with replacement.
    pub fn sample_population<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(u32, u32)> {
        let h = self.n_haplotypes as u32;
        (0..n).map(|_| (rng.random_range(0..h), rng.random_range(0..h))).collect()
    }

    /// Individuals owning each haplotype, as a CSR map.
    fn owners(&self, pairs: &[(u32, u32)]) -> (Vec<usize>, Vec<u32>) {
        let mut start = vec![0usize; self.n_haplotypes + 1];
        for &(a, b) in pairs {
            start[a as usize + 1] += 1;
            start[b as usize + 1] += 1;
        }
        for h in 0..self.n_haplotypes {
            start[h + 1] += start[h];
        }
        let mut fill = start.clone();
        let mut who = vec![0u32; 2 * pairs.len()];
        for (i, &(a, b)) in pairs.iter().enumerate() {
            for h in [a, b] {
                who[fill[h as usize]] = i as u32;
                fill[h as usize] += 1;
            }
        }
        (start, who)
    }

    /// Dosages of the listed variants for the given individuals, one sparse
    /// `(individual, dosage)` list per variant.
    fn sparse_columns(&self, pairs: &[(u32, u32)], variants: &[usize]) -> Vec<Vec<(u32, f64)>> {
        let (start, who) = self.owners(pairs);
        let mut hits: Vec<u32> = Vec::new();
        variants
            .iter()
            .map(|&j| {
                hits.clear();
                for &h in &self.carriers[j] {
                    hits.extend_from_slice(&who[start[h as usize]..start[h as usize + 1]]);
                }
                hits.sort_unstable();
                let mut col: Vec<(u32, f64)> = Vec::with_capacity(hits.len());
                for &i in &hits {
                    match col.last_mut() {
                        Some((k, d)) if *k == i => *d += 1.0,
                        _ => col.push((i, 1.0)),
                    }
                }
                col
            })
            .collect()
    }

    /// Genotype matrix of the given individuals over all pool variants.
    pub fn genotypes_of(&self, pairs: &[(u32, u32)]) -> Result<GenotypeMatrix> {
        let all: Vec<usize> = (0..self.n_variants()).collect();
        let cols = self.sparse_columns(pairs, &all);
        let nnz = cols.iter().map(Vec::len).sum();
        let mut b = GenotypeBuilder::with_capacity(pairs.len(), self.n_variants(), nnz);
        for (info, col) in self.variants.iter().zip(&cols) {
            b.push_sparse(info.clone(), col)?;
        }
        Ok(b.finish()?)
    }

    /// Dense dosage columns of selected variants.
    pub fn dosage_columns(&self, pairs: &[(u32, u32)], variants: &[usize]) -> Vec<Vec<f64>> {
        self.sparse_columns(pairs, variants)
            .into_iter()
            .map(|col| {
                let mut d = vec![0.0; pairs.len()];
                for (i, v) in col {
                    d[i as usize] = v;
                }
                d
            })
            .collect()
    }

    /// `n` unrelated individuals drawn with random stream `stream`.
    pub fn sample_genotypes(&self, n: usize, seed: u64, stream: u64) -> Result<GenotypeMatrix> {
        let mut rng = stream_rng(seed, stream);
        let pairs = self.sample_individuals(n, &mut rng)?;
        self.genotypes_of(&pairs)
    }
}

/// One-shot genotype simulation: a fresh pool of `max(n_haplotypes, 2n)`
/// haplotypes and `n` individuals drawn from it.
pub fn simulate_genotypes(n: usize, p: usize, model: &LdGenotypeModel) -> Result<GenotypeMatrix> {
    let mut m = *model;
    m.n_haplotypes = m.n_haplotypes.max(2 * n);
    let pool = HaplotypePool::generate(&m, p, n)?;
    pool.sample_genotypes(n, m.seed, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSpec {
    pub n_regions: usize,
    /// inclusive range of region lengths in variants
    pub region_len: (usize, usize),
    /// sparsity index: a region of `p0` variants has `round(p0^xi)` causal ones
    pub sparsity_xi: f64,
    /// `|β| = |c · log10(MAF)|`
    pub effect_c: f64,
    /// probability that an effect is positive
    pub sign_mix: f64,
    /// minimum number of variants strictly between two regions
    pub min_gap: usize,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            n_regions: 2,
            region_len: (50, 80),
            sparsity_xi: 0.5,
            effect_c: 0.30,
            sign_mix: 0.5,
            min_gap: 201,
        }
    }
}

/// Planted regions (ascending), causal variant indices and effects per region.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignals {
    pub regions: Vec<Interval>,
    pub causal: Vec<Vec<usize>>,
    pub beta: Vec<Vec<f64>>,
}

impl PlantedSignals {
    /// All causal indices and effects in one list.
    pub fn flat(&self) -> (Vec<usize>, Vec<f64>) {
        let idx = self.causal.iter().flatten().copied().collect();
        let beta = self.beta.iter().flatten().copied().collect();
        (idx, beta)
    }

    /// Multiplies every effect by `k`.
    pub fn scale(&mut self, k: f64) {
        for b in self.beta.iter_mut().flatten() {
            *b *= k;
        }
    }
}

/// Number of causal variants in a region of `p0` variants.
pub fn causal_count(p0: usize, xi: f64) -> usize {
    ((p0 as f64).powf(xi).round() as usize).clamp(1, p0)
}

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Places regions on variants with minor allele frequencies `mafs`.
pub fn plant_signals_by_maf(mafs: &[f64], spec: &SignalSpec, seed: u64) -> Result<PlantedSignals> {
    let p = mafs.len();
    let (lmin, lmax) = spec.region_len;
    if lmin == 0 || lmin > lmax || !(0.0..=1.0).contains(&spec.sign_mix) || spec.sparsity_xi < 0.0 {
        return Err(QscanError::Config(format!("invalid signal spec {spec:?}")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut regions: Vec<Interval> = Vec::new();
    let mut placed = false;
    for _ in 0..PLACEMENT_ATTEMPTS {
        regions.clear();
        let mut ok = true;
        for _ in 0..spec.n_regions {
            let len = rng.random_range(lmin..=lmax);
            if len > p {
                ok = false;
                break;
            }
            let start = rng.random_range(0..=p - len);
            let cand = Interval::new(start, start + len - 1);
            let clear = regions.iter().all(|r| {
                if r.end < cand.start {
                    cand.start - r.end - 1 >= spec.min_gap
                } else if cand.end < r.start {
                    r.start - cand.end - 1 >= spec.min_gap
                } else {
                    false
                }
            });
            if !clear {
                ok = false;
                break;
            }
            regions.push(cand);
        }
        if ok {
            placed = true;
            break;
        }
    }
    if !placed {
        return Err(QscanError::Placement(format!(
            "could not place {} regions of {lmin}-{lmax} variants with gap {} among {p} variants",
            spec.n_regions, spec.min_gap
        )));
    }
    regions.sort();
    let mut causal = Vec::new();
    let mut beta = Vec::new();
    for r in &regions {
        let p0 = r.len();
        let s = causal_count(p0, spec.sparsity_xi);
        let mut idx: Vec<usize> = index::sample(&mut rng, p0, s).iter().map(|k| r.start + k).collect();
        idx.sort_unstable();
        let b: Vec<f64> = idx
            .iter()
            .map(|&j| {
                let mag = if mafs[j] > 0.0 { (spec.effect_c * mafs[j].log10()).abs() } else { 0.0 };
                if rng.random_bool(spec.sign_mix) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        causal.push(idx);
        beta.push(b);
    }
    Ok(PlantedSignals { regions, causal, beta })
}

pub fn plant_signals(geno: &GenotypeMatrix, spec: &SignalSpec, seed: u64) -> Result<PlantedSignals> {
    let mafs: Vec<f64> = (0..geno.n_variants()).map(|j| geno.maf(j)).collect();
    plant_signals_by_maf(&mafs, spec, seed)
}

/// `X1 ~ N(0, 1)` and `X2 ~ Bernoulli(0.5)` for `n` individuals.
fn draw_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let x1 = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let x2 = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
    (x1, x2)
}

fn covariate_matrix(x1: Vec<f64>, x2: Vec<f64>) -> Result<CovariateMatrix> {
    let n = x1.len();
    Ok(CovariateMatrix::new(n, vec![x1, x2], vec!["X1".into(), "X2".into()])?)
}

/// `G_c β` for every sample.
pub fn genetic_effect(geno: &GenotypeMatrix, causal: &[usize], beta: &[f64]) -> Result<Vec<f64>> {
    if causal.len() != beta.len() {
        return Err(QscanError::Config("causal indices and effects differ in length".into()));
    }
    let mut g = vec![0.0; geno.n_samples()];
    for (&j, &b) in causal.iter().zip(beta) {
        if j >= geno.n_variants() {
            return Err(QscanError::Config(format!("causal index {j} out of range")));
        }
        let (rows, vals) = geno.column(j);
        for (&i, &d) in rows.iter().zip(vals) {
            g[i as usize] += d * b;
        }
    }
    Ok(g)
}

/// Continuous phenotype with the noise and covariates kept separate, so the
/// genetic part can be rescaled without redrawing.
#[derive(Debug, Clone)]
pub struct ContinuousDraw {
    /// `0.5 X1 + 0.5 X2 + ε`
    pub baseline: Vec<f64>,
    pub covariates: CovariateMatrix,
}

impl ContinuousDraw {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0);
        let (x1, x2) = draw_covariates(n, &mut rng);
        let baseline = (0..n)
            .map(|i| 0.5 * x1[i] + 0.5 * x2[i] + Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        Ok(Self {
            baseline,
            covariates: covariate_matrix(x1, x2)?,
        })
    }

    /// Same covariates, fresh noise drawn from `seed`.
    pub fn redraw_noise(&self, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 1);
        let (x1, x2) = (self.covariates.column(1), self.covariates.column(2));
        let baseline = x1
            .iter()
            .zip(x2)
            .map(|(a, b)| 0.5 * a + 0.5 * b + Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        Self {
            baseline,
            covariates: self.covariates.clone(),
        }
    }

    /// `baseline + effect` as a Gaussian phenotype.
    pub fn phenotype(&self, effect: Option<&[f64]>) -> Result<PhenotypeVector> {
        let y = match effect {
            Some(e) => self.baseline.iter().zip(e).map(|(a, b)| a + b).collect(),
            None => self.baseline.clone(),
        };
        Ok(PhenotypeVector::new(y, Family::Gaussian)?)
    }
}

/// `Y = 0.5 X1 + 0.5 X2 + G_c β + ε` with `ε ~ N(0, 1)`; covariates are
/// `(intercept, X1, X2)`.
pub fn simulate_continuous(
    geno: &GenotypeMatrix,
    causal: &[usize],
    beta: &[f64],
    seed: u64,
) -> Result<(PhenotypeVector, CovariateMatrix)> {
    let draw = ContinuousDraw::new(geno.n_samples(), seed)?;
    let effect = genetic_effect(geno, causal, beta)?;
    Ok((draw.phenotype(Some(&effect))?, draw.covariates))
}

/// Intercept of the case model; `expit(-4.6) ≈ 0.01`.
pub const CASE_INTERCEPT: f64 = -4.6;
/// Source population size per requested case.
pub const POPULATION_MULTIPLIER: usize = 120;

#[derive(Debug, Clone)]
pub struct CaseControlSample {
    pub geno: GenotypeMatrix,
    pub phenotype: PhenotypeVector,
    pub covariates: CovariateMatrix,
}

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Case-control sample from a source population drawn from `pool`:
/// `logit P(Y = 1) = -4.6 + 0.5 X1 + 0.5 X2 + G_c β`, then exactly
/// `n_cases` cases and `n_controls` controls are drawn at random. `causal`
/// indexes pool variants. The population holds `120 · n_cases` individuals;
/// one fresh population is tried if it has too few cases or controls.
pub fn simulate_binary(
    pool: &HaplotypePool,
    causal: &[usize],
    beta: &[f64],
    n_cases: usize,
    n_controls: usize,
    seed: u64,
) -> Result<CaseControlSample> {
    if causal.len() != beta.len() {
        return Err(QscanError::Config("causal indices and effects differ in length".into()));
    }
    if n_cases == 0 || n_controls == 0 {
        return Err(QscanError::Config("need at least one case and one control".into()));
    }
    let big_n = POPULATION_MULTIPLIER * n_cases;
    for attempt in 0..2 {
        let mut rng = stream_rng(seed, attempt);
        let pairs = pool.sample_population(big_n, &mut rng);
        let (x1, x2) = draw_covariates(big_n, &mut rng);
        let mut eta: Vec<f64> = (0..big_n).map(|i| CASE_INTERCEPT + 0.5 * x1[i] + 0.5 * x2[i]).collect();
        for (col, &b) in pool.dosage_columns(&pairs, causal).iter().zip(beta) {
            for (e, d) in eta.iter_mut().zip(col) {
                *e += d * b;
            }
        }
        let status: Vec<bool> = eta.iter().map(|&e| rng.random_bool(expit(e))).collect();
        let cases: Vec<usize> = (0..big_n).filter(|&i| status[i]).collect();
        let controls: Vec<usize> = (0..big_n).filter(|&i| !status[i]).collect();
        if cases.len() < n_cases || controls.len() < n_controls {
            continue;
        }
        let mut chosen: Vec<usize> = index::sample(&mut rng, cases.len(), n_cases)
            .iter()
            .map(|k| cases[k])
            .chain(index::sample(&mut rng, controls.len(), n_controls).iter().map(|k| controls[k]))
            .collect();
        chosen.sort_unstable();
        let sel_pairs: Vec<(u32, u32)> = chosen.iter().map(|&i| pairs[i]).collect();
        let geno = pool.genotypes_of(&sel_pairs)?;
        let y = chosen.iter().map(|&i| f64::from(u8::from(status[i]))).collect();
        let covariates = covariate_matrix(
            chosen.iter().map(|&i| x1[i]).collect(),
            chosen.iter().map(|&i| x2[i]).collect(),
        )?;
        return Ok(CaseControlSample {
            geno,
            phenotype: PhenotypeVector::new(y, Family::Binomial)?,
            covariates,
        });
    }
    Err(QscanError::Sampling(format!(
        "population of {big_n} produced fewer than {n_cases} cases or {n_controls} controls twice"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Binomial, DiscreteCDF};

    fn small_model(rho: f64, block: usize, seed: u64) -> LdGenotypeModel {
        LdGenotypeModel {
            n_haplotypes: 4000,
            maf_min: Some(0.02),
            maf_max: 0.05,
            ld_rho: rho,
            block_len: block,
            seed,
        }
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn dosages_and_frequencies_are_in_range() {
        let g = simulate_genotypes(300, 500, &LdGenotypeModel { n_haplotypes: 2000, ..Default::default() }).unwrap();
        assert_eq!((g.n_samples(), g.n_variants()), (300, 500));
        for j in 0..g.n_variants() {
            for d in g.dense_column(j) {
                assert!(d == 0.0 || d == 1.0 || d == 2.0);
            }
        }
        let pool = HaplotypePool::generate(&LdGenotypeModel::default(), 200, 1000).unwrap();
        assert!(pool.target_frequencies().iter().all(|&f| (0.0005..=0.05).contains(&f)));
    }

    #[test]
    fn deterministic_given_seed() {
        let m = small_model(0.5, 10, 3);
        let a = simulate_genotypes(100, 50, &m).unwrap();
        let b = simulate_genotypes(100, 50, &m).unwrap();
        assert_eq!(a, b);
        let c = simulate_genotypes(100, 50, &LdGenotypeModel { seed: 4, ..m }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn no_ld_gives_uncorrelated_neighbours() {
        let m = LdGenotypeModel { n_haplotypes: 2000, ..small_model(0.0, 100, 5) };
        let g = simulate_genotypes(1000, 10_000, &m).unwrap();
        let mut num = 0.0;
        let mut k = 0;
        let mut prev = g.dense_column(0);
        for j in 1..g.n_variants() {
            let cur = g.dense_column(j);
            let r = corr(&prev, &cur);
            if r.is_finite() {
                num += r;
                k += 1;
            }
            prev = cur;
        }
        let mean = num / k as f64;
        assert!(mean.abs() < 0.05, "mean lag-1 correlation {mean}");
    }

    /// `P(Z1 > a, Z2 > b)` for a standard bivariate normal with correlation
    /// `rho`, by Simpson integration of `φ(x) · P(Z2 > b | Z1 = x)`.
    fn orthant(a: f64, b: f64, rho: f64) -> f64 {
        let nrm = Normal::standard();
        let s = (1.0 - rho * rho).sqrt();
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * nrm.sf((b - rho * x) / s);
        let hi = 12.0;
        let m = 20_000;
        let h = (hi - a) / m as f64;
        let mut acc = f(a) + f(hi);
        for k in 1..m {
            acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn ld_matches_copula_oracle() {
        // the latent lag-1 correlation is rho; the induced allele correlation
        // is the bivariate-normal orthant value
        let rho = 0.5;
        let m = LdGenotypeModel { n_haplotypes: 40_000, maf_min: Some(0.04), ..small_model(rho, 50, 9) };
        let pool = HaplotypePool::generate(&m, 400, 1000).unwrap();
        let nrm = Normal::standard();
        let h = pool.n_haplotypes() as f64;
        let (mut emp, mut want) = (0.0, 0.0);
        let mut k = 0;
        for j in 1..pool.n_variants() {
            if j % m.block_len == 0 {
                continue;
            }
            let (fa, fb) = (pool.target_frequencies()[j - 1], pool.target_frequencies()[j]);
            let both = {
                let (a, b) = (pool.carriers(j - 1), pool.carriers(j));
                let mut n = 0;
                let (mut x, mut y) = (0, 0);
                while x < a.len() && y < b.len() {
                    match a[x].cmp(&b[y]) {
                        std::cmp::Ordering::Less => x += 1,
                        std::cmp::Ordering::Greater => y += 1,
                        std::cmp::Ordering::Equal => {
                            n += 1;
                            x += 1;
                            y += 1;
                        }
                    }
                }
                n as f64 / h
            };
            let (pa, pb) = (pool.pool_frequency(j - 1), pool.pool_frequency(j));
            emp += (both - pa * pb) / (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt();
            let p11 = orthant(nrm.inverse_cdf(1.0 - fa), nrm.inverse_cdf(1.0 - fb), rho);
            want += (p11 - fa * fb) / (fa * (1.0 - fa) * fb * (1.0 - fb)).sqrt();
            k += 1;
        }
        let (emp, want) = (emp / k as f64, want / k as f64);
        assert!((emp - want).abs() < 0.02, "empirical {emp} vs copula {want}");
        assert!(want > 0.1 && want < rho);
    }

    #[test]
    fn latent_series_has_lag_one_correlation_rho() {
        // the generator's latent recursion, checked directly
        let rho: f64 = 0.5;
        let innov = (1.0 - rho * rho).sqrt();
        let mut rng = stream_rng(1, 0);
        let mut x: f64 = StandardNormal.sample(&mut rng);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for _ in 0..200_000 {
            let y = rho * x + innov * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            sxy += x * y;
            sxx += x * x;
            x = y;
        }
        assert!((sxy / sxx - rho).abs() < 0.01);
    }

    #[test]
    fn causal_counts() {
        assert_eq!(causal_count(64, 1.0), 64);
        assert_eq!(causal_count(64, 2.0 / 3.0), 16);
        assert_eq!(causal_count(64, 0.5), 8);
    }

    #[test]
    fn planting_respects_gap_and_sparsity() {
        let mafs = vec![0.01; 5000];
        for seed in 0..50 {
            let s = plant_signals_by_maf(&mafs, &SignalSpec::default(), seed).unwrap();
            assert_eq!(s.regions.len(), 2);
            let (a, b) = (s.regions[0], s.regions[1]);
            assert!(b.start - a.end - 1 >= 201);
            for (r, c) in s.regions.iter().zip(&s.causal) {
                assert!((50..=80).contains(&r.len()));
                assert_eq!(c.len(), causal_count(r.len(), 0.5));
                assert!(c.iter().all(|&j| j >= r.start && j <= r.end));
            }
            for b in s.beta.iter().flatten() {
                assert!((b.abs() - 0.30 * 2.0).abs() < 1e-12);
            }
        }
        let spec = SignalSpec { sparsity_xi: 1.0, ..Default::default() };
        let s = plant_signals_by_maf(&mafs, &spec, 1).unwrap();
        assert_eq!(s.causal[0].len(), s.regions[0].len());
        assert!(matches!(plant_signals_by_maf(&mafs[..300], &SignalSpec::default(), 1), Err(QscanError::Placement(_))));
    }

    #[test]
    fn sign_mix_is_binomial() {
        let mafs = vec![0.01; 5000];
        let spec = SignalSpec { sparsity_xi: 1.0, ..Default::default() };
        let (mut pos, mut total) = (0u64, 0u64);
        for seed in 0..40 {
            let s = plant_signals_by_maf(&mafs, &spec, seed).unwrap();
            for b in s.beta.iter().flatten() {
                total += 1;
                pos += u64::from(*b > 0.0);
            }
        }
        let d = Binomial::new(0.5, total).unwrap();
        let lo = d.inverse_cdf(0.0005);
        let hi = d.inverse_cdf(0.9995);
        assert!(pos >= lo && pos <= hi, "{pos} of {total}");
    }

    #[test]
    fn null_continuous_model() {
        let g = simulate_genotypes(50, 10, &small_model(0.5, 5, 1)).unwrap();
        let (y, x) = simulate_continuous(&g, &[], &[], 7).unwrap();
        for i in 0..50 {
            let resid = y.values()[i] - 0.5 * x.get(i, 1) - 0.5 * x.get(i, 2);
            assert!(resid.abs() < 6.0);
        }
        assert!(x.column(2).iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(x.names(), ["intercept", "X1", "X2"]);
    }

    #[test]
    fn continuous_residual_variance_is_one() {
        let n = 100_000;
        let draw = ContinuousDraw::new(n, 3).unwrap();
        let x = &draw.covariates;
        let v: f64 = (0..n)
            .map(|i| {
                let e = draw.baseline[i] - 0.5 * x.get(i, 1) - 0.5 * x.get(i, 2);
                e * e
            })
            .sum::<f64>()
            / n as f64;
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn huge_effect_is_detected_by_its_marginal_test() {
        use qscan_core::{compute_scores, fit_null, ScoreSet};
        let m = LdGenotypeModel { n_haplotypes: 2000, maf_min: Some(0.03), ..small_model(0.5, 10, 2) };
        let pool = HaplotypePool::generate(&m, 20, 500).unwrap();
        let nrm = Normal::standard();
        let crit = nrm.inverse_cdf(1.0 - 0.5e-6);
        let mut hits = 0;
        for r in 0..100 {
            let g = pool.sample_genotypes(500, 11, r).unwrap();
            let (y, x) = simulate_continuous(&g, &[7], &[3.0], 100 + r).unwrap();
            let model = fit_null(&y, &x).unwrap();
            let u = compute_scores(&g, &model).unwrap();
            let s = ScoreSet::compute(&g, &model, 1).unwrap();
            let k = s.variant_index.iter().position(|&j| j == 7).unwrap();
            let z = u[7] / s.cov.get(k, k).sqrt();
            hits += u32::from(z.abs() > crit);
        }
        assert!(hits > 99, "{hits}");
    }

    #[test]
    fn case_probability_at_baseline() {
        assert!((expit(CASE_INTERCEPT) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn case_control_counts_are_exact() {
        let m = small_model(0.5, 20, 4);
        let pool = HaplotypePool::generate(&m, 60, 500).unwrap();
        let s = simulate_binary(&pool, &[], &[], 100, 100, 3).unwrap();
        assert_eq!(s.phenotype.len(), 200);
        assert_eq!(s.phenotype.values().iter().filter(|&&y| y == 1.0).count(), 100);
        assert_eq!(s.geno.n_samples(), 200);
        let again = simulate_binary(&pool, &[], &[], 100, 100, 3).unwrap();
        assert_eq!(again.geno, s.geno);
    }
}
