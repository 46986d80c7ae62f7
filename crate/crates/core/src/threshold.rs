//! Family-wise threshold calibration by Monte Carlo, plus the closed-form
//! upper bound and asymptotic rate of the null maximum.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::banded::BandedCholesky;
use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::null_model::NullModel;
use crate::scan::{Method, ScanConfig, ScanPlan, StatMaxima};
use crate::scores::{AdjustedGenotypes, ScoreSet};

const CHOLESKY_JITTER: f64 = 1e-8;

/// How null score vectors are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum McMode {
    /// `Ũ = G̃ᵀ Λ^{1/2} z / √n` with `z ~ N(0, I_n)`; covariance is exactly `Σ̂`.
    #[default]
    GenotypeProjection,
    /// `Ũ = L z` with `L Lᵀ` the banded `Σ̂`.
    BandedCholesky,
}

impl McMode {
    pub fn name(self) -> &'static str {
        match self {
            McMode::GenotypeProjection => "genotype-projection",
            McMode::BandedCholesky => "banded-cholesky",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub alpha: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub mode: McMode,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_reps: 2000,
            seed: 1,
            mode: McMode::GenotypeProjection,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidThreshold(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let need = min_reps(self.alpha);
        if self.n_reps < need {
            return Err(Error::InvalidThreshold(format!(
                "alpha = {} needs at least {need} Monte Carlo replicates, got {}",
                self.alpha, self.n_reps
            )));
        }
        Ok(())
    }
}

fn min_reps(alpha: f64) -> usize {
    libm::ceil(1.0 / alpha - 1e-9) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub h: f64,
    pub alpha: f64,
    pub method: Method,
    pub mode: McMode,
    /// Simulated null maxima, ascending.
    pub qmax_samples: Vec<f64>,
    /// Closed-form upper bound on the null maximum (Q only, else NaN).
    pub bound_upper: f64,
    /// `√(2 ln p)`
    pub rate: f64,
    pub warnings: Vec<String>,
}

/// Source of null pseudo-score vectors sharing the covariance of a [`ScoreSet`].
#[derive(Debug, Clone)]
pub enum PseudoScoreSource<'a> {
    Projection {
        adj: AdjustedGenotypes<'a>,
        cols: Vec<usize>,
    },
    Cholesky(BandedCholesky),
}

impl<'a> PseudoScoreSource<'a> {
    /// Builds the source for `mode`. The Cholesky route adds a small diagonal
    /// jitter if the band is not positive definite and falls back to genotype
    /// projection (when genotypes are given) if that still fails. Warnings
    /// describe either event.
    pub fn new(
        mode: McMode,
        scores: &ScoreSet,
        data: Option<(&'a GenotypeMatrix, &'a NullModel)>,
    ) -> Result<(Self, Vec<String>)> {
        let mut warnings = Vec::new();
        match mode {
            McMode::GenotypeProjection => Ok((Self::projection(scores, data)?, warnings)),
            McMode::BandedCholesky => match BandedCholesky::factor_with_jitter(&scores.cov, CHOLESKY_JITTER) {
                Ok(l) => {
                    if l.jitter() > 0.0 {
                        warnings.push(format!(
                            "banded covariance not positive definite; added {:.3e} to the diagonal",
                            l.jitter()
                        ));
                    }
                    Ok((Self::Cholesky(l), warnings))
                }
                Err(e) => match data {
                    Some(_) => {
                        warnings.push(format!(
                            "banded Cholesky failed ({e}); using genotype projection instead"
                        ));
                        Ok((Self::projection(scores, data)?, warnings))
                    }
                    None => Err(e),
                },
            },
        }
    }

    fn projection(
        scores: &ScoreSet,
        data: Option<(&'a GenotypeMatrix, &'a NullModel)>,
    ) -> Result<Self> {
        let (geno, model) = data.ok_or_else(|| {
            Error::InvalidConfig("genotype-projection Monte Carlo needs genotypes and a null model".into())
        })?;
        if let Some(&bad) = scores.variant_index.iter().find(|&&j| j >= geno.n_variants()) {
            return Err(Error::DimensionMismatch {
                what: "score variant index",
                expected: geno.n_variants(),
                found: bad,
            });
        }
        Ok(Self::Projection {
            adj: AdjustedGenotypes::new(geno, model)?,
            cols: scores.variant_index.clone(),
        })
    }

    pub fn mode(&self) -> McMode {
        match self {
            Self::Projection { .. } => McMode::GenotypeProjection,
            Self::Cholesky(_) => McMode::BandedCholesky,
        }
    }

    pub fn n_variants(&self) -> usize {
        match self {
            Self::Projection { cols, .. } => cols.len(),
            Self::Cholesky(l) => l.dim(),
        }
    }

    pub fn scratch(&self) -> McScratch {
        let p = self.n_variants();
        match self {
            Self::Projection { adj, .. } => {
                let n = adj.genotypes().n_samples();
                let q = adj.model().covariates.n_covariates();
                McScratch {
                    z: vec![0.0; n],
                    xw: vec![0.0; q],
                    u: vec![0.0; p],
                    prefix: Vec::new(),
                }
            }
            Self::Cholesky(_) => McScratch {
                z: vec![0.0; p],
                xw: Vec::new(),
                u: vec![0.0; p],
                prefix: Vec::new(),
            },
        }
    }

    /// Draws one pseudo-score vector into `s.u`.
    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R, s: &mut McScratch) {
        for z in s.z.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        match self {
            Self::Projection { adj, cols } => {
                let model = adj.model();
                for (z, &w) in s.z.iter_mut().zip(&model.weights) {
                    *z *= libm::sqrt(w);
                }
                model.covariates.xt_weighted(None, &s.z, &mut s.xw);
                adj.pseudo_scores(cols, &s.z, &s.xw, &mut s.u);
            }
            Self::Cholesky(l) => l.mul_into(&s.z, &mut s.u),
        }
    }
}

/// Reusable buffers for one worker.
#[derive(Debug, Clone, Default)]
pub struct McScratch {
    z: Vec<f64>,
    xw: Vec<f64>,
    /// last drawn pseudo-score vector
    pub u: Vec<f64>,
    prefix: Vec<f64>,
}

/// Independent generator for replicate `r`. Replicate streams do not depend
/// on how replicates are distributed over threads.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// A pseudo-score source paired with precomputed window coefficients.
#[derive(Debug, Clone)]
pub struct McEngine<'a> {
    pub source: PseudoScoreSource<'a>,
    pub plan: ScanPlan,
    pub seed: u64,
}

impl<'a> McEngine<'a> {
    pub fn new(source: PseudoScoreSource<'a>, plan: ScanPlan, seed: u64) -> Result<Self> {
        if source.n_variants() != plan.n_variants() {
            return Err(Error::DimensionMismatch {
                what: "pseudo-score source variants",
                expected: plan.n_variants(),
                found: source.n_variants(),
            });
        }
        Ok(Self { source, plan, seed })
    }

    pub fn scratch(&self) -> McScratch {
        self.source.scratch()
    }

    /// Null maxima of replicate `r`.
    pub fn replicate(&self, r: u64, s: &mut McScratch) -> StatMaxima {
        let mut rng = replicate_rng(self.seed, r);
        self.source.draw(&mut rng, s);
        let McScratch { u, prefix, .. } = s;
        self.plan.maxima(u, prefix)
    }
}

/// 1-based rank of the threshold among `n` ascending draws: `⌈n(1 − α)⌉`.
pub fn threshold_rank(n: usize, alpha: f64) -> usize {
    let k = libm::ceil(n as f64 * (1.0 - alpha) - 1e-9) as usize;
    k.clamp(1, n)
}

/// Empirical `(1 − α)` quantile of the null maxima as the `⌈N(1 − α)⌉`-th
/// order statistic. Sorts `samples` in place.
pub fn order_statistic(samples: &mut [f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidThreshold("no Monte Carlo samples".into()));
    }
    samples.sort_unstable_by(f64::total_cmp);
    Ok(samples[threshold_rank(samples.len(), alpha) - 1])
}

/// Assembles a [`ThresholdResult`] from simulated null maxima.
pub fn threshold_from_maxima(
    mut samples: Vec<f64>,
    cfg: &ThresholdConfig,
    scan_cfg: &ScanConfig,
    p: usize,
    mut warnings: Vec<String>,
    mode: McMode,
) -> Result<ThresholdResult> {
    let h = order_statistic(&mut samples, cfg.alpha)?;
    if !h.is_finite() {
        return Err(Error::NoValidWindow);
    }
    let bound_upper = match scan_cfg.method {
        Method::QScan => theoretical_bound(p, scan_cfg.l_min, scan_cfg.l_max, cfg.alpha).unwrap_or_else(|e| {
            warnings.push(format!("bound unavailable: {e}"));
            f64::NAN
        }),
        Method::MScan => f64::NAN,
    };
    let rate = asymptotic_rate(p).unwrap_or(f64::NAN);
    Ok(ThresholdResult {
        h,
        alpha: cfg.alpha,
        method: scan_cfg.method,
        mode,
        qmax_samples: samples,
        bound_upper,
        rate,
        warnings,
    })
}

/// Single-threaded Monte Carlo threshold for `scan_cfg.method`. `data` is
/// required for genotype projection and used as a fallback for Cholesky.
pub fn mc_threshold(
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
        return Err(Error::NoValidWindow);
    }
    let engine = McEngine::new(source, plan, cfg.seed)?;
    let mut s = engine.scratch();
    let samples: Vec<f64> = (0..cfg.n_reps as u64)
        .map(|r| engine.replicate(r, &mut s).get(scan_cfg.method))
        .collect();
    threshold_from_maxima(samples, cfg, scan_cfg, scores.n_variants(), warnings, mode)
}

/// `√(2γ) + √2·γ / (L_min ln p)^{1/4}` with `γ = ln(p(L_max − L_min)) − ln α`.
pub fn theoretical_bound(p: usize, l_min: usize, l_max: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidThreshold(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if l_min < 1 || l_max <= l_min || p <= l_max {
        return Err(Error::InvalidConfig(format!(
            "bound needs p > l_max > l_min >= 1, got p = {p}, l_min = {l_min}, l_max = {l_max}"
        )));
    }
    let lnp = libm::log(p as f64);
    let gamma = libm::log(p as f64 * (l_max - l_min) as f64) - libm::log(alpha);
    Ok(libm::sqrt(2.0 * gamma) + core::f64::consts::SQRT_2 * gamma / libm::pow(l_min as f64 * lnp, 0.25))
}

/// `√(2 ln p)`, the growth rate of the null maximum.
pub fn asymptotic_rate(p: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidConfig(format!("rate needs p >= 2, got {p}")));
    }
    Ok(libm::sqrt(2.0 * libm::log(p as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banded::BandedMatrix;
    use crate::genotype::VariantInfo;
    use crate::null_model::{fit_null, CovariateMatrix, Family, PhenotypeVector};
    use crate::scan::scan_max;
    use alloc::string::ToString;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn bound_reference_values() {
        let cases = [
            (1_000_000, 40, 200, 0.05, 12.9999578183208413),
            (5000, 40, 200, 0.05, 11.2202537458254436),
            (1_000_000, 40, 200, 0.01, 13.7083462249313251),
        ];
        for (p, a, b, alpha, want) in cases {
            let got = theoretical_bound(p, a, b, alpha).unwrap();
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rate_at_e_squared() {
        // p = 7 and 8 bracket e² ≈ 7.389; interpolate in ln p
        let r = |p: f64| libm::sqrt(2.0 * libm::log(p));
        assert_eq!(asymptotic_rate(7).unwrap(), r(7.0));
        assert!((r(core::f64::consts::E * core::f64::consts::E) - 2.0).abs() < 1e-15);
        assert!(asymptotic_rate(1).is_err());
    }

    #[test]
    fn bound_rejects_bad_input() {
        assert!(theoretical_bound(100, 40, 40, 0.05).is_err());
        assert!(theoretical_bound(100, 40, 200, 0.05).is_err());
        assert!(theoretical_bound(1000, 40, 200, 0.0).is_err());
        assert!(theoretical_bound(1000, 40, 200, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn bound_monotone(p in 300usize..1_000_000, lmin in 2usize..50, extra in 1usize..200, a in 0.001f64..0.5) {
            let lmax = lmin + extra;
            prop_assume!(p > lmax + 1);
            let b = theoretical_bound(p, lmin, lmax, a).unwrap();
            prop_assert!(theoretical_bound(p, lmin, lmax, a * 0.9).unwrap() > b);
            prop_assert!(theoretical_bound(p + 1000, lmin, lmax, a).unwrap() > b);
            let r = asymptotic_rate(p).unwrap();
            prop_assert!(asymptotic_rate(p * 2).unwrap() > r);
        }

        #[test]
        fn rank_is_ceiling(n in 1usize..5000, a in 0.001f64..0.999) {
            let k = threshold_rank(n, a);
            let exact = n as f64 * (1.0 - a);
            prop_assert!(k as f64 >= exact - 1e-6);
            prop_assert!((k as f64) < exact + 1.0 || k == 1);
        }
    }

    #[test]
    fn order_statistic_picks_1900th_of_2000() {
        let mut v: Vec<f64> = (1..=2000).rev().map(|i| i as f64).collect();
        assert_eq!(order_statistic(&mut v, 0.05).unwrap(), 1900.0);
        let mut v: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        assert_eq!(order_statistic(&mut v, 0.05).unwrap(), 19.0);
        assert_eq!(threshold_rank(1000, 0.05), 950);
        assert_eq!(threshold_rank(100, 0.01), 99);
    }

    #[test]
    fn config_validation() {
        let mut c = ThresholdConfig::default();
        c.validate().unwrap();
        c.n_reps = 19;
        assert!(matches!(c.validate(), Err(Error::InvalidThreshold(_))));
        c.n_reps = 20;
        c.validate().unwrap();
        c.alpha = 0.0;
        assert!(c.validate().is_err());
    }

    fn fixture(n: usize, p: usize, seed: u64) -> (GenotypeMatrix, NullModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = Vec::new();
        let mut prev: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.1 { 1.0 } else { 0.0 }).collect();
        for _ in 0..p {
            let col: Vec<f64> = prev
                .iter()
                .map(|&g| if rng.random::<f64>() < 0.6 { g } else if rng.random::<f64>() < 0.1 { 1.0 } else { 0.0 })
                .collect();
            cols.push(col.clone());
            prev = col;
        }
        let infos = (0..p)
            .map(|j| VariantInfo { chrom: "1".to_string(), pos: j as u64 + 1, id: format!("v{j}") })
            .collect();
        let geno = GenotypeMatrix::from_dense_columns(n, infos, &cols).unwrap();
        let age: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|i| age[i] + rng.sample::<f64, _>(StandardNormal)).collect();
        let covar = CovariateMatrix::new(n, vec![age], vec!["age".into()]).unwrap();
        let model = fit_null(&PhenotypeVector::new(y, Family::Gaussian).unwrap(), &covar).unwrap();
        (geno, model)
    }

    #[test]
    fn projection_pseudo_scores_have_covariance_sigma() {
        let (geno, model) = fixture(300, 6, 3);
        let scores = ScoreSet::compute(&geno, &model, 5).unwrap();
        let (src, w) = PseudoScoreSource::new(McMode::GenotypeProjection, &scores, Some((&geno, &model))).unwrap();
        assert!(w.is_empty());
        let p = scores.n_variants();
        let reps = 40_000;
        let mut acc = vec![0.0; p * p];
        let mut s = src.scratch();
        for r in 0..reps {
            src.draw(&mut replicate_rng(9, r), &mut s);
            for i in 0..p {
                for j in 0..p {
                    acc[i * p + j] += s.u[i] * s.u[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..p {
                let est = acc[i * p + j] / reps as f64;
                let sij = scores.cov.get(i, j);
                let se = libm::sqrt((scores.cov.get(i, i) * scores.cov.get(j, j) + sij * sij) / reps as f64);
                assert!((est - sij).abs() < 5.0 * se, "({i},{j}) {est} vs {sij}");
            }
        }
    }

    #[test]
    fn cholesky_and_projection_thresholds_agree() {
        let (geno, model) = fixture(400, 60, 5);
        let scores = ScoreSet::compute(&geno, &model, 9).unwrap();
        let scan_cfg = ScanConfig::new(4, 10, Method::QScan).unwrap();
        let mut cfg = ThresholdConfig { n_reps: 2000, seed: 11, ..Default::default() };
        let a = mc_threshold(&scores, Some((&geno, &model)), &scan_cfg, &cfg).unwrap();
        cfg.mode = McMode::BandedCholesky;
        let b = mc_threshold(&scores, None, &scan_cfg, &cfg).unwrap();
        assert_eq!(b.mode, McMode::BandedCholesky);
        // both are estimates of the same quantile; allow a few Monte Carlo SEs
        assert!((a.h - b.h).abs() < 0.1 * a.h.abs().max(1.0), "{} vs {}", a.h, b.h);
    }

    #[test]
    fn deterministic_given_seed() {
        let (geno, model) = fixture(200, 30, 8);
        let scores = ScoreSet::compute(&geno, &model, 5).unwrap();
        let scan_cfg = ScanConfig::new(3, 6, Method::MScan).unwrap();
        let cfg = ThresholdConfig { n_reps: 200, seed: 4, ..Default::default() };
        let a = mc_threshold(&scores, Some((&geno, &model)), &scan_cfg, &cfg).unwrap();
        let b = mc_threshold(&scores, Some((&geno, &model)), &scan_cfg, &cfg).unwrap();
        assert_eq!((a.h, &a.qmax_samples), (b.h, &b.qmax_samples));
        let c = mc_threshold(&scores, Some((&geno, &model)), &scan_cfg, &ThresholdConfig { seed: 5, ..cfg }).unwrap();
        assert_ne!(a.qmax_samples, c.qmax_samples);
        assert!(a.qmax_samples.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.bound_upper.is_nan());
    }

    #[test]
    fn replicate_maxima_match_full_scan() {
        let (geno, model) = fixture(200, 25, 2);
        let scores = ScoreSet::compute(&geno, &model, 6).unwrap();
        let (src, _) = PseudoScoreSource::new(McMode::GenotypeProjection, &scores, Some((&geno, &model))).unwrap();
        let plan = ScanPlan::new(&scores, 3, 7, &[Method::QScan, Method::MScan]).unwrap();
        let engine = McEngine::new(src, plan, 1).unwrap();
        let mut s = engine.scratch();
        for r in 0..5 {
            let m = engine.replicate(r, &mut s);
            let mut alt = scores.clone();
            alt.u = s.u.clone();
            let q = scan_max(&alt, &ScanConfig::new(3, 7, Method::QScan).unwrap()).unwrap();
            let mm = scan_max(&alt, &ScanConfig::new(3, 7, Method::MScan).unwrap()).unwrap();
            assert!((m.q - q).abs() < 1e-9 * q.abs().max(1.0));
            assert!((m.m - mm).abs() < 1e-9 * mm.abs().max(1.0));
        }
    }

    #[test]
    fn cholesky_needs_no_genotypes_but_projection_does() {
        let cov = BandedMatrix::from_rows(3, 1, vec![1.0, 0.3, 1.0, 0.3, 1.0, 0.0]).unwrap();
        let scores = ScoreSet::from_scores(vec![0.0; 3], cov).unwrap();
        assert!(PseudoScoreSource::new(McMode::BandedCholesky, &scores, None).is_ok());
        assert!(matches!(
            PseudoScoreSource::new(McMode::GenotypeProjection, &scores, None),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn indefinite_band_is_jittered_or_fails() {
        // band of an indefinite matrix: [[1, .9], [.9, 1]] chained gives a
        // negative pivot at row 2
        let cov = BandedMatrix::from_rows(3, 1, vec![1.0, 0.9, 1.0, 0.9, 1.0, 0.0]).unwrap();
        let scores = ScoreSet::from_scores(vec![0.0; 3], cov).unwrap();
        assert!(PseudoScoreSource::new(McMode::BandedCholesky, &scores, None).is_err());
    }
}
