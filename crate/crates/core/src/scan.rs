//! Window statistics over every run of `l_min..=l_max` consecutive variants.
//!
//! Q(I) only needs `‖λ_I‖₁ = tr(Σ̂_I)` and `‖λ_I‖₂² = ‖Σ̂_I‖_F²`, and M(I) needs
//! `1ᵀΣ̂_I1`, so no eigendecomposition is ever done. Windows sharing a start
//! are grown one variant at a time; the cross terms `Σ_{i=s}^{e-1} Σ̂_{i,e}`
//! (and their squares) are kept per end column in a ring buffer that is
//! updated one band row at a time while the start moves left. Every extension
//! is O(1) and a full scan is O(p·l_max).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::exact_sum::ExactSum;
use crate::scores::ScoreSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    QScan,
    MScan,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::QScan => "qscan",
            Method::MScan => "mscan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanConfig {
    pub l_min: usize,
    pub l_max: usize,
    pub method: Method,
}

impl ScanConfig {
    pub fn new(l_min: usize, l_max: usize, method: Method) -> Result<Self> {
        let cfg = Self {
            l_min,
            l_max,
            method,
        };
        cfg.check_lengths()?;
        Ok(cfg)
    }

    fn check_lengths(&self) -> Result<()> {
        if self.l_min < 2 || self.l_min > self.l_max {
            return Err(Error::InvalidConfig(alloc::format!(
                "need 2 <= l_min <= l_max, got l_min={} l_max={}",
                self.l_min,
                self.l_max
            )));
        }
        Ok(())
    }

    /// Checks the length range against `p` variants.
    pub fn validate(&self, p: usize) -> Result<()> {
        self.check_lengths()?;
        if self.l_max > p {
            return Err(Error::InvalidConfig(alloc::format!(
                "l_max={} exceeds the number of variants {p}",
                self.l_max
            )));
        }
        Ok(())
    }

    /// Band half-width the covariance must carry.
    pub fn required_bandwidth(&self) -> usize {
        self.l_max - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStat {
    pub start: usize,
    /// inclusive
    pub end: usize,
    pub length: usize,
    pub stat: f64,
    /// tr(Σ̂_I)
    pub trace: f64,
    /// ‖Σ̂_I‖_F²
    pub frob2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowMoments {
    pub sum_u: f64,
    pub sum_u2: f64,
    pub trace: f64,
    pub frob2: f64,
    /// var(Σ_{i∈I} U_i) = 1ᵀΣ̂_I1
    pub rowvar: f64,
}

impl WindowMoments {
    /// From-scratch moments of the window `[start, end]` using band entries.
    pub fn direct(u: &[f64], cov: &BandedMatrix, start: usize, end: usize) -> Self {
        let mut m = Self::default();
        for i in start..=end {
            m.sum_u += u[i];
            m.sum_u2 += u[i] * u[i];
            m.trace += cov.diag(i);
            for j in start..=end {
                let c = cov.get(i, j);
                m.frob2 += c * c;
                m.rowvar += c;
            }
        }
        m
    }

    pub fn stat(&self, method: Method) -> Result<f64> {
        match method {
            Method::QScan => q_stat(self),
            Method::MScan => m_stat(self),
        }
    }
}

/// `Q(I) = (Σ U_i² − ‖λ_I‖₁) / √(2‖λ_I‖₂²)`.
pub fn q_stat(m: &WindowMoments) -> Result<f64> {
    if !(m.frob2 > 0.0) {
        return Err(Error::DegenerateWindow);
    }
    Ok((m.sum_u2 - m.trace) / libm::sqrt(2.0 * m.frob2))
}

/// `M(I) = (Σ U_i)² / var(Σ U_i)`.
pub fn m_stat(m: &WindowMoments) -> Result<f64> {
    if !(m.rowvar > 0.0) {
        return Err(Error::DegenerateWindow);
    }
    Ok(m.sum_u * m.sum_u / m.rowvar)
}

/// Mean scan statistic for independent scores, `Σ Z_i / √|I|` with
/// `Z_i = U_i / var(U_i)`. Kept as a reference point for [`m_stat`]: with
/// `Σ̂_I = I` its square equals M(I).
pub fn independent_mean_stat(u: &[f64], variances: &[f64]) -> f64 {
    let s: f64 = u.iter().zip(variances).map(|(u, v)| u / v).sum();
    s / libm::sqrt(u.len() as f64)
}

/// Accumulation mode for streamed window moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    /// Plain floating-point accumulation.
    #[default]
    Fast,
    /// Correctly rounded sums of the same terms; bit-identical to a
    /// from-scratch [`crate::exact_sum::exact_sum`] over the window.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScanSummary {
    pub emitted: usize,
    /// windows skipped because their variance functional was not positive
    pub skipped: usize,
}

impl core::ops::AddAssign for ScanSummary {
    fn add_assign(&mut self, o: Self) {
        self.emitted += o.emitted;
        self.skipped += o.skipped;
    }
}

fn check_band(scores: &ScoreSet, cfg: &ScanConfig) -> Result<()> {
    cfg.validate(scores.n_variants())?;
    if scores.cov.bandwidth() < cfg.required_bandwidth() {
        return Err(Error::InvalidBandwidth {
            bandwidth: scores.cov.bandwidth(),
            reason: "covariance band is narrower than l_max - 1",
        });
    }
    Ok(())
}

/// Ring of per-end-column cross sums `R1(s,e) = Σ_{i=s}^{e-1} Σ̂_{i,e}` and
/// `R2(s,e) = Σ_{i=s}^{e-1} Σ̂_{i,e}²` for `e ∈ [s, s + span)`.
struct CrossSums {
    span: usize,
    r1: Vec<f64>,
    r2: Vec<f64>,
}

impl CrossSums {
    fn new(span: usize) -> Self {
        Self {
            span,
            r1: vec![0.0; span],
            r2: vec![0.0; span],
        }
    }

    /// Moves the start to `s` by folding in band row `s` (columns up to `last`).
    #[inline]
    fn push_row(&mut self, cov: &BandedMatrix, s: usize, last: usize) {
        let span = self.span;
        self.r1[s % span] = 0.0;
        self.r2[s % span] = 0.0;
        let row = cov.row(s);
        let kmax = (span - 1).min(last - s);
        for (k, &c) in row.iter().enumerate().take(kmax + 1).skip(1) {
            let slot = (s + k) % span;
            self.r1[slot] += c;
            self.r2[slot] += c * c;
        }
    }

    #[inline]
    fn get(&self, e: usize) -> (f64, f64) {
        (self.r1[e % self.span], self.r2[e % self.span])
    }
}

/// Streams covariance moments `(start, end, trace, frob2, rowvar)` for every
/// window in `segment` whose start lies in `starts`, ends within `l_max - 1` of
/// the start. Starts are visited in decreasing order; ends increase.
fn stream_cov_moments<F>(cov: &BandedMatrix, l_max: usize, segment: Range<usize>, starts: Range<usize>, mut f: F)
where
    F: FnMut(usize, usize, f64, f64, f64),
{
    if starts.is_empty() {
        return;
    }
    let last = segment.end - 1;
    let mut ring = CrossSums::new(l_max);
    let warm_top = (starts.end + l_max - 2).min(last);
    for s in (starts.end..=warm_top).rev() {
        ring.push_row(cov, s, last);
    }
    for s in starts.rev() {
        ring.push_row(cov, s, last);
        let (mut trace, mut frob2, mut rowvar) = (0.0, 0.0, 0.0);
        for e in s..=(s + l_max - 1).min(last) {
            let d = cov.diag(e);
            let (r1, r2) = ring.get(e);
            trace += d;
            frob2 += d * d + 2.0 * r2;
            rowvar += d + 2.0 * r1;
            f(s, e, trace, frob2, rowvar);
        }
    }
}

/// Visits every window whose start lies in `starts` (global variant indices),
/// never crossing a chromosome boundary. Degenerate windows are counted and
/// skipped. Windows are visited in decreasing start order.
pub fn scan_range<F>(
    scores: &ScoreSet,
    cfg: &ScanConfig,
    summation: Summation,
    starts: Range<usize>,
    mut f: F,
) -> Result<ScanSummary>
where
    F: FnMut(WindowStat),
{
    check_band(scores, cfg)?;
    let mut summary = ScanSummary::default();
    for seg in scores.segments.iter().rev() {
        let lo = starts.start.max(seg.range.start);
        let hi = starts.end.min(seg.range.end);
        if lo >= hi {
            continue;
        }
        match summation {
            Summation::Fast => scan_segment_fast(scores, cfg, seg.range.clone(), lo..hi, &mut summary, &mut f),
            Summation::Exact => scan_segment_exact(scores, cfg, seg.range.clone(), lo..hi, &mut summary, &mut f),
        }
    }
    Ok(summary)
}

fn emit<F: FnMut(WindowStat)>(
    cfg: &ScanConfig,
    s: usize,
    e: usize,
    m: &WindowMoments,
    summary: &mut ScanSummary,
    f: &mut F,
) {
    match m.stat(cfg.method) {
        Ok(stat) => {
            summary.emitted += 1;
            f(WindowStat {
                start: s,
                end: e,
                length: e + 1 - s,
                stat,
                trace: m.trace,
                frob2: m.frob2,
            });
        }
        Err(_) => summary.skipped += 1,
    }
}

fn scan_segment_fast<F: FnMut(WindowStat)>(
    scores: &ScoreSet,
    cfg: &ScanConfig,
    segment: Range<usize>,
    starts: Range<usize>,
    summary: &mut ScanSummary,
    f: &mut F,
) {
    let u = &scores.u;
    let (mut sum_u, mut sum_u2) = (0.0, 0.0);
    stream_cov_moments(&scores.cov, cfg.l_max, segment, starts, |s, e, trace, frob2, rowvar| {
        if e == s {
            sum_u = 0.0;
            sum_u2 = 0.0;
        }
        sum_u += u[e];
        sum_u2 += u[e] * u[e];
        if e + 1 - s >= cfg.l_min {
            let m = WindowMoments {
                sum_u,
                sum_u2,
                trace,
                frob2,
                rowvar,
            };
            emit(cfg, s, e, &m, summary, f);
        }
    });
}

fn scan_segment_exact<F: FnMut(WindowStat)>(
    scores: &ScoreSet,
    cfg: &ScanConfig,
    segment: Range<usize>,
    starts: Range<usize>,
    summary: &mut ScanSummary,
    f: &mut F,
) {
    let (u, cov) = (&scores.u, &scores.cov);
    let last = segment.end - 1;
    for s in starts.rev() {
        let mut acc: [ExactSum; 5] = Default::default();
        for e in s..=(s + cfg.l_max - 1).min(last) {
            let d = cov.diag(e);
            acc[0].add(u[e]);
            acc[1].add(u[e] * u[e]);
            acc[2].add(d);
            acc[3].add(d * d);
            acc[4].add(d);
            for i in s..e {
                let c = cov.get(i, e);
                acc[3].add(2.0 * (c * c));
                acc[4].add(2.0 * c);
            }
            if e + 1 - s >= cfg.l_min {
                let m = WindowMoments {
                    sum_u: acc[0].value(),
                    sum_u2: acc[1].value(),
                    trace: acc[2].value(),
                    frob2: acc[3].value(),
                    rowvar: acc[4].value(),
                };
                emit(cfg, s, e, &m, summary, f);
            }
        }
    }
}

/// Visits every window of the scan.
pub fn scan_each<F>(scores: &ScoreSet, cfg: &ScanConfig, summation: Summation, f: F) -> Result<ScanSummary>
where
    F: FnMut(WindowStat),
{
    scan_range(scores, cfg, summation, 0..scores.n_variants(), f)
}

/// All window statistics ordered by `(start, end)`, plus the skip counter.
pub fn scan_all(scores: &ScoreSet, cfg: &ScanConfig) -> Result<(Vec<WindowStat>, ScanSummary)> {
    let mut out = Vec::new();
    let summary = scan_each(scores, cfg, Summation::Fast, |w| out.push(w))?;
    out.sort_unstable_by_key(|w| (w.start, w.end));
    Ok((out, summary))
}

/// `max_I stat(I)` over all valid windows.
pub fn scan_max(scores: &ScoreSet, cfg: &ScanConfig) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    let summary = scan_each(scores, cfg, Summation::Fast, |w| {
        if w.stat > best {
            best = w.stat;
        }
    })?;
    if summary.emitted == 0 {
        return Err(Error::NoValidWindow);
    }
    Ok(best)
}

/// Per-window coefficients for repeated maxima over many score vectors that
/// share one covariance (the Monte Carlo null). With prefix sums `S1`, `S2` of
/// `U` and `U²`, `Q = (S2[e+1] − S2[s])·a − c` and `M = (S1[e+1] − S1[s])²·m`.
/// Degenerate windows carry NaN coefficients and never win a maximum.
#[derive(Debug, Clone)]
pub struct ScanPlan {
    l_min: usize,
    /// first window slot of each start; length p + 1
    offsets: Vec<usize>,
    q_scale: Vec<f64>,
    q_shift: Vec<f64>,
    m_scale: Vec<f64>,
    skipped_q: usize,
    skipped_m: usize,
}

/// Maxima of the requested statistics (`NEG_INFINITY` when not requested or
/// no window was valid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatMaxima {
    pub q: f64,
    pub m: f64,
}

impl StatMaxima {
    pub fn get(&self, method: Method) -> f64 {
        match method {
            Method::QScan => self.q,
            Method::MScan => self.m,
        }
    }
}

impl ScanPlan {
    /// Precomputes coefficients for the requested methods.
    pub fn new(scores: &ScoreSet, l_min: usize, l_max: usize, methods: &[Method]) -> Result<Self> {
        let cfg = ScanConfig::new(l_min, l_max, Method::QScan)?;
        check_band(scores, &cfg)?;
        let p = scores.n_variants();
        let mut offsets = vec![0usize; p + 1];
        for seg in &scores.segments {
            for s in seg.range.clone() {
                let longest = l_max.min(seg.range.end - s);
                offsets[s + 1] = (longest + 1).saturating_sub(l_min);
            }
        }
        for s in 0..p {
            offsets[s + 1] += offsets[s];
        }
        let total = offsets[p];
        let want_q = methods.contains(&Method::QScan);
        let want_m = methods.contains(&Method::MScan);
        let mut q_scale = if want_q { vec![f64::NAN; total] } else { Vec::new() };
        let mut q_shift = if want_q { vec![f64::NAN; total] } else { Vec::new() };
        let mut m_scale = if want_m { vec![f64::NAN; total] } else { Vec::new() };
        let (mut skipped_q, mut skipped_m) = (0, 0);
        for seg in &scores.segments {
            stream_cov_moments(&scores.cov, l_max, seg.range.clone(), seg.range.clone(), |s, e, trace, frob2, rowvar| {
                let len = e + 1 - s;
                if len < l_min {
                    return;
                }
                let k = offsets[s] + len - l_min;
                if want_q {
                    if frob2 > 0.0 {
                        let a = 1.0 / libm::sqrt(2.0 * frob2);
                        q_scale[k] = a;
                        q_shift[k] = trace * a;
                    } else {
                        skipped_q += 1;
                    }
                }
                if want_m {
                    if rowvar > 0.0 {
                        m_scale[k] = 1.0 / rowvar;
                    } else {
                        skipped_m += 1;
                    }
                }
            });
        }
        Ok(Self {
            l_min,
            offsets,
            q_scale,
            q_shift,
            m_scale,
            skipped_q,
            skipped_m,
        })
    }

    pub fn n_windows(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn skipped(&self, method: Method) -> usize {
        match method {
            Method::QScan => self.skipped_q,
            Method::MScan => self.skipped_m,
        }
    }

    pub fn n_variants(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Maxima over all windows for score vector `u`; `prefix` is scratch space.
    pub fn maxima(&self, u: &[f64], prefix: &mut Vec<f64>) -> StatMaxima {
        let p = self.n_variants();
        debug_assert_eq!(u.len(), p);
        prefix.clear();
        prefix.resize(2 * (p + 1), 0.0);
        let (s1, s2) = prefix.split_at_mut(p + 1);
        for i in 0..p {
            s1[i + 1] = s1[i] + u[i];
            s2[i + 1] = s2[i] + u[i] * u[i];
        }
        let mut out = StatMaxima {
            q: f64::NEG_INFINITY,
            m: f64::NEG_INFINITY,
        };
        let want_q = !self.q_scale.is_empty();
        let want_m = !self.m_scale.is_empty();
        for s in 0..p {
            let (a, b) = (self.offsets[s], self.offsets[s + 1]);
            if a == b {
                continue;
            }
            let first_end = s + self.l_min;
            let count = b - a;
            if want_q {
                let base = s2[s];
                let ends = &s2[first_end..first_end + count];
                let mut best = out.q;
                for ((&e2, &sc), &sh) in ends.iter().zip(&self.q_scale[a..b]).zip(&self.q_shift[a..b]) {
                    best = best.max((e2 - base) * sc - sh);
                }
                out.q = best;
            }
            if want_m {
                let base = s1[s];
                let ends = &s1[first_end..first_end + count];
                let mut best = out.m;
                for (&e1, &sc) in ends.iter().zip(&self.m_scale[a..b]) {
                    let d = e1 - base;
                    best = best.max(d * d * sc);
                }
                out.m = best;
            }
        }
        out
    }
}
