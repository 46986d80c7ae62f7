//! Greedy multi-region search: keep windows above the threshold, then
//! repeatedly take the strongest remaining window and discard every window
//! sharing a variant with it.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::Result;
use crate::evaluate::Interval;
use crate::scan::{scan_each, Method, ScanConfig, Summation, WindowStat};
use crate::scores::ScoreSet;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedRegion {
    pub start: usize,
    pub end: usize,
    pub start_bp: u64,
    pub end_bp: u64,
    pub stat: f64,
    /// 1-based selection order
    pub rank: usize,
}

impl DetectedRegion {
    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub threshold: f64,
    pub method: Method,
    pub n_candidates: usize,
    pub regions: Vec<DetectedRegion>,
    pub skipped_windows: usize,
    pub config: ScanConfig,
}

impl ScanReport {
    /// Scans `scores` and runs the region search at threshold `h`.
    pub fn build(scores: &ScoreSet, cfg: &ScanConfig, h: f64) -> Result<Self> {
        let mut candidates = Vec::new();
        let summary = scan_each(scores, cfg, Summation::Fast, |w| {
            if w.stat > h {
                candidates.push(w);
            }
        })?;
        let n_candidates = candidates.len();
        let regions = detect_regions(candidates, h, &scores.positions);
        Ok(Self {
            threshold: h,
            method: cfg.method,
            n_candidates,
            regions,
            skipped_windows: summary.skipped,
            config: *cfg,
        })
    }

    /// Whether the global null was rejected.
    pub fn rejected(&self) -> bool {
        !self.regions.is_empty()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.regions.iter().map(DetectedRegion::interval).collect()
    }
}

/// Strongest first; ties go to the smaller start, then the shorter window.
fn selection_order(a: &WindowStat, b: &WindowStat) -> Ordering {
    b.stat
        .total_cmp(&a.stat)
        .then(a.start.cmp(&b.start))
        .then(a.length.cmp(&b.length))
}

/// Candidate set `{I : stat(I) > h}` reduced to disjoint local maxima, in
/// selection order. `positions[i]` is the base-pair coordinate of variant `i`.
pub fn detect_regions<I>(stats: I, h: f64, positions: &[u64]) -> Vec<DetectedRegion>
where
    I: IntoIterator<Item = WindowStat>,
{
    let mut candidates: Vec<WindowStat> = stats.into_iter().filter(|w| w.stat > h).collect();
    candidates.sort_unstable_by(selection_order);
    // accepted regions keyed by start; disjoint, so ends are sorted as well
    let mut taken: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for w in candidates {
        let clash = taken
            .range(..=w.end)
            .next_back()
            .is_some_and(|(_, &end)| end >= w.start);
        if clash {
            continue;
        }
        taken.insert(w.start, w.end);
        out.push(DetectedRegion {
            start: w.start,
            end: w.end,
            start_bp: positions.get(w.start).copied().unwrap_or(w.start as u64),
            end_bp: positions.get(w.end).copied().unwrap_or(w.end as u64),
            stat: w.stat,
            rank: out.len() + 1,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn w(start: usize, end: usize, stat: f64) -> WindowStat {
        WindowStat {
            start,
            end,
            length: end - start + 1,
            stat,
            trace: 1.0,
            frob2: 1.0,
        }
    }

    /// Steps 2-5 taken literally: argmax, delete overlaps, repeat.
    fn naive(stats: &[WindowStat], h: f64) -> Vec<(usize, usize)> {
        let mut cand: Vec<WindowStat> = stats.iter().copied().filter(|w| w.stat > h).collect();
        let mut out = Vec::new();
        while !cand.is_empty() {
            let mut best = 0;
            for k in 1..cand.len() {
                if selection_order(&cand[k], &cand[best]) == Ordering::Less {
                    best = k;
                }
            }
            let b = cand[best];
            out.push((b.start, b.end));
            cand.retain(|c| c.end < b.start || c.start > b.end);
        }
        out
    }

    #[test]
    fn greedy_example() {
        let stats = vec![w(10, 50, 5.0), w(30, 70, 4.0), w(200, 260, 6.0)];
        let r = detect_regions(stats, 3.0, &[]);
        let got: Vec<_> = r.iter().map(|r| (r.start, r.end, r.rank)).collect();
        assert_eq!(got, vec![(200, 260, 1), (10, 50, 2)]);
    }

    #[test]
    fn nothing_above_threshold() {
        let stats = vec![w(0, 5, 1.0), w(3, 9, 3.0)];
        assert!(detect_regions(stats, 3.0, &[]).is_empty());
    }

    #[test]
    fn ties_prefer_smaller_start_then_shorter() {
        let stats = vec![w(5, 20, 2.0), w(5, 10, 2.0), w(4, 30, 2.0)];
        let r = detect_regions(stats, 1.0, &[]);
        assert_eq!((r[0].start, r[0].end), (4, 30));
        let stats = vec![w(5, 20, 2.0), w(5, 10, 2.0)];
        let r = detect_regions(stats, 1.0, &[]);
        assert_eq!((r[0].start, r[0].end), (5, 10));
    }

    #[test]
    fn positions_are_attached() {
        let r = detect_regions(vec![w(1, 2, 9.0)], 0.0, &[100, 200, 300]);
        assert_eq!((r[0].start_bp, r[0].end_bp), (200, 300));
    }

    fn windows() -> impl Strategy<Value = Vec<WindowStat>> {
        proptest::collection::vec((0usize..300, 0usize..60, -2.0f64..6.0), 0..80)
            .prop_map(|v| v.into_iter().map(|(s, l, st)| w(s, s + l, st)).collect())
    }

    proptest! {
        #[test]
        fn matches_naive_reference(stats in windows(), h in 0.0f64..3.0) {
            let fast: Vec<_> = detect_regions(stats.clone(), h, &[]).iter().map(|r| (r.start, r.end)).collect();
            prop_assert_eq!(fast, naive(&stats, h));
        }

        #[test]
        fn disjoint_ordered_and_permutation_invariant(stats in windows(), h in 0.0f64..3.0, rot in 0usize..100) {
            let r = detect_regions(stats.clone(), h, &[]);
            for (i, a) in r.iter().enumerate() {
                prop_assert!(a.stat > h);
                for b in &r[i + 1..] {
                    prop_assert!(a.end < b.start || b.end < a.start);
                    prop_assert!(a.stat >= b.stat);
                }
            }
            let mut shuffled = stats.clone();
            if !shuffled.is_empty() {
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
                shuffled.reverse();
            }
            prop_assert_eq!(detect_regions(shuffled, h, &[]), r);
        }

        #[test]
        fn local_maximality(stats in windows(), h in 0.0f64..3.0) {
            // distinct stats so "strictly exceeds" is well defined
            let stats: Vec<WindowStat> = stats.into_iter().enumerate()
                .map(|(k, mut x)| { x.stat += k as f64 * 1e-9; x }).collect();
            let r = detect_regions(stats.clone(), h, &[]);
            let mut remaining: Vec<WindowStat> = stats.into_iter().filter(|x| x.stat > h).collect();
            for reg in &r {
                for c in &remaining {
                    if c.start <= reg.end && reg.start <= c.end && (c.start, c.end) != (reg.start, reg.end) {
                        prop_assert!(reg.stat > c.stat);
                    }
                }
                remaining.retain(|c| c.end < reg.start || c.start > reg.end);
            }
        }

        #[test]
        fn raising_threshold_never_adds_regions(stats in windows(), h in 0.0f64..3.0, dh in 0.0f64..2.0) {
            let lo = detect_regions(stats.clone(), h, &[]);
            let hi = detect_regions(stats, h + dh, &[]);
            prop_assert!(hi.len() <= lo.len());
        }
    }
}
