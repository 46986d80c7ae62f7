//! Overlap metrics between index intervals.

/// Inclusive variant-index interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start <= end, "interval start {start} > end {end}");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, o: &Interval) -> bool {
        self.start <= o.end && o.start <= self.end
    }

    pub fn intersection_len(&self, o: &Interval) -> usize {
        let lo = self.start.max(o.start);
        let hi = self.end.min(o.end);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }
}

/// `|a ∩ b| / |a ∪ b|` in variant counts.
pub fn jaccard(a: Interval, b: Interval) -> f64 {
    let inter = a.intersection_len(&b);
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Fraction of truth intervals overlapping at least one detected interval.
/// Empty `truth` gives 0.
pub fn detection_rate(truth: &[Interval], detected: &[Interval]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hit = truth
        .iter()
        .filter(|t| detected.iter().any(|d| t.overlaps(d)))
        .count();
    hit as f64 / truth.len() as f64
}

/// Mean over truth intervals of the best Jaccard index against any detected
/// interval (0 for a truth interval with nothing detected).
pub fn mean_max_jaccard(truth: &[Interval], detected: &[Interval]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let total: f64 = truth
        .iter()
        .map(|&t| detected.iter().map(|&d| jaccard(t, d)).fold(0.0, f64::max))
        .sum();
    total / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert!((jaccard(Interval::new(1, 10), Interval::new(6, 15)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(Interval::new(3, 9), Interval::new(3, 9)), 1.0);
        assert_eq!(jaccard(Interval::new(1, 4), Interval::new(5, 9)), 0.0);
        let truth = [Interval::new(10, 20), Interval::new(100, 150)];
        assert_eq!(detection_rate(&truth, &[]), 0.0);
        assert_eq!(mean_max_jaccard(&truth, &[]), 0.0);
        assert_eq!(detection_rate(&truth, &truth), 1.0);
        assert_eq!(mean_max_jaccard(&truth, &truth), 1.0);
    }

    fn interval() -> impl Strategy<Value = Interval> {
        (0usize..200, 0usize..40).prop_map(|(s, l)| Interval::new(s, s + l))
    }

    proptest! {
        #[test]
        fn jaccard_properties(a in interval(), b in interval()) {
            let j = jaccard(a, b);
            prop_assert_eq!(j, jaccard(b, a));
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert_eq!(j == 1.0, a == b);
            // brute-force set oracle
            let sa: Vec<usize> = (a.start..=a.end).collect();
            let inter = sa.iter().filter(|&&i| i >= b.start && i <= b.end).count();
            let union = a.len() + b.len() - inter;
            prop_assert!((j - inter as f64 / union as f64).abs() < 1e-15);
        }

        #[test]
        fn detection_rate_matches_double_loop_and_is_monotone(
            truth in proptest::collection::vec(interval(), 1..5),
            detected in proptest::collection::vec(interval(), 0..6),
            extra in interval(),
        ) {
            let mut hits = 0;
            for t in &truth {
                let mut hit = false;
                for d in &detected {
                    for i in t.start..=t.end {
                        if i >= d.start && i <= d.end { hit = true; }
                    }
                }
                if hit { hits += 1; }
            }
            let r = detection_rate(&truth, &detected);
            prop_assert!((r - hits as f64 / truth.len() as f64).abs() < 1e-15);
            let mut more = detected.clone();
            more.push(extra);
            prop_assert!(detection_rate(&truth, &more) >= r);
        }
    }
}
