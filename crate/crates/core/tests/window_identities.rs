use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use qscan_core::{m_stat, q_stat, scan_all, BandedMatrix, Method, ScanConfig, ScoreSet, WindowMoments};

/// `A Aᵀ` with `A` lower banded: positive semi-definite with bandwidth `bw`.
fn banded_psd(p: usize, bw: usize, entries: &[f64], scales: &[f64]) -> BandedMatrix {
    let mut a = vec![0.0; p * p];
    let mut k = 0;
    for i in 0..p {
        for j in i.saturating_sub(bw)..=i {
            a[i * p + j] = if i == j { 0.2 + entries[k].abs() } else { entries[k] };
            k += 1;
        }
    }
    let mut cov = BandedMatrix::zeros(p, p - 1);
    for i in 0..p {
        for j in i.saturating_sub(bw)..=i {
            let v: f64 = (0..=j).map(|t| a[i * p + t] * a[j * p + t]).sum();
            cov.set(i, j, scales[i] * scales[j] * v);
        }
    }
    cov
}

fn case() -> impl Strategy<Value = (Vec<f64>, BandedMatrix)> {
    (2usize..14, 0usize..5).prop_flat_map(|(p, bw)| {
        let bw = bw.min(p - 1);
        (
            prop::collection::vec(-3.0..3.0f64, p),
            prop::collection::vec(-1.5..1.5f64, p * (bw + 1)),
            prop::collection::vec(0.1..3.0f64, p),
        )
            .prop_map(move |(u, e, s)| (u, banded_psd(p, bw, &e, &s)))
    })
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

proptest! {
    #[test]
    fn moments_match_eigenvalues((u, cov) in case()) {
        let p = u.len();
        let m = WindowMoments::direct(&u, &cov, 0, p - 1);
        let lambda = SymmetricEigen::new(DMatrix::from_fn(p, p, |i, j| cov.get(i, j))).eigenvalues;
        let l1: f64 = lambda.iter().sum();
        let l2: f64 = lambda.iter().map(|x| x * x).sum();
        prop_assert!(rel(m.trace, l1, l1.abs()) < 1e-10);
        prop_assert!(rel(m.frob2, l2, l2) < 1e-10);
        let s2: f64 = u.iter().map(|x| x * x).sum();
        let oracle = (s2 - l1) / (2.0 * l2).sqrt();
        let scale = (s2 + l1.abs()) / (2.0 * l2).sqrt();
        prop_assert!(rel(q_stat(&m).unwrap(), oracle, scale) < 1e-9);
    }

    #[test]
    fn statistics_ignore_sign_and_joint_scale((u, cov) in case(), c in 0.05..20.0f64) {
        let p = u.len();
        let cfg_q = ScanConfig::new(2, p.max(2), Method::QScan).unwrap();
        let cfg_m = ScanConfig::new(2, p.max(2), Method::MScan).unwrap();
        let base = ScoreSet::from_scores(u.clone(), cov.clone()).unwrap();
        let flipped = ScoreSet::from_scores(u.iter().map(|x| -x).collect(), cov.clone()).unwrap();
        let mut scaled_cov = cov.clone();
        for i in 0..p {
            for j in i..p {
                scaled_cov.set(i, j, c * c * cov.get(i, j));
            }
        }
        let scaled = ScoreSet::from_scores(u.iter().map(|x| c * x).collect(), scaled_cov).unwrap();
        for cfg in [cfg_q, cfg_m] {
            let (a, _) = scan_all(&base, &cfg).unwrap();
            let (b, _) = scan_all(&flipped, &cfg).unwrap();
            let (s, _) = scan_all(&scaled, &cfg).unwrap();
            prop_assert_eq!(a.len(), b.len());
            prop_assert_eq!(a.len(), s.len());
            for ((x, y), z) in a.iter().zip(&b).zip(&s) {
                let m = WindowMoments::direct(&u, &cov, x.start, x.end);
                let scale = match cfg.method {
                    Method::QScan => (m.sum_u2 + m.trace) / (2.0 * m.frob2).sqrt(),
                    Method::MScan => m_stat(&m).unwrap().max(1e-12),
                };
                prop_assert!(rel(x.stat, y.stat, scale) < 1e-9);
                prop_assert!(rel(x.stat, z.stat, scale) < 1e-9);
            }
        }
    }
}
