//! Quadratic (Q-SCAN) and mean (M-SCAN) scan statistics for detecting signal
//! regions in a long sequence of correlated marginal score statistics.
//!
//! The pipeline is: fit a covariate-only GLM ([`null_model`]), compute marginal
//! scores and their banded covariance ([`scores`]), evaluate every window of
//! `l_min..=l_max` consecutive variants ([`scan`]), calibrate a family-wise
//! threshold by Monte Carlo ([`threshold`]) and greedily pick disjoint local
//! maxima above it ([`detect`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! and multi-threaded drivers live in the companion `qscan` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod banded;
pub mod detect;
pub mod error;
pub mod evaluate;
pub mod exact_sum;
pub mod genotype;
mod linalg;
pub mod null_model;
pub mod scan;
pub mod scores;
pub mod threshold;

pub use banded::{BandedCholesky, BandedMatrix};
pub use detect::{detect_regions, DetectedRegion, ScanReport};
pub use error::{Error, Result};
pub use evaluate::{detection_rate, jaccard, mean_max_jaccard, Interval};
pub use genotype::{filter_variants, GenotypeMatrix, VariantInfo};
pub use null_model::{fit_null, CovariateMatrix, Family, NullModel, PhenotypeVector};
pub use scan::{
    m_stat, q_stat, scan_all, scan_max, Method, ScanConfig, ScanPlan, Summation, WindowMoments,
    WindowStat,
};
pub use scores::{compute_banded_cov, compute_scores, ScoreSet};
pub use threshold::{
    asymptotic_rate, mc_threshold, theoretical_bound, McMode, PseudoScoreSource, ThresholdConfig,
    ThresholdResult,
};
