//! Symmetric banded storage and its banded Cholesky factor.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Symmetric `dim x dim` matrix with entries only for `|i - j| <= bandwidth`.
///
/// Row `i` stores `(i, i), (i, i+1), ..., (i, i+bandwidth)`; slots past the
/// last column are kept at zero. Everything outside the band reads as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    dim: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        Self {
            dim,
            bandwidth,
            data: vec![0.0; dim * (bandwidth + 1)],
        }
    }

    /// Builds from row-wise upper-band storage (`dim * (bandwidth + 1)` values).
    pub fn from_rows(dim: usize, bandwidth: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * (bandwidth + 1) {
            return Err(Error::DimensionMismatch {
                what: "banded storage",
                expected: dim * (bandwidth + 1),
                found: data.len(),
            });
        }
        Ok(Self {
            dim,
            bandwidth,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k > self.bandwidth || hi >= self.dim {
            0.0
        } else {
            self.data[lo * (self.bandwidth + 1) + k]
        }
    }

    /// Sets `(i, j)` and `(j, i)`. Panics outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        assert!(hi < self.dim && hi - lo <= self.bandwidth, "({i}, {j}) outside band");
        self.data[lo * (self.bandwidth + 1) + hi - lo] = v;
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.bandwidth + 1)]
    }

    /// Entries `(i, i..=i+bandwidth)`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.bandwidth + 1;
        &self.data[i * w..(i + 1) * w]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.bandwidth + 1;
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Principal submatrix `[start, end]` (inclusive), dense row-major.
    pub fn dense_block(&self, start: usize, end: usize) -> Vec<f64> {
        let m = end + 1 - start;
        let mut out = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                out[a * m + b] = self.get(start + a, start + b);
            }
        }
        out
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.dim).map(|i| self.diag(i)).fold(0.0, f64::max)
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        BandedCholesky::factor(self)
    }
}

/// Lower-triangular banded factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky {
    dim: usize,
    bandwidth: usize,
    // row i holds L[i][i - k] at index k
    data: Vec<f64>,
    jitter: f64,
}

impl BandedCholesky {
    pub fn factor(a: &BandedMatrix) -> Result<Self> {
        let (p, b) = (a.dim, a.bandwidth);
        let w = b + 1;
        let mut l = vec![0.0; p * w];
        for i in 0..p {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut s = a.get(i, j);
                // k ranges over columns shared by rows i and j
                for k in lo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i });
                    }
                    l[i * w] = libm::sqrt(s);
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(Self {
            dim: p,
            bandwidth: b,
            data: l,
            jitter: 0.0,
        })
    }

    /// Factors `a`; on failure retries once with `jitter_rel * max(diag)` added
    /// to the diagonal.
    pub fn factor_with_jitter(a: &BandedMatrix, jitter_rel: f64) -> Result<Self> {
        match Self::factor(a) {
            Ok(l) => Ok(l),
            Err(_) => {
                let eps = jitter_rel * a.max_diag();
                let mut a2 = a.clone();
                for i in 0..a2.dim {
                    a2.row_mut(i)[0] += eps;
                }
                let mut l = Self::factor(&a2)?;
                l.jitter = eps;
                Ok(l)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Diagonal jitter that was needed, zero if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.bandwidth {
            0.0
        } else {
            self.data[i * (self.bandwidth + 1) + (i - j)]
        }
    }

    /// `out = L z`
    pub fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        let w = self.bandwidth + 1;
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let row = &self.data[i * w..(i + 1) * w];
            let kmax = i.min(self.bandwidth);
            let mut s = 0.0;
            for k in 0..=kmax {
                s += row[k] * z[i - k];
            }
            *o = s;
        }
    }

    /// `L Lᵀ` restricted to the band.
    pub fn reconstruct(&self) -> BandedMatrix {
        let (p, b) = (self.dim, self.bandwidth);
        let mut out = BandedMatrix::zeros(p, b);
        for i in 0..p {
            for j in i..(i + b + 1).min(p) {
                let lo = j.saturating_sub(b);
                let s: f64 = (lo..=i).map(|k| self.get(i, k) * self.get(j, k)).sum();
                out.set(i, j, s);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Banded SPD matrix: B Bᵀ with B lower-banded of half-width h gives bandwidth 2h.
    fn random_banded_spd(p: usize, h: usize, rng: &mut ChaCha8Rng) -> BandedMatrix {
        let mut bmat = vec![0.0; p * p];
        for i in 0..p {
            for j in i.saturating_sub(h)..=i {
                bmat[i * p + j] = rng.random_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 };
            }
        }
        let mut a = BandedMatrix::zeros(p, 2 * h);
        for i in 0..p {
            for j in i..(i + 2 * h + 1).min(p) {
                let s: f64 = (0..p).map(|k| bmat[i * p + k] * bmat[j * p + k]).sum();
                a.set(i, j, s);
            }
        }
        a
    }

    #[test]
    fn symmetric_reads_and_out_of_band_zero() {
        let mut a = BandedMatrix::zeros(5, 2);
        a.set(1, 3, 0.7);
        assert_eq!(a.get(3, 1), 0.7);
        assert_eq!(a.get(1, 3), 0.7);
        assert_eq!(a.get(0, 4), 0.0);
        assert_eq!(a.row(4), &[0.0, 0.0, 0.0]);
    }

    #[test]
    #[should_panic]
    fn set_outside_band_panics() {
        BandedMatrix::zeros(5, 1).set(0, 2, 1.0);
    }

    #[test]
    fn cholesky_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(p, h) in &[(1, 0), (7, 1), (40, 3), (60, 5)] {
            let a = random_banded_spd(p, h, &mut rng);
            let l = a.cholesky().unwrap();
            let back = l.reconstruct();
            for i in 0..p {
                for j in 0..p {
                    let d = (back.get(i, j) - a.get(i, j)).abs();
                    assert!(d <= 1e-10 * a.max_diag(), "p={p} ({i},{j}) off by {d}");
                }
            }
        }
    }

    #[test]
    fn mul_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_banded_spd(20, 2, &mut rng);
        let l = a.cholesky().unwrap();
        let z: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; 20];
        l.mul_into(&z, &mut y);
        for i in 0..20 {
            let s: f64 = (0..20).map(|k| l.get(i, k) * z[k]).sum();
            assert!((s - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_reported_and_jitter_rescues_semidefinite() {
        let mut a = BandedMatrix::zeros(2, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(0, 1, 2.0);
        assert_eq!(a.cholesky().unwrap_err(), Error::NotPositiveDefinite { row: 1 });
        assert!(BandedCholesky::factor_with_jitter(&a, 1e-8).is_err());
        // exactly singular PSD: [[1,1],[1,1]]
        a.set(0, 1, 1.0);
        let l = BandedCholesky::factor_with_jitter(&a, 1e-8).unwrap();
        assert!(l.jitter() > 0.0);
    }
}
