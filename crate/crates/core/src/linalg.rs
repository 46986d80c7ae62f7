//! Small dense helpers for q x q systems (q = number of covariates).

use alloc::vec;
use alloc::vec::Vec;

/// Row-major symmetric positive definite factorization. Returns the lower
/// factor, or the index of the first pivot that is not clearly positive
/// (relative to the largest diagonal entry).
pub(crate) fn cholesky(a: &[f64], q: usize) -> Result<Vec<f64>, usize> {
    debug_assert_eq!(a.len(), q * q);
    let max_diag = (0..q).map(|i| a[i * q + i].abs()).fold(0.0, f64::max);
    let tol = 1e-10 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; q * q];
    for j in 0..q {
        let mut d = a[j * q + j];
        for k in 0..j {
            d -= l[j * q + k] * l[j * q + k];
        }
        if !(d > tol) {
            return Err(j);
        }
        let d = libm::sqrt(d);
        l[j * q + j] = d;
        for i in j + 1..q {
            let mut s = a[i * q + j];
            for k in 0..j {
                s -= l[i * q + k] * l[j * q + k];
            }
            l[i * q + j] = s / d;
        }
    }
    Ok(l)
}

/// Solves (L Lᵀ) x = b in place.
pub(crate) fn cholesky_solve(l: &[f64], q: usize, b: &mut [f64]) {
    for i in 0..q {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * q + k] * b[k];
        }
        b[i] = s / l[i * q + i];
    }
    for i in (0..q).rev() {
        let mut s = b[i];
        for k in i + 1..q {
            s -= l[k * q + i] * b[k];
        }
        b[i] = s / l[i * q + i];
    }
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub(crate) fn cholesky_inverse(l: &[f64], q: usize) -> Vec<f64> {
    let mut inv = vec![0.0; q * q];
    let mut col = vec![0.0; q];
    for j in 0..q {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        cholesky_solve(l, q, &mut col);
        for i in 0..q {
            inv[i * q + j] = col[i];
        }
    }
    // symmetrize rounding noise
    for i in 0..q {
        for j in 0..i {
            let m = 0.5 * (inv[i * q + j] + inv[j * q + i]);
            inv[i * q + j] = m;
            inv[j * q + i] = m;
        }
    }
    inv
}

pub(crate) fn mat_vec(a: &[f64], q: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..q {
        out[i] = a[i * q..(i + 1) * q].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}
