//! Covariate-only GLM fitted under the global null.
//!
//! Gaussian (identity link) and binomial (logit link) families are supported.
//! The fitted model carries everything the score statistics need: residuals
//! `Y - η̂₀`, the variance weights `Λ = diag(a(φ̂)·v(η̂₀))`, the covariates and
//! `(XᵀΛX)⁻¹`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 25;
const SEPARATION_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Binomial,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeVector {
    values: Vec<f64>,
    family: Family,
}

impl PhenotypeVector {
    pub fn new(values: Vec<f64>, family: Family) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidPhenotype(format!(
                "need at least 2 samples, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPhenotype(format!("non-finite value at sample {i}")));
        }
        if family == Family::Binomial {
            if let Some(i) = values.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidPhenotype(format!(
                    "binomial phenotype must be 0/1, sample {i} is {}",
                    values[i]
                )));
            }
            let cases = values.iter().filter(|&&v| v == 1.0).count();
            if cases == 0 || cases == values.len() {
                return Err(Error::InvalidPhenotype(
                    "binomial phenotype needs both cases and controls".to_string(),
                ));
            }
        }
        Ok(Self { values, family })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// n x q design matrix, column-major. The first column is always the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    n: usize,
    q: usize,
    data: Vec<f64>,
    names: Vec<String>,
}

impl CovariateMatrix {
    /// Builds a design from covariate columns, prepending an intercept unless
    /// one of the columns is already constant 1 (that column is moved first).
    pub fn new(n: usize, columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if columns.len() != names.len() {
            return Err(Error::DimensionMismatch {
                what: "covariate names",
                expected: columns.len(),
                found: names.len(),
            });
        }
        for (c, name) in columns.iter().zip(&names) {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "covariate column length",
                    expected: n,
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "covariate {name} has non-finite values"
                )));
            }
        }
        let mut columns = columns;
        let mut names = names;
        match columns.iter().position(|c| c.iter().all(|&v| v == 1.0)) {
            Some(0) => {}
            Some(k) => {
                let c = columns.remove(k);
                let nm = names.remove(k);
                columns.insert(0, c);
                names.insert(0, nm);
            }
            None => {
                columns.insert(0, vec![1.0; n]);
                names.insert(0, "intercept".to_string());
            }
        }
        let q = columns.len();
        let data = columns.into_iter().flatten().collect();
        Ok(Self { n, q, data, names })
    }

    pub fn intercept_only(n: usize) -> Self {
        Self {
            n,
            q: 1,
            data: vec![1.0; n],
            names: vec!["intercept".to_string()],
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_covariates(&self) -> usize {
        self.q
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    /// Rows reordered by `order` (new row k = old row order[k]).
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(order.len() * self.q);
        for j in 0..self.q {
            let col = self.column(j);
            data.extend(order.iter().map(|&i| col[i]));
        }
        Self {
            n: order.len(),
            q: self.q,
            data,
            names: self.names.clone(),
        }
    }

    /// Xᵀ diag(w) v
    pub(crate) fn xt_weighted(&self, w: Option<&[f64]>, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate().take(self.q) {
            let col = self.column(j);
            *o = match w {
                Some(w) => col.iter().zip(w).zip(v).map(|((x, w), v)| x * w * v).sum(),
                None => col.iter().zip(v).map(|(x, v)| x * v).sum(),
            };
        }
    }

    /// Xᵀ diag(w) X, row-major q x q.
    pub(crate) fn gram(&self, w: Option<&[f64]>) -> Vec<f64> {
        let q = self.q;
        let mut g = vec![0.0; q * q];
        for a in 0..q {
            for b in 0..=a {
                let (ca, cb) = (self.column(a), self.column(b));
                let s: f64 = match w {
                    Some(w) => ca.iter().zip(cb).zip(w).map(|((x, y), w)| x * y * w).sum(),
                    None => ca.iter().zip(cb).map(|(x, y)| x * y).sum(),
                };
                g[a * q + b] = s;
                g[b * q + a] = s;
            }
        }
        g
    }

    /// X a
    pub(crate) fn mul(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &aj) in a.iter().enumerate().take(self.q) {
            for (o, x) in out.iter_mut().zip(self.column(j)) {
                *o += x * aj;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullModel {
    pub family: Family,
    /// α̂
    pub alpha_hat: Vec<f64>,
    /// η̂₀ on the response scale.
    pub eta_hat: Vec<f64>,
    /// Diagonal of Λ: φ̂ for gaussian, η̂₀(1 − η̂₀) for binomial.
    pub weights: Vec<f64>,
    pub dispersion: f64,
    pub residuals: Vec<f64>,
    /// (XᵀΛX)⁻¹, row-major q x q.
    pub xtwx_inv: Vec<f64>,
    pub covariates: CovariateMatrix,
    pub iterations: usize,
}

impl NullModel {
    pub fn n_samples(&self) -> usize {
        self.residuals.len()
    }
}

fn singular(covar: &CovariateMatrix, column: usize) -> Error {
    Error::SingularDesign {
        column,
        name: covar.names()[column].clone(),
    }
}

#[inline]
fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn fit_null(pheno: &PhenotypeVector, covar: &CovariateMatrix) -> Result<NullModel> {
    let n = pheno.len();
    if covar.n_samples() != n {
        return Err(Error::DimensionMismatch {
            what: "covariate rows vs phenotype length",
            expected: n,
            found: covar.n_samples(),
        });
    }
    match pheno.family() {
        Family::Gaussian => fit_gaussian(pheno.values(), covar),
        Family::Binomial => fit_binomial(pheno.values(), covar),
    }
}

fn fit_gaussian(y: &[f64], covar: &CovariateMatrix) -> Result<NullModel> {
    let n = y.len();
    let q = covar.n_covariates();
    let gram = covar.gram(None);
    let l = linalg::cholesky(&gram, q).map_err(|j| singular(covar, j))?;
    let mut alpha = vec![0.0; q];
    covar.xt_weighted(None, y, &mut alpha);
    linalg::cholesky_solve(&l, q, &mut alpha);
    let eta = covar.mul(&alpha);
    let residuals: Vec<f64> = y.iter().zip(&eta).map(|(y, e)| y - e).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let phi = rss / n as f64;
    let scale = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(phi > 1e-24 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateVariance);
    }
    let mut xtwx_inv = linalg::cholesky_inverse(&l, q);
    xtwx_inv.iter_mut().for_each(|v| *v /= phi);
    Ok(NullModel {
        family: Family::Gaussian,
        alpha_hat: alpha,
        eta_hat: eta,
        weights: vec![phi; n],
        dispersion: phi,
        residuals,
        xtwx_inv,
        covariates: covar.clone(),
        iterations: 1,
    })
}

fn fit_binomial(y: &[f64], covar: &CovariateMatrix) -> Result<NullModel> {
    let n = y.len();
    let q = covar.n_covariates();
    let mut alpha = vec![0.0; q];
    let mut trace = Vec::new();
    let mut mu = vec![0.5; n];
    let mut w = vec![0.25; n];
    let mut rhs = vec![0.0; q];
    let mut work = vec![0.0; n];
    for iter in 1..=IRLS_MAX_ITER {
        // Newton step: (XᵀWX) δ = Xᵀ(y − μ)
        let gram = covar.gram(Some(&w));
        let l = linalg::cholesky(&gram, q).map_err(|j| singular(covar, j))?;
        for ((o, y), m) in work.iter_mut().zip(y).zip(&mu) {
            *o = y - m;
        }
        covar.xt_weighted(None, &work, &mut rhs);
        linalg::cholesky_solve(&l, q, &mut rhs);
        let delta = rhs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        for (a, d) in alpha.iter_mut().zip(&rhs) {
            *a += d;
        }
        trace.push(delta);
        let lin = covar.mul(&alpha);
        for ((m, wi), x) in mu.iter_mut().zip(w.iter_mut()).zip(&lin) {
            *m = expit(*x);
            *wi = *m * (1.0 - *m);
        }
        if let Some(i) = mu
            .iter()
            .position(|&m| !(SEPARATION_EPS..=1.0 - SEPARATION_EPS).contains(&m))
        {
            return Err(Error::Separation {
                sample: i,
                value: mu[i],
            });
        }
        if delta <= IRLS_TOL {
            let gram = covar.gram(Some(&w));
            let l = linalg::cholesky(&gram, q).map_err(|j| singular(covar, j))?;
            let residuals = y.iter().zip(&mu).map(|(y, m)| y - m).collect();
            return Ok(NullModel {
                family: Family::Binomial,
                alpha_hat: alpha,
                eta_hat: mu,
                weights: w,
                dispersion: 1.0,
                residuals,
                xtwx_inv: linalg::cholesky_inverse(&l, q),
                covariates: covar.clone(),
                iterations: iter,
            });
        }
    }
    Err(Error::Convergence {
        iterations: IRLS_MAX_ITER,
        last_delta: *trace.last().unwrap_or(&f64::NAN),
        trace,
    })
}
