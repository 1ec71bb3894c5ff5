//! Dense symmetric linear algebra: eigenvalues, p.s.d. square roots,
//! whitening, and the second-moment / Gram products built from sample
//! matrices.
//!
//! The eigensolver is nalgebra's symmetric tridiagonal QR; everything here
//! works on eigenvalues only and never pairs eigenvectors across matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt;

/// Relative eigenvalue tolerance. Absolute tolerance for a matrix `M` is
/// `TOL_EIG * max(1, ‖M‖₂)`.
pub const TOL_EIG: f64 = 1e-10;

/// Real symmetric matrix. Symmetry is exact: inputs are replaced by
/// `(A + Aᵀ)/2` on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be >= 1".into()));
        }
        Ok(Self { inner: symmetrize(m) })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_dmatrix(rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1);
        Self { inner: DMatrix::identity(dim, dim) }
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidInput("empty diagonal".into()));
        }
        Ok(Self { inner: DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(diag)) })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    /// `true` when every off-diagonal entry is zero.
    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| i == j || self.inner[(i, j)] == 0.0))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.inner.diagonal().iter().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|x| x.is_finite())
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_dmatrix(&self.inner)
    }

    pub fn to_csv(&self) -> String {
        dmatrix_to_csv(&self.inner)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::new(csv_to_dmatrix(text)?)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = MatrixJson::deserialize(d)?;
        json.to_dmatrix()
            .and_then(SymMatrix::new)
            .map_err(serde::de::Error::custom)
    }
}

/// `n × d` sample matrix; row `i` is the `i`-th observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    inner: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "data matrix must be at least 1x1, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { inner: m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_dmatrix(rows)?)
    }

    pub fn zeros(n: usize, d: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(n, d))
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn d(&self) -> usize {
        self.inner.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inner.row(i).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    /// Right-multiplies by a `d × d` factor: `X = Z·S`.
    pub fn times(&self, factor: &SymMatrix) -> Result<DataMatrix> {
        if factor.dim() != self.d() {
            return Err(Error::InvalidInput(format!(
                "factor is {}x{} but data has d = {}",
                factor.dim(),
                factor.dim(),
                self.d()
            )));
        }
        if factor.is_diagonal() {
            let mut out = self.inner.clone();
            for (j, mut col) in out.column_iter_mut().enumerate() {
                col *= factor.get(j, j);
            }
            return DataMatrix::new(out);
        }
        DataMatrix::new(&self.inner * factor.as_matrix())
    }

    /// Transposed copy (`d × n`).
    pub fn transpose(&self) -> DataMatrix {
        DataMatrix { inner: self.inner.transpose() }
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_dmatrix(&self.inner)
    }

    pub fn to_csv(&self) -> String {
        dmatrix_to_csv(&self.inner)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::new(csv_to_dmatrix(text)?)
    }
}

/// Eigenvalues in descending order (`values[0]` is `λ₁`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts the input descending. Ties keep their input order.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("spectrum contains non-finite values".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `λᵢ` with the 1-based index convention.
    pub fn lambda(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Clamps tiny negative values (down to `-tol`) to zero, as expected for
    /// spectra of p.s.d. matrices.
    pub fn clamp_psd(mut self, tol: f64) -> Self {
        for v in &mut self.values {
            if *v < 0.0 && *v >= -tol {
                *v = 0.0;
            }
        }
        self
    }
}

/// `{"rows": r, "cols": c, "data": [row-major]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_dmatrix(&self) -> Result<DMatrix<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::Parse(format!(
                "matrix declares {}x{} but has {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn rows_to_dmatrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidInput("ragged rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(n, d, &flat))
}

fn dmatrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|&x| fmt::float(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn csv_to_dmatrix(text: &str) -> Result<DMatrix<f64>> {
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad CSV field {f:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    rows_to_dmatrix(&rows)
}

/// Absolute eigenvalue tolerance for `m`.
pub fn tol_eig(spectral_norm: f64) -> f64 {
    TOL_EIG * spectral_norm.max(1.0)
}

/// All eigenvalues of `m`, descending.
pub fn sym_eigvals_desc(m: &SymMatrix) -> Result<Spectrum> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let vals = m.as_matrix().clone().symmetric_eigenvalues();
    Spectrum::new(vals.iter().copied().collect())
}

/// Eigen-decomposition with eigenvalues clamped on the p.s.d. boundary.
/// Returns `(eigenvalues, eigenvectors)` in the solver's order.
fn psd_eigen(m: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    let norm = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = tol_eig(norm);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPsd { min_eig: min });
    }
    let vals = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    Ok((vals, eig.eigenvectors))
}

fn reassemble(vals: &[f64], vecs: &DMatrix<f64>) -> Result<SymMatrix> {
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= vals[j];
    }
    SymMatrix::new(scaled * vecs.transpose())
}

/// Symmetric p.s.d. square root `S` with `S·S = M`.
pub fn psd_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let (vals, vecs) = psd_eigen(m)?;
    let roots: Vec<f64> = vals.iter().map(|v| v.sqrt()).collect();
    reassemble(&roots, &vecs)
}

/// Inverse square root `T` with `T·M·T = I`. Fails rather than
/// pseudo-inverting when `M` is singular to tolerance.
pub fn psd_inv_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let (vals, vecs) = psd_eigen(m)?;
    let norm = vals.iter().fold(0.0f64, |a, &v| a.max(v));
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= tol_eig(norm) {
        return Err(Error::Singular { min_eig: min });
    }
    let inv_roots: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
    reassemble(&inv_roots, &vecs)
}

/// `(1/n)·XᵀX`.
pub fn empirical_second_moment(x: &DataMatrix) -> SymMatrix {
    let m = x.as_matrix();
    let xtx = m.tr_mul(m) / x.n() as f64;
    SymMatrix { inner: symmetrize(xtx) }
}

/// `X·Xᵀ` (`n × n`).
pub fn gram(x: &DataMatrix) -> SymMatrix {
    let m = x.as_matrix();
    SymMatrix { inner: symmetrize(m * m.transpose()) }
}

/// The leading `min(n, d)` eigenvalues of `Σ̂ = (1/n)XᵀX`, computed on
/// whichever of `XᵀX` / `XXᵀ` is smaller. The remaining eigenvalues are zero.
pub fn empirical_top_spectrum(x: &DataMatrix) -> Result<Spectrum> {
    let (n, d) = (x.n(), x.d());
    let spec = if d <= n {
        sym_eigvals_desc(&empirical_second_moment(x))?
    } else {
        let g = gram(x);
        let scaled = SymMatrix { inner: g.inner / n as f64 };
        sym_eigvals_desc(&scaled)?
    };
    let tol = tol_eig(spec.max().abs());
    Ok(spec.clamp_psd(tol))
}

/// `‖M − I‖₂ = max |μ − 1|` over the eigenvalues `μ` of `M`.
pub fn deviation_from_identity(m: &SymMatrix) -> Result<f64> {
    let spec = sym_eigvals_desc(m)?;
    Ok((spec.max() - 1.0).abs().max((spec.min() - 1.0).abs()))
}

/// Weyl: every eigenvalue of `A` lies in `[1 − ‖A − I‖₂, 1 + ‖A − I‖₂]`.
pub fn weyl_sandwich(dev: f64) -> Result<(f64, f64)> {
    if !(dev >= 0.0) {
        return Err(Error::InvalidInput(format!("deviation must be >= 0, got {dev}")));
    }
    Ok((1.0 - dev, 1.0 + dev))
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(m: &SymMatrix) -> Result<f64> {
    let s = sym_eigvals_desc(m)?;
    Ok(s.max().abs().max(s.min().abs()))
}

/// `A − B` for equal-sized symmetric matrices.
pub fn sym_sub(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    SymMatrix::new(a.as_matrix() - b.as_matrix())
}

/// `c·A`.
pub fn sym_scale(a: &SymMatrix, c: f64) -> SymMatrix {
    SymMatrix { inner: &a.inner * c }
}

/// `A·B·A` for symmetric `A`, `B`, re-symmetrized.
pub fn sym_congruence(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    SymMatrix::new(a.as_matrix() * b.as_matrix() * a.as_matrix())
}
