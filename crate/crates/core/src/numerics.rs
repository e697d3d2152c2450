//! Small dense complex linear algebra: Hermitian checks, pivoted solves,
//! Schur complements and 2x2 block inversion.
//!
//! Everything here operates on matrices of at most a few tens of rows, so
//! storage is dense and condition numbers are computed exactly in the 1-norm
//! instead of estimated.

use std::ops::{Add, Deref, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Matrices whose reciprocal condition number falls below this value are
/// treated as singular.
pub const SINGULARITY_RCOND: f64 = 1e-12;

/// Dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl CMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(Self(m))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        Self::new(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major real/complex entries.
    pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self(DMatrix::identity(n, n) * C64::new(c, 0.0))
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn is_square(&self) -> bool {
        self.0.nrows() == self.0.ncols()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * C64::new(c, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Largest absolute column sum.
    pub fn norm1(&self) -> f64 {
        norm1(&self.0)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.0.shape(), other.0.shape());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "cannot invert a {}x{} matrix",
                self.0.nrows(),
                self.0.ncols()
            )));
        }
        let rc = rcond(self);
        if rc < SINGULARITY_RCOND {
            return Err(Error::SingularMatrix { rcond: rc });
        }
        let n = self.0.nrows();
        lu_solve(&self.0, &DMatrix::identity(n, n))
            .map(CMatrix)
            .ok_or(Error::SingularMatrix { rcond: 0.0 })
    }

    /// Solves `self * X = rhs` with a pivoted LU factorization.
    pub fn solve(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if !self.is_square() || self.0.nrows() != rhs.0.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "solve {:?} against {:?}",
                self.0.shape(),
                rhs.0.shape()
            )));
        }
        let rc = rcond(self);
        if rc < SINGULARITY_RCOND {
            return Err(Error::SingularMatrix { rcond: rc });
        }
        lu_solve(&self.0, &rhs.0)
            .map(CMatrix)
            .ok_or(Error::SingularMatrix { rcond: 0.0 })
    }
}

impl Deref for CMatrix {
    type Target = DMatrix<C64>;

    fn deref(&self) -> &DMatrix<C64> {
        &self.0
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;

    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn lu_solve(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

/// Reciprocal 1-norm condition number `1 / (|M|_1 |M^-1|_1)`; 0 when the
/// factorization breaks down.
pub fn rcond(m: &CMatrix) -> f64 {
    assert!(m.is_square(), "rcond of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    let norm = norm1(&m.0);
    if norm == 0.0 {
        return 0.0;
    }
    match lu_solve(&m.0, &DMatrix::identity(n, n)) {
        Some(inv) => 1.0 / (norm * norm1(&inv)),
        None => 0.0,
    }
}

/// Returns true iff `max |M - M^H| <= tol`.
pub fn hermitian_check(m: &CMatrix, tol: f64) -> Result<bool> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "hermitian check on a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.max_abs_diff(&m.adjoint()) <= tol)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    let herm = (&m.0 + m.0.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Four conformable blocks `[[A, B], [C, D]]` with square `A` (m x m) and `D` (p x p).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPartition {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub d: CMatrix,
}

impl BlockPartition {
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix, d: CMatrix) -> Result<Self> {
        let (m, p) = (a.nrows(), d.nrows());
        let ok = a.ncols() == m
            && d.ncols() == p
            && b.shape() == (m, p)
            && c.shape() == (p, m);
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "blocks A{:?} B{:?} C{:?} D{:?} are not conformable",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Splits a square matrix after its first `m` rows and columns.
    pub fn split(full: &CMatrix, m: usize) -> Result<Self> {
        let n = full.nrows();
        if !full.is_square() || m > n {
            return Err(Error::DimensionMismatch(format!(
                "cannot split {:?} at {m}",
                full.shape()
            )));
        }
        let p = n - m;
        let block = |r0, c0, r, c| CMatrix(full.view((r0, c0), (r, c)).into_owned());
        Ok(Self {
            a: block(0, 0, m, m),
            b: block(0, m, m, p),
            c: block(m, 0, p, m),
            d: block(m, m, p, p),
        })
    }

    pub fn leading_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn trailing_dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn assemble(&self) -> CMatrix {
        let (m, p) = (self.leading_dim(), self.trailing_dim());
        let mut full = DMatrix::zeros(m + p, m + p);
        full.view_mut((0, 0), (m, m)).copy_from(&self.a.0);
        full.view_mut((0, m), (m, p)).copy_from(&self.b.0);
        full.view_mut((m, 0), (p, m)).copy_from(&self.c.0);
        full.view_mut((m, m), (p, p)).copy_from(&self.d.0);
        CMatrix(full)
    }
}

/// `D - C A^-1 B`, with `A^-1 B` obtained from a pivoted solve.
pub fn schur_complement(part: &BlockPartition) -> Result<CMatrix> {
    let rc = rcond(&part.a);
    if rc < SINGULARITY_RCOND {
        return Err(Error::SingularBlock { rcond: rc });
    }
    let a_inv_b = part.a.solve(&part.b)?;
    Ok(&part.d - &(&part.c * &a_inv_b))
}

/// Inverse of the assembled matrix, returned in the same partition:
///
/// ```text
/// L = (D - C A^-1 B)^-1
/// J = -A^-1 B L
/// K = -L C A^-1
/// I = A^-1 + A^-1 B L C A^-1
/// ```
pub fn block_inverse(part: &BlockPartition) -> Result<BlockPartition> {
    let rc = rcond(&part.assemble());
    if rc < SINGULARITY_RCOND {
        return Err(Error::SingularMatrix { rcond: rc });
    }
    let ra = rcond(&part.a);
    if ra < SINGULARITY_RCOND {
        return Err(Error::SingularBlock { rcond: ra });
    }
    let a_inv = part.a.inverse()?;
    let a_inv_b = &a_inv * &part.b;
    let c_a_inv = &part.c * &a_inv;
    let schur = &part.d - &(&part.c * &a_inv_b);
    let l = schur.inverse()?;
    let j = -&(&a_inv_b * &l);
    let k = -&(&l * &c_a_inv);
    let i = &a_inv + &(&(&a_inv_b * &l) * &c_a_inv);
    Ok(BlockPartition { a: i, b: j, c: k, d: l })
}
