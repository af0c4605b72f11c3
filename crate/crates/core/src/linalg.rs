//! Dense complex Hermitian matrices.
//!
//! Every operator in the crate (states, effects, parent measurements, dual
//! witnesses) is a [`HermitianOperator`]. Dimensions are desk scale (at most a
//! few dozen), so everything is dense and eigenvalues come from a dense
//! Hermitian eigensolver.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Numerical tolerances threaded through the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max absolute deviation of a matrix from its conjugate transpose.
    pub herm_tol: f64,
    /// A matrix counts as PSD when its smallest eigenvalue is at least `-psd_tol`.
    pub psd_tol: f64,
    /// Entrywise tolerance for operator equalities (e.g. POVM completeness).
    pub eq_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm_tol: 1e-10,
            psd_tol: 1e-9,
            eq_tol: 1e-6,
        }
    }
}

/// A complex Hermitian matrix.
///
/// The stored matrix is exactly Hermitian: constructors check the input
/// against `herm_tol` and then replace it with its Hermitian part.
#[derive(Clone, PartialEq)]
pub struct HermitianOperator {
    m: DMatrix<C64>,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianOperator{}", self.m)
    }
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).map(|z| z * 0.5)
}

fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

impl HermitianOperator {
    /// Checks squareness and Hermiticity against `herm_tol`.
    pub fn new(m: DMatrix<C64>, herm_tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Invalid("operator dimension must be positive".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("non-finite matrix entry".into()));
        }
        let deviation = hermiticity_deviation(&m);
        if deviation > herm_tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(HermitianOperator { m: hermitian_part(&m) })
    }

    /// Takes the Hermitian part of `m` without checking how far it was from Hermitian.
    pub fn hermitize(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "hermitize needs a square matrix");
        HermitianOperator { m: hermitian_part(m) }
    }

    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>], herm_tol: f64) -> Result<Self> {
        let n = re.len();
        if im.len() != n {
            return Err(Error::Shape(format!(
                "real part has {n} rows, imaginary part has {}",
                im.len()
            )));
        }
        for (i, (r, s)) in re.iter().zip(im).enumerate() {
            if r.len() != n || s.len() != n {
                return Err(Error::Shape(format!("row {i} is not of length {n}")));
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(re[i][j], im[i][j]));
        Self::new(m, herm_tol)
    }

    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("real matrix is not square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::new(m, Tolerances::default().herm_tol)
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        HermitianOperator {
            m: DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    C64::new(values[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }

    /// Rank-one projector onto the normalization of `psi`.
    pub fn projector(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(Error::Invalid("projector of a zero vector".into()));
        }
        let n = psi.len();
        let m = DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / norm2);
        Ok(HermitianOperator::hermitize(&m))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        HermitianOperator {
            m: self.m.map(|z| z * factor),
        }
    }

    /// Sum of a non-empty list of operators of equal dimension.
    pub fn sum<'a, I>(dim: usize, ops: I) -> Self
    where
        I: IntoIterator<Item = &'a HermitianOperator>,
    {
        let mut acc = DMatrix::zeros(dim, dim);
        for op in ops {
            assert_eq!(op.dim(), dim, "sum over operators of different dimension");
            acc += &op.m;
        }
        HermitianOperator { m: acc }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order with matching eigenvectors as columns.
    pub fn eigh(&self) -> (Vec<f64>, DMatrix<C64>) {
        let eig = self.m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().0
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `f` to the spectrum: `V diag(f(λ)) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let (values, vectors) = self.eigh();
        let n = self.dim();
        let d = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(f(values[i]), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        HermitianOperator::hermitize(&(&vectors * d * vectors.adjoint()))
    }

    /// Projection onto the PSD cone (negative eigenvalues set to zero).
    pub fn psd_part(&self) -> Self {
        self.map_spectrum(|x| x.max(0.0))
    }

    /// Inverse square root of a positive definite operator.
    pub fn inv_sqrt(&self, floor: f64) -> Result<Self> {
        let min = psd_residual(self);
        if min <= floor {
            return Err(Error::Numeric(format!(
                "inverse square root of an operator with smallest eigenvalue {min:.3e}"
            )));
        }
        Ok(self.map_spectrum(|x| 1.0 / x.sqrt()))
    }

    /// `s · self · s` for Hermitian `s`.
    pub fn sandwich(&self, s: &HermitianOperator) -> Self {
        HermitianOperator::hermitize(&(&s.m * &self.m * &s.m))
    }

    /// `tr_B[self · (I ⊗ op)]` for `self` acting on `C^dim_a ⊗ C^dim_b`.
    pub fn contract_second(&self, dim_a: usize, dim_b: usize, op: &HermitianOperator) -> Result<Self> {
        self.check_bipartite(dim_a, dim_b)?;
        check_dim(dim_b, op.dim())?;
        let m = DMatrix::from_fn(dim_a, dim_a, |i, ip| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..dim_b {
                for jp in 0..dim_b {
                    acc += self.m[(i * dim_b + j, ip * dim_b + jp)] * op.m[(jp, j)];
                }
            }
            acc
        });
        Ok(HermitianOperator::hermitize(&m))
    }

    /// `tr_A[self · (op ⊗ I)]` for `self` acting on `C^dim_a ⊗ C^dim_b`.
    pub fn contract_first(&self, dim_a: usize, dim_b: usize, op: &HermitianOperator) -> Result<Self> {
        self.check_bipartite(dim_a, dim_b)?;
        check_dim(dim_a, op.dim())?;
        let m = DMatrix::from_fn(dim_b, dim_b, |j, jp| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..dim_a {
                for ip in 0..dim_a {
                    acc += self.m[(i * dim_b + j, ip * dim_b + jp)] * op.m[(ip, i)];
                }
            }
            acc
        });
        Ok(HermitianOperator::hermitize(&m))
    }

    fn check_bipartite(&self, dim_a: usize, dim_b: usize) -> Result<()> {
        check_dim(dim_a * dim_b, self.dim())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Tensor product; entry `((i,j),(k,l))` is `a[i,k]·b[j,l]`.
pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator { m: a.m.kronecker(&b.m) }
}

/// Tensor product of a non-empty list of operators, left to right.
pub fn kron_all<'a, I>(ops: I) -> HermitianOperator
where
    I: IntoIterator<Item = &'a HermitianOperator>,
{
    let mut iter = ops.into_iter();
    let first = iter.next().expect("kron_all of an empty list").clone();
    iter.fold(first, |acc, op| kron(&acc, op))
}

/// `tr[a·b]`, real for Hermitian arguments.
pub fn frob_inner(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(trace_product(a, b))
}

pub(crate) fn trace_product(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    let n = a.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a.m[(i, j)] * b.m[(j, i)];
        }
    }
    debug_assert!(
        acc.im.abs() <= 1e-10 * (1.0 + a.max_abs_entry() * b.max_abs_entry() * (n * n) as f64),
        "trace of a product of Hermitian matrices has imaginary part {}",
        acc.im
    );
    acc.re
}

/// Smallest eigenvalue.
pub fn psd_residual(a: &HermitianOperator) -> f64 {
    a.m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_psd(a: &HermitianOperator, tol: &Tolerances) -> bool {
    psd_residual(a) >= -tol.psd_tol
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "adding operators of different dimension");
        HermitianOperator { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "subtracting operators of different dimension");
        HermitianOperator { m: &self.m - &rhs.m }
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

/// Wire format: `{"re": [[...]], "im": [[...]]}`, row-major.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for HermitianOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let re = (0..n).map(|i| (0..n).map(|j| self.m[(i, j)].re).collect()).collect();
        let im = (0..n).map(|i| (0..n).map(|j| self.m[(i, j)].im).collect()).collect();
        MatrixRepr { re, im }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        HermitianOperator::from_parts(&repr.re, &repr.im, Tolerances::default().herm_tol).map_err(D::Error::custom)
    }
}
