use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Default relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex Hermitian matrix.
///
/// The stored matrix is exactly Hermitian: the lower triangle is the
/// conjugate of the upper triangle and the diagonal is real.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    data: DMatrix<C64>,
}

/// Eigen-decomposition with eigenvalues in ascending order.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: DMatrix<C64>,
}

impl HermitianMatrix {
    /// Validates `m` as Hermitian within [`HERMITIAN_TOL`] (relative to its
    /// largest entry) and stores its exact Hermitian part.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_TOL)
    }

    pub fn with_tolerance(m: DMatrix<C64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Domain("matrix dimension must be at least 1".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("matrix has non-finite entries".into()));
        }
        let deviation = hermitian_deviation(&m);
        if deviation > tol {
            return Err(Error::NotHermitian {
                deviation,
                tolerance: tol,
            });
        }
        Ok(Self::from_hermitian_part(m))
    }

    /// `(m + mᴴ)/2` with no tolerance check.
    pub fn from_hermitian_part(m: DMatrix<C64>) -> Self {
        let p = m.nrows();
        assert_eq!(p, m.ncols(), "matrix must be square");
        let mut data = m;
        for j in 0..p {
            data[(j, j)] = C64::new(data[(j, j)].re, 0.0);
            for k in (j + 1)..p {
                let upper = (data[(j, k)] + data[(k, j)].conj()) * 0.5;
                data[(j, k)] = upper;
                data[(k, j)] = upper.conj();
            }
        }
        Self { data }
    }

    /// Builds a matrix from its upper triangle. `f(j, k)` is called for
    /// `j <= k`; the imaginary part of diagonal values is dropped.
    pub fn from_upper(p: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(p >= 1, "matrix dimension must be at least 1");
        let mut data = DMatrix::zeros(p, p);
        for j in 0..p {
            data[(j, j)] = C64::new(f(j, j).re, 0.0);
            for k in (j + 1)..p {
                let z = f(j, k);
                data[(j, k)] = z;
                data[(k, j)] = z.conj();
            }
        }
        Self { data }
    }

    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "matrix dimension must be at least 1");
        Self {
            data: DMatrix::zeros(p, p),
        }
    }

    pub fn identity(p: usize) -> Self {
        Self::from_real_diagonal(&vec![1.0; p])
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_upper(diag.len(), |j, k| {
            if j == k {
                C64::new(diag[j], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `U diag(values) Uᴴ`.
    pub fn from_eigen(values: &[f64], vectors: &DMatrix<C64>) -> Self {
        let mut scaled = vectors.clone();
        for (i, &v) in values.iter().enumerate() {
            scaled.column_mut(i).scale_mut(v);
        }
        Self::from_hermitian_part(scaled * vectors.adjoint())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.data[(j, k)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.data[(j, j)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `self + s·I`.
    pub fn add_identity(&self, s: f64) -> Self {
        let mut data = self.data.clone();
        for j in 0..self.dim() {
            data[(j, j)].re += s;
        }
        Self { data }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            data: self.data.scale(a),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            data: &self.data - &other.data,
        }
    }

    /// Eigen-decomposition, eigenvalues ascending.
    pub fn eigh(&self) -> Eigh {
        let eig = SymmetricEigen::new(self.data.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        Eigh { values, vectors }
    }

    /// Eigenvalues in ascending order, without eigenvectors.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.data.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dimension >= 1")
    }

    /// `xᴴ M x`, real for Hermitian `M`.
    pub fn quadratic_form(&self, x: &DVector<C64>) -> f64 {
        (x.adjoint() * &self.data * x)[(0, 0)].re
    }

    /// Entry-wise closeness, used in tests and round-trip checks.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `max |m_jk − conj(m_kj)|` relative to the largest entry of `m`.
pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let p = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..p {
        for k in j..p {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst / scale
}
