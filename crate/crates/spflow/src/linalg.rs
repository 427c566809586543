//! Small dense linear-algebra services used by every other module:
//! symmetric matrices, Cholesky square roots, positive-definite repair,
//! Gaussian log-densities and stable log-space sums.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SpfError};
use crate::scalar::Real;

/// Symmetric real matrix. Inputs are symmetrized `(m + m^T)/2` on
/// construction so that downstream ODE integration cannot accumulate
/// asymmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> SymMatrix<T> {
    /// Build from an arbitrary square matrix, symmetrizing it.
    pub fn new(m: DMatrix<T>) -> Self {
        assert!(m.is_square(), "SymMatrix requires a square matrix");
        assert!(m.nrows() >= 1, "SymMatrix requires dim >= 1");
        let sym = (&m + m.transpose()) * T::of(0.5);
        Self { entries: sym }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        Self {
            entries: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    /// 1x1 convenience constructor.
    pub fn scalar(v: T) -> Self {
        Self {
            entries: DMatrix::from_element(1, 1, v),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.entries
    }

    pub fn trace(&self) -> T {
        self.entries.trace()
    }

    /// True when the matrix is exactly diagonal up to `tol` off-diagonal and
    /// all diagonal entries coincide; such matrices admit scalar shortcuts.
    pub fn isotropy(&self) -> Option<T> {
        let n = self.dim();
        let d0 = self.entries[(0, 0)];
        let tol = T::of(1e-14) * (T::one() + d0.abs());
        for i in 0..n {
            if (self.entries[(i, i)] - d0).abs() > tol {
                return None;
            }
            for j in 0..n {
                if i != j && self.entries[(i, j)].abs() > tol {
                    return None;
                }
            }
        }
        Some(d0)
    }

    /// Inverse through Cholesky; fails on non-PD input.
    pub fn try_inverse_pd(&self) -> Result<SymMatrix<T>> {
        let chol = nalgebra::Cholesky::new(self.entries.clone())
            .ok_or(SpfError::NotPositiveDefinite("inverse"))?;
        Ok(SymMatrix::new(chol.inverse()))
    }

    /// Solve `self * x = b` through Cholesky.
    pub fn solve_pd(&self, b: &DVector<T>) -> Result<DVector<T>> {
        let chol = nalgebra::Cholesky::new(self.entries.clone())
            .ok_or(SpfError::NotPositiveDefinite("solve"))?;
        Ok(chol.solve(b))
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;
    fn index(&self, idx: (usize, usize)) -> &T {
        &self.entries[idx]
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^T = m`.
///
/// Fails with [`SpfError::NotPositiveDefinite`] when a pivot is non-positive;
/// callers are expected to regularize first via [`nearest_pd`].
pub fn cholesky_sqrt<T: Real>(m: &SymMatrix<T>) -> Result<DMatrix<T>> {
    nalgebra::Cholesky::new(m.entries.clone())
        .map(|c| c.l())
        .ok_or(SpfError::NotPositiveDefinite("cholesky_sqrt"))
}

/// Scale-aware default eigenvalue floor: `1e-8 * max(1, trace/dim)`.
pub fn default_eig_floor<T: Real>(m: &SymMatrix<T>) -> T {
    let scale = (m.trace() / T::of(m.dim() as f64)).max(T::one());
    T::of(1e-8) * scale
}

/// Nearest positive-definite repair: eigenvalues clamped to `eig_floor`,
/// reconstructed with the original eigenvectors. Returns the input unchanged
/// when all eigenvalues already clear the floor, which minimizes the
/// Frobenius distance among eigenvalue-clamped reconstructions.
pub fn nearest_pd<T: Real>(m: &SymMatrix<T>, eig_floor: T) -> SymMatrix<T> {
    assert!(eig_floor > T::zero(), "eig_floor must be positive");
    let eig = nalgebra::SymmetricEigen::new(m.entries.clone());
    if eig.eigenvalues.iter().all(|&l| l >= eig_floor) {
        return m.clone();
    }
    let clamped = eig.eigenvalues.map(|l| l.max(eig_floor));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    SymMatrix::new(rebuilt)
}

/// Log of the multivariate normal density `N(x; mean, cov)`.
pub fn gaussian_logpdf<T: Real>(
    x: &DVector<T>,
    mean: &DVector<T>,
    cov: &SymMatrix<T>,
) -> Result<T> {
    assert_eq!(x.len(), mean.len(), "dimension mismatch");
    assert_eq!(x.len(), cov.dim(), "dimension mismatch");
    let chol = nalgebra::Cholesky::new(cov.entries.clone())
        .ok_or(SpfError::NotPositiveDefinite("gaussian_logpdf"))?;
    Ok(gaussian_logpdf_with(&chol, x, mean))
}

/// Same as [`gaussian_logpdf`] but reusing a precomputed factorization,
/// for the O(N^2) mixture evaluations.
pub fn gaussian_logpdf_with<T: Real>(
    chol: &nalgebra::Cholesky<T, nalgebra::Dyn>,
    x: &DVector<T>,
    mean: &DVector<T>,
) -> T {
    let n = x.len();
    let diff = x - mean;
    let solved = chol.solve(&diff);
    let maha = diff.dot(&solved);
    let log_det = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(T::zero(), |acc, &d| acc + d.ln())
        * T::of(2.0);
    -T::of(0.5) * (T::of(n as f64) * T::of(LN_2PI) + log_det + maha)
}

pub const LN_2PI: f64 = 1.8378770664093453;

/// log(sum(exp(v))) with max shift; empty or all -inf input yields -inf.
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let neg_inf = T::of(f64::NEG_INFINITY);
    let max = values.iter().copied().fold(neg_inf, |a, b| a.max(b));
    if max == neg_inf {
        return neg_inf;
    }
    let sum = values
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v - max).exp());
    max + sum.ln()
}

/// Convert log weights to normalized linear weights.
///
/// Fails with [`SpfError::AllWeightsZero`] when every entry is -inf.
pub fn normalize_log_weights<T: Real>(log_w: &[T]) -> Result<Vec<T>> {
    let ls = log_sum_exp(log_w);
    if !ls.is_finite() {
        return Err(SpfError::AllWeightsZero("normalize_log_weights"));
    }
    Ok(log_w.iter().map(|&w| (w - ls).exp()).collect())
}

/// Matrix exponential by scaling-and-squaring with a degree-6 Pade
/// approximant. Dimensions here are small (n_x <= ~12), so this is cheap.
pub fn expm<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    assert!(a.is_square());
    let n = a.nrows();
    let norm = a
        .iter()
        .fold(T::zero(), |acc, &v| acc + v.abs())
        .max(T::of(1e-30));
    let mut s = 0u32;
    let mut scale = T::one();
    // Scale so the norm is below 1/2 before the Pade step.
    while norm * scale > T::of(0.5) {
        s += 1;
        scale = scale * T::of(0.5);
    }
    let a_scaled = a * scale;

    // Pade(6,6): N(A)/D(A) with N = sum c_k A^k, D = N(-A).
    let coeffs = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let mut pow = DMatrix::<T>::identity(n, n);
    let mut num = DMatrix::<T>::identity(n, n) * T::of(coeffs[0]);
    let mut den = num.clone();
    let mut sign = T::one();
    for &c in coeffs.iter().skip(1) {
        pow = &pow * &a_scaled;
        sign = -sign;
        num += &pow * T::of(c);
        den += &pow * (T::of(c) * sign);
    }
    let mut result = den
        .lu()
        .solve(&num)
        .expect("Pade denominator is nonsingular for scaled input");
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
