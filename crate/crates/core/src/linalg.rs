//! Dense linear-algebra helpers: numerical rank and orthonormal subspaces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Tolerance used when checking that a basis is orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Default rank threshold `max(rows, cols) * eps * sigma_max`.
pub fn default_rank_tol(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sigma_max = a.singular_values().max();
    a.nrows().max(a.ncols()) as f64 * f64::EPSILON * sigma_max
}

/// Number of singular values of `a` strictly above `tol`.
///
/// The default threshold is `max(rows, cols) * eps * sigma_max`. The zero
/// matrix (and any matrix with an empty dimension) has rank 0.
pub fn numerical_rank(a: &Matrix, tol: Option<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.singular_values();
    let sigma_max = sv.max();
    let tol = tol.unwrap_or(a.nrows().max(a.ncols()) as f64 * f64::EPSILON * sigma_max);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis of `Range(a)` of the given dimension, computed with
/// column-pivoted QR. `rank` must not exceed `min(rows, cols)`.
fn range_basis_with_rank(a: &Matrix, rank: usize) -> Matrix {
    let n = a.nrows();
    if rank == 0 || a.ncols() == 0 {
        return Matrix::zeros(n, 0);
    }
    let q = a.clone().col_piv_qr().q();
    q.columns(0, rank).into_owned()
}

/// A linear subspace of `R^ambient_dim`, stored as an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    /// Wraps a basis that is already orthonormal, validating `BᵀB = I`.
    pub fn from_orthonormal(basis: Matrix) -> Result<Self> {
        let k = basis.ncols();
        let gram = basis.transpose() * &basis;
        let err = (gram - Matrix::identity(k, k)).amax();
        if k > 0 && err > ORTHONORMAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "basis is not orthonormal (|BᵀB - I| = {err:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// The range of `a`, with the rank decided by [`numerical_rank`].
    pub fn range_of(a: &Matrix) -> Self {
        let rank = numerical_rank(a, None);
        Self {
            basis: range_basis_with_rank(a, rank),
        }
    }

    /// The null space of `a` (a subspace of `R^{a.ncols()}`).
    pub fn null_space_of(a: &Matrix) -> Self {
        Self::range_of(&a.transpose()).complement()
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            basis: Matrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            basis: Matrix::identity(ambient_dim, ambient_dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, v: &Vector) -> Vector {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Distance from `v` to the subspace.
    pub fn distance(&self, v: &Vector) -> f64 {
        (v - self.project(v)).norm()
    }

    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self) -> Self {
        let n = self.ambient_dim();
        let k = self.dim();
        if k == 0 {
            return Self::full(n);
        }
        if k == n {
            return Self::zero(n);
        }
        let residual = Matrix::identity(n, n) - self.projector();
        Self {
            basis: range_basis_with_rank(&residual, n - k),
        }
    }

    /// Largest `|⟨a, b⟩|` over basis vectors of the two subspaces.
    pub fn max_cross_inner(&self, other: &Subspace) -> f64 {
        if self.dim() == 0 || other.dim() == 0 {
            return 0.0;
        }
        (self.basis.transpose() * &other.basis).amax()
    }

    /// Dimension of the intersection with `other`, via the rank of the
    /// stacked bases: `dim(A ∩ B) = dim A + dim B - rank [A | B]`.
    pub fn intersection_dim(&self, other: &Subspace) -> usize {
        let stacked = hstack(&self.basis, &other.basis);
        self.dim() + other.dim() - numerical_rank(&stacked, Some(1e-8))
    }

    /// Sine of the largest principal angle between equal-dimension subspaces
    /// (0 when they coincide).
    pub fn gap(&self, other: &Subspace) -> f64 {
        (self.projector() - other.projector()).norm()
    }
}

/// `[a | b]` column concatenation. Both must have the same number of rows.
pub fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// `[a; b]` row concatenation. Both must have the same number of columns.
pub fn vstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.ncols(), b.ncols(), "vstack column mismatch");
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

pub fn concat(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Splits `v` into its first `k` entries and the rest.
pub fn split(v: &Vector, k: usize) -> (Vector, Vector) {
    (
        v.rows(0, k).into_owned(),
        v.rows(k, v.len() - k).into_owned(),
    )
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Spectral norm estimate of `a` by power iteration on `aᵀa`, started from a
/// fixed pseudo-random unit vector so the result is deterministic.
pub fn power_norm(a: &Matrix, iters: usize) -> f64 {
    use rand::{Rng, SeedableRng};
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = Vector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    x /= x.norm();
    let mut sigma = 0.0;
    for _ in 0..iters {
        let y = a.transpose() * (a * &x);
        let norm = y.norm();
        if norm == 0.0 {
            break;
        }
        x = y / norm;
        sigma = (a * &x).norm();
    }
    sigma
}
