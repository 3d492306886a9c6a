//! Smooth maps, charts, and the tangent/normal spaces they induce.
//!
//! A manifold near a base point is described either by an embedding
//! `H: W -> U` with `H(0) = base` and injective derivative ([`Chart`]), or by
//! a submersion `P: U -> X` whose zero set is the manifold ([`DualChart`]).
//! Tangent spaces come from `Range(∇H(w))`, normal spaces from
//! `Range(∇P(u)ᵀ)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, numerical_rank, Matrix, Subspace, Vector};
use crate::sampling::ball_samples;

pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Tolerance on `|H(0) - base|` and `|P(base)|`.
pub const BASE_TOL: f64 = 1e-12;

type EvalFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type JacFn = dyn Fn(&Vector) -> Matrix + Send + Sync;

/// A smooth map `R^in_dim -> R^out_dim`, optionally with an analytic Jacobian.
///
/// Without an analytic Jacobian, [`SmoothMap::jacobian`] falls back to
/// central finite differences with step `fd_step * (1 + |x|_inf)`.
#[derive(Clone)]
pub struct SmoothMap {
    eval: Arc<EvalFn>,
    jac: Option<Arc<JacFn>>,
    in_dim: usize,
    out_dim: usize,
    fd_step: f64,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("in_dim", &self.in_dim)
            .field("out_dim", &self.out_dim)
            .field("analytic_jacobian", &self.jac.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl SmoothMap {
    pub fn new<F>(in_dim: usize, out_dim: usize, eval: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            jac: None,
            in_dim,
            out_dim,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn with_fd_step(mut self, fd_step: f64) -> Self {
        assert!(fd_step > 0.0, "fd_step must be positive");
        self.fd_step = fd_step;
        self
    }

    /// Drops the analytic Jacobian, forcing finite differences.
    pub fn without_jacobian(mut self) -> Self {
        self.jac = None;
        self
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, |x| x.clone()).with_jacobian(move |_| Matrix::identity(n, n))
    }

    /// `x ↦ a x + b`.
    pub fn affine(a: Matrix, b: Vector) -> Self {
        assert_eq!(a.nrows(), b.len());
        let (m, n) = a.shape();
        let jac = a.clone();
        Self::new(n, m, move |x| &a * x + &b).with_jacobian(move |_| jac.clone())
    }

    pub fn linear(a: Matrix) -> Self {
        let m = a.nrows();
        Self::affine(a, Vector::zeros(m))
    }

    pub fn constant(in_dim: usize, value: Vector) -> Self {
        let m = value.len();
        Self::new(in_dim, m, move |_| value.clone())
            .with_jacobian(move |_| Matrix::zeros(m, in_dim))
    }

    pub fn zero(in_dim: usize, out_dim: usize) -> Self {
        Self::constant(in_dim, Vector::zeros(out_dim))
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    /// Evaluates the map, checking dimensions and finiteness.
    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                context: "map input",
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let y = (self.eval)(x);
        if y.len() != self.out_dim {
            return Err(Error::DimensionMismatch {
                context: "map output",
                expected: self.out_dim,
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("map value"));
        }
        Ok(y)
    }

    /// Jacobian at `x`: analytic when supplied, central differences otherwise.
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        match &self.jac {
            Some(jac) => {
                if x.len() != self.in_dim {
                    return Err(Error::DimensionMismatch {
                        context: "jacobian input",
                        expected: self.in_dim,
                        got: x.len(),
                    });
                }
                let j = jac(x);
                if j.shape() != (self.out_dim, self.in_dim) {
                    return Err(Error::DimensionMismatch {
                        context: "jacobian columns",
                        expected: self.in_dim,
                        got: j.ncols(),
                    });
                }
                if j.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("analytic jacobian"));
                }
                Ok(j)
            }
            None => fd_jacobian(self, x),
        }
    }

    /// Gradient of a scalar map (`out_dim == 1`).
    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        if self.out_dim != 1 {
            return Err(Error::DimensionMismatch {
                context: "gradient of scalar map",
                expected: 1,
                got: self.out_dim,
            });
        }
        Ok(self.jacobian(x)?.row(0).transpose())
    }

    /// `self ∘ inner`, with the chain-rule Jacobian.
    pub fn compose(&self, inner: &SmoothMap) -> Self {
        assert_eq!(inner.out_dim, self.in_dim, "compose dimension mismatch");
        let (outer_e, inner_e) = (self.clone(), inner.clone());
        let (outer_j, inner_j) = (self.clone(), inner.clone());
        Self::new(inner.in_dim, self.out_dim, move |x| {
            (outer_e.eval)(&(inner_e.eval)(x))
        })
        .with_jacobian(move |x| {
            let y = (inner_j.eval)(x);
            let jo = outer_j
                .jacobian(&y)
                .unwrap_or_else(|_| Matrix::from_element(outer_j.out_dim, outer_j.in_dim, f64::NAN));
            let ji = inner_j
                .jacobian(x)
                .unwrap_or_else(|_| Matrix::from_element(inner_j.out_dim, inner_j.in_dim, f64::NAN));
            jo * ji
        })
    }
}

/// Central-difference Jacobian of `m` at `x`.
///
/// Column `j` is `(m(x + h e_j) - m(x - h e_j)) / (2h)` with
/// `h = fd_step * (1 + |x|_inf)`.
pub fn fd_jacobian(m: &SmoothMap, x: &Vector) -> Result<Matrix> {
    if x.len() != m.in_dim {
        return Err(Error::DimensionMismatch {
            context: "fd_jacobian input",
            expected: m.in_dim,
            got: x.len(),
        });
    }
    let h = m.fd_step * (1.0 + inf_norm(x));
    let mut jac = Matrix::zeros(m.out_dim, m.in_dim);
    let mut xp = x.clone();
    for j in 0..m.in_dim {
        let xj = x[j];
        xp[j] = xj + h;
        let fp = m.eval(&xp);
        xp[j] = xj - h;
        let fm = m.eval(&xp);
        xp[j] = xj;
        let (fp, fm) = match (fp, fm) {
            (Ok(fp), Ok(fm)) => (fp, fm),
            (Err(e @ Error::DimensionMismatch { .. }), _)
            | (_, Err(e @ Error::DimensionMismatch { .. })) => return Err(e),
            _ => return Err(Error::EvaluationFailure { column: j }),
        };
        let col = (fp - fm) / (2.0 * h);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::EvaluationFailure { column: j });
        }
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// A manifold given locally by an embedding `H: W -> U` with `H(0) = base`.
#[derive(Debug, Clone)]
pub struct Chart {
    h: SmoothMap,
    base: Vector,
}

impl Chart {
    /// Builds the chart, rejecting it if `∇H(0)` is not injective.
    pub fn new(h: SmoothMap) -> Result<Self> {
        let w0 = Vector::zeros(h.in_dim());
        let base = h.eval(&w0)?;
        let jac = h.jacobian(&w0)?;
        let rank = numerical_rank(&jac, None);
        if rank != h.in_dim() {
            return Err(Error::ChartDegenerate {
                rank,
                expected: h.in_dim(),
            });
        }
        Ok(Self { h, base })
    }

    /// Builds the chart and checks that `H(0)` matches the claimed base point.
    pub fn with_base(h: SmoothMap, base: &Vector) -> Result<Self> {
        let chart = Self::new(h)?;
        let gap = (&chart.base - base).norm();
        if base.len() != chart.base.len() || gap > BASE_TOL {
            return Err(Error::PreconditionViolation(format!(
                "H(0) differs from the claimed base point by {gap:e}"
            )));
        }
        Ok(chart)
    }

    pub fn h(&self) -> &SmoothMap {
        &self.h
    }

    pub fn base(&self) -> &Vector {
        &self.base
    }

    /// `dim W`.
    pub fn dim(&self) -> usize {
        self.h.in_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.h.out_dim()
    }

    pub fn point(&self, w: &Vector) -> Result<Vector> {
        self.h.eval(w)
    }

    /// The same manifold, re-centered so that parameter 0 maps to `H(w0)`.
    pub fn recentered(&self, w0: &Vector) -> Result<Self> {
        let shift = SmoothMap::affine(Matrix::identity(w0.len(), w0.len()), w0.clone());
        Self::new(self.h.compose(&shift))
    }
}

/// A manifold given locally as the zero set of a submersion `P: U -> X`.
#[derive(Debug, Clone)]
pub struct DualChart {
    p: SmoothMap,
    base: Vector,
}

impl DualChart {
    /// Builds the dual chart, checking `P(base) = 0` and surjectivity of `∇P(base)`.
    pub fn new(p: SmoothMap, base: Vector) -> Result<Self> {
        let value = p.eval(&base)?;
        let residual = value.norm();
        if residual > BASE_TOL {
            return Err(Error::PreconditionViolation(format!(
                "|P(base)| = {residual:e} exceeds {BASE_TOL:e}"
            )));
        }
        let jac = p.jacobian(&base)?;
        let rank = numerical_rank(&jac, None);
        if rank != p.out_dim() {
            return Err(Error::ChartDegenerate {
                rank,
                expected: p.out_dim(),
            });
        }
        Ok(Self { p, base })
    }

    pub fn p(&self) -> &SmoothMap {
        &self.p
    }

    pub fn base(&self) -> &Vector {
        &self.base
    }

    /// `dim X`, the codimension of the manifold.
    pub fn codim(&self) -> usize {
        self.p.out_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.p.in_dim()
    }

    /// `|P(u)|`, the defect of `u` from lying on the manifold.
    pub fn defect(&self, u: &Vector) -> Result<f64> {
        Ok(self.p.eval(u)?.norm())
    }
}

/// `T_M(H(w)) = Range(∇H(w))`, orthonormalized.
pub fn tangent_space(c: &Chart, w: &Vector) -> Result<Subspace> {
    let jac = c.h.jacobian(w)?;
    let rank = numerical_rank(&jac, None);
    if rank != c.dim() {
        return Err(Error::ChartDegenerate {
            rank,
            expected: c.dim(),
        });
    }
    Ok(Subspace::range_of(&jac))
}

/// `N_M(u) = Range(∇P(u)ᵀ)`, orthonormalized.
pub fn normal_space(d: &DualChart, u: &Vector) -> Result<Subspace> {
    let jac = d.p.jacobian(u)?;
    let rank = numerical_rank(&jac, None);
    if rank != d.codim() {
        return Err(Error::ChartDegenerate {
            rank,
            expected: d.codim(),
        });
    }
    Ok(Subspace::range_of(&jac.transpose()))
}

/// Tangent space computed from the dual chart, as `Null(∇P(u))`.
pub fn tangent_space_dual(d: &DualChart, u: &Vector) -> Result<Subspace> {
    Ok(normal_space(d, u)?.complement())
}

/// Largest `|G(H(w)) - w|` over `samples` points drawn uniformly from the
/// parameter ball of `radius`.
pub fn chart_inverse_check(
    c: &Chart,
    g: &SmoothMap,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<f64> {
    if g.in_dim() != c.ambient_dim() || g.out_dim() != c.dim() {
        return Err(Error::DimensionMismatch {
            context: "chart inverse",
            expected: c.dim(),
            got: g.out_dim(),
        });
    }
    let mut worst = 0.0_f64;
    for w in ball_samples(c.dim(), radius, samples, seed) {
        let back = g.eval(&c.point(&w)?)?;
        worst = worst.max((back - w).norm());
    }
    Ok(worst)
}
