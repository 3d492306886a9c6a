//! Smooth objectives restricted to an embedded manifold, viewed as the
//! extended-valued function `f̃ = f` on `M`, `+∞` off `M`.
//!
//! Here `∂f̃(u) = ∇_M f(u) + N_M(u)` for `u ∈ M`. At a critical point `ū`
//! the graph of `∂f̃` meets `U × {0}` transversally exactly when the
//! covariant Hessian has trivial kernel; quadratic growth needs it positive
//! definite.

use nalgebra::{SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::graph::{check_charts_consistent, nan_vector, CoordGraphRep, NEWTON_MAX_ITER};
use crate::linalg::{hstack, numerical_rank, split, vstack, Matrix, Subspace, Vector};
use crate::manifold::{normal_space, Chart, DualChart, SmoothMap};
use crate::sampling::ball_samples;

/// `|P(u)|` above this means `u` is not on the manifold.
pub const ON_MANIFOLD_TOL: f64 = 1e-8;
/// Largest `|∇_M f(u)|` accepted as a critical point.
pub const CRITICAL_TOL: f64 = 1e-6;
/// Smallest Hessian eigenvalue counted as positive.
pub const SECOND_ORDER_TOL: f64 = 1e-8;
const HESSIAN_FD_STEP: f64 = 1e-5;
const INTERSECTION_RANK_TOL: f64 = 1e-8;

/// A scalar function `f: U -> R` restricted to the manifold described by
/// a matching chart / dual chart pair.
#[derive(Debug, Clone)]
pub struct ManifoldObjective {
    chart: Chart,
    dual: DualChart,
    f: SmoothMap,
}

impl ManifoldObjective {
    pub fn new(chart: Chart, dual: DualChart, f: SmoothMap) -> Result<Self> {
        if chart.ambient_dim() != dual.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "chart and dual chart ambient dimension",
                expected: chart.ambient_dim(),
                got: dual.ambient_dim(),
            });
        }
        if f.in_dim() != chart.ambient_dim() || f.out_dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "objective f: U -> R",
                expected: chart.ambient_dim(),
                got: f.in_dim(),
            });
        }
        check_charts_consistent(&dual, &chart)?;
        Ok(Self { chart, dual, f })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dual(&self) -> &DualChart {
        &self.dual
    }

    pub fn f(&self) -> &SmoothMap {
        &self.f
    }

    pub fn ambient_dim(&self) -> usize {
        self.chart.ambient_dim()
    }

    pub fn manifold_dim(&self) -> usize {
        self.chart.dim()
    }

    fn require_on_manifold(&self, u: &Vector) -> Result<()> {
        if u.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "point in U",
                expected: self.ambient_dim(),
                got: u.len(),
            });
        }
        let distance = self.dual.defect(u)?;
        if !(distance <= ON_MANIFOLD_TOL) {
            return Err(Error::OffManifold { distance });
        }
        Ok(())
    }

    /// Chart parameter `w` with `H(w) = u`, by Gauss-Newton from `w = 0`,
    /// restarted from a fixed set of wider starting points if that fails.
    pub fn chart_param(&self, u: &Vector) -> Result<Vector> {
        let k = self.chart.dim();
        let mut starts = vec![Vector::zeros(k)];
        for (i, radius) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
            starts.extend(ball_samples(k, radius, 8, 0xC0DE + i as u64));
        }
        let mut best = f64::INFINITY;
        for w0 in starts {
            match self.gauss_newton(u, w0) {
                Ok(w) => return Ok(w),
                Err(Error::NewtonFailure { residual }) => best = best.min(residual),
                Err(e) => return Err(e),
            }
        }
        Err(Error::NewtonFailure { residual: best })
    }

    fn gauss_newton(&self, u: &Vector, mut w: Vector) -> Result<Vector> {
        let mut residual = u - self.chart.point(&w)?;
        for _ in 0..NEWTON_MAX_ITER {
            if residual.norm() <= 1e-14 * (1.0 + u.norm()) {
                break;
            }
            let jac = self.chart.h().jacobian(&w)?;
            let step = SVD::new(jac, true, true)
                .solve(&residual, 1e-14)
                .map_err(|e| Error::Degenerate(e.to_string()))?;
            w += step;
            residual = match self.chart.point(&w) {
                Ok(x) => u - x,
                Err(_) => return Err(Error::NewtonFailure { residual: f64::INFINITY }),
            };
        }
        let r = residual.norm();
        if !(r <= ON_MANIFOLD_TOL) {
            return Err(Error::NewtonFailure { residual: r });
        }
        Ok(w)
    }
}

/// `∇f(u)` minus its component along `Range ∇P(u)ᵀ`.
fn tangential_part(p: &SmoothMap, u: &Vector, grad: Vector) -> Result<Vector> {
    if p.out_dim() == 0 {
        return Ok(grad);
    }
    let jp = p.jacobian(u)?;
    let gram = &jp * jp.transpose();
    let coef = gram
        .cholesky()
        .ok_or_else(|| Error::Degenerate("∇P(u) is not surjective".into()))?
        .solve(&(&jp * &grad));
    Ok(grad - jp.transpose() * coef)
}

/// Orthogonal projection of the ambient gradient onto `T_M(u)`.
pub fn covariant_gradient(mo: &ManifoldObjective, u: &Vector) -> Result<Vector> {
    mo.require_on_manifold(u)?;
    tangential_part(mo.dual.p(), u, mo.f.gradient(u)?)
}

/// The covariant Hessian at a critical point, as a symmetric matrix in an
/// orthonormal basis of the tangent space.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariantHessian {
    /// `n × k` orthonormal basis of `T_M(u)`.
    pub basis: Matrix,
    /// `k × k` symmetric matrix in that basis.
    pub matrix: Matrix,
}

impl CovariantHessian {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.matrix.is_empty() {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `+∞` on a zero-dimensional manifold.
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::INFINITY)
    }

    /// The map as an operator on `U`, zero on the normal space.
    pub fn ambient(&self) -> Matrix {
        &self.basis * &self.matrix * self.basis.transpose()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }
}

/// Covariant Hessian at a critical point `u`: the Hessian of `f∘H` at the
/// chart parameter of `u`, expressed in the orthonormal basis obtained from
/// a QR factorization of `∇H`.
///
/// Fails with [`Error::PreconditionViolation`] if `|∇_M f(u)| > 1e-6`.
pub fn covariant_hessian(mo: &ManifoldObjective, u: &Vector) -> Result<CovariantHessian> {
    let grad = covariant_gradient(mo, u)?;
    if grad.norm() > CRITICAL_TOL {
        return Err(Error::PreconditionViolation(format!(
            "u is not a critical point: |covariant gradient| = {:e}",
            grad.norm()
        )));
    }
    let w = mo.chart_param(u)?;
    let k = w.len();
    let h = mo.chart.h();
    let jac = h.jacobian(&w)?;
    let n = jac.nrows();
    if k == 0 {
        return Ok(CovariantHessian {
            basis: Matrix::zeros(n, 0),
            matrix: Matrix::zeros(0, 0),
        });
    }

    let param_grad = |w: &Vector| -> Result<Vector> {
        let u = h.eval(w)?;
        Ok(h.jacobian(w)?.transpose() * mo.f.gradient(&u)?)
    };
    let step = HESSIAN_FD_STEP * (1.0 + w.amax());
    let mut coord = Matrix::zeros(k, k);
    for j in 0..k {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[j] += step;
        wm[j] -= step;
        let col = (param_grad(&wp)? - param_grad(&wm)?) / (2.0 * step);
        coord.set_column(j, &col);
    }
    let coord = (&coord + coord.transpose()) * 0.5;

    let qr = jac.qr();
    let r_inv = qr
        .r()
        .try_inverse()
        .ok_or(Error::ChartDegenerate { rank: numerical_rank(&qr.r(), None), expected: k })?;
    let matrix = r_inv.transpose() * coord * &r_inv;
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(CovariantHessian {
        basis: qr.q(),
        matrix,
    })
}

/// True iff the covariant Hessian at the critical point `u` is positive
/// definite (smallest eigenvalue above `1e-8`).
pub fn second_order_check(mo: &ManifoldObjective, u: &Vector) -> Result<bool> {
    Ok(covariant_hessian(mo, u)?.min_eigenvalue() > SECOND_ORDER_TOL)
}

/// Sampled quadratic growth `f(H(w)) ≥ f(ū) + δ |H(w) - ū|²` around a
/// critical point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGrowth {
    /// Half the smallest covariant Hessian eigenvalue.
    pub delta_bound: f64,
    /// Smallest observed ratio `(f(H(w)) - f(ū)) / |H(w) - ū|²`.
    pub empirical_delta: f64,
    pub radius: f64,
    pub n_samples: usize,
}

impl QuadraticGrowth {
    pub fn holds_with(&self, delta: f64) -> bool {
        self.empirical_delta >= delta
    }
}

/// Samples chart parameters uniformly in the ball of `radius` around the
/// parameter of `u` and reports the empirical growth constant.
pub fn quadratic_growth(
    mo: &ManifoldObjective,
    u: &Vector,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<QuadraticGrowth> {
    let hess = covariant_hessian(mo, u)?;
    let w0 = mo.chart_param(u)?;
    let f0 = mo.f.eval(u)?[0];
    let mut empirical_delta = f64::INFINITY;
    for dw in ball_samples(w0.len(), radius, n_samples, seed) {
        let x = mo.chart.point(&(&w0 + dw))?;
        let dist2 = (&x - u).norm_squared();
        if dist2 > 0.0 {
            empirical_delta = empirical_delta.min((mo.f.eval(&x)?[0] - f0) / dist2);
        }
    }
    Ok(QuadraticGrowth {
        delta_bound: 0.5 * hess.min_eigenvalue(),
        empirical_delta,
        radius,
        n_samples,
    })
}

/// Coordinate representation of `gph ∂f̃` near `(ū, v̄)`:
/// `H` is the chart re-centered at `ū` and
/// `G(w, z) = ∇_M f(H(w)) + ∇P(H(w))ᵀ (x̄ + z)`.
///
/// Requires `v̄ - ∇_M f(ū) ∈ N_M(ū)`.
pub fn extended_subdiff_rep(mo: &ManifoldObjective, u_bar: &Vector, v_bar: &Vector) -> Result<CoordGraphRep> {
    let grad = covariant_gradient(mo, u_bar)?;
    if v_bar.len() != mo.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "v̄",
            expected: mo.ambient_dim(),
            got: v_bar.len(),
        });
    }
    let p = mo.dual.p().clone();
    let x_dim = p.out_dim();
    let normal_part = v_bar - &grad;
    let x_bar = if x_dim == 0 {
        Vector::zeros(0)
    } else {
        let jpt = p.jacobian(u_bar)?.transpose();
        SVD::new(jpt.clone(), true, true)
            .solve(&normal_part, 1e-14)
            .map_err(|e| Error::Degenerate(e.to_string()))?
    };
    let miss = if x_dim == 0 {
        normal_part.norm()
    } else {
        (p.jacobian(u_bar)?.transpose() * &x_bar - &normal_part).norm()
    };
    if miss > ON_MANIFOLD_TOL {
        return Err(Error::PreconditionViolation(format!(
            "v̄ - covariant gradient is not normal to M (off by {miss:e})"
        )));
    }

    let chart = mo.chart.recentered(&mo.chart_param(u_bar)?)?;
    let h = chart.h().clone();
    let (w_dim, n) = (chart.dim(), mo.ambient_dim());
    let f = mo.f.clone();
    let g = SmoothMap::new(w_dim + x_dim, n, move |wz| {
        let (w, z) = split(wz, w_dim);
        let value = || -> Result<Vector> {
            let u = h.eval(&w)?;
            let tangential = tangential_part(&p, &u, f.gradient(&u)?)?;
            if x_dim == 0 {
                return Ok(tangential);
            }
            Ok(tangential + p.jacobian(&u)?.transpose() * (&x_bar + z))
        };
        value().unwrap_or_else(|_| nan_vector(n))
    });
    CoordGraphRep::new(chart.h().clone(), g)
}

/// `{(z, w) ∈ U × U : w ∈ T_M(ū), z + ∇²_M f(ū) w ∈ N_M(ū)}` at a critical
/// point `ū`.
pub fn graph_normal_space(mo: &ManifoldObjective, u_bar: &Vector) -> Result<Subspace> {
    let hess = covariant_hessian(mo, u_bar)?;
    let normal = normal_space(&mo.dual, u_bar)?;
    let b = &hess.basis;
    let tangent_part = vstack(&(-(b * &hess.matrix)), b);
    let normal_part = vstack(normal.basis(), &Matrix::zeros(mo.ambient_dim(), normal.dim()));
    Ok(Subspace::range_of(&hstack(&tangent_part, &normal_part)))
}

/// Dimension of `graph_normal_space(ū) ∩ ({0} × U)`.
pub fn normal_intersection_dim(mo: &ManifoldObjective, u_bar: &Vector) -> Result<usize> {
    let gn = graph_normal_space(mo, u_bar)?;
    let n = mo.ambient_dim();
    let axis = vstack(&Matrix::zeros(n, n), &Matrix::identity(n, n));
    let stacked = hstack(gn.basis(), &axis);
    Ok(stacked.ncols() - numerical_rank(&stacked, Some(INTERSECTION_RANK_TOL)))
}

/// Whether `gph ∂f̃` meets `U × {0}` transversally at `(ū, 0)`: the graph
/// normal space and `{0} × U` intersect only in the origin.
pub fn transversality_check(mo: &ManifoldObjective, u_bar: &Vector) -> Result<bool> {
    Ok(normal_intersection_dim(mo, u_bar)? == 0)
}

/// Sampled search for other zeros of `∂f̃` near a transversal intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationReport {
    pub radius: f64,
    pub n_samples: usize,
    /// Samples away from `ū` with `|∇_M f| ≤ 1e-8`.
    pub other_zeros: usize,
    /// Smallest `|∇_M f(u)| / |u - ū|` over the samples.
    pub min_ratio: f64,
}

impl IsolationReport {
    pub fn is_isolated(&self) -> bool {
        self.other_zeros == 0
    }
}

/// Evaluates `dist(0, ∂f̃(u)) = |∇_M f(u)|` at `n_samples` manifold points
/// `H(w̄ + dw)`, `|dw| ≤ radius`, counting near-zeros distinct from `ū`.
pub fn isolation_check(
    mo: &ManifoldObjective,
    u_bar: &Vector,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<IsolationReport> {
    let w0 = mo.chart_param(u_bar)?;
    let mut other_zeros = 0;
    let mut min_ratio = f64::INFINITY;
    for dw in ball_samples(w0.len(), radius, n_samples, seed) {
        let u = mo.chart.point(&(&w0 + dw))?;
        let dist = (&u - u_bar).norm();
        if dist <= 1e-12 {
            continue;
        }
        let residual = tangential_part(mo.dual.p(), &u, mo.f.gradient(&u)?)?.norm();
        if residual <= ON_MANIFOLD_TOL {
            other_zeros += 1;
        }
        min_ratio = min_ratio.min(residual / dist);
    }
    Ok(IsolationReport {
        radius,
        n_samples,
        other_zeros,
        min_ratio,
    })
}

/// Least-norm Newton projection onto `{P = 0}`.
fn project_onto_manifold(p: &SmoothMap, u: &Vector) -> Result<Vector> {
    let mut u = u.clone();
    if p.out_dim() == 0 {
        return Ok(u);
    }
    for _ in 0..NEWTON_MAX_ITER {
        let value = p.eval(&u)?;
        if value.norm() <= 1e-14 {
            break;
        }
        let step = SVD::new(p.jacobian(&u)?, true, true)
            .solve(&value, 1e-14)
            .map_err(|e| Error::Degenerate(e.to_string()))?;
        u -= step;
    }
    Ok(u)
}

/// Projected gradient descent on `M`: `u ← proj_M(u - t ∇_M f(u))`, stopping
/// once `|∇_M f(u)| ≤ tol`. Returns the final point.
pub fn projected_gradient_descent(
    mo: &ManifoldObjective,
    u0: &Vector,
    step: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Vector> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let p = mo.dual.p();
    let mut u = project_onto_manifold(p, u0)?;
    for iteration in 0..max_iter {
        let grad = covariant_gradient(mo, &u)?;
        if grad.norm() <= tol {
            return Ok(u);
        }
        u = project_onto_manifold(p, &(&u - grad * step))?;
        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence { iteration });
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::constant_rank_probe;
    use crate::linalg::concat;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn circle_dual_at(base: Vector) -> DualChart {
        DualChart::new(
            SmoothMap::new(2, 1, |u| v(&[u[0] * u[0] + u[1] * u[1] - 1.0]))
                .with_jacobian(|u| Matrix::from_row_slice(1, 2, &[2.0 * u[0], 2.0 * u[1]])),
            base,
        )
        .unwrap()
    }

    fn circle_dual() -> DualChart {
        circle_dual_at(v(&[1.0, 0.0]))
    }

    fn angle_chart(t0: f64) -> Chart {
        Chart::new(
            SmoothMap::new(1, 2, move |w| v(&[(t0 + w[0]).cos(), (t0 + w[0]).sin()]))
                .with_jacobian(move |w| Matrix::from_column_slice(2, 1, &[-(t0 + w[0]).sin(), (t0 + w[0]).cos()])),
        )
        .unwrap()
    }

    fn first_coord(n: usize) -> SmoothMap {
        let mut row = Matrix::zeros(1, n);
        row[(0, 0)] = 1.0;
        SmoothMap::linear(row)
    }

    fn circle_objective() -> ManifoldObjective {
        ManifoldObjective::new(angle_chart(0.0), circle_dual(), first_coord(2)).unwrap()
    }

    /// Full space `R^n`: identity chart, empty dual chart.
    fn flat(n: usize, f: SmoothMap) -> ManifoldObjective {
        ManifoldObjective::new(
            Chart::new(SmoothMap::identity(n)).unwrap(),
            DualChart::new(SmoothMap::zero(n, 0), Vector::zeros(n)).unwrap(),
            f,
        )
        .unwrap()
    }

    fn half_quadratic(q: Matrix) -> SmoothMap {
        let n = q.nrows();
        let qj = q.clone();
        SmoothMap::new(n, 1, move |x| v(&[0.5 * x.dot(&(&q * x))]))
            .with_jacobian(move |x| Matrix::from_row_slice(1, n, (&qj * x).as_slice()))
    }

    #[test]
    fn gradient_examples() {
        let mo = circle_objective();
        let g = covariant_gradient(&mo, &v(&[0.0, 1.0])).unwrap();
        assert!((g - v(&[1.0, 0.0])).norm() < 1e-12);
        let g = covariant_gradient(&mo, &v(&[-1.0, 0.0])).unwrap();
        assert!(g.norm() < 1e-12);

        let f = SmoothMap::new(2, 1, |x| v(&[x[0] * x[1] + x[0]]));
        let flat = flat(2, f.clone());
        let x = v(&[0.3, -0.7]);
        assert!((covariant_gradient(&flat, &x).unwrap() - f.gradient(&x).unwrap()).norm() < 1e-12);

        assert!(matches!(
            covariant_gradient(&mo, &v(&[2.0, 0.0])),
            Err(Error::OffManifold { .. })
        ));
    }

    #[test]
    fn gradient_is_tangent() {
        let mo = circle_objective();
        for t in [0.1, 1.0, 2.0, -2.5] {
            let u = v(&[f64::cos(t), f64::sin(t)]);
            let g = covariant_gradient(&mo, &u).unwrap();
            let n = normal_space(mo.dual(), &u).unwrap();
            assert!((n.basis().transpose() * g).amax() <= 1e-8);
        }
    }

    /// Second derivative of `t ↦ f(H(t))` by central differences.
    fn second_derivative(mo: &ManifoldObjective, t: f64) -> f64 {
        let h = 1e-4;
        let phi = |s: f64| mo.f().eval(&mo.chart().point(&v(&[s])).unwrap()).unwrap()[0];
        (phi(t + h) - 2.0 * phi(t) + phi(t - h)) / (h * h)
    }

    #[test]
    fn hessian_examples() {
        let mo = circle_objective();
        let h = covariant_hessian(&mo, &v(&[-1.0, 0.0])).unwrap();
        let oracle = second_derivative(&mo, std::f64::consts::PI);
        assert!((h.matrix[(0, 0)] - oracle).abs() < 1e-6);
        assert!((h.matrix[(0, 0)] - 1.0).abs() < 1e-8);
        let h = covariant_hessian(&mo, &v(&[1.0, 0.0])).unwrap();
        assert!((h.matrix[(0, 0)] - second_derivative(&mo, 0.0)).abs() < 1e-6);
        assert!((h.matrix[(0, 0)] + 1.0).abs() < 1e-8);

        let linear = flat(3, SmoothMap::linear(Matrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5])));
        assert!(matches!(
            covariant_hessian(&linear, &Vector::zeros(3)),
            Err(Error::PreconditionViolation(_))
        ));
        let zero = flat(3, SmoothMap::zero(3, 1));
        assert!(covariant_hessian(&zero, &Vector::zeros(3)).unwrap().matrix.amax() < 1e-12);

        assert!(matches!(
            covariant_hessian(&mo, &v(&[0.0, 1.0])),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn hessian_is_chart_invariant() {
        // graph chart around (-1, 0): s ↦ (-sqrt(1 - s²), s)
        let graph_chart = Chart::new(
            SmoothMap::new(1, 2, |w| v(&[-(1.0 - w[0] * w[0]).sqrt(), w[0]]))
                .with_jacobian(|w| Matrix::from_column_slice(2, 1, &[w[0] / (1.0 - w[0] * w[0]).sqrt(), 1.0])),
        )
        .unwrap();
        let f = SmoothMap::new(2, 1, |u| v(&[u[0] + 0.3 * u[1] * u[1]]))
            .with_jacobian(|u| Matrix::from_row_slice(1, 2, &[1.0, 0.6 * u[1]]));
        let a = ManifoldObjective::new(angle_chart(3.0), circle_dual_at(v(&[3f64.cos(), 3f64.sin()])), f.clone())
            .unwrap();
        let b = ManifoldObjective::new(graph_chart, circle_dual_at(v(&[-1.0, 0.0])), f).unwrap();
        let u = v(&[-1.0, 0.0]);
        let ha = covariant_hessian(&a, &u).unwrap();
        let hb = covariant_hessian(&b, &u).unwrap();
        assert!(ha.asymmetry() <= 1e-8);
        assert!((ha.min_eigenvalue() - hb.min_eigenvalue()).abs() < 1e-6);
        assert!((ha.min_eigenvalue() - 1.6).abs() < 1e-6);
    }

    #[test]
    fn second_order_examples() {
        let mo = circle_objective();
        assert!(second_order_check(&mo, &v(&[-1.0, 0.0])).unwrap());
        assert!(!second_order_check(&mo, &v(&[1.0, 0.0])).unwrap());
        let zero = flat(2, SmoothMap::zero(2, 1));
        assert!(!second_order_check(&zero, &Vector::zeros(2)).unwrap());

        let growth = quadratic_growth(&mo, &v(&[-1.0, 0.0]), 0.1, 500, 3).unwrap();
        assert!((growth.delta_bound - 0.5).abs() < 1e-6);
        assert!(growth.holds_with(0.2));
        // (1 - cos t) / (2 - 2 cos t) = 1/2 exactly
        assert!((growth.empirical_delta - 0.5).abs() < 1e-6);
    }

    #[test]
    fn extended_rep_examples() {
        let mo = circle_objective();
        let rep = extended_subdiff_rep(&mo, &v(&[-1.0, 0.0]), &v(&[0.0, 0.0])).unwrap();
        let cert = constant_rank_probe(&rep, 0.1, 50, 1).unwrap();
        assert_eq!(cert.graph_dim, Some(2));
        assert_eq!(cert.manifold_dim, Some(1));

        let q = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let flat = flat(2, half_quadratic(q.clone()));
        let rep = extended_subdiff_rep(&flat, &Vector::zeros(2), &Vector::zeros(2)).unwrap();
        let cert = constant_rank_probe(&rep, 0.1, 50, 1).unwrap();
        assert_eq!(cert.manifold_dim, Some(2));
        let w = v(&[0.2, -0.1]);
        let (u, g) = rep.graph_point(&w, &Vector::zeros(0)).unwrap();
        assert!((g - &q * u).norm() < 1e-12);

        assert!(matches!(
            extended_subdiff_rep(&mo, &v(&[-1.0, 0.0]), &v(&[0.0, 1.0])),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn extended_rep_on_vertical_line_matches_intro_graph() {
        let mo = ManifoldObjective::new(
            Chart::new(SmoothMap::linear(Matrix::from_column_slice(2, 1, &[0.0, 1.0]))).unwrap(),
            DualChart::new(first_coord(2), Vector::zeros(2)).unwrap(),
            SmoothMap::new(2, 1, |u| v(&[u[1] * u[1]]))
                .with_jacobian(|u| Matrix::from_row_slice(1, 2, &[0.0, 2.0 * u[1]])),
        )
        .unwrap();
        let rep = extended_subdiff_rep(&mo, &Vector::zeros(2), &Vector::zeros(2)).unwrap();
        for (w, z) in [(0.3, -0.2), (-0.7, 0.9)] {
            let (u, g) = rep.graph_point(&v(&[w]), &v(&[z])).unwrap();
            assert!((u - v(&[0.0, w])).norm() < 1e-12);
            assert!((g - v(&[z, 2.0 * w])).norm() < 1e-9);
        }
        let cert = constant_rank_probe(&rep, 0.1, 50, 1).unwrap();
        assert_eq!((cert.graph_dim, cert.manifold_dim), (Some(2), Some(1)));
    }

    #[test]
    fn normal_space_examples() {
        let mo = circle_objective();
        assert_eq!(graph_normal_space(&mo, &v(&[-1.0, 0.0])).unwrap().dim(), 2);

        let q = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let quad = flat(2, half_quadratic(q.clone()));
        let ns = graph_normal_space(&quad, &Vector::zeros(2)).unwrap();
        assert_eq!(ns.dim(), 2);
        let w = v(&[0.4, -1.1]);
        assert!(ns.distance(&concat(&(-(&q * &w)), &w)) < 1e-6);

        let zero = flat(3, SmoothMap::zero(3, 1));
        let ns = graph_normal_space(&zero, &Vector::zeros(3)).unwrap();
        assert_eq!(ns.dim(), 3);
        assert!(ns.distance(&concat(&Vector::zeros(3), &v(&[1.0, 2.0, 3.0]))) < 1e-12);
    }

    /// The displayed normal space is the orthogonal complement of the graph
    /// tangent space of the coordinate representation.
    #[test]
    fn normal_space_matches_fd_tangent_space() {
        let f = SmoothMap::new(2, 1, |u| v(&[u[0] + 0.4 * u[1] * u[1]]))
            .with_jacobian(|u| Matrix::from_row_slice(1, 2, &[1.0, 0.8 * u[1]]));
        let mo = ManifoldObjective::new(angle_chart(0.0), circle_dual(), f).unwrap();
        let u = v(&[-1.0, 0.0]);
        let rep = extended_subdiff_rep(&mo, &u, &Vector::zeros(2)).unwrap();
        let tangent = Subspace::range_of(&rep.graph_jacobian(&Vector::zeros(1), &Vector::zeros(1)).unwrap());
        let normal = graph_normal_space(&mo, &u).unwrap();
        assert!(normal.gap(&tangent.complement()) < 1e-5);
    }

    #[test]
    fn transversality_examples() {
        let mo = circle_objective();
        assert!(transversality_check(&mo, &v(&[-1.0, 0.0])).unwrap());
        let zero = flat(3, SmoothMap::zero(3, 1));
        assert_eq!(normal_intersection_dim(&zero, &Vector::zeros(3)).unwrap(), 3);
        assert!(!transversality_check(&zero, &Vector::zeros(3)).unwrap());
    }

    #[test]
    fn maximizer_intersection_is_trivial() {
        // z = 0, w ∈ T, -w ∈ N forces w = 0
        let mo = circle_objective();
        assert_eq!(normal_intersection_dim(&mo, &v(&[1.0, 0.0])).unwrap(), 0);
    }

    #[test]
    fn minimizer_is_isolated() {
        let mo = circle_objective();
        let report = isolation_check(&mo, &v(&[-1.0, 0.0]), 0.05, 2000, 9).unwrap();
        assert!(report.is_isolated());
        assert!(report.min_ratio > 0.9);
    }

    #[test]
    fn projected_gradient_reaches_critical_point() {
        let f = SmoothMap::new(2, 1, |u| v(&[u[0] + 0.5 * u[1]]))
            .with_jacobian(|_| Matrix::from_row_slice(1, 2, &[1.0, 0.5]));
        let mo = ManifoldObjective::new(angle_chart(0.0), circle_dual(), f).unwrap();
        let u = projected_gradient_descent(&mo, &v(&[0.0, -1.0]), 0.2, 10_000, 1e-9).unwrap();
        assert!(covariant_gradient(&mo, &u).unwrap().norm() <= 1e-6);
        assert!(second_order_check(&mo, &u).unwrap());
        let expected = -v(&[1.0, 0.5]) / 1.25f64.sqrt();
        assert!((u - expected).norm() < 1e-8);
    }
}
