//! Primal-dual splitting for
//! `inf_x sup_y (f + p)(x) + ⟨Ax, y⟩ - (g + q)(y)`
//! and detection of the iteration at which the iterates settle on the
//! active manifolds of `f` and `g`.
//!
//! The saddle operator is
//! `Φ(x, y) = (∂f(x) + ∇p(x) + Aᵀy) × (-Ax + ∂g(y) + ∇q(y))`; the residual
//! tracked per iterate is the exact distance from `(0, 0)` to `Φ(x, y)`.

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{power_norm, Matrix, Vector};
use crate::manifold::SmoothMap;
use crate::prox::{ManifoldPattern, ProxFn};

/// Iterates whose norm exceeds this are treated as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e12;
const POWER_ITERS: usize = 100;
/// Slack `δ` in the step-size condition `γμ|A|² ≤ 1 - δ`.
const STEP_SLACK: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SaddleProblem {
    f: Arc<dyn ProxFn>,
    g: Arc<dyn ProxFn>,
    p: SmoothMap,
    q: SmoothMap,
    a: Matrix,
    gamma: f64,
    mu: f64,
    a_norm: f64,
    warnings: Vec<String>,
}

impl SaddleProblem {
    /// `p: R^n -> R` and `q: R^m -> R` are convex C² functions, `a` is `m × n`.
    ///
    /// Lipschitz constants of `∇p`, `∇q` are estimated from finite-difference
    /// Hessians at the origin; see [`SaddleProblem::with_lipschitz`] to supply them.
    pub fn new(
        f: Arc<dyn ProxFn>,
        g: Arc<dyn ProxFn>,
        p: SmoothMap,
        q: SmoothMap,
        a: Matrix,
        gamma: f64,
        mu: f64,
    ) -> Result<Self> {
        Self::build(f, g, p, q, a, gamma, mu, None)
    }

    /// As [`SaddleProblem::new`] with caller-supplied Lipschitz constants.
    #[allow(clippy::too_many_arguments)]
    pub fn with_lipschitz(
        f: Arc<dyn ProxFn>,
        g: Arc<dyn ProxFn>,
        p: SmoothMap,
        q: SmoothMap,
        a: Matrix,
        gamma: f64,
        mu: f64,
        lipschitz: (f64, f64),
    ) -> Result<Self> {
        Self::build(f, g, p, q, a, gamma, mu, Some(lipschitz))
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        f: Arc<dyn ProxFn>,
        g: Arc<dyn ProxFn>,
        p: SmoothMap,
        q: SmoothMap,
        a: Matrix,
        gamma: f64,
        mu: f64,
        lipschitz: Option<(f64, f64)>,
    ) -> Result<Self> {
        let (n, m) = (f.dim(), g.dim());
        for (ok, context, expected, got) in [
            (p.in_dim() == n && p.out_dim() == 1, "p: R^n -> R", n, p.in_dim()),
            (q.in_dim() == m && q.out_dim() == 1, "q: R^m -> R", m, q.in_dim()),
            (a.ncols() == n, "A columns", n, a.ncols()),
            (a.nrows() == m, "A rows", m, a.nrows()),
        ] {
            if !ok {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    got,
                });
            }
        }
        for (name, step) in [("gamma", gamma), ("mu", mu)] {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "step size {name} must be positive, got {step}"
                )));
            }
        }
        let a_norm = power_norm(&a, POWER_ITERS);
        let (lp, lq) = match lipschitz {
            Some(l) => l,
            None => (hessian_norm_at_origin(&p)?, hessian_norm_at_origin(&q)?),
        };
        let mut warnings = Vec::new();
        if gamma * mu * a_norm * a_norm > 1.0 - STEP_SLACK {
            warnings.push(format!(
                "gamma*mu*|A|^2 = {:.6} exceeds 1 - {STEP_SLACK}",
                gamma * mu * a_norm * a_norm
            ));
        }
        if gamma * lp > 1.0 + 1e-12 {
            warnings.push(format!("gamma = {gamma} exceeds 1/L_p = {}", 1.0 / lp));
        }
        if mu * lq > 1.0 + 1e-12 {
            warnings.push(format!("mu = {mu} exceeds 1/L_q = {}", 1.0 / lq));
        }
        for w in &warnings {
            warn!("step-size condition: {w}");
        }
        Ok(Self {
            f,
            g,
            p,
            q,
            a,
            gamma,
            mu,
            a_norm,
            warnings,
        })
    }

    pub fn f(&self) -> &Arc<dyn ProxFn> {
        &self.f
    }

    pub fn g(&self) -> &Arc<dyn ProxFn> {
        &self.g
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Power-method estimate of `|A|_op`.
    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }

    /// Step-size conditions that failed at construction (not fatal).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn primal_dim(&self) -> usize {
        self.f.dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.g.dim()
    }

    /// The reference subgradients `(-∇p(x) - Aᵀy, Ax - ∇q(y))` whose distances
    /// to `∂f(x)` and `∂g(y)` make up the residual.
    pub fn subgradient_targets(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        let vx = -self.p.gradient(x)? - self.a.transpose() * y;
        let vy = &self.a * x - self.q.gradient(y)?;
        Ok((vx, vy))
    }
}

fn hessian_norm_at_origin(s: &SmoothMap) -> Result<f64> {
    let n = s.in_dim();
    let grad = {
        let s = s.clone();
        SmoothMap::new(n, n, move |x| {
            s.gradient(x)
                .unwrap_or_else(|_| Vector::from_element(n, f64::NAN))
        })
        .with_fd_step(1e-4)
    };
    let hess = grad.jacobian(&Vector::zeros(n))?;
    Ok(if hess.is_empty() {
        0.0
    } else {
        hess.singular_values().max()
    })
}

/// `dist((0, 0), Φ(x, y))`; `+∞` outside `dom f × dom g`.
pub fn saddle_residual(pr: &SaddleProblem, x: &Vector, y: &Vector) -> Result<f64> {
    let (vx, vy) = pr.subgradient_targets(x, y)?;
    let dx = pr.f.subdiff_dist(x, &vx);
    let dy = pr.g.subdiff_dist(y, &vy);
    Ok((dx * dx + dy * dy).sqrt())
}

/// One iteration:
/// `x⁺ = prox_{γf}(x - γ∇p(x) - γAᵀy)`,
/// `y⁺ = prox_{μg}(y - μ∇q(y) + μA(2x⁺ - x))`.
pub fn pd_step(pr: &SaddleProblem, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
    let (gamma, mu) = (pr.gamma, pr.mu);
    let x_arg = x - pr.p.gradient(x)? * gamma - pr.a.transpose() * y * gamma;
    let x_next = pr.f.prox(gamma, &x_arg)?;
    let extrapolated = &x_next * 2.0 - x;
    let y_arg = y - pr.q.gradient(y)? * mu + &pr.a * extrapolated * mu;
    let y_next = pr.g.prox(mu, &y_arg)?;
    Ok((x_next, y_next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Vector,
    pub y: Vector,
    pub residual: f64,
    pub pattern_x: ManifoldPattern,
    pub pattern_y: ManifoldPattern,
}

impl IterateRecord {
    fn capture(pr: &SaddleProblem, k: usize, x: &Vector, y: &Vector, residual: f64) -> Self {
        Self {
            k,
            x: x.clone(),
            y: y.clone(),
            residual,
            pattern_x: pr.f.pattern(x),
            pattern_y: pr.g.pattern(y),
        }
    }

    fn same_patterns(&self, other: &IterateRecord) -> bool {
        self.pattern_x == other.pattern_x && self.pattern_y == other.pattern_y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<IterateRecord>,
    pub converged: bool,
    pub identification_index: Option<usize>,
}

impl Trace {
    /// Wraps recorded iterates, computing the identification index.
    pub fn from_records(records: Vec<IterateRecord>, converged: bool) -> Self {
        let mut trace = Self {
            records,
            converged,
            identification_index: None,
        };
        trace.identification_index = identification_index(&trace);
        trace
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }
}

/// Runs [`pd_step`] from `(x0, y0)` until the residual drops to `tol` or
/// `max_iter` steps have been taken.
///
/// Iterate `k` is recorded when `k % record_every == 0`; the initial and
/// final iterates are always recorded.
pub fn solve(
    pr: &SaddleProblem,
    x0: &Vector,
    y0: &Vector,
    max_iter: usize,
    tol: f64,
    record_every: usize,
) -> Result<Trace> {
    if max_iter == 0 {
        return Err(Error::PreconditionViolation("max_iter must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::PreconditionViolation(format!("tol must be positive, got {tol}")));
    }
    if record_every == 0 {
        return Err(Error::PreconditionViolation("record_every must be at least 1".into()));
    }
    if x0.len() != pr.primal_dim() || y0.len() != pr.dual_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial point",
            expected: pr.primal_dim() + pr.dual_dim(),
            got: x0.len() + y0.len(),
        });
    }

    let (mut x, mut y) = (x0.clone(), y0.clone());
    let mut residual = saddle_residual(pr, &x, &y)?;
    let mut records = vec![IterateRecord::capture(pr, 0, &x, &y, residual)];
    let mut converged = residual <= tol;
    let mut k = 0;
    while !converged && k < max_iter {
        (x, y) = pd_step(pr, &x, &y)?;
        k += 1;
        let size = x.norm_squared() + y.norm_squared();
        if !size.is_finite() || size.sqrt() > DIVERGENCE_BOUND {
            return Err(Error::Divergence { iteration: k });
        }
        residual = saddle_residual(pr, &x, &y)?;
        converged = residual <= tol;
        if k % record_every == 0 || converged || k == max_iter {
            records.push(IterateRecord::capture(pr, k, &x, &y, residual));
        }
    }
    Ok(Trace::from_records(records, converged))
}

/// Smallest recorded `k` from which both patterns stay constant through the
/// final record. Absent if the final two records disagree.
pub fn identification_index(tr: &Trace) -> Option<usize> {
    let n = tr.records.len();
    let last = tr.records.last()?;
    if n >= 2 && !tr.records[n - 2].same_patterns(last) {
        return None;
    }
    let start = tr
        .records
        .iter()
        .rposition(|r| !r.same_patterns(last))
        .map_or(0, |i| i + 1);
    Some(tr.records[start].k)
}

/// Nondegeneracy margins `(margin_f, margin_g)` at a near-saddle point.
///
/// Requires `saddle_residual(x, y) ≤ tol`. Margins are positive iff the
/// reference subgradients lie in the relative interiors of `∂f(x)`, `∂g(y)`.
pub fn nondegeneracy_report(pr: &SaddleProblem, x: &Vector, y: &Vector, tol: f64) -> Result<(f64, f64)> {
    let residual = saddle_residual(pr, x, y)?;
    if !(residual <= tol) {
        return Err(Error::PreconditionViolation(format!(
            "residual {residual:e} exceeds {tol:e}; not a saddle point"
        )));
    }
    let (vx, vy) = pr.subgradient_targets(x, y)?;
    Ok((pr.f.margin(x, &vx), pr.g.margin(y, &vy)))
}

/// Result of iterating past a trace's final iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStability {
    pub steps: usize,
    /// First additional step (1-based) at which a pattern changed.
    pub first_change: Option<usize>,
    pub final_residual: f64,
}

impl PatternStability {
    pub fn is_stable(&self) -> bool {
        self.first_change.is_none()
    }
}

/// Runs `steps` further iterations from `(x, y)`, checking that the patterns
/// of every iterate equal those of `(x, y)`.
pub fn monitor_patterns(pr: &SaddleProblem, x: &Vector, y: &Vector, steps: usize) -> Result<PatternStability> {
    let (px, py) = (pr.f.pattern(x), pr.g.pattern(y));
    let (mut x, mut y) = (x.clone(), y.clone());
    let mut first_change = None;
    for step in 1..=steps {
        (x, y) = pd_step(pr, &x, &y)?;
        if first_change.is_none() && (pr.f.pattern(&x) != px || pr.g.pattern(&y) != py) {
            first_change = Some(step);
        }
    }
    Ok(PatternStability {
        steps,
        first_change,
        final_residual: saddle_residual(pr, &x, &y)?,
    })
}

/// Standalone proximal gradient on `f + p`: `x⁺ = prox_{γf}(x - γ∇p(x))`.
/// Returns all iterates including `x0`.
pub fn proximal_gradient(
    f: &dyn ProxFn,
    p: &SmoothMap,
    gamma: f64,
    x0: &Vector,
    iters: usize,
) -> Result<Vec<Vector>> {
    let mut xs = Vec::with_capacity(iters + 1);
    let mut x = x0.clone();
    xs.push(x.clone());
    for _ in 0..iters {
        x = f.prox(gamma, &(&x - p.gradient(&x)? * gamma))?;
        xs.push(x.clone());
    }
    Ok(xs)
}
