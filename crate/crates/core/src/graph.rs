//! Graph representations of set-valued mappings and the constant-rank test
//! for partial smoothness.
//!
//! A coordinate representation parameterizes the graph near `(ū, v̄)` as
//! `(w, z) ↦ (H(w), G(w, z))`. The image of the graph tangent space under
//! the projection `(u, v) ↦ u` is `Range(∇H(w))`, so the mapping is partly
//! smooth exactly when `rank ∇H(w)` is locally constant. That common rank is
//! the dimension of the active manifold.
//!
//! A dual representation describes the graph as `{P(u) = 0, Q(u, v) = 0}`;
//! graph points are produced by Newton projection onto that zero set.

use std::fmt;

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{concat, hstack, numerical_rank, split, vstack, Matrix, Subspace, Vector};
use crate::manifold::{Chart, DualChart, SmoothMap, BASE_TOL};
use crate::sampling::ball_samples;

/// Residual target for the Newton projection onto `{P = 0, Q = 0}`.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
/// Tolerance on `|P(H(w))|` when checking two charts describe the same manifold.
pub const CHART_CONSISTENCY_TOL: f64 = 1e-8;

/// Failed inner evaluations surface as non-finite values, which
/// [`SmoothMap::eval`] reports as errors.
pub(crate) fn nan_vector(n: usize) -> Vector {
    Vector::from_element(n, f64::NAN)
}

/// Graph of a set-valued mapping given as `(w, z) ↦ (H(w), G(w, z))`.
#[derive(Debug, Clone)]
pub struct CoordGraphRep {
    h: SmoothMap,
    g: SmoothMap,
    base_u: Vector,
    base_v: Vector,
    w_dim: usize,
    z_dim: usize,
}

impl CoordGraphRep {
    /// `h: W -> U`, `g: W × Z -> V`. The base point is `(H(0), G(0, 0))`.
    pub fn new(h: SmoothMap, g: SmoothMap) -> Result<Self> {
        let w_dim = h.in_dim();
        if g.in_dim() < w_dim {
            return Err(Error::DimensionMismatch {
                context: "G input (w, z)",
                expected: w_dim,
                got: g.in_dim(),
            });
        }
        let z_dim = g.in_dim() - w_dim;
        let base_u = h.eval(&Vector::zeros(w_dim))?;
        let base_v = g.eval(&Vector::zeros(w_dim + z_dim))?;
        Ok(Self {
            h,
            g,
            base_u,
            base_v,
            w_dim,
            z_dim,
        })
    }

    /// As [`CoordGraphRep::new`], also checking the claimed base point.
    pub fn with_base(h: SmoothMap, g: SmoothMap, base_u: &Vector, base_v: &Vector) -> Result<Self> {
        let rep = Self::new(h, g)?;
        let du = (&rep.base_u - base_u).norm();
        let dv = (&rep.base_v - base_v).norm();
        if base_u.len() != rep.u_dim() || base_v.len() != rep.v_dim() || du > BASE_TOL || dv > BASE_TOL {
            return Err(Error::PreconditionViolation(format!(
                "representation center differs from (ū, v̄) by ({du:e}, {dv:e})"
            )));
        }
        Ok(rep)
    }

    pub fn h(&self) -> &SmoothMap {
        &self.h
    }

    pub fn g(&self) -> &SmoothMap {
        &self.g
    }

    pub fn base_u(&self) -> &Vector {
        &self.base_u
    }

    pub fn base_v(&self) -> &Vector {
        &self.base_v
    }

    pub fn w_dim(&self) -> usize {
        self.w_dim
    }

    pub fn z_dim(&self) -> usize {
        self.z_dim
    }

    pub fn u_dim(&self) -> usize {
        self.h.out_dim()
    }

    pub fn v_dim(&self) -> usize {
        self.g.out_dim()
    }

    pub fn param_dim(&self) -> usize {
        self.w_dim + self.z_dim
    }

    /// The graph point `(H(w), G(w, z))`.
    pub fn graph_point(&self, w: &Vector, z: &Vector) -> Result<(Vector, Vector)> {
        Ok((self.h.eval(w)?, self.g.eval(&concat(w, z))?))
    }

    /// Jacobian of `(w, z) ↦ (H(w), G(w, z))`, of size `(u + v) × (w + z)`.
    pub fn graph_jacobian(&self, w: &Vector, z: &Vector) -> Result<Matrix> {
        let jh = self.h.jacobian(w)?;
        let jg = self.g.jacobian(&concat(w, z))?;
        let top = hstack(&jh, &Matrix::zeros(self.u_dim(), self.z_dim));
        Ok(vstack(&top, &jg))
    }

    fn split_param(&self, param: &Vector) -> (Vector, Vector) {
        split(param, self.w_dim)
    }
}

/// One probed parameter point and its projected tangent rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSample {
    pub index: usize,
    pub param: Vector,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankProfile {
    pub samples: Vec<RankSample>,
    pub radius: f64,
    pub seed: u64,
}

impl RankProfile {
    /// Distinct ranks in increasing order.
    pub fn distinct_ranks(&self) -> Vec<usize> {
        let mut ranks: Vec<usize> = self.samples.iter().map(|s| s.rank).collect();
        ranks.sort_unstable();
        ranks.dedup();
        ranks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConstantRank,
    RankVaries,
    Degenerate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConstantRank => "constant-rank",
            Verdict::RankVaries => "rank-varies",
            Verdict::Degenerate => "degenerate",
        })
    }
}

/// Outcome of a constant-rank probe.
///
/// `manifold_dim` and `coderiv_dim` are set only for a constant-rank verdict.
/// `graph_dim` is unset for a degenerate verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSmoothCertificate {
    pub verdict: Verdict,
    pub graph_dim: Option<usize>,
    pub manifold_dim: Option<usize>,
    pub coderiv_dim: Option<usize>,
    pub u_dim: usize,
    pub profile: RankProfile,
    /// Why the verdict is degenerate, when it is.
    pub reason: Option<String>,
}

impl PartialSmoothCertificate {
    fn degenerate(u_dim: usize, radius: f64, seed: u64, reason: String) -> Self {
        Self {
            verdict: Verdict::Degenerate,
            graph_dim: None,
            manifold_dim: None,
            coderiv_dim: None,
            u_dim,
            profile: RankProfile {
                samples: Vec::new(),
                radius,
                seed,
            },
            reason: Some(reason),
        }
    }

    fn from_profile(profile: RankProfile, graph_dim: usize, u_dim: usize) -> Self {
        let ranks = profile.distinct_ranks();
        if ranks.len() == 1 {
            let m = ranks[0];
            Self {
                verdict: Verdict::ConstantRank,
                graph_dim: Some(graph_dim),
                manifold_dim: Some(m),
                coderiv_dim: Some(u_dim - m),
                u_dim,
                profile,
                reason: None,
            }
        } else {
            Self {
                verdict: Verdict::RankVaries,
                graph_dim: Some(graph_dim),
                manifold_dim: None,
                coderiv_dim: None,
                u_dim,
                profile,
                reason: None,
            }
        }
    }

    pub fn is_constant_rank(&self) -> bool {
        self.verdict == Verdict::ConstantRank
    }
}

/// True iff `(w, z) = 0` is the only solution of `∇H(0)w = 0`,
/// `∇G(0,0)(w, z) = 0`, i.e. the stacked map has full column rank.
pub fn regularity_check(rep: &CoordGraphRep) -> bool {
    let w = Vector::zeros(rep.w_dim);
    let z = Vector::zeros(rep.z_dim);
    match rep.graph_jacobian(&w, &z) {
        Ok(j) => numerical_rank(&j, None) == rep.param_dim(),
        Err(_) => false,
    }
}

/// Rank of the projection of the graph tangent space at `(H(w), G(w, z))`
/// onto `U`, which is `rank ∇H(w)`.
pub fn projected_tangent_rank(rep: &CoordGraphRep, w: &Vector, _z: &Vector) -> Result<usize> {
    Ok(numerical_rank(&rep.h.jacobian(w)?, None))
}

/// Dimension of the coderivative subspace `{w' : (w', 0) ∈ N_gph(u, v)}`,
/// the orthogonal complement of the projected tangent space.
pub fn coderivative_dim(rep: &CoordGraphRep, w: &Vector, z: &Vector) -> Result<usize> {
    Ok(rep.u_dim() - projected_tangent_rank(rep, w, z)?)
}

/// Samples `n_samples` parameters uniformly in the ball of `radius`, plus the
/// center (sample index 0), and compares projected tangent ranks.
pub fn constant_rank_probe(
    rep: &CoordGraphRep,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PartialSmoothCertificate> {
    if !regularity_check(rep) {
        return Ok(PartialSmoothCertificate::degenerate(
            rep.u_dim(),
            radius,
            seed,
            "regularity condition fails at the base point".into(),
        ));
    }
    let mut params = Vec::with_capacity(n_samples + 1);
    params.push(Vector::zeros(rep.param_dim()));
    params.extend(ball_samples(rep.param_dim(), radius, n_samples, seed));

    let mut samples = Vec::with_capacity(params.len());
    for (index, param) in params.into_iter().enumerate() {
        let (w, z) = rep.split_param(&param);
        let rank = projected_tangent_rank(rep, &w, &z)?;
        samples.push(RankSample { index, param, rank });
    }
    let profile = RankProfile {
        samples,
        radius,
        seed,
    };
    Ok(PartialSmoothCertificate::from_profile(
        profile,
        rep.param_dim(),
        rep.u_dim(),
    ))
}

/// `G(w, 0)`: a smooth selection of the mapping along the active manifold,
/// valued at the point `H(w)`.
pub fn smooth_selection(rep: &CoordGraphRep, w: &Vector) -> Result<Vector> {
    rep.g.eval(&concat(w, &Vector::zeros(rep.z_dim)))
}

/// Sampled check that every graph point `(u, v)` within `radius` of
/// `(ū, v̄)` (in each factor) has `member(u)`.
pub fn identifiability_test<F>(
    rep: &CoordGraphRep,
    member: F,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<bool>
where
    F: Fn(&Vector) -> bool,
{
    let mut params = vec![Vector::zeros(rep.param_dim())];
    params.extend(ball_samples(rep.param_dim(), radius, n_samples, seed));
    for param in &params {
        let (w, z) = rep.split_param(param);
        let (u, v) = rep.graph_point(&w, &z)?;
        let near = (&u - &rep.base_u).norm() <= radius && (&v - &rep.base_v).norm() <= radius;
        if near && !member(&u) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Representation of `Φ + F` for a smooth single-valued `F: U -> V`:
/// same `H`, and `G̃(w, z) = G(w, z) + F(H(w))`.
pub fn sum_rule_transform(rep: &CoordGraphRep, f: &SmoothMap) -> Result<CoordGraphRep> {
    if f.in_dim() != rep.u_dim() || f.out_dim() != rep.v_dim() {
        return Err(Error::DimensionMismatch {
            context: "sum-rule perturbation",
            expected: rep.v_dim(),
            got: f.out_dim(),
        });
    }
    let w_dim = rep.w_dim;
    let (h, g, f) = (rep.h.clone(), rep.g.clone(), f.clone());
    let (hj, gj, fj) = (h.clone(), g.clone(), f.clone());
    let z_dim = rep.z_dim;
    let v_dim = g.out_dim();
    let shifted = SmoothMap::new(g.in_dim(), v_dim, move |wz| {
        let w = wz.rows(0, w_dim).into_owned();
        let value = h.eval(&w).and_then(|u| Ok(g.eval(wz)? + f.eval(&u)?));
        value.unwrap_or_else(|_| nan_vector(v_dim))
    })
    .with_jacobian(move |wz| {
        let w = wz.rows(0, w_dim).into_owned();
        let nan = |r, c| Matrix::from_element(r, c, f64::NAN);
        let (Ok(u), Ok(jh), Ok(jg)) = (hj.eval(&w), hj.jacobian(&w), gj.jacobian(wz)) else {
            return nan(gj.out_dim(), gj.in_dim());
        };
        let Ok(jf) = fj.jacobian(&u) else {
            return nan(gj.out_dim(), gj.in_dim());
        };
        let chain = hstack(&(jf * jh), &Matrix::zeros(gj.out_dim(), z_dim));
        jg + chain
    });
    CoordGraphRep::new(rep.h.clone(), shifted)
}

/// Graph `{(u, v) : P(u) = 0, Q(u, v) = 0}` around `(ū, v̄)`.
#[derive(Debug, Clone)]
pub struct DualGraphRep {
    p: SmoothMap,
    q: SmoothMap,
    base_u: Vector,
    base_v: Vector,
}

impl DualGraphRep {
    /// `p: U -> X`, `q: U × V -> Y`. Checks `P(ū) = 0`, `Q(ū, v̄) = 0` and
    /// surjectivity of `∇P(ū)` and `∇_v Q(ū, v̄)`.
    pub fn new(p: SmoothMap, q: SmoothMap, base_u: Vector, base_v: Vector) -> Result<Self> {
        if p.in_dim() != base_u.len() || q.in_dim() != base_u.len() + base_v.len() {
            return Err(Error::DimensionMismatch {
                context: "dual representation",
                expected: base_u.len() + base_v.len(),
                got: q.in_dim(),
            });
        }
        let rep = Self {
            p,
            q,
            base_u,
            base_v,
        };
        let r = rep.residual(&rep.base_u, &rep.base_v)?;
        if r > BASE_TOL {
            return Err(Error::PreconditionViolation(format!(
                "(ū, v̄) is not on the graph: residual {r:e}"
            )));
        }
        rep.check_surjective(&rep.base_u, &rep.base_v)?;
        Ok(rep)
    }

    pub fn u_dim(&self) -> usize {
        self.base_u.len()
    }

    pub fn v_dim(&self) -> usize {
        self.base_v.len()
    }

    pub fn x_dim(&self) -> usize {
        self.p.out_dim()
    }

    pub fn y_dim(&self) -> usize {
        self.q.out_dim()
    }

    pub fn base_u(&self) -> &Vector {
        &self.base_u
    }

    pub fn base_v(&self) -> &Vector {
        &self.base_v
    }

    fn equations(&self, u: &Vector, v: &Vector) -> Result<Vector> {
        Ok(concat(&self.p.eval(u)?, &self.q.eval(&concat(u, v))?))
    }

    /// `|(P(u), Q(u, v))|`.
    pub fn residual(&self, u: &Vector, v: &Vector) -> Result<f64> {
        Ok(self.equations(u, v)?.norm())
    }

    /// Jacobian of `(u, v) ↦ (P(u), Q(u, v))`.
    pub fn jacobian(&self, u: &Vector, v: &Vector) -> Result<Matrix> {
        let jp = hstack(&self.p.jacobian(u)?, &Matrix::zeros(self.x_dim(), self.v_dim()));
        let jq = self.q.jacobian(&concat(u, v))?;
        Ok(vstack(&jp, &jq))
    }

    fn check_surjective(&self, u: &Vector, v: &Vector) -> Result<()> {
        let jp = self.p.jacobian(u)?;
        let rank_p = numerical_rank(&jp, None);
        if rank_p != self.x_dim() {
            return Err(Error::ChartDegenerate {
                rank: rank_p,
                expected: self.x_dim(),
            });
        }
        let jq = self.q.jacobian(&concat(u, v))?;
        let jq_v = jq.columns(self.u_dim(), self.v_dim()).into_owned();
        let rank_q = numerical_rank(&jq_v, None);
        if rank_q != self.y_dim() {
            return Err(Error::ChartDegenerate {
                rank: rank_q,
                expected: self.y_dim(),
            });
        }
        Ok(())
    }

    /// Damped Newton projection of `(u, v)` onto the graph, using minimum-norm
    /// steps and step halving.
    pub fn project(&self, u: &Vector, v: &Vector) -> Result<(Vector, Vector)> {
        let n_u = self.u_dim();
        let mut x = concat(u, v);
        let eval = |x: &Vector| -> Result<Vector> {
            let (u, v) = split(x, n_u);
            self.equations(&u, &v)
        };
        let mut f = eval(&x)?;
        let mut r = f.norm();
        for _ in 0..NEWTON_MAX_ITER {
            if r <= NEWTON_TOL {
                return Ok(split(&x, n_u));
            }
            let (u, v) = split(&x, n_u);
            let j = self.jacobian(&u, &v)?;
            let step = SVD::new(j, true, true)
                .solve(&f, 1e-14)
                .map_err(|_| Error::NewtonFailure { residual: r })?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = &x - &step * t;
                if let Ok(ft) = eval(&trial) {
                    let rt = ft.norm();
                    if rt < r {
                        x = trial;
                        f = ft;
                        r = rt;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if r <= NEWTON_TOL {
            Ok(split(&x, n_u))
        } else {
            Err(Error::NewtonFailure { residual: r })
        }
    }

    /// Rank of the projection onto `U` of the graph tangent space
    /// `Null(∇(P, Q))` at a graph point.
    pub fn projected_tangent_rank(&self, u: &Vector, v: &Vector) -> Result<usize> {
        let tangent = Subspace::null_space_of(&self.jacobian(u, v)?);
        let proj = tangent.basis().rows(0, self.u_dim()).into_owned();
        Ok(numerical_rank(&proj, Some(1e-10)))
    }
}

/// Constant-rank check for a dual representation.
///
/// Seeds are drawn uniformly around `(ū, v̄)` and projected onto the graph;
/// at each graph point the surjectivity conditions are re-verified and the
/// projected tangent rank recorded. Graph points in the profile are stored as
/// the concatenation `(u, v)`.
pub fn dual_rep_check(
    rep: &DualGraphRep,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PartialSmoothCertificate> {
    let base = concat(&rep.base_u, &rep.base_v);
    let mut seeds = vec![Vector::zeros(base.len())];
    seeds.extend(ball_samples(base.len(), radius, n_samples, seed));

    let mut samples = Vec::with_capacity(seeds.len());
    for (index, offset) in seeds.into_iter().enumerate() {
        let (u0, v0) = split(&(&base + offset), rep.u_dim());
        let (u, v) = match rep.project(&u0, &v0) {
            Ok(p) => p,
            Err(e) => {
                return Ok(PartialSmoothCertificate::degenerate(
                    rep.u_dim(),
                    radius,
                    seed,
                    format!("sample {index}: {e}"),
                ))
            }
        };
        if let Err(e) = rep.check_surjective(&u, &v) {
            return Ok(PartialSmoothCertificate::degenerate(
                rep.u_dim(),
                radius,
                seed,
                format!("sample {index}: {e}"),
            ));
        }
        let rank = rep.projected_tangent_rank(&u, &v)?;
        samples.push(RankSample {
            index,
            param: concat(&u, &v),
            rank,
        });
    }
    let profile = RankProfile {
        samples,
        radius,
        seed,
    };
    let graph_dim = rep.u_dim() + rep.v_dim() - rep.x_dim() - rep.y_dim();
    let mut cert = PartialSmoothCertificate::from_profile(profile, graph_dim, rep.u_dim());
    if cert.is_constant_rank() && cert.manifold_dim != Some(rep.u_dim() - rep.x_dim()) {
        cert.reason = Some(format!(
            "measured projected rank {:?} differs from dim U - dim X = {}",
            cert.manifold_dim,
            rep.u_dim() - rep.x_dim()
        ));
    }
    Ok(cert)
}

/// Coordinate representation of the normal-space mapping `N_M` built from a
/// chart and a dual chart of the same manifold:
/// `H = c.h`, `G(w, z) = ∇P(H(w))ᵀ (x̄ + z)`.
pub fn normal_bundle_rep(d: &DualChart, c: &Chart, x_bar: &Vector) -> Result<CoordGraphRep> {
    if d.ambient_dim() != c.ambient_dim() || x_bar.len() != d.codim() {
        return Err(Error::DimensionMismatch {
            context: "normal bundle charts",
            expected: d.codim(),
            got: x_bar.len(),
        });
    }
    check_charts_consistent(d, c)?;
    let (w_dim, x_dim) = (c.dim(), d.codim());
    let (h, p) = (c.h().clone(), d.p().clone());
    let x_bar = x_bar.clone();
    let u_dim = c.ambient_dim();
    let g = SmoothMap::new(w_dim + x_dim, u_dim, move |wz| {
        let (w, z) = split(wz, w_dim);
        h.eval(&w)
            .and_then(|u| p.jacobian(&u))
            .map(|jp| jp.transpose() * (&x_bar + z))
            .unwrap_or_else(|_| nan_vector(u_dim))
    });
    CoordGraphRep::new(c.h().clone(), g)
}

/// Rejects chart pairs whose images disagree: `|P(H(w))| ≤ 1e-8` is checked
/// at the center and at a fixed set of nearby parameters.
pub fn check_charts_consistent(d: &DualChart, c: &Chart) -> Result<()> {
    let gap = (d.base() - c.base()).norm();
    if gap > CHART_CONSISTENCY_TOL {
        return Err(Error::InconsistentCharts { residual: gap });
    }
    let mut params = vec![Vector::zeros(c.dim())];
    params.extend(ball_samples(c.dim(), 1e-2, 16, 0xC4A7));
    for w in params {
        let residual = d.defect(&c.point(&w)?)?;
        if residual > CHART_CONSISTENCY_TOL {
            return Err(Error::InconsistentCharts { residual });
        }
    }
    Ok(())
}
