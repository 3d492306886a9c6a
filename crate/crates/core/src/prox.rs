//! Structured partly smooth convex functions with exact proximal maps.
//!
//! Every instance exposes the pieces the prober and the solver need:
//! the prox, the distance from a vector to `∂f(x)`, the distance of a
//! subgradient to the relative boundary of `∂f(x)` (the nondegeneracy
//! margin), and a discrete [`ManifoldPattern`] naming the active-manifold
//! sheet a point lies on. Near any `ū`, the active manifold of each shipped
//! instance is the affine set `ū + span(tangent_basis(ū))`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{nan_vector, CoordGraphRep};
use crate::linalg::{split, Matrix, Subspace, Vector};
use crate::manifold::SmoothMap;

/// Absolute tolerance for "v is a subgradient of f at x".
pub const SUBGRADIENT_TOL: f64 = 1e-9;

/// Position of a coordinate relative to its box bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    AtLower,
    Free,
    AtUpper,
}

/// One block of a manifold pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternBlock {
    /// Signs in {-1, 0, +1}.
    SignedSupport(Vec<i8>),
    Face(Vec<Face>),
    /// `true` for groups with nonzero norm.
    GroupSupport(Vec<bool>),
    /// No structure: the active manifold is the whole space of this dimension.
    FullSpace(usize),
}

/// Discrete label of the active-manifold sheet containing a point.
///
/// Direct sums of functions produce one block per summand. The compact string
/// form joins blocks with `|`: signed supports as `+0-`, faces as `lfu`,
/// group supports as `#` followed by `0`/`1`, full space as `R<dim>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ManifoldPattern {
    pub blocks: Vec<PatternBlock>,
}

impl ManifoldPattern {
    pub fn single(block: PatternBlock) -> Self {
        Self {
            blocks: vec![block],
        }
    }

    /// Number of nonzero entries over signed-support and group-support blocks.
    pub fn support_size(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                PatternBlock::SignedSupport(s) => s.iter().filter(|&&x| x != 0).count(),
                PatternBlock::GroupSupport(g) => g.iter().filter(|&&x| x).count(),
                PatternBlock::Face(_) | PatternBlock::FullSpace(_) => 0,
            })
            .sum()
    }
}

impl fmt::Display for PatternBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternBlock::SignedSupport(s) => {
                for &x in s {
                    f.write_str(match x.signum() {
                        1 => "+",
                        -1 => "-",
                        _ => "0",
                    })?;
                }
                Ok(())
            }
            PatternBlock::Face(faces) => {
                for face in faces {
                    f.write_str(match face {
                        Face::AtLower => "l",
                        Face::Free => "f",
                        Face::AtUpper => "u",
                    })?;
                }
                Ok(())
            }
            PatternBlock::GroupSupport(g) => {
                f.write_str("#")?;
                for &active in g {
                    f.write_str(if active { "1" } else { "0" })?;
                }
                Ok(())
            }
            PatternBlock::FullSpace(n) => write!(f, "R{n}"),
        }
    }
}

impl fmt::Display for ManifoldPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for PatternBlock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("malformed pattern block {s:?}"));
        if let Some(bits) = s.strip_prefix('#') {
            return bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(bad()),
                })
                .collect::<Result<_>>()
                .map(PatternBlock::GroupSupport);
        }
        if let Some(n) = s.strip_prefix('R') {
            return n.parse().map(PatternBlock::FullSpace).map_err(|_| bad());
        }
        if !s.is_empty() && s.chars().all(|c| matches!(c, 'l' | 'f' | 'u')) {
            return Ok(PatternBlock::Face(
                s.chars()
                    .map(|c| match c {
                        'l' => Face::AtLower,
                        'u' => Face::AtUpper,
                        _ => Face::Free,
                    })
                    .collect(),
            ));
        }
        s.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                '0' => Ok(0),
                _ => Err(bad()),
            })
            .collect::<Result<_>>()
            .map(PatternBlock::SignedSupport)
    }
}

impl FromStr for ManifoldPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Self {
            blocks: s.split('|').map(str::parse).collect::<Result<_>>()?,
        })
    }
}

/// A convex function with an exact prox and the subdifferential calculus
/// needed for identification.
pub trait ProxFn: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    /// Function value; `+∞` outside the domain.
    fn value(&self, x: &Vector) -> f64;

    /// Closed-form minimizer of `f(·) + |· - x|² / (2γ)`, for `γ > 0`.
    fn prox_map(&self, gamma: f64, x: &Vector) -> Vector;

    fn pattern(&self, x: &Vector) -> ManifoldPattern;

    /// Euclidean distance from `v` to `∂f(x)`; `+∞` if `x ∉ dom f`.
    fn subdiff_dist(&self, x: &Vector, v: &Vector) -> f64;

    /// Distance from `v` to the relative boundary of `∂f(x)`, without checking
    /// that `v ∈ ∂f(x)`. `+∞` when `∂f(x)` is a singleton.
    fn margin(&self, x: &Vector, v: &Vector) -> f64;

    /// Orthonormal basis of the tangent space of the active manifold at `ū`
    /// (the manifold is the affine set through `ū` spanned by it).
    fn tangent_basis(&self, u_bar: &Vector) -> Matrix;

    /// Gradient at `u` of the smooth extension `f̄` agreeing with `f` on the
    /// active manifold selected at `ū`.
    fn smooth_gradient(&self, u_bar: &Vector, u: &Vector) -> Vector;

    /// Validated prox.
    fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prox step must be positive, got {gamma}"
            )));
        }
        check_dim(self.dim(), x, "prox input")?;
        Ok(self.prox_map(gamma, x))
    }

    /// Nondegeneracy margin of the subgradient `v` at `x`: positive iff
    /// `v ∈ ri ∂f(x)`.
    fn nondeg_margin(&self, x: &Vector, v: &Vector) -> Result<f64> {
        check_dim(self.dim(), x, "margin point")?;
        check_dim(self.dim(), v, "margin subgradient")?;
        let dist = self.subdiff_dist(x, v);
        if !(dist <= SUBGRADIENT_TOL) {
            return Err(Error::PreconditionViolation(format!(
                "v is not a subgradient: dist(v, ∂f(x)) = {dist:e}"
            )));
        }
        Ok(self.margin(x, v))
    }
}

fn check_dim(expected: usize, x: &Vector, context: &'static str) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

fn coordinate_basis(n: usize, coords: impl Iterator<Item = usize>) -> Matrix {
    let coords: Vec<usize> = coords.collect();
    let mut b = Matrix::zeros(n, coords.len());
    for (j, &i) in coords.iter().enumerate() {
        b[(i, j)] = 1.0;
    }
    b
}

/// `λ |x|₁`.
#[derive(Debug, Clone)]
pub struct L1 {
    dim: usize,
    lambda: f64,
}

impl L1 {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "L1 weight must be positive, got {lambda}"
            )));
        }
        Ok(Self { dim, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

impl ProxFn for L1 {
    fn name(&self) -> String {
        format!("l1(lambda={})", self.lambda)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.lambda * x.lp_norm(1)
    }

    fn prox_map(&self, gamma: f64, x: &Vector) -> Vector {
        x.map(|xi| soft_threshold(xi, gamma * self.lambda))
    }

    fn pattern(&self, x: &Vector) -> ManifoldPattern {
        ManifoldPattern::single(PatternBlock::SignedSupport(
            x.iter()
                .map(|&xi| if xi > 0.0 { 1 } else if xi < 0.0 { -1 } else { 0 })
                .collect(),
        ))
    }

    fn subdiff_dist(&self, x: &Vector, v: &Vector) -> f64 {
        let lam = self.lambda;
        x.iter()
            .zip(v.iter())
            .map(|(&xi, &vi)| {
                let d = if xi == 0.0 {
                    (vi.abs() - lam).max(0.0)
                } else {
                    vi - lam * xi.signum()
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn margin(&self, x: &Vector, v: &Vector) -> f64 {
        x.iter()
            .zip(v.iter())
            .filter(|(&xi, _)| xi == 0.0)
            .map(|(_, &vi)| self.lambda - vi.abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn tangent_basis(&self, u_bar: &Vector) -> Matrix {
        coordinate_basis(self.dim, (0..self.dim).filter(|&i| u_bar[i] != 0.0))
    }

    fn smooth_gradient(&self, u_bar: &Vector, _u: &Vector) -> Vector {
        u_bar.map(|ui| self.lambda * if ui == 0.0 { 0.0 } else { ui.signum() })
    }
}

/// Indicator of the box `[lower, upper]`.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    lower: Vector,
    upper: Vector,
}

impl BoxIndicator {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidParameter("box bounds differ in length".into()));
        }
        if lower
            .iter()
            .zip(upper.iter())
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::InvalidParameter(
                "box bounds must be finite with lower < upper".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// `[l, u]^n`.
    pub fn uniform(dim: usize, l: f64, u: f64) -> Result<Self> {
        Self::new(Vector::from_element(dim, l), Vector::from_element(dim, u))
    }

    fn face(&self, i: usize, xi: f64) -> Face {
        if xi <= self.lower[i] {
            Face::AtLower
        } else if xi >= self.upper[i] {
            Face::AtUpper
        } else {
            Face::Free
        }
    }

    fn contains(&self, x: &Vector) -> bool {
        (0..x.len()).all(|i| self.lower[i] <= x[i] && x[i] <= self.upper[i])
    }
}

impl ProxFn for BoxIndicator {
    fn name(&self) -> String {
        "box".into()
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox_map(&self, _gamma: f64, x: &Vector) -> Vector {
        Vector::from_fn(x.len(), |i, _| x[i].clamp(self.lower[i], self.upper[i]))
    }

    fn pattern(&self, x: &Vector) -> ManifoldPattern {
        ManifoldPattern::single(PatternBlock::Face(
            x.iter().enumerate().map(|(i, &xi)| self.face(i, xi)).collect(),
        ))
    }

    fn subdiff_dist(&self, x: &Vector, v: &Vector) -> f64 {
        if !self.contains(x) {
            return f64::INFINITY;
        }
        (0..x.len())
            .map(|i| {
                let d = match self.face(i, x[i]) {
                    Face::AtLower => v[i].max(0.0),
                    Face::AtUpper => (-v[i]).max(0.0),
                    Face::Free => v[i].abs(),
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn margin(&self, x: &Vector, v: &Vector) -> f64 {
        (0..x.len())
            .filter(|&i| self.face(i, x[i]) != Face::Free)
            .map(|i| v[i].abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn tangent_basis(&self, u_bar: &Vector) -> Matrix {
        coordinate_basis(
            self.dim(),
            (0..self.dim()).filter(|&i| self.face(i, u_bar[i]) == Face::Free),
        )
    }

    fn smooth_gradient(&self, _u_bar: &Vector, u: &Vector) -> Vector {
        Vector::zeros(u.len())
    }
}

/// `λ Σ_g |x_g|₂` over a partition of the coordinates into groups.
#[derive(Debug, Clone)]
pub struct GroupL1 {
    dim: usize,
    groups: Vec<Vec<usize>>,
    lambda: f64,
}

impl GroupL1 {
    /// `groups` must partition `0..dim`; overlapping groups are rejected.
    pub fn new(dim: usize, groups: Vec<Vec<usize>>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "group-L1 weight must be positive, got {lambda}"
            )));
        }
        let mut seen = vec![false; dim];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::InvalidParameter("empty group".into()));
            }
            for &i in g {
                if i >= dim {
                    return Err(Error::InvalidParameter(format!(
                        "group index {i} out of range for dimension {dim}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidParameter(format!(
                        "coordinate {i} appears in more than one group"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!(
                "coordinate {i} is not covered by any group"
            )));
        }
        Ok(Self { dim, groups, lambda })
    }

    fn group_norm(g: &[usize], x: &Vector) -> f64 {
        g.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
    }
}

impl ProxFn for GroupL1 {
    fn name(&self) -> String {
        format!("group_l1(lambda={})", self.lambda)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.lambda
            * self
                .groups
                .iter()
                .map(|g| Self::group_norm(g, x))
                .sum::<f64>()
    }

    fn prox_map(&self, gamma: f64, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim);
        let t = gamma * self.lambda;
        for g in &self.groups {
            let norm = Self::group_norm(g, x);
            if norm > t {
                let scale = 1.0 - t / norm;
                for &i in g {
                    out[i] = scale * x[i];
                }
            }
        }
        out
    }

    fn pattern(&self, x: &Vector) -> ManifoldPattern {
        ManifoldPattern::single(PatternBlock::GroupSupport(
            self.groups
                .iter()
                .map(|g| Self::group_norm(g, x) > 0.0)
                .collect(),
        ))
    }

    fn subdiff_dist(&self, x: &Vector, v: &Vector) -> f64 {
        let lam = self.lambda;
        self.groups
            .iter()
            .map(|g| {
                let xn = Self::group_norm(g, x);
                if xn == 0.0 {
                    let d = (Self::group_norm(g, v) - lam).max(0.0);
                    d * d
                } else {
                    g.iter()
                        .map(|&i| {
                            let d = v[i] - lam * x[i] / xn;
                            d * d
                        })
                        .sum()
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    fn margin(&self, x: &Vector, v: &Vector) -> f64 {
        self.groups
            .iter()
            .filter(|g| Self::group_norm(g, x) == 0.0)
            .map(|g| self.lambda - Self::group_norm(g, v))
            .fold(f64::INFINITY, f64::min)
    }

    fn tangent_basis(&self, u_bar: &Vector) -> Matrix {
        let mut coords: Vec<usize> = self
            .groups
            .iter()
            .filter(|g| Self::group_norm(g, u_bar) > 0.0)
            .flatten()
            .copied()
            .collect();
        coords.sort_unstable();
        coordinate_basis(self.dim, coords.into_iter())
    }

    fn smooth_gradient(&self, u_bar: &Vector, u: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for g in &self.groups {
            if Self::group_norm(g, u_bar) > 0.0 {
                let n = Self::group_norm(g, u);
                for &i in g {
                    out[i] = self.lambda * u[i] / n;
                }
            }
        }
        out
    }
}

/// `f ≡ 0`.
#[derive(Debug, Clone)]
pub struct Zero {
    dim: usize,
}

impl Zero {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ProxFn for Zero {
    fn name(&self) -> String {
        "zero".into()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn prox_map(&self, _gamma: f64, x: &Vector) -> Vector {
        x.clone()
    }

    fn pattern(&self, _x: &Vector) -> ManifoldPattern {
        ManifoldPattern::single(PatternBlock::FullSpace(self.dim))
    }

    fn subdiff_dist(&self, _x: &Vector, v: &Vector) -> f64 {
        v.norm()
    }

    fn margin(&self, _x: &Vector, _v: &Vector) -> f64 {
        f64::INFINITY
    }

    fn tangent_basis(&self, _u_bar: &Vector) -> Matrix {
        Matrix::identity(self.dim, self.dim)
    }

    fn smooth_gradient(&self, _u_bar: &Vector, u: &Vector) -> Vector {
        Vector::zeros(u.len())
    }
}

/// `½ |x - c|²`, a smooth member of the zoo.
#[derive(Debug, Clone)]
pub struct QuadraticShift {
    center: Vector,
}

impl QuadraticShift {
    pub fn new(center: Vector) -> Self {
        Self { center }
    }
}

impl ProxFn for QuadraticShift {
    fn name(&self) -> String {
        "quadratic".into()
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * (x - &self.center).norm_squared()
    }

    fn prox_map(&self, gamma: f64, x: &Vector) -> Vector {
        (x + &self.center * gamma) / (1.0 + gamma)
    }

    fn pattern(&self, _x: &Vector) -> ManifoldPattern {
        ManifoldPattern::single(PatternBlock::FullSpace(self.dim()))
    }

    fn subdiff_dist(&self, x: &Vector, v: &Vector) -> f64 {
        (v - (x - &self.center)).norm()
    }

    fn margin(&self, _x: &Vector, _v: &Vector) -> f64 {
        f64::INFINITY
    }

    fn tangent_basis(&self, _u_bar: &Vector) -> Matrix {
        Matrix::identity(self.dim(), self.dim())
    }

    fn smooth_gradient(&self, _u_bar: &Vector, u: &Vector) -> Vector {
        u - &self.center
    }
}

/// Separable sum `f(x) = Σ_i f_i(x_i)` over consecutive coordinate blocks.
#[derive(Debug, Clone)]
pub struct DirectSum {
    parts: Vec<Arc<dyn ProxFn>>,
    dim: usize,
}

impl DirectSum {
    pub fn new(parts: Vec<Arc<dyn ProxFn>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("direct sum needs at least one part".into()));
        }
        let dim = parts.iter().map(|p| p.dim()).sum();
        Ok(Self { parts, dim })
    }

    fn blocks<'a>(&'a self, x: &'a Vector) -> impl Iterator<Item = (&'a Arc<dyn ProxFn>, Vector)> + 'a {
        let mut offset = 0;
        self.parts.iter().map(move |p| {
            let block = x.rows(offset, p.dim()).into_owned();
            offset += p.dim();
            (p, block)
        })
    }

    fn stack(&self, pieces: impl Iterator<Item = Vector>) -> Vector {
        Vector::from_iterator(self.dim, pieces.flat_map(|v| v.iter().copied().collect::<Vec<_>>()))
    }
}

impl ProxFn for DirectSum {
    fn name(&self) -> String {
        let names: Vec<String> = self.parts.iter().map(|p| p.name()).collect();
        names.join(" ⊕ ")
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.blocks(x).map(|(p, xb)| p.value(&xb)).sum()
    }

    fn prox_map(&self, gamma: f64, x: &Vector) -> Vector {
        self.stack(self.blocks(x).map(|(p, xb)| p.prox_map(gamma, &xb)))
    }

    fn pattern(&self, x: &Vector) -> ManifoldPattern {
        ManifoldPattern {
            blocks: self
                .blocks(x)
                .flat_map(|(p, xb)| p.pattern(&xb).blocks)
                .collect(),
        }
    }

    fn subdiff_dist(&self, x: &Vector, v: &Vector) -> f64 {
        self.blocks(x)
            .zip(self.blocks(v))
            .map(|((p, xb), (_, vb))| p.subdiff_dist(&xb, &vb).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn margin(&self, x: &Vector, v: &Vector) -> f64 {
        self.blocks(x)
            .zip(self.blocks(v))
            .map(|((p, xb), (_, vb))| p.margin(&xb, &vb))
            .fold(f64::INFINITY, f64::min)
    }

    fn tangent_basis(&self, u_bar: &Vector) -> Matrix {
        let pieces: Vec<Matrix> = self.blocks(u_bar).map(|(p, ub)| p.tangent_basis(&ub)).collect();
        let cols = pieces.iter().map(|m| m.ncols()).sum();
        let mut out = Matrix::zeros(self.dim, cols);
        let (mut r, mut c) = (0, 0);
        for m in pieces {
            out.view_mut((r, c), m.shape()).copy_from(&m);
            r += m.nrows();
            c += m.ncols();
        }
        out
    }

    fn smooth_gradient(&self, u_bar: &Vector, u: &Vector) -> Vector {
        self.stack(
            self.blocks(u_bar)
                .zip(self.blocks(u))
                .map(|((p, ub), (_, uu))| p.smooth_gradient(&ub, &uu)),
        )
    }
}

/// Coordinate representation of the graph of `∂(f + s)` near `(ū, v̄)`:
/// `H(w) = ū + T w` spans the active manifold, and
/// `G(w, z) = ∇s(H(w)) + ∇f̄(H(w)) + N (x̄ + z)` with `N` a basis of the
/// normal space and `N x̄` the normal component of `v̄`.
#[derive(Debug, Clone)]
pub struct SubdiffGraphRep {
    pub rep: CoordGraphRep,
}

/// Builds [`SubdiffGraphRep`] for `f + smooth_part`, where `smooth_part` is a
/// scalar C² function on `U`.
///
/// Requires `v̄ - ∇s(ū) ∈ ri ∂f(ū)`; a zero margin is reported as
/// [`Error::Degenerate`].
pub fn subdiff_graph_rep(
    f: Arc<dyn ProxFn>,
    smooth_part: &SmoothMap,
    u_bar: &Vector,
    v_bar: &Vector,
) -> Result<SubdiffGraphRep> {
    let n = f.dim();
    check_dim(n, u_bar, "ū")?;
    check_dim(n, v_bar, "v̄")?;
    if smooth_part.in_dim() != n || smooth_part.out_dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "smooth part",
            expected: n,
            got: smooth_part.in_dim(),
        });
    }
    if !f.value(u_bar).is_finite() {
        return Err(Error::PreconditionViolation("ū is outside dom f".into()));
    }
    let residual = v_bar - smooth_part.gradient(u_bar)?;
    let margin = f.nondeg_margin(u_bar, &residual)?;
    if !(margin > 0.0) {
        return Err(Error::Degenerate(format!(
            "v̄ lies on the relative boundary of the subdifferential (margin {margin})"
        )));
    }

    let tangent = f.tangent_basis(u_bar);
    let normal = Subspace::from_orthonormal(tangent.clone())?
        .complement()
        .basis()
        .clone();
    let k = tangent.ncols();
    let x_bar = normal.transpose() * (&residual - f.smooth_gradient(u_bar, u_bar));

    let h = SmoothMap::affine(tangent.clone(), u_bar.clone());
    let (s, u_bar) = (smooth_part.clone(), u_bar.clone());
    let g = SmoothMap::new(n, n, move |wz| {
        let (w, z) = split(wz, k);
        let u = &tangent * w + &u_bar;
        let grad_s = s.gradient(&u).unwrap_or_else(|_| nan_vector(n));
        grad_s + f.smooth_gradient(&u_bar, &u) + &normal * (&x_bar + z)
    });
    Ok(SubdiffGraphRep {
        rep: CoordGraphRep::new(h, g)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{constant_rank_probe, regularity_check, smooth_selection, Verdict};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    /// Grid search with step 1e-4 on [lo, hi], then golden-section refinement
    /// around the best grid point.
    fn brute_min_1d(phi: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let step = 1e-4;
        let n = ((hi - lo) / step).ceil() as usize;
        let mut best = lo;
        for i in 0..=n {
            let t = (lo + i as f64 * step).min(hi);
            if phi(t) < phi(best) {
                best = t;
            }
        }
        let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if phi(c) <= phi(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    fn intro_fn() -> Arc<dyn ProxFn> {
        Arc::new(
            DirectSum::new(vec![
                Arc::new(L1::new(1, 1.0).unwrap()),
                Arc::new(Zero::new(1)),
            ])
            .unwrap(),
        )
    }

    fn y_squared() -> SmoothMap {
        SmoothMap::new(2, 1, |u| v(&[u[1] * u[1]]))
            .with_jacobian(|u| Matrix::from_row_slice(1, 2, &[0.0, 2.0 * u[1]]))
    }

    #[test]
    fn l1_prox_matches_grid_oracle() {
        let f = L1::new(2, 1.0).unwrap();
        let x = v(&[2.0, -0.5]);
        let p = f.prox(1.0, &x).unwrap();
        for i in 0..2 {
            let xi = x[i];
            let oracle = brute_min_1d(|t| t.abs() + 0.5 * (t - xi).powi(2), xi - 3.0, xi + 3.0);
            assert!((p[i] - oracle).abs() < 1e-6, "coord {i}: {} vs {oracle}", p[i]);
        }
        assert_eq!(p, v(&[1.0, 0.0]));
    }

    #[test]
    fn prox_fixes_minimizer() {
        let f = L1::new(2, 1.0).unwrap();
        assert_eq!(f.prox(1.0, &v(&[0.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn box_prox_is_projection() {
        let f = BoxIndicator::uniform(3, 0.0, 1.0).unwrap();
        assert_eq!(f.prox(7.0, &v(&[-3.0, 0.5, 9.0])).unwrap(), v(&[0.0, 0.5, 1.0]));
    }

    #[test]
    fn prox_rejects_bad_step() {
        let f = L1::new(1, 1.0).unwrap();
        assert!(matches!(f.prox(0.0, &v(&[1.0])), Err(Error::InvalidParameter(_))));
        assert!(matches!(f.prox(-1.0, &v(&[1.0])), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn group_prox_shrinks_blocks() {
        let f = GroupL1::new(3, vec![vec![0, 1], vec![2]], 1.0).unwrap();
        let p = f.prox(1.0, &v(&[3.0, 4.0, 0.5])).unwrap();
        assert!((p - v(&[2.4, 3.2, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn group_partition_is_enforced() {
        assert!(GroupL1::new(3, vec![vec![0, 1], vec![1, 2]], 1.0).is_err());
        assert!(GroupL1::new(3, vec![vec![0, 1]], 1.0).is_err());
        assert!(GroupL1::new(2, vec![vec![0, 2]], 1.0).is_err());
    }

    #[test]
    fn l1_subdiff_distances() {
        let f1 = L1::new(1, 1.0).unwrap();
        assert_eq!(f1.subdiff_dist(&v(&[0.0]), &v(&[0.5])), 0.0);
        assert!((f1.subdiff_dist(&v(&[2.0]), &v(&[0.7])) - 0.3).abs() < 1e-15);
        let f2 = L1::new(2, 1.0).unwrap();
        assert!((f2.subdiff_dist(&v(&[0.0, 0.0]), &v(&[1.5, 0.0])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_distance_outside_domain_is_infinite() {
        let f = BoxIndicator::uniform(2, 0.0, 1.0).unwrap();
        assert_eq!(f.subdiff_dist(&v(&[2.0, 0.5]), &v(&[0.0, 0.0])), f64::INFINITY);
        assert_eq!(f.subdiff_dist(&v(&[0.0, 1.0]), &v(&[-3.0, 2.0])), 0.0);
        assert_eq!(f.subdiff_dist(&v(&[0.0, 0.5]), &v(&[1.0, 0.0])), 1.0);
    }

    #[test]
    fn patterns() {
        let l1 = L1::new(3, 1.0).unwrap();
        let p = l1.pattern(&v(&[0.0, -2.0, 3.0]));
        assert_eq!(p, ManifoldPattern::single(PatternBlock::SignedSupport(vec![0, -1, 1])));
        assert_eq!(p.to_string(), "0-+");

        let b = BoxIndicator::uniform(3, 0.0, 1.0).unwrap();
        assert_eq!(
            b.pattern(&v(&[0.0, 0.5, 1.0])),
            ManifoldPattern::single(PatternBlock::Face(vec![Face::AtLower, Face::Free, Face::AtUpper]))
        );

        let g = GroupL1::new(3, vec![vec![0, 1], vec![2]], 1.0).unwrap();
        assert_eq!(
            g.pattern(&v(&[0.0, 0.0, 4.0])),
            ManifoldPattern::single(PatternBlock::GroupSupport(vec![false, true]))
        );
        assert_eq!(intro_fn().pattern(&v(&[0.0, 3.0])).to_string(), "0|R1");
    }

    #[test]
    fn pattern_strings_parse_back() {
        for s in ["+0-", "lfu", "#01", "R3", "0|R1", "+-|#1|lff"] {
            let p: ManifoldPattern = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("+x".parse::<ManifoldPattern>().is_err());
    }

    #[test]
    fn l1_margins() {
        let f = L1::new(2, 1.0).unwrap();
        assert!((f.nondeg_margin(&v(&[1.0, 0.0]), &v(&[1.0, 0.3])).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(f.nondeg_margin(&v(&[1.0, 0.0]), &v(&[1.0, 1.0])).unwrap(), 0.0);
        assert_eq!(f.nondeg_margin(&v(&[1.0, -2.0]), &v(&[1.0, -1.0])).unwrap(), f64::INFINITY);
        assert!(matches!(
            f.nondeg_margin(&v(&[1.0, 0.0]), &v(&[0.0, 0.0])),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn intro_margin_is_one() {
        assert_eq!(intro_fn().nondeg_margin(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn intro_subdiff_graph() {
        let rep = subdiff_graph_rep(intro_fn(), &y_squared(), &v(&[0.0, 0.0]), &v(&[0.0, 0.0]))
            .unwrap()
            .rep;
        assert!(regularity_check(&rep));
        let (u, g) = rep.graph_point(&v(&[0.2]), &v(&[-0.5])).unwrap();
        assert_eq!(u, v(&[0.0, 0.2]));
        assert!((g - v(&[-0.5, 0.4])).norm() < 1e-9);
        assert!((smooth_selection(&rep, &v(&[0.2])).unwrap() - v(&[0.0, 0.4])).norm() < 1e-9);
        let cert = constant_rank_probe(&rep, 0.1, 50, 1).unwrap();
        assert_eq!(cert.verdict, Verdict::ConstantRank);
        assert_eq!(cert.manifold_dim, Some(1));
        assert_eq!(cert.graph_dim, Some(2));
    }

    #[test]
    fn scalar_l1_graph_at_zero() {
        let f: Arc<dyn ProxFn> = Arc::new(L1::new(1, 1.0).unwrap());
        let rep = subdiff_graph_rep(f, &SmoothMap::zero(1, 1), &v(&[0.0]), &v(&[0.2])).unwrap().rep;
        let cert = constant_rank_probe(&rep, 0.1, 20, 1).unwrap();
        assert_eq!(cert.manifold_dim, Some(0));
        assert_eq!(cert.graph_dim, Some(1));
        let (u, g) = rep.graph_point(&Vector::zeros(0), &v(&[0.05])).unwrap();
        assert_eq!(u, v(&[0.0]));
        assert!((g[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_function_graph() {
        let f: Arc<dyn ProxFn> = Arc::new(Zero::new(3));
        let u = v(&[0.1, -0.2, 0.3]);
        let rep = subdiff_graph_rep(f, &SmoothMap::zero(3, 1), &u, &Vector::zeros(3)).unwrap().rep;
        let cert = constant_rank_probe(&rep, 0.1, 20, 1).unwrap();
        assert_eq!(cert.manifold_dim, Some(3));
        assert_eq!(cert.graph_dim, Some(3));
    }

    #[test]
    fn degenerate_margin_rejected() {
        let f: Arc<dyn ProxFn> = Arc::new(L1::new(1, 1.0).unwrap());
        assert!(matches!(
            subdiff_graph_rep(f, &SmoothMap::zero(1, 1), &v(&[0.0]), &v(&[1.0])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn group_and_box_graphs_have_full_dimension() {
        let g: Arc<dyn ProxFn> = Arc::new(GroupL1::new(4, vec![vec![0, 1], vec![2, 3]], 1.0).unwrap());
        let u = v(&[0.6, 0.8, 0.0, 0.0]);
        let vbar = v(&[0.6, 0.8, 0.3, -0.2]);
        let rep = subdiff_graph_rep(g, &SmoothMap::zero(4, 1), &u, &vbar).unwrap().rep;
        let cert = constant_rank_probe(&rep, 0.05, 30, 2).unwrap();
        assert_eq!((cert.manifold_dim, cert.graph_dim), (Some(2), Some(4)));

        let b: Arc<dyn ProxFn> = Arc::new(BoxIndicator::uniform(3, 0.0, 1.0).unwrap());
        let u = v(&[0.0, 0.5, 1.0]);
        let vbar = v(&[-0.5, 0.0, 2.0]);
        let rep = subdiff_graph_rep(b, &SmoothMap::zero(3, 1), &u, &vbar).unwrap().rep;
        let cert = constant_rank_probe(&rep, 0.05, 30, 2).unwrap();
        assert_eq!((cert.manifold_dim, cert.graph_dim), (Some(1), Some(3)));
    }

    #[test]
    fn quadratic_prox_and_residual() {
        let f = QuadraticShift::new(v(&[1.0, -1.0]));
        let x = v(&[3.0, 0.0]);
        let p = f.prox(2.0, &x).unwrap();
        let grad = (&x - &p) / 2.0;
        assert!(f.subdiff_dist(&p, &grad) < 1e-14);
    }
}
