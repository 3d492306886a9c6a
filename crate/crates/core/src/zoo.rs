//! Named building blocks addressable from configuration files: embedded
//! manifolds (chart + dual chart), smooth maps, and prox-friendly functions.
//!
//! Every smooth map built here carries an exact Jacobian.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::manifold::{Chart, DualChart, SmoothMap};
use crate::prox::{BoxIndicator, DirectSum, GroupL1, ProxFn, QuadraticShift, Zero, L1};

/// Dense matrix from row vectors. `cols` fixes the width when `rows` is empty.
pub fn matrix_from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Matrix> {
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            context: "matrix row length",
            expected: cols,
            got: bad.len(),
        });
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn row_width(rows: &[Vec<f64>]) -> Result<usize> {
    rows.first().map(Vec::len).ok_or_else(|| {
        Error::InvalidParameter("matrix needs at least one row to fix its width".into())
    })
}

/// A monomial `coef · Π x_j^{e_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    /// Parses `[coef, e_1, ..., e_n]`; exponents must be non-negative integers.
    pub fn from_coefficients(list: &[f64], in_dim: usize) -> Result<Self> {
        let Some((&coef, exps)) = list.split_first() else {
            return Err(Error::InvalidParameter("empty monomial".into()));
        };
        if exps.len() != in_dim {
            return Err(Error::DimensionMismatch {
                context: "monomial exponents",
                expected: in_dim,
                got: exps.len(),
            });
        }
        let exponents = exps
            .iter()
            .map(|&e| {
                if e >= 0.0 && e.fract() == 0.0 && e <= u32::MAX as f64 {
                    Ok(e as u32)
                } else {
                    Err(Error::InvalidParameter(format!("exponent {e} is not a non-negative integer")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { coef, exponents })
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.exponents
            .iter()
            .enumerate()
            .fold(self.coef, |acc, (j, &e)| acc * x[j].powi(e as i32))
    }

    pub fn partial(&self, x: &Vector, i: usize) -> f64 {
        let ei = self.exponents[i];
        if ei == 0 {
            return 0.0;
        }
        self.exponents
            .iter()
            .enumerate()
            .fold(self.coef * ei as f64, |acc, (j, &e)| {
                let e = if j == i { e - 1 } else { e };
                acc * x[j].powi(e as i32)
            })
    }
}

/// A vector of polynomials `R^n -> R^m`, one monomial list per component.
pub fn polynomial_map(in_dim: usize, components: Vec<Vec<Monomial>>) -> SmoothMap {
    let comps = Arc::new(components);
    let out_dim = comps.len();
    let (ce, cj) = (comps.clone(), comps);
    SmoothMap::new(in_dim, out_dim, move |x| {
        Vector::from_iterator(out_dim, ce.iter().map(|c| c.iter().map(|m| m.eval(x)).sum()))
    })
    .with_jacobian(move |x| {
        Matrix::from_fn(out_dim, in_dim, |r, i| cj[r].iter().map(|m| m.partial(x, i)).sum())
    })
}

/// Smooth maps as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// `x ↦ A x + b`.
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    Identity { dim: usize },
    Zero { in_dim: usize, out_dim: usize },
    /// Scalar `½ xᵀ Q x + bᵀ x + c`; `Q` is symmetrized.
    Quadratic {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        constant: f64,
    },
    /// One list of monomials `[coef, e_1, ..., e_n]` per output component.
    Polynomial {
        in_dim: usize,
        components: Vec<Vec<Vec<f64>>>,
    },
}

impl MapSpec {
    pub fn build(&self) -> Result<SmoothMap> {
        match self {
            MapSpec::Linear { matrix, offset } => {
                let a = matrix_from_rows(matrix, row_width(matrix)?)?;
                let b = match offset {
                    Some(b) if b.len() != a.nrows() => {
                        return Err(Error::DimensionMismatch {
                            context: "linear map offset",
                            expected: a.nrows(),
                            got: b.len(),
                        })
                    }
                    Some(b) => Vector::from_column_slice(b),
                    None => Vector::zeros(a.nrows()),
                };
                Ok(SmoothMap::affine(a, b))
            }
            MapSpec::Identity { dim } => Ok(SmoothMap::identity(*dim)),
            MapSpec::Zero { in_dim, out_dim } => Ok(SmoothMap::zero(*in_dim, *out_dim)),
            MapSpec::Quadratic {
                matrix,
                linear,
                constant,
            } => {
                let n = matrix.len();
                let q = matrix_from_rows(matrix, n)?;
                let q = (&q + q.transpose()) * 0.5;
                let b = match linear {
                    Some(b) if b.len() != n => {
                        return Err(Error::DimensionMismatch {
                            context: "quadratic linear term",
                            expected: n,
                            got: b.len(),
                        })
                    }
                    Some(b) => Vector::from_column_slice(b),
                    None => Vector::zeros(n),
                };
                Ok(quadratic(q, b, *constant))
            }
            MapSpec::Polynomial { in_dim, components } => {
                let comps = components
                    .iter()
                    .map(|c| {
                        c.iter()
                            .map(|m| Monomial::from_coefficients(m, *in_dim))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(polynomial_map(*in_dim, comps))
            }
        }
    }

    /// Builds the map and checks it is scalar on `R^dim`.
    pub fn build_scalar(&self, dim: usize) -> Result<SmoothMap> {
        let map = self.build()?;
        if map.in_dim() != dim || map.out_dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "scalar function input dimension",
                expected: dim,
                got: map.in_dim(),
            });
        }
        Ok(map)
    }
}

/// `½ xᵀ Q x + bᵀ x + c` for symmetric `Q`.
pub fn quadratic(q: Matrix, b: Vector, c: f64) -> SmoothMap {
    let n = q.nrows();
    let (qe, be) = (q.clone(), b.clone());
    SmoothMap::new(n, 1, move |x| Vector::from_element(1, 0.5 * x.dot(&(&qe * x)) + be.dot(x) + c))
        .with_jacobian(move |x| {
            let g = &q * x + &b;
            Matrix::from_row_slice(1, n, g.as_slice())
        })
}

/// Built-in embedded manifolds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    /// Unit circle in `R²`, angle chart starting at `base_angle`.
    Circle {
        #[serde(default)]
        base_angle: f64,
    },
    /// Unit sphere in `R³` around the north pole `(0, 0, 1)`.
    Sphere2,
    /// `{0} × R` in `R²`.
    VerticalLine,
    /// `{u : ⟨a, u⟩ = offset}`.
    Hyperplane {
        normal: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `u₃ = u₁² + u₂²` in `R³`, charted over the origin.
    Paraboloid,
    /// All of `R^dim`.
    FullSpace { dim: usize },
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<(Chart, DualChart)> {
        let (h, p) = match self {
            ManifoldSpec::Circle { base_angle } => circle(*base_angle),
            ManifoldSpec::Sphere2 => sphere2(),
            ManifoldSpec::VerticalLine => vertical_line(),
            ManifoldSpec::Hyperplane { normal, offset } => hyperplane(&Vector::from_column_slice(normal), *offset)?,
            ManifoldSpec::Paraboloid => paraboloid(),
            ManifoldSpec::FullSpace { dim } => (SmoothMap::identity(*dim), SmoothMap::zero(*dim, 0)),
        };
        let chart = Chart::new(h)?;
        let dual = DualChart::new(p, chart.base().clone())?;
        Ok((chart, dual))
    }
}

fn circle(t0: f64) -> (SmoothMap, SmoothMap) {
    let h = SmoothMap::new(1, 2, move |w| Vector::from_vec(vec![(t0 + w[0]).cos(), (t0 + w[0]).sin()]))
        .with_jacobian(move |w| Matrix::from_column_slice(2, 1, &[-(t0 + w[0]).sin(), (t0 + w[0]).cos()]));
    (h, unit_sphere_equation(2))
}

fn unit_sphere_equation(n: usize) -> SmoothMap {
    SmoothMap::new(n, 1, |u| Vector::from_element(1, u.norm_squared() - 1.0))
        .with_jacobian(move |u| Matrix::from_row_slice(1, n, (u * 2.0).as_slice()))
}

fn sphere2() -> (SmoothMap, SmoothMap) {
    let h = SmoothMap::new(2, 3, |w| {
        let s = 1.0 - w.norm_squared();
        let top = if s >= 0.0 { s.sqrt() } else { f64::NAN };
        Vector::from_vec(vec![w[0], w[1], top])
    })
    .with_jacobian(|w| {
        let r = (1.0 - w.norm_squared()).sqrt();
        Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -w[0] / r, -w[1] / r])
    });
    (h, unit_sphere_equation(3))
}

fn vertical_line() -> (SmoothMap, SmoothMap) {
    (
        SmoothMap::linear(Matrix::from_column_slice(2, 1, &[0.0, 1.0])),
        SmoothMap::linear(Matrix::from_row_slice(1, 2, &[1.0, 0.0])),
    )
}

fn hyperplane(a: &Vector, offset: f64) -> Result<(SmoothMap, SmoothMap)> {
    let norm2 = a.norm_squared();
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::InvalidParameter("hyperplane normal must be nonzero".into()));
    }
    let n = a.len();
    let base = a * (offset / norm2);
    let row = Matrix::from_row_slice(1, n, a.as_slice());
    let tangent = Subspace::range_of(&row.transpose()).complement().basis().clone();
    Ok((
        SmoothMap::affine(tangent, base),
        SmoothMap::affine(row, Vector::from_element(1, -offset)),
    ))
}

fn paraboloid() -> (SmoothMap, SmoothMap) {
    let h = SmoothMap::new(2, 3, |w| Vector::from_vec(vec![w[0], w[1], w.norm_squared()]))
        .with_jacobian(|w| Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0 * w[0], 2.0 * w[1]]));
    let p = SmoothMap::new(3, 1, |u| Vector::from_element(1, u[2] - u[0] * u[0] - u[1] * u[1]))
        .with_jacobian(|u| Matrix::from_row_slice(1, 3, &[-2.0 * u[0], -2.0 * u[1], 1.0]));
    (h, p)
}

/// Prox-friendly functions by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxSpec {
    L1 { dim: usize, lambda: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    GroupL1 { dim: usize, groups: Vec<Vec<usize>>, lambda: f64 },
    Zero { dim: usize },
    /// `½ |x - center|²`.
    Quadratic { center: Vec<f64> },
    DirectSum { parts: Vec<ProxSpec> },
}

impl ProxSpec {
    pub fn build(&self) -> Result<Arc<dyn ProxFn>> {
        Ok(match self {
            ProxSpec::L1 { dim, lambda } => Arc::new(L1::new(*dim, *lambda)?),
            ProxSpec::Box { lower, upper } => Arc::new(BoxIndicator::new(
                Vector::from_column_slice(lower),
                Vector::from_column_slice(upper),
            )?),
            ProxSpec::GroupL1 { dim, groups, lambda } => Arc::new(GroupL1::new(*dim, groups.clone(), *lambda)?),
            ProxSpec::Zero { dim } => Arc::new(Zero::new(*dim)),
            ProxSpec::Quadratic { center } => Arc::new(QuadraticShift::new(Vector::from_column_slice(center))),
            ProxSpec::DirectSum { parts } => Arc::new(DirectSum::new(
                parts.iter().map(ProxSpec::build).collect::<Result<_>>()?,
            )?),
        })
    }
}

/// Every analytic-Jacobian map shipped here, with an evaluation point
/// inside its domain, for derivative cross-checks.
pub fn jacobian_catalog() -> Vec<(String, SmoothMap, Vector)> {
    let mut out = Vec::new();
    let manifolds = [
        ("circle", ManifoldSpec::Circle { base_angle: 0.7 }, 1),
        ("sphere2", ManifoldSpec::Sphere2, 2),
        ("vertical_line", ManifoldSpec::VerticalLine, 1),
        (
            "hyperplane",
            ManifoldSpec::Hyperplane {
                normal: vec![1.0, -2.0, 0.5],
                offset: 1.5,
            },
            2,
        ),
        ("paraboloid", ManifoldSpec::Paraboloid, 2),
        ("full_space", ManifoldSpec::FullSpace { dim: 3 }, 3),
    ];
    for (name, spec, k) in manifolds {
        let (chart, dual) = spec.build().expect("built-in manifold");
        let w = Vector::from_fn(k, |i, _| 0.13 + 0.07 * i as f64);
        let u = chart.point(&w).expect("chart point");
        out.push((format!("{name}.chart"), chart.h().clone(), w));
        if dual.codim() > 0 {
            out.push((format!("{name}.dual"), dual.p().clone(), u));
        }
    }
    let poly = MapSpec::Polynomial {
        in_dim: 2,
        components: vec![
            vec![vec![1.0, 2.0, 0.0], vec![-3.0, 1.0, 1.0]],
            vec![vec![0.5, 0.0, 3.0], vec![2.0, 0.0, 0.0]],
        ],
    };
    let quad = MapSpec::Quadratic {
        matrix: vec![vec![2.0, 1.0], vec![0.0, 3.0]],
        linear: Some(vec![1.0, -1.0]),
        constant: 0.25,
    };
    let lin = MapSpec::Linear {
        matrix: vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 4.0]],
        offset: Some(vec![1.0, 0.0, -1.0]),
    };
    for (name, spec) in [("polynomial", poly), ("quadratic", quad), ("linear", lin)] {
        out.push((name.to_string(), spec.build().expect("catalog map"), Vector::from_vec(vec![0.4, -0.9])));
    }
    out
}
