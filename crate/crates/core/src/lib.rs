//! Numerical tools for partly smooth set-valued mappings.
//!
//! A set-valued mapping `Φ: U ⇉ V` is partly smooth at `(ū, v̄)` when its
//! graph is locally a smooth manifold whose projection onto `U` has locally
//! constant rank; the image of that projection is the *active manifold*.
//! This crate certifies the property numerically and uses it:
//!
//! - [`manifold`]: smooth maps with Jacobians, charts `H: W -> U` and dual
//!   charts `P: U -> X` of embedded manifolds, tangent and normal spaces.
//! - [`graph`]: coordinate and dual graph representations, the sampled
//!   constant-rank probe, normal bundles, and the sum rule.
//! - [`prox`]: l1, box, group-l1, zero and quadratic functions with closed
//!   form proximal maps, active-manifold patterns, nondegeneracy margins, and
//!   graph representations of their subdifferentials.
//! - [`saddle`]: primal-dual splitting for
//!   `inf_x sup_y (f + p)(x) + ⟨Ax, y⟩ - (g + q)(y)` with detection of the
//!   iteration at which the active manifolds are identified.
//! - [`manifold_opt`]: smooth objectives on manifolds; covariant gradient and
//!   Hessian, second-order sufficiency, and transversality of the
//!   subdifferential graph.
//! - [`zoo`] and [`harness`]: named building blocks and a JSON-config
//!   experiment runner behind the `psm` binary.
//!
//! Runnable examples live in `examples/`:
//!
//! | example | shows |
//! |---------|-------|
//! | `sqrt_probe` | a graph whose projected rank jumps (not partly smooth) |
//! | `normal_bundles` | normal bundles of the circle and sphere, chart and zero-set forms |
//! | `prox_library` | proximal maps, patterns and margins |
//! | `subdifferential_dims` | subdifferential graph dimensions and the sum rule |
//! | `identify_intro` | finite identification by the primal-dual method |
//! | `circle_second_order` | covariant Hessian, quadratic growth, transversality |
//! | `run_configs` | running the shipped experiment configs |
//!
//! ```
//! use partsmooth::graph::{constant_rank_probe, CoordGraphRep, Verdict};
//! use partsmooth::linalg::Matrix;
//! use partsmooth::manifold::SmoothMap;
//!
//! // graph of ∂(|x| + y²) near the origin: (y, z) ↦ ((0, y), (z, 2y))
//! let h = SmoothMap::linear(Matrix::from_column_slice(2, 1, &[0.0, 1.0]));
//! let g = SmoothMap::linear(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]));
//! let cert = constant_rank_probe(&CoordGraphRep::new(h, g).unwrap(), 0.1, 50, 1).unwrap();
//! assert_eq!(cert.verdict, Verdict::ConstantRank);
//! assert_eq!(cert.manifold_dim, Some(1));
//! ```

// NaN-rejecting checks are written as `!(x <= tol)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod manifold_opt;
pub mod prox;
pub mod saddle;
pub mod sampling;
pub mod zoo;
