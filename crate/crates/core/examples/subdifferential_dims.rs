//! The graph of `∂f` for the l1 norm has dimension `n` everywhere it is
//! partly smooth, while the active manifold has dimension `|support(ū)|`.
//! Adding a smooth perturbation leaves all of these unchanged.

use std::sync::Arc;

use partsmooth::graph::{constant_rank_probe, sum_rule_transform};
use partsmooth::linalg::{Matrix, Vector};
use partsmooth::manifold::SmoothMap;
use partsmooth::prox::{subdiff_graph_rep, L1};

fn main() -> partsmooth::error::Result<()> {
    let f = Arc::new(L1::new(5, 1.0)?);
    let u_bar = Vector::from_vec(vec![0.8, 0.0, -1.2, 0.4, 0.0]);
    let v_bar = Vector::from_vec(vec![1.0, 0.3, -1.0, 1.0, -0.6]);
    let rep = subdiff_graph_rep(f, &SmoothMap::zero(5, 1), &u_bar, &v_bar)?.rep;
    let cert = constant_rank_probe(&rep, 0.1, 100, 3)?;
    println!(
        "l1 on R^5: {} graph_dim={:?} manifold_dim={:?}",
        cert.verdict, cert.graph_dim, cert.manifold_dim
    );

    let q = Matrix::from_fn(5, 5, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
    let perturbed = sum_rule_transform(&rep, &SmoothMap::linear(q))?;
    let cert = constant_rank_probe(&perturbed, 0.1, 100, 3)?;
    println!(
        "plus a smooth gradient: {} graph_dim={:?} manifold_dim={:?}",
        cert.verdict, cert.graph_dim, cert.manifold_dim
    );
    Ok(())
}
