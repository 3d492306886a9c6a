//! Normal bundles of the circle and the 2-sphere, certified two ways: from a
//! chart/dual-chart pair, and (for the circle) as the zero set of
//! `P(u) = |u|² - 1`, `Q(u, v) = v₂u₁ - v₁u₂`.

use partsmooth::graph::{constant_rank_probe, dual_rep_check, normal_bundle_rep, DualGraphRep};
use partsmooth::linalg::{Matrix, Vector};
use partsmooth::manifold::SmoothMap;
use partsmooth::zoo::ManifoldSpec;

fn main() -> partsmooth::error::Result<()> {
    for (name, spec) in [("circle", ManifoldSpec::Circle { base_angle: 0.0 }), ("sphere", ManifoldSpec::Sphere2)] {
        let (chart, dual) = spec.build()?;
        let rep = normal_bundle_rep(&dual, &chart, &Vector::from_element(1, 0.5))?;
        let cert = constant_rank_probe(&rep, 0.1, 100, 2)?;
        println!(
            "{name:>6}: {} graph_dim={:?} manifold_dim={:?} coderiv_dim={:?}",
            cert.verdict, cert.graph_dim, cert.manifold_dim, cert.coderiv_dim
        );
    }

    let p = SmoothMap::new(2, 1, |u| Vector::from_element(1, u.norm_squared() - 1.0))
        .with_jacobian(|u| Matrix::from_row_slice(1, 2, &[2.0 * u[0], 2.0 * u[1]]));
    let q = SmoothMap::new(4, 1, |uv| Vector::from_element(1, uv[3] * uv[0] - uv[2] * uv[1]))
        .with_jacobian(|uv| Matrix::from_row_slice(1, 4, &[uv[3], -uv[2], -uv[1], uv[0]]));
    let rep = DualGraphRep::new(p, q, Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![2.0, 0.0]))?;
    let cert = dual_rep_check(&rep, 0.05, 100, 4)?;
    println!(
        "  dual: {} graph_dim={:?} manifold_dim={:?}",
        cert.verdict, cert.graph_dim, cert.manifold_dim
    );
    Ok(())
}
