//! `f(u) = u₁` on the unit circle: covariant derivatives, second-order
//! sufficiency and transversality at both critical points.

use partsmooth::linalg::{Matrix, Vector};
use partsmooth::manifold::SmoothMap;
use partsmooth::manifold_opt::{
    covariant_hessian, graph_normal_space, quadratic_growth, second_order_check, transversality_check,
    ManifoldObjective,
};
use partsmooth::zoo::ManifoldSpec;

fn main() -> partsmooth::error::Result<()> {
    let (chart, dual) = ManifoldSpec::Circle { base_angle: 0.0 }.build()?;
    let f = SmoothMap::linear(Matrix::from_row_slice(1, 2, &[1.0, 0.0]));
    let mo = ManifoldObjective::new(chart, dual, f)?;

    for u in [[-1.0, 0.0], [1.0, 0.0]] {
        let u = Vector::from_column_slice(&u);
        let hess = covariant_hessian(&mo, &u)?;
        println!("u = {:?}", u.as_slice());
        println!("  covariant Hessian eigenvalues {:.6?}", hess.eigenvalues());
        println!("  graph normal space dim        {}", graph_normal_space(&mo, &u)?.dim());
        println!("  second-order sufficient       {}", second_order_check(&mo, &u)?);
        println!("  transversal to U x {{0}}        {}", transversality_check(&mo, &u)?);
        if second_order_check(&mo, &u)? {
            let g = quadratic_growth(&mo, &u, 0.1, 1000, 1)?;
            println!("  growth: bound {:.4}, sampled {:.4}", g.delta_bound, g.empirical_delta);
        }
    }
    Ok(())
}
