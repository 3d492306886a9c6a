//! Primal-dual iterations on `|x₁| + x₂² + ⟨Ax, y⟩ - y²/2`. After finitely
//! many steps the first coordinate is exactly zero and stays there.

use std::sync::Arc;

use partsmooth::linalg::{Matrix, Vector};
use partsmooth::manifold::SmoothMap;
use partsmooth::prox::{DirectSum, ProxFn, Zero, L1};
use partsmooth::saddle::{monitor_patterns, nondegeneracy_report, solve, SaddleProblem};

fn main() -> partsmooth::error::Result<()> {
    let f = DirectSum::new(vec![Arc::new(L1::new(1, 1.0)?) as Arc<dyn ProxFn>, Arc::new(Zero::new(1))])?;
    let p = SmoothMap::new(2, 1, |x| Vector::from_element(1, x[1] * x[1]))
        .with_jacobian(|x| Matrix::from_row_slice(1, 2, &[0.0, 2.0 * x[1]]));
    let q = SmoothMap::new(1, 1, |y| Vector::from_element(1, 0.5 * y[0] * y[0]))
        .with_jacobian(|y| Matrix::from_element(1, 1, y[0]));
    let a = Matrix::from_row_slice(1, 2, &[0.5, 0.5]);
    let pr = SaddleProblem::new(Arc::new(f), Arc::new(Zero::new(1)), p, q, a, 0.4, 0.8)?;

    let trace = solve(&pr, &Vector::from_vec(vec![5.0, 5.0]), &Vector::zeros(1), 10_000, 1e-8, 1)?;
    for r in &trace.records {
        println!("k={:>3} residual={:.3e} pattern={} x=({:.3e}, {:.3e})", r.k, r.residual, r.pattern_x, r.x[0], r.x[1]);
    }
    println!("identified at k = {:?}", trace.identification_index);

    let last = trace.last().expect("trace");
    let (mf, mg) = nondegeneracy_report(&pr, &last.x, &last.y, 1e-8)?;
    println!("nondegeneracy margins: f {mf:.3}, g {mg}");
    let stab = monitor_patterns(&pr, &last.x, &last.y, 1000)?;
    println!("patterns stable over {} more steps: {}", stab.steps, stab.is_stable());
    Ok(())
}
