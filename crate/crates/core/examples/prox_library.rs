//! Proximal maps, active-manifold patterns and nondegeneracy margins of the
//! built-in functions.

use std::sync::Arc;

use partsmooth::linalg::Vector;
use partsmooth::prox::{BoxIndicator, DirectSum, GroupL1, ProxFn, L1};

fn show(f: &dyn ProxFn, gamma: f64, x: &[f64]) -> partsmooth::error::Result<()> {
    let x = Vector::from_column_slice(x);
    let p = f.prox(gamma, &x)?;
    let v = (&x - &p) / gamma;
    println!(
        "{:<24} prox = {:<28} pattern {:<10} margin {:.3}",
        f.name(),
        format!("{:.3?}", p.as_slice()),
        f.pattern(&p).to_string(),
        f.margin(&p, &v)
    );
    Ok(())
}

fn main() -> partsmooth::error::Result<()> {
    show(&L1::new(3, 1.0)?, 1.0, &[2.5, -0.4, -1.7])?;
    show(&BoxIndicator::uniform(3, -1.0, 1.0)?, 1.0, &[2.0, 0.3, -5.0])?;
    show(&GroupL1::new(4, vec![vec![0, 1], vec![2, 3]], 1.0)?, 1.0, &[3.0, 4.0, 0.3, -0.4])?;
    let sum = DirectSum::new(vec![
        Arc::new(L1::new(2, 0.5)?) as Arc<dyn ProxFn>,
        Arc::new(BoxIndicator::uniform(1, 0.0, 1.0)?),
    ])?;
    show(&sum, 1.0, &[0.2, -3.0, 1.5])?;
    Ok(())
}
