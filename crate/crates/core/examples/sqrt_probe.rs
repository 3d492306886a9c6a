//! Constant-rank probe of the graph of `u ↦ ±√u`, parameterized as
//! `(w, z) ↦ (w², w)`. The projected tangent rank is 0 at the center and 1
//! everywhere else, so the mapping is not partly smooth there.

use partsmooth::graph::{constant_rank_probe, CoordGraphRep};
use partsmooth::linalg::{Matrix, Vector};
use partsmooth::manifold::SmoothMap;

fn main() -> partsmooth::error::Result<()> {
    let h = SmoothMap::new(1, 1, |w| Vector::from_element(1, w[0] * w[0]))
        .with_jacobian(|w| Matrix::from_element(1, 1, 2.0 * w[0]));
    let rep = CoordGraphRep::new(h, SmoothMap::identity(1))?;

    let cert = constant_rank_probe(&rep, 0.1, 200, 1)?;
    println!("verdict: {}", cert.verdict);
    println!("distinct ranks: {:?}", cert.profile.distinct_ranks());
    for s in cert.profile.samples.iter().take(5) {
        println!("  sample {:>3}  w = {:+.5}  rank {}", s.index, s.param[0], s.rank);
    }
    Ok(())
}
