//! Seeded uniform sampling in Euclidean balls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::Vector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One point drawn uniformly from the closed ball of `radius` in `R^dim`.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    if dim == 0 {
        return Vector::zeros(0);
    }
    let dir = loop {
        let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            break g / norm;
        }
    };
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir * r
}

/// `n` points uniform in the ball of `radius` around the origin of `R^dim`,
/// deterministic given `seed`.
pub fn ball_samples(dim: usize, radius: f64, n: usize, seed: u64) -> Vec<Vector> {
    let mut rng = rng(seed);
    (0..n).map(|_| uniform_in_ball(&mut rng, dim, radius)).collect()
}
