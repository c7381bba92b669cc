use std::borrow::Cow;

use rand::Rng;

use crate::rng::RngStream;

/// A weighted particle collection that can be reindexed.
pub trait ParticleSet {
    fn weights(&self) -> Cow<'_, [f64]>;

    /// Replaces the particle set with copies of the particles at `indices`
    /// and sets every weight to `1/N`.
    fn reindex(&mut self, indices: &[usize]);
}

/// Low-variance resampling: one uniform offset, `N` evenly spaced pointers.
/// Returns ancestor indices in non-decreasing order.
pub fn systematic_indices(weights: &[f64], rng: &mut RngStream) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let step = 1.0 / n as f64;
    let u0: f64 = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for k in 0..n {
        let u = u0 + k as f64 * step;
        while u > cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

pub fn systematic_resample<P: ParticleSet + ?Sized>(belief: &mut P, rng: &mut RngStream) {
    let idx = systematic_indices(&belief.weights(), rng);
    belief.reindex(&idx);
}
