use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::univariate::{gauss_hermite_rule, UnivariateRule};
use crate::error::{Error, Result};

/// Nodes closer than this in the max-norm are merged into one.
pub const MERGE_TOL: f64 = 1e-9;

/// How a [`MultiRule`] was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleDescriptor {
    Tensor,
    Smolyak { q: usize },
}

/// Map from a Smolyak level `i ≥ 1` to a univariate point count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    /// `m(i) = i`
    #[default]
    Linear,
    /// `m(i) = 2i - 1`
    Odd,
}

impl Growth {
    pub fn points(self, level: usize) -> usize {
        match self {
            Growth::Linear => level,
            Growth::Odd => 2 * level - 1,
        }
    }
}

/// A d-dimensional rule on the standard-normal scale. Weights may be
/// negative (Smolyak combinations) and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiRule {
    dim: usize,
    /// row-major, `dim` coordinates per node
    coords: Vec<f64>,
    weights: Vec<f64>,
    descriptor: RuleDescriptor,
}

impl MultiRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn descriptor(&self) -> RuleDescriptor {
        self.descriptor
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The single-node rule at the origin: the expectation is replaced by
    /// evaluation at the mean.
    pub fn mean_only(dim: usize) -> Self {
        Self {
            dim,
            coords: vec![0.0; dim],
            weights: vec![1.0],
            descriptor: RuleDescriptor::Smolyak { q: dim },
        }
    }

    /// True for a single node at the origin with unit weight.
    pub fn is_mean_only(&self) -> bool {
        self.weights.len() == 1 && self.weights[0] == 1.0 && self.coords.iter().all(|&c| c == 0.0)
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Accumulates weighted nodes, merging coincident ones.
struct NodeAccumulator {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    index: HashMap<Vec<i64>, usize>,
}

impl NodeAccumulator {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            weights: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn key(x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / MERGE_TOL).round() as i64).collect()
    }

    fn find(&self, x: &[f64]) -> Option<usize> {
        if let Some(&k) = self.index.get(&Self::key(x)) {
            return Some(k);
        }
        // rounding can split a tolerance ball across two cells
        self.coords
            .chunks_exact(self.dim)
            .position(|y| y.iter().zip(x).all(|(a, b)| (a - b).abs() <= MERGE_TOL))
    }

    fn add(&mut self, x: &[f64], w: f64) {
        match self.find(x) {
            Some(k) => self.weights[k] += w,
            None => {
                self.index.insert(Self::key(x), self.weights.len());
                self.coords.extend_from_slice(x);
                self.weights.push(w);
            }
        }
    }

    fn finish(self, descriptor: RuleDescriptor) -> MultiRule {
        MultiRule {
            dim: self.dim,
            coords: self.coords,
            weights: self.weights,
            descriptor,
        }
    }
}

/// Adds `scale ×` the tensor product of `rules` into `acc`.
fn accumulate_tensor(acc: &mut NodeAccumulator, rules: &[&UnivariateRule], scale: f64) {
    let d = rules.len();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        let mut w = scale;
        for j in 0..d {
            x[j] = rules[j].nodes()[idx[j]];
            w *= rules[j].weights()[idx[j]];
        }
        acc.add(&x, w);

        // odometer increment, last dimension fastest
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < rules[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// Cartesian product of univariate rules; weights multiply.
pub fn tensor_rule(per_dim: &[UnivariateRule]) -> Result<MultiRule> {
    if per_dim.is_empty() {
        return Err(Error::Argument("tensor rule needs at least one dimension".into()));
    }
    let mut acc = NodeAccumulator::new(per_dim.len());
    let refs: Vec<&UnivariateRule> = per_dim.iter().collect();
    accumulate_tensor(&mut acc, &refs, 1.0);
    Ok(acc.finish(RuleDescriptor::Tensor))
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All multi-indices `i ∈ ℕ^d`, `i_j ≥ 1`, with `lo ≤ |i| ≤ hi`.
pub(crate) fn multi_indices(d: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, lo: usize, hi: usize) {
        if prefix.len() == d {
            let s: usize = prefix.iter().sum();
            if s >= lo && s <= hi {
                out.push(prefix.clone());
            }
            return;
        }
        let slots_left = d - prefix.len() - 1;
        for v in 1..=remaining.saturating_sub(slots_left) {
            prefix.push(v);
            rec(d, remaining - v, prefix, out, lo, hi);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, hi, &mut Vec::with_capacity(d), &mut out, lo, hi);
    out
}

/// Smolyak sparse grid `A(q, d)`:
///
/// `Σ_{q-d+1 ≤ |i| ≤ q} (-1)^{q-|i|} C(d-1, q-|i|) ⊗_j Q_{i_j}`
///
/// with `Q_i` the Gauss–Hermite rule of `growth.points(i)` points.
/// Coincident nodes are merged; negative weights are kept.
pub fn smolyak_rule(q: usize, d: usize, growth: Growth) -> Result<MultiRule> {
    if d == 0 {
        return Err(Error::Argument("Smolyak dimension must be at least 1".into()));
    }
    if q < d {
        return Err(Error::Argument(format!("Smolyak level q={q} below dimension d={d}")));
    }
    let max_level = q - d + 1;
    let rules: Vec<UnivariateRule> = (1..=max_level)
        .map(|i| gauss_hermite_rule(growth.points(i)))
        .collect::<Result<_>>()?;

    let mut acc = NodeAccumulator::new(d);
    let lo = (q + 1).saturating_sub(d).max(d);
    for idx in multi_indices(d, lo, q) {
        let norm: usize = idx.iter().sum();
        let k = q - norm;
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let coef = sign * binomial(d - 1, k);
        let parts: Vec<&UnivariateRule> = idx.iter().map(|&i| &rules[i - 1]).collect();
        accumulate_tensor(&mut acc, &parts, coef);
    }
    Ok(acc.finish(RuleDescriptor::Smolyak { q }))
}
