#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softforest::{Tree, Variant};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complete tree with every parameter drawn uniformly from `[-spread, spread]`.
pub fn random_tree(
    variant: Variant,
    d: usize,
    c: usize,
    depth: usize,
    filters: usize,
    spread: f64,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut t = Tree::new_complete(variant, d, c, depth, filters, rng).unwrap();
    let params: Vec<f64> = (0..t.count_parameters())
        .map(|_| rng.random_range(-spread..=spread))
        .collect();
    t.set_params(&params).unwrap();
    t
}

pub fn random_input(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.0..=1.0)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
