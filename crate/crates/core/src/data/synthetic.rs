//! Small 2-D fixtures for training and topology tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Sample};

fn clusters(centers: &[([f64; 2], usize)], n: usize, sigma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("non-negative sigma");
    let mut samples = Vec::with_capacity(centers.len() * n);
    for _ in 0..n {
        for &(c, label) in centers {
            let x = c[0] + noise.sample(&mut rng);
            let y = c[1] + noise.sample(&mut rng);
            samples.push(Sample::new(vec![x, y], label));
        }
    }
    Dataset::new(samples, 2, 2).expect("fixture shape is consistent")
}

/// Two Gaussian clusters centered at `(-2, 0)` (class 0) and `(2, 0)` (class 1).
pub fn make_blobs(n_per_cluster: usize, sigma: f64, seed: u64) -> Dataset {
    clusters(&[([-2.0, 0.0], 0), ([2.0, 0.0], 1)], n_per_cluster, sigma, seed)
}

/// Four Gaussian clusters at `(±2, ±2)`; class 0 when both coordinates share a
/// sign, class 1 otherwise.
pub fn make_xor(n_per_cluster: usize, sigma: f64, seed: u64) -> Dataset {
    clusters(
        &[([2.0, 2.0], 0), ([-2.0, -2.0], 0), ([2.0, -2.0], 1), ([-2.0, 2.0], 1)],
        n_per_cluster,
        sigma,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_blobs_split_on_vertical_axis() {
        let d = make_blobs(10, 0.0, 1);
        assert_eq!(d.len(), 20);
        assert!(d.iter().all(|s| (s.features[0] > 0.0) == (s.label == 1)));
    }

    #[test]
    fn seeds_reproduce() {
        assert_eq!(make_xor(25, 0.5, 9), make_xor(25, 0.5, 9));
        assert_ne!(make_xor(25, 0.5, 9), make_xor(25, 0.5, 10));
    }

    /// Best accuracy of any single linear gate `σ(w·x + b) > 0.5` over a coarse
    /// grid. XOR admits at most 3 of 4 clusters.
    #[test]
    fn noiseless_xor_is_not_linearly_separable() {
        let d = make_xor(5, 0.0, 0);
        let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.5).collect();
        let mut best: f64 = 0.0;
        for &w0 in &grid {
            for &w1 in &grid {
                for &b in &grid {
                    let hits = d
                        .iter()
                        .filter(|s| ((w0 * s.features[0] + w1 * s.features[1] + b) > 0.0) == (s.label == 1))
                        .count();
                    best = best.max(hits as f64 / d.len() as f64);
                }
            }
        }
        assert!(best <= 0.75 + 1e-12, "grid found accuracy {best}");
    }
}
