mod common;

use common::{random_input, random_tree, rng};
use rand::Rng;
use softforest::training::{backward, compare_gradients, finite_difference_grad, softmax};
use softforest::{Tree, Variant};

const FLOOR: f64 = 1e-8;

#[test]
fn hundred_random_configurations_match_central_differences() {
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let variant = if trial % 2 == 0 {
            Variant::Budding
        } else {
            Variant::Distributed
        };
        let filters = if trial % 4 < 2 { 1 } else { 3 };
        let depth = r.random_range(0..=3);
        let d = r.random_range(1..=10);
        let c = r.random_range(2..=5);
        let t = random_tree(variant, d, c, depth, filters, 1.5, &mut r);
        let x = random_input(d, &mut r);
        let label = r.random_range(0..c);
        let (_, analytic) = backward(&t, &x, label).unwrap();
        let numeric = finite_difference_grad(&t, &x, label, 1e-5).unwrap();
        let report = compare_gradients(&t, &analytic, &numeric, FLOOR).unwrap();
        worst = worst.max(report.overall);
    }
    assert!(worst < 1e-6, "worst relative error {worst:e}");
}

#[test]
fn soft_trees_match_central_differences() {
    let mut r = rng(7);
    for _ in 0..20 {
        let t = random_tree(Variant::Soft, 4, 3, 3, 2, 1.5, &mut r);
        let x = random_input(4, &mut r);
        let (_, analytic) = backward(&t, &x, 2).unwrap();
        let numeric = finite_difference_grad(&t, &x, 2, 1e-5).unwrap();
        assert!(compare_gradients(&t, &analytic, &numeric, FLOOR).unwrap().overall < 1e-6);
    }
}

fn max_abs_discrepancy(t: &Tree, x: &[f64], label: usize, step: f64) -> f64 {
    let (_, analytic) = backward(t, x, label).unwrap();
    let numeric = finite_difference_grad(t, x, label, step).unwrap();
    analytic
        .values()
        .iter()
        .zip(numeric.values())
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
}

#[test]
fn halving_the_step_quarters_the_discrepancy() {
    let mut r = rng(99);
    for variant in [Variant::Budding, Variant::Distributed] {
        let t = random_tree(variant, 3, 3, 2, 1, 1.0, &mut r);
        let x = random_input(3, &mut r);
        let coarse = max_abs_discrepancy(&t, &x, 0, 1e-4);
        let fine = max_abs_discrepancy(&t, &x, 0, 5e-5);
        let ratio = coarse / fine;
        assert!((3.6..4.4).contains(&ratio), "{variant}: ratio {ratio}");
    }
}

#[test]
fn zero_depth_difference_is_second_order() {
    let t = {
        let mut t = Tree::single_leaf(Variant::Budding, 2, 4, 0).unwrap();
        t.set_params(&[0.3, -1.2, 2.0, 0.5]).unwrap();
        t
    };
    let p = softmax(&[0.3, -1.2, 2.0, 0.5]);
    let exact: Vec<f64> = p.iter().enumerate().map(|(k, v)| v - f64::from(k == 1)).collect();
    for step in [1e-3, 1e-4] {
        let numeric = finite_difference_grad(&t, &[0.0, 0.0], 1, step).unwrap();
        for (n, e) in numeric.values().iter().zip(&exact) {
            assert!((n - e).abs() < step * step, "step {step}: {n} vs {e}");
        }
    }
}

#[test]
fn backward_and_oracle_leave_tree_untouched() {
    let mut r = rng(3);
    let t = random_tree(Variant::Distributed, 4, 3, 3, 3, 1.0, &mut r);
    let before: Vec<u64> = t.params().iter().map(|v| v.to_bits()).collect();
    let x = random_input(4, &mut r);
    backward(&t, &x, 1).unwrap();
    finite_difference_grad(&t, &x, 1, 1e-5).unwrap();
    let after: Vec<u64> = t.params().iter().map(|v| v.to_bits()).collect();
    assert_eq!(before, after);
}
