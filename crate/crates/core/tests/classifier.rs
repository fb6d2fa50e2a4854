mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rsel_core::classifier::{svm_train, svm_train_traced, SvmConfig, SvmModel};

/// Two blobs on either side of `w·x = 0` with margin at least 1.
fn blobs(r: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<i32>) {
    let w: Vec<f64> = {
        let v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect()
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    while xs.len() < n {
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-4.0..4.0)).collect();
        let proj: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        if proj.abs() >= 1.0 {
            ys.push(i32::from(proj > 0.0));
            xs.push(x);
        }
    }
    (xs, ys)
}

fn accuracy(model: &SvmModel, xs: &[Vec<f64>], ys: &[i32]) -> f64 {
    let correct = xs.iter().zip(ys).filter(|(x, &y)| model.predict(x).unwrap().0 == y).count();
    correct as f64 / xs.len() as f64
}

#[test]
fn separable_blobs_are_fit_exactly() {
    let mut r = rng(41);
    let (xs, ys) = blobs(&mut r, 200, 3);
    let cfg = SvmConfig { c: 100.0, ..Default::default() };
    let (model, trace) = svm_train_traced(&xs, &ys, &cfg).unwrap();
    assert!(trace.converged);
    assert_eq!(accuracy(&model, &xs, &ys), 1.0);
    for (x, &y) in xs.iter().zip(&ys) {
        let margin = model.decision(x).unwrap();
        assert_eq!(margin >= 0.0, y == 1);
    }
}

#[test]
fn xor_is_at_most_three_quarters() {
    let xs = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let ys = [0, 0, 1, 1];
    let model = svm_train(&xs, &ys, &SvmConfig::default()).unwrap();
    assert!(accuracy(&model, &xs, &ys) <= 0.75);
}

#[test]
fn dual_objective_never_decreases() {
    let mut r = rng(42);
    let (mut xs, ys) = blobs(&mut r, 150, 4);
    // overlap the classes so many constraints are active
    for x in &mut xs {
        for v in x.iter_mut() {
            *v += r.random_range(-2.0..2.0);
        }
    }
    let (_, trace) = svm_train_traced(&xs, &ys, &SvmConfig::default()).unwrap();
    assert!(trace.dual_objective.len() >= 2);
    for w in trace.dual_objective.windows(2) {
        assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
    }
    assert!(trace.primal_objective >= *trace.dual_objective.last().unwrap() - 1e-9);
}

fn grid() -> Vec<Vec<f64>> {
    let mut g = Vec::new();
    for i in -6..=6 {
        for j in -6..=6 {
            g.push(vec![i as f64 * 0.7, j as f64 * 0.7, 0.3 * (i + j) as f64]);
        }
    }
    g
}

#[test]
fn permutation_keeps_grid_predictions() {
    let mut r = rng(43);
    let (xs, ys) = blobs(&mut r, 120, 3);
    let cfg = SvmConfig { tol: 1e-8, max_passes: 5000, ..Default::default() };
    let a = svm_train(&xs, &ys, &cfg).unwrap();
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.reverse();
    let xs2: Vec<Vec<f64>> = idx.iter().map(|&i| xs[i].clone()).collect();
    let ys2: Vec<i32> = idx.iter().map(|&i| ys[i]).collect();
    let b = svm_train(&xs2, &ys2, &cfg).unwrap();
    for (wa, wb) in a.weights.iter().zip(&b.weights) {
        assert!((wa - wb).abs() < 1e-2);
    }
    // skip grid points that lie on the boundary within the solver tolerance
    for p in grid() {
        let (ma, mb) = (a.decision(&p).unwrap(), b.decision(&p).unwrap());
        if ma.abs() > 1e-2 {
            assert_eq!(ma >= 0.0, mb >= 0.0, "grid point {p:?}");
        }
    }
}

#[test]
fn seeded_training_is_deterministic() {
    let mut r = rng(44);
    let (xs, ys) = blobs(&mut r, 80, 5);
    let a = svm_train(&xs, &ys, &SvmConfig::default()).unwrap();
    let b = svm_train(&xs, &ys, &SvmConfig::default()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_inputs_and_c_keeps_labels(seed in any::<u64>(), gamma in 0.05f64..20.0) {
        let mut r = rng(seed);
        let (mut xs, ys) = blobs(&mut r, 60, 3);
        for x in &mut xs {
            for v in x.iter_mut() {
                *v += r.random_range(-1.5..1.5);
            }
        }
        let cfg = SvmConfig { c: 1.0, ..Default::default() };
        let a = svm_train(&xs, &ys, &cfg).unwrap();
        let scaled: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| v * gamma).collect()).collect();
        let cfg_s = SvmConfig { c: 1.0 / (gamma * gamma), ..cfg };
        let b = svm_train(&scaled, &ys, &cfg_s).unwrap();
        for p in grid() {
            let ps: Vec<f64> = p.iter().map(|v| v * gamma).collect();
            let (ma, mb) = (a.decision(&p).unwrap(), b.decision(&ps).unwrap());
            if ma.abs() > 1e-6 {
                prop_assert_eq!(ma >= 0.0, mb >= 0.0);
            }
        }
    }
}
