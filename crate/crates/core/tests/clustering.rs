mod common;

use common::*;
use proptest::prelude::*;
use rsel_core::clustering::{
    adjusted_rand_index, affinity, affinity_from_distances, estimate_k, normalize,
    spectral_cluster, AffinityMatrix, SpectralConfig,
};
use rsel_core::manifold::{frechet_mean, FrechetConfig};
use rsel_core::signal::{synth_population, SynthConfig};
use rsel_core::spd::scm;
use rsel_core::{Matrix, SpdMatrix};

/// Zero-diagonal affinity whose off-diagonal entries are 1 inside each block.
fn block_affinity(sizes: &[usize]) -> AffinityMatrix {
    let n: usize = sizes.iter().sum();
    let mut block = Vec::with_capacity(n);
    for (b, &s) in sizes.iter().enumerate() {
        block.extend(std::iter::repeat_n(b, s));
    }
    let m = Matrix::from_fn(n, n, |i, j| if i != j && block[i] == block[j] { 1.0 } else { 0.0 });
    AffinityMatrix::from_matrix(m, 0.5).unwrap()
}

fn unit_eigenvalues(a: &AffinityMatrix) -> usize {
    let e = normalize(a).unwrap().eig().unwrap();
    assert!(e.values.iter().all(|&l| (-1.0 - 1e-9..=1.0 + 1e-9).contains(&l)));
    e.values.iter().filter(|&&l| (l - 1.0).abs() < 1e-9).count()
}

#[test]
fn unit_eigenvalue_count_equals_components() {
    assert_eq!(unit_eigenvalues(&block_affinity(&[3, 2])), 2);
    assert_eq!(unit_eigenvalues(&block_affinity(&[3, 3, 2])), 3);
    assert_eq!(unit_eigenvalues(&block_affinity(&[2, 2, 2, 2])), 4);
    assert_eq!(unit_eigenvalues(&block_affinity(&[5])), 1);
}

#[test]
fn estimate_k_threshold() {
    assert_eq!(estimate_k(&[1.0, 0.99, 0.2, 0.1], 0.05), 2);
    assert_eq!(estimate_k(&[0.5, 0.2], 0.05), 1);
}

fn population_means(cfg: &SynthConfig) -> (Vec<SpdMatrix>, Vec<usize>) {
    let pop = synth_population(cfg).unwrap();
    let means = pop
        .subjects
        .iter()
        .map(|s| {
            let scms: Vec<SpdMatrix> = s.epochs.iter().map(|e| scm(&e.features, 0.0).unwrap()).collect();
            frechet_mean(&scms, &FrechetConfig::default()).unwrap()
        })
        .collect();
    (means, pop.clusters)
}

#[test]
fn synthetic_population_is_recovered() {
    let cfg = SynthConfig {
        epochs_per_subject: 60,
        ..Default::default()
    };
    let (means, truth) = population_means(&cfg);
    let model = spectral_cluster(&means, &SpectralConfig::default()).unwrap();
    assert_eq!(model.k, 3);
    assert_eq!(adjusted_rand_index(&model.assignments, &truth), 1.0);

    // permuting subjects permutes assignments
    let order: Vec<usize> = (0..means.len()).rev().collect();
    let permuted: Vec<SpdMatrix> = order.iter().map(|&i| means[i].clone()).collect();
    let model_p = spectral_cluster(&permuted, &SpectralConfig::default()).unwrap();
    let back: Vec<usize> = order.iter().map(|&i| model.assignments[i]).collect();
    assert_eq!(adjusted_rand_index(&model_p.assignments, &back), 1.0);
}

#[test]
fn clustering_is_thread_count_independent() {
    let cfg = SynthConfig {
        subjects_per_cluster: 3,
        epochs_per_subject: 20,
        ..Default::default()
    };
    let (means, _) = population_means(&cfg);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| spectral_cluster(&means, &SpectralConfig::default()).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn identical_means_form_one_cluster() {
    let mut r = rng(31);
    let m = random_spd(&mut r, 4, 10.0);
    let model = spectral_cluster(&vec![m; 5], &SpectralConfig::default()).unwrap();
    assert_eq!(model.k, 1);
    assert!(model.assignments.iter().all(|&a| a == 0));
}

#[test]
fn two_subject_boundary() {
    let mut r = rng(32);
    let means = [random_spd(&mut r, 3, 10.0), random_spd(&mut r, 3, 10.0)];
    match spectral_cluster(&means, &SpectralConfig::default()) {
        Ok(model) => {
            assert!((1..=2).contains(&model.k));
            assert_eq!(model.assignments.len(), 2);
        }
        // far-apart pairs can have zero affinity
        Err(e) => assert!(e.to_string().contains("zero affinity")),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affinity_properties(seed in any::<u64>(), n in 3usize..7) {
        let mut r = rng(seed);
        let means: Vec<SpdMatrix> = (0..n).map(|_| random_spd(&mut r, 3, 4.0)).collect();
        let a = affinity(&means, 0.5).unwrap();
        let a2 = affinity(&means, 1.0).unwrap();
        let d = rsel_core::clustering::pairwise_distances(&means).unwrap();
        let m = a.matrix();
        for i in 0..n {
            prop_assert_eq!(m[(i, i)], 0.0);
            for j in 0..n {
                prop_assert!((0.0..=1.0).contains(&m[(i, j)]));
                prop_assert_eq!(m[(i, j)], m[(j, i)]);
                if i != j {
                    prop_assert!(a2.matrix()[(i, j)] >= m[(i, j)]);
                }
                for k in 0..n {
                    if i != j && i != k && d[(i, j)] < d[(i, k)] && m[(i, k)] > 0.0 {
                        prop_assert!(m[(i, j)] > m[(i, k)]);
                    }
                }
            }
        }
    }

    #[test]
    fn distance_equal_to_sigma_gives_inverse_e(sigma in 0.1f64..3.0) {
        let d = Matrix::from_rows(&[[0.0, sigma], [sigma, 0.0]]);
        let a = affinity_from_distances(&d, sigma).unwrap();
        prop_assert!((a.matrix()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
    }
}
