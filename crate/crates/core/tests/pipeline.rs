use rsel_core::clustering::ClusterModel;
use rsel_core::pipeline::{
    build_records, cluster_subjects, loso_run, predict_held_out, Fallback, PipelineError,
    RunConfig, SubjectEpochs, SubjectRecord, TrainingMode,
};
use rsel_core::signal::{synth_population, Epoch, SynthConfig};
use rsel_core::{FeatureMatrix, Matrix};

fn small_population(seed: u64) -> Vec<SubjectEpochs> {
    synth_population(&SynthConfig {
        subjects_per_cluster: 2,
        epochs_per_subject: 40,
        channels: 4,
        features: 60,
        seed,
        ..Default::default()
    })
    .unwrap()
    .subjects
}

fn records(subjects: Vec<SubjectEpochs>) -> Vec<SubjectRecord> {
    let cfg = RunConfig::default();
    build_records(subjects, cfg.shrinkage, &cfg.frechet).unwrap()
}

#[test]
fn held_out_labels_are_never_read() {
    let subjects = small_population(3);
    let cfg = RunConfig::default();
    let recs = records(subjects.clone());
    let clusters = cluster_subjects(&recs, &cfg).unwrap();

    let mut noisy = subjects;
    for (i, e) in noisy[2].epochs.iter_mut().enumerate() {
        e.label = (i * 7919) % 3 == 0;
    }
    let recs_noisy = records(noisy);
    let clusters_noisy = cluster_subjects(&recs_noisy, &cfg).unwrap();
    assert_eq!(clusters, clusters_noisy);

    let a = predict_held_out(&recs, 2, Some(&clusters), &cfg).unwrap();
    let b = predict_held_out(&recs_noisy, 2, Some(&clusters_noisy), &cfg).unwrap();
    assert_eq!(a.predictions, b.predictions);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.margins), bits(&b.margins));
}

fn transform_subject(s: &SubjectEpochs, w: &Matrix) -> SubjectEpochs {
    let mut out = s.clone();
    for e in &mut out.epochs {
        e.features = FeatureMatrix::new(w.matmul(e.features.matrix())).unwrap();
    }
    out
}

#[test]
fn recentering_absorbs_mean_aligned_congruence() {
    let subjects = small_population(4);
    let cfg = RunConfig::default();
    let recs = records(subjects.clone());
    let clusters = cluster_subjects(&recs, &cfg).unwrap();
    let held_out = 0;
    let before = predict_held_out(&recs, held_out, Some(&clusters), &cfg).unwrap();
    let target = before.training[0];

    // congruences that commute with the subject mean leave its recentered trials unchanged
    let mean = &recs[target].mean;
    let power = mean.map(|l| 2.0 * l.powf(0.3)).unwrap().into_matrix();
    for w in [Matrix::identity(4).scale(3.7), power] {
        let mut moved = subjects.clone();
        moved[target] = transform_subject(&subjects[target], &w);
        let moved = records(moved);
        let after = predict_held_out(&moved, held_out, Some(&clusters), &cfg).unwrap();
        assert_eq!(after.predictions, before.predictions);
        for (a, b) in after.margins.iter().zip(&before.margins) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn identical_subjects_match_the_baseline() {
    let base = small_population(5).remove(0);
    let subjects: Vec<SubjectEpochs> = (0..3)
        .map(|i| SubjectEpochs {
            id: format!("twin{i}"),
            ..base.clone()
        })
        .collect();
    let recs = records(subjects);
    let cfg = RunConfig::default();
    let clustered = loso_run(&recs, &cfg, TrainingMode::Clustered).unwrap();
    let baseline = loso_run(&recs, &cfg, TrainingMode::Baseline).unwrap();
    assert_eq!(clustered.clusters.as_ref().unwrap().k, 1);
    for (a, b) in clustered.folds.iter().zip(&baseline.folds) {
        assert_eq!(a.training_subjects, b.training_subjects);
        assert_eq!(a.metrics, b.metrics);
    }
    assert_eq!(clustered.summary, baseline.summary);
}

#[test]
fn seizure_free_subject_has_undefined_sensitivity() {
    let mut subjects = small_population(6);
    for e in &mut subjects[1].epochs {
        e.label = false;
    }
    subjects[1].events.clear();
    let report = loso_run(&records(subjects), &RunConfig::default(), TrainingMode::Baseline).unwrap();
    let m = &report.folds[1].metrics;
    assert_eq!(m.sensitivity, None);
    assert!(m.specificity.is_some());
    assert!((0.0..=100.0).contains(&m.accuracy));
    assert_eq!(m.latency_sec, None);
}

#[test]
fn single_class_cluster_falls_back() {
    let mut subjects = small_population(7);
    // subjects 0 and 3 share a cluster; strip the seizures of 3
    for e in &mut subjects[3].epochs {
        e.label = false;
    }
    let recs = records(subjects);
    let cfg = RunConfig::default();
    let report = loso_run(&recs, &cfg, TrainingMode::Clustered).unwrap();
    let fold = &report.folds[0];
    assert_eq!(report.clusters.as_ref().unwrap().assignments[0], report.clusters.as_ref().unwrap().assignments[3]);
    assert_eq!(fold.fallback, Some(Fallback::SingleClass));
    assert_eq!(fold.training_subjects.len(), recs.len() - 1);
    for f in &report.folds {
        if f.fallback.is_none() {
            assert!(f.training_subjects.len() < recs.len() - 1);
        }
    }
}

#[test]
fn singleton_cluster_falls_back() {
    let recs = records(small_population(8));
    let cfg = RunConfig::default();
    let n = recs.len();
    let clusters = ClusterModel {
        k: 2,
        sigma: cfg.sigma,
        tau: cfg.tau,
        seed: cfg.seed,
        assignments: (0..n).map(|i| usize::from(i == 0)).collect(),
        eigenvalues: vec![],
        isolated: vec![0],
        embedding: Matrix::zeros(n, 0),
    };
    let fold = predict_held_out(&recs, 0, Some(&clusters), &cfg).unwrap();
    assert_eq!(fold.fallback, Some(Fallback::EmptyCluster));
    assert_eq!(fold.training.len(), n - 1);
}

#[test]
fn untrainable_and_too_few() {
    let mut subjects = small_population(9);
    for s in &mut subjects {
        for e in &mut s.epochs {
            e.label = false;
        }
    }
    let recs = records(subjects);
    assert!(matches!(
        loso_run(&recs, &RunConfig::default(), TrainingMode::Baseline),
        Err(PipelineError::Untrainable(_))
    ));
    let err = loso_run(&recs[..2], &RunConfig::default(), TrainingMode::Baseline).unwrap_err();
    assert!(matches!(err, PipelineError::TooFewSubjects { need: 3, found: 2 }));
    let err = cluster_subjects(&recs[..1], &RunConfig::default()).unwrap_err();
    assert_eq!(err.to_string(), "need ≥2 subjects, got 1");
}

#[test]
fn report_is_thread_count_independent() {
    let recs = records(small_population(10));
    let cfg = RunConfig::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| loso_run(&recs, &cfg, TrainingMode::Clustered).unwrap().to_json())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn literal_order_collapses_to_one_cluster() {
    let recs = records(small_population(11));
    let cfg = RunConfig {
        recenter_before_cluster: true,
        ..Default::default()
    };
    let clusters = cluster_subjects(&recs, &cfg).unwrap();
    assert_eq!(clusters.k, 1);
}

#[test]
fn table_has_the_five_columns() {
    let recs = records(small_population(12));
    let report = loso_run(&recs, &RunConfig::default(), TrainingMode::Clustered).unwrap();
    let table = report.to_table();
    let header = table.lines().next().unwrap();
    let cols: Vec<&str> = header.split("  ").map(str::trim).filter(|s| !s.is_empty()).collect();
    assert_eq!(
        cols,
        [
            "Subject ID",
            "Accuracy (%)",
            "Sensitivity (%)",
            "False Positive rate (seizures/h)",
            "Latency (sec)"
        ]
    );
    assert!(table.contains("Mean ± std"));
    assert!(table.contains("Specificity (%)"));
    assert_eq!(table.lines().count(), 2 + recs.len() + 2 + 1);
}

#[test]
fn invalid_subjects_are_rejected() {
    let empty = SubjectEpochs {
        id: "e".into(),
        epoch_len_sec: 10.0,
        total_hours: 1.0,
        events: vec![],
        epochs: vec![],
    };
    assert!(SubjectRecord::build(empty, 0.0, &Default::default()).is_err());
    let rank_deficient = SubjectEpochs {
        id: "r".into(),
        epoch_len_sec: 10.0,
        total_hours: 1.0,
        events: vec![],
        epochs: vec![Epoch {
            features: FeatureMatrix::new(Matrix::from_rows(&[[1.0, -1.0], [1.0, -1.0]])).unwrap(),
            label: false,
            start_sec: 0.0,
        }],
    };
    let err = SubjectRecord::build(rank_deficient, 0.0, &Default::default()).unwrap_err();
    assert!(err.to_string().starts_with("subject r:"));
}
