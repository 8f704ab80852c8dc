//! Property tests for the library invariants: statistics scaling laws,
//! filter linearity, spectral identities, purity structure, and windowing.

use proptest::prelude::*;

use vibrobench::cluster::{kmeans_fit, AlgorithmTag, ClusterAssignment, NOISE};
use vibrobench::eval::purity;
use vibrobench::features::{abs_kurt, abs_mean, abs_median, abs_skew, iqr, std_dev};
use vibrobench::matrix::{sq_dist, Matrix};
use vibrobench::preprocess::{normalize, remove_dc, savgol_filter, SavGolParams};
use vibrobench::spectral::fft_magnitude;

fn signal_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_invariant_under_permutation(
        mut values in signal_strategy(64),
        rotation in 0usize..64,
    ) {
        let original = values.clone();
        values.rotate_left(rotation);
        prop_assert!((abs_mean(&original).unwrap() - abs_mean(&values).unwrap()).abs() < 1e-12);
        prop_assert!((abs_median(&original).unwrap() - abs_median(&values).unwrap()).abs() < 1e-12);
        prop_assert!((std_dev(&original).unwrap() - std_dev(&values).unwrap()).abs() < 1e-12);
        prop_assert!((iqr(&original).unwrap() - iqr(&values).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn amplitude_features_scale_linearly(values in signal_strategy(48), factor in 0.01f64..50.0) {
        let scaled: Vec<f64> = values.iter().map(|v| v * factor).collect();
        let pairs = [
            (abs_mean(&values).unwrap(), abs_mean(&scaled).unwrap()),
            (abs_median(&values).unwrap(), abs_median(&scaled).unwrap()),
            (std_dev(&values).unwrap(), std_dev(&scaled).unwrap()),
            (iqr(&values).unwrap(), iqr(&scaled).unwrap()),
        ];
        for (base, result) in pairs {
            prop_assert!((result - factor * base).abs() <= 1e-9 * (1.0 + result.abs()));
        }
    }

    #[test]
    fn shape_features_are_scale_invariant(values in signal_strategy(48), factor in 0.01f64..50.0) {
        let scaled: Vec<f64> = values.iter().map(|v| v * factor).collect();
        let skew = (abs_skew(&values).unwrap(), abs_skew(&scaled).unwrap());
        let kurt = (abs_kurt(&values).unwrap(), abs_kurt(&scaled).unwrap());
        prop_assert!((skew.0 - skew.1).abs() < 1e-9);
        prop_assert!((kurt.0 - kurt.1).abs() < 1e-9);
    }

    #[test]
    fn preprocessing_stages_preserve_length(values in signal_strategy(32)) {
        prop_assert_eq!(remove_dc(&values).unwrap().len(), values.len());
        prop_assert_eq!(normalize(&values).unwrap().len(), values.len());
        let filtered = savgol_filter(&values, SavGolParams::default()).unwrap();
        prop_assert_eq!(filtered.len(), values.len());
    }

    #[test]
    fn savgol_is_linear(
        x in signal_strategy(32),
        y in signal_strategy(32),
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
    ) {
        let params = SavGolParams::default();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let fx = savgol_filter(&x, params).unwrap();
        let fy = savgol_filter(&y, params).unwrap();
        let fc = savgol_filter(&combo, params).unwrap();
        for i in 0..combo.len() {
            let expect = a * fx[i] + b * fy[i];
            prop_assert!((fc[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn savgol_reproduces_low_degree_polynomials(coeffs in prop::collection::vec(-2.0f64..2.0, 8)) {
        let poly = |t: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
        let signal: Vec<f64> = (0..24).map(|i| poly(i as f64 * 0.3)).collect();
        let out = savgol_filter(&signal, SavGolParams::default()).unwrap();
        for (y, x) in out.iter().zip(&signal) {
            prop_assert!((y - x).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn spectrum_is_shift_invariant_and_nonnegative(
        values in signal_strategy(128),
        shift in 0usize..128,
    ) {
        let shifted: Vec<f64> = (0..128).map(|t| values[(t + shift) % 128]).collect();
        let a = fft_magnitude(&values, 128.0).unwrap();
        let b = fft_magnitude(&shifted, 128.0).unwrap();
        for (x, y) in a.magnitudes.iter().zip(&b.magnitudes) {
            prop_assert!(*x >= 0.0);
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn parseval_holds(values in signal_strategy(64)) {
        let spectrum = fft_magnitude(&values, 64.0).unwrap();
        let n = 64.0;
        let time_energy: f64 = values.iter().map(|x| x * x).sum();
        let mut freq_energy = 0.0;
        for (k, &m) in spectrum.magnitudes.iter().enumerate() {
            let full = if k == 0 || k == spectrum.magnitudes.len() - 1 {
                (m * n).powi(2)
            } else {
                2.0 * (m * n / 2.0).powi(2)
            };
            freq_energy += full;
        }
        freq_energy /= n;
        prop_assert!((time_energy - freq_energy).abs() <= 1e-9 * (1.0 + time_energy));
    }

    #[test]
    fn purity_invariant_under_cluster_relabeling(
        labels in prop::collection::vec(0usize..4, 2..40),
        clusters in prop::collection::vec(0usize..5, 40),
        offset in 1usize..5,
    ) {
        let n = labels.len();
        let assignments: Vec<usize> = clusters[..n].to_vec();
        let relabeled: Vec<usize> = assignments.iter().map(|&c| (c + offset) % 5).collect();
        let a = ClusterAssignment {
            assignments,
            num_clusters: 5,
            algorithm: AlgorithmTag::KMeans,
        };
        let b = ClusterAssignment {
            assignments: relabeled,
            num_clusters: 5,
            algorithm: AlgorithmTag::KMeans,
        };
        prop_assert_eq!(purity(&a, &labels).unwrap(), purity(&b, &labels).unwrap());
    }

    #[test]
    fn purity_never_decreases_under_cluster_splits(
        labels in prop::collection::vec(0usize..3, 4..40),
        clusters in prop::collection::vec(0usize..3, 40),
        split_mask in prop::collection::vec(prop::bool::ANY, 40),
    ) {
        let n = labels.len();
        let assignments: Vec<usize> = clusters[..n].to_vec();
        // split every cluster c into c and c+3 by the mask
        let split: Vec<usize> = assignments
            .iter()
            .zip(&split_mask[..n])
            .map(|(&c, &flip)| if flip { c + 3 } else { c })
            .collect();
        let before = ClusterAssignment {
            assignments,
            num_clusters: 3,
            algorithm: AlgorithmTag::KMeans,
        };
        let after = ClusterAssignment {
            assignments: split,
            num_clusters: 6,
            algorithm: AlgorithmTag::KMeans,
        };
        prop_assert!(purity(&after, &labels).unwrap() >= purity(&before, &labels).unwrap() - 1e-12);
    }

    #[test]
    fn purity_of_singletons_is_one(labels in prop::collection::vec(0usize..4, 1..30)) {
        let n = labels.len();
        let a = ClusterAssignment {
            assignments: (0..n).collect(),
            num_clusters: n,
            algorithm: AlgorithmTag::KMeans,
        };
        prop_assert_eq!(purity(&a, &labels).unwrap(), 1.0);
    }

    #[test]
    fn purity_bounded_with_noise(
        labels in prop::collection::vec(0usize..4, 2..30),
        noise_mask in prop::collection::vec(prop::bool::ANY, 30),
    ) {
        let n = labels.len();
        let assignments: Vec<usize> = (0..n)
            .map(|i| if noise_mask[i] { NOISE } else { i % 3 })
            .collect();
        let a = ClusterAssignment {
            assignments,
            num_clusters: 3,
            algorithm: AlgorithmTag::Optics,
        };
        let p = purity(&a, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn kmeans_assigns_points_to_nearest_centroid(
        raw in prop::collection::vec(-50.0f64..50.0, 24),
        k in 1usize..4,
        seed in 0u64..20,
    ) {
        let points = Matrix::from_vec(12, 2, raw);
        let (model, assignment) = kmeans_fit(&points, k, seed, 300, 1e-9).unwrap();
        for i in 0..points.rows() {
            let own = sq_dist(points.row(i), model.centroids.row(assignment.assignments[i]));
            for c in 0..k {
                prop_assert!(own <= sq_dist(points.row(i), model.centroids.row(c)) + 1e-12);
            }
        }
    }
}

#[test]
fn windows_never_mix_classes() {
    // windowing over randomized label runs: every emitted window is pure
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let mut text = String::from("ch,label\n");
        let mut labels = Vec::new();
        let mut label = 0i64;
        while labels.len() < 400 {
            let run = rng.random_range(3..40);
            for _ in 0..run {
                labels.push(label);
            }
            label = (label + 1) % 3;
        }
        for (i, l) in labels.iter().enumerate() {
            text.push_str(&format!("{}.5,{l}\n", i));
        }
        std::fs::write(&path, text).unwrap();
        let manifest = vibrobench::dataio::DatasetManifest {
            name: "runs".into(),
            csv_path: path,
            channel_columns: vec!["ch".into()],
            label_column: "label".into(),
            sample_rate: 10.0,
            window_length: 16,
            window_stride: 8,
            num_classes: 3,
            subset_fraction: 1.0,
            shuffle_seed: 0,
        };
        match vibrobench::dataio::load_dataset(&manifest) {
            Ok(ds) => {
                // reconstruct labels per window from the raw stream
                let mut cursor = 0usize;
                for w in 0..ds.num_windows() {
                    // each retained window must have matched one pure span
                    let window = ds.channel(w, 0);
                    let start = (window[0] - 0.5) as usize;
                    let span = &labels[start..start + 16];
                    assert!(span.iter().all(|&l| l == span[0]), "window {w} mixes classes");
                    cursor = cursor.max(start);
                }
                let _ = cursor;
            }
            Err(vibrobench::dataio::DataError::ZeroWindows { .. }) => {}
            Err(other) => panic!("unexpected error {other}"),
        }
    }
}

#[test]
fn cluster_models_serialize_to_json() {
    let points = Matrix::from_vec(6, 1, vec![0.0, 0.2, 0.4, 8.0, 8.2, 8.4]);
    let (kmeans_model, _) = kmeans_fit(&points, 2, 0, 100, 1e-6).unwrap();
    assert!(serde_json::to_string(&kmeans_model).is_ok());
    let (gmm_model, _) = vibrobench::cluster::gmm_fit(&points, 2, 0, 100, 1e-6).unwrap();
    assert!(serde_json::to_string(&gmm_model).is_ok());
    let optics = vibrobench::cluster::optics_order(&points, 2, None).unwrap();
    assert!(serde_json::to_string(&optics).is_ok());
}

#[test]
fn dc_bin_vanishes_after_preprocessing() {
    use vibrobench::dataio::{generate_synthetic, ClassProfile, SyntheticSpec};
    let ds = generate_synthetic(&SyntheticSpec {
        num_classes: 2,
        windows_per_class: 4,
        window_length: 64,
        class_profiles: vec![
            ClassProfile { amplitude_scale: 1.0, dominant_frequency_bin: 5, noise_std: 0.2 },
            ClassProfile { amplitude_scale: 3.0, dominant_frequency_bin: 11, noise_std: 0.1 },
        ],
        seed: 17,
        num_channels: 2,
    })
    .unwrap();
    let out = vibrobench::preprocess::preprocess_pipeline(&ds, SavGolParams::default()).unwrap();
    for w in 0..out.num_windows() {
        for c in 0..out.num_channels() {
            let spectrum = fft_magnitude(out.channel(w, c), out.sample_rate).unwrap();
            assert!(spectrum.magnitudes[0] < 1e-9, "dc bin {}", spectrum.magnitudes[0]);
        }
    }
}
