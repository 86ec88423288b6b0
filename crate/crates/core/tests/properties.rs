use std::collections::HashSet;

use frugal_core::classifier::{evaluate_eer, svm_objective, train_svm};
use frugal_core::clustering::{assignment_matrix, kmeans_fit, squared_distance_matrix};
use frugal_core::datasets::{generate_synthetic, load_dataset, save_dataset, SyntheticSpec};
use frugal_core::display::own_centroid_distance;
use frugal_core::samplers::{maxmin_select, random_select, uncertainty_select};
use frugal_core::session::{init_session, OracleBinding};
use frugal_core::{Dataset, Hyperparams, Label, LabelVector, SamplerKind, SvmConfig};
use proptest::prelude::*;
use std::sync::Arc;

fn pool() -> impl Strategy<Value = (usize, usize, Vec<f32>)> {
    (2usize..40, 1usize..5).prop_flat_map(|(n, d)| {
        (Just(n), Just(d), prop::collection::vec(-5.0f32..5.0, n * d))
    })
}

fn dataset(n: usize, d: usize, values: Vec<f32>) -> Dataset {
    Dataset::new(values, d, Dataset::sequential_ids(n), None).unwrap()
}

fn labels_for(n: usize, bits: &[bool]) -> Vec<Label> {
    (0..n)
        .map(|i| if bits[i % bits.len()] { Label::Positive } else { Label::Negative })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kmeans_structure((n, d, values) in pool(), k_raw in 1usize..6, seed in any::<u64>()) {
        let ds = dataset(n, d, values);
        let k = k_raw.min(n);
        let model = kmeans_fit(&ds, k, seed, 50).unwrap();
        for w in model.distortion_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        let c = assignment_matrix(&model);
        for i in 0..n {
            let row = c.matrix().row(i);
            prop_assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
            prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
        // Own-centroid distance against a direct recomputation.
        let own = own_centroid_distance(&c, &squared_distance_matrix(&model, &ds).unwrap());
        for i in 0..n {
            let centroid = model.centroids.row(model.assignment[i]);
            let direct: f64 = ds.row(i).iter().zip(centroid).map(|(&x, &m)| (f64::from(x) - m).powi(2)).sum();
            prop_assert!((own[i] - direct).abs() <= 1e-9 * direct.max(1.0));
        }
        prop_assert_eq!(kmeans_fit(&ds, k, seed, 50).unwrap(), model);
    }

    #[test]
    fn svm_never_worse_than_zero(
        (n, d, values) in pool(),
        bits in prop::collection::vec(any::<bool>(), 1..8),
        balanced in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let ds = dataset(n, d, values);
        let labels = labels_for(n, &bits);
        let config = SvmConfig { lambda: 1e-2, epochs: 20, balanced };
        let model = train_svm(&ds, &labels, config, seed).unwrap();
        let zero = svm_objective(&vec![0.0; d], 0.0, &ds, &labels, &config);
        let ours = svm_objective(&model.weights, model.bias, &ds, &labels, &config);
        prop_assert!(ours <= zero + 1e-12, "{} > {}", ours, zero);
    }

    #[test]
    fn eer_ignores_positive_rescaling(
        (n, d, values) in pool(),
        w in prop::collection::vec(-2.0f64..2.0, 4),
        b in -1.0f64..1.0,
    ) {
        let ds = dataset(n, d, values);
        let mut labels: Vec<Label> = (0..n).map(|i| if ds.row(i)[0] > 0.0 { Label::Positive } else { Label::Negative }).collect();
        labels[0] = Label::Positive;
        labels[n - 1] = Label::Negative;
        let model = frugal_core::LinearModel {
            weights: (0..d).map(|j| w[j % w.len()]).collect(),
            bias: b,
            trained_on: n,
            single_class: None,
        };
        let a = evaluate_eer(&model, &ds, &labels).unwrap();
        let scaled = evaluate_eer(&model.scaled(3.7), &ds, &labels).unwrap();
        prop_assert_eq!(a.to_bits(), scaled.to_bits());
    }

    #[test]
    fn samplers_pick_fresh_distinct_samples(
        (n, d, values) in pool(),
        mask_bits in prop::collection::vec(any::<bool>(), 40),
        b in 1usize..12,
        seed in any::<u64>(),
    ) {
        let ds = dataset(n, d, values);
        let mut mask: Vec<bool> = mask_bits[..n].to_vec();
        mask[0] = true;
        mask[n - 1] = n == 1 || mask[n - 1] && n > 2;
        if mask.iter().all(|&m| m) { mask[n - 1] = false; }
        let labeled: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let unlabeled = n - labeled.len();
        let scores: Vec<f64> = (0..n).map(|i| f64::from(ds.row(i)[0])).collect();
        for picked in [
            maxmin_select(&ds, &labeled, b).unwrap(),
            uncertainty_select(&scores, &mask, b).unwrap(),
            random_select(&mask, b, seed).unwrap(),
        ] {
            prop_assert_eq!(picked.len(), b.min(unlabeled));
            prop_assert!(picked.iter().all(|&i| !mask[i]));
            prop_assert_eq!(picked.iter().collect::<HashSet<_>>().len(), picked.len());
        }
    }

    #[test]
    fn maxmin_is_permutation_covariant(
        (n, d, values) in pool(),
        b in 1usize..8,
        seed in any::<u64>(),
    ) {
        let ds = dataset(n, d, values.clone());
        // A seeded permutation of the rows.
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let mut permuted = Vec::with_capacity(values.len());
        for &p in &perm {
            permuted.extend_from_slice(ds.row(p));
        }
        let pds = dataset(n, d, permuted);
        let labeled = [0usize];
        let inverse_labeled = [perm.iter().position(|&p| p == 0).unwrap()];
        let a: HashSet<usize> = maxmin_select(&ds, &labeled, b).unwrap().into_iter().collect();
        let mapped: HashSet<usize> = maxmin_select(&pds, &inverse_labeled, b)
            .unwrap()
            .into_iter()
            .map(|i| perm[i])
            .collect();
        // Continuous random features make exact distance ties vanishingly rare.
        prop_assert_eq!(a, mapped);
    }

    #[test]
    fn persistence_round_trip(
        (n, d, values) in pool(),
        label_codes in prop::collection::vec(0u8..3, 40),
    ) {
        let ds = dataset(n, d, values);
        let labels = LabelVector(
            label_codes[..n]
                .iter()
                .map(|c| match c { 0 => None, 1 => Some(Label::Positive), _ => Some(Label::Negative) })
                .collect(),
        );
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, Some(&labels), None, None, dir.path()).unwrap();
        let (back, back_labels, manifest) = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(manifest.n, n);
        prop_assert_eq!(back_labels, labels);
        prop_assert_eq!(back.ids(), ds.ids());
        let bits = |x: &Dataset| x.features().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&ds));
    }

    #[test]
    fn synthetic_counts_are_exact(n in 20usize..400, rate in 0.02f64..0.5, seed in any::<u64>()) {
        let spec = SyntheticSpec { n, d: 3, positive_rate: rate, seed, ..SyntheticSpec::default() };
        prop_assume!(spec.validate().is_ok());
        let (ds, labels) = generate_synthetic(&spec).unwrap();
        prop_assert_eq!(ds.n(), n);
        prop_assert_eq!(labels.count(Label::Positive), (n as f64 * rate).round() as usize);
        prop_assert_eq!(labels.count(Label::Positive) + labels.count(Label::Negative), n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sessions_respect_budget_and_coverage(
        n in 30usize..80,
        b in 2usize..6,
        budget in 1usize..8,
        kind in prop::sample::select(SamplerKind::ALL.to_vec()),
        seed in any::<u64>(),
    ) {
        let spec = SyntheticSpec { n, d: 4, positive_rate: 0.2, seed, ..SyntheticSpec::default() };
        let (ds, truth) = generate_synthetic(&spec).unwrap();
        let hp = Hyperparams {
            clusters: b,
            display_size: b,
            budget,
            kmeans_restarts: 2,
            svm_epochs: 20,
            seed,
            ..Hyperparams::default()
        };
        let mut session = init_session(Arc::new(ds), hp, kind, OracleBinding::Simulated(truth), None).unwrap();
        let mut queried = HashSet::new();
        while !session.is_finished() {
            for &i in session.pending_display() {
                prop_assert!(queried.insert(i), "sample {} queried twice", i);
            }
            let answers = session.oracle_answers().unwrap();
            session = session.submit_labels(&answers).unwrap();
        }
        prop_assert!(queried.len() <= budget * b);
        let records = &session.state().metrics.records;
        prop_assert_eq!(records.len(), budget.min(n.div_ceil(b)));
        let step = 100.0 * b as f64 / n as f64;
        for (t, r) in records.iter().enumerate() {
            prop_assert_eq!(r.iter, t + 1);
            if r.labeled == (t + 1) * b {
                prop_assert!((r.samp_pct - step * (t + 1) as f64).abs() < 1e-9);
            }
        }
        for w in records.windows(2) {
            prop_assert!(w[1].samp_pct > w[0].samp_pct);
        }
    }
}
