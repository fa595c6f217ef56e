mod common;

use percluster::data::{gen_synthetic, SyntheticSpec};
use percluster::metrics::similarity_matrix;
use percluster::model::{extract_clustering, model_forward, Mode, ModelConfig, ModelParams};
use percluster::train::{augment, build_samples, AugmentConfig, TrainSample};
use proptest::prelude::*;

fn small_config(n: usize) -> ModelConfig {
    ModelConfig {
        train_points: n,
        level_sizes: vec![24, 12, 6, 3],
        group_radii: vec![0.2, 0.4, 0.8, 1.6],
        group_max_neighbors: vec![8; 4],
        sa_mlp_widths: vec![vec![6], vec![8], vec![8], vec![10]],
        fp_feature_sizes: vec![10, 8, 8, 8],
        head_width: 8,
        max_clusters: 6,
        interpolation_neighbors: 3,
    }
}

fn samples() -> Vec<TrainSample> {
    let plots = gen_synthetic(&SyntheticSpec { plots: 4, points_per_plot: 64, seed: 9, ..Default::default() }).unwrap();
    build_samples(&plots, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_is_permutation_equivariant(
        (pts, perm, start) in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 48)
            .prop_flat_map(|p| (Just(p), Just((0..48usize).collect::<Vec<_>>()).prop_shuffle(), 0usize..48)),
        seed in 0u64..50,
    ) {
        let points: Vec<_> = pts.iter().map(|&(x, y)| percluster::data::Point2::new(x, y)).collect();
        let config = small_config(48);
        let params = ModelParams::init(&config, seed).unwrap();
        let base = model_forward(&points, &params, &config, Mode::Train { fps_start: start }).unwrap();
        // Same start point, at its new position.
        let moved = perm.iter().position(|&p| p == start).unwrap();
        let shuffled = model_forward(&common::permute(&points, &perm), &params, &config, Mode::Train { fps_start: moved }).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert!((shuffled.noise_prob[i] - base.noise_prob[p]).abs() <= 1e-12);
            prop_assert!((shuffled.agreement[i] - base.agreement[p]).abs() <= 1e-12);
        }
        let a = extract_clustering(&base, 0.5);
        let b = extract_clustering(&shuffled, 0.5);
        prop_assert_eq!(similarity_matrix(&common::permute(&a, &perm)), similarity_matrix(&b));
    }

    #[test]
    fn augmentation_invariants(idx in 0usize..20, seed in any::<u64>()) {
        let all = samples();
        let sample = &all[idx % all.len()];
        let out = augment(sample, &AugmentConfig::default(), seed).unwrap();
        prop_assert_eq!(out.points.len(), sample.points.len());
        prop_assert_eq!(out.labels.len(), sample.labels.len());
        prop_assert!(out.points.iter().all(|p| (-1.0..=1.0).contains(&p.x) && (-1.0..=1.0).contains(&p.y)));

        let mut before = sample.agreement.clone();
        let mut after = out.agreement.clone();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        prop_assert_eq!(before, after);

        // Output labels refine the input partition; noise stays noise.
        let mut origin = std::collections::HashMap::new();
        for (&new, &old) in out.labels.iter().zip(&sample.labels) {
            prop_assert_eq!(new == 0, old == 0);
            let prev = origin.insert(new, old);
            prop_assert!(prev.is_none() || prev == Some(old));
        }
    }
}

#[test]
fn softmax_rows_sum_to_one_for_any_size() {
    let config = small_config(48);
    let params = ModelParams::init(&config, 3).unwrap();
    let mut rng = common::rng(5);
    for n in [2, 5, 30, 48, 200] {
        let points = common::random_points(&mut rng, n);
        let out = model_forward(&points, &params, &config, Mode::Infer).unwrap();
        assert_eq!(out.cluster_probs.len(), n * config.max_clusters);
        for i in 0..n {
            assert!((out.cluster_row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
    assert!(model_forward(&common::random_points(&mut rng, 47), &params, &config, Mode::Train { fps_start: 0 }).is_err());
}
