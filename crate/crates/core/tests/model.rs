use skelbridge::model::*;
use skelbridge::rng;
use ndarray::Array2;
use proptest::prelude::*;

proptest! {
    #[test]
    fn clipping_bounds_the_norm(seed in any::<u64>(), max in 0.01f64..10.0, scale in 0.001f64..100.0) {
        let cfg = ScoreNetConfig::with_node_dim(3);
        let p = init_params(&cfg, &mut rng::stream(seed, &[])).unwrap();
        let mut g = Gradients { tensors: p.tensors().iter().map(|t| t * scale).collect() };
        let before = g.norm();
        let reported = clip_grad_norm(&mut g, max);
        prop_assert!((reported - before).abs() <= 1e-12 * before.max(1.0));
        prop_assert!(g.norm() <= max * (1.0 + 1e-12) || before <= max);
        if before <= max {
            prop_assert!((g.norm() - before).abs() <= 1e-12 * before.max(1.0));
        }
    }

    #[test]
    fn checkpoint_round_trips_random_parameters(seed in any::<u64>(), hidden in 1usize..12, half in 1usize..6) {
        let cfg = ScoreNetConfig { hidden_dim: hidden, time_dim: 2 * half, ..ScoreNetConfig::with_node_dim(2) };
        let p = init_params(&cfg, &mut rng::stream(seed, &[])).unwrap();
        let mut buf = Vec::new();
        checkpoint::write_checkpoint(&p, &mut buf).unwrap();
        prop_assert_eq!(checkpoint::read_checkpoint(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn time_embedding_is_bounded(t in 0.0f64..1.0, half in 1usize..16) {
        let e = time_embed(t, 2 * half);
        prop_assert_eq!(e.len(), 2 * half);
        prop_assert!(e.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn walk_features_are_probabilities(bits in proptest::collection::vec(proptest::bool::ANY, 28)) {
        let n = 8;
        let mut adj = Array2::zeros((n, n));
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if bits[k] {
                    adj[[i, j]] = 1.0;
                    adj[[j, i]] = 1.0;
                }
                k += 1;
            }
        }
        let f = enrich_adjacency(&adj, &[true; 8], 4, 5);
        for w in &f.walks {
            for row in w.rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let hot: f64 = f.shortest_path.iter().map(|c| c[[i, j]]).sum();
                prop_assert_eq!(hot, 1.0);
            }
        }
    }
}
