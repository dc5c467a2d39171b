use skelbridge::graph::*;
use skelbridge::Graph;
use ndarray::Array2;
use proptest::prelude::*;

fn arb_graph() -> impl Strategy<Value = (Graph, usize)> {
    (1usize..10, 0usize..4).prop_flat_map(|(n, pad)| {
        proptest::collection::vec(proptest::bool::weighted(0.5), n * (n - 1) / 2).prop_map(move |bits| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            let edges: Vec<(usize, usize)> = pairs.into_iter().zip(bits).filter(|(_, b)| *b).map(|(e, _)| e).collect();
            (Graph::simple(n, &edges).unwrap(), pad)
        })
    })
}

proptest! {
    #[test]
    fn spectrum_reconstructs_laplacian((g, pad) in arb_graph()) {
        let g = g.padded(g.n_max() + pad).unwrap();
        let s = masked_spectrum(&g).unwrap();
        let n = g.n_max();
        let gram = s.vectors.t().dot(&s.vectors);
        prop_assert!(frobenius(&(gram - Array2::<f64>::eye(n))) < 1e-8);
        prop_assert!(frobenius(&(reconstruct_laplacian(&s.vectors, &s.values) - laplacian(&g))) < 1e-8);
        for k in g.n_active()..n {
            prop_assert_eq!(s.values[k], 0.0);
        }
        for w in s.values.as_slice().unwrap()[..g.n_active()].windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12);
        }
    }

    #[test]
    fn quantized_reconstruction_recovers_adjacency((g, pad) in arb_graph()) {
        let g = g.padded(g.n_max() + pad).unwrap();
        let s = masked_spectrum(&g).unwrap();
        let q = quantize(&reconstruct_adjacency(&s), &QuantizationRule::binary());
        prop_assert_eq!(q.mapv(|v| v as f64), g.adjacency().clone());
    }

    #[test]
    fn padding_round_trips((g, pad) in arb_graph()) {
        let p = g.padded(g.n_max() + pad).unwrap();
        prop_assert_eq!(p.n_active(), g.n_active());
        prop_assert_eq!(p.compact(), g);
    }
}
