use skelbridge::datasets::*;
use skelbridge::{rng, Error, Graph};
use proptest::prelude::*;

#[test]
fn community_small_densities() {
    let (mut intra, mut intra_pairs, mut inter) = (0usize, 0usize, 0usize);
    for rec in gen_community_small(500, 41) {
        let g = &rec.graph;
        let n = g.n_active();
        assert!((COMMUNITY_SMALL_MIN_NODES..=COMMUNITY_SMALL_MAX_NODES).contains(&n));
        let a = n.div_ceil(2);
        let b = n - a;
        intra_pairs += a * (a - 1) / 2 + b * (b - 1) / 2;
        let mut cross = 0;
        for (i, j, _) in g.edges() {
            if (i < a) == (j < a) {
                intra += 1;
            } else {
                cross += 1;
            }
        }
        assert_eq!(cross, (COMMUNITY_SMALL_INTER_FRACTION * n as f64).ceil() as usize);
        inter += cross;
    }
    let density = intra as f64 / intra_pairs as f64;
    assert!((density - COMMUNITY_SMALL_P_INTRA).abs() < 0.03, "intra density {density}");
    assert!(inter > 0);
}

#[test]
fn sbm_densities() {
    let mut r = rng::stream(42, &[]);
    let (mut e_in, mut p_in, mut e_out, mut p_out) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..200 {
        let (g, sizes) = sbm_graph(&mut r);
        assert!((SBM_MIN_BLOCKS..=SBM_MAX_BLOCKS).contains(&sizes.len()));
        let block: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
        let n = block.len();
        let same: usize = sizes.iter().map(|s| s * (s - 1) / 2).sum();
        p_in += same;
        p_out += n * (n - 1) / 2 - same;
        for (i, j, _) in g.edges() {
            if block[i] == block[j] {
                e_in += 1;
            } else {
                e_out += 1;
            }
        }
    }
    let din = e_in as f64 / p_in as f64;
    let dout = e_out as f64 / p_out as f64;
    assert!((din - SBM_P_IN).abs() < 0.02, "in-block density {din}");
    assert!((dout - SBM_P_OUT).abs() < 0.02, "cross-block density {dout}");
}

#[test]
fn generation_is_reproducible() {
    assert_eq!(gen_community_small(10, 5), gen_community_small(10, 5));
    assert_ne!(gen_community_small(10, 5), gen_community_small(10, 6));
}

#[test]
fn errors_report_line_numbers() {
    let ok = r#"{"version":1,"id":"a","n":3,"edges":[[0,1,1]]}"#;
    let cases = [
        (format!("{ok}\n{{\"version\":1,\"id\":\"b\",\"n\":2,\"edges\":[[0,1,1],[1,0,1]]}}"), 2, false),
        (format!("{ok}\n\n{{\"version\":1,\"id\":\"c\",\"n\":2,\"edges\":[[1,1,1]]}}"), 3, false),
        (format!("{{\"version\":1,\"id\":\"d\",\"n\":2,\"edges\":[[0,5,1]]}}"), 1, false),
        (format!("{ok}\n{{\"version\":1,\"id\":\"e\",\"n\":2,\"edges\":[[0,1,0]]}}"), 2, false),
        (format!("{ok}\nnot json"), 2, true),
        (format!("{{\"version\":1,\"id\":\"f\",\"n\":2,\"edges\":[],\"extra\":1}}"), 1, true),
    ];
    for (text, line, parse) in cases {
        match read_records(text.as_bytes()) {
            Err(Error::Parse { line: l, .. }) if parse => assert_eq!(l, line),
            Err(Error::Validation { line: l, .. }) if !parse => assert_eq!(l, line),
            other => panic!("unexpected {other:?} for {text}"),
        }
    }
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (1usize..12).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n, 1i64..4), 0..30).prop_map(move |raw| {
            let mut edges: Vec<(usize, usize, f64)> = Vec::new();
            for (a, b, w) in raw {
                let (i, j) = (a.min(b), a.max(b));
                if i != j && !edges.iter().any(|e| (e.0, e.1) == (i, j)) {
                    edges.push((i, j, w as f64));
                }
            }
            Graph::from_edges(n, n, &edges).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn records_round_trip(graphs in proptest::collection::vec(arb_graph(), 1..5)) {
        let recs: Vec<GraphRecord> = graphs.into_iter().enumerate().map(|(i, g)| GraphRecord::new(format!("g{i}"), g)).collect();
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &recs);
        let mut again = Vec::new();
        write_records(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }
}
