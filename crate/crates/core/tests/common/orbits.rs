//! Independent per-node orbit recount: ESU enumeration of connected 4-node
//! subgraphs, each matched against labelled templates by trying every
//! vertex permutation.

use std::collections::BTreeSet;

use skelbridge::eval::NUM_ORBITS;
use skelbridge::Graph;

/// ESU enumeration of connected induced 4-node subgraphs.
pub fn esu4(g: &Graph) -> Vec<[usize; 4]> {
    let nb = g.neighbors();
    let mut out = Vec::new();
    fn extend(nb: &[Vec<usize>], sub: &mut Vec<usize>, ext: BTreeSet<usize>, v: usize, out: &mut Vec<[usize; 4]>) {
        if sub.len() == 4 {
            out.push([sub[0], sub[1], sub[2], sub[3]]);
            return;
        }
        let mut ext = ext;
        while let Some(&w) = ext.iter().next() {
            ext.remove(&w);
            let closed: BTreeSet<usize> = sub.iter().flat_map(|&u| nb[u].iter().copied().chain([u])).collect();
            let mut next = ext.clone();
            for &u in &nb[w] {
                if u > v && !closed.contains(&u) {
                    next.insert(u);
                }
            }
            sub.push(w);
            extend(nb, sub, next, v, out);
            sub.pop();
        }
    }
    for v in 0..g.n_max() {
        let ext: BTreeSet<usize> = nb[v].iter().copied().filter(|&u| u > v).collect();
        extend(&nb, &mut vec![v], ext, v, &mut out);
    }
    out
}

/// Connected 4-node graphs with the orbit of each template vertex.
fn templates() -> Vec<(Vec<(usize, usize)>, [usize; 4])> {
    vec![
        (vec![(0, 1), (1, 2), (2, 3)], [0, 1, 1, 0]),
        (vec![(0, 1), (0, 2), (0, 3)], [3, 2, 2, 2]),
        (vec![(0, 1), (1, 2), (2, 3), (0, 3)], [4, 4, 4, 4]),
        (vec![(0, 1), (1, 2), (0, 2), (2, 3)], [6, 6, 7, 5]),
        (vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)], [8, 9, 9, 8]),
        (vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], [10, 10, 10, 10]),
    ]
}

fn permutations() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| (0..i).all(|j| p[i] != p[j])) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

pub fn recount(g: &Graph) -> Vec<[u64; NUM_ORBITS]> {
    let tpl = templates();
    let perms = permutations();
    let mut counts = vec![[0u64; NUM_ORBITS]; g.n_max()];
    for nodes in esu4(g) {
        let mut found = false;
        'search: for (edges, orbits) in &tpl {
            for p in &perms {
                // Template vertex i sits at nodes[p[i]].
                let same = (0..4).all(|i| {
                    (0..i).all(|j| {
                        let in_tpl = edges.contains(&(j, i)) || edges.contains(&(i, j));
                        in_tpl == g.has_edge(nodes[p[i]], nodes[p[j]])
                    })
                });
                if same {
                    for i in 0..4 {
                        counts[nodes[p[i]]][orbits[i]] += 1;
                    }
                    found = true;
                    break 'search;
                }
            }
        }
        assert!(found, "connected subgraph without template");
    }
    counts
}
