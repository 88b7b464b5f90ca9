use foliage::catalog::ENTRIES;
use foliage::graph::{
    calabi_equiv_bruteforce, edge_weight, every_vertex_on_closed_walk, factorization_witness, is_calabi,
    FoliationGraph,
};
use foliage::scalar::{q_rank, Sign, DEFAULT_PRECISION_CEILING};
use foliage::scenario::parse_scenario;
use foliage::surgery::FoliationModel;
use proptest::prelude::*;

fn catalog_models() -> Vec<(&'static str, FoliationModel)> {
    let mut out = Vec::new();
    for e in ENTRIES {
        let sc = parse_scenario(e.text).unwrap();
        for (name, m) in sc.build(DEFAULT_PRECISION_CEILING).unwrap() {
            let _ = name;
            out.push((e.name, m));
        }
    }
    out
}

/// Connected digraph: a random spanning tree with random orientations plus extra arcs.
fn connected_digraph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=10).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((any::<prop::sample::Index>(), any::<bool>()), n - 1),
            prop::collection::vec((0..n, 0..n), 0..=2 * n),
        )
            .prop_map(|(n, tree, extra)| {
                let mut arcs = Vec::new();
                for (i, (parent, flip)) in tree.into_iter().enumerate() {
                    let child = i + 1;
                    let p = parent.index(child);
                    arcs.push(if flip { (child, p) } else { (p, child) });
                }
                arcs.extend(extra);
                (n, arcs)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn calabi_matches_bruteforce((n, arcs) in connected_digraph()) {
        let g = FoliationGraph::from_arcs(n, &arcs);
        let (c1, c2) = calabi_equiv_bruteforce(&g).unwrap();
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(is_calabi(&g).unwrap(), c1);
    }
}

#[test]
fn per_vertex_reading_is_weaker() {
    // every vertex lies on a closed walk, but the arc 1 → 2 lies on none
    let g = FoliationGraph::from_arcs(3, &[(0, 1), (1, 0), (1, 2), (2, 2)]);
    assert!(every_vertex_on_closed_walk(&g).unwrap());
    assert!(!is_calabi(&g).unwrap());
}

#[test]
fn catalog_edge_weights_are_positive() {
    for (name, m) in catalog_models() {
        for e in &m.graph.edges {
            let w = edge_weight(&m.graph, e.id).unwrap();
            assert_eq!(w.sign(&m.table, DEFAULT_PRECISION_CEILING).unwrap(), Sign::Pos, "{name}: {}", e.family);
        }
    }
}

#[test]
fn witness_exists_exactly_for_all_compact_models() {
    for (name, m) in catalog_models() {
        let w = factorization_witness(&m);
        assert_eq!(w.is_some(), m.all_leaves_compact(), "{name}");
        if let Some(w) = w {
            assert!(w.checks.iter().all(|c| c.period == c.graph_value), "{name}");
            let periods: Vec<_> = m.periods().into_iter().map(|(_, v)| v).collect();
            let g = &w.graph;
            let free = g.edges.len() + 1 - g.vertices.len();
            assert!(free >= q_rank(&periods), "{name}");
            assert!(w.is_sound());
        }
    }
}
