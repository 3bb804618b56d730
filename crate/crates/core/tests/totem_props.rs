use std::collections::{BTreeSet, HashMap};

use detscope_core::totem::{
    build_graph, cosine, enumerate_cliques, find_groups, maximal_cliques, preprocess, similarity_matrix,
    PersonProfile, SimilarityMatrix, TokenPipelineConfig,
};
use detscope_oracle::{self as oracle, SplitMix};
use proptest::prelude::*;

fn random_adjacency(rng: &mut SplitMix, n: usize, density: f64) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.unit() < density {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    adj
}

fn edges(adj: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let n = adj.len();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| adj[i][j])
        .collect()
}

#[test]
fn cliques_match_exhaustive_enumeration() {
    let mut rng = SplitMix::new(42);
    for _ in 0..150 {
        let n = 1 + rng.below(14);
        let density = rng.range(0.1, 0.9);
        let adj = random_adjacency(&mut rng, n, density);
        let mut got = maximal_cliques(n, edges(&adj));
        got.sort();
        assert_eq!(got, oracle::maximal_cliques_exhaustive(&adj));
    }
}

#[test]
fn ten_node_graph_via_profiles_matches_oracle() {
    // Each person owns the tokens of the edges they sit on, so sharing
    // exactly one token means adjacency.
    let mut rng = SplitMix::new(3);
    let adj = random_adjacency(&mut rng, 10, 0.5);
    let mut profiles: Vec<PersonProfile> = (0..10).map(|i| PersonProfile::new(format!("p{i}"), 0)).collect();
    for (i, j) in edges(&adj) {
        let tok = format!("e{i}x{j}");
        profiles[i].object_tokens.insert(tok.clone());
        profiles[j].object_tokens.insert(tok);
    }
    let g = build_graph(&profiles, 1).unwrap();
    let got = enumerate_cliques(&g, 2).unwrap();
    let mut want: Vec<Vec<String>> = oracle::maximal_cliques_exhaustive(&adj)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| {
            let mut m: Vec<String> = c.into_iter().map(|i| format!("p{i}")).collect();
            m.sort();
            m
        })
        .collect();
    want.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    assert_eq!(got, want);
}

#[test]
fn path_and_triangle_fixtures() {
    let profile = |id: &str, toks: &[&str]| {
        let mut p = PersonProfile::new(id, 0);
        p.object_tokens = toks.iter().map(|s| s.to_string()).collect();
        p
    };
    let path = [profile("a", &["x"]), profile("b", &["x", "y"]), profile("c", &["y"])];
    let g = build_graph(&path, 1).unwrap();
    assert_eq!(enumerate_cliques(&g, 2).unwrap(), [vec!["a", "b"], vec!["b", "c"]]);
    let tri = [profile("a", &["x"]), profile("b", &["x"]), profile("c", &["x"])];
    let g = build_graph(&tri, 1).unwrap();
    assert_eq!(enumerate_cliques(&g, 2).unwrap(), [vec!["a", "b", "c"]]);
    assert!(enumerate_cliques(&g, 1).is_err());
}

fn block_matrix() -> SimilarityMatrix {
    // 8 people pairwise at 0.9, 4 outsiders at 0.3 to everyone.
    let n = 12;
    let ids: Vec<String> = (0..n).map(|i| format!("P{i:02}")).collect();
    let mut v = vec![vec![0.3; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if i == j {
                *cell = 1.0;
            } else if i < 8 && j < 8 {
                *cell = 0.9;
            }
        }
    }
    SimilarityMatrix::from_values(ids, v).unwrap()
}

#[test]
fn eight_person_block_is_recovered() {
    let m = block_matrix();
    let groups = find_groups(&m, 0.8, 8).unwrap();
    assert_eq!(groups.len(), 1);
    let want: Vec<String> = (0..8).map(|i| format!("P{i:02}")).collect();
    assert_eq!(groups[0].members, want);
    assert_eq!(groups[0].min_similarity, 0.9);
}

#[test]
fn zero_threshold_covers_every_pair() {
    let m = block_matrix();
    let groups = find_groups(&m, 0.0, 2).unwrap();
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            let (a, b) = (&m.person_ids()[i], &m.person_ids()[j]);
            assert!(groups.iter().any(|g| g.members.contains(a) && g.members.contains(b)));
        }
    }
}

#[test]
fn forty_profiles_give_forty_square_matrix() {
    let mut rng = SplitMix::new(40);
    let profiles: Vec<PersonProfile> = (0..40)
        .map(|i| {
            let mut p = PersonProfile::new(format!("Person{i}"), 6);
            p.count_vector = (0..6).map(|_| rng.below(5) as u64).collect();
            p.count_vector[i % 6] += 1;
            p
        })
        .collect();
    let m = similarity_matrix(&profiles).unwrap();
    assert_eq!(m.len(), 40);
    assert!(m.rows().iter().all(|r| r.len() == 40));
    for i in 0..40 {
        assert_eq!(m.get(i, i), 1.0);
        for j in 0..40 {
            assert_eq!(m.get(i, j), m.get(j, i));
            let u: Vec<f64> = profiles[i].count_vector.iter().map(|&c| c as f64).collect();
            let v: Vec<f64> = profiles[j].count_vector.iter().map(|&c| c as f64).collect();
            if i != j {
                assert!((m.get(i, j) - oracle::cosine(&u, &v)).abs() < 1e-12);
            }
        }
    }
}

fn counts() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..50, 6)
}

proptest! {
    #[test]
    fn cosine_bounds_and_identity(u in counts(), v in counts()) {
        let c = cosine(&u, &v).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.value));
        if u.iter().any(|&x| x > 0) {
            prop_assert_eq!(cosine(&u, &u).unwrap().value, 1.0);
        }
    }

    #[test]
    fn cosine_scale_invariance(u in counts(), v in counts(), alpha in 1u64..20) {
        let scaled: Vec<u64> = u.iter().map(|x| x * alpha).collect();
        let a = cosine(&u, &v).unwrap().value;
        let b = cosine(&scaled, &v).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn raising_threshold_never_adds_edges(
        tokens in prop::collection::vec(prop::collection::btree_set(0u8..8, 0..6), 2..10),
        t in 1usize..4,
    ) {
        let profiles: Vec<PersonProfile> = tokens
            .iter()
            .enumerate()
            .map(|(i, set)| {
                let mut p = PersonProfile::new(format!("p{i}"), 0);
                p.object_tokens = set.iter().map(|k| format!("o{k}")).collect::<BTreeSet<_>>();
                p
            })
            .collect();
        let low: BTreeSet<_> = build_graph(&profiles, t).unwrap().edges().map(|e| (e.source, e.target)).collect();
        let high: BTreeSet<_> = build_graph(&profiles, t + 1).unwrap().edges().map(|e| (e.source, e.target)).collect();
        prop_assert!(high.is_subset(&low));
    }

    #[test]
    fn preprocess_is_idempotent(
        words in prop::collection::vec("[a-zA-Z]{1,6}", 0..12),
        seps in prop::collection::vec("[ ,.!?-]{1,3}", 12),
    ) {
        let mut lemmas = HashMap::new();
        lemmas.insert("dogs".to_string(), "dog".to_string());
        lemmas.insert("cats".to_string(), "cat".to_string());
        lemmas.insert("dog".to_string(), "dog".to_string());
        let cfg = TokenPipelineConfig::new(["the", "a", "of"].map(String::from), lemmas).unwrap();
        let text: String = words.iter().zip(&seps).map(|(w, s)| format!("{w}{s}")).collect();
        let once = preprocess(&text, &cfg);
        let twice = preprocess(&once.join(" "), &cfg);
        prop_assert_eq!(once, twice);
    }
}
