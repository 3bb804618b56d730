//! Maximal clique enumeration by Bron–Kerbosch with Tomita pivoting.

use super::graph::CooccurrenceGraph;
use super::TotemError;

#[derive(Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(n: usize) -> Self {
        BitSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn full(n: usize) -> Self {
        let mut s = BitSet::new(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn and(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    fn and_not(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
        }
    }

    fn and_count(&self, other: &BitSet) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

struct Search<'a> {
    adj: &'a [BitSet],
    out: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn expand(&mut self, clique: &mut Vec<usize>, mut candidates: BitSet, mut excluded: BitSet) {
        if candidates.is_empty() {
            if excluded.is_empty() {
                self.out.push(clique.clone());
            }
            return;
        }
        // Pivot on the vertex of P ∪ X with the most neighbours in P.
        let pivot = candidates
            .iter()
            .chain(excluded.iter())
            .max_by_key(|&u| (candidates.and_count(&self.adj[u]), std::cmp::Reverse(u)))
            .expect("candidates is non-empty");
        let branch = candidates.and_not(&self.adj[pivot]);
        for v in branch.iter() {
            clique.push(v);
            self.expand(
                clique,
                candidates.and(&self.adj[v]),
                excluded.and(&self.adj[v]),
            );
            clique.pop();
            candidates.remove(v);
            excluded.insert(v);
        }
    }
}

/// All maximal cliques of the undirected graph on `0..n`, members ascending.
/// Self-loops and duplicate edges are ignored. Isolated vertices come out as
/// singleton cliques.
pub fn maximal_cliques(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let mut adj = vec![BitSet::new(n); n];
    for (u, v) in edges {
        if u != v {
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    let mut search = Search {
        adj: &adj,
        out: Vec::new(),
    };
    search.expand(&mut Vec::new(), BitSet::full(n), BitSet::new(n));
    let mut out = search.out;
    for c in &mut out {
        c.sort_unstable();
    }
    out
}

/// Sorts member ids, then orders cliques by size descending and
/// lexicographically within a size.
pub(crate) fn label_and_sort(labels: &[String], cliques: Vec<Vec<usize>>, min_size: usize) -> Vec<Vec<String>> {
    let mut named: Vec<Vec<String>> = cliques
        .into_iter()
        .filter(|c| c.len() >= min_size)
        .map(|c| {
            let mut members: Vec<String> = c.into_iter().map(|i| labels[i].clone()).collect();
            members.sort();
            members
        })
        .collect();
    named.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    named
}

/// Maximal cliques with at least `min_size` members.
pub fn enumerate_cliques(graph: &CooccurrenceGraph, min_size: usize) -> Result<Vec<Vec<String>>, TotemError> {
    if min_size < 2 {
        return Err(TotemError::InvalidMinSize(min_size));
    }
    let cliques = maximal_cliques(graph.nodes().len(), graph.index_edges());
    Ok(label_and_sort(graph.nodes(), cliques, min_size))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
        v.sort();
        v
    }

    #[test]
    fn triangle_and_path() {
        assert_eq!(maximal_cliques(3, [(0, 1), (1, 2), (0, 2)]), [vec![0, 1, 2]]);
        assert_eq!(sorted(maximal_cliques(3, [(0, 1), (1, 2)])), [vec![0, 1], vec![1, 2]]);
    }

    #[test]
    fn isolated_vertices_are_singletons() {
        assert_eq!(sorted(maximal_cliques(3, [(0, 1)])), [vec![0, 1], vec![2]]);
        assert!(maximal_cliques(0, []).is_empty());
    }

    #[test]
    fn wide_graph_crosses_word_boundary() {
        // Two disjoint cliques straddling bit 64.
        let n = 70;
        let a: Vec<usize> = (60..66).collect();
        let b: Vec<usize> = (0..3).collect();
        let mut edges = Vec::new();
        for group in [&a, &b] {
            for (i, &u) in group.iter().enumerate() {
                for &v in &group[i + 1..] {
                    edges.push((u, v));
                }
            }
        }
        let big: Vec<_> = maximal_cliques(n, edges).into_iter().filter(|c| c.len() > 1).collect();
        assert_eq!(sorted(big), [b, a]);
    }

    #[test]
    fn label_sort_order() {
        let labels: Vec<String> = ["c", "a", "b", "d"].iter().map(|s| s.to_string()).collect();
        let out = label_and_sort(&labels, vec![vec![2, 3], vec![0, 1, 2], vec![0, 3], vec![1]], 2);
        assert_eq!(out, [vec!["a", "b", "c"], vec!["b", "d"], vec!["c", "d"]]);
    }
}
