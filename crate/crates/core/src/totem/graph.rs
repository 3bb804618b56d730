use std::io::Write;

use serde::Serialize;

use super::profile::PersonProfile;
use super::TotemError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub weight: usize,
}

/// People linked by the number of object tokens their captions share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceGraph {
    nodes: Vec<String>,
    /// `(u, v, weight)` node indices with `u < v`.
    links: Vec<(usize, usize, usize)>,
}

impl CooccurrenceGraph {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.links.len()
    }

    pub fn index_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().map(|&(u, v, _)| (u, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.links.iter().map(|&(u, v, w)| Edge {
            source: self.nodes[u].clone(),
            target: self.nodes[v].clone(),
            weight: w,
        })
    }

    /// `source<TAB>target<TAB>weight`, one edge per line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in self.edges() {
            writeln!(w, "{}\t{}\t{}", e.source, e.target, e.weight)?;
        }
        Ok(())
    }

    /// Node-link document (`{"nodes":[{"id":..}],"links":[..]}`).
    pub fn to_node_link(&self) -> serde_json::Value {
        serde_json::json!({
            "nodes": self.nodes.iter().map(|id| serde_json::json!({ "id": id })).collect::<Vec<_>>(),
            "links": self.edges().collect::<Vec<_>>(),
        })
    }
}

pub fn build_graph(profiles: &[PersonProfile], threshold: usize) -> Result<CooccurrenceGraph, TotemError> {
    if threshold < 1 {
        return Err(TotemError::InvalidEdgeThreshold(threshold));
    }
    let mut links = Vec::new();
    for (i, a) in profiles.iter().enumerate() {
        for (j, b) in profiles.iter().enumerate().skip(i + 1) {
            let shared = a.object_tokens.intersection(&b.object_tokens).count();
            if shared >= threshold {
                links.push((i, j, shared));
            }
        }
    }
    Ok(CooccurrenceGraph {
        nodes: profiles.iter().map(|p| p.person_id.clone()).collect(),
        links,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: &str, tokens: &[&str]) -> PersonProfile {
        let mut p = PersonProfile::new(id, 0);
        p.object_tokens = tokens.iter().map(|t| t.to_string()).collect();
        p
    }

    #[test]
    fn graph_examples() {
        let g = build_graph(&[profile("a", &["dog"]), profile("b", &["dog", "cat"])], 1).unwrap();
        assert_eq!(
            g.edges().collect::<Vec<_>>(),
            [Edge {
                source: "a".into(),
                target: "b".into(),
                weight: 1
            }]
        );
        let g = build_graph(&[profile("a", &["dog"]), profile("b", &["cat"])], 1).unwrap();
        assert_eq!(g.edge_count(), 0);
        let trio: Vec<_> = ["a", "b", "c"].iter().map(|id| profile(id, &["dog", "cat"])).collect();
        let g = build_graph(&trio, 2).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert!(g.edges().all(|e| e.weight == 2));
        assert_eq!(build_graph(&trio, 0).unwrap_err(), TotemError::InvalidEdgeThreshold(0));
    }

    #[test]
    fn exports() {
        let trio: Vec<_> = ["a", "b", "c"].iter().map(|id| profile(id, &["dog"])).collect();
        let g = build_graph(&trio, 1).unwrap();
        let mut out = Vec::new();
        g.write_edge_list(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a\tb\t1\na\tc\t1\nb\tc\t1\n");
        let doc = g.to_node_link();
        assert_eq!(doc["nodes"].as_array().unwrap().len(), 3);
        assert_eq!(doc["links"][0]["source"], "a");
    }
}
