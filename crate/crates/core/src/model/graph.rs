use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected communication graph over agents `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct CommGraph {
    node_count: usize,
    /// Sorted, duplicate-free adjacency lists; symmetric by construction.
    adjacency: Vec<Vec<usize>>,
}

impl CommGraph {
    /// Builds a graph from zero-based edges. Duplicate edges (in either
    /// orientation) are merged.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidModel("graph needs at least one node".into()));
        }
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); node_count];
        for &(i, j) in edges {
            if i == j {
                return Err(Error::InvalidModel(format!("self-loop on node {i}")));
            }
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidModel(format!(
                    "edge ({i}, {j}) references a node outside 0..{node_count}"
                )));
            }
            adj[i].insert(j);
            adj[j].insert(i);
        }
        Ok(Self {
            node_count,
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Path graph 0 - 1 - ... - (n-1).
    pub fn line(node_count: usize) -> Result<Self> {
        let edges: Vec<_> = (1..node_count).map(|i| (i - 1, i)).collect();
        Self::new(node_count, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Agent `i` together with its neighbors, ascending.
    pub fn closed_neighborhood(&self, i: usize) -> Vec<usize> {
        let mut out = self.adjacency[i].clone();
        let pos = out.partition_point(|&j| j < i);
        out.insert(pos, i);
        out
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn bfs_depths(&self, source: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.node_count];
        depth[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = depth[u].unwrap_or(0);
            for &v in &self.adjacency[u] {
                if depth[v].is_none() {
                    depth[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        depth
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_depths(0).iter().all(Option::is_some)
    }

    /// Longest shortest path, `None` for disconnected graphs.
    pub fn diameter(&self) -> Option<usize> {
        let mut diam = 0;
        for s in 0..self.node_count {
            for d in self.bfs_depths(s) {
                diam = diam.max(d?);
            }
        }
        Some(diam)
    }
}

/// On-disk form: one-based edge list.
#[derive(Serialize, Deserialize)]
struct GraphRepr {
    node_count: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for CommGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        let mut edges = Vec::with_capacity(r.edges.len());
        for [i, j] in r.edges {
            if i == 0 || j == 0 {
                return Err(Error::InvalidModel("edge endpoints are one-based".into()));
            }
            edges.push((i - 1, j - 1));
        }
        CommGraph::new(r.node_count, &edges)
    }
}

impl From<CommGraph> for GraphRepr {
    fn from(g: CommGraph) -> Self {
        GraphRepr {
            node_count: g.node_count,
            edges: g.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_neighborhoods_are_sorted_and_closed() {
        let g = CommGraph::line(3).unwrap();
        assert_eq!(g.closed_neighborhood(0), vec![0, 1]);
        assert_eq!(g.closed_neighborhood(1), vec![0, 1, 2]);
        assert_eq!(g.closed_neighborhood(2), vec![1, 2]);
        assert_eq!(g.diameter(), Some(2));
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(CommGraph::new(2, &[(1, 1)]).is_err());
        assert!(CommGraph::new(2, &[(0, 2)]).is_err());
        assert!(CommGraph::new(0, &[]).is_err());
    }

    #[test]
    fn symmetric_storage() {
        let g = CommGraph::new(4, &[(2, 0), (0, 2), (3, 1)]).unwrap();
        assert_eq!(g.neighbors(0), &[2]);
        assert_eq!(g.neighbors(2), &[0]);
        assert_eq!(g.edges(), vec![(0, 2), (1, 3)]);
        assert!(!g.is_connected());
        assert_eq!(g.diameter(), None);
    }

    #[test]
    fn json_uses_one_based_edges() {
        let g = CommGraph::line(3).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"node_count":3,"edges":[[1,2],[2,3]]}"#);
        let back: CommGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<CommGraph>(r#"{"node_count":2,"edges":[[0,1]]}"#).is_err());
    }
}
