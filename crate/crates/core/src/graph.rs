//! Static digraph topology: generation, strong connectivity and diameter.
//!
//! Self-edges are never stored. The consensus sampler treats "self" as an
//! extra delivery target on its own, so BFS and diameter stay textbook.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("a digraph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("edge ({src}, {dst}) references a node outside 0..{n}")]
    NodeOutOfRange { src: usize, dst: usize, n: usize },
    #[error("self-edge on node {0} (self-delivery is implicit)")]
    SelfEdge(usize),
    #[error("digraph is not strongly connected")]
    NotStronglyConnected,
    #[error("edge probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("malformed edge list at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Strongly connected, static digraph with a cached diameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    diameter: usize,
}

impl Digraph {
    /// Builds from an edge list, rejecting anything that is not strongly connected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let (out_adj, in_adj) = adjacency(n, edges)?;
        if !strongly_connected(&out_adj, &in_adj) {
            return Err(GraphError::NotStronglyConnected);
        }
        let diameter = eccentricities(&out_adj)
            .into_iter()
            .max()
            .flatten()
            .expect("strongly connected graphs have finite eccentricities");
        Ok(Self {
            out_adj,
            in_adj,
            diameter,
        })
    }

    pub fn node_count(&self) -> usize {
        self.out_adj.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count()).map(NodeId)
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out_adj[v.0]
    }

    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.in_adj[v.0]
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_adj[v.0].len()
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// Sorted `(src, dst)` pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(src, outs)| outs.iter().map(move |dst| (src, dst.0)))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            out_adj: self.in_adj.clone(),
            in_adj: self.out_adj.clone(),
            diameter: self.diameter,
        }
    }

    /// Edge-list text: first line `n`, then one `src dst` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<(), GraphError> {
        writeln!(w, "{}", self.node_count())?;
        for (s, d) in self.edges() {
            writeln!(w, "{s} {d}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut n = None;
        let mut edges = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |tok: &str| {
                tok.parse::<usize>().map_err(|e| GraphError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match (n, toks.as_slice()) {
                (None, [count]) => n = Some(parse(count)?),
                (Some(_), [s, d]) => edges.push((parse(s)?, parse(d)?)),
                _ => {
                    return Err(GraphError::Parse {
                        line: i + 1,
                        reason: format!("unexpected {} tokens", toks.len()),
                    })
                }
            }
        }
        let n = n.ok_or(GraphError::Parse {
            line: 0,
            reason: "missing node count".into(),
        })?;
        Self::from_edges(n, &edges)
    }
}

fn adjacency(
    n: usize,
    edges: &[(usize, usize)],
) -> Result<(Vec<Vec<NodeId>>, Vec<Vec<NodeId>>), GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    let mut set = BTreeSet::new();
    for &(src, dst) in edges {
        if src >= n || dst >= n {
            return Err(GraphError::NodeOutOfRange { src, dst, n });
        }
        if src == dst {
            return Err(GraphError::SelfEdge(src));
        }
        set.insert((src, dst));
    }
    let mut out_adj = vec![Vec::new(); n];
    let mut in_adj = vec![Vec::new(); n];
    for (src, dst) in set {
        out_adj[src].push(NodeId(dst));
        in_adj[dst].push(NodeId(src));
    }
    Ok((out_adj, in_adj))
}

fn reaches_all(adj: &[Vec<NodeId>], start: usize) -> bool {
    bfs_distances(adj, start).iter().all(Option::is_some)
}

fn strongly_connected(out_adj: &[Vec<NodeId>], in_adj: &[Vec<NodeId>]) -> bool {
    reaches_all(out_adj, 0) && reaches_all(in_adj, 0)
}

fn bfs_distances(adj: &[Vec<NodeId>], start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::from([start]);
    dist[start] = Some(0);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for v in &adj[u] {
            if dist[v.0].is_none() {
                dist[v.0] = Some(du + 1);
                queue.push_back(v.0);
            }
        }
    }
    dist
}

/// Per-node eccentricity; `None` where some node is unreachable.
fn eccentricities(adj: &[Vec<NodeId>]) -> Vec<Option<usize>> {
    (0..adj.len())
        .map(|s| {
            bfs_distances(adj, s)
                .into_iter()
                .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
        })
        .collect()
}

/// Two sweeps from node 0: forward on the graph, forward on its transpose.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    strongly_connected(&g.out_adj, &g.in_adj)
}

/// Exact diameter by BFS from every node.
pub fn diameter(g: &Digraph) -> Result<usize, GraphError> {
    eccentricities(&g.out_adj)
        .into_iter()
        .try_fold(0, |acc, e| e.map(|e| acc.max(e)))
        .ok_or(GraphError::NotStronglyConnected)
}

/// Random strongly connected digraph.
///
/// A directed Hamiltonian cycle over a shuffled node order is laid down first,
/// then every remaining ordered pair is added independently with `edge_prob`.
pub fn generate_random_digraph(n: usize, edge_prob: f64, seed: u64) -> Result<Digraph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(GraphError::BadProbability(edge_prob));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges: BTreeSet<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    for src in 0..n {
        for dst in 0..n {
            if src != dst && !edges.contains(&(src, dst)) && rng.gen_bool(edge_prob) {
                edges.insert((src, dst));
            }
        }
    }
    let edges: Vec<_> = edges.into_iter().collect();
    Digraph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Digraph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Digraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn three_cycle() {
        let g = cycle(3);
        assert!(is_strongly_connected(&g));
        assert_eq!(g.diameter(), 2);
        assert_eq!(diameter(&g).unwrap(), 2);
    }

    #[test]
    fn path_is_rejected() {
        let err = Digraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap_err();
        assert!(matches!(err, GraphError::NotStronglyConnected));
        let (out_adj, in_adj) = adjacency(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(!strongly_connected(&out_adj, &in_adj));
    }

    #[test]
    fn complete_digraph_has_diameter_one() {
        let edges: Vec<_> = (0..5)
            .flat_map(|s| (0..5).filter(move |&d| d != s).map(move |d| (s, d)))
            .collect();
        let g = Digraph::from_edges(5, &edges).unwrap();
        assert_eq!(g.diameter(), 1);
    }

    #[test]
    fn bidirectional_path_of_four() {
        let g = Digraph::from_edges(4, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]).unwrap();
        assert_eq!(g.diameter(), 3);
    }

    #[test]
    fn generator_edge_cases() {
        let g = generate_random_digraph(3, 0.0, 11).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.diameter(), 2);
        let g = generate_random_digraph(4, 1.0, 11).unwrap();
        assert_eq!(g.edge_count(), 12);
        assert_eq!(g.diameter(), 1);
        assert!(generate_random_digraph(1, 0.5, 0).is_err());
        assert!(generate_random_digraph(4, 1.5, 0).is_err());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            Digraph::from_edges(2, &[(0, 2)]),
            Err(GraphError::NodeOutOfRange { .. })
        ));
        assert!(matches!(Digraph::from_edges(2, &[(1, 1)]), Err(GraphError::SelfEdge(1))));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = generate_random_digraph(8, 0.3, 5).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Digraph::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn edge_list_parse_errors() {
        assert!(Digraph::read_edge_list("".as_bytes()).is_err());
        assert!(Digraph::read_edge_list("3\n0 1 2\n".as_bytes()).is_err());
        assert!(Digraph::read_edge_list("2\n0 x\n".as_bytes()).is_err());
    }
}
