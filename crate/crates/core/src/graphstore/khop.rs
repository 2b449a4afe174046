use std::collections::VecDeque;

use rayon::prelude::*;

use super::{GraphError, NodeId, Result, TemporalGraph};

/// Undirected union of all snapshots in CSR form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl UnionGraph {
    pub fn new(graph: &TemporalGraph) -> Self {
        let n = graph.node_count();
        let mut pairs: Vec<(u32, u32)> = graph
            .snapshots
            .iter()
            .flat_map(|s| s.edges.iter())
            .flat_map(|e| [(e.src, e.dst), (e.dst, e.src)])
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in &pairs {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        UnionGraph {
            offsets,
            neighbors: pairs.into_iter().map(|(_, d)| d).collect(),
        }
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Edge of an induced snapshot, in subgraph-local node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubEdge {
    pub src: u32,
    pub dst: u32,
    /// Position of the edge in the full snapshot.
    pub index: u32,
}

/// The k-hop ball around a seed with its induced snapshots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub seed: NodeId,
    pub seed_local: usize,
    /// Global node indices, ascending; position is the local index.
    pub nodes: Vec<u32>,
    /// `snapshots[t - 1]`, sorted by (src, dst).
    pub snapshots: Vec<Vec<SubEdge>>,
}

impl Subgraph {
    pub fn local_index(&self, global: u32) -> Option<usize> {
        self.nodes.binary_search(&global).ok()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn bfs_ball(union: &UnionGraph, seed: usize, k: usize) -> Vec<u32> {
    let mut dist = vec![usize::MAX; union.node_count()];
    let mut queue = VecDeque::from([seed]);
    dist[seed] = 0;
    let mut ball = vec![seed as u32];
    while let Some(u) = queue.pop_front() {
        if dist[u] == k {
            continue;
        }
        for &v in union.neighbors(u) {
            let v = v as usize;
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                ball.push(v as u32);
                queue.push_back(v);
            }
        }
    }
    ball.sort_unstable();
    ball
}

/// Nodes within `k` hops of the seed in the undirected union graph, with
/// every snapshot restricted to them.
pub fn sample_khop(
    graph: &TemporalGraph,
    union: &UnionGraph,
    seed: NodeId,
    k: usize,
) -> Result<Subgraph> {
    let seed_idx = graph.node_index(seed).ok_or(GraphError::UnknownSeed(seed))?;
    let nodes = bfs_ball(union, seed_idx, k);
    let local = |g: u32| nodes.binary_search(&g).ok();
    let snapshots = graph
        .snapshots
        .iter()
        .map(|snap| {
            let mut out = Vec::new();
            for (li, &g) in nodes.iter().enumerate() {
                for pos in snap.out_range(g) {
                    let e = &snap.edges[pos];
                    if let Some(ld) = local(e.dst) {
                        out.push(SubEdge {
                            src: li as u32,
                            dst: ld as u32,
                            index: pos as u32,
                        });
                    }
                }
            }
            out
        })
        .collect();
    Ok(Subgraph {
        seed,
        seed_local: local(seed_idx as u32).expect("seed in its own ball"),
        nodes,
        snapshots,
    })
}

/// Samples many seeds in parallel; output order follows `seeds`.
pub fn sample_many(
    graph: &TemporalGraph,
    union: &UnionGraph,
    seeds: &[NodeId],
    k: usize,
) -> Result<Vec<Subgraph>> {
    seeds
        .par_iter()
        .map(|&s| sample_khop(graph, union, s, k))
        .collect()
}
