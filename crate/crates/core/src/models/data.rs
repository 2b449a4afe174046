use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use ndarray::Array2;
use rand::seq::index::sample;

use super::Result;
use crate::graphstore::{
    normalize, sample_khop, NodeAttr, NormalizedGraph, Split, TemporalGraph, UnionGraph,
};
use crate::metrics::EdgeSet;
use crate::neural::{GraphCtx, Mat};
use crate::rng::Rng;

/// A graph prepared for training and evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: TemporalGraph,
    pub split: Split,
    pub norm: NormalizedGraph,
    pub union: UnionGraph,
    pub attrs: Vec<NodeAttr>,
}

/// The k-hop neighborhood sequence of one seed, ready for the models.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphSeq {
    /// Global node index of the seed.
    pub seed: u32,
    pub seed_local: usize,
    /// Global node indices; position is the local index.
    pub nodes: Vec<u32>,
    /// `n x 4` normalized node features.
    pub x: Mat,
    /// `graphs[t - 1]` for month `t`.
    pub graphs: Vec<GraphCtx>,
    /// Normalized edge features aligned with `graphs[t - 1].src`.
    pub edge_feats: Vec<Mat>,
    /// Per month, the seed's out-edges as (local destination, raw [calls, sms]).
    pub seed_out: Vec<Vec<(usize, [f64; 2])>>,
    /// Local nodes that are never adjacent to the seed in any month.
    pub non_neighbors: Vec<usize>,
}

impl SubgraphSeq {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    /// Local destination; the source is always the seed.
    pub dst: usize,
    pub set: EdgeSet,
    pub truth: [f64; 2],
}

/// Queries for one target month.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    pub month: usize,
    pub queries: Vec<Query>,
    /// Fewer random negatives than requested were available.
    pub short: bool,
}

impl Dataset {
    pub fn new(graph: TemporalGraph, split: Split) -> Result<Self> {
        let norm = normalize(&graph, &split)?;
        let union = UnionGraph::new(&graph);
        let attrs = graph.nodes.iter().map(|n| n.attr).collect();
        Ok(Dataset {
            graph,
            split,
            norm,
            union,
            attrs,
        })
    }

    pub fn months(&self) -> usize {
        self.graph.months()
    }

    /// Seeds with at least one out-edge in `months`, ascending.
    pub fn seeds_for(&self, months: RangeInclusive<usize>) -> Vec<u32> {
        let mut seeds = BTreeSet::new();
        for t in months {
            seeds.extend(self.graph.snapshot(t).edges.iter().map(|e| e.src));
        }
        seeds.into_iter().collect()
    }

    pub fn seq(&self, seed: u32, k: usize) -> Result<SubgraphSeq> {
        let sub = sample_khop(&self.graph, &self.union, self.graph.nodes[seed as usize].id, k)?;
        let n = sub.len();
        let x = Array2::from_shape_fn((n, 4), |(i, j)| self.norm.node_features[sub.nodes[i] as usize][j]);
        let mut graphs = Vec::with_capacity(sub.snapshots.len());
        let mut edge_feats = Vec::with_capacity(sub.snapshots.len());
        let mut seed_out = Vec::with_capacity(sub.snapshots.len());
        for (ti, edges) in sub.snapshots.iter().enumerate() {
            let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.src as usize, e.dst as usize)).collect();
            graphs.push(GraphCtx::new(n, &pairs));
            let feats = &self.norm.edge_features[ti];
            edge_feats.push(Array2::from_shape_fn((edges.len(), 4), |(i, j)| {
                feats[edges[i].index as usize][j]
            }));
            let snap = self.graph.snapshot(ti + 1);
            seed_out.push(
                edges
                    .iter()
                    .filter(|e| e.src as usize == sub.seed_local)
                    .map(|e| {
                        let a = snap.edges[e.index as usize].attr;
                        (e.dst as usize, [f64::from(a.calls_fwd), f64::from(a.sms_fwd)])
                    })
                    .collect(),
            );
        }
        let neighbors: BTreeSet<u32> = self.union.neighbors(seed as usize).iter().copied().collect();
        let non_neighbors = sub
            .nodes
            .iter()
            .enumerate()
            .filter(|&(i, g)| i != sub.seed_local && !neighbors.contains(g))
            .map(|(i, _)| i)
            .collect();
        Ok(SubgraphSeq {
            seed,
            seed_local: sub.seed_local,
            nodes: sub.nodes,
            x,
            graphs,
            edge_feats,
            seed_out,
            non_neighbors,
        })
    }
}

/// Seed-anchored queries for target month `month`: every positive out-edge,
/// `neg_ratio` random negatives per positive drawn without replacement from
/// nodes never adjacent to the seed, and, if `historical`, every earlier
/// partner of the seed that is silent in `month`. All negatives target zero.
pub fn month_queries(
    seq: &SubgraphSeq,
    month: usize,
    neg_ratio: usize,
    historical: bool,
    rng: &mut Rng,
) -> QuerySet {
    let mut queries: Vec<Query> = seq.seed_out[month - 1]
        .iter()
        .map(|&(dst, truth)| Query {
            dst,
            set: EdgeSet::Positive,
            truth,
        })
        .collect();
    let wanted = neg_ratio * queries.len();
    let pool = &seq.non_neighbors;
    let take = wanted.min(pool.len());
    let mut picks: Vec<usize> = sample(rng, pool.len(), take).into_iter().map(|i| pool[i]).collect();
    picks.sort_unstable();
    queries.extend(picks.into_iter().map(|dst| Query {
        dst,
        set: EdgeSet::RandomNegative,
        truth: [0.0; 2],
    }));
    if historical {
        let now: BTreeSet<usize> = seq.seed_out[month - 1].iter().map(|e| e.0).collect();
        let past: BTreeMap<usize, ()> = seq.seed_out[..month - 1]
            .iter()
            .flatten()
            .filter(|e| !now.contains(&e.0))
            .map(|e| (e.0, ()))
            .collect();
        queries.extend(past.into_keys().map(|dst| Query {
            dst,
            set: EdgeSet::HistoricalNegative,
            truth: [0.0; 2],
        }));
    }
    QuerySet {
        month,
        queries,
        short: take < wanted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::Split;
    use crate::metrics::indices::tests::graph_of;
    use crate::graphstore::EdgeAttr;
    use crate::rng::SeedStream;

    /// `graph_of` with counts varying by endpoint and month, so every edge
    /// feature has non-zero variance.
    fn varied(n: usize, months: &[&[(u32, u32)]]) -> TemporalGraph {
        let mut g = graph_of(n, months);
        for s in &mut g.snapshots {
            let m = s.month as u32;
            for e in &mut s.edges {
                let c = |a: u32| 1 + (m + a) % 3;
                e.attr = EdgeAttr::new(c(e.src), e.src % 2, c(e.dst), e.dst % 2);
            }
        }
        g
    }

    /// Path 0-1-2-3-4 plus a pendant 5 on 2, six months, with (0, 1) silent in month 4.
    fn dataset() -> Dataset {
        let both = |v: &[(u32, u32)]| -> Vec<(u32, u32)> {
            v.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
        };
        let full = both(&[(0, 1), (1, 2), (2, 3), (3, 4), (2, 5)]);
        let gap = both(&[(1, 2), (2, 3), (3, 4), (2, 5)]);
        let months: Vec<&[(u32, u32)]> = vec![&full, &full, &full, &gap, &full, &full];
        let g = varied(6, &months);
        Dataset::new(g, Split::default_for(6).unwrap()).unwrap()
    }

    #[test]
    fn subgraph_sequence_shape() {
        let ds = dataset();
        let seq = ds.seq(0, 2).unwrap();
        assert_eq!(seq.nodes, vec![0, 1, 2]);
        assert_eq!(seq.graphs.len(), 6);
        assert_eq!(seq.seed_out[0].len(), 1);
        assert_eq!(seq.non_neighbors, vec![2]);
        assert_eq!(seq.edge_feats[0].nrows(), seq.graphs[0].edge_count());
    }

    #[test]
    fn negatives_follow_the_ratio_and_never_collide() {
        let ds = dataset();
        let seq = ds.seq(2, 3).unwrap();
        let mut rng = SeedStream::new(1).rng();
        // seed 2 has 3 partners; the only non-neighbors are 0 and 4
        let q = month_queries(&seq, 5, 10, false, &mut rng);
        let pos = q.queries.iter().filter(|q| q.set == EdgeSet::Positive).count();
        assert_eq!(pos, 3);
        assert!(q.short);
        let positives: BTreeSet<usize> = seq.seed_out.iter().flatten().map(|e| e.0).collect();
        for r in q.queries.iter().filter(|q| q.set == EdgeSet::RandomNegative) {
            assert!(!positives.contains(&r.dst));
            assert_eq!(r.truth, [0.0; 2]);
        }
        let q0 = month_queries(&seq, 5, 0, false, &mut rng);
        assert!(q0.queries.iter().all(|q| q.set == EdgeSet::Positive));
        assert!(!q0.short);
    }

    #[test]
    fn historical_negative_for_silent_pair() {
        let ds = dataset();
        let seq = ds.seq(0, 2).unwrap();
        let mut rng = SeedStream::new(1).rng();
        let q = month_queries(&seq, 4, 0, true, &mut rng);
        let hist: Vec<_> = q
            .queries
            .iter()
            .filter(|q| q.set == EdgeSet::HistoricalNegative)
            .map(|q| seq.nodes[q.dst])
            .collect();
        assert_eq!(hist, vec![1]);
        assert!(q.queries.iter().all(|q| q.set != EdgeSet::Positive));
    }

    #[test]
    fn seven_positives_give_seventy_negatives() {
        // star: seed 0 talks to 1..=7, each of which talks to one leaf 8..=14
        let mut e = Vec::new();
        for i in 1..=7u32 {
            e.extend([(0, i), (i, 0), (i, i + 7), (i + 7, i)]);
        }
        // many 2-hop nodes hanging off node 1
        for j in 15..90u32 {
            e.extend([(1, j), (j, 1)]);
        }
        let months: Vec<&[(u32, u32)]> = vec![&e; 6];
        let ds = Dataset::new(varied(90, &months), Split::default_for(6).unwrap()).unwrap();
        let seq = ds.seq(0, 2).unwrap();
        let q = month_queries(&seq, 3, 10, false, &mut SeedStream::new(3).rng());
        let neg = q.queries.iter().filter(|q| q.set == EdgeSet::RandomNegative).count();
        assert_eq!(neg, 70);
        assert!(!q.short);
    }
}
