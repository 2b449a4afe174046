use std::collections::HashSet;

use super::{MetricsError, Result};
use crate::graphstore::TemporalGraph;

/// Edge identity: the ordered (src, dst) pair of node indices.
pub type EdgeKey = (u32, u32);

pub(crate) fn edge_set(graph: &TemporalGraph, months: std::ops::RangeInclusive<usize>) -> HashSet<EdgeKey> {
    months
        .flat_map(|t| graph.snapshot(t).edges.iter().map(|e| (e.src, e.dst)))
        .collect()
}

/// Mean over months of the fraction of that month's edges never seen before.
/// Months without edges are left out of both the sum and the count.
pub fn novelty(graph: &TemporalGraph) -> Result<f64> {
    let mut seen: HashSet<EdgeKey> = HashSet::new();
    let mut total = 0.0;
    let mut months = 0usize;
    for snap in &graph.snapshots {
        if snap.edges.is_empty() {
            continue;
        }
        let novel = snap
            .edges
            .iter()
            .filter(|e| !seen.contains(&(e.src, e.dst)))
            .count();
        total += novel as f64 / snap.edges.len() as f64;
        months += 1;
        seen.extend(snap.edges.iter().map(|e| (e.src, e.dst)));
    }
    if months == 0 {
        return Err(MetricsError::NoEdges);
    }
    Ok(total / months as f64)
}

fn dev_test(graph: &TemporalGraph, cutoff: usize) -> Result<(HashSet<EdgeKey>, HashSet<EdgeKey>)> {
    let months = graph.months();
    if cutoff < 1 || cutoff >= months {
        return Err(MetricsError::BadCutoff { cutoff, months });
    }
    Ok((
        edge_set(graph, 1..=cutoff),
        edge_set(graph, cutoff + 1..=months),
    ))
}

/// Share of development edges (months `1..=cutoff`) that reappear after the cutoff.
pub fn reoccurrence(graph: &TemporalGraph, cutoff: usize) -> Result<f64> {
    let (dev, test) = dev_test(graph, cutoff)?;
    if dev.is_empty() {
        return Err(MetricsError::EmptyDev);
    }
    Ok(dev.intersection(&test).count() as f64 / dev.len() as f64)
}

/// Share of test edges never seen up to the cutoff.
pub fn surprise(graph: &TemporalGraph, cutoff: usize) -> Result<f64> {
    let (dev, test) = dev_test(graph, cutoff)?;
    if test.is_empty() {
        return Err(MetricsError::EmptyTest);
    }
    Ok(test.difference(&dev).count() as f64 / test.len() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graphstore::{Edge, EdgeAttr, Gender, Node, NodeAttr, ObservationWindow};

    /// Graph from per-month lists of ordered pairs over nodes 0..n.
    pub(crate) fn graph_of(n: usize, months: &[&[(u32, u32)]]) -> TemporalGraph {
        let nodes = (0..n)
            .map(|i| Node {
                id: i as u64,
                attr: NodeAttr {
                    age: 30,
                    gender: Gender::A,
                    lat: 0.0,
                    lon: 0.0,
                },
            })
            .collect();
        TemporalGraph::from_parts(
            ObservationWindow::new(2007, 1, months.len()),
            nodes,
            months
                .iter()
                .map(|m| {
                    m.iter()
                        .map(|&(s, d)| Edge {
                            src: s,
                            dst: d,
                            attr: EdgeAttr::new(1, 0, 0, 0),
                        })
                        .collect()
                })
                .collect(),
        )
    }

    const E1: (u32, u32) = (0, 1);
    const E2: (u32, u32) = (1, 2);
    const E3: (u32, u32) = (2, 3);
    const E4: (u32, u32) = (3, 0);

    #[test]
    fn novelty_examples() {
        assert_eq!(novelty(&graph_of(4, &[&[E1, E2]])).unwrap(), 1.0);
        assert_eq!(novelty(&graph_of(4, &[&[E1, E2], &[E1, E3]])).unwrap(), 0.75);
        // empty middle month is skipped
        assert_eq!(novelty(&graph_of(4, &[&[E1, E2], &[], &[E1, E3]])).unwrap(), 0.75);
        assert_eq!(novelty(&graph_of(4, &[&[], &[]])), Err(MetricsError::NoEdges));
    }

    #[test]
    fn reoccurrence_and_surprise_examples() {
        let g = graph_of(4, &[&[E1], &[E2, E3], &[E2, E3, E4]]);
        assert!((reoccurrence(&g, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((surprise(&g, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let disjoint = graph_of(4, &[&[E1], &[E2]]);
        assert_eq!(reoccurrence(&disjoint, 1).unwrap(), 0.0);
        let subset = graph_of(4, &[&[E1, E2], &[E2]]);
        assert_eq!(surprise(&subset, 1).unwrap(), 0.0);
    }

    #[test]
    fn cutoff_and_empty_errors() {
        let g = graph_of(4, &[&[], &[E1]]);
        assert!(matches!(reoccurrence(&g, 2), Err(MetricsError::BadCutoff { .. })));
        assert_eq!(reoccurrence(&g, 1), Err(MetricsError::EmptyDev));
        let g = graph_of(4, &[&[E1], &[]]);
        assert_eq!(surprise(&g, 1), Err(MetricsError::EmptyTest));
    }
}
