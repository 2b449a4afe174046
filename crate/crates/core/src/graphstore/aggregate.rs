use std::collections::BTreeMap;

use log::warn;

use super::{Edge, EdgeAttr, Node, NodeId, RawStore, TemporalGraph};

/// Builds monthly snapshots from a filtered store.
///
/// For every unordered pair active in a month both ordered edges (i, j) and
/// (j, i) are materialized; each carries the four directional counts seen from
/// its own source, so the two records mirror each other.
pub fn aggregate_monthly(store: &RawStore) -> TemporalGraph {
    let nodes: Vec<Node> = store
        .complete_attrs()
        .map(|(id, attr)| Node { id, attr })
        .collect();
    let index: BTreeMap<NodeId, u32> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id, i as u32))
        .collect();

    // (low, high, month) -> [calls low->high, sms low->high, calls high->low, sms high->low]
    let mut pairs: BTreeMap<(u32, u32, usize), [u32; 4]> = BTreeMap::new();
    let mut dropped = 0u64;
    for (&(ego, alter, month), b) in &store.buckets {
        let (Some(&e), Some(&a)) = (index.get(&ego), index.get(&alter)) else {
            dropped += b.events();
            continue;
        };
        // ego -> alter traffic is `out`, alter -> ego is `in`.
        let (lo, hi, fwd_calls, fwd_sms, bwd_calls, bwd_sms) = if e < a {
            (e, a, b.calls_out, b.sms_out, b.calls_in, b.sms_in)
        } else {
            (a, e, b.calls_in, b.sms_in, b.calls_out, b.sms_out)
        };
        let c = pairs.entry((lo, hi, month)).or_insert([0; 4]);
        c[0] += fwd_calls;
        c[1] += fwd_sms;
        c[2] += bwd_calls;
        c[3] += bwd_sms;
    }
    if dropped > 0 {
        warn!("{dropped} events reference nodes without complete attributes; dropped");
    }

    let mut months: Vec<Vec<Edge>> = vec![Vec::new(); store.window.months];
    for (&(lo, hi, month), c) in &pairs {
        let attr = EdgeAttr::new(c[0], c[1], c[2], c[3]);
        months[month - 1].push(Edge {
            src: lo,
            dst: hi,
            attr,
        });
        months[month - 1].push(Edge {
            src: hi,
            dst: lo,
            attr: attr.mirrored(),
        });
    }
    TemporalGraph::from_parts(store.window, nodes, months)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::{
        ingest, Direction, EventRecord, Gender, Kind, NodeAttr, ObservationWindow, RawNodeAttr,
    };

    fn attrs(ids: &[NodeId]) -> Vec<(NodeId, RawNodeAttr)> {
        ids.iter()
            .map(|&id| {
                (
                    id,
                    NodeAttr {
                        age: 30,
                        gender: Gender::B,
                        lat: 1.0,
                        lon: 2.0,
                    }
                    .into(),
                )
            })
            .collect()
    }

    fn ev(ego: NodeId, alter: NodeId, month: usize, kind: Kind, dir: Direction) -> EventRecord {
        EventRecord {
            ego,
            alter,
            timestamp: ObservationWindow::default().month_start(month) + 5_000,
            kind,
            direction: dir,
        }
    }

    #[test]
    fn counts_land_in_the_right_slots() {
        // Three calls i->j logged from i, one SMS j->i logged from j's side
        // (ego j, outgoing) in month 5.
        let (i, j) = (10, 20);
        let mut events = vec![ev(i, j, 5, Kind::Call, Direction::Outgoing); 3];
        events.push(ev(j, i, 5, Kind::Sms, Direction::Outgoing));
        let ing = ingest(events, attrs(&[i, j]), ObservationWindow::default());
        let g = aggregate_monthly(&ing.store);
        let snap = g.snapshot(5);
        assert_eq!(snap.edges.len(), 2);
        let (si, sj) = (g.node_index(i).unwrap() as u32, g.node_index(j).unwrap() as u32);
        let e = snap.edges[snap.find(si, sj).unwrap()];
        assert_eq!(e.attr, EdgeAttr::new(3, 0, 0, 1));
        let m = snap.edges[snap.find(sj, si).unwrap()];
        assert_eq!(m.attr, EdgeAttr::new(0, 1, 3, 0));
        assert!(g.snapshot(4).edges.is_empty());
    }

    #[test]
    fn incoming_event_counts_for_the_alter() {
        let ing = ingest(
            vec![ev(1, 2, 1, Kind::Call, Direction::Incoming)],
            attrs(&[1, 2]),
            ObservationWindow::default(),
        );
        let g = aggregate_monthly(&ing.store);
        let s = g.snapshot(1);
        // call from 2 to 1
        assert_eq!(s.edges[s.find(1, 0).unwrap()].attr, EdgeAttr::new(1, 0, 0, 0));
    }

    #[test]
    fn months_are_independent() {
        let events = vec![
            ev(1, 2, 1, Kind::Call, Direction::Outgoing),
            ev(1, 2, 3, Kind::Sms, Direction::Outgoing),
        ];
        let g = aggregate_monthly(&ingest(events, attrs(&[1, 2]), ObservationWindow::default()).store);
        assert_eq!(g.months(), 36);
        assert_eq!(g.snapshot(1).edges.len(), 2);
        assert!(g.snapshot(2).edges.is_empty());
        assert_eq!(g.snapshot(3).edges.len(), 2);
    }
}
