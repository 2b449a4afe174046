use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{NodeId, RawStore};

/// User filtering rules applied before aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterPolicy {
    pub min_age: u32,
    pub max_age: u32,
    /// Users whose calls per active day exceed this are dropped.
    pub max_daily_calls: f64,
    /// Require at least one event in every calendar year of the window.
    pub require_yearly_activity: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            min_age: 18,
            max_age: 65,
            max_daily_calls: 8.0,
            require_yearly_activity: true,
        }
    }
}

#[derive(Default)]
struct Activity {
    calls: u64,
    first_ts: i64,
    last_ts: i64,
    years: BTreeSet<i32>,
    seen: bool,
}

impl Activity {
    fn touch(&mut self, calls: u64, first: i64, last: i64, year: i32) {
        if self.seen {
            self.first_ts = self.first_ts.min(first);
            self.last_ts = self.last_ts.max(last);
        } else {
            self.first_ts = first;
            self.last_ts = last;
            self.seen = true;
        }
        self.calls += calls;
        self.years.insert(year);
    }

    /// Calls divided by the span between first and last event, at least one day.
    fn daily_calls(&self) -> f64 {
        if !self.seen {
            return 0.0;
        }
        let days = ((self.last_ts - self.first_ts) as f64 / 86_400.0).max(1.0);
        self.calls as f64 / days
    }
}

/// Removes users failing the policy together with all their events.
///
/// Removing a user changes the activity of its contacts, so the rules are
/// reapplied until nothing changes; the result is a fixed point and applying
/// the filter again is a no-op.
pub fn filter_users(store: &RawStore, policy: &FilterPolicy) -> RawStore {
    let years = store.window.years();
    let mut alive: BTreeSet<NodeId> = store
        .complete_attrs()
        .filter(|(_, a)| a.age >= policy.min_age && a.age <= policy.max_age)
        .map(|(id, _)| id)
        .collect();

    loop {
        let mut activity: BTreeMap<NodeId, Activity> = BTreeMap::new();
        for (&(ego, alter, month), b) in &store.buckets {
            if !alive.contains(&ego) || !alive.contains(&alter) {
                continue;
            }
            let year = store.window.calendar(month).0;
            for id in [ego, alter] {
                activity
                    .entry(id)
                    .or_default()
                    .touch(b.calls(), b.first_ts, b.last_ts, year);
            }
        }
        let empty = Activity::default();
        let before = alive.len();
        alive.retain(|id| {
            let act = activity.get(id).unwrap_or(&empty);
            if act.daily_calls() > policy.max_daily_calls {
                return false;
            }
            !policy.require_yearly_activity || years.iter().all(|y| act.years.contains(y))
        });
        if alive.len() == before {
            break;
        }
    }

    RawStore {
        window: store.window,
        attrs: store
            .attrs
            .iter()
            .filter(|(id, _)| alive.contains(id))
            .map(|(&id, &a)| (id, a))
            .collect(),
        buckets: store
            .buckets
            .iter()
            .filter(|((e, a, _), _)| alive.contains(e) && alive.contains(a))
            .map(|(&k, &v)| (k, v))
            .collect(),
        unknown_nodes: BTreeSet::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::{
        ingest, Direction, EventRecord, Gender, Kind, NodeAttr, ObservationWindow, RawNodeAttr,
    };

    fn attr(age: u32) -> RawNodeAttr {
        NodeAttr {
            age,
            gender: Gender::A,
            lat: 60.0,
            lon: 25.0,
        }
        .into()
    }

    fn call(ego: NodeId, alter: NodeId, ts: i64) -> EventRecord {
        EventRecord {
            ego,
            alter,
            timestamp: ts,
            kind: Kind::Call,
            direction: Direction::Outgoing,
        }
    }

    fn window() -> ObservationWindow {
        ObservationWindow::default()
    }

    /// One call in January of each year between the two nodes.
    fn yearly_calls(a: NodeId, b: NodeId) -> Vec<EventRecord> {
        let w = window();
        [1, 13, 25]
            .iter()
            .map(|&m| call(a, b, w.month_start(m) + 86_400 * 3))
            .collect()
    }

    #[test]
    fn underage_node_removed() {
        let mut events = yearly_calls(1, 2);
        events.extend(yearly_calls(1, 3));
        let ing = ingest(events, vec![(1, attr(30)), (2, attr(17)), (3, attr(65))], window());
        let out = filter_users(&ing.store, &FilterPolicy::default());
        assert_eq!(out.attrs.keys().copied().collect::<Vec<_>>(), vec![1, 3]);
        assert!(out.buckets.keys().all(|&(e, a, _)| e != 2 && a != 2));
    }

    #[test]
    fn heavy_caller_removed() {
        let w = window();
        // Node 1: 9 calls a day for 10 days and nothing else.
        let start = w.month_start(2);
        let mut events = Vec::new();
        for day in 0..10 {
            for k in 0..9 {
                events.push(call(1, 2, start + day * 86_400 + k * 60));
            }
        }
        // Node 2's activity spans most of the window, diluting its average.
        events.push(call(3, 2, w.month_start(1)));
        events.push(call(3, 2, w.month_start(30)));
        let ing = ingest(
            events,
            vec![(1, attr(30)), (2, attr(30)), (3, attr(30))],
            window(),
        );
        let policy = FilterPolicy {
            require_yearly_activity: false,
            ..FilterPolicy::default()
        };
        let out = filter_users(&ing.store, &policy);
        assert_eq!(out.attrs.keys().copied().collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(out.event_count(), 2);
    }

    #[test]
    fn single_year_activity_removed() {
        let w = window();
        let mut events = yearly_calls(1, 2);
        events.push(call(3, 1, w.month_start(4) + 100));
        let ing = ingest(events, vec![(1, attr(30)), (2, attr(30)), (3, attr(30))], window());
        let out = filter_users(&ing.store, &FilterPolicy::default());
        assert_eq!(out.attrs.keys().copied().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn unknown_and_incomplete_nodes_removed() {
        let mut events = yearly_calls(1, 2);
        events.extend(yearly_calls(1, 9));
        let mut partial = attr(40);
        partial.lat = None;
        let ing = ingest(events, vec![(1, attr(30)), (2, partial)], window());
        let out = filter_users(&ing.store, &FilterPolicy::default());
        assert!(out.attrs.is_empty());
        assert!(out.buckets.is_empty());
    }

    #[test]
    fn cascade_reaches_fixed_point() {
        // Node 3 only talks to node 2 in 2009; node 2 is underage. Removing 2
        // strips node 3's 2009 activity, so 3 must go too.
        let w = window();
        let mut events = yearly_calls(1, 3);
        events.retain(|e| e.timestamp < w.month_start(25));
        events.push(call(3, 2, w.month_start(26)));
        events.extend(yearly_calls(1, 4));
        let ing = ingest(
            events,
            vec![(1, attr(30)), (2, attr(16)), (3, attr(30)), (4, attr(30))],
            window(),
        );
        let once = filter_users(&ing.store, &FilterPolicy::default());
        assert_eq!(once.attrs.keys().copied().collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(filter_users(&once, &FilterPolicy::default()), once);
    }
}
