#![allow(dead_code)]

use callnet_core::graphstore::{aggregate_monthly, filter_users, ingest, FilterPolicy, Split, TemporalGraph};
use callnet_core::models::{Architecture, Dataset, ModelConfig};
use callnet_core::synthgen::{generate, GenConfig};

/// Unfiltered synthetic graph.
pub fn synthetic_graph(nodes: usize, months: usize, degree: f64, seed: u64) -> TemporalGraph {
    let cfg = GenConfig {
        n_nodes: nodes,
        n_months: months,
        mean_degree: degree,
        rng_seed: seed,
        ..GenConfig::default()
    };
    let out = generate(&cfg).unwrap();
    let ing = ingest(
        out.events.iter().copied(),
        out.attrs.iter().map(|&(id, a)| (id, a.into())),
        cfg.window(),
    );
    let policy = FilterPolicy {
        require_yearly_activity: false,
        max_daily_calls: f64::INFINITY,
        ..FilterPolicy::default()
    };
    aggregate_monthly(&filter_users(&ing.store, &policy))
}

pub fn synthetic_dataset(nodes: usize, months: usize, degree: f64, seed: u64) -> Dataset {
    let g = synthetic_graph(nodes, months, degree, seed);
    Dataset::new(g, Split::default_for(months).unwrap()).unwrap()
}

/// Small network of the given architecture.
pub fn tiny_config(arch: Architecture, hidden: usize) -> ModelConfig {
    ModelConfig {
        hidden_dim: hidden,
        chebyshev_k: 2,
        edge_mlp_hidden: 3,
        readout_hidden: 4,
        neg_ratio: 2,
        khop: 2,
        rng_seed: 5,
        ..ModelConfig::defaults(arch)
    }
}

use callnet_core::graphstore::{Edge, EdgeAttr, Gender, Node, NodeAttr, ObservationWindow};
use rand::Rng as _;

/// Counts follow a fixed rule of the endpoint attributes plus uniform noise
/// in `-noise..=noise`. Every node has a small set of candidate partners, each of
/// which is active in a month with probability `activity`.
pub fn attribute_rule_graph(nodes: usize, months: usize, partners: usize, activity: f64, noise: i32, seed: u64) -> TemporalGraph {
    let mut rng = callnet_core::rng::SeedStream::new(seed).rng();
    let attrs: Vec<NodeAttr> = (0..nodes)
        .map(|_| NodeAttr {
            age: rng.random_range(18..=65),
            gender: if rng.random_bool(0.5) { Gender::A } else { Gender::B },
            lat: rng.random_range(45.0..49.0),
            lon: rng.random_range(16.0..23.0),
        })
        .collect();
    let young = |a: &NodeAttr| (65.0 - f64::from(a.age)) / 47.0;
    let rule = |s: &NodeAttr, d: &NodeAttr| -> [f64; 2] {
        let same = if s.gender == d.gender { 1.0 } else { 0.0 };
        let b = if s.gender == Gender::B { 1.0 } else { 0.0 };
        [2.0 + 6.0 * young(s) + 3.0 * same, 1.0 + 4.0 * b + 3.0 * young(d)]
    };
    let mut ties = std::collections::BTreeSet::new();
    for a in 0..nodes as u32 {
        while ties.iter().filter(|&&(x, y)| x == a || y == a).count() < partners {
            let b = rng.random_range(0..nodes as u32);
            if b != a {
                ties.insert((a.min(b), a.max(b)));
            }
        }
    }
    let noisy = |base: f64, rng: &mut callnet_core::rng::Rng| {
        (base.round() + f64::from(rng.random_range(-noise..=noise))).max(0.0) as u32
    };
    let per_month = (0..months)
        .map(|_| {
            let mut edges = Vec::new();
            for &(a, b) in &ties {
                if !rng.random_bool(activity) {
                    continue;
                }
                let (fa, fb) = (rule(&attrs[a as usize], &attrs[b as usize]), rule(&attrs[b as usize], &attrs[a as usize]));
                let (c_ab, s_ab) = (noisy(fa[0], &mut rng), noisy(fa[1], &mut rng));
                let (c_ba, s_ba) = (noisy(fb[0], &mut rng), noisy(fb[1], &mut rng));
                let attr = EdgeAttr::new(c_ab, s_ab, c_ba, s_ba);
                edges.push(Edge { src: a, dst: b, attr });
                edges.push(Edge { src: b, dst: a, attr: attr.mirrored() });
            }
            edges
        })
        .collect();
    let node_list = attrs
        .into_iter()
        .enumerate()
        .map(|(i, attr)| Node { id: i as u64 + 1, attr })
        .collect();
    TemporalGraph::from_parts(ObservationWindow::new(2007, 1, months), node_list, per_month)
}
