use std::collections::HashSet;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use super::{GenConfig, Result};
use crate::graphstore::{Direction, EventRecord, Gender, Kind, NodeAttr, NodeId};
use crate::rng::{Rng, SeedStream};

/// Undirected tie between node indices `a < b`, born in `birth` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tie {
    pub a: u32,
    pub b: u32,
    pub birth: usize,
}

/// Node attributes, ties and their monthly activity; no counts yet.
#[derive(Debug, Clone, PartialEq)]
pub struct TiePlan {
    pub attrs: Vec<NodeAttr>,
    pub ties: Vec<Tie>,
    /// `active[i][t - 1]` for tie `i` and month `t`.
    pub active: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOutput {
    /// Sorted by (timestamp, ego, alter, kind).
    pub events: Vec<EventRecord>,
    pub attrs: Vec<(NodeId, NodeAttr)>,
}

pub(crate) fn node_id(index: u32) -> NodeId {
    u64::from(index) + 1
}

fn make_nodes(cfg: &GenConfig, stream: SeedStream) -> (Vec<NodeAttr>, Vec<usize>) {
    let mut rng = stream.rng();
    let centers: Vec<(f64, f64)> = (0..cfg.n_cities)
        .map(|_| (rng.random_range(45.0..49.0), rng.random_range(16.0..23.0)))
        .collect();
    // Zipf-like city sizes.
    let weights: Vec<f64> = (0..cfg.n_cities).map(|c| 1.0 / (c as f64 + 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let jitter = Normal::new(0.0, 0.05).expect("valid normal");
    let mut attrs = Vec::with_capacity(cfg.n_nodes);
    let mut city = Vec::with_capacity(cfg.n_nodes);
    for _ in 0..cfg.n_nodes {
        let mut x = rng.random::<f64>() * total;
        let mut c = 0;
        while c + 1 < cfg.n_cities && x >= weights[c] {
            x -= weights[c];
            c += 1;
        }
        let gender = if rng.random::<bool>() { Gender::A } else { Gender::B };
        attrs.push(NodeAttr {
            age: rng.random_range(cfg.min_age..=cfg.max_age),
            gender,
            lat: centers[c].0 + jitter.sample(&mut rng),
            lon: centers[c].1 + jitter.sample(&mut rng),
        });
        city.push(c);
    }
    (attrs, city)
}

/// Degree-biased partner choice: every node sits in an urn once plus once per
/// tie endpoint, per city and globally.
struct Attachment {
    city: Vec<usize>,
    city_urns: Vec<Vec<u32>>,
    global_urn: Vec<u32>,
    existing: HashSet<(u32, u32)>,
    locality: f64,
}

impl Attachment {
    fn new(city: Vec<usize>, n_cities: usize, locality: f64) -> Self {
        let mut city_urns = vec![Vec::new(); n_cities];
        for (i, &c) in city.iter().enumerate() {
            city_urns[c].push(i as u32);
        }
        let global_urn = (0..city.len() as u32).collect();
        Attachment {
            city,
            city_urns,
            global_urn,
            existing: HashSet::new(),
            locality,
        }
    }

    fn attach(&mut self, i: u32, rng: &mut Rng) -> Option<(u32, u32)> {
        for _ in 0..32 {
            let local = rng.random::<f64>() < self.locality;
            let urn = if local {
                &self.city_urns[self.city[i as usize]]
            } else {
                &self.global_urn
            };
            let j = urn[rng.random_range(0..urn.len())];
            if j == i {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if !self.existing.insert(key) {
                continue;
            }
            for v in [i, j] {
                self.city_urns[self.city[v as usize]].push(v);
                self.global_urn.push(v);
            }
            return Some(key);
        }
        None
    }
}

/// Ties and their activity. Births and activity draw from separate streams,
/// and each tie has its own activity stream, so changing `tie_persistence`
/// leaves the set of ties untouched and moves every tie's activity
/// monotonically (as long as persistence stays above the reactivation rate).
pub fn plan_ties(cfg: &GenConfig) -> Result<TiePlan> {
    cfg.validate()?;
    let root = SeedStream::new(cfg.rng_seed);
    let (attrs, city) = make_nodes(cfg, root.named("nodes"));
    let mut att = Attachment::new(city, cfg.n_cities, cfg.locality);

    let mut ties = Vec::new();
    let mut rng = root.named("initial-ties").rng();
    let half = cfg.mean_degree / 2.0;
    for i in 0..cfg.n_nodes as u32 {
        let k = half.floor() as usize + usize::from(rng.random::<f64>() < half.fract());
        for _ in 0..k {
            if let Some((a, b)) = att.attach(i, &mut rng) {
                ties.push(Tie { a, b, birth: 1 });
            }
        }
    }
    let mut rng = root.named("births").rng();
    for t in 2..=cfg.n_months {
        for i in 0..cfg.n_nodes as u32 {
            if rng.random::<f64>() < cfg.novel_tie_rate {
                if let Some((a, b)) = att.attach(i, &mut rng) {
                    ties.push(Tie { a, b, birth: t });
                }
            }
        }
    }

    let activity = root.named("activity");
    let pi = cfg.stationary_activity();
    let active = ties
        .iter()
        .enumerate()
        .map(|(idx, tie)| {
            let mut rng = activity.keyed(idx as u64).rng();
            let mut row = vec![false; cfg.n_months];
            let mut on = false;
            for t in 1..=cfg.n_months {
                // one uniform per month keeps the streams aligned across configs
                let u: f64 = rng.random();
                on = if t < tie.birth {
                    false
                } else if t == tie.birth {
                    tie.birth > 1 || u < pi
                } else if on {
                    u < cfg.tie_persistence
                } else {
                    u < cfg.reactivation_rate
                };
                row[t - 1] = on;
            }
            row
        })
        .collect();
    Ok(TiePlan { attrs, ties, active })
}

fn neg_binomial(mean: f64, shape: f64, rng: &mut Rng) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let lambda = Gamma::new(shape, mean / shape)
        .expect("positive gamma parameters")
        .sample(rng);
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u32
}

/// Generates the event stream and attribute table.
///
/// Every active tie-month holds one guaranteed call in a random direction plus
/// negative-binomial extras with sender-dependent means. In December the extras
/// are scaled so that the expected total is `december_boost` times the usual.
pub fn generate(cfg: &GenConfig) -> Result<GenOutput> {
    let plan = plan_ties(cfg)?;
    let window = cfg.window();
    let counts = SeedStream::new(cfg.rng_seed).named("counts");
    let bounds: Vec<(i64, i64)> = (1..=cfg.n_months)
        .map(|t| (window.month_start(t), window.month_start(t + 1)))
        .collect();

    let mut events = Vec::new();
    for (idx, (tie, row)) in plan.ties.iter().zip(&plan.active).enumerate() {
        let mut rng = counts.keyed(idx as u64).rng();
        let ra = cfg.rates_for(plan.attrs[tie.a as usize].age, plan.attrs[tie.a as usize].gender);
        let rb = cfg.rates_for(plan.attrs[tie.b as usize].age, plan.attrs[tie.b as usize].gender);
        // (sender, receiver, kind, mean)
        let channels = [
            (tie.a, tie.b, Kind::Call, ra.0),
            (tie.a, tie.b, Kind::Sms, ra.1),
            (tie.b, tie.a, Kind::Call, rb.0),
            (tie.b, tie.a, Kind::Sms, rb.1),
        ];
        let base: f64 = channels.iter().map(|c| c.3).sum();
        for (t, &on) in (1..=cfg.n_months).zip(row) {
            if !on {
                continue;
            }
            let scale = if window.calendar(t).1 == 12 && base > 0.0 {
                ((cfg.december_boost * (1.0 + base) - 1.0) / base).max(0.0)
            } else {
                1.0
            };
            let (lo, hi) = bounds[t - 1];
            let mut emit = |s: u32, r: u32, kind: Kind, rng: &mut Rng| {
                events.push(EventRecord {
                    ego: node_id(s),
                    alter: node_id(r),
                    timestamp: rng.random_range(lo..hi),
                    kind,
                    direction: Direction::Outgoing,
                });
            };
            let (s, r) = if rng.random::<bool>() { (tie.a, tie.b) } else { (tie.b, tie.a) };
            emit(s, r, Kind::Call, &mut rng);
            for &(s, r, kind, mean) in &channels {
                for _ in 0..neg_binomial(mean * scale, cfg.dispersion, &mut rng) {
                    emit(s, r, kind, &mut rng);
                }
            }
        }
    }
    events.sort_by_key(|e| (e.timestamp, e.ego, e.alter, e.kind == Kind::Sms));
    let attrs = plan
        .attrs
        .iter()
        .enumerate()
        .map(|(i, a)| (node_id(i as u32), *a))
        .collect();
    Ok(GenOutput { events, attrs })
}
