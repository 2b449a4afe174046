//! Temporal call/SMS network toolkit: event ingestion and monthly snapshot
//! graphs, a synthetic event generator, temporal-edge statistics, the
//! windowed-memorization baseline and four temporal graph neural networks.

pub mod graphstore;
pub mod rng;
pub mod metrics;
pub mod edgebank;
pub mod synthgen;
pub mod neural;
pub mod models;
