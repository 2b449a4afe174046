use callnet_core::graphstore::{container::write_graph, normalize};
use callnet_core::metrics::io::{write_indices, write_tea, write_tet};
use callnet_core::metrics::{novelty, reoccurrence, surprise, tea_series, tet_layout};
use log::info;

use super::Context;
use crate::error::{IoContext, Result};
use crate::io::{build_graph, write_with, GRAPH};

pub fn run(ctx: &Context, months: Option<usize>) -> Result<()> {
    let window = ctx.window(months)?;
    let dir = &ctx.data_dir;
    let graph = build_graph(dir, window, &ctx.cfg.filter)?;
    let split = ctx.cfg.split_for(graph.months())?;
    let cutoff = split.val_cutoff;
    let indices = [
        ("novelty", novelty(&graph)?),
        ("reoccurrence", reoccurrence(&graph, cutoff)?),
        ("surprise", surprise(&graph, cutoff)?),
    ];
    for (name, v) in &indices {
        println!("{name}\t{v:.4}");
    }
    info!(
        "{} nodes, {} temporal edges, cutoff month {cutoff}",
        graph.node_count(),
        graph.temporal_edge_count()
    );
    let stats = normalize(&graph, &split).ok().map(|n| n.stats);
    write_with(&dir.join(GRAPH), |w| Ok(write_graph(w, &graph, stats.as_ref())?))?;
    let p = dir.join("indices.csv");
    write_with(&p, |w| write_indices(w, &indices).at(&p))?;
    let p = dir.join("tea.csv");
    write_with(&p, |w| write_tea(w, &tea_series(&graph)).at(&p))?;
    let p = dir.join("tet.csv");
    write_with(&p, |w| write_tet(w, &tet_layout(&graph, cutoff)).at(&p))?;
    Ok(())
}
