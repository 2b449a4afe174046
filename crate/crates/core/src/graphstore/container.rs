//! Versioned binary container for a [`TemporalGraph`] and optional
//! [`NormStats`]. All integers and floats are little-endian; identical input
//! produces identical bytes.
//!
//! Layout (version 1):
//!
//! ```text
//! magic "CNTG" | u32 version
//! i32 start_year | u32 start_month | u32 months
//! u64 node_count | node_count x (u64 id, u32 age, u8 gender, f64 lat, f64 lon)
//! months x (u64 edge_count | edge_count x (u32 src, u32 dst, 4 x u32 counts))
//! u8 has_stats | [14 x f64: age/lat/lon ranges, edge means, edge stds]
//! ```

use std::io::{Read, Write};

use super::{
    Edge, EdgeAttr, Gender, GraphError, Node, NodeAttr, NormStats, ObservationWindow, Result,
    TemporalGraph,
};

const MAGIC: &[u8; 4] = b"CNTG";
pub const VERSION: u32 = 1;

pub fn write_graph<W: Write>(
    mut out: W,
    graph: &TemporalGraph,
    stats: Option<&NormStats>,
) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + graph.temporal_edge_count() * 24);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&graph.window.start_year.to_le_bytes());
    buf.extend_from_slice(&graph.window.start_month.to_le_bytes());
    buf.extend_from_slice(&(graph.window.months as u32).to_le_bytes());
    buf.extend_from_slice(&(graph.nodes.len() as u64).to_le_bytes());
    for n in &graph.nodes {
        buf.extend_from_slice(&n.id.to_le_bytes());
        buf.extend_from_slice(&n.attr.age.to_le_bytes());
        buf.push(match n.attr.gender {
            Gender::A => 0,
            Gender::B => 1,
        });
        buf.extend_from_slice(&n.attr.lat.to_le_bytes());
        buf.extend_from_slice(&n.attr.lon.to_le_bytes());
    }
    for snap in &graph.snapshots {
        buf.extend_from_slice(&(snap.edges.len() as u64).to_le_bytes());
        for e in &snap.edges {
            for v in [
                e.src,
                e.dst,
                e.attr.calls_fwd,
                e.attr.sms_fwd,
                e.attr.calls_bwd,
                e.attr.sms_bwd,
            ] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    match stats {
        None => buf.push(0),
        Some(s) => {
            buf.push(1);
            for bits in s.fingerprint() {
                buf.extend_from_slice(&bits.to_le_bytes());
            }
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(GraphError::Format("unexpected end of data".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_graph<R: Read>(mut input: R) -> Result<(TemporalGraph, Option<NormStats>)> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut c = Cursor {
        data: &data,
        pos: 0,
    };
    if c.take(4)? != MAGIC {
        return Err(GraphError::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(GraphError::Format(format!("unsupported version {version}")));
    }
    let window = ObservationWindow::new(c.i32()?, c.u32()?, c.u32()? as usize);
    let n = c.u64()? as usize;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let id = c.u64()?;
        let age = c.u32()?;
        let gender = match c.u8()? {
            0 => Gender::A,
            1 => Gender::B,
            g => return Err(GraphError::Format(format!("bad gender code {g}"))),
        };
        nodes.push(Node {
            id,
            attr: NodeAttr {
                age,
                gender,
                lat: c.f64()?,
                lon: c.f64()?,
            },
        });
    }
    let mut months = Vec::with_capacity(window.months);
    for _ in 0..window.months {
        let m = c.u64()? as usize;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (src, dst) = (c.u32()?, c.u32()?);
            if src as usize >= n || dst as usize >= n {
                return Err(GraphError::Format("edge endpoint out of range".into()));
            }
            edges.push(Edge {
                src,
                dst,
                attr: EdgeAttr::new(c.u32()?, c.u32()?, c.u32()?, c.u32()?),
            });
        }
        months.push(edges);
    }
    let stats = match c.u8()? {
        0 => None,
        1 => {
            let mut v = [0.0; 14];
            for x in &mut v {
                *x = c.f64()?;
            }
            Some(NormStats {
                age_range: (v[0], v[1]),
                lat_range: (v[2], v[3]),
                lon_range: (v[4], v[5]),
                edge_mean: [v[6], v[7], v[8], v[9]],
                edge_std: [v[10], v[11], v[12], v[13]],
            })
        }
        f => return Err(GraphError::Format(format!("bad stats flag {f}"))),
    };
    if c.pos != data.len() {
        return Err(GraphError::Format("trailing bytes".into()));
    }
    Ok((TemporalGraph::from_parts(window, nodes, months), stats))
}
