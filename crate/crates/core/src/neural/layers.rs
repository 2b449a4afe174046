//! Graph and sequence layers. Every layer registers its parameters in a
//! [`ParamStore`] under a name prefix and reads them back from a [`Bound`].

use std::collections::HashMap;

use ndarray::Array2;

use super::tape::{concat_cols, Mat, Tape, Tensor};
use super::{uniform_fan_in, uniform_with_fan, Bound, NeuralError, ParamId, ParamStore, Result};
use crate::rng::Rng;

/// One directed snapshot in local node indices, with the index arrays the
/// layers need precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCtx {
    pub n: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// Position of the reverse edge, or the edge itself when absent.
    pub mirror: Vec<usize>,
    /// Edges followed by one self-loop per node.
    pub loop_src: Vec<usize>,
    pub loop_dst: Vec<usize>,
    /// `n x 1`, in-degree plus one.
    pub inv_in_count: Mat,
}

impl GraphCtx {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let pos: HashMap<(usize, usize), usize> =
            edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let src: Vec<usize> = edges.iter().map(|e| e.0).collect();
        let dst: Vec<usize> = edges.iter().map(|e| e.1).collect();
        let mirror = edges
            .iter()
            .enumerate()
            .map(|(i, &(s, d))| pos.get(&(d, s)).copied().unwrap_or(i))
            .collect();
        let loop_src: Vec<usize> = src.iter().copied().chain(0..n).collect();
        let loop_dst: Vec<usize> = dst.iter().copied().chain(0..n).collect();
        let mut count = vec![0.0; n];
        for &d in &loop_dst {
            count[d] += 1.0;
        }
        let inv_in_count = Array2::from_shape_fn((n, 1), |(i, _)| 1.0 / count[i]);
        GraphCtx {
            n,
            src,
            dst,
            mirror,
            loop_src,
            loop_dst,
            inv_in_count,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.src.len()
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, inp: usize, out: usize, bias: bool) -> Self {
        Linear {
            w: store.add(&format!("{name}.w"), uniform_fan_in(rng, inp, out)),
            b: bias.then(|| store.add(&format!("{name}.b"), uniform_with_fan(rng, 1, out, inp))),
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Tensor<'t>) -> Tensor<'t> {
        let y = x.matmul(p.get(self.w));
        match self.b {
            Some(b) => y + p.get(b),
            None => y,
        }
    }
}

/// Two-layer MLP compressing the four edge features to a weight in (0, 1).
#[derive(Debug, Clone)]
pub struct EdgeWeightMlp {
    pub l1: Linear,
    pub l2: Linear,
}

impl EdgeWeightMlp {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, hidden: usize) -> Self {
        EdgeWeightMlp {
            l1: Linear::new(store, &format!("{name}.l1"), rng, 4, hidden, true),
            l2: Linear::new(store, &format!("{name}.l2"), rng, hidden, 1, true),
        }
    }

    /// `m x 4` edge features to `m x 1` weights.
    pub fn forward<'t>(&self, p: &Bound<'t>, e: Tensor<'t>) -> Tensor<'t> {
        self.l2.forward(p, self.l1.forward(p, e).relu()).sigmoid()
    }
}

/// Dense scaled Laplacian `2 L / lambda_max - I` with
/// `L = I - D^(-1/2) A D^(-1/2)`; isolated nodes get zero rows and columns
/// in the normalized adjacency.
pub fn scaled_laplacian(adj: &Mat, lambda_max: f64) -> Result<Mat> {
    let n = adj.nrows();
    if adj.ncols() != n {
        return Err(NeuralError::Shape(format!("adjacency is {:?}", adj.dim())));
    }
    if let Some(((row, col), _)) = adj.indexed_iter().find(|(_, &w)| w < 0.0) {
        return Err(NeuralError::NegativeWeight { row, col });
    }
    let inv_sqrt: Vec<f64> = adj
        .rows()
        .into_iter()
        .map(|r| {
            let d = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let a_norm = inv_sqrt[i] * adj[[i, j]] * inv_sqrt[j];
            let lap = if i == j { 1.0 } else { 0.0 } - a_norm;
            l[[i, j]] = 2.0 * lap / lambda_max - if i == j { 1.0 } else { 0.0 };
        }
    }
    Ok(l)
}

/// Sparse normalized adjacency `D^(-1/2) W D^(-1/2)` as per-edge
/// coefficients, from directed weights symmetrized with their mirrors.
pub fn normalized_edge_coeffs<'t>(g: &GraphCtx, w: Tensor<'t>) -> Tensor<'t> {
    let sym = (w + w.gather_rows(&g.mirror)).scale(0.5);
    let inv_sqrt_deg = sym.scatter_add_rows(&g.src, g.n).rsqrt_safe();
    sym * inv_sqrt_deg.gather_rows(&g.src) * inv_sqrt_deg.gather_rows(&g.dst)
}

/// `A x` for sparse coefficients (`out[dst] += c * x[src]`).
pub fn propagate<'t>(g: &GraphCtx, coeffs: Tensor<'t>, x: Tensor<'t>) -> Tensor<'t> {
    if g.edge_count() == 0 {
        return x.scale(0.0);
    }
    (x.gather_rows(&g.src) * coeffs).scatter_add_rows(&g.dst, g.n)
}

/// `T_0 x, ..., T_{K-1} x` for the scaled Laplacian `(2 / lambda - 1) I - (2 / lambda) A`.
pub fn chebyshev_basis<'t>(
    g: &GraphCtx,
    coeffs: Tensor<'t>,
    x: Tensor<'t>,
    k: usize,
    lambda_max: f64,
) -> Vec<Tensor<'t>> {
    let lap = |v: Tensor<'t>| {
        let a = 2.0 / lambda_max;
        if (a - 1.0).abs() < f64::EPSILON {
            -propagate(g, coeffs, v)
        } else {
            v.scale(a - 1.0) - propagate(g, coeffs, v).scale(a)
        }
    };
    let mut out = vec![x];
    if k > 1 {
        out.push(lap(x));
    }
    while out.len() < k {
        let n = out.len();
        let next = lap(out[n - 1]).scale(2.0) - out[n - 2];
        out.push(next);
    }
    out
}

pub const LAMBDA_MAX: f64 = 2.0;

/// `sum_k T_k(L) x theta_k + b`.
#[derive(Debug, Clone)]
pub struct ChebConv {
    pub thetas: Vec<ParamId>,
    pub bias: ParamId,
}

impl ChebConv {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, k: usize, inp: usize, out: usize) -> Self {
        assert!(k >= 1, "Chebyshev order must be at least 1");
        ChebConv {
            thetas: (0..k)
                .map(|i| store.add(&format!("{name}.theta{i}"), uniform_with_fan(rng, inp, out, inp * k)))
                .collect(),
            bias: store.add(&format!("{name}.b"), Array2::zeros((1, out))),
        }
    }

    pub fn k(&self) -> usize {
        self.thetas.len()
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, g: &GraphCtx, coeffs: Tensor<'t>, x: Tensor<'t>) -> Tensor<'t> {
        let basis = chebyshev_basis(g, coeffs, x, self.k(), LAMBDA_MAX);
        let mut h = p.get(self.bias);
        for (tx, &th) in basis.into_iter().zip(&self.thetas) {
            h = tx.matmul(p.get(th)) + h;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    Max,
}

/// Message passing over in-edges plus a self-loop per node:
/// `msg = x_src W_s + x_dst W_d + e W_e + b`, then mean or max per destination.
/// Self-loops carry zero edge features.
#[derive(Debug, Clone)]
pub struct MpaLayer {
    pub w_src: ParamId,
    pub w_dst: ParamId,
    pub w_edge: ParamId,
    pub b: ParamId,
    pub agg: Aggregation,
}

impl MpaLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        rng: &mut Rng,
        inp: usize,
        edge_dim: usize,
        out: usize,
        agg: Aggregation,
    ) -> Self {
        let fan = 2 * inp + edge_dim;
        MpaLayer {
            w_src: store.add(&format!("{name}.w_src"), uniform_with_fan(rng, inp, out, fan)),
            w_dst: store.add(&format!("{name}.w_dst"), uniform_with_fan(rng, inp, out, fan)),
            w_edge: store.add(&format!("{name}.w_edge"), uniform_with_fan(rng, edge_dim, out, fan)),
            b: store.add(&format!("{name}.b"), Array2::zeros((1, out))),
            agg,
        }
    }

    /// `x`: `n x in`, `e`: `m x edge_dim` aligned with `g.src`.
    pub fn forward<'t>(&self, p: &Bound<'t>, g: &GraphCtx, x: Tensor<'t>, e: Tensor<'t>) -> Tensor<'t> {
        let tape = x.tape();
        let xs = x.matmul(p.get(self.w_src)).gather_rows(&g.loop_src);
        let xd = x.matmul(p.get(self.w_dst)).gather_rows(&g.loop_dst);
        let out_dim = xs.shape().1;
        let self_e = tape.constant(Array2::zeros((g.n, out_dim)));
        let me = if g.edge_count() > 0 {
            super::concat_rows(&[e.matmul(p.get(self.w_edge)), self_e])
        } else {
            self_e
        };
        let msg = xs + xd + me + p.get(self.b);
        match self.agg {
            Aggregation::Mean => {
                msg.scatter_add_rows(&g.loop_dst, g.n) * tape.constant(g.inv_in_count.clone())
            }
            Aggregation::Max => msg.scatter_max_rows(&g.loop_dst, g.n),
        }
    }
}

/// Dense GRU cell: `h' = z * h + (1 - z) * n`.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub wx: Linear,
    pub wh: ParamId,
    pub wn: ParamId,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, inp: usize, hidden: usize) -> Self {
        GruCell {
            wx: Linear::new(store, &format!("{name}.wx"), rng, inp, 3 * hidden, true),
            wh: store.add(&format!("{name}.wh"), uniform_fan_in(rng, hidden, 2 * hidden)),
            wn: store.add(&format!("{name}.wn"), uniform_fan_in(rng, hidden, hidden)),
            hidden,
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Tensor<'t>, h: Tensor<'t>) -> Tensor<'t> {
        let d = self.hidden;
        let gx = self.wx.forward(p, x);
        let gh = h.matmul(p.get(self.wh));
        let z = (gx.slice_cols(0, d) + gh.slice_cols(0, d)).sigmoid();
        let r = (gx.slice_cols(d, d) + gh.slice_cols(d, d)).sigmoid();
        let n = (gx.slice_cols(2 * d, d) + (r * h).matmul(p.get(self.wn))).tanh();
        gru_mix(z, h, n)
    }
}

fn gru_mix<'t>(z: Tensor<'t>, h: Tensor<'t>, n: Tensor<'t>) -> Tensor<'t> {
    z * h + (-z).add_scalar(1.0) * n
}

/// GRU whose linear maps are Chebyshev convolutions over `[x, h]`.
#[derive(Debug, Clone)]
pub struct ChebGruCell {
    pub gates: ChebConv,
    pub cand: ChebConv,
    pub hidden: usize,
}

impl ChebGruCell {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, k: usize, inp: usize, hidden: usize) -> Self {
        ChebGruCell {
            gates: ChebConv::new(store, &format!("{name}.gates"), rng, k, inp + hidden, 2 * hidden),
            cand: ChebConv::new(store, &format!("{name}.cand"), rng, k, inp + hidden, hidden),
            hidden,
        }
    }

    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        g: &GraphCtx,
        coeffs: Tensor<'t>,
        x: Tensor<'t>,
        h: Tensor<'t>,
    ) -> Tensor<'t> {
        let d = self.hidden;
        let zr = self.gates.forward(p, g, coeffs, concat_cols(&[x, h])).sigmoid();
        let (z, r) = (zr.slice_cols(0, d), zr.slice_cols(d, d));
        let n = self.cand.forward(p, g, coeffs, concat_cols(&[x, r * h])).tanh();
        gru_mix(z, h, n)
    }
}

/// LSTM whose linear maps are Chebyshev convolutions over `[x, h]`; gate
/// order i, f, g, o with the forget bias starting at 1.
#[derive(Debug, Clone)]
pub struct ChebLstmCell {
    pub conv: ChebConv,
    pub hidden: usize,
}

impl ChebLstmCell {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, k: usize, inp: usize, hidden: usize) -> Self {
        let conv = ChebConv::new(store, &format!("{name}.conv"), rng, k, inp + hidden, 4 * hidden);
        store
            .value_mut(conv.bias)
            .slice_mut(ndarray::s![.., hidden..2 * hidden])
            .fill(1.0);
        ChebLstmCell { conv, hidden }
    }

    /// Returns `(h', c')`.
    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        g: &GraphCtx,
        coeffs: Tensor<'t>,
        x: Tensor<'t>,
        h: Tensor<'t>,
        c: Tensor<'t>,
    ) -> (Tensor<'t>, Tensor<'t>) {
        let d = self.hidden;
        let gates = self.conv.forward(p, g, coeffs, concat_cols(&[x, h]));
        let i = gates.slice_cols(0, d).sigmoid();
        let f = gates.slice_cols(d, d).sigmoid();
        let gg = gates.slice_cols(2 * d, d).tanh();
        let o = gates.slice_cols(3 * d, d).sigmoid();
        let c2 = f * c + i * gg;
        (o * c2.tanh(), c2)
    }
}

/// ALiBi slope of head `h` (0-based) out of `heads`: `2^(-8 (h + 1) / heads)`.
pub fn alibi_slope(h: usize, heads: usize) -> f64 {
    2f64.powf(-8.0 * (h + 1) as f64 / heads as f64)
}

/// Causal single-head self-attention over a node's per-month embeddings with
/// a linear recency penalty.
#[derive(Debug, Clone)]
pub struct TemporalAttention {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub slope: f64,
    pub dim: usize,
}

impl TemporalAttention {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, dim: usize) -> Self {
        TemporalAttention {
            wq: store.add(&format!("{name}.wq"), uniform_fan_in(rng, dim, dim)),
            wk: store.add(&format!("{name}.wk"), uniform_fan_in(rng, dim, dim)),
            wv: store.add(&format!("{name}.wv"), uniform_fan_in(rng, dim, dim)),
            slope: alibi_slope(0, 1),
            dim,
        }
    }

    /// Output and `n x (t + 1)` weights at every step `t` of `hs`.
    pub fn forward_with_weights<'t>(
        &self,
        p: &Bound<'t>,
        hs: &[Tensor<'t>],
    ) -> Vec<(Tensor<'t>, Tensor<'t>)> {
        let tape = hs[0].tape();
        let qs: Vec<_> = hs.iter().map(|h| h.matmul(p.get(self.wq))).collect();
        let ks: Vec<_> = hs.iter().map(|h| h.matmul(p.get(self.wk))).collect();
        let vs: Vec<_> = hs.iter().map(|h| h.matmul(p.get(self.wv))).collect();
        let scale = 1.0 / (self.dim as f64).sqrt();
        (0..hs.len())
            .map(|t| {
                let n = hs[t].shape().0;
                let scores: Vec<_> = (0..=t)
                    .map(|tau| (qs[t] * ks[tau]).sum_cols().scale(scale))
                    .collect();
                let bias = Array2::from_shape_fn((1, t + 1), |(_, tau)| -self.slope * (t - tau) as f64);
                let w = (concat_cols(&scores) + tape.constant(bias)).softmax_rows();
                let mut z = w.slice_cols(0, 1) * vs[0];
                for (tau, v) in vs.iter().enumerate().take(t + 1).skip(1) {
                    z = z + w.slice_cols(tau, 1) * *v;
                }
                debug_assert_eq!(z.shape().0, n);
                (z, w)
            })
            .collect()
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, hs: &[Tensor<'t>]) -> Vec<Tensor<'t>> {
        self.forward_with_weights(p, hs).into_iter().map(|(z, _)| z).collect()
    }
}

/// Graph attention over in-edges plus self-loops, scores scaled by edge weights.
#[derive(Debug, Clone)]
pub struct StructuralAttention {
    pub w: ParamId,
    pub a_src: ParamId,
    pub a_dst: ParamId,
}

impl StructuralAttention {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, inp: usize, out: usize) -> Self {
        StructuralAttention {
            w: store.add(&format!("{name}.w"), uniform_fan_in(rng, inp, out)),
            a_src: store.add(&format!("{name}.a_src"), uniform_fan_in(rng, out, 1)),
            a_dst: store.add(&format!("{name}.a_dst"), uniform_fan_in(rng, out, 1)),
        }
    }

    /// `edge_w`: `m x 1` weights aligned with `g.src`; self-loops weigh 1.
    pub fn forward<'t>(&self, p: &Bound<'t>, g: &GraphCtx, x: Tensor<'t>, edge_w: Tensor<'t>) -> Tensor<'t> {
        let tape = x.tape();
        let xw = x.matmul(p.get(self.w));
        let ones = tape.constant(Array2::ones((g.n, 1)));
        let w = if g.edge_count() > 0 {
            super::concat_rows(&[edge_w, ones])
        } else {
            ones
        };
        let score = (xw.matmul(p.get(self.a_src)).gather_rows(&g.loop_src)
            + xw.matmul(p.get(self.a_dst)).gather_rows(&g.loop_dst))
        .leaky_relu(0.2)
            * w;
        let alpha = score.segment_softmax(&g.loop_dst);
        (xw.gather_rows(&g.loop_src) * alpha)
            .scatter_add_rows(&g.loop_dst, g.n)
            .elu(1.0)
    }
}

/// `calls = sum((O_s S_c) * (O_d D_c))`, `sms = sum((O_s S_m) * (O_d D_m))`.
#[derive(Debug, Clone)]
pub struct InnerProductDecoder {
    pub s_c: ParamId,
    pub d_c: ParamId,
    pub s_m: ParamId,
    pub d_m: ParamId,
}

impl InnerProductDecoder {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, dim: usize, proj: usize) -> Self {
        let mut m = |suffix: &str| store.add(&format!("{name}.{suffix}"), uniform_fan_in(rng, dim, proj));
        InnerProductDecoder {
            s_c: m("s_c"),
            d_c: m("d_c"),
            s_m: m("s_m"),
            d_m: m("d_m"),
        }
    }

    /// `q x 2` predictions.
    pub fn forward<'t>(&self, p: &Bound<'t>, os: Tensor<'t>, od: Tensor<'t>) -> Tensor<'t> {
        let calls = (os.matmul(p.get(self.s_c)) * od.matmul(p.get(self.d_c))).sum_cols();
        let sms = (os.matmul(p.get(self.s_m)) * od.matmul(p.get(self.d_m))).sum_cols();
        concat_cols(&[calls, sms])
    }
}

/// MLP on `[O_s, O_d]` to two outputs.
#[derive(Debug, Clone)]
pub struct MlpReadout {
    pub l1: Linear,
    pub l2: Linear,
}

impl MlpReadout {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, dim: usize, hidden: usize) -> Self {
        MlpReadout {
            l1: Linear::new(store, &format!("{name}.l1"), rng, 2 * dim, hidden, true),
            l2: Linear::new(store, &format!("{name}.l2"), rng, hidden, 2, true),
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, os: Tensor<'t>, od: Tensor<'t>) -> Tensor<'t> {
        self.l2.forward(p, self.l1.forward(p, concat_cols(&[os, od])).relu())
    }
}

/// Batch statistics produced by a training-mode batch norm call.
#[derive(Debug, Clone, PartialEq)]
pub struct BnUpdate {
    pub mean_id: ParamId,
    pub var_id: ParamId,
    pub mean: Mat,
    pub var: Mat,
}

/// Batch normalization over nodes with running statistics in buffers.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        BatchNorm {
            gamma: store.add(&format!("{name}.gamma"), Array2::ones((1, dim))),
            beta: store.add(&format!("{name}.beta"), Array2::zeros((1, dim))),
            running_mean: store.add_buffer(&format!("{name}.running_mean"), Array2::zeros((1, dim))),
            running_var: store.add_buffer(&format!("{name}.running_var"), Array2::ones((1, dim))),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Tensor<'t>, train: bool) -> (Tensor<'t>, Option<BnUpdate>) {
        let (xc, var, update) = if train {
            let mean = x.mean_rows();
            let xc = x - mean;
            let var = xc.square().mean_rows();
            let upd = BnUpdate {
                mean_id: self.running_mean,
                var_id: self.running_var,
                mean: mean.value(),
                var: var.value(),
            };
            (xc, var, Some(upd))
        } else {
            (x - p.get(self.running_mean), p.get(self.running_var), None)
        };
        let y = xc * var.add_scalar(self.eps).rsqrt_safe() * p.get(self.gamma) + p.get(self.beta);
        (y, update)
    }

    /// Folds batch statistics into the running buffers, in the given order.
    pub fn apply_updates(store: &mut ParamStore, updates: &[BnUpdate], momentum: f64) {
        for u in updates {
            let m = store.value_mut(u.mean_id);
            *m = &*m * (1.0 - momentum) + &u.mean * momentum;
            let v = store.value_mut(u.var_id);
            *v = &*v * (1.0 - momentum) + &u.var * momentum;
        }
    }
}

/// Constant `n x c` input on a tape.
pub fn input<'t>(tape: &'t Tape, rows: &[[f64; 4]]) -> Tensor<'t> {
    tape.constant(Array2::from_shape_fn((rows.len(), 4), |(i, j)| rows[i][j]))
}
