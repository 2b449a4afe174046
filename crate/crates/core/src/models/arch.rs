use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use super::{Architecture, ModelConfig, ModelsError, Result, SubgraphSeq};
use crate::neural::{
    concat_cols, normalized_edge_coeffs, BatchNorm, Bound, BnUpdate, ChebConv, ChebGruCell,
    ChebLstmCell, EdgeWeightMlp, GruCell, InnerProductDecoder, Linear, MlpReadout, MpaLayer,
    ParamStore, StructuralAttention, Tape, TemporalAttention, Tensor,
};
use crate::rng::SeedStream;

/// Training draws VGRNN noise from the given stream; evaluation uses means
/// and running batch-norm statistics.
#[derive(Debug, Clone, Copy)]
pub enum Mode {
    Train { noise: SeedStream },
    Eval,
}

impl Mode {
    fn is_train(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

pub struct ForwardOut<'t> {
    /// Per step `t` (inputs up to month `t + 1`), `q x 2` predictions for the
    /// following month; `None` when that step has no queries.
    pub preds: Vec<Option<Tensor<'t>>>,
    /// Summed KL divergence (VGRNN only).
    pub kl: Option<Tensor<'t>>,
    /// Batch statistics to fold into running buffers (ROLAND training only).
    pub bn: Vec<BnUpdate>,
}

struct Gcrn {
    edge_mlp: EdgeWeightMlp,
    lstm: ChebLstmCell,
    decoder: InnerProductDecoder,
}

struct Vgrnn {
    edge_mlp: EdgeWeightMlp,
    phi_x: Linear,
    phi_z: Linear,
    prior: Linear,
    prior_mu: Linear,
    prior_sigma: Linear,
    enc: ChebConv,
    enc_mu: ChebConv,
    enc_sigma: ChebConv,
    gru: ChebGruCell,
    decoder: InnerProductDecoder,
}

struct Dysat {
    edge_mlp: EdgeWeightMlp,
    structural: StructuralAttention,
    temporal: TemporalAttention,
    decoder: InnerProductDecoder,
}

struct Block {
    mpa: MpaLayer,
    bn: BatchNorm,
    residual: bool,
}

struct Roland {
    pre: Vec<Block>,
    gru1: GruCell,
    mid1: Block,
    gru2: GruCell,
    mid2: Block,
    post: Vec<Block>,
    readout: MlpReadout,
}

enum Net {
    Gcrn(Gcrn),
    Vgrnn(Vgrnn),
    Dysat(Dysat),
    Roland(Roland),
}

/// An architecture with its parameters.
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    net: Net,
}

const SIGMA_FLOOR: f64 = 1e-4;

impl Model {
    /// Builds the network; parameters come from the `init` stream of the seed.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = SeedStream::new(config.rng_seed).named("init").rng();
        let h = config.hidden_dim;
        let k = config.chebyshev_k;
        let s = &mut store;
        let r = &mut rng;
        let net = match config.architecture {
            Architecture::Gcrn => Net::Gcrn(Gcrn {
                edge_mlp: EdgeWeightMlp::new(s, "edge_mlp", r, config.edge_mlp_hidden),
                lstm: ChebLstmCell::new(s, "lstm", r, k, 4, h),
                decoder: InnerProductDecoder::new(s, "decoder", r, h, h),
            }),
            Architecture::Vgrnn => Net::Vgrnn(Vgrnn {
                edge_mlp: EdgeWeightMlp::new(s, "edge_mlp", r, config.edge_mlp_hidden),
                phi_x: Linear::new(s, "phi_x", r, 4, h, true),
                phi_z: Linear::new(s, "phi_z", r, h, h, true),
                prior: Linear::new(s, "prior", r, h, h, true),
                prior_mu: Linear::new(s, "prior_mu", r, h, h, true),
                prior_sigma: Linear::new(s, "prior_sigma", r, h, h, true),
                enc: ChebConv::new(s, "enc", r, k, 2 * h, h),
                enc_mu: ChebConv::new(s, "enc_mu", r, k, h, h),
                enc_sigma: ChebConv::new(s, "enc_sigma", r, k, h, h),
                gru: ChebGruCell::new(s, "gru", r, k, 2 * h, h),
                decoder: InnerProductDecoder::new(s, "decoder", r, h, h),
            }),
            Architecture::Dysat => Net::Dysat(Dysat {
                edge_mlp: EdgeWeightMlp::new(s, "edge_mlp", r, config.edge_mlp_hidden),
                structural: StructuralAttention::new(s, "structural", r, 4, h),
                temporal: TemporalAttention::new(s, "temporal", r, h),
                decoder: InnerProductDecoder::new(s, "decoder", r, h, h),
            }),
            Architecture::Roland => {
                let agg = config.aggregation.into();
                let block = |s: &mut ParamStore, r: &mut _, name: &str, inp: usize| Block {
                    mpa: MpaLayer::new(s, &format!("{name}.mpa"), r, inp, 4, h, agg),
                    bn: BatchNorm::new(s, &format!("{name}.bn"), h),
                    residual: inp == h,
                };
                let pre = vec![block(s, r, "pre1", 4), block(s, r, "pre2", h)];
                let gru1 = GruCell::new(s, "gru1", r, h, h);
                let mid1 = block(s, r, "mid1", h);
                let gru2 = GruCell::new(s, "gru2", r, h, h);
                let mid2 = block(s, r, "mid2", h);
                let post = vec![block(s, r, "post1", h), block(s, r, "post2", h)];
                Net::Roland(Roland {
                    pre,
                    gru1,
                    mid1,
                    gru2,
                    mid2,
                    post,
                    readout: MlpReadout::new(s, "readout", r, h, config.readout_hidden),
                })
            }
        };
        Ok(Model {
            config: config.clone(),
            store,
            net,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    /// Runs months `1..=steps` of `seq`. `queries[t]` lists (source, destination)
    /// local pairs to predict for month `t + 2` from inputs up to month `t + 1`.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        seq: &SubgraphSeq,
        steps: usize,
        queries: &[Vec<(usize, usize)>],
        mode: Mode,
    ) -> Result<ForwardOut<'t>> {
        let n = seq.len();
        for &(s, d) in queries.iter().flatten() {
            if s >= n || d >= n {
                return Err(ModelsError::QueryOutOfSubgraph { src: s, dst: d, n });
            }
        }
        assert!(steps <= seq.graphs.len() && queries.len() == steps);
        let x = tape.constant(seq.x.clone());
        let h = self.config.hidden_dim;
        let zeros = || tape.constant(Array2::zeros((n, h)));
        let gather = |emb: Tensor<'t>, q: &[(usize, usize)]| {
            let src: Vec<usize> = q.iter().map(|e| e.0).collect();
            let dst: Vec<usize> = q.iter().map(|e| e.1).collect();
            (emb.gather_rows(&src), emb.gather_rows(&dst))
        };
        let mut preds = Vec::with_capacity(steps);
        let mut kl = None;
        let mut bn = Vec::new();
        match &self.net {
            Net::Gcrn(m) => {
                let (mut hs, mut cs) = (zeros(), zeros());
                for t in 0..steps {
                    let e = tape.constant(seq.edge_feats[t].clone());
                    let g = &seq.graphs[t];
                    let coeffs = normalized_edge_coeffs(g, m.edge_mlp.forward(p, e));
                    (hs, cs) = m.lstm.forward(p, g, coeffs, x, hs, cs);
                    preds.push((!queries[t].is_empty()).then(|| {
                        let (os, od) = gather(hs, &queries[t]);
                        m.decoder.forward(p, os, od)
                    }));
                }
            }
            Net::Vgrnn(m) => {
                let normal = |stream: SeedStream| {
                    let mut rng = stream.rng();
                    tape.constant(Array2::from_shape_fn((n, h), |_| StandardNormal.sample(&mut rng)))
                };
                let prior = |hprev: Tensor<'t>| {
                    let hp = m.prior.forward(p, hprev).relu();
                    (
                        m.prior_mu.forward(p, hp),
                        m.prior_sigma.forward(p, hp).softplus().add_scalar(SIGMA_FLOOR),
                    )
                };
                let px = m.phi_x.forward(p, x).relu();
                let mut hs = zeros();
                let mut kl_sum = tape.scalar(0.0);
                for t in 0..steps {
                    let e = tape.constant(seq.edge_feats[t].clone());
                    let g = &seq.graphs[t];
                    let coeffs = normalized_edge_coeffs(g, m.edge_mlp.forward(p, e));
                    let (mu_p, sigma_p) = prior(hs);
                    let enc = m.enc.forward(p, g, coeffs, concat_cols(&[px, hs])).relu();
                    let mu_q = m.enc_mu.forward(p, g, coeffs, enc);
                    let sigma_q = m.enc_sigma.forward(p, g, coeffs, enc).softplus().add_scalar(SIGMA_FLOOR);
                    kl_sum = kl_sum + super::gaussian_kl(mu_q, sigma_q, mu_p, sigma_p);
                    let z = match mode {
                        Mode::Train { noise } => mu_q + sigma_q * normal(noise.keyed(t as u64).named("posterior")),
                        Mode::Eval => mu_q,
                    };
                    let pz = m.phi_z.forward(p, z).relu();
                    hs = m.gru.forward(p, g, coeffs, concat_cols(&[px, pz]), hs);
                    preds.push(if queries[t].is_empty() {
                        None
                    } else {
                        // next month decodes from the prior, which only sees h_t
                        let (mu_n, sigma_n) = prior(hs);
                        let z_next = match mode {
                            Mode::Train { noise } => mu_n + sigma_n * normal(noise.keyed(t as u64).named("prior")),
                            Mode::Eval => mu_n,
                        };
                        let emb = m.phi_z.forward(p, z_next).relu();
                        let (os, od) = gather(emb, &queries[t]);
                        Some(m.decoder.forward(p, os, od))
                    });
                }
                kl = Some(kl_sum);
            }
            Net::Dysat(m) => {
                let structural: Vec<Tensor<'t>> = (0..steps)
                    .map(|t| {
                        let e = tape.constant(seq.edge_feats[t].clone());
                        let g = &seq.graphs[t];
                        let w = if g.edge_count() > 0 {
                            m.edge_mlp.forward(p, e)
                        } else {
                            tape.constant(Array2::zeros((0, 1)))
                        };
                        m.structural.forward(p, g, x, w)
                    })
                    .collect();
                let zs = if steps > 0 {
                    m.temporal.forward(p, &structural)
                } else {
                    Vec::new()
                };
                for (t, z) in zs.into_iter().enumerate() {
                    preds.push((!queries[t].is_empty()).then(|| {
                        let (os, od) = gather(z, &queries[t]);
                        m.decoder.forward(p, os, od)
                    }));
                }
            }
            Net::Roland(m) => {
                let train = mode.is_train();
                let (mut h1, mut h2) = (zeros(), zeros());
                for t in 0..steps {
                    let e = tape.constant(seq.edge_feats[t].clone());
                    let g = &seq.graphs[t];
                    let mut run = |b: &Block, v: Tensor<'t>| {
                        let (y, upd) = b.bn.forward(p, b.mpa.forward(p, g, v, e), train);
                        bn.extend(upd);
                        let y = y.relu();
                        if b.residual {
                            y + v
                        } else {
                            y
                        }
                    };
                    let mut v = x;
                    for b in &m.pre {
                        v = run(b, v);
                    }
                    h1 = m.gru1.forward(p, v, h1);
                    v = run(&m.mid1, h1);
                    h2 = m.gru2.forward(p, v, h2);
                    v = run(&m.mid2, h2);
                    for b in &m.post {
                        v = run(b, v);
                    }
                    preds.push((!queries[t].is_empty()).then(|| {
                        let (os, od) = gather(v, &queries[t]);
                        m.readout.forward(p, os, od)
                    }));
                }
            }
        }
        Ok(ForwardOut { preds, kl, bn })
    }
}
