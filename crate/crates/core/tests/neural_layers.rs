use callnet_core::neural::gradcheck::gradcheck;
use callnet_core::neural::*;
use callnet_core::rng::{Rng, SeedStream};
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng as _;

const TOL: f64 = 1e-5;
const STEP: f64 = 1e-5;

fn rng(seed: u64) -> Rng {
    SeedStream::new(seed).rng()
}

fn rand_mat(rng: &mut Rng, r: usize, c: usize) -> Mat {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

/// Random symmetric directed edge list (both directions of each pair).
fn rand_edges(rng: &mut Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                e.push((i, j));
                e.push((j, i));
            }
        }
    }
    e.sort_unstable();
    e
}

/// Loss with random output weights so no gradient cancels by symmetry.
fn probe<'t>(out: Tensor<'t>, seed: u64) -> Tensor<'t> {
    let (r, c) = out.shape();
    let w = out.tape().constant(rand_mat(&mut rng(seed), r, c));
    (out * w).sum()
}

fn dense_adj(n: usize, edges: &[(usize, usize)], w: &[f64]) -> Mat {
    let mut a = Array2::zeros((n, n));
    for (&(s, d), &x) in edges.iter().zip(w) {
        a[[s, d]] = x;
    }
    a
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Mat) -> Vec<f64> {
    let n = a.nrows();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}

fn bfs(n: usize, edges: &[(usize, usize)], from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; n];
    dist[from] = 0;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &(s, d) in edges {
            if s == u && dist[d] == usize::MAX {
                dist[d] = dist[u] + 1;
                queue.push_back(d);
            }
        }
    }
    dist
}

// ---------- Laplacian and Chebyshev ----------

#[test]
fn laplacian_two_node_example() {
    let l = scaled_laplacian(&array![[0.0, 1.0], [1.0, 0.0]], 2.0).unwrap();
    assert_eq!(l, array![[0.0, -1.0], [-1.0, 0.0]]);
}

#[test]
fn laplacian_edgeless_graph_is_zero() {
    // isolated nodes: zero normalized adjacency, L = I, scaled 2I/2 - I = 0
    let l = scaled_laplacian(&Array2::zeros((3, 3)), 2.0).unwrap();
    assert_eq!(l, Array2::<f64>::zeros((3, 3)));
}

#[test]
fn laplacian_rejects_negative_weights() {
    assert!(matches!(
        scaled_laplacian(&array![[0.0, -1.0], [-1.0, 0.0]], 2.0),
        Err(NeuralError::NegativeWeight { row: 0, col: 1 })
    ));
}

#[test]
fn laplacian_spectrum_within_unit_interval() {
    let mut r = rng(1);
    for _ in 0..30 {
        let n = r.random_range(2..9);
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                if r.random::<f64>() < 0.5 {
                    let w = r.random_range(0.01..3.0);
                    a[[i, j]] = w;
                    a[[j, i]] = w;
                }
            }
        }
        for ev in jacobi_eigenvalues(scaled_laplacian(&a, 2.0).unwrap()) {
            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&ev), "{ev}");
        }
    }
}

#[test]
fn sparse_laplacian_matches_dense() {
    let mut r = rng(2);
    for _ in 0..20 {
        let n = r.random_range(2..10);
        let edges = rand_edges(&mut r, n, 0.4);
        let g = GraphCtx::new(n, &edges);
        let w: Vec<f64> = edges.iter().map(|_| r.random_range(0.05..1.0)).collect();
        let x = rand_mat(&mut r, n, 3);
        let tape = Tape::new();
        let wt = tape.constant(Array2::from_shape_vec((w.len(), 1), w.clone()).unwrap());
        let coeffs = normalized_edge_coeffs(&g, wt);
        let sparse = chebyshev_basis(&g, coeffs, tape.constant(x.clone()), 2, 2.0)[1].value();
        let mut a = dense_adj(n, &edges, &w);
        a = (&a + &a.t()) * 0.5;
        let dense = scaled_laplacian(&a, 2.0).unwrap().dot(&x);
        for (s, d) in sparse.iter().zip(dense.iter()) {
            assert!((s - d).abs() < 1e-12);
        }
    }
}

#[test]
fn chebyshev_k1_is_dense_map() {
    let mut store = ParamStore::new();
    let conv = ChebConv::new(&mut store, "c", &mut rng(3), 1, 3, 2);
    let g = GraphCtx::new(4, &[(0, 1), (1, 0)]);
    let x = rand_mat(&mut rng(4), 4, 3);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let coeffs = tape.constant(Array2::ones((2, 1)));
    let h = conv.forward(&p, &g, coeffs, tape.constant(x.clone())).value();
    assert_eq!(h, x.dot(&store.get(conv.thetas[0]).value) + &store.get(conv.bias).value);
}

#[test]
fn chebyshev_k2_two_node_term() {
    let g = GraphCtx::new(2, &[(0, 1), (1, 0)]);
    let tape = Tape::new();
    let coeffs = normalized_edge_coeffs(&g, tape.constant(array![[1.0], [1.0]]));
    let basis = chebyshev_basis(&g, coeffs, tape.constant(array![[1.0], [0.0]]), 2, 2.0);
    assert_eq!(basis[1].value(), array![[0.0], [-1.0]]);
}

fn locality_case(seed: u64, k: usize) {
    let mut r = rng(seed);
    let n = r.random_range(3..30);
    let edges = rand_edges(&mut r, n, 2.5 / n as f64);
    let g = GraphCtx::new(n, &edges);
    let mut store = ParamStore::new();
    let conv = ChebConv::new(&mut store, "c", &mut r, k, 3, 4);
    let w = rand_mat(&mut r, edges.len(), 1).mapv(|v| v.abs() + 0.1);
    let x = rand_mat(&mut r, n, 3);
    let u = r.random_range(0..n);
    let mut x2 = x.clone();
    for j in 0..3 {
        x2[[u, j]] += r.random_range(0.5..2.0);
    }
    let run = |x: &Mat| {
        let tape = Tape::new();
        let p = store.bind(&tape);
        let coeffs = normalized_edge_coeffs(&g, tape.constant(w.clone()));
        conv.forward(&p, &g, coeffs, tape.constant(x.clone())).value()
    };
    let (h1, h2) = (run(&x), run(&x2));
    let dist = bfs(n, &edges, u);
    for v in 0..n {
        if dist[v] > k - 1 {
            assert_eq!(h1.row(v), h2.row(v), "node {v} at distance {}", dist[v]);
        }
    }
}

#[test]
fn chebyshev_locality_random_graphs() {
    for seed in 0..50 {
        locality_case(100 + seed, 1 + (seed as usize % 4));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn chebyshev_locality_prop(seed in 0u64..1_000_000, k in 1usize..5) {
        locality_case(seed, k);
    }
}

#[test]
fn gradcheck_chebyshev_with_edge_mlp() {
    let mut r = rng(5);
    let n = 6;
    let edges = rand_edges(&mut r, n, 0.5);
    let g = GraphCtx::new(n, &edges);
    let mut store = ParamStore::new();
    let mlp = EdgeWeightMlp::new(&mut store, "ew", &mut r, 5);
    let conv = ChebConv::new(&mut store, "c", &mut r, 3, 3, 2);
    let x = store.add("x", rand_mat(&mut r, n, 3));
    let e = rand_mat(&mut r, edges.len(), 4);
    let rep = gradcheck(&mut store, STEP, |tape, p| {
        let w = mlp.forward(p, tape.constant(e.clone()));
        let coeffs = normalized_edge_coeffs(&g, w);
        probe(conv.forward(p, &g, coeffs, p.get(x)), 7)
    });
    assert!(rep.passes(TOL), "{rep:?}");
    // the edge MLP receives gradient through the convolution
    let tape = Tape::new();
    let p = store.bind(&tape);
    let w = mlp.forward(&p, tape.constant(e.clone()));
    let l = probe(conv.forward(&p, &g, normalized_edge_coeffs(&g, w), p.get(x)), 7);
    tape.backward(l).unwrap();
    assert!(p.get(mlp.l1.w).grad().unwrap().iter().any(|&v| v != 0.0));
}

// ---------- edge weight MLP ----------

#[test]
fn edge_mlp_range_and_zero_weights() {
    let mut store = ParamStore::new();
    let mlp = EdgeWeightMlp::new(&mut store, "ew", &mut rng(6), 8);
    let e = rand_mat(&mut rng(7), 20, 4) * 50.0;
    let tape = Tape::new();
    let p = store.bind(&tape);
    let w = mlp.forward(&p, tape.constant(e.clone())).value();
    assert!(w.iter().all(|&v| v > 0.0 && v < 1.0));
    for prm in store.iter_mut() {
        prm.value.fill(0.0);
    }
    let tape = Tape::new();
    let p = store.bind(&tape);
    assert!(mlp.forward(&p, tape.constant(e)).value().iter().all(|&v| v == 0.5));
}

// ---------- MPA ----------

#[test]
fn mpa_singleton_self_loop() {
    let mut store = ParamStore::new();
    let layer = MpaLayer::new(&mut store, "m", &mut rng(8), 3, 4, 2, Aggregation::Mean);
    let g = GraphCtx::new(1, &[]);
    let x = array![[0.3, -0.2, 0.9]];
    let tape = Tape::new();
    let p = store.bind(&tape);
    let h = layer
        .forward(&p, &g, tape.constant(x.clone()), tape.constant(Array2::zeros((0, 4))))
        .value();
    let v = |id| store.get(id).value.clone();
    let expected = x.dot(&v(layer.w_src)) + x.dot(&v(layer.w_dst)) + v(layer.b);
    assert_eq!(h, expected);
}

#[test]
fn mpa_mean_of_identical_messages() {
    let mut store = ParamStore::new();
    let layer = MpaLayer::new(&mut store, "m", &mut rng(9), 2, 4, 3, Aggregation::Mean);
    // star into node 0 from identical leaves; node 0 has the same features
    let edges = [(1, 0), (2, 0), (3, 0)];
    let g = GraphCtx::new(4, &edges);
    let x = Array2::from_elem((4, 2), 0.7);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let h = layer
        .forward(&p, &g, tape.constant(x.clone()), tape.constant(Array2::zeros((3, 4))))
        .value();
    let single = layer
        .forward(&p, &GraphCtx::new(1, &[]), tape.constant(x.slice(ndarray::s![..1, ..]).to_owned()), tape.constant(Array2::zeros((0, 4))))
        .value();
    for (a, b) in h.row(0).iter().zip(single.row(0)) {
        assert!((a - b).abs() < 1e-14);
    }
}

fn mpa_eval(layer: &MpaLayer, store: &ParamStore, n: usize, edges: &[(usize, usize)], x: &Mat, e: &Mat) -> Mat {
    let tape = Tape::new();
    let p = store.bind(&tape);
    layer
        .forward(&p, &GraphCtx::new(n, edges), tape.constant(x.clone()), tape.constant(e.clone()))
        .value()
}

#[test]
fn mpa_neighbor_permutation_and_relabeling() {
    for agg in [Aggregation::Mean, Aggregation::Max] {
        let mut r = rng(10);
        let mut store = ParamStore::new();
        let layer = MpaLayer::new(&mut store, "m", &mut r, 3, 4, 5, agg);
        let n = 7;
        let edges = rand_edges(&mut r, n, 0.5);
        let x = rand_mat(&mut r, n, 3);
        let e = rand_mat(&mut r, edges.len(), 4);
        let h = mpa_eval(&layer, &store, n, &edges, &x, &e);

        // reversed edge order
        let rev_edges: Vec<_> = edges.iter().rev().copied().collect();
        let rev_e = Array2::from_shape_fn(e.dim(), |(i, j)| e[[edges.len() - 1 - i, j]]);
        let h_rev = mpa_eval(&layer, &store, n, &rev_edges, &x, &rev_e);
        for (a, b) in h.iter().zip(h_rev.iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        // relabel nodes by a permutation
        let perm: Vec<usize> = (0..n).map(|i| (i * 3 + 2) % n).collect();
        let p_edges: Vec<_> = edges.iter().map(|&(s, d)| (perm[s], perm[d])).collect();
        let mut px = Array2::zeros(x.dim());
        for i in 0..n {
            px.row_mut(perm[i]).assign(&x.row(i));
        }
        let h_perm = mpa_eval(&layer, &store, n, &p_edges, &px, &e);
        for i in 0..n {
            for (a, b) in h.row(i).iter().zip(h_perm.row(perm[i])) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn gradcheck_mpa() {
    for agg in [Aggregation::Mean, Aggregation::Max] {
        let mut r = rng(11);
        let n = 6;
        let edges = rand_edges(&mut r, n, 0.5);
        let g = GraphCtx::new(n, &edges);
        let mut store = ParamStore::new();
        let layer = MpaLayer::new(&mut store, "m", &mut r, 3, 4, 3, agg);
        let x = store.add("x", rand_mat(&mut r, n, 3));
        let e = store.add("e", rand_mat(&mut r, edges.len(), 4));
        let rep = gradcheck(&mut store, STEP, |_, p| probe(layer.forward(p, &g, p.get(x), p.get(e)), 12));
        assert!(rep.passes(TOL), "{agg:?} {rep:?}");
    }
}

// ---------- recurrent cells ----------

#[test]
fn lstm_zero_fixed_point() {
    let mut store = ParamStore::new();
    let cell = ChebLstmCell::new(&mut store, "l", &mut rng(12), 3, 2, 4);
    for prm in store.iter_mut() {
        if prm.name.ends_with(".b") {
            prm.value.fill(0.0);
        }
    }
    let g = GraphCtx::new(3, &[(0, 1), (1, 0)]);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let coeffs = normalized_edge_coeffs(&g, tape.constant(Array2::ones((2, 1))));
    let z = |r, c| tape.constant(Array2::zeros((r, c)));
    let (h, c) = cell.forward(&p, &g, coeffs, z(3, 2), z(3, 4), z(3, 4));
    assert!(c.value().iter().all(|&v| v == 0.0));
    assert!(h.value().iter().all(|&v| v == 0.0));
}

#[test]
fn lstm_forget_bias_starts_at_one() {
    let mut store = ParamStore::new();
    let cell = ChebLstmCell::new(&mut store, "l", &mut rng(13), 2, 3, 4);
    let b = &store.get(cell.conv.bias).value;
    assert!(b.slice(ndarray::s![.., 4..8]).iter().all(|&v| v == 1.0));
    assert!(b.slice(ndarray::s![.., ..4]).iter().all(|&v| v == 0.0));
}

#[test]
fn gru_update_gate_one_keeps_carry() {
    let mut store = ParamStore::new();
    let cell = GruCell::new(&mut store, "g", &mut rng(14), 3, 4);
    // saturate the update gate through its bias
    store
        .value_mut(cell.wx.b.unwrap())
        .slice_mut(ndarray::s![.., ..4])
        .fill(1e3);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let h = rand_mat(&mut rng(15), 5, 4);
    let out = cell
        .forward(&p, tape.constant(rand_mat(&mut rng(16), 5, 3)), tape.constant(h.clone()))
        .value();
    assert_eq!(out, h);

    let mut store = ParamStore::new();
    let cell = ChebGruCell::new(&mut store, "cg", &mut rng(17), 2, 3, 4);
    store
        .value_mut(cell.gates.bias)
        .slice_mut(ndarray::s![.., ..4])
        .fill(1e3);
    let g = GraphCtx::new(5, &[(0, 1), (1, 0), (3, 4), (4, 3)]);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let coeffs = normalized_edge_coeffs(&g, tape.constant(Array2::ones((4, 1))));
    let out = cell
        .forward(&p, &g, coeffs, tape.constant(rand_mat(&mut rng(18), 5, 3)), tape.constant(h.clone()))
        .value();
    assert_eq!(out, h);
}

#[test]
fn gradcheck_recurrent_cells_three_steps() {
    let mut r = rng(19);
    let n = 5;
    let graphs: Vec<GraphCtx> = (0..3).map(|_| GraphCtx::new(n, &rand_edges(&mut r, n, 0.5))).collect();
    let mut store = ParamStore::new();
    let lstm = ChebLstmCell::new(&mut store, "lstm", &mut r, 3, 2, 3);
    let cgru = ChebGruCell::new(&mut store, "cgru", &mut r, 2, 2, 3);
    let gru = GruCell::new(&mut store, "gru", &mut r, 2, 3);
    let xs: Vec<ParamId> = (0..3).map(|t| store.add(&format!("x{t}"), rand_mat(&mut r, n, 2))).collect();
    let rep = gradcheck(&mut store, STEP, |tape, p| {
        let zero = tape.constant(Array2::zeros((n, 3)));
        let (mut h, mut c, mut hg, mut hd) = (zero, zero, zero, zero);
        for (t, g) in graphs.iter().enumerate() {
            let coeffs = normalized_edge_coeffs(g, tape.constant(Array2::from_elem((g.edge_count(), 1), 0.7)));
            (h, c) = lstm.forward(p, g, coeffs, p.get(xs[t]), h, c);
            hg = cgru.forward(p, g, coeffs, p.get(xs[t]), hg);
            hd = gru.forward(p, p.get(xs[t]), hd);
        }
        probe(h, 20) + probe(hg, 21) + probe(hd, 22) + probe(c, 23)
    });
    assert!(rep.passes(TOL), "{rep:?}");
}

// ---------- temporal attention ----------

fn attention_setup(seed: u64, n: usize, t: usize, d: usize) -> (ParamStore, TemporalAttention, Vec<Mat>) {
    let mut r = rng(seed);
    let mut store = ParamStore::new();
    let att = TemporalAttention::new(&mut store, "a", &mut r, d);
    let hs = (0..t).map(|_| rand_mat(&mut r, n, d)).collect();
    (store, att, hs)
}

#[test]
fn attention_first_step_is_value() {
    let (store, att, hs) = attention_setup(20, 4, 3, 5);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let inputs: Vec<_> = hs.iter().map(|h| tape.constant(h.clone())).collect();
    let z = att.forward(&p, &inputs);
    assert_eq!(z[0].value(), hs[0].dot(&store.get(att.wv).value));
}

#[test]
fn attention_weights_normalized_and_recency_ordered() {
    let (mut store, att, _) = attention_setup(21, 3, 1, 4);
    // zero query/key maps make all scores equal before the recency bias
    store.value_mut(att.wq).fill(0.0);
    let mut r = rng(22);
    let h = rand_mat(&mut r, 3, 4);
    let tape = Tape::new();
    let p = store.bind(&tape);
    let inputs: Vec<_> = (0..6).map(|_| tape.constant(h.clone())).collect();
    for (t, (_, w)) in att.forward_with_weights(&p, &inputs).into_iter().enumerate() {
        let w = w.value();
        for row in w.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            for tau in 1..=t {
                assert!(row[tau] > row[tau - 1], "t {t}: {row:?}");
            }
        }
    }
    assert_eq!(att.slope, 2f64.powi(-8));
}

#[test]
fn attention_is_causal() {
    let (store, att, hs) = attention_setup(23, 5, 6, 4);
    let mut r = rng(24);
    let run = |hs: &[Mat]| {
        let tape = Tape::new();
        let p = store.bind(&tape);
        let inputs: Vec<_> = hs.iter().map(|h| tape.constant(h.clone())).collect();
        att.forward(&p, &inputs).iter().map(|z| z.value()).collect::<Vec<_>>()
    };
    let base = run(&hs);
    for t in 0..hs.len() - 1 {
        let mut changed = hs.clone();
        for later in changed.iter_mut().skip(t + 1) {
            *later = rand_mat(&mut r, 5, 4) * 10.0;
        }
        let out = run(&changed);
        for s in 0..=t {
            assert_eq!(out[s], base[s], "step {s} changed by inputs after {t}");
        }
    }
}

#[test]
fn gradcheck_attention_layers() {
    let mut r = rng(25);
    let n = 5;
    let graphs: Vec<(GraphCtx, Mat)> = (0..3)
        .map(|_| {
            let e = rand_edges(&mut r, n, 0.5);
            let w = rand_mat(&mut r, e.len(), 1).mapv(|v| v.abs() + 0.1);
            (GraphCtx::new(n, &e), w)
        })
        .collect();
    let mut store = ParamStore::new();
    let sa = StructuralAttention::new(&mut store, "sa", &mut r, 3, 4);
    let ta = TemporalAttention::new(&mut store, "ta", &mut r, 4);
    let x = store.add("x", rand_mat(&mut r, n, 3));
    let rep = gradcheck(&mut store, STEP, |tape, p| {
        let hs: Vec<_> = graphs
            .iter()
            .map(|(g, w)| sa.forward(p, g, p.get(x), tape.constant(w.clone())))
            .collect();
        let zs = ta.forward(p, &hs);
        zs.iter().enumerate().fold(tape.scalar(0.0), |acc, (i, z)| acc + probe(*z, 30 + i as u64))
    });
    assert!(rep.passes(TOL), "{rep:?}");
}

// ---------- decoders ----------

#[test]
fn inner_product_decoder_properties() {
    let mut r = rng(26);
    let mut store = ParamStore::new();
    let dec = InnerProductDecoder::new(&mut store, "d", &mut r, 4, 3);
    let os = rand_mat(&mut r, 6, 4);
    let od = rand_mat(&mut r, 6, 4);
    let run = |store: &ParamStore, a: &Mat, b: &Mat| {
        let tape = Tape::new();
        let p = store.bind(&tape);
        dec.forward(&p, tape.constant(a.clone()), tape.constant(b.clone())).value()
    };
    assert!(run(&store, &Array2::zeros((6, 4)), &od).iter().all(|&v| v == 0.0));
    let fwd = run(&store, &os, &od);
    let bwd = run(&store, &od, &os);
    assert!(fwd.iter().zip(bwd.iter()).all(|(a, b)| (a - b).abs() > 1e-12));

    let mut sym = store.clone();
    for id in [dec.s_c, dec.d_c, dec.s_m, dec.d_m] {
        *sym.value_mut(id) = Array2::eye(4);
    }
    let sym_store = {
        let mut s = ParamStore::new();
        let d2 = InnerProductDecoder::new(&mut s, "d", &mut rng(0), 4, 4);
        for id in [d2.s_c, d2.d_c, d2.s_m, d2.d_m] {
            *s.value_mut(id) = Array2::eye(4);
        }
        s
    };
    assert_eq!(run(&sym_store, &os, &od), run(&sym_store, &od, &os));
}

#[test]
fn mlp_readout_properties() {
    let mut r = rng(27);
    let mut store = ParamStore::new();
    let mlp = MlpReadout::new(&mut store, "m", &mut r, 3, 5);
    let os = rand_mat(&mut r, 4, 3);
    let od = rand_mat(&mut r, 4, 3);
    let run = |store: &ParamStore, a: &Mat, b: &Mat| {
        let tape = Tape::new();
        let p = store.bind(&tape);
        mlp.forward(&p, tape.constant(a.clone()), tape.constant(b.clone())).value()
    };
    assert_ne!(run(&store, &os, &od), run(&store, &od, &os));
    let mut zero = store.clone();
    for prm in zero.iter_mut() {
        if prm.name.ends_with(".w") {
            prm.value.fill(0.0);
        }
    }
    *zero.value_mut(mlp.l2.b.unwrap()) = array![[0.25, -1.5]];
    let out = run(&zero, &os, &od);
    assert!(out.rows().into_iter().all(|row| row.to_vec() == vec![0.25, -1.5]));
}

#[test]
fn gradcheck_decoders() {
    let mut r = rng(28);
    let mut store = ParamStore::new();
    let ip = InnerProductDecoder::new(&mut store, "ip", &mut r, 4, 3);
    let mlp = MlpReadout::new(&mut store, "mlp", &mut r, 4, 6);
    let os = store.add("os", rand_mat(&mut r, 5, 4));
    let od = store.add("od", rand_mat(&mut r, 5, 4));
    let rep = gradcheck(&mut store, STEP, |_, p| {
        probe(ip.forward(p, p.get(os), p.get(od)), 40) + probe(mlp.forward(p, p.get(os), p.get(od)), 41)
    });
    assert!(rep.passes(TOL), "{rep:?}");
    // both inputs of the readout get gradient
    let tape = Tape::new();
    let p = store.bind(&tape);
    tape.backward(probe(mlp.forward(&p, p.get(os), p.get(od)), 41)).unwrap();
    for id in [os, od] {
        assert!(p.get(id).grad().unwrap().iter().any(|&v| v != 0.0));
    }
}

#[test]
fn gradcheck_batch_norm_training_mode() {
    let mut r = rng(29);
    let mut store = ParamStore::new();
    let bn = BatchNorm::new(&mut store, "bn", 3);
    let x = store.add("x", rand_mat(&mut r, 6, 3));
    let rep = gradcheck(&mut store, STEP, |_, p| probe(bn.forward(p, p.get(x), true).0, 50));
    assert!(rep.passes(TOL), "{rep:?}");
}

#[test]
fn gradcheck_elementwise_ops() {
    let mut r = rng(30);
    let mut store = ParamStore::new();
    let a = store.add("a", rand_mat(&mut r, 3, 4));
    let b = store.add("b", rand_mat(&mut r, 1, 4).mapv(|v| v.abs() + 0.5));
    let c = store.add("c", rand_mat(&mut r, 3, 1));
    let rep = gradcheck(&mut store, STEP, |tape, p| {
        let (a, b, c) = (p.get(a), p.get(b), p.get(c));
        let y = (a / b).tanh() + (a * c).sigmoid() - b.ln() + a.exp().scale(0.1) + (a - c).softplus();
        let z = concat_cols(&[y, a.elu(1.0), a.leaky_relu(0.1)]).softmax_rows();
        let s = a.segment_softmax(&[0, 1, 0]) + b.square().rsqrt_safe();
        probe(z, 60) + probe(s, 61) + probe(a.t().matmul(c).sum_rows(), 62) + tape.scalar(0.0)
    });
    assert!(rep.passes(TOL), "{rep:?}");
}
