use rand::Rng as _;

use super::*;
use crate::rng::rng_for;

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng_for(seed, "nn-test", 0);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-7 {
        // both vanish: compare absolutely
        if diff < 1e-8 {
            0.0
        } else {
            diff
        }
    } else {
        diff / scale
    }
}

/// Central differences of `f` over every coordinate of `inputs[which]`.
fn numeric_grad(inputs: &[Tensor], which: usize, f: &dyn Fn(&[Tensor]) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut t = inputs.to_vec();
    (0..t[which].len())
        .map(|i| {
            let orig = t[which].data[i];
            t[which].data[i] = orig + h;
            let up = f(&t);
            t[which].data[i] = orig - h;
            let down = f(&t);
            t[which].data[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Analytic gradients of `build` w.r.t. each input (all leaves require grad).
fn analytic(inputs: &[Tensor], build: &dyn Fn(&mut Graph, &[Var]) -> Var) -> (f64, Vec<Vec<f64>>) {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let loss = build(&mut g, &vars);
    g.backward(loss).unwrap();
    let grads = vars.iter().map(|&v| g.grad(v).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; g.value(v).len()])).collect();
    (g.value(loss).data[0], grads)
}

fn check_grads(inputs: &[Tensor], build: &dyn Fn(&mut Graph, &[Var]) -> Var) {
    let (_, grads) = analytic(inputs, build);
    let f = |t: &[Tensor]| analytic(t, build).0;
    for (i, g) in grads.iter().enumerate() {
        let n = numeric_grad(inputs, i, &f);
        let e = rel_err(g, &n);
        assert!(e < 1e-4, "input {i}: rel err {e}");
    }
}

fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Var {
    let r = g.leaf(rand_tensor(g.shape(y), seed), false);
    let p = g.mul(y, r).unwrap();
    g.sum(p)
}

fn conv_oracle(x: &Tensor, w: &Tensor, b: &[f64], s: usize, p: usize) -> Tensor {
    let (bn, ci, h, wd) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (co, k) = (w.shape[0], w.shape[2]);
    let ho = (h + 2 * p - k) / s + 1;
    let wo = (wd + 2 * p - k) / s + 1;
    let mut out = Tensor::zeros(&[bn, co, ho, wo]);
    for n in 0..bn {
        for o in 0..co {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b[o];
                    for c in 0..ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * s + ky) as isize - p as isize;
                                let ix = (ox * s + kx) as isize - p as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += w.data[((o * ci + c) * k + ky) * k + kx]
                                        * x.data[((n * ci + c) * h + iy as usize) * wd + ix as usize];
                                }
                            }
                        }
                    }
                    out.data[((n * co + o) * ho + oy) * wo + ox] = acc;
                }
            }
        }
    }
    out
}

fn run_conv(x: &Tensor, w: &Tensor, b: Option<&Tensor>, s: usize, p: usize) -> Tensor {
    let mut g = Graph::new();
    let xv = g.leaf(x.clone(), false);
    let wv = g.leaf(w.clone(), false);
    let bv = b.map(|b| g.leaf(b.clone(), false));
    let y = g.conv2d(xv, wv, bv, s, p).unwrap();
    g.value(y).clone()
}

#[test]
fn conv_identity_kernel() {
    let x = rand_tensor(&[1, 1, 5, 6], 1);
    let mut w = Tensor::zeros(&[1, 1, 3, 3]);
    w.data[4] = 1.0;
    let y = run_conv(&x, &w, None, 1, 1);
    assert_eq!(y, x);
}

#[test]
fn conv_ones_center_is_nine() {
    let x = Tensor::from_vec(&[1, 1, 5, 5], vec![1.0; 25]).unwrap();
    let w = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]).unwrap();
    let y = run_conv(&x, &w, None, 1, 0);
    assert_eq!(y.shape, vec![1, 1, 3, 3]);
    assert_eq!(y.data[4], 9.0);
}

#[test]
fn conv_matches_direct_loops() {
    for (i, (s, p, k)) in [(1, 1, 3), (2, 1, 3), (2, 0, 1), (1, 0, 3), (3, 2, 3)].into_iter().enumerate() {
        let x = rand_tensor(&[2, 3, 7, 9], 10 + i as u64);
        let w = rand_tensor(&[4, 3, k, k], 20 + i as u64);
        let b = rand_tensor(&[4], 30 + i as u64);
        let y = run_conv(&x, &w, Some(&b), s, p);
        let o = conv_oracle(&x, &w, &b.data, s, p);
        assert_eq!(y.shape, o.shape);
        assert_eq!(y.shape[2], (7 + 2 * p - k) / s + 1);
        for (a, b) in y.data.iter().zip(&o.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn conv_rejects_bad_shapes() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::zeros(&[1, 2, 4, 4]), false);
    let w = g.leaf(Tensor::zeros(&[1, 3, 3, 3]), false);
    assert!(matches!(g.conv2d(x, w, None, 1, 1), Err(NnError::ShapeMismatch(_))));
    let w = g.leaf(Tensor::zeros(&[1, 2, 7, 7]), false);
    assert!(g.conv2d(x, w, None, 1, 0).is_err());
}

#[test]
fn conv_gradients() {
    let inputs = [rand_tensor(&[2, 2, 6, 5], 1), rand_tensor(&[3, 2, 3, 3], 2), rand_tensor(&[3], 3)];
    for (s, p) in [(1, 1), (2, 1), (2, 0)] {
        check_grads(&inputs, &|g, v| {
            let y = g.conv2d(v[0], v[1], Some(v[2]), s, p).unwrap();
            weighted_sum(g, y, 9)
        });
    }
}

fn channel_moments(t: &Tensor) -> Vec<(f64, f64)> {
    let (b, c, hw) = (t.shape[0], t.shape[1], t.shape[2] * t.shape[3]);
    (0..c)
        .map(|ch| {
            let v: Vec<f64> = (0..b).flat_map(|n| t.data[(n * c + ch) * hw..(n * c + ch + 1) * hw].to_vec()).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64)
        })
        .collect()
}

fn bn_train(x: &Tensor, gamma: &[f64], beta: &[f64]) -> (Tensor, BatchStats) {
    let c = gamma.len();
    let mut g = Graph::new();
    let xv = g.leaf(x.clone(), false);
    let gv = g.leaf(Tensor::from_vec(&[c], gamma.to_vec()).unwrap(), false);
    let bv = g.leaf(Tensor::from_vec(&[c], beta.to_vec()).unwrap(), false);
    let (y, st) = g.batchnorm(xv, gv, bv, None).unwrap();
    (g.value(y).clone(), st.unwrap())
}

#[test]
fn batchnorm_normalises_per_channel() {
    let mut x = rand_tensor(&[4, 3, 5, 5], 4);
    x.data.iter_mut().enumerate().for_each(|(i, v)| *v = *v * 3.0 + (i % 7) as f64);
    let (y, _) = bn_train(&x, &[1.0; 3], &[0.0; 3]);
    for (m, v) in channel_moments(&y) {
        assert!(m.abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-4);
    }
    let (y, _) = bn_train(&y, &[2.0; 3], &[3.0; 3]);
    for (m, v) in channel_moments(&y) {
        assert!((m - 3.0).abs() < 1e-6);
        assert!((v.sqrt() - 2.0).abs() < 1e-4);
    }
}

#[test]
fn batchnorm_eval_formula() {
    let x = rand_tensor(&[2, 2, 3, 3], 5);
    let (rm, rv) = ([0.3, -0.2], [1.7, 0.4]);
    let (gm, bt) = ([1.5, -0.5], [0.1, 0.2]);
    let mut g = Graph::new();
    let xv = g.leaf(x.clone(), false);
    let gv = g.leaf(Tensor::from_vec(&[2], gm.to_vec()).unwrap(), false);
    let bv = g.leaf(Tensor::from_vec(&[2], bt.to_vec()).unwrap(), false);
    let (y, st) = g.batchnorm(xv, gv, bv, Some((&rm, &rv))).unwrap();
    assert!(st.is_none());
    for (i, (&a, &xi)) in g.value(y).data.iter().zip(&x.data).enumerate() {
        let c = (i / 9) % 2;
        let want = gm[c] * (xi - rm[c]) / (rv[c] + BN_EPS).sqrt() + bt[c];
        assert!((a - want).abs() < 1e-6);
    }
}

#[test]
fn batchnorm_constant_batch_is_finite() {
    let x = Tensor::from_vec(&[1, 1, 2, 2], vec![5.0; 4]).unwrap();
    let (y, st) = bn_train(&x, &[1.0], &[0.5]);
    assert!(y.data.iter().all(|&v| v == 0.5));
    assert_eq!(st.var, vec![0.0]);
}

#[test]
fn batchnorm_running_update() {
    let arch = ArchConfig::with_input(16, 16);
    let mut net = RecommenderNet::new(arch, 1).unwrap();
    let st = BatchStats { mean: vec![2.0], var: vec![3.0] };
    net.apply_stats(&[("bn1".to_string(), st)]);
    assert!((net.params.tensor("bn1.running_mean").unwrap().data[0] - 0.2).abs() < 1e-15);
    assert!((net.params.tensor("bn1.running_var").unwrap().data[0] - 1.2).abs() < 1e-15);
}

#[test]
fn batchnorm_gradients() {
    let inputs = [rand_tensor(&[3, 2, 3, 4], 6), rand_tensor(&[2], 7), rand_tensor(&[2], 8)];
    check_grads(&inputs, &|g, v| {
        let (y, _) = g.batchnorm(v[0], v[1], v[2], None).unwrap();
        weighted_sum(g, y, 3)
    });
    check_grads(&inputs, &|g, v| {
        let (y, _) = g.batchnorm(v[0], v[1], v[2], Some((&[0.1, 0.2], &[0.5, 2.0]))).unwrap();
        weighted_sum(g, y, 3)
    });
}

fn pool(x: &Tensor) -> Tensor {
    let mut g = Graph::new();
    let v = g.leaf(x.clone(), false);
    let y = g.maxpool2(v).unwrap();
    g.value(y).clone()
}

#[test]
fn maxpool_cases() {
    let y = pool(&Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    assert_eq!(y.data, vec![4.0]);
    let y = pool(&Tensor::from_vec(&[1, 1, 5, 7], vec![0.25; 35]).unwrap());
    assert_eq!(y.shape, vec![1, 1, 2, 3]);
    assert!(y.data.iter().all(|&v| v == 0.25));
    for (h, w) in [(8, 8), (7, 9)] {
        let x = rand_tensor(&[2, 2, h, w], 11);
        let y = pool(&x);
        for n in 0..2 {
            for c in 0..2 {
                for oy in 0..h / 2 {
                    for ox in 0..w / 2 {
                        let at = |dy: usize, dx: usize| x.data[((n * 2 + c) * h + 2 * oy + dy) * w + 2 * ox + dx];
                        let want = at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1));
                        assert_eq!(y.data[((n * 2 + c) * (h / 2) + oy) * (w / 2) + ox], want);
                    }
                }
            }
        }
    }
}

#[test]
fn simple_backward_rules() {
    let x = rand_tensor(&[2, 3], 12);
    let (_, g) = analytic(&[x.clone()], &|g, v| g.sum(v[0]));
    assert_eq!(g[0], vec![1.0; 6]);
    let (_, g) = analytic(&[x.clone()], &|g, v| {
        let sq = g.mul(v[0], v[0]).unwrap();
        g.sum(sq)
    });
    for (a, b) in g[0].iter().zip(&x.data) {
        assert!((a - 2.0 * b).abs() < 1e-15);
    }
}

#[test]
fn relu_pool_linear_reshape_gradients() {
    let inputs = [rand_tensor(&[2, 1, 4, 6], 13), rand_tensor(&[5, 6], 14), rand_tensor(&[5], 15)];
    check_grads(&inputs, &|g, v| {
        let y = g.relu(v[0]);
        let y = g.maxpool2(y).unwrap();
        let y = g.reshape(y, &[2, 6]).unwrap();
        let y = g.add(y, y).unwrap();
        let z = g.linear(y, v[1], Some(v[2])).unwrap();
        weighted_sum(g, z, 4)
    });
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Attention via explicit position-major matrices.
fn attention_oracle(x: &[f64], c: usize, p: usize, wq: &[f64], bq: &[f64], wk: &[f64], bk: &[f64], wv: &[f64], bv: &[f64]) -> Vec<f64> {
    let dq = bq.len();
    let proj = |w: &[f64], b: &[f64], rows: usize| -> Vec<Vec<f64>> {
        (0..p).map(|i| (0..rows).map(|r| b[r] + (0..c).map(|ch| w[r * c + ch] * x[ch * p + i]).sum::<f64>()).collect()).collect()
    };
    let (q, k, v) = (proj(wq, bq, dq), proj(wk, bk, dq), proj(wv, bv, c));
    let mut out = x.to_vec();
    for i in 0..p {
        let logits: Vec<f64> = (0..p).map(|j| (0..dq).map(|d| q[i][d] * k[j][d]).sum::<f64>() / (dq as f64).sqrt()).collect();
        let a = softmax(&logits);
        for ch in 0..c {
            out[ch * p + i] += (0..p).map(|j| a[j] * v[j][ch]).sum::<f64>();
        }
    }
    out
}

fn attention_store(c: usize, seed: u64) -> ParamStore {
    let mut s = ParamStore::default();
    add_attention(&mut s, "a", c, (c / 8).max(1), &mut rng_for(seed, "t", 0));
    s
}

fn run_attention(store: &ParamStore, x: &Tensor) -> (Tensor, Vec<f64>) {
    let mut g = Graph::new();
    let xv = g.leaf(x.clone(), false);
    let mut cx = Ctx::new(&mut g, store, false);
    let y = cx.self_attention("a", xv).unwrap();
    (g.value(y).clone(), g.attention_weights(y).unwrap().to_vec())
}

#[test]
fn attention_matches_dense_oracle() {
    let store = attention_store(2, 3);
    let x = rand_tensor(&[1, 2, 3, 3], 17);
    let (y, _) = run_attention(&store, &x);
    let t = |n: &str| store.tensor(n).unwrap().data.clone();
    let want = attention_oracle(&x.data, 2, 9, &t("a.q.weight"), &t("a.q.bias"), &t("a.k.weight"), &t("a.k.bias"), &t("a.v.weight"), &t("a.v.bias"));
    for (a, b) in y.data.iter().zip(&want) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn attention_rows_are_distributions() {
    let store = attention_store(3, 4);
    let x = rand_tensor(&[2, 3, 4, 5], 18);
    let (_, a) = run_attention(&store, &x);
    for row in a.chunks(20) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn attention_zero_query_is_uniform() {
    let mut store = attention_store(3, 5);
    for n in ["a.q.weight", "a.q.bias"] {
        store.get_mut(n).unwrap().tensor.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let x = rand_tensor(&[1, 3, 2, 4], 19);
    let (y, _) = run_attention(&store, &x);
    let wv = store.tensor("a.v.weight").unwrap().data.clone();
    let bv = store.tensor("a.v.bias").unwrap().data.clone();
    for ch in 0..3 {
        let vmean = (0..8).map(|j| bv[ch] + (0..3).map(|c| wv[ch * 3 + c] * x.data[c * 8 + j]).sum::<f64>()).sum::<f64>() / 8.0;
        for i in 0..8 {
            assert!((y.data[ch * 8 + i] - (vmean + x.data[ch * 8 + i])).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_gradients() {
    let inputs = [rand_tensor(&[2, 3, 3, 2], 20), rand_tensor(&[2, 3, 1, 1], 21), rand_tensor(&[2, 3, 1, 1], 22), rand_tensor(&[3, 3, 1, 1], 23)];
    check_grads(&inputs, &|g, v| {
        let q = g.conv2d(v[0], v[1], None, 1, 0).unwrap();
        let k = g.conv2d(v[0], v[2], None, 1, 0).unwrap();
        let vv = g.conv2d(v[0], v[3], None, 1, 0).unwrap();
        let y = g.attention(v[0], q, k, vv).unwrap();
        weighted_sum(g, y, 5)
    });
}

#[test]
fn bce_values() {
    assert!((bce_value(&[0.0], &[0.5]) - std::f64::consts::LN_2).abs() < 1e-12);
    let v = bce_value(&[20.0], &[1.0]);
    assert!((v - 2.0611536e-9).abs() < 1e-15, "{v}");
    let z = rand_tensor(&[40], 24).data.iter().map(|v| v * 8.0).collect::<Vec<_>>();
    let t = rand_tensor(&[40], 25).data.iter().map(|v| (v + 1.0) / 2.0).collect::<Vec<_>>();
    let naive = z
        .iter()
        .zip(&t)
        .map(|(&z, &t)| {
            let s = 1.0 / (1.0 + (-z).exp());
            -(t * s.ln() + (1.0 - t) * (1.0 - s).ln())
        })
        .sum::<f64>()
        / 40.0;
    assert!((bce_value(&z, &t) - naive).abs() < 1e-9);
    let mut g = Graph::new();
    let l = g.leaf(Tensor::zeros(&[2]), true);
    assert!(matches!(g.bce_with_logits(l, &[0.0, 1.5]), Err(NnError::InvalidTarget)));
    let inputs = [Tensor::from_vec(&[6], z[..6].to_vec()).unwrap()];
    check_grads(&inputs, &|g, v| g.bce_with_logits(v[0], &t[..6]).unwrap());
}

#[test]
fn residual_zero_path_is_identity() {
    let mut store = ParamStore::default();
    add_residual_block(&mut store, "r", 2, 2, 1, &mut rng_for(1, "t", 0));
    assert!(store.get("r.short.weight").is_none());
    for n in ["r.conv1.weight", "r.conv2.weight", "r.bn1.gamma", "r.bn2.gamma"] {
        store.get_mut(n).unwrap().tensor.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let x = rand_tensor(&[2, 2, 5, 5], 26);
    for training in [true, false] {
        let mut g = Graph::new();
        let xv = g.leaf(x.clone(), false);
        let mut cx = Ctx::new(&mut g, &store, training);
        let y = cx.residual_block("r", xv, 1).unwrap();
        assert_eq!(g.value(y), &x);
    }
}

#[test]
fn residual_projection_shape() {
    let mut store = ParamStore::default();
    add_residual_block(&mut store, "r", 1, 2, 2, &mut rng_for(2, "t", 0));
    let mut g = Graph::new();
    let xv = g.leaf(rand_tensor(&[1, 1, 8, 8], 27), false);
    let mut cx = Ctx::new(&mut g, &store, true);
    let y = cx.residual_block("r", xv, 2).unwrap();
    assert_eq!(g.shape(y), &[1, 2, 4, 4]);
}

/// Analytic vs numeric gradient for every trainable tensor in a store.
fn check_store_grads(store: &ParamStore, loss: &dyn Fn(&ParamStore) -> (Graph, Var, std::collections::BTreeMap<String, Var>)) {
    let (mut g, l, vars) = loss(store);
    g.backward(l).unwrap();
    for (name, p) in store.iter().filter(|(_, p)| p.trainable) {
        let a = vars.get(name).and_then(|&v| g.grad(v)).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; p.tensor.len()]);
        let h = 1e-5;
        let mut s = store.clone();
        let n: Vec<f64> = (0..p.tensor.len())
            .map(|i| {
                let orig = p.tensor.data[i];
                s.get_mut(name).unwrap().tensor.data[i] = orig + h;
                let (g1, l1, _) = loss(&s);
                s.get_mut(name).unwrap().tensor.data[i] = orig - h;
                let (g2, l2, _) = loss(&s);
                s.get_mut(name).unwrap().tensor.data[i] = orig;
                (g1.value(l1).data[0] - g2.value(l2).data[0]) / (2.0 * h)
            })
            .collect();
        let e = rel_err(&a, &n);
        assert!(e < 1e-4, "{name}: rel err {e}");
    }
}

#[test]
fn residual_block_gradients() {
    let mut store = ParamStore::default();
    add_residual_block(&mut store, "r", 1, 2, 2, &mut rng_for(3, "t", 0));
    let x = rand_tensor(&[2, 1, 6, 6], 28);
    check_store_grads(&store, &|s| {
        let mut g = Graph::new();
        let xv = g.leaf(x.clone(), false);
        let mut cx = Ctx::new(&mut g, s, true);
        let y = cx.residual_block("r", xv, 2).unwrap();
        let vars = cx.vars.clone();
        let l = weighted_sum(&mut g, y, 6);
        (g, l, vars)
    });
}

fn net_loss(net: &RecommenderNet, x: &Tensor, targets: &[f64]) -> impl Fn(&ParamStore) -> (Graph, Var, std::collections::BTreeMap<String, Var>) {
    let (arch, x, t) = (net.arch.clone(), x.clone(), targets.to_vec());
    move |s: &ParamStore| {
        let n = RecommenderNet { arch: arch.clone(), params: s.clone() };
        let mut g = Graph::new();
        let xv = g.leaf(x.clone(), false);
        let f = n.forward(&mut g, xv, true).unwrap();
        let l = g.bce_with_logits(f.logits, &t).unwrap();
        (g, l, f.vars)
    }
}

#[test]
fn full_network_gradients() {
    for seed in [1, 2, 3] {
        let net = RecommenderNet::new(ArchConfig::with_input(32, 16), seed).unwrap();
        let x = rand_tensor(&[2, 1, 32, 16], 100 + seed);
        let t: Vec<f64> = (0..20).map(|i| ((i * 7 + seed as usize) % 3 == 0) as u8 as f64).collect();
        check_store_grads(&net.params, &net_loss(&net, &x, &t));
    }
}

#[test]
fn ablation_gradients() {
    for a in [Ablation::NoCnn, Ablation::NoResnet, Ablation::NoAtn] {
        let net = RecommenderNet::new(ArchConfig::with_input(32, 16).ablated(a), 4).unwrap();
        let x = rand_tensor(&[2, 1, 32, 16], 7);
        let t: Vec<f64> = (0..20).map(|i| (i % 4 == 1) as u8 as f64).collect();
        check_store_grads(&net.params, &net_loss(&net, &x, &t));
    }
}

#[test]
fn default_shape_trace() {
    let net = RecommenderNet::new(ArchConfig::default(), 0).unwrap();
    let tr = net.shape_trace().unwrap();
    let want: Vec<(&str, Vec<usize>)> = vec![
        ("input", vec![1, 1, 256, 64]),
        ("stem", vec![1, 1, 128, 32]),
        ("res1", vec![1, 2, 64, 16]),
        ("res2", vec![1, 3, 32, 8]),
        ("attention", vec![1, 3, 32, 8]),
        ("flatten", vec![1, 768]),
        ("fc1", vec![1, 16]),
        ("logits", vec![1, 10]),
    ];
    let got: Vec<(&str, Vec<usize>)> = tr.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
    assert_eq!(got, want);
    for a in Ablation::ALL {
        let net = RecommenderNet::new(ArchConfig::default().ablated(a), 0).unwrap();
        let tr = net.shape_trace().unwrap();
        assert_eq!(tr[3].1, vec![1, 3, 32, 8], "{a:?}");
        assert_eq!(tr.last().unwrap().1, vec![1, 10]);
    }
    assert_eq!(ArchConfig::default().attention_dim(), 1);
}

#[test]
fn forward_rejects_wrong_input() {
    let net = RecommenderNet::new(ArchConfig::with_input(32, 16), 0).unwrap();
    assert!(matches!(net.logits(&[&[0.0; 100]], false), Err(NnError::ShapeMismatch(_))));
    let mut g = Graph::new();
    let x = g.leaf(Tensor::zeros(&[1, 1, 16, 32]), false);
    assert!(net.forward(&mut g, x, false).is_err());
}

#[test]
fn eval_forward_is_pure() {
    let net = RecommenderNet::new(ArchConfig::with_input(32, 16), 9).unwrap();
    let x = rand_tensor(&[1, 1, 32, 16], 29);
    let a = net.logits(&[&x.data, &x.data], false).unwrap();
    let b = net.logits(&[&x.data], false).unwrap();
    assert_eq!(a[0], a[1]);
    assert_eq!(a[0], b[0]);
}

#[test]
fn no_attention_matches_hand_built_network() {
    let full = RecommenderNet::new(ArchConfig::with_input(32, 16), 10).unwrap();
    let mut params = ParamStore::default();
    for (n, p) in full.params.iter().filter(|(n, _)| !n.starts_with("attn.")) {
        params.insert(n, p.tensor.clone(), p.trainable);
    }
    let net = RecommenderNet { arch: full.arch.clone().ablated(Ablation::NoAtn), params };
    let x = rand_tensor(&[3, 1, 32, 16], 30);
    for training in [false, true] {
        let mut g = Graph::new();
        let xv = g.leaf(x.clone(), false);
        let got = net.forward(&mut g, xv, training).unwrap();
        let got = g.value(got.logits).clone();

        let p = |g: &mut Graph, n: &str| g.leaf(full.params.tensor(n).unwrap().clone(), false);
        let mut g = Graph::new();
        let bn = |g: &mut Graph, y: Var, n: &str| {
            let (gm, bt) = (p(g, &format!("{n}.gamma")), p(g, &format!("{n}.beta")));
            let rm = full.params.tensor(&format!("{n}.running_mean")).unwrap().data.clone();
            let rv = full.params.tensor(&format!("{n}.running_var")).unwrap().data.clone();
            let running = (!training).then_some((rm.as_slice(), rv.as_slice()));
            g.batchnorm(y, gm, bt, running).unwrap().0
        };
        let conv = |g: &mut Graph, y: Var, n: &str, s: usize, pad: usize| {
            let w = p(g, &format!("{n}.weight"));
            g.conv2d(y, w, None, s, pad).unwrap()
        };
        let mut y = g.leaf(x.clone(), false);
        y = conv(&mut g, y, "conv1", 1, 1);
        y = bn(&mut g, y, "bn1");
        y = g.relu(y);
        y = g.maxpool2(y).unwrap();
        for r in ["res1", "res2"] {
            let mut f = conv(&mut g, y, &format!("{r}.conv1"), 2, 1);
            f = bn(&mut g, f, &format!("{r}.bn1"));
            f = g.relu(f);
            f = conv(&mut g, f, &format!("{r}.conv2"), 1, 1);
            f = bn(&mut g, f, &format!("{r}.bn2"));
            let mut s = conv(&mut g, y, &format!("{r}.short"), 2, 0);
            s = bn(&mut g, s, &format!("{r}.short_bn"));
            y = g.add(f, s).unwrap();
        }
        y = g.reshape(y, &[3, 24]).unwrap();
        let (w1, b1) = (p(&mut g, "fc1.weight"), p(&mut g, "fc1.bias"));
        y = g.linear(y, w1, Some(b1)).unwrap();
        y = g.relu(y);
        let (w2, b2) = (p(&mut g, "fc2.weight"), p(&mut g, "fc2.bias"));
        y = g.linear(y, w2, Some(b2)).unwrap();
        assert_eq!(g.value(y), &got);
    }
}

#[test]
fn prediction_rules() {
    let p = Prediction::from_logits(&[-50.0; 10]);
    assert!(p.binary.iter().all(|b| !b));
    assert_eq!(p.recommended, 0);
    let mut l = vec![-3.0; 10];
    l[0] = 3.0;
    let p = Prediction::from_logits(&l);
    assert_eq!(p.recommended, 0);
    assert_eq!(p.binary.iter().filter(|&&b| b).count(), 1);
    let mut l = vec![0.0; 10];
    l[4] = 1.0;
    l[7] = 1.0;
    assert_eq!(Prediction::from_logits(&l).recommended, 4);
    assert!(Prediction::from_logits(&[0.0]).binary[0]);
}

fn toy_samples(n: usize, seed: u64) -> Vec<Sample> {
    let mut r = rng_for(seed, "toy", 0);
    (0..n)
        .map(|i| {
            let class = i % 2;
            let input = (0..32 * 16).map(|j| r.gen_range(-0.5..0.5) + if (j / 16 < 16) == (class == 0) { 1.0 } else { 0.0 }).collect();
            let target = (0..10).map(|k| k % 2 == class || k == 9).collect();
            Sample { input, target }
        })
        .collect()
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let samples = toy_samples(12, 1);
    let refs: Vec<&Sample> = samples.iter().collect();
    let mut net = RecommenderNet::new(ArchConfig::with_input(32, 16), 2).unwrap();
    let before = net.clone();
    let cfg = TrainConfig { lr: 0.0, weight_decay: 0.0, epochs: 4, batch_size: 32, ..Default::default() };
    let mut curves = LearningCurves::default();
    fit(&mut net, &refs, &[], &cfg, 0, &mut curves).unwrap();
    for (n, p) in net.params.iter().filter(|(_, p)| p.trainable) {
        assert_eq!(p, before.params.get(n).unwrap());
    }
    let tr = curves.fold(0, Split::Train);
    assert_eq!(tr.len(), 4);
    for p in &tr {
        assert!((p.bce - tr[0].bce).abs() < 1e-12);
    }
}

#[test]
fn training_is_reproducible_and_learns() {
    let samples = toy_samples(40, 3);
    let cfg = TrainConfig { lr: 1e-2, epochs: 8, batch_size: 8, folds: 4, seed: 5, ..Default::default() };
    let arch = ArchConfig::with_input(32, 16);
    let (a, ca) = train(&arch, &samples, &cfg).unwrap();
    let (b, cb) = train(&arch, &samples, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ca, cb);
    assert_eq!(ca.fold(2, Split::Validation).len(), 8);
    let loss = ca.mean_by_epoch(Split::Train, |p| p.bce);
    assert!(loss.last().unwrap() < &loss[0], "{loss:?}");
}

#[test]
fn overfits_a_repeated_sample() {
    let one = toy_samples(1, 4).remove(0);
    let samples: Vec<Sample> = vec![one; 32];
    let refs: Vec<&Sample> = samples.iter().collect();
    let mut net = RecommenderNet::new(ArchConfig::with_input(32, 16), 6).unwrap();
    let cfg = TrainConfig { lr: 1e-2, weight_decay: 0.0, epochs: 30, ..Default::default() };
    let mut curves = LearningCurves::default();
    fit(&mut net, &refs, &[], &cfg, 0, &mut curves).unwrap();
    assert!(curves.points.iter().any(|p| p.f1 == 1.0));
}

#[test]
fn cross_validation_fills_out_of_fold_logits() {
    let samples = toy_samples(10, 6);
    let folds = fold_assignment(10, 3, 1).unwrap();
    assert_eq!(folds.iter().map(|f| f.len()).collect::<Vec<_>>(), vec![4, 3, 3]);
    let cfg = TrainConfig { epochs: 1, batch_size: 4, ..Default::default() };
    let out = cross_validate(&ArchConfig::with_input(32, 16), &samples, &folds, &cfg).unwrap();
    assert!(out.oof_logits.iter().all(|l| l.as_ref().is_some_and(|l| l.len() == 10)));
    assert_eq!(out.fold_models.len(), 3);
    assert!(fold_assignment(2, 3, 0).is_err());
    let bad = vec![vec![0, 1], vec![1, 2]];
    assert!(matches!(cross_validate(&ArchConfig::with_input(32, 16), &samples, &bad, &cfg), Err(NnError::InvalidFolds)));
}

#[test]
fn batches_drop_only_a_trailing_singleton() {
    let samples = toy_samples(9, 7);
    let refs: Vec<&Sample> = samples.iter().collect();
    let mut net = RecommenderNet::new(ArchConfig::with_input(32, 16), 1).unwrap();
    let cfg = TrainConfig { epochs: 1, batch_size: 4, ..Default::default() };
    let mut curves = LearningCurves::default();
    fit(&mut net, &refs, &[], &cfg, 0, &mut curves).unwrap();
    assert_eq!(curves.points.len(), 1);
    assert!(matches!(fit(&mut net, &refs[..1], &[], &cfg, 0, &mut curves), Err(NnError::EmptyRepository)));
}

#[test]
fn weights_roundtrip() {
    for a in Ablation::ALL {
        let net = RecommenderNet::new(ArchConfig::with_input(32, 16).ablated(a), 3).unwrap();
        let mut buf = Vec::new();
        write_weights(&net, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CRNW");
        let back = read_weights(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert!(read_weights(&buf[..buf.len() - 1]).is_err());
    }
    assert!(matches!(read_weights(&b"XXXX\x01\x00"[..]), Err(NnError::BadWeights(_))));
}

#[test]
fn curves_csv_header() {
    let c = LearningCurves { points: vec![CurvePoint { fold: 0, epoch: 0, split: Split::Validation, bce: 0.5, f1: 0.25, hamming: 0.125 }] };
    let mut out = Vec::new();
    c.write_csv(&mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "fold,epoch,split,bce,f1,hamming\n0,0,validation,0.5,0.25,0.125\n");
}

#[test]
fn ablation_names() {
    for a in Ablation::ALL {
        assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
    }
    assert!("no-fc".parse::<Ablation>().is_err());
}

#[test]
fn fast_exp_matches_std() {
    let mut r = rng_for(1, "exp", 0);
    for i in 0..20000 {
        let x = if i < 10000 { -r.gen_range(0.0..1.0) } else { -r.gen_range(0.0..700.0) };
        let (a, b) = (super::autograd::exp_nonpos(x), x.exp());
        assert!((a - b).abs() <= 1e-15 * b, "{x}: {a} vs {b}");
    }
    assert_eq!(super::autograd::exp_nonpos(0.0), 1.0);
    assert!(super::autograd::exp_nonpos(-800.0) < 1e-300);
}
