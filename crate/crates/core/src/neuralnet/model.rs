//! The recommender network and its parameter store.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::autograd::{BatchStats, Graph, Tensor, Var};
use super::NnError;
use crate::rng::rng_for;

pub const BN_MOMENTUM: f64 = 0.1;

/// Which block an ablation removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Full,
    NoCnn,
    NoResnet,
    NoAtn,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::NoCnn, Ablation::NoResnet, Ablation::NoAtn];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoCnn => "no-cnn",
            Ablation::NoResnet => "no-resnet",
            Ablation::NoAtn => "no-atn",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = NnError;
    fn from_str(s: &str) -> Result<Self, NnError> {
        Ablation::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| NnError::UnknownAblation(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// (channels, height, width)
    pub in_shape: (usize, usize, usize),
    pub conv1_channels: usize,
    pub res1_channels: usize,
    pub res2_channels: usize,
    pub qk_reduction: usize,
    pub fc1_width: usize,
    pub n_classes: usize,
    pub use_cnn: bool,
    pub use_resnet: bool,
    pub use_attention: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            in_shape: (1, 256, 64),
            conv1_channels: 1,
            res1_channels: 2,
            res2_channels: 3,
            qk_reduction: 8,
            fc1_width: 16,
            n_classes: 10,
            use_cnn: true,
            use_resnet: true,
            use_attention: true,
        }
    }
}

impl ArchConfig {
    pub fn with_input(h: usize, w: usize) -> Self {
        ArchConfig { in_shape: (1, h, w), ..Default::default() }
    }

    pub fn ablated(mut self, a: Ablation) -> Self {
        self.use_cnn = a != Ablation::NoCnn;
        self.use_resnet = a != Ablation::NoResnet;
        self.use_attention = a != Ablation::NoAtn;
        self
    }

    pub fn attention_dim(&self) -> usize {
        (self.res2_channels / self.qk_reduction).max(1)
    }

    /// Spatial size after every stride-2 stage: (after stem, after res1, after res2).
    fn spatial(&self) -> [(usize, usize); 3] {
        let (_, h, w) = self.in_shape;
        let half_up = |v: usize| v.div_ceil(2);
        let s0 = if self.use_cnn { (h / 2, w / 2) } else { (half_up(h), half_up(w)) };
        let s1 = (half_up(s0.0), half_up(s0.1));
        let s2 = (half_up(s1.0), half_up(s1.1));
        [s0, s1, s2]
    }

    pub fn flatten_len(&self) -> usize {
        let (h, w) = self.spatial()[2];
        self.res2_channels * h * w
    }

    fn validate(&self) -> Result<(), NnError> {
        let (c, h, w) = self.in_shape;
        if c != 1 || h < 8 || w < 8 {
            return Err(NnError::ShapeMismatch(format!("unsupported input shape {:?}", self.in_shape)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Named tensors, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    map: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn insert(&mut self, name: &str, tensor: Tensor, trainable: bool) {
        self.map.insert(name.to_string(), Param { tensor, trainable });
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.map.get_mut(name)
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, NnError> {
        self.map.get(name).map(|p| &p.tensor).ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn n_trainable(&self) -> usize {
        self.map.values().filter(|p| p.trainable).map(|p| p.tensor.len()).sum()
    }
}

/// Graph-building context for one forward pass.
pub struct Ctx<'a> {
    pub g: &'a mut Graph,
    store: &'a ParamStore,
    pub vars: BTreeMap<String, Var>,
    training: bool,
    pub stats: Vec<(String, BatchStats)>,
    pub trace: Vec<(String, Vec<usize>)>,
}

impl<'a> Ctx<'a> {
    pub fn new(g: &'a mut Graph, store: &'a ParamStore, training: bool) -> Self {
        Ctx { g, store, vars: BTreeMap::new(), training, stats: Vec::new(), trace: Vec::new() }
    }

    pub fn param(&mut self, name: &str) -> Result<Var, NnError> {
        if let Some(v) = self.vars.get(name) {
            return Ok(*v);
        }
        let p = self.store.get(name).ok_or_else(|| NnError::MissingParam(name.to_string()))?;
        let v = self.g.leaf(p.tensor.clone(), p.trainable);
        self.vars.insert(name.to_string(), v);
        Ok(v)
    }

    fn opt_param(&mut self, name: &str) -> Result<Option<Var>, NnError> {
        if self.store.get(name).is_some() {
            self.param(name).map(Some)
        } else {
            Ok(None)
        }
    }

    fn mark(&mut self, label: &str, v: Var) {
        self.trace.push((label.to_string(), self.g.shape(v).to_vec()));
    }

    pub fn conv(&mut self, prefix: &str, x: Var, stride: usize, pad: usize) -> Result<Var, NnError> {
        let w = self.param(&format!("{prefix}.weight"))?;
        let b = self.opt_param(&format!("{prefix}.bias"))?;
        self.g.conv2d(x, w, b, stride, pad)
    }

    pub fn bn(&mut self, prefix: &str, x: Var) -> Result<Var, NnError> {
        let gamma = self.param(&format!("{prefix}.gamma"))?;
        let beta = self.param(&format!("{prefix}.beta"))?;
        if self.training {
            let (y, stats) = self.g.batchnorm(x, gamma, beta, None)?;
            self.stats.push((prefix.to_string(), stats.expect("training stats")));
            Ok(y)
        } else {
            let rm = &self.store.tensor(&format!("{prefix}.running_mean"))?.data;
            let rv = &self.store.tensor(&format!("{prefix}.running_var"))?.data;
            Ok(self.g.batchnorm(x, gamma, beta, Some((rm, rv)))?.0)
        }
    }

    /// F(x) + shortcut(x) with F = conv3×3(stride) → BN → ReLU → conv3×3 → BN.
    pub fn residual_block(&mut self, prefix: &str, x: Var, stride: usize) -> Result<Var, NnError> {
        let f = self.conv(&format!("{prefix}.conv1"), x, stride, 1)?;
        let f = self.bn(&format!("{prefix}.bn1"), f)?;
        let f = self.g.relu(f);
        let f = self.conv(&format!("{prefix}.conv2"), f, 1, 1)?;
        let f = self.bn(&format!("{prefix}.bn2"), f)?;
        let short = if self.store.get(&format!("{prefix}.short.weight")).is_some() {
            let s = self.conv(&format!("{prefix}.short"), x, stride, 0)?;
            self.bn(&format!("{prefix}.short_bn"), s)?
        } else {
            x
        };
        self.g.add(f, short)
    }

    pub fn self_attention(&mut self, prefix: &str, x: Var) -> Result<Var, NnError> {
        let q = self.conv(&format!("{prefix}.q"), x, 1, 0)?;
        let k = self.conv(&format!("{prefix}.k"), x, 1, 0)?;
        let v = self.conv(&format!("{prefix}.v"), x, 1, 0)?;
        self.g.attention(x, q, k, v)
    }
}

fn uniform(shape: &[usize], bound: f64, rng: &mut crate::rng::Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor { shape: shape.to_vec(), data: (0..n).map(|_| rng.gen_range(-bound..=bound)).collect() }
}

fn add_conv(store: &mut ParamStore, name: &str, co: usize, ci: usize, k: usize, bias: bool, rng: &mut crate::rng::Rng) {
    let bound = 1.0 / ((ci * k * k) as f64).sqrt();
    store.insert(&format!("{name}.weight"), uniform(&[co, ci, k, k], bound, rng), true);
    if bias {
        store.insert(&format!("{name}.bias"), uniform(&[co], bound, rng), true);
    }
}

fn add_bn(store: &mut ParamStore, name: &str, c: usize) {
    store.insert(&format!("{name}.gamma"), Tensor { shape: vec![c], data: vec![1.0; c] }, true);
    store.insert(&format!("{name}.beta"), Tensor::zeros(&[c]), true);
    store.insert(&format!("{name}.running_mean"), Tensor::zeros(&[c]), false);
    store.insert(&format!("{name}.running_var"), Tensor { shape: vec![c], data: vec![1.0; c] }, false);
}

/// Parameters of a residual block; the projection shortcut is created only
/// when the block changes shape.
pub fn add_residual_block(store: &mut ParamStore, name: &str, ci: usize, co: usize, stride: usize, rng: &mut crate::rng::Rng) {
    add_conv(store, &format!("{name}.conv1"), co, ci, 3, false, rng);
    add_bn(store, &format!("{name}.bn1"), co);
    add_conv(store, &format!("{name}.conv2"), co, co, 3, false, rng);
    add_bn(store, &format!("{name}.bn2"), co);
    if ci != co || stride != 1 {
        add_conv(store, &format!("{name}.short"), co, ci, 1, false, rng);
        add_bn(store, &format!("{name}.short_bn"), co);
    }
}

pub fn add_attention(store: &mut ParamStore, name: &str, c: usize, dq: usize, rng: &mut crate::rng::Rng) {
    add_conv(store, &format!("{name}.q"), dq, c, 1, true, rng);
    add_conv(store, &format!("{name}.k"), dq, c, 1, true, rng);
    add_conv(store, &format!("{name}.v"), c, c, 1, true, rng);
}

fn add_linear(store: &mut ParamStore, name: &str, o: usize, i: usize, rng: &mut crate::rng::Rng) {
    let bound = 1.0 / (i as f64).sqrt();
    store.insert(&format!("{name}.weight"), uniform(&[o, i], bound, rng), true);
    store.insert(&format!("{name}.bias"), uniform(&[o], bound, rng), true);
}

/// Output of [`RecommenderNet::forward`].
pub struct Forward {
    pub logits: Var,
    pub vars: BTreeMap<String, Var>,
    pub stats: Vec<(String, BatchStats)>,
    pub trace: Vec<(String, Vec<usize>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecommenderNet {
    pub arch: ArchConfig,
    pub params: ParamStore,
}

impl RecommenderNet {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self, NnError> {
        arch.validate()?;
        let mut rng = rng_for(seed, "nn-init", 0);
        let mut p = ParamStore::default();
        let (c0, c1, c2) = (arch.conv1_channels, arch.res1_channels, arch.res2_channels);
        if arch.use_cnn {
            add_conv(&mut p, "conv1", c0, arch.in_shape.0, 3, false, &mut rng);
            add_bn(&mut p, "bn1", c0);
        } else {
            add_conv(&mut p, "stem", c0, arch.in_shape.0, 1, true, &mut rng);
        }
        if arch.use_resnet {
            add_residual_block(&mut p, "res1", c0, c1, 2, &mut rng);
            add_residual_block(&mut p, "res2", c1, c2, 2, &mut rng);
        } else {
            add_conv(&mut p, "res1.proj", c1, c0, 1, true, &mut rng);
            add_conv(&mut p, "res2.proj", c2, c1, 1, true, &mut rng);
        }
        if arch.use_attention {
            add_attention(&mut p, "attn", c2, arch.attention_dim(), &mut rng);
        }
        add_linear(&mut p, "fc1", arch.fc1_width, arch.flatten_len(), &mut rng);
        add_linear(&mut p, "fc2", arch.n_classes, arch.fc1_width, &mut rng);
        Ok(RecommenderNet { arch, params: p })
    }

    /// Build the graph for a batch `x` of shape [B,1,H,W].
    pub fn forward(&self, g: &mut Graph, x: Var, training: bool) -> Result<Forward, NnError> {
        let (c, h, w) = self.arch.in_shape;
        let s = g.shape(x);
        if s.len() != 4 || s[1..] != [c, h, w] {
            return Err(NnError::ShapeMismatch(format!("input {:?}, expected [B,{c},{h},{w}]", s)));
        }
        let bn = s[0];
        let mut cx = Ctx::new(g, &self.params, training);
        cx.mark("input", x);
        let mut y = if self.arch.use_cnn {
            let y = cx.conv("conv1", x, 1, 1)?;
            let y = cx.bn("bn1", y)?;
            let y = cx.g.relu(y);
            cx.g.maxpool2(y)?
        } else {
            cx.conv("stem", x, 2, 0)?
        };
        cx.mark("stem", y);
        for name in ["res1", "res2"] {
            y = if self.arch.use_resnet { cx.residual_block(name, y, 2)? } else { cx.conv(&format!("{name}.proj"), y, 2, 0)? };
            cx.mark(name, y);
        }
        if self.arch.use_attention {
            y = cx.self_attention("attn", y)?;
        }
        cx.mark("attention", y);
        let flat = cx.g.shape(y)[1..].iter().product::<usize>();
        let y = cx.g.reshape(y, &[bn, flat])?;
        cx.mark("flatten", y);
        let (w1, b1) = (cx.param("fc1.weight")?, cx.param("fc1.bias")?);
        let y = cx.g.linear(y, w1, Some(b1))?;
        let y = cx.g.relu(y);
        cx.mark("fc1", y);
        let (w2, b2) = (cx.param("fc2.weight")?, cx.param("fc2.bias")?);
        let logits = cx.g.linear(y, w2, Some(b2))?;
        cx.mark("logits", logits);
        Ok(Forward { logits, vars: cx.vars, stats: cx.stats, trace: cx.trace })
    }

    /// Fold batch statistics into the running averages.
    pub fn apply_stats(&mut self, stats: &[(String, BatchStats)]) {
        for (prefix, st) in stats {
            for (suffix, src) in [("running_mean", &st.mean), ("running_var", &st.var)] {
                if let Some(p) = self.params.get_mut(&format!("{prefix}.{suffix}")) {
                    for (r, s) in p.tensor.data.iter_mut().zip(src) {
                        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * s;
                    }
                }
            }
        }
    }

    /// Logits for a batch of flattened H×W inputs.
    pub fn logits(&self, inputs: &[&[f64]], training: bool) -> Result<Vec<Vec<f64>>, NnError> {
        let mut g = Graph::new();
        let x = g.leaf(self.batch_tensor(inputs)?, false);
        let f = self.forward(&mut g, x, training)?;
        let k = self.arch.n_classes;
        Ok(g.value(f.logits).data.chunks(k).map(|c| c.to_vec()).collect())
    }

    pub fn batch_tensor(&self, inputs: &[&[f64]]) -> Result<Tensor, NnError> {
        let (c, h, w) = self.arch.in_shape;
        let mut data = Vec::with_capacity(inputs.len() * h * w);
        for x in inputs {
            if x.len() != c * h * w {
                return Err(NnError::ShapeMismatch(format!("input of {} values, expected {}", x.len(), c * h * w)));
            }
            data.extend_from_slice(x);
        }
        Tensor::from_vec(&[inputs.len(), c, h, w], data)
    }

    /// Layer-by-layer output shapes for a single input.
    pub fn shape_trace(&self) -> Result<Vec<(String, Vec<usize>)>, NnError> {
        let (c, h, w) = self.arch.in_shape;
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[1, c, h, w]), false);
        Ok(self.forward(&mut g, x, false)?.trace)
    }
}
