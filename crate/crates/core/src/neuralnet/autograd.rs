//! Reverse-mode differentiation over a tape of tensor operations.
//!
//! Every node's parents have smaller indices than the node itself, so a
//! single sweep from the loss back to index 0 visits nodes in reverse
//! topological order.

use super::NnError;

pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NnError::ShapeMismatch(format!("{} values for shape {shape:?}", data.len())));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn dims4(&self) -> Result<(usize, usize, usize, usize), NnError> {
        match self.shape[..] {
            [b, c, h, w] => Ok((b, c, h, w)),
            _ => Err(NnError::ShapeMismatch(format!("expected [B,C,H,W], got {:?}", self.shape))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize },
    BatchNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64>, training: bool },
    Relu { x: Var },
    MaxPool { x: Var, arg: Vec<usize> },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Attention { x: Var, q: Var, k: Var, v: Var, attn: Vec<f64>, scale: f64 },
    Reshape { x: Var },
    Linear { x: Var, w: Var, b: Option<Var> },
    Bce { logits: Var, targets: Vec<f64> },
    Sum { x: Var },
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, b, .. } | Op::Linear { x, w, b } => {
                let mut v = vec![*x, *w];
                v.extend(b.iter().copied());
                v
            }
            Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::Relu { x } | Op::MaxPool { x, .. } | Op::Reshape { x } | Op::Sum { x } => vec![*x],
            Op::Add { a, b } | Op::Mul { a, b } => vec![*a, *b],
            Op::Attention { x, q, k, v, .. } => vec![*x, *q, *k, *v],
            Op::Bce { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Batch statistics from a training-mode batch norm: mean and unbiased
/// variance per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

fn out_range(size_in: usize, size_out: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    // output positions o with 0 <= o*stride + k - pad < size_in
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi_excl = if size_in + pad > k { ((size_in - 1 + pad - k) / stride + 1).min(size_out) } else { 0 };
    (lo, hi_excl.max(lo))
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let parents = op.parents();
        let id = self.nodes.len();
        assert!(parents.iter().all(|p| p.0 < id), "tape order violated");
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node { value, grad: Vec::new(), op, requires_grad });
        Var(id)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        let id = self.nodes.len();
        self.nodes.push(Node { value, grad: Vec::new(), op: Op::Leaf, requires_grad });
        Var(id)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    /// Gradient accumulated by the last [`Graph::backward`], if any reached `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        let g = &self.nodes[v.0].grad;
        (!g.is_empty()).then_some(g.as_slice())
    }

    /// Cross-correlation of `x` [B,Ci,H,W] with `w` [Co,Ci,k,k].
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var, NnError> {
        let (bn, ci, h, wd) = self.value(x).dims4()?;
        let (co, wci, kh, kw) = self.value(w).dims4()?;
        if wci != ci || stride == 0 || h + 2 * pad < kh || wd + 2 * pad < kw {
            return Err(NnError::ShapeMismatch(format!(
                "conv {:?} with kernel {:?}",
                self.shape(x),
                self.shape(w)
            )));
        }
        if let Some(b) = b {
            if self.value(b).len() != co {
                return Err(NnError::ShapeMismatch("conv bias length".into()));
            }
        }
        let ho = (h + 2 * pad - kh) / stride + 1;
        let wo = (wd + 2 * pad - kw) / stride + 1;
        let mut out = vec![0.0; bn * co * ho * wo];
        {
            let xv = &self.value(x).data;
            let wv = &self.value(w).data;
            for bi in 0..bn {
                for o in 0..co {
                    let ob = &mut out[(bi * co + o) * ho * wo..(bi * co + o + 1) * ho * wo];
                    if let Some(b) = b {
                        let bias = self.nodes[b.0].value.data[o];
                        ob.iter_mut().for_each(|v| *v = bias);
                    }
                    for c in 0..ci {
                        let xb = &xv[(bi * ci + c) * h * wd..(bi * ci + c + 1) * h * wd];
                        for ky in 0..kh {
                            let (oy0, oy1) = out_range(h, ho, ky, stride, pad);
                            for kx in 0..kw {
                                let wgt = wv[((o * ci + c) * kh + ky) * kw + kx];
                                if wgt == 0.0 {
                                    continue;
                                }
                                let (ox0, ox1) = out_range(wd, wo, kx, stride, pad);
                                if ox1 <= ox0 {
                                    continue;
                                }
                                for oy in oy0..oy1 {
                                    let iy = oy * stride + ky - pad;
                                    let orow = &mut ob[oy * wo + ox0..oy * wo + ox1];
                                    let start = iy * wd + ox0 * stride + kx - pad;
                                    if stride == 1 {
                                        let span = orow.len();
                                        for (o, xv) in orow.iter_mut().zip(&xb[start..start + span]) {
                                            *o += wgt * xv;
                                        }
                                    } else {
                                        for (t, o) in orow.iter_mut().enumerate() {
                                            *o += wgt * xb[start + t * stride];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(self.push(Tensor { shape: vec![bn, co, ho, wo], data: out }, Op::Conv2d { x, w, b, stride, pad }))
    }

    /// Per-channel normalisation over batch and space. `running` holds the
    /// (mean, variance) used in evaluation mode; `None` means training mode,
    /// which also returns the batch statistics.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: Option<(&[f64], &[f64])>,
    ) -> Result<(Var, Option<BatchStats>), NnError> {
        let (bn, c, h, w) = self.value(x).dims4()?;
        if self.value(gamma).len() != c || self.value(beta).len() != c {
            return Err(NnError::ShapeMismatch("batch norm affine length".into()));
        }
        let hw = h * w;
        let m = (bn * hw) as f64;
        let xv = &self.value(x).data;
        let (mean, var_b, stats) = match running {
            Some((rm, rv)) => (rm.to_vec(), rv.to_vec(), None),
            None => {
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for ch in 0..c {
                    let mut s = 0.0;
                    for bi in 0..bn {
                        s += xv[(bi * c + ch) * hw..(bi * c + ch + 1) * hw].iter().sum::<f64>();
                    }
                    mean[ch] = s / m;
                    let mut q = 0.0;
                    for bi in 0..bn {
                        q += xv[(bi * c + ch) * hw..(bi * c + ch + 1) * hw].iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
                    }
                    var[ch] = q / m;
                }
                let unbiased = var.iter().map(|v| v * m / (m - 1.0).max(1.0)).collect();
                (mean.clone(), var, Some(BatchStats { mean, var: unbiased }))
            }
        };
        let inv_std: Vec<f64> = var_b.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let g = &self.value(gamma).data;
        let be = &self.value(beta).data;
        let mut xhat = vec![0.0; xv.len()];
        let mut out = vec![0.0; xv.len()];
        for bi in 0..bn {
            for ch in 0..c {
                for i in (bi * c + ch) * hw..(bi * c + ch + 1) * hw {
                    xhat[i] = (xv[i] - mean[ch]) * inv_std[ch];
                    out[i] = g[ch] * xhat[i] + be[ch];
                }
            }
        }
        let shape = self.shape(x).to_vec();
        let training = running.is_none();
        let v = self.push(Tensor { shape, data: out }, Op::BatchNorm { x, gamma, beta, xhat, inv_std, training });
        Ok((v, stats))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data.iter().map(|&v| v.max(0.0)).collect();
        let shape = t.shape.clone();
        self.push(Tensor { shape, data }, Op::Relu { x })
    }

    /// 2×2 max pooling with stride 2; odd trailing rows/columns dropped.
    pub fn maxpool2(&mut self, x: Var) -> Result<Var, NnError> {
        let (bn, c, h, w) = self.value(x).dims4()?;
        let (ho, wo) = (h / 2, w / 2);
        let xv = &self.value(x).data;
        let mut out = Vec::with_capacity(bn * c * ho * wo);
        let mut arg = Vec::with_capacity(bn * c * ho * wo);
        for plane in 0..bn * c {
            let base = plane * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if xv[i] > xv[best] {
                            best = i;
                        }
                    }
                    out.push(xv[best]);
                    arg.push(best);
                }
            }
        }
        Ok(self.push(Tensor { shape: vec![bn, c, ho, wo], data: out }, Op::MaxPool { x, arg }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::ShapeMismatch(format!("add {:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(p, q)| p + q).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::ShapeMismatch(format!("mul {:?} * {:?}", self.shape(a), self.shape(b))));
        }
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(p, q)| p * q).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Mul { a, b }))
    }

    /// softmax(QᵀK·scale)·V + X over flattened positions. `q`, `k` are
    /// [B,d,H,W], `v` and `x` are [B,C,H,W].
    pub fn attention(&mut self, x: Var, q: Var, k: Var, v: Var) -> Result<Var, NnError> {
        let (bn, c, h, w) = self.value(x).dims4()?;
        let (qb, dq, qh, qw) = self.value(q).dims4()?;
        if self.shape(k) != self.shape(q) || self.shape(v) != self.shape(x) || (qb, qh, qw) != (bn, h, w) {
            return Err(NnError::ShapeMismatch("attention operand shapes".into()));
        }
        let p = h * w;
        let scale = 1.0 / (dq as f64).sqrt();
        let (xv, qv, kv, vv) = (&self.value(x).data, &self.value(q).data, &self.value(k).data, &self.value(v).data);
        let mut attn = vec![0.0; bn * p * p];
        let mut out = xv.clone();
        for bi in 0..bn {
            let qb = &qv[bi * dq * p..(bi + 1) * dq * p];
            let kb = &kv[bi * dq * p..(bi + 1) * dq * p];
            let vb = &vv[bi * c * p..(bi + 1) * c * p];
            let ab = &mut attn[bi * p * p..(bi + 1) * p * p];
            for i in 0..p {
                let row = &mut ab[i * p..(i + 1) * p];
                for d in 0..dq {
                    let qi = qb[d * p + i] * scale;
                    let kd = &kb[d * p..(d + 1) * p];
                    for j in 0..p {
                        row[j] += qi * kd[j];
                    }
                }
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                row.iter_mut().for_each(|r| *r = exp_nonpos(*r - mx));
                let inv = 1.0 / row.iter().sum::<f64>();
                row.iter_mut().for_each(|r| *r *= inv);
            }
            let ob = &mut out[bi * c * p..(bi + 1) * c * p];
            for ch in 0..c {
                let vrow = &vb[ch * p..(ch + 1) * p];
                for i in 0..p {
                    let arow = &ab[i * p..(i + 1) * p];
                    ob[ch * p + i] += dot(arow, vrow);
                }
            }
        }
        let shape = self.shape(x).to_vec();
        Ok(self.push(Tensor { shape, data: out }, Op::Attention { x, q, k, v, attn, scale }))
    }

    /// Attention weights of the most recent call that produced `node`.
    pub fn attention_weights(&self, node: Var) -> Option<&[f64]> {
        match &self.nodes[node.0].op {
            Op::Attention { attn, .. } => Some(attn),
            _ => None,
        }
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NnError> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(NnError::ShapeMismatch(format!("reshape {:?} to {shape:?}", self.shape(x))));
        }
        let data = self.value(x).data.clone();
        Ok(self.push(Tensor { shape: shape.to_vec(), data }, Op::Reshape { x }))
    }

    /// `x` [B,F] times `w`ᵀ with `w` [O,F], plus bias [O].
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, NnError> {
        let (bn, f) = match self.shape(x) {
            [bn, f] => (*bn, *f),
            s => return Err(NnError::ShapeMismatch(format!("linear input {s:?}"))),
        };
        let (o, wf) = match self.shape(w) {
            [o, wf] => (*o, *wf),
            s => return Err(NnError::ShapeMismatch(format!("linear weight {s:?}"))),
        };
        if wf != f {
            return Err(NnError::ShapeMismatch(format!("linear {f} inputs vs weight width {wf}")));
        }
        let xv = &self.value(x).data;
        let wv = &self.value(w).data;
        let bv = b.map(|b| self.nodes[b.0].value.data.clone());
        let mut out = vec![0.0; bn * o];
        for i in 0..bn {
            let xr = &xv[i * f..(i + 1) * f];
            for j in 0..o {
                let wr = &wv[j * f..(j + 1) * f];
                out[i * o + j] = xr.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>() + bv.as_ref().map_or(0.0, |b| b[j]);
            }
        }
        Ok(self.push(Tensor { shape: vec![bn, o], data: out }, Op::Linear { x, w, b }))
    }

    /// Mean binary cross-entropy on logits.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var, NnError> {
        if self.value(logits).len() != targets.len() {
            return Err(NnError::ShapeMismatch("targets and logits differ in size".into()));
        }
        if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(NnError::InvalidTarget);
        }
        let loss = bce_value(&self.value(logits).data, targets);
        Ok(self.push(Tensor::scalar(loss), Op::Bce { logits, targets: targets.to_vec() }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { x })
    }

    /// Accumulate d`loss`/d(node) into every node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<(), NnError> {
        if self.value(loss).len() != 1 {
            return Err(NnError::ShapeMismatch("backward needs a scalar".into()));
        }
        for n in &mut self.nodes {
            n.grad.clear();
        }
        self.nodes[loss.0].grad = vec![1.0];
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad || self.nodes[i].grad.is_empty() {
                continue;
            }
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            let gout = std::mem::take(&mut self.nodes[i].grad);
            for p in op.parents() {
                assert!(p.0 < i, "cycle in tape");
            }
            self.backprop(i, &op, &gout);
            self.nodes[i].op = op;
            self.nodes[i].grad = gout;
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, contrib: Vec<f64>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        if node.grad.is_empty() {
            node.grad = contrib;
        } else {
            node.grad.iter_mut().zip(contrib).for_each(|(a, b)| *a += b);
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backprop(&mut self, i: usize, op: &Op, g: &[f64]) {
        match op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, stride, pad } => {
                let (s, pd) = (*stride, *pad);
                let (bn, ci, h, wd) = self.value(*x).dims4().unwrap();
                let (co, _, kh, kw) = self.value(*w).dims4().unwrap();
                let (_, _, ho, wo) = self.nodes[i].value.dims4().unwrap();
                let need_x = self.wants(*x);
                let need_w = self.wants(*w);
                let xv = &self.value(*x).data;
                let wv = &self.value(*w).data;
                let mut dx = if need_x { vec![0.0; xv.len()] } else { Vec::new() };
                let mut dw = if need_w { vec![0.0; wv.len()] } else { Vec::new() };
                for bi in 0..bn {
                    for o in 0..co {
                        let gb = &g[(bi * co + o) * ho * wo..(bi * co + o + 1) * ho * wo];
                        for c in 0..ci {
                            let xoff = (bi * ci + c) * h * wd;
                            for ky in 0..kh {
                                let (oy0, oy1) = out_range(h, ho, ky, s, pd);
                                for kx in 0..kw {
                                    let (ox0, ox1) = out_range(wd, wo, kx, s, pd);
                                    let widx = ((o * ci + c) * kh + ky) * kw + kx;
                                    let wgt = wv[widx];
                                    let mut acc = 0.0;
                                    if ox1 > ox0 {
                                        let span = ox1 - ox0;
                                        for oy in oy0..oy1 {
                                            let iy = oy * s + ky - pd;
                                            let grow = &gb[oy * wo + ox0..oy * wo + ox1];
                                            let start = xoff + iy * wd + ox0 * s + kx - pd;
                                            if s == 1 {
                                                if need_w {
                                                    acc += dot(grow, &xv[start..start + span]);
                                                }
                                                if need_x {
                                                    for (d, gv) in dx[start..start + span].iter_mut().zip(grow) {
                                                        *d += gv * wgt;
                                                    }
                                                }
                                            } else {
                                                if need_w {
                                                    acc += grow.iter().enumerate().map(|(t, gv)| gv * xv[start + t * s]).sum::<f64>();
                                                }
                                                if need_x {
                                                    for (t, gv) in grow.iter().enumerate() {
                                                        dx[start + t * s] += gv * wgt;
                                                    }
                                                }
                                            }
                                        }
                                    }
                                    if need_w {
                                        dw[widx] += acc;
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(b) = b {
                    let mut db = vec![0.0; co];
                    for bi in 0..bn {
                        for (o, d) in db.iter_mut().enumerate() {
                            *d += g[(bi * co + o) * ho * wo..(bi * co + o + 1) * ho * wo].iter().sum::<f64>();
                        }
                    }
                    self.accumulate(*b, db);
                }
                if need_x {
                    self.accumulate(*x, dx);
                }
                if need_w {
                    self.accumulate(*w, dw);
                }
            }
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, training } => {
                let (bn, c, h, w) = self.value(*x).dims4().unwrap();
                let hw = h * w;
                let m = (bn * hw) as f64;
                let gam = self.value(*gamma).data.clone();
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for bi in 0..bn {
                    for ch in 0..c {
                        for j in (bi * c + ch) * hw..(bi * c + ch + 1) * hw {
                            dgamma[ch] += g[j] * xhat[j];
                            dbeta[ch] += g[j];
                        }
                    }
                }
                if self.wants(*x) {
                    let mut dx = vec![0.0; g.len()];
                    for bi in 0..bn {
                        for ch in 0..c {
                            for j in (bi * c + ch) * hw..(bi * c + ch + 1) * hw {
                                dx[j] = if *training {
                                    gam[ch] * inv_std[ch] * (g[j] - dbeta[ch] / m - xhat[j] * dgamma[ch] / m)
                                } else {
                                    gam[ch] * inv_std[ch] * g[j]
                                };
                            }
                        }
                    }
                    self.accumulate(*x, dx);
                }
                self.accumulate(*gamma, dgamma);
                self.accumulate(*beta, dbeta);
            }
            Op::Relu { x } => {
                let dx = self.value(*x).data.iter().zip(g).map(|(&v, &d)| if v > 0.0 { d } else { 0.0 }).collect();
                self.accumulate(*x, dx);
            }
            Op::MaxPool { x, arg } => {
                let mut dx = vec![0.0; self.value(*x).len()];
                for (&a, &d) in arg.iter().zip(g) {
                    dx[a] += d;
                }
                self.accumulate(*x, dx);
            }
            Op::Add { a, b } => {
                self.accumulate(*a, g.to_vec());
                self.accumulate(*b, g.to_vec());
            }
            Op::Mul { a, b } => {
                let da = self.value(*b).data.iter().zip(g).map(|(v, d)| v * d).collect();
                let db = self.value(*a).data.iter().zip(g).map(|(v, d)| v * d).collect();
                self.accumulate(*a, da);
                self.accumulate(*b, db);
            }
            Op::Attention { x, q, k, v, attn, scale } => {
                let (bn, c, h, w) = self.value(*x).dims4().unwrap();
                let dq = self.shape(*q)[1];
                let p = h * w;
                let (qv, kv, vv) = (&self.value(*q).data, &self.value(*k).data, &self.value(*v).data);
                let mut dqv = vec![0.0; qv.len()];
                let mut dkv = vec![0.0; kv.len()];
                let mut dvv = vec![0.0; vv.len()];
                let mut da = vec![0.0; p * p];
                for bi in 0..bn {
                    let ab = &attn[bi * p * p..(bi + 1) * p * p];
                    let gb = &g[bi * c * p..(bi + 1) * c * p];
                    let vb = &vv[bi * c * p..(bi + 1) * c * p];
                    da.iter_mut().for_each(|v| *v = 0.0);
                    for ch in 0..c {
                        let grow = &gb[ch * p..(ch + 1) * p];
                        let vrow = &vb[ch * p..(ch + 1) * p];
                        let dvrow = &mut dvv[(bi * c + ch) * p..(bi * c + ch + 1) * p];
                        for i in 0..p {
                            let gi = grow[i];
                            let arow = &ab[i * p..(i + 1) * p];
                            let darow = &mut da[i * p..(i + 1) * p];
                            for j in 0..p {
                                dvrow[j] += arow[j] * gi;
                                darow[j] += gi * vrow[j];
                            }
                        }
                    }
                    // softmax backward, then scale into the logits
                    for i in 0..p {
                        let arow = &ab[i * p..(i + 1) * p];
                        let darow = &mut da[i * p..(i + 1) * p];
                        let ad = dot(arow, darow);
                        for j in 0..p {
                            darow[j] = arow[j] * (darow[j] - ad) * scale;
                        }
                    }
                    let qb = &qv[bi * dq * p..(bi + 1) * dq * p];
                    let kb = &kv[bi * dq * p..(bi + 1) * dq * p];
                    for d in 0..dq {
                        for i in 0..p {
                            let srow = &da[i * p..(i + 1) * p];
                            let krow = &kb[d * p..(d + 1) * p];
                            dqv[(bi * dq + d) * p + i] += dot(srow, krow);
                            let qi = qb[d * p + i];
                            let dkrow = &mut dkv[(bi * dq + d) * p..(bi * dq + d + 1) * p];
                            for j in 0..p {
                                dkrow[j] += srow[j] * qi;
                            }
                        }
                    }
                }
                self.accumulate(*x, g.to_vec());
                self.accumulate(*q, dqv);
                self.accumulate(*k, dkv);
                self.accumulate(*v, dvv);
            }
            Op::Reshape { x } => self.accumulate(*x, g.to_vec()),
            Op::Linear { x, w, b } => {
                let (bn, f) = (self.shape(*x)[0], self.shape(*x)[1]);
                let o = self.shape(*w)[0];
                let xv = &self.value(*x).data;
                let wv = &self.value(*w).data;
                let mut dx = vec![0.0; bn * f];
                let mut dw = vec![0.0; o * f];
                for r in 0..bn {
                    for j in 0..o {
                        let gj = g[r * o + j];
                        if gj == 0.0 {
                            continue;
                        }
                        for t in 0..f {
                            dx[r * f + t] += gj * wv[j * f + t];
                            dw[j * f + t] += gj * xv[r * f + t];
                        }
                    }
                }
                if let Some(b) = b {
                    let mut db = vec![0.0; o];
                    for r in 0..bn {
                        for j in 0..o {
                            db[j] += g[r * o + j];
                        }
                    }
                    self.accumulate(*b, db);
                }
                self.accumulate(*x, dx);
                self.accumulate(*w, dw);
            }
            Op::Bce { logits, targets } => {
                let n = targets.len() as f64;
                let d = self.value(*logits).data.iter().zip(targets).map(|(&z, &t)| g[0] * (sigmoid(z) - t) / n).collect();
                self.accumulate(*logits, d);
            }
            Op::Sum { x } => {
                let n = self.value(*x).len();
                self.accumulate(*x, vec![g[0]; n]);
            }
        }
    }
}

const INV_FACT: [f64; 13] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
];

/// Dot product with four independent accumulators.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// e^x for x <= 0 (inputs below -708 are clamped there). Cody-Waite
/// reduction and a degree-12 Taylor polynomial, relative error below 1e-15.
/// Branch-free so softmax rows vectorise.
#[inline]
pub fn exp_nonpos(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let x = if x < -708.0 { -708.0 } else { x };
    let t = x * std::f64::consts::LOG2_E + SHIFT;
    let n = t - SHIFT;
    let r = x - n * LN2_HI - n * LN2_LO;
    let c = &INV_FACT;
    let p = c[12] * r + c[11];
    let p = p * r + c[10];
    let p = p * r + c[9];
    let p = p * r + c[8];
    let p = p * r + c[7];
    let p = p * r + c[6];
    let p = p * r + c[5];
    let p = p * r + c[4];
    let p = p * r + c[3];
    let p = p * r + c[2];
    let p = p * r + c[1];
    let p = p * r + c[0];
    let bits = t.to_bits().wrapping_sub(SHIFT.to_bits()).wrapping_add(1023) << 52;
    p * f64::from_bits(bits)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean of max(z,0) - z·t + ln(1 + e^-|z|).
pub fn bce_value(z: &[f64], t: &[f64]) -> f64 {
    z.iter().zip(t).map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()).sum::<f64>() / z.len() as f64
}
