//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Nodes are appended in evaluation order, so a reverse sweep over the tape
//! is a valid topological order for the backward pass.

use crate::kernels::{self, out_size, Window};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GanRole {
    DReal,
    DFake,
    G,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GanKind {
    Hinge,
    Lsgan,
}

enum Op<T> {
    Leaf,
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    },
    ConvT {
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    },
    Relu(Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    Add(Var, Var),
    Norm {
        x: Var,
        per_sample: bool,
        inv_std: Vec<T>,
    },
    Modulate {
        x: Var,
        gamma: Var,
        beta: Var,
    },
    Resize(Var),
    AvgPool(Var, usize),
    Concat(Var, Var),
    L1(Var, Var),
    Dot(Var, Var),
    Gan(Vec<Var>, GanRole, GanKind),
    Weighted(Vec<(Var, T)>),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Result of [`Graph::backward`]: one optional gradient per node.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads[v.0].take()
    }
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn sample_window(c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Window {
    Window {
        c,
        h,
        w,
        k,
        stride,
        pad,
        oh: out_size(h, k, stride, pad),
        ow: out_size(w, k, stride, pad),
    }
}

/// Visits every normalization group: per (sample, channel) when `per_sample`,
/// otherwise per channel across the batch. Yields the start offsets of the
/// contiguous `H*W` runs that make up each group.
fn norm_groups(shape: [usize; 4], per_sample: bool) -> Vec<Vec<usize>> {
    let [n, c, h, w] = shape;
    let hw = h * w;
    if per_sample {
        (0..n * c).map(|g| vec![g * hw]).collect()
    } else {
        (0..c)
            .map(|ci| (0..n).map(|ni| (ni * c + ci) * hw).collect())
            .collect()
    }
}

fn gan_phi<T: Scalar>(l: T, role: GanRole, kind: GanKind) -> (T, T) {
    let one = T::one();
    let two = T::of(2.0);
    match (kind, role) {
        (GanKind::Hinge, GanRole::DReal) => {
            if l < one {
                (one - l, -one)
            } else {
                (T::zero(), T::zero())
            }
        }
        (GanKind::Hinge, GanRole::DFake) => {
            if l > -one {
                (one + l, one)
            } else {
                (T::zero(), T::zero())
            }
        }
        (GanKind::Hinge, GanRole::G) => (-l, -one),
        (GanKind::Lsgan, GanRole::DReal | GanRole::G) => ((l - one) * (l - one), two * (l - one)),
        (GanKind::Lsgan, GanRole::DFake) => (l * l, two * l),
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 4] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf whose gradient is collected by [`Graph::backward`].
    pub fn variable(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Var {
        let [n, cin, h, wd] = self.shape(x);
        let [cout, wcin, k, k2] = self.shape(w);
        assert_eq!(wcin, cin, "conv2d: weight expects {wcin} input channels, got {cin}");
        assert_eq!(k, k2, "conv2d: kernel must be square");
        let g = sample_window(cin, h, wd, k, stride, pad);
        let mut out = Tensor::zeros([n, cout, g.oh, g.ow]);
        let mut scratch = Vec::new();
        {
            let xv = &self.nodes[x.0].value;
            let wv = self.nodes[w.0].value.data();
            let bv = b.map(|b| self.nodes[b.0].value.data());
            for i in 0..n {
                kernels::conv_forward(xv.sample(i), wv, bv, &g, cout, &mut scratch, out.sample_mut(i));
            }
        }
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        self.push(out, Op::Conv { x, w, b, stride, pad }, ng)
    }

    /// Transposed convolution with weight `[Cin, Cout, k, k]`. The output
    /// extent is `(H - 1) * stride - 2 * pad + k + out_pad`.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> Var {
        let [n, cin, h, wd] = self.shape(x);
        let [wcin, cout, k, _] = self.shape(w);
        assert_eq!(wcin, cin, "conv_transpose2d: channel mismatch");
        let oh = (h - 1) * stride + k + out_pad - 2 * pad;
        let ow = (wd - 1) * stride + k + out_pad - 2 * pad;
        let g = Window {
            c: cout,
            h: oh,
            w: ow,
            k,
            stride,
            pad,
            oh: h,
            ow: wd,
        };
        let mut out = Tensor::zeros([n, cout, oh, ow]);
        let mut col = vec![T::zero(); g.rows() * g.cols()];
        {
            let xv = &self.nodes[x.0].value;
            let wv = self.nodes[w.0].value.data();
            for i in 0..n {
                crate::scalar::gemm(g.rows(), g.cols(), cin, wv, true, xv.sample(i), false, &mut col, false);
                let o = out.sample_mut(i);
                kernels::col2im(&col, &g, o);
                if let Some(b) = b {
                    kernels::add_bias(o, self.nodes[b.0].value.data());
                }
            }
        }
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        self.push(out, Op::ConvT { x, w, b, stride, pad }, ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(T::zero()));
        let ng = self.ng(x);
        self.push(out, Op::Relu(x), ng)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::of(slope);
        let out = self.value(x).map(|v| if v > T::zero() { v } else { v * s });
        let ng = self.ng(x);
        self.push(out, Op::LeakyRelu(x, s), ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.tanh());
        let ng = self.ng(x);
        self.push(out, Op::Tanh(x), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add: shape mismatch");
        let mut out = self.value(a).clone();
        for (o, &v) in out.data_mut().iter_mut().zip(self.value(b).data()) {
            *o += v;
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Add(a, b), ng)
    }

    /// Parameter-free normalization `(x - mean) / sqrt(var + eps)`. Statistics
    /// are taken per (sample, channel) when `per_sample`, otherwise per
    /// channel over the whole batch.
    pub fn normalize(&mut self, x: Var, per_sample: bool, eps: f64) -> Var {
        let xv = self.value(x);
        let shape = xv.shape();
        let hw = shape[2] * shape[3];
        let groups = norm_groups(shape, per_sample);
        let mut out = Tensor::zeros(shape);
        let mut inv_std = Vec::with_capacity(groups.len());
        let eps = T::of(eps);
        for starts in &groups {
            let m = T::of((starts.len() * hw) as f64);
            let mut sum = T::zero();
            for &s in starts {
                for &v in &xv.data()[s..s + hw] {
                    sum += v;
                }
            }
            let mean = sum / m;
            let mut sq = T::zero();
            for &s in starts {
                for &v in &xv.data()[s..s + hw] {
                    sq += (v - mean) * (v - mean);
                }
            }
            let inv = T::one() / (sq / m + eps).sqrt();
            for &s in starts {
                for (o, &v) in out.data_mut()[s..s + hw].iter_mut().zip(&xv.data()[s..s + hw]) {
                    *o = (v - mean) * inv;
                }
            }
            inv_std.push(inv);
        }
        let ng = self.ng(x);
        self.push(
            out,
            Op::Norm {
                x,
                per_sample,
                inv_std,
            },
            ng,
        )
    }

    /// `x * (1 + gamma) + beta`, elementwise.
    pub fn modulate(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let shape = self.shape(x);
        assert_eq!(shape, self.shape(gamma), "modulate: gamma shape");
        assert_eq!(shape, self.shape(beta), "modulate: beta shape");
        let xs = self.value(x).data();
        let gs = self.value(gamma).data();
        let bs = self.value(beta).data();
        let data = xs
            .iter()
            .zip(gs)
            .zip(bs)
            .map(|((&xv, &gv), &bv)| xv * (T::one() + gv) + bv)
            .collect();
        let out = Tensor::from_vec(shape, data).expect("shape preserved");
        let ng = self.ng(x) || self.ng(gamma) || self.ng(beta);
        self.push(out, Op::Modulate { x, gamma, beta }, ng)
    }

    /// Nearest-neighbour resize to `h x w`; returns `x` unchanged when the
    /// extent already matches.
    pub fn resize_nearest(&mut self, x: Var, h: usize, w: usize) -> Var {
        let [n, c, ih, iw] = self.shape(x);
        if (ih, iw) == (h, w) {
            return x;
        }
        let mut out = Tensor::zeros([n, c, h, w]);
        kernels::resize_nearest(self.value(x).data(), (ih, iw), out.data_mut(), (h, w));
        let ng = self.ng(x);
        self.push(out, Op::Resize(x), ng)
    }

    pub fn avg_pool(&mut self, x: Var, f: usize) -> Var {
        if f == 1 {
            return x;
        }
        let [n, c, h, w] = self.shape(x);
        let mut out = Tensor::zeros([n, c, h / f, w / f]);
        kernels::avg_pool(self.value(x).data(), (h, w), f, out.data_mut());
        let ng = self.ng(x);
        self.push(out, Op::AvgPool(x, f), ng)
    }

    /// Channel concatenation.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let [n, ca, h, w] = self.shape(a);
        let [nb, cb, hb, wb] = self.shape(b);
        assert_eq!((n, h, w), (nb, hb, wb), "concat: batch/spatial mismatch");
        let mut out = Tensor::zeros([n, ca + cb, h, w]);
        for i in 0..n {
            let sa = self.value(a).sample(i);
            let sb = self.value(b).sample(i);
            let o = out.sample_mut(i);
            o[..sa.len()].copy_from_slice(sa);
            o[sa.len()..].copy_from_slice(sb);
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Concat(a, b), ng)
    }

    /// Mean absolute difference.
    pub fn l1(&mut self, pred: Var, target: Var) -> Var {
        assert_eq!(self.shape(pred), self.shape(target), "l1: shape mismatch");
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let mut s = T::zero();
        for (&a, &b) in p.iter().zip(t) {
            s += (a - b).abs();
        }
        let out = Tensor::scalar(s / T::of(p.len() as f64));
        let ng = self.ng(pred) || self.ng(target);
        self.push(out, Op::L1(pred, target), ng)
    }

    /// Inner product of two equally shaped tensors.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "dot: shape mismatch");
        let mut s = T::zero();
        for (&x, &y) in self.value(a).data().iter().zip(self.value(b).data()) {
            s += x * y;
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(Tensor::scalar(s), Op::Dot(a, b), ng)
    }

    /// Adversarial objective: the per-map means averaged over maps.
    pub fn gan(&mut self, maps: &[Var], role: GanRole, kind: GanKind) -> Var {
        assert!(!maps.is_empty(), "gan: no logit maps");
        let mut total = T::zero();
        for &m in maps {
            let d = self.value(m).data();
            let mut s = T::zero();
            for &l in d {
                s += gan_phi(l, role, kind).0;
            }
            total += s / T::of(d.len() as f64);
        }
        let out = Tensor::scalar(total / T::of(maps.len() as f64));
        let ng = maps.iter().any(|&m| self.ng(m));
        self.push(out, Op::Gan(maps.to_vec(), role, kind), ng)
    }

    /// `sum_i w_i * v_i` over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let mut s = T::zero();
        let mut conv = Vec::with_capacity(terms.len());
        for &(v, w) in terms {
            let w = T::of(w);
            s += self.value(v).item() * w;
            conv.push((v, w));
        }
        let ng = terms.iter().any(|&(v, _)| self.ng(v));
        self.push(Tensor::scalar(s), Op::Weighted(conv), ng)
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        assert_eq!(self.value(root).len(), 1, "backward: root must be a scalar");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(T::one()));
        let mut scratch = Vec::new();
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads, &mut scratch);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn backward_node(
        &self,
        node: &Node<T>,
        g: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
        scratch: &mut Vec<T>,
    ) {
        let nodes = &self.nodes;
        let want = |v: Var| nodes[v.0].needs_grad;
        // Gradient buffer for `v`, created on first use.
        fn slot<'a, T: Scalar>(
            grads: &'a mut [Option<Tensor<T>>],
            nodes: &[Node<T>],
            v: Var,
        ) -> &'a mut Tensor<T> {
            grads[v.0].get_or_insert_with(|| Tensor::zeros(nodes[v.0].value.shape()))
        }
        match &node.op {
            Op::Leaf => {}
            &Op::Conv { x, w, b, stride, pad } => {
                let xv = &nodes[x.0].value;
                let wv = &nodes[w.0].value;
                let [n, cin, h, wd] = xv.shape();
                let [cout, _, k, _] = wv.shape();
                let win = sample_window(cin, h, wd, k, stride, pad);
                let mut dw = want(w).then(|| Tensor::zeros(wv.shape()));
                let mut dx = want(x).then(|| Tensor::zeros(xv.shape()));
                for i in 0..n {
                    kernels::conv_backward(
                        xv.sample(i),
                        wv.data(),
                        g.sample(i),
                        &win,
                        cout,
                        dx.as_mut().map(|t| t.sample_mut(i)),
                        dw.as_mut().map(|t| t.data_mut()),
                        scratch,
                    );
                }
                if let Some(b) = b.filter(|&b| want(b)) {
                    let db = slot(grads, nodes, b);
                    for i in 0..n {
                        kernels::bias_grad(g.sample(i), db.data_mut());
                    }
                }
                accumulate(grads, w, dw);
                accumulate(grads, x, dx);
            }
            &Op::ConvT { x, w, b, stride, pad } => {
                let xv = &nodes[x.0].value;
                let wv = &nodes[w.0].value;
                let [n, cin, h, wd] = xv.shape();
                let [_, cout, k, _] = wv.shape();
                let win = Window {
                    c: cout,
                    h: g.h(),
                    w: g.w(),
                    k,
                    stride,
                    pad,
                    oh: h,
                    ow: wd,
                };
                let mut col = vec![T::zero(); win.rows() * win.cols()];
                let mut dw = want(w).then(|| Tensor::zeros(wv.shape()));
                let mut dx = want(x).then(|| Tensor::zeros(xv.shape()));
                for i in 0..n {
                    kernels::im2col(g.sample(i), &win, &mut col);
                    if let Some(dx) = dx.as_mut() {
                        crate::scalar::gemm(cin, win.cols(), win.rows(), wv.data(), false, &col, false, dx.sample_mut(i), true);
                    }
                    if let Some(dw) = dw.as_mut() {
                        crate::scalar::gemm(cin, win.rows(), win.cols(), xv.sample(i), false, &col, true, dw.data_mut(), true);
                    }
                }
                if let Some(b) = b.filter(|&b| want(b)) {
                    let db = slot(grads, nodes, b);
                    for i in 0..n {
                        kernels::bias_grad(g.sample(i), db.data_mut());
                    }
                }
                accumulate(grads, w, dw);
                accumulate(grads, x, dx);
            }
            &Op::Relu(x) => {
                if want(x) {
                    let xv = nodes[x.0].value.data();
                    let dx = slot(grads, nodes, x);
                    for ((d, &gv), &v) in dx.data_mut().iter_mut().zip(g.data()).zip(xv) {
                        if v > T::zero() {
                            *d += gv;
                        }
                    }
                }
            }
            &Op::LeakyRelu(x, s) => {
                if want(x) {
                    let xv = nodes[x.0].value.data();
                    let dx = slot(grads, nodes, x);
                    for ((d, &gv), &v) in dx.data_mut().iter_mut().zip(g.data()).zip(xv) {
                        *d += if v > T::zero() { gv } else { gv * s };
                    }
                }
            }
            &Op::Tanh(x) => {
                if want(x) {
                    let y = node.value.data();
                    let dx = slot(grads, nodes, x);
                    for ((d, &gv), &yv) in dx.data_mut().iter_mut().zip(g.data()).zip(y) {
                        *d += gv * (T::one() - yv * yv);
                    }
                }
            }
            &Op::Add(a, b) => {
                for v in [a, b] {
                    if want(v) {
                        add_into(slot(grads, nodes, v), g);
                    }
                }
            }
            Op::Norm {
                x,
                per_sample,
                inv_std,
            } => {
                let x = *x;
                if want(x) {
                    let y = &node.value;
                    let shape = y.shape();
                    let hw = shape[2] * shape[3];
                    let groups = norm_groups(shape, *per_sample);
                    let dx = slot(grads, nodes, x);
                    for (starts, &inv) in groups.iter().zip(inv_std) {
                        let m = T::of((starts.len() * hw) as f64);
                        let (mut sg, mut sgy) = (T::zero(), T::zero());
                        for &s in starts {
                            for (&gv, &yv) in g.data()[s..s + hw].iter().zip(&y.data()[s..s + hw]) {
                                sg += gv;
                                sgy += gv * yv;
                            }
                        }
                        let (mg, mgy) = (sg / m, sgy / m);
                        for &s in starts {
                            let d = &mut dx.data_mut()[s..s + hw];
                            for ((dv, &gv), &yv) in d.iter_mut().zip(&g.data()[s..s + hw]).zip(&y.data()[s..s + hw]) {
                                *dv += inv * (gv - mg - yv * mgy);
                            }
                        }
                    }
                }
            }
            &Op::Modulate { x, gamma, beta } => {
                let xv = nodes[x.0].value.data();
                let gm = nodes[gamma.0].value.data();
                if want(x) {
                    let dx = slot(grads, nodes, x);
                    for ((d, &gv), &gmv) in dx.data_mut().iter_mut().zip(g.data()).zip(gm) {
                        *d += gv * (T::one() + gmv);
                    }
                }
                if want(gamma) {
                    let dg = slot(grads, nodes, gamma);
                    for ((d, &gv), &xval) in dg.data_mut().iter_mut().zip(g.data()).zip(xv) {
                        *d += gv * xval;
                    }
                }
                if want(beta) {
                    add_into(slot(grads, nodes, beta), g);
                }
            }
            &Op::Resize(x) => {
                if want(x) {
                    let [_, _, h, w] = nodes[x.0].value.shape();
                    let dx = slot(grads, nodes, x);
                    kernels::resize_nearest_backward(g.data(), (g.h(), g.w()), dx.data_mut(), (h, w));
                }
            }
            &Op::AvgPool(x, f) => {
                if want(x) {
                    let [_, _, h, w] = nodes[x.0].value.shape();
                    let dx = slot(grads, nodes, x);
                    kernels::avg_pool_backward(g.data(), dx.data_mut(), (h, w), f);
                }
            }
            &Op::Concat(a, b) => {
                let na = nodes[a.0].value.sample_len();
                for i in 0..g.n() {
                    let gs = g.sample(i);
                    if want(a) {
                        let da = slot(grads, nodes, a);
                        for (d, &v) in da.sample_mut(i).iter_mut().zip(&gs[..na]) {
                            *d += v;
                        }
                    }
                    if want(b) {
                        let db = slot(grads, nodes, b);
                        for (d, &v) in db.sample_mut(i).iter_mut().zip(&gs[na..]) {
                            *d += v;
                        }
                    }
                }
            }
            &Op::L1(p, t) => {
                let gv = g.item();
                let pv = nodes[p.0].value.data();
                let tv = nodes[t.0].value.data();
                let scale = gv / T::of(pv.len() as f64);
                let sign = |a: T, b: T| {
                    if a > b {
                        scale
                    } else if a < b {
                        -scale
                    } else {
                        T::zero()
                    }
                };
                if want(p) {
                    let dp = slot(grads, nodes, p);
                    for ((d, &a), &b) in dp.data_mut().iter_mut().zip(pv).zip(tv) {
                        *d += sign(a, b);
                    }
                }
                if want(t) {
                    let dt = slot(grads, nodes, t);
                    for ((d, &a), &b) in dt.data_mut().iter_mut().zip(pv).zip(tv) {
                        *d -= sign(a, b);
                    }
                }
            }
            &Op::Dot(a, b) => {
                let gv = g.item();
                if want(a) {
                    let bv = nodes[b.0].value.data();
                    let da = slot(grads, nodes, a);
                    for (d, &v) in da.data_mut().iter_mut().zip(bv) {
                        *d += gv * v;
                    }
                }
                if want(b) {
                    let av = nodes[a.0].value.data();
                    let db = slot(grads, nodes, b);
                    for (d, &v) in db.data_mut().iter_mut().zip(av) {
                        *d += gv * v;
                    }
                }
            }
            Op::Gan(maps, role, kind) => {
                let k = T::of(maps.len() as f64);
                for &m in maps {
                    if !want(m) {
                        continue;
                    }
                    let lv = nodes[m.0].value.data();
                    let scale = g.item() / (k * T::of(lv.len() as f64));
                    let dm = slot(grads, nodes, m);
                    for (d, &l) in dm.data_mut().iter_mut().zip(lv) {
                        *d += gan_phi(l, *role, *kind).1 * scale;
                    }
                }
            }
            Op::Weighted(terms) => {
                for &(v, w) in terms {
                    if want(v) {
                        let d = slot(grads, nodes, v);
                        d.data_mut()[0] += w * g.item();
                    }
                }
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut Tensor<T>, src: &Tensor<T>) {
    for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, t: Option<Tensor<T>>) {
    let Some(t) = t else { return };
    match &mut grads[v.0] {
        Some(existing) => add_into(existing, &t),
        slot @ None => *slot = Some(t),
    }
}
