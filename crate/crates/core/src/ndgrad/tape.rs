//! Reverse-mode differentiation over a linear tape.
//!
//! Every op appends a node holding its forward value. [`Tape::backward`]
//! walks the nodes in reverse, propagating vector-Jacobian products, and
//! adds the resulting parameter gradients into the [`ParamStore`].

use super::{ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    batch: usize,
    in_ch: usize,
    in_h: usize,
    in_w: usize,
    out_ch: usize,
    k_h: usize,
    k_w: usize,
    out_h: usize,
    out_w: usize,
    stride: usize,
    padding: usize,
}

impl ConvGeom {
    fn patch_len(&self) -> usize {
        self.in_ch * self.k_h * self.k_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Scale(Var, f32),
    AddScalar(Var),
    Relu(Var),
    Square(Var),
    Log(Var),
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
        // im2col buffers, one [patch_len, out_plane] block per sample
        cols: Vec<f32>,
    },
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    Concat(Var, Var),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f32>,
    requires_grad: bool,
    op: Op,
}

/// Records a computation for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f32>>>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f32>, requires_grad: bool, op: Op) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn value(&self, v: Var) -> &[f32] {
        &self.node(v).value
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone())
    }

    pub fn item(&self, v: Var) -> f32 {
        let n = self.node(v);
        assert_eq!(n.value.len(), 1, "item() on non-scalar of shape {:?}", n.shape);
        n.value[0]
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), false, Op::Leaf)
    }

    /// Leaf honoring the tensor's `requires_grad` flag; its gradient is
    /// readable through [`Tape::grad`] after `backward`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), t.requires_grad(), Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let p = store.get(id);
        self.push(
            p.value.shape().to_vec(),
            p.value.data().to_vec(),
            true,
            Op::Param(id),
        )
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "matmul shape mismatch: {sa:?} x {sb:?}"
        );
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0f32; m * n];
        matmul_into(self.value(a), self.value(b), &mut out, m, k, n);
        let rg = self.rg(&[a, b]);
        self.push(vec![m, n], out, rg, Op::MatMul(a, b))
    }

    /// Elementwise sum of equal shapes, or a rank-1 `b` broadcast over the
    /// rows of a rank-2 `a` (bias addition).
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let rg = self.rg(&[a, b]);
        if sa == sb {
            let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
            return self.push(sa, out, rg, Op::Add(a, b));
        }
        assert!(
            sa.len() == 2 && sb.len() == 1 && sa[1] == sb[0],
            "add shape mismatch: {sa:?} + {sb:?}"
        );
        let cols = sb[0];
        let bias = self.value(b);
        let out: Vec<f32> = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x + bias[i % cols])
            .collect();
        self.push(sa, out, rg, Op::AddRow(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b));
        assert_eq!(sa, sb, "sub shape mismatch: {sa:?} - {sb:?}");
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        self.push(sa, out, rg, Op::Sub(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f32) -> Var {
        let out = self.value(a).iter().map(|x| x * c).collect();
        let (shape, rg) = (self.shape(a).to_vec(), self.rg(&[a]));
        self.push(shape, out, rg, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f32) -> Var {
        let out = self.value(a).iter().map(|x| x + c).collect();
        let (shape, rg) = (self.shape(a).to_vec(), self.rg(&[a]));
        self.push(shape, out, rg, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| x.max(0.0)).collect();
        let (shape, rg) = (self.shape(a).to_vec(), self.rg(&[a]));
        self.push(shape, out, rg, Op::Relu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x * x).collect();
        let (shape, rg) = (self.shape(a).to_vec(), self.rg(&[a]));
        self.push(shape, out, rg, Op::Square(a))
    }

    /// Natural log; inputs must be positive.
    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.ln()).collect();
        let (shape, rg) = (self.shape(a).to_vec(), self.rg(&[a]));
        self.push(shape, out, rg, Op::Log(a))
    }

    /// 2-D cross-correlation. `input: [N, C, H, W]`, `weight: [OC, C, KH, KW]`,
    /// `bias: [OC]`; zero padding on all sides.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, padding: usize) -> Var {
        let (si, sw, sb) = (self.shape(input), self.shape(weight), self.shape(bias));
        assert_eq!(si.len(), 4, "conv2d input must be [N, C, H, W], got {si:?}");
        assert_eq!(sw.len(), 4, "conv2d weight must be [OC, C, KH, KW], got {sw:?}");
        assert_eq!(
            si[1], sw[1],
            "conv2d channel mismatch: input has {} channels, kernel expects {}",
            si[1], sw[1]
        );
        assert_eq!(sb, &[sw[0]], "conv2d bias must be [{}], got {sb:?}", sw[0]);
        assert!(stride > 0, "conv2d stride must be positive");
        assert!(
            si[2] + 2 * padding >= sw[2] && si[3] + 2 * padding >= sw[3],
            "conv2d kernel {sw:?} larger than padded input {si:?}"
        );
        let geom = ConvGeom {
            batch: si[0],
            in_ch: si[1],
            in_h: si[2],
            in_w: si[3],
            out_ch: sw[0],
            k_h: sw[2],
            k_w: sw[3],
            out_h: (si[2] + 2 * padding - sw[2]) / stride + 1,
            out_w: (si[3] + 2 * padding - sw[3]) / stride + 1,
            stride,
            padding,
        };
        let (kl, pl) = (geom.patch_len(), geom.out_plane());
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let mut cols = vec![0.0f32; geom.batch * kl * pl];
        let mut out = vec![0.0f32; geom.batch * geom.out_ch * pl];
        let in_plane = geom.in_ch * geom.in_h * geom.in_w;
        for n in 0..geom.batch {
            let col = &mut cols[n * kl * pl..(n + 1) * kl * pl];
            im2col(&x[n * in_plane..(n + 1) * in_plane], &geom, col);
            let o = &mut out[n * geom.out_ch * pl..(n + 1) * geom.out_ch * pl];
            for oc in 0..geom.out_ch {
                o[oc * pl..(oc + 1) * pl].fill(b[oc]);
            }
            matmul_into(w, col, o, geom.out_ch, kl, pl);
        }
        let rg = self.rg(&[input, weight, bias]);
        let shape = vec![geom.batch, geom.out_ch, geom.out_h, geom.out_w];
        self.push(
            shape,
            out,
            rg,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
                cols,
            },
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let sa = self.shape(a);
        assert_eq!(
            numel(sa),
            numel(shape),
            "cannot reshape {sa:?} into {shape:?}"
        );
        let (value, rg) = (self.value(a).to_vec(), self.rg(&[a]));
        self.push(shape.to_vec(), value, rg, Op::Reshape(a))
    }

    /// Collapses all trailing axes: `[N, ...] -> [N, prod(...)]`.
    pub fn flatten(&mut self, a: Var) -> Var {
        let sa = self.shape(a);
        let rows = sa[0];
        let cols = numel(&sa[1..]);
        self.reshape(a, &[rows, cols])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f32 = self.value(a).iter().sum();
        let rg = self.rg(&[a]);
        self.push(vec![1], vec![s], rg, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s: f32 = v.iter().sum::<f32>() / v.len() as f32;
        let rg = self.rg(&[a]);
        self.push(vec![1], vec![s], rg, Op::Mean(a))
    }

    /// Concatenates two rank-2 tensors along the column axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[0] == sb[0],
            "concat shape mismatch: {sa:?} | {sb:?}"
        );
        let (rows, p, q) = (sa[0], sa[1], sb[1]);
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(rows * (p + q));
        for r in 0..rows {
            out.extend_from_slice(&va[r * p..(r + 1) * p]);
            out.extend_from_slice(&vb[r * q..(r + 1) * q]);
        }
        let rg = self.rg(&[a, b]);
        self.push(vec![rows, p + q], out, rg, Op::Concat(a, b))
    }

    /// Gradient of the last `backward` output with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Back-propagates from scalar `output` and adds parameter gradients
    /// into `store`. Parameters not reachable from `output` receive nothing.
    ///
    /// # Panics
    /// If `output` is not a scalar.
    pub fn backward(&mut self, output: Var, store: &mut ParamStore) {
        let out = self.node(output);
        assert_eq!(
            out.value.len(),
            1,
            "backward needs a scalar output, got shape {:?}",
            out.shape
        );
        let mut grads: Vec<Option<Vec<f32>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(vec![1.0]);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        for (node, g) in self.nodes.iter().zip(&grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                store.get_mut(*id).value.accumulate_grad(g);
            }
        }
        self.grads = grads;
    }

    fn propagate(&self, node: &Node, g: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let wants = |v: &Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (&self.node(*a).shape, &self.node(*b).shape);
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if wants(a) {
                    // dA = G * B^T
                    let bv = &self.node(*b).value;
                    let da = acc(grads, *a, m * k);
                    for i in 0..m {
                        let gr = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            da[i * k + p] += dot(gr, &bv[p * n..(p + 1) * n]);
                        }
                    }
                }
                if wants(b) {
                    // dB = A^T * G
                    let av = &self.node(*a).value;
                    let db = acc(grads, *b, k * n);
                    for i in 0..m {
                        let gr = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            axpy(av[i * k + p], gr, &mut db[p * n..(p + 1) * n]);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if wants(v) {
                        add_into(acc(grads, *v, g.len()), g);
                    }
                }
            }
            Op::AddRow(a, b) => {
                if wants(a) {
                    add_into(acc(grads, *a, g.len()), g);
                }
                if wants(b) {
                    let cols = self.node(*b).value.len();
                    let db = acc(grads, *b, cols);
                    for row in g.chunks_exact(cols) {
                        add_into(db, row);
                    }
                }
            }
            Op::Sub(a, b) => {
                if wants(a) {
                    add_into(acc(grads, *a, g.len()), g);
                }
                if wants(b) {
                    let db = acc(grads, *b, g.len());
                    for (d, x) in db.iter_mut().zip(g) {
                        *d -= x;
                    }
                }
            }
            Op::Scale(a, c) => {
                if wants(a) {
                    let da = acc(grads, *a, g.len());
                    for (d, x) in da.iter_mut().zip(g) {
                        *d += c * x;
                    }
                }
            }
            Op::AddScalar(a) => {
                if wants(a) {
                    add_into(acc(grads, *a, g.len()), g);
                }
            }
            Op::Relu(a) => {
                if wants(a) {
                    let out = &node.value;
                    let da = acc(grads, *a, g.len());
                    for ((d, x), y) in da.iter_mut().zip(g).zip(out) {
                        if *y > 0.0 {
                            *d += x;
                        }
                    }
                }
            }
            Op::Square(a) => {
                if wants(a) {
                    let av = &self.node(*a).value;
                    let da = acc(grads, *a, g.len());
                    for ((d, x), v) in da.iter_mut().zip(g).zip(av) {
                        *d += 2.0 * v * x;
                    }
                }
            }
            Op::Log(a) => {
                if wants(a) {
                    let av = &self.node(*a).value;
                    let da = acc(grads, *a, g.len());
                    for ((d, x), v) in da.iter_mut().zip(g).zip(av) {
                        *d += x / v;
                    }
                }
            }
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
                cols,
            } => {
                let (kl, pl, oc) = (geom.patch_len(), geom.out_plane(), geom.out_ch);
                let in_plane = geom.in_ch * geom.in_h * geom.in_w;
                if wants(bias) {
                    let db = acc(grads, *bias, oc);
                    for n in 0..geom.batch {
                        for c in 0..oc {
                            let base = (n * oc + c) * pl;
                            db[c] += g[base..base + pl].iter().sum::<f32>();
                        }
                    }
                }
                if wants(weight) {
                    let dw = acc(grads, *weight, oc * kl);
                    for n in 0..geom.batch {
                        let col = &cols[n * kl * pl..(n + 1) * kl * pl];
                        let gn = &g[n * oc * pl..(n + 1) * oc * pl];
                        for c in 0..oc {
                            let gr = &gn[c * pl..(c + 1) * pl];
                            for p in 0..kl {
                                dw[c * kl + p] += dot(gr, &col[p * pl..(p + 1) * pl]);
                            }
                        }
                    }
                }
                if wants(input) {
                    let w = &self.node(*weight).value;
                    let mut dcol = vec![0.0f32; kl * pl];
                    let dx = acc(grads, *input, geom.batch * in_plane);
                    for n in 0..geom.batch {
                        dcol.fill(0.0);
                        let gn = &g[n * oc * pl..(n + 1) * oc * pl];
                        for c in 0..oc {
                            let gr = &gn[c * pl..(c + 1) * pl];
                            for p in 0..kl {
                                axpy(w[c * kl + p], gr, &mut dcol[p * pl..(p + 1) * pl]);
                            }
                        }
                        col2im_add(&dcol, geom, &mut dx[n * in_plane..(n + 1) * in_plane]);
                    }
                }
            }
            Op::Reshape(a) => {
                if wants(a) {
                    add_into(acc(grads, *a, g.len()), g);
                }
            }
            Op::Sum(a) => {
                if wants(a) {
                    let len = self.node(*a).value.len();
                    acc(grads, *a, len).iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean(a) => {
                if wants(a) {
                    let len = self.node(*a).value.len();
                    let share = g[0] / len as f32;
                    acc(grads, *a, len).iter_mut().for_each(|d| *d += share);
                }
            }
            Op::Concat(a, b) => {
                let (p, q) = (self.node(*a).shape[1], self.node(*b).shape[1]);
                let rows = node.shape[0];
                if wants(a) {
                    let da = acc(grads, *a, rows * p);
                    for r in 0..rows {
                        add_into(&mut da[r * p..(r + 1) * p], &g[r * (p + q)..r * (p + q) + p]);
                    }
                }
                if wants(b) {
                    let db = acc(grads, *b, rows * q);
                    for r in 0..rows {
                        add_into(
                            &mut db[r * q..(r + 1) * q],
                            &g[r * (p + q) + p..(r + 1) * (p + q)],
                        );
                    }
                }
            }
        }
    }
}

fn acc(grads: &mut [Option<Vec<f32>>], v: Var, len: usize) -> &mut [f32] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn zip_map(a: &[f32], b: &[f32], f: impl Fn(f32, f32) -> f32) -> Vec<f32> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

fn add_into(dst: &mut [f32], src: &[f32]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[inline]
fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out[m, n] += a[m, k] * b[k, n]`
fn matmul_into(a: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip != 0.0 {
                axpy(aip, &b[p * n..(p + 1) * n], row);
            }
        }
    }
}

fn im2col(x: &[f32], g: &ConvGeom, col: &mut [f32]) {
    let pl = g.out_plane();
    for c in 0..g.in_ch {
        for ky in 0..g.k_h {
            for kx in 0..g.k_w {
                let row = (c * g.k_h + ky) * g.k_w + kx;
                let dst = &mut col[row * pl..(row + 1) * pl];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        dst[oy * g.out_w + ox] = if iy >= 0
                            && ix >= 0
                            && (iy as usize) < g.in_h
                            && (ix as usize) < g.in_w
                        {
                            x[(c * g.in_h + iy as usize) * g.in_w + ix as usize]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }
}

fn col2im_add(col: &[f32], g: &ConvGeom, dx: &mut [f32]) {
    let pl = g.out_plane();
    for c in 0..g.in_ch {
        for ky in 0..g.k_h {
            for kx in 0..g.k_w {
                let row = (c * g.k_h + ky) * g.k_w + kx;
                let src = &col[row * pl..(row + 1) * pl];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy as usize >= g.in_h {
                        continue;
                    }
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix < 0 || ix as usize >= g.in_w {
                            continue;
                        }
                        dx[(c * g.in_h + iy as usize) * g.in_w + ix as usize] += src[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
}
