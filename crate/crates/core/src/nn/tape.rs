//! Reverse-mode autodiff on a flat tape.
//!
//! A [`Tape`] owns a vector of nodes; each op pushes one node holding its
//! forward value, and [`Tape::backward`] walks the nodes in reverse,
//! accumulating adjoints. [`Var`] is just an index, cheap to copy.
//!
//! Broadcasting for binary elementwise ops follows the usual rule: each
//! dimension must match or be 1 on one side; the gradient is sum-reduced
//! over broadcast dimensions. Shape violations panic — they are bugs, not
//! runtime conditions.

use super::tensor::Tensor;

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    /// Input data, labels, frozen snapshots: no gradient requested.
    Const,
    /// Trainable parameter: gradient requested.
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// `a * x + b`, elementwise with scalar constants; only the scale
    /// matters to the gradient so the shift lives in the forward value.
    Affine(Var, f64),
    Exp(Var),
    Ln(Var),
    Relu(Var),
    Sigmoid(Var),
    Clamp(Var, f64, f64),
    /// Row-wise softmax, numerically stabilized.
    Softmax(Var),
    SumAll(Var),
    /// `[R, C] -> [R, 1]`.
    SumRows(Var),
    /// `[R, C] -> [1, C]`.
    SumCols(Var),
    /// `[R, C] -> [R, 1]`, max over each row; ties resolve to the first
    /// maximum for the backward pass.
    RowMax(Var),
    /// `[R, C] -> [R, 1]`, element `(r, idx[r])`.
    GatherCols(Var, Vec<usize>),
    /// Contiguous column slice `[R, C] -> [R, count]`.
    SliceCols(Var, usize, usize),
    /// Contiguous row slice `[R, C] -> [count, C]`.
    SliceRows(Var, usize, usize),
    Transpose(Var),
    /// 1-D convolution with zero padding to "same" length. Input rows are
    /// channel-major flattened signals: `[B, in_ch * len]`; weights are
    /// `[out_ch, in_ch * kernel]`, bias `[1, out_ch]`, output
    /// `[B, out_ch * len]`.
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        len: usize,
    },
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// The recording tape. Create one per forward/backward pass.
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`, if any was accumulated.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Registers input data; no gradient will be computed for it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Const, t, false)
    }

    /// Registers a trainable parameter; its gradient is available after
    /// [`Tape::backward`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::MatMul(a, b), v, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = broadcast_forward(self.value(a), self.value(b), |x, y| x + y);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Add(a, b), v, ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = broadcast_forward(self.value(a), self.value(b), |x, y| x - y);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Sub(a, b), v, ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = broadcast_forward(self.value(a), self.value(b), |x, y| x * y);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Mul(a, b), v, ng)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = broadcast_forward(self.value(a), self.value(b), |x, y| x / y);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Div(a, b), v, ng)
    }

    /// `scale * x + shift` elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(x).map(|e| scale * e + shift);
        let ng = self.needs(x);
        self.push(Op::Affine(x, scale), v, ng)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::exp);
        let ng = self.needs(x);
        self.push(Op::Exp(x), v, ng)
    }

    /// Natural log. The caller guarantees positive inputs (clamp first when
    /// in doubt).
    pub fn ln(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::ln);
        let ng = self.needs(x);
        self.push(Op::Ln(x), v, ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|e| e.max(0.0));
        let ng = self.needs(x);
        self.push(Op::Relu(x), v, ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(sigmoid);
        let ng = self.needs(x);
        self.push(Op::Sigmoid(x), v, ng)
    }

    /// Clamp to `[lo, hi]`; gradient passes only strictly inside the range.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        assert!(lo <= hi);
        let v = self.value(x).map(|e| e.clamp(lo, hi));
        let ng = self.needs(x);
        self.push(Op::Clamp(x, lo, hi), v, ng)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut v = Tensor::zeros(xv.rows(), xv.cols());
        for r in 0..xv.rows() {
            let row = xv.row(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (c, &e) in row.iter().enumerate() {
                let w = (e - m).exp();
                v.set(r, c, w);
                sum += w;
            }
            for c in 0..xv.cols() {
                v.set(r, c, v.get(r, c) / sum);
            }
        }
        let ng = self.needs(x);
        self.push(Op::Softmax(x), v, ng)
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).sum());
        let ng = self.needs(x);
        self.push(Op::SumAll(x), v, ng)
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let n = self.value(x).len() as f64;
        let s = self.sum_all(x);
        self.affine(s, 1.0 / n, 0.0)
    }

    pub fn sum_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let v = Tensor::from_fn(xv.rows(), 1, |r, _| xv.row(r).iter().sum());
        let ng = self.needs(x);
        self.push(Op::SumRows(x), v, ng)
    }

    pub fn sum_cols(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut v = Tensor::zeros(1, xv.cols());
        for r in 0..xv.rows() {
            for (c, &e) in xv.row(r).iter().enumerate() {
                v.data_mut()[c] += e;
            }
        }
        let ng = self.needs(x);
        self.push(Op::SumCols(x), v, ng)
    }

    pub fn row_max(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let v = Tensor::from_fn(xv.rows(), 1, |r, _| {
            xv.row(r).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        });
        let ng = self.needs(x);
        self.push(Op::RowMax(x), v, ng)
    }

    /// Per-row column gather: output `[R, 1]` with `out[r] = x[r, idx[r]]`.
    pub fn gather_cols(&mut self, x: Var, idx: &[usize]) -> Var {
        let xv = self.value(x);
        assert_eq!(idx.len(), xv.rows(), "one index per row");
        for &i in idx {
            assert!(i < xv.cols(), "gather index out of range");
        }
        let v = Tensor::from_fn(xv.rows(), 1, |r, _| xv.get(r, idx[r]));
        let ng = self.needs(x);
        self.push(Op::GatherCols(x, idx.to_vec()), v, ng)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, count: usize) -> Var {
        let xv = self.value(x);
        assert!(start + count <= xv.cols(), "column slice out of range");
        let v = Tensor::from_fn(xv.rows(), count, |r, c| xv.get(r, start + c));
        let ng = self.needs(x);
        self.push(Op::SliceCols(x, start, count), v, ng)
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, count: usize) -> Var {
        let xv = self.value(x);
        assert!(start + count <= xv.rows(), "row slice out of range");
        let v = Tensor::from_fn(count, xv.cols(), |r, c| xv.get(start + r, c));
        let ng = self.needs(x);
        self.push(Op::SliceRows(x, start, count), v, ng)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let v = self.value(x).transpose();
        let ng = self.needs(x);
        self.push(Op::Transpose(x), v, ng)
    }

    /// Same-padded 1-D convolution over channel-major flattened rows.
    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        len: usize,
    ) -> Var {
        assert!(kernel % 2 == 1, "conv1d expects an odd kernel for same padding");
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(xv.cols(), in_ch * len, "conv1d input width mismatch");
        assert_eq!(wv.shape(), (out_ch, in_ch * kernel), "conv1d weight shape");
        assert_eq!(bv.shape(), (1, out_ch), "conv1d bias shape");
        let pad = kernel / 2;
        let batch = xv.rows();
        let mut v = Tensor::zeros(batch, out_ch * len);
        for bi in 0..batch {
            let xrow = xv.row(bi);
            for oc in 0..out_ch {
                let wrow = wv.row(oc);
                for t in 0..len {
                    let mut acc = bv.get(0, oc);
                    for ic in 0..in_ch {
                        for k in 0..kernel {
                            let src = t + k;
                            if src >= pad && src - pad < len {
                                acc += wrow[ic * kernel + k] * xrow[ic * len + src - pad];
                            }
                        }
                    }
                    v.set(bi, oc * len + t, acc);
                }
            }
        }
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(Op::Conv1d { x, w, b, in_ch, out_ch, kernel, len }, v, ng)
    }

    /// Runs the backward pass from a scalar loss node.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(
            self.value(loss).shape(),
            (1, 1),
            "backward starts from a scalar loss"
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.accumulate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    /// Adds the contribution of node `i` (with adjoint `g`) into its inputs.
    fn accumulate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Const | Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let da = g.matmul_nt(self.value(*b));
                    add_grad(grads, *a, da);
                }
                if self.needs(*b) {
                    let db = self.value(*a).matmul_tn(g);
                    add_grad(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    add_grad(grads, *a, reduce_to(g, self.value(*a).shape()));
                }
                if self.needs(*b) {
                    add_grad(grads, *b, reduce_to(g, self.value(*b).shape()));
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    add_grad(grads, *a, reduce_to(g, self.value(*a).shape()));
                }
                if self.needs(*b) {
                    let mut d = reduce_to(g, self.value(*b).shape());
                    d.scale(-1.0);
                    add_grad(grads, *b, d);
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let da = broadcast_forward(g, self.value(*b), |gg, bb| gg * bb);
                    add_grad(grads, *a, reduce_to(&da, self.value(*a).shape()));
                }
                if self.needs(*b) {
                    let db = broadcast_forward(g, self.value(*a), |gg, aa| gg * aa);
                    add_grad(grads, *b, reduce_to(&db, self.value(*b).shape()));
                }
            }
            Op::Div(a, b) => {
                if self.needs(*a) {
                    let da = broadcast_forward(g, self.value(*b), |gg, bb| gg / bb);
                    add_grad(grads, *a, reduce_to(&da, self.value(*a).shape()));
                }
                if self.needs(*b) {
                    // d/db (a/b) = -a / b^2; node.value = a/b so reuse it.
                    let ratio = broadcast_forward(&node.value, self.value(*b), |v, bb| v / bb);
                    let db = g.zip_map(&ratio, |gg, r| -gg * r);
                    add_grad(grads, *b, reduce_to(&db, self.value(*b).shape()));
                }
            }
            Op::Affine(x, scale) => {
                if self.needs(*x) {
                    add_grad(grads, *x, g.map(|e| e * scale));
                }
            }
            Op::Exp(x) => {
                if self.needs(*x) {
                    add_grad(grads, *x, g.zip_map(&node.value, |gg, y| gg * y));
                }
            }
            Op::Ln(x) => {
                if self.needs(*x) {
                    add_grad(grads, *x, g.zip_map(self.value(*x), |gg, xx| gg / xx));
                }
            }
            Op::Relu(x) => {
                if self.needs(*x) {
                    add_grad(
                        grads,
                        *x,
                        g.zip_map(self.value(*x), |gg, xx| if xx > 0.0 { gg } else { 0.0 }),
                    );
                }
            }
            Op::Sigmoid(x) => {
                if self.needs(*x) {
                    add_grad(grads, *x, g.zip_map(&node.value, |gg, y| gg * y * (1.0 - y)));
                }
            }
            Op::Clamp(x, lo, hi) => {
                if self.needs(*x) {
                    add_grad(
                        grads,
                        *x,
                        g.zip_map(self.value(*x), |gg, xx| {
                            if xx > *lo && xx < *hi {
                                gg
                            } else {
                                0.0
                            }
                        }),
                    );
                }
            }
            Op::Softmax(x) => {
                if self.needs(*x) {
                    let y = &node.value;
                    let mut dx = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = y
                            .row(r)
                            .iter()
                            .zip(g.row(r))
                            .map(|(&yy, &gg)| yy * gg)
                            .sum();
                        for c in 0..y.cols() {
                            dx.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    add_grad(grads, *x, dx);
                }
            }
            Op::SumAll(x) => {
                if self.needs(*x) {
                    let (r, c) = self.value(*x).shape();
                    add_grad(grads, *x, Tensor::filled(r, c, g.get(0, 0)));
                }
            }
            Op::SumRows(x) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    add_grad(
                        grads,
                        *x,
                        Tensor::from_fn(xv.rows(), xv.cols(), |r, _| g.get(r, 0)),
                    );
                }
            }
            Op::SumCols(x) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    add_grad(
                        grads,
                        *x,
                        Tensor::from_fn(xv.rows(), xv.cols(), |_, c| g.get(0, c)),
                    );
                }
            }
            Op::RowMax(x) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..xv.rows() {
                        let row = xv.row(r);
                        let mut arg = 0;
                        for (c, &e) in row.iter().enumerate() {
                            if e > row[arg] {
                                arg = c;
                            }
                        }
                        dx.set(r, arg, g.get(r, 0));
                    }
                    add_grad(grads, *x, dx);
                }
            }
            Op::GatherCols(x, idx) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for (r, &c) in idx.iter().enumerate() {
                        dx.set(r, c, g.get(r, 0));
                    }
                    add_grad(grads, *x, dx);
                }
            }
            Op::SliceCols(x, start, count) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..xv.rows() {
                        for c in 0..*count {
                            dx.set(r, start + c, g.get(r, c));
                        }
                    }
                    add_grad(grads, *x, dx);
                }
            }
            Op::SliceRows(x, start, count) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..*count {
                        for c in 0..xv.cols() {
                            dx.set(start + r, c, g.get(r, c));
                        }
                    }
                    add_grad(grads, *x, dx);
                }
            }
            Op::Transpose(x) => {
                if self.needs(*x) {
                    add_grad(grads, *x, g.transpose());
                }
            }
            Op::Conv1d { x, w, b, in_ch, out_ch, kernel, len } => {
                let pad = kernel / 2;
                let xv = self.value(*x);
                let wv = self.value(*w);
                let batch = xv.rows();
                if self.needs(*x) {
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for bi in 0..batch {
                        for oc in 0..*out_ch {
                            let wrow = wv.row(oc);
                            for t in 0..*len {
                                let gg = g.get(bi, oc * len + t);
                                if gg == 0.0 {
                                    continue;
                                }
                                for ic in 0..*in_ch {
                                    for k in 0..*kernel {
                                        let src = t + k;
                                        if src >= pad && src - pad < *len {
                                            let i = ic * len + src - pad;
                                            dx.data_mut()[bi * xv.cols() + i] +=
                                                gg * wrow[ic * kernel + k];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    add_grad(grads, *x, dx);
                }
                if self.needs(*w) {
                    let mut dw = Tensor::zeros(wv.rows(), wv.cols());
                    for bi in 0..batch {
                        let xrow = xv.row(bi);
                        for oc in 0..*out_ch {
                            for t in 0..*len {
                                let gg = g.get(bi, oc * len + t);
                                if gg == 0.0 {
                                    continue;
                                }
                                for ic in 0..*in_ch {
                                    for k in 0..*kernel {
                                        let src = t + k;
                                        if src >= pad && src - pad < *len {
                                            dw.data_mut()[oc * wv.cols() + ic * kernel + k] +=
                                                gg * xrow[ic * len + src - pad];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    add_grad(grads, *w, dw);
                }
                if self.needs(*b) {
                    let mut db = Tensor::zeros(1, *out_ch);
                    for bi in 0..batch {
                        for oc in 0..*out_ch {
                            let mut acc = 0.0;
                            for t in 0..*len {
                                acc += g.get(bi, oc * len + t);
                            }
                            db.data_mut()[oc] += acc;
                        }
                    }
                    add_grad(grads, *b, db);
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn add_grad(grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
    match &mut grads[v.0] {
        Some(t) => t.axpy(1.0, &delta),
        slot => *slot = Some(delta),
    }
}

/// Broadcast shape of a binary op, per the match-or-1 rule.
fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let rows = match (a.0, b.0) {
        (x, y) if x == y => x,
        (1, y) => y,
        (x, 1) => x,
        _ => panic!("incompatible broadcast rows: {a:?} vs {b:?}"),
    };
    let cols = match (a.1, b.1) {
        (x, y) if x == y => x,
        (1, y) => y,
        (x, 1) => x,
        _ => panic!("incompatible broadcast cols: {a:?} vs {b:?}"),
    };
    (rows, cols)
}

fn broadcast_forward(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    let (rows, cols) = broadcast_shape(a.shape(), b.shape());
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Tensor::from_fn(rows, cols, |r, c| {
        let av = a.get(if ar == 1 { 0 } else { r }, if ac == 1 { 0 } else { c });
        let bv = b.get(if br == 1 { 0 } else { r }, if bc == 1 { 0 } else { c });
        f(av, bv)
    })
}

/// Sum-reduces `g` down to `shape` (inverse of broadcasting).
fn reduce_to(g: &Tensor, shape: (usize, usize)) -> Tensor {
    if g.shape() == shape {
        return g.clone();
    }
    let (rows, cols) = shape;
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..g.rows() {
        for c in 0..g.cols() {
            let tr = if rows == 1 { 0 } else { r };
            let tc = if cols == 1 { 0 } else { c };
            out.data_mut()[tr * cols + tc] += g.get(r, c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chain_of_ops_produces_expected_scalar() {
        // loss = sum((relu(x W + b))^2) on tiny known values
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_vec(1, 2, vec![1.0, -2.0]));
        let w = t.leaf(Tensor::from_vec(2, 2, vec![0.5, -1.0, 0.25, 0.75]));
        let b = t.leaf(Tensor::from_vec(1, 2, vec![0.1, -0.2]));
        let z = t.matmul(x, w);
        let z = t.add(z, b);
        let a = t.relu(z);
        let sq = t.mul(a, a);
        let loss = t.sum_all(sq);
        // xW = [0.0, -2.5]; +b = [0.1, -2.7]; relu = [0.1, 0]; loss = 0.01
        assert_relative_eq!(t.value(loss).get(0, 0), 0.01, max_relative = 1e-12);
        let g = t.backward(loss);
        // dloss/db = 2*relu(z)*1{z>0} = [0.2, 0]
        let db = g.get(b).unwrap();
        assert_relative_eq!(db.get(0, 0), 0.2, max_relative = 1e-12);
        assert_eq!(db.get(0, 1), 0.0);
    }

    #[test]
    fn broadcast_add_reduces_gradient() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_fn(3, 2, |r, c| (r + c) as f64));
        let b = t.leaf(Tensor::from_vec(1, 2, vec![1.0, 2.0]));
        let y = t.add(x, b);
        let loss = t.sum_all(y);
        let g = t.backward(loss);
        // Each bias element is added to 3 rows.
        assert_eq!(g.get(b).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn outer_broadcast_multiplies_column_by_row() {
        let mut t = Tape::new();
        let col = t.constant(Tensor::from_vec(2, 1, vec![2.0, 3.0]));
        let row = t.constant(Tensor::from_vec(1, 3, vec![1.0, 10.0, 100.0]));
        let y = t.mul(col, row);
        assert_eq!(
            t.value(y).data(),
            &[2.0, 20.0, 200.0, 3.0, 30.0, 300.0]
        );
    }

    #[test]
    fn softmax_rows_sum_to_one_and_backward_is_centered() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 1000.0]));
        let y = t.softmax_rows(x);
        for r in 0..2 {
            let s: f64 = t.value(y).row(r).iter().sum();
            assert_relative_eq!(s, 1.0, max_relative = 1e-12);
        }
        // Summing a softmax row is constant 1, so gradients vanish.
        let loss = t.sum_all(y);
        let g = t.backward(loss);
        for &d in g.get(x).unwrap().data() {
            assert!(d.abs() < 1e-12, "softmax-sum gradient should vanish, got {d}");
        }
    }

    #[test]
    fn gather_and_rowmax_route_gradients_to_single_entries() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_vec(2, 3, vec![1.0, 5.0, 2.0, 7.0, 7.0, 1.0]));
        let gathered = t.gather_cols(x, &[2, 0]);
        let maxed = t.row_max(x);
        let s1 = t.sum_all(gathered);
        let s2 = t.sum_all(maxed);
        let total = t.add(s1, s2);
        let g = t.backward(total);
        let dx = g.get(x).unwrap();
        // gather hits (0,2) and (1,0); rowmax hits (0,1) and first max (1,0).
        assert_eq!(dx.data(), &[0.0, 1.0, 1.0, 2.0, 0.0, 0.0]);
    }
}
