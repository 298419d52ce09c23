//! Reverse-mode differentiation over small dense vectors.

/// Handle to a node of a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Shape of a valid (unpadded, stride 1) multi-channel convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        self.height + 1 - self.kernel
    }

    pub fn out_width(&self) -> usize {
        self.width + 1 - self.kernel
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn out_len(&self) -> usize {
        self.out_channels * self.out_height() * self.out_width()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Copy of a parameter segment starting at this offset.
    Param(usize),
    Affine { w: Var, x: Var, b: Option<Var> },
    Conv { x: Var, w: Var, b: Var, shape: ConvShape },
    Tanh(Var),
    Leaky(Var, f64),
    Concat(Vec<Var>),
    Add(Var, Var),
    Scale(Var, f64),
    Dot(Var, Var),
    Softmax(Var),
    LogSoftmax(Var),
    Sum(Var),
    Index(Var, usize),
    Slice(Var, usize),
    WeightedSum { weights: Var, items: Vec<Var> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Records a computation eagerly; [`Tape::backward`] then yields gradients.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
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

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A constant input.
    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A trainable input whose gradient is reported at `offset` by [`Tape::param_grads`].
    pub fn param(&mut self, value: &[f64], offset: usize) -> Var {
        self.push(value.to_vec(), Op::Param(offset))
    }

    /// `W x + b` with `W` stored row-major as `len(b) × len(x)`.
    pub fn affine(&mut self, w: Var, x: Var, b: Option<Var>) -> Var {
        let (wv, xv) = (self.value(w), self.value(x));
        let cols = xv.len();
        assert_eq!(wv.len() % cols, 0, "affine: weight does not match input");
        let rows = wv.len() / cols;
        let mut y: Vec<f64> = wv
            .chunks_exact(cols)
            .map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        if let Some(b) = b {
            let bv = self.value(b);
            assert_eq!(bv.len(), rows, "affine: bias length");
            y.iter_mut().zip(bv).for_each(|(y, b)| *y += b);
        }
        self.push(y, Op::Affine { w, x, b })
    }

    /// Valid cross-correlation. Input `[c][y][x]`, weight `[o][c][ky][kx]`, bias `[o]`.
    pub fn conv(&mut self, x: Var, w: Var, b: Var, shape: ConvShape) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let ConvShape {
            in_channels: ci,
            height: h,
            width: wd,
            out_channels: co,
            kernel: k,
        } = shape;
        assert_eq!(xv.len(), ci * h * wd, "conv: input shape");
        assert_eq!(wv.len(), shape.weight_len(), "conv: weight shape");
        assert_eq!(bv.len(), co, "conv: bias shape");
        let (oh, ow) = (shape.out_height(), shape.out_width());
        let mut y = vec![0.0; shape.out_len()];
        for o in 0..co {
            for r in 0..oh {
                for c in 0..ow {
                    let mut acc = bv[o];
                    for i in 0..ci {
                        for ky in 0..k {
                            let xrow = &xv[(i * h + r + ky) * wd + c..][..k];
                            let wrow = &wv[((o * ci + i) * k + ky) * k..][..k];
                            acc += xrow.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    y[(o * oh + r) * ow + c] = acc;
                }
            }
        }
        self.push(y, Op::Conv { x, w, b, shape })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(y, Op::Tanh(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let y = self
            .value(x)
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        self.push(y, Op::Leaky(x, slope))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let y = parts.iter().flat_map(|&p| self.value(p).iter().copied()).collect();
        self.push(y, Op::Concat(parts.to_vec()))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "add: length mismatch");
        let y = av.iter().zip(bv).map(|(x, y)| x + y).collect();
        self.push(y, Op::Add(a, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x).iter().map(|v| c * v).collect();
        self.push(y, Op::Scale(x, c))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "dot: length mismatch");
        let y = av.iter().zip(bv).map(|(x, y)| x * y).sum();
        self.push(vec![y], Op::Dot(a, b))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let y = softmax(self.value(x));
        self.push(y, Op::Softmax(x))
    }

    pub fn log_softmax(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let m = xv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + xv.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let y = xv.iter().map(|v| v - lse).collect();
        self.push(y, Op::LogSoftmax(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let y = self.value(x).iter().sum();
        self.push(vec![y], Op::Sum(x))
    }

    pub fn index(&mut self, x: Var, i: usize) -> Var {
        let y = self.value(x)[i];
        self.push(vec![y], Op::Index(x, i))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let y = self.value(x)[start..start + len].to_vec();
        self.push(y, Op::Slice(x, start))
    }

    /// `Σ_i weights[i] · items[i]`, summed in the given order.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Var {
        let w = self.value(weights);
        assert_eq!(w.len(), items.len(), "weighted_sum: arity");
        let n = self.value(items[0]).len();
        let mut y = vec![0.0; n];
        for (&wi, &it) in w.iter().zip(items) {
            let v = self.value(it);
            assert_eq!(v.len(), n, "weighted_sum: item length");
            y.iter_mut().zip(v).for_each(|(y, v)| *y += wi * v);
        }
        self.push(y, Op::WeightedSum { weights, items: items.to_vec() })
    }

    /// `Σ c_i x_i` over scalar nodes.
    pub fn linear_combination(&mut self, terms: &[(Var, f64)]) -> Var {
        let vars: Vec<Var> = terms.iter().map(|t| t.0).collect();
        let xs = self.concat(&vars);
        let cs = self.leaf(terms.iter().map(|t| t.1).collect());
        self.dot(xs, cs)
    }

    /// Gradients of the scalar `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).len(), 1, "backward needs a scalar output");
        let mut g: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        g[output.0] = Some(vec![1.0]);
        fn acc(g: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            g[v.0].get_or_insert_with(|| vec![0.0; len])
        }
        for i in (0..=output.0).rev() {
            let Some(gy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Leaf | Op::Param(_) => {}
                Op::Affine { w, x, b } => {
                    let (wv, xv) = (self.value(*w), self.value(*x));
                    let cols = xv.len();
                    let gw = acc(&mut g, *w, wv.len());
                    for (r, &gr) in gy.iter().enumerate() {
                        if gr != 0.0 {
                            gw[r * cols..][..cols]
                                .iter_mut()
                                .zip(xv)
                                .for_each(|(d, x)| *d += gr * x);
                        }
                    }
                    let gx = acc(&mut g, *x, cols);
                    for (r, &gr) in gy.iter().enumerate() {
                        gx.iter_mut()
                            .zip(&wv[r * cols..][..cols])
                            .for_each(|(d, w)| *d += gr * w);
                    }
                    if let Some(b) = b {
                        acc(&mut g, *b, gy.len())
                            .iter_mut()
                            .zip(&gy)
                            .for_each(|(d, v)| *d += v);
                    }
                }
                Op::Conv { x, w, b, shape } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let ConvShape {
                        in_channels: ci,
                        height: h,
                        width: wd,
                        out_channels: co,
                        kernel: k,
                    } = *shape;
                    let (oh, ow) = (shape.out_height(), shape.out_width());
                    {
                        let gb = acc(&mut g, *b, co);
                        for o in 0..co {
                            gb[o] += gy[o * oh * ow..][..oh * ow].iter().sum::<f64>();
                        }
                    }
                    let mut gw = vec![0.0; wv.len()];
                    let mut gx = vec![0.0; xv.len()];
                    for o in 0..co {
                        for r in 0..oh {
                            for c in 0..ow {
                                let go = gy[(o * oh + r) * ow + c];
                                if go == 0.0 {
                                    continue;
                                }
                                for i in 0..ci {
                                    for ky in 0..k {
                                        let xo = (i * h + r + ky) * wd + c;
                                        let wo = ((o * ci + i) * k + ky) * k;
                                        for kx in 0..k {
                                            gw[wo + kx] += go * xv[xo + kx];
                                            gx[xo + kx] += go * wv[wo + kx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    acc(&mut g, *w, gw.len()).iter_mut().zip(&gw).for_each(|(d, v)| *d += v);
                    acc(&mut g, *x, gx.len()).iter_mut().zip(&gx).for_each(|(d, v)| *d += v);
                }
                Op::Tanh(x) => {
                    acc(&mut g, *x, y.len())
                        .iter_mut()
                        .zip(gy.iter().zip(y))
                        .for_each(|(d, (gv, yv))| *d += gv * (1.0 - yv * yv));
                }
                Op::Leaky(x, slope) => {
                    let xv = self.value(*x);
                    acc(&mut g, *x, y.len())
                        .iter_mut()
                        .zip(gy.iter().zip(xv))
                        .for_each(|(d, (gv, xv))| *d += if *xv > 0.0 { *gv } else { slope * gv });
                }
                Op::Concat(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        acc(&mut g, *p, n)
                            .iter_mut()
                            .zip(&gy[at..at + n])
                            .for_each(|(d, v)| *d += v);
                        at += n;
                    }
                }
                Op::Add(a, b) => {
                    for v in [a, b] {
                        acc(&mut g, *v, gy.len())
                            .iter_mut()
                            .zip(&gy)
                            .for_each(|(d, v)| *d += v);
                    }
                }
                Op::Scale(x, c) => {
                    acc(&mut g, *x, gy.len())
                        .iter_mut()
                        .zip(&gy)
                        .for_each(|(d, v)| *d += c * v);
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let s = gy[0];
                    acc(&mut g, *a, av.len())
                        .iter_mut()
                        .zip(bv)
                        .for_each(|(d, v)| *d += s * v);
                    acc(&mut g, *b, bv.len())
                        .iter_mut()
                        .zip(av)
                        .for_each(|(d, v)| *d += s * v);
                }
                Op::Softmax(x) => {
                    let inner: f64 = gy.iter().zip(y).map(|(a, b)| a * b).sum();
                    acc(&mut g, *x, y.len())
                        .iter_mut()
                        .zip(gy.iter().zip(y))
                        .for_each(|(d, (gv, p))| *d += p * (gv - inner));
                }
                Op::LogSoftmax(x) => {
                    let total: f64 = gy.iter().sum();
                    let p = softmax(self.value(*x));
                    acc(&mut g, *x, y.len())
                        .iter_mut()
                        .zip(gy.iter().zip(&p))
                        .for_each(|(d, (gv, p))| *d += gv - p * total);
                }
                Op::Sum(x) => {
                    let n = self.value(*x).len();
                    acc(&mut g, *x, n).iter_mut().for_each(|d| *d += gy[0]);
                }
                Op::Index(x, k) => {
                    let n = self.value(*x).len();
                    acc(&mut g, *x, n)[*k] += gy[0];
                }
                Op::Slice(x, start) => {
                    let n = self.value(*x).len();
                    acc(&mut g, *x, n)[*start..*start + gy.len()]
                        .iter_mut()
                        .zip(&gy)
                        .for_each(|(d, v)| *d += v);
                }
                Op::WeightedSum { weights, items } => {
                    let wv = self.value(*weights);
                    let gw: Vec<f64> = items
                        .iter()
                        .map(|it| self.value(*it).iter().zip(&gy).map(|(a, b)| a * b).sum())
                        .collect();
                    acc(&mut g, *weights, wv.len())
                        .iter_mut()
                        .zip(&gw)
                        .for_each(|(d, v)| *d += v);
                    for (it, &wi) in items.iter().zip(wv) {
                        acc(&mut g, *it, gy.len())
                            .iter_mut()
                            .zip(&gy)
                            .for_each(|(d, v)| *d += wi * v);
                    }
                }
            }
            g[i] = Some(gy);
        }
        Gradients { grads: g }
    }

    /// Adds the gradients of every parameter node into `out` at its offset.
    pub fn param_grads(&self, grads: &Gradients, out: &mut [f64]) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(offset), Some(Some(gv))) = (&node.op, grads.grads.get(i)) {
                out[*offset..*offset + gv.len()]
                    .iter_mut()
                    .zip(gv)
                    .for_each(|(d, v)| *d += v);
            }
        }
    }
}

/// Output of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`; `None` if the output does not depend on it.
    pub fn of(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}
