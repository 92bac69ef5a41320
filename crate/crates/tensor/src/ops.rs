use crate::conv;
use crate::tensor::{numel, Tensor};

pub(crate) enum Op {
    Leaf,
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Div(Tensor, Tensor),
    AddScalar(Tensor),
    MulScalar(Tensor, f32),
    LeakyRelu(Tensor, f32),
    Abs(Tensor),
    Softplus(Tensor),
    Sqrt(Tensor),
    Square(Tensor),
    Exp(Tensor),
    Clamp(Tensor, f32, f32),
    SumAll(Tensor),
    ReduceTo(Tensor),
    Reshape(Tensor),
    MatmulBt(Tensor, Tensor),
    Conv2d { input: Tensor, weight: Tensor, pad: usize },
    Upsample2x(Tensor),
    AvgPool2x(Tensor),
    Concat(Vec<Tensor>, usize),
    Narrow(Tensor, usize, usize),
    InstanceNorm { input: Tensor, inv_std: Vec<f32> },
}

impl Op {
    pub(crate) fn parents(&self) -> Vec<&Tensor> {
        use Op::*;
        match self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | MatmulBt(a, b) => vec![a, b],
            Conv2d { input, weight, .. } => vec![input, weight],
            AddScalar(a)
            | MulScalar(a, _)
            | LeakyRelu(a, _)
            | Abs(a)
            | Softplus(a)
            | Sqrt(a)
            | Square(a)
            | Exp(a)
            | Clamp(a, _, _)
            | SumAll(a)
            | ReduceTo(a)
            | Reshape(a)
            | Upsample2x(a)
            | AvgPool2x(a)
            | Narrow(a, _, _) => vec![a],
            InstanceNorm { input, .. } => vec![input],
            Concat(ts, _) => ts.iter().collect(),
        }
    }

    /// Gradient contributions for each parent, in `parents()` order.
    pub(crate) fn backward(&self, out: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        use Op::*;
        let needs = |t: &Tensor| t.requires_grad();
        match self {
            Leaf => vec![],
            Add(a, b) => vec![
                needs(a).then(|| reduce_to(g, out.shape(), a.shape())),
                needs(b).then(|| reduce_to(g, out.shape(), b.shape())),
            ],
            Sub(a, b) => vec![
                needs(a).then(|| reduce_to(g, out.shape(), a.shape())),
                needs(b).then(|| {
                    let mut r = reduce_to(g, out.shape(), b.shape());
                    r.iter_mut().for_each(|v| *v = -*v);
                    r
                }),
            ],
            Mul(a, b) => vec![
                needs(a).then(|| {
                    let prod = broadcast_map(g, out.shape(), b.data(), b.shape(), |x, y| x * y);
                    reduce_to(&prod, out.shape(), a.shape())
                }),
                needs(b).then(|| {
                    let prod = broadcast_map(g, out.shape(), a.data(), a.shape(), |x, y| x * y);
                    reduce_to(&prod, out.shape(), b.shape())
                }),
            ],
            Div(a, b) => vec![
                needs(a).then(|| {
                    let q = broadcast_map(g, out.shape(), b.data(), b.shape(), |x, y| x / y);
                    reduce_to(&q, out.shape(), a.shape())
                }),
                needs(b).then(|| {
                    // d(a/b)/db = -out / b
                    let go: Vec<f32> = g.iter().zip(out.data()).map(|(x, o)| -x * o).collect();
                    let q = broadcast_map(&go, out.shape(), b.data(), b.shape(), |x, y| x / y);
                    reduce_to(&q, out.shape(), b.shape())
                }),
            ],
            AddScalar(_) => vec![Some(g.to_vec())],
            MulScalar(_, s) => vec![Some(g.iter().map(|v| v * s).collect())],
            LeakyRelu(a, slope) => vec![Some(
                g.iter()
                    .zip(a.data())
                    .map(|(gv, x)| if *x > 0.0 { *gv } else { gv * slope })
                    .collect(),
            )],
            Abs(a) => vec![Some(
                g.iter()
                    .zip(a.data())
                    .map(|(gv, x)| {
                        if *x > 0.0 {
                            *gv
                        } else if *x < 0.0 {
                            -gv
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )],
            Softplus(a) => vec![Some(
                g.iter()
                    .zip(a.data())
                    .map(|(gv, x)| gv * sigmoid(*x))
                    .collect(),
            )],
            Sqrt(_) => vec![Some(
                g.iter()
                    .zip(out.data())
                    .map(|(gv, y)| if *y > 0.0 { gv * 0.5 / y } else { 0.0 })
                    .collect(),
            )],
            Square(a) => vec![Some(g.iter().zip(a.data()).map(|(gv, x)| 2.0 * gv * x).collect())],
            Exp(_) => vec![Some(g.iter().zip(out.data()).map(|(gv, y)| gv * y).collect())],
            Clamp(a, lo, hi) => vec![Some(
                g.iter()
                    .zip(a.data())
                    .map(|(gv, x)| if *x >= *lo && *x <= *hi { *gv } else { 0.0 })
                    .collect(),
            )],
            SumAll(a) => vec![Some(vec![g[0]; a.numel()])],
            ReduceTo(a) => vec![Some(broadcast_to(g, out.shape(), a.shape()))],
            Reshape(_) => vec![Some(g.to_vec())],
            MatmulBt(a, b) => {
                let (m, k) = a.dims2();
                let (n, _) = b.dims2();
                let ga = needs(a).then(|| {
                    // ga[m,k] = g[m,n] * b[n,k]
                    let mut r = vec![0.0; m * k];
                    gemm(m, n, k, g, n, 1, b.data(), k, 1, &mut r, k, 0.0);
                    r
                });
                let gb = needs(b).then(|| {
                    // gb[n,k] = g^T[n,m] * a[m,k]
                    let mut r = vec![0.0; n * k];
                    gemm(n, m, k, g, 1, n, a.data(), k, 1, &mut r, k, 0.0);
                    r
                });
                vec![ga, gb]
            }
            Conv2d { input, weight, pad } => {
                let (gi, gw) = conv::conv2d_backward(input, weight, *pad, g, needs(input), needs(weight));
                vec![gi, gw]
            }
            Upsample2x(a) => {
                let (n, c, h, w) = a.dims4();
                let mut r = vec![0.0; n * c * h * w];
                let ow = 2 * w;
                for plane in 0..n * c {
                    let src = &g[plane * 4 * h * w..(plane + 1) * 4 * h * w];
                    let dst = &mut r[plane * h * w..(plane + 1) * h * w];
                    for y in 0..h {
                        for x in 0..w {
                            let o = 2 * y * ow + 2 * x;
                            dst[y * w + x] = src[o] + src[o + 1] + src[o + ow] + src[o + ow + 1];
                        }
                    }
                }
                vec![Some(r)]
            }
            AvgPool2x(a) => {
                let (n, c, h, w) = a.dims4();
                let (oh, ow) = (h / 2, w / 2);
                let mut r = vec![0.0; n * c * h * w];
                for plane in 0..n * c {
                    let src = &g[plane * oh * ow..(plane + 1) * oh * ow];
                    let dst = &mut r[plane * h * w..(plane + 1) * h * w];
                    for y in 0..oh {
                        for x in 0..ow {
                            let v = 0.25 * src[y * ow + x];
                            let o = 2 * y * w + 2 * x;
                            dst[o] = v;
                            dst[o + 1] = v;
                            dst[o + w] = v;
                            dst[o + w + 1] = v;
                        }
                    }
                }
                vec![Some(r)]
            }
            Concat(ts, axis) => {
                let shape = out.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let total = shape[*axis];
                let mut offset = 0;
                ts.iter()
                    .map(|t| {
                        let len = t.shape()[*axis];
                        let r = needs(t).then(|| {
                            let mut r = Vec::with_capacity(t.numel());
                            for o in 0..outer {
                                let start = (o * total + offset) * inner;
                                r.extend_from_slice(&g[start..start + len * inner]);
                            }
                            r
                        });
                        offset += len;
                        r
                    })
                    .collect()
            }
            Narrow(a, axis, start) => {
                let shape = a.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let total = shape[*axis];
                let len = out.shape()[*axis];
                let mut r = vec![0.0; a.numel()];
                for o in 0..outer {
                    let dst = (o * total + start) * inner;
                    let src = o * len * inner;
                    r[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                }
                vec![Some(r)]
            }
            InstanceNorm { input, inv_std } => {
                let (n, c, h, w) = input.dims4();
                let hw = h * w;
                let y = out.data();
                let mut r = vec![0.0; n * c * hw];
                for plane in 0..n * c {
                    let gs = &g[plane * hw..(plane + 1) * hw];
                    let ys = &y[plane * hw..(plane + 1) * hw];
                    let mean_g: f64 = gs.iter().map(|&v| v as f64).sum::<f64>() / hw as f64;
                    let mean_gy: f64 =
                        gs.iter().zip(ys).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() / hw as f64;
                    let s = inv_std[plane] as f64;
                    for i in 0..hw {
                        r[plane * hw + i] =
                            (s * (gs[i] as f64 - mean_g - ys[i] as f64 * mean_gy)) as f32;
                    }
                }
                vec![Some(r)]
            }
        }
    }
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f32) -> f32 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `c = a * b + beta * c` for row-major buffers with explicit strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    rsa: usize,
    csa: usize,
    b: &[f32],
    rsb: usize,
    csb: usize,
    c: &mut [f32],
    rsc: usize,
    beta: f32,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // SAFETY: strides and extents describe in-bounds views of the slices.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let r = a.len().max(b.len());
    (0..r)
        .map(|i| {
            let da = if i + a.len() >= r { a[i + a.len() - r] } else { 1 };
            let db = if i + b.len() >= r { b[i + b.len() - r] } else { 1 };
            match (da, db) {
                (x, y) if x == y => x,
                (1, y) => y,
                (x, 1) => x,
                _ => panic!("shapes {a:?} and {b:?} are not broadcast-compatible"),
            }
        })
        .collect()
}

/// Strides of `shape` viewed inside `out` (0 on broadcast axes).
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let r = out.len();
    let mut strides = vec![0; r];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let oi = i + r - shape.len();
        strides[oi] = if shape[i] == 1 && out[oi] != 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// Calls `f(out_index, a_index, b_index)` for every element of `out`.
fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let total = numel(out);
    if total == 0 {
        return;
    }
    if out.is_empty() {
        f(0, 0, 0);
        return;
    }
    let r = out.len();
    let inner = out[r - 1];
    let (ia, ib) = (sa[r - 1], sb[r - 1]);
    let outer = total / inner;
    let mut idx = vec![0usize; r - 1];
    let (mut oa, mut ob) = (0usize, 0usize);
    for o in 0..outer {
        let base = o * inner;
        for j in 0..inner {
            f(base + j, oa + j * ia, ob + j * ib);
        }
        for d in (0..r - 1).rev() {
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < out[d] {
                break;
            }
            oa -= sa[d] * out[d];
            ob -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

/// Elementwise `f(g, other)` where `g` has shape `out` and `other` broadcasts into it.
fn broadcast_map(g: &[f32], out: &[usize], other: &[f32], other_shape: &[usize], f: impl Fn(f32, f32) -> f32) -> Vec<f32> {
    if other_shape == out {
        return g.iter().zip(other).map(|(a, b)| f(*a, *b)).collect();
    }
    let so = broadcast_strides(other_shape, out);
    let zeros = vec![0; out.len()];
    let mut r = vec![0.0; g.len()];
    for_each_broadcast(out, &so, &zeros, |o, i, _| r[o] = f(g[o], other[i]));
    r
}

/// Sums `g` (shape `out`) down to `target`, the inverse of broadcasting.
fn reduce_to(g: &[f32], out: &[usize], target: &[usize]) -> Vec<f32> {
    if target == out {
        return g.to_vec();
    }
    let st = broadcast_strides(target, out);
    let zeros = vec![0; out.len()];
    let mut acc = vec![0.0f64; numel(target)];
    for_each_broadcast(out, &st, &zeros, |o, i, _| acc[i] += g[o] as f64);
    acc.into_iter().map(|v| v as f32).collect()
}

/// Expands `g` (shape `small`) to `big` by repetition.
fn broadcast_to(g: &[f32], small: &[usize], big: &[usize]) -> Vec<f32> {
    let st = broadcast_strides(small, big);
    let zeros = vec![0; big.len()];
    let mut r = vec![0.0; numel(big)];
    for_each_broadcast(big, &st, &zeros, |o, i, _| r[o] = g[i]);
    r
}

fn binary(a: &Tensor, b: &Tensor, f: impl Fn(f32, f32) -> f32) -> (Vec<f32>, Vec<usize>) {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
        return (data, a.shape().to_vec());
    }
    let out = broadcast_shape(a.shape(), b.shape());
    let sa = broadcast_strides(a.shape(), &out);
    let sb = broadcast_strides(b.shape(), &out);
    let (ad, bd) = (a.data(), b.data());
    let mut data = vec![0.0; numel(&out)];
    for_each_broadcast(&out, &sa, &sb, |o, i, j| data[o] = f(ad[i], bd[j]));
    (data, out)
}

fn unary(a: &Tensor, f: impl Fn(f32) -> f32) -> Vec<f32> {
    a.data().iter().map(|x| f(*x)).collect()
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Tensor {
        let (d, s) = binary(self, other, |x, y| x + y);
        Tensor::from_op(d, s, Op::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        let (d, s) = binary(self, other, |x, y| x - y);
        Tensor::from_op(d, s, Op::Sub(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        let (d, s) = binary(self, other, |x, y| x * y);
        Tensor::from_op(d, s, Op::Mul(self.clone(), other.clone()))
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        let (d, s) = binary(self, other, |x, y| x / y);
        Tensor::from_op(d, s, Op::Div(self.clone(), other.clone()))
    }

    pub fn add_scalar(&self, v: f32) -> Tensor {
        Tensor::from_op(unary(self, |x| x + v), self.shape().to_vec(), Op::AddScalar(self.clone()))
    }

    pub fn mul_scalar(&self, v: f32) -> Tensor {
        Tensor::from_op(unary(self, |x| x * v), self.shape().to_vec(), Op::MulScalar(self.clone(), v))
    }

    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    pub fn leaky_relu(&self, slope: f32) -> Tensor {
        Tensor::from_op(
            unary(self, |x| if x > 0.0 { x } else { x * slope }),
            self.shape().to_vec(),
            Op::LeakyRelu(self.clone(), slope),
        )
    }

    pub fn relu(&self) -> Tensor {
        self.leaky_relu(0.0)
    }

    pub fn abs(&self) -> Tensor {
        Tensor::from_op(unary(self, f32::abs), self.shape().to_vec(), Op::Abs(self.clone()))
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&self) -> Tensor {
        Tensor::from_op(unary(self, softplus), self.shape().to_vec(), Op::Softplus(self.clone()))
    }

    pub fn sqrt(&self) -> Tensor {
        Tensor::from_op(unary(self, f32::sqrt), self.shape().to_vec(), Op::Sqrt(self.clone()))
    }

    pub fn square(&self) -> Tensor {
        Tensor::from_op(unary(self, |x| x * x), self.shape().to_vec(), Op::Square(self.clone()))
    }

    pub fn exp(&self) -> Tensor {
        Tensor::from_op(unary(self, f32::exp), self.shape().to_vec(), Op::Exp(self.clone()))
    }

    pub fn clamp(&self, lo: f32, hi: f32) -> Tensor {
        Tensor::from_op(
            unary(self, |x| x.clamp(lo, hi)),
            self.shape().to_vec(),
            Op::Clamp(self.clone(), lo, hi),
        )
    }

    pub fn sum_all(&self) -> Tensor {
        let s: f64 = self.data().iter().map(|&v| v as f64).sum();
        Tensor::from_op(vec![s as f32], vec![], Op::SumAll(self.clone()))
    }

    pub fn mean_all(&self) -> Tensor {
        let n = self.numel().max(1) as f32;
        self.sum_all().mul_scalar(1.0 / n)
    }

    /// Sums over `axes`, keeping them as size-1 dimensions.
    pub fn sum_keepdim(&self, axes: &[usize]) -> Tensor {
        let mut target = self.shape().to_vec();
        for &a in axes {
            target[a] = 1;
        }
        let data = reduce_to(self.data(), self.shape(), &target);
        Tensor::from_op(data, target, Op::ReduceTo(self.clone()))
    }

    pub fn mean_keepdim(&self, axes: &[usize]) -> Tensor {
        let count: usize = axes.iter().map(|&a| self.shape()[a]).product();
        self.sum_keepdim(axes).mul_scalar(1.0 / count as f32)
    }

    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        assert_eq!(numel(shape), self.numel(), "cannot reshape {:?} into {:?}", self.shape(), shape);
        Tensor::from_op(self.to_vec(), shape.to_vec(), Op::Reshape(self.clone()))
    }

    /// `self [m,k] x other^T` where `other` is `[n,k]`.
    pub fn matmul_bt(&self, other: &Tensor) -> Tensor {
        let (m, k) = self.dims2();
        let (n, k2) = other.dims2();
        assert_eq!(k, k2, "matmul_bt inner dims {k} vs {k2}");
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.data(), k, 1, other.data(), 1, k, &mut out, n, 0.0);
        Tensor::from_op(out, vec![m, n], Op::MatmulBt(self.clone(), other.clone()))
    }

    /// Stride-1 2-D convolution of NCHW input with `[out, in, kh, kw]` weights
    /// and symmetric zero padding.
    pub fn conv2d(&self, weight: &Tensor, pad: usize) -> Tensor {
        let (data, shape) = conv::conv2d_forward(self, weight, pad);
        Tensor::from_op(
            data,
            shape,
            Op::Conv2d {
                input: self.clone(),
                weight: weight.clone(),
                pad,
            },
        )
    }

    /// Nearest-neighbour 2x upsampling of an NCHW tensor.
    pub fn upsample2x(&self) -> Tensor {
        let (n, c, h, w) = self.dims4();
        let (oh, ow) = (2 * h, 2 * w);
        let src = self.data();
        let mut out = vec![0.0; n * c * oh * ow];
        for plane in 0..n * c {
            let s = &src[plane * h * w..(plane + 1) * h * w];
            let d = &mut out[plane * oh * ow..(plane + 1) * oh * ow];
            for y in 0..oh {
                for x in 0..ow {
                    d[y * ow + x] = s[(y / 2) * w + x / 2];
                }
            }
        }
        Tensor::from_op(out, vec![n, c, oh, ow], Op::Upsample2x(self.clone()))
    }

    /// 2x2 average pooling of an NCHW tensor with even spatial size.
    pub fn avg_pool2x(&self) -> Tensor {
        let (n, c, h, w) = self.dims4();
        assert!(h % 2 == 0 && w % 2 == 0, "avg_pool2x needs even sides, got {h}x{w}");
        let (oh, ow) = (h / 2, w / 2);
        let src = self.data();
        let mut out = vec![0.0; n * c * oh * ow];
        for plane in 0..n * c {
            let s = &src[plane * h * w..(plane + 1) * h * w];
            let d = &mut out[plane * oh * ow..(plane + 1) * oh * ow];
            for y in 0..oh {
                for x in 0..ow {
                    let o = 2 * y * w + 2 * x;
                    d[y * ow + x] = 0.25 * (s[o] + s[o + 1] + s[o + w] + s[o + w + 1]);
                }
            }
        }
        Tensor::from_op(out, vec![n, c, oh, ow], Op::AvgPool2x(self.clone()))
    }

    pub fn concat(tensors: &[Tensor], axis: usize) -> Tensor {
        assert!(!tensors.is_empty());
        let first = tensors[0].shape();
        let mut shape = first.to_vec();
        shape[axis] = 0;
        for t in tensors {
            assert_eq!(t.rank(), first.len());
            for (d, (&a, &b)) in t.shape().iter().zip(first).enumerate() {
                assert!(d == axis || a == b, "concat shape mismatch {:?} vs {:?}", t.shape(), first);
            }
            shape[axis] += t.shape()[axis];
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(numel(&shape));
        for o in 0..outer {
            for t in tensors {
                let len = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * len..(o + 1) * len]);
            }
        }
        Tensor::from_op(data, shape, Op::Concat(tensors.to_vec(), axis))
    }

    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Tensor {
        let shape = self.shape();
        assert!(start + len <= shape[axis], "narrow out of range");
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let total = shape[axis];
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let s = (o * total + start) * inner;
            data.extend_from_slice(&self.data()[s..s + len * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        Tensor::from_op(data, out_shape, Op::Narrow(self.clone(), axis, start))
    }

    /// Per-sample, per-channel normalization over the spatial axes of NCHW.
    pub fn instance_norm(&self, eps: f32) -> Tensor {
        let (n, c, h, w) = self.dims4();
        let hw = h * w;
        let x = self.data();
        let mut out = vec![0.0; x.len()];
        let mut inv_std = Vec::with_capacity(n * c);
        for plane in 0..n * c {
            let xs = &x[plane * hw..(plane + 1) * hw];
            let mean: f64 = xs.iter().map(|&v| v as f64).sum::<f64>() / hw as f64;
            let var: f64 = xs.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / hw as f64;
            let s = 1.0 / (var + eps as f64).sqrt();
            inv_std.push(s as f32);
            for i in 0..hw {
                out[plane * hw + i] = ((xs[i] as f64 - mean) * s) as f32;
            }
        }
        Tensor::from_op(
            out,
            vec![n, c, h, w],
            Op::InstanceNorm {
                input: self.clone(),
                inv_std,
            },
        )
    }
}
