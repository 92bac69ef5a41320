use crate::ops::gemm;
use crate::tensor::Tensor;

fn out_size(input: usize, kernel: usize, pad: usize) -> usize {
    input + 2 * pad + 1 - kernel
}

/// Unfolds one CHW image into a `[c*kh*kw, oh*ow]` column matrix.
fn im2col(x: &[f32], c: usize, h: usize, w: usize, kh: usize, kw: usize, pad: usize, col: &mut [f32]) {
    let (oh, ow) = (out_size(h, kh, pad), out_size(w, kw, pad));
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let dst = &mut col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = oy as isize + ky as isize - pad as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        line.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = ox as isize + kx as isize - pad as isize;
                        *v = if ix < 0 || ix >= w as isize { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into a CHW buffer.
fn col2im(col: &[f32], c: usize, h: usize, w: usize, kh: usize, kw: usize, pad: usize, x: &mut [f32]) {
    let (oh, ow) = (out_size(h, kh, pad), out_size(w, kw, pad));
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let src = &col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..ow {
                        let ix = ox as isize + kx as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward(input: &Tensor, weight: &Tensor, pad: usize) -> (Vec<f32>, Vec<usize>) {
    let (n, c, h, w) = input.dims4();
    let (o, wc, kh, kw) = weight.dims4();
    assert_eq!(c, wc, "conv2d: input has {c} channels, weight expects {wc}");
    let (oh, ow) = (out_size(h, kh, pad), out_size(w, kw, pad));
    let ckk = c * kh * kw;
    let ohw = oh * ow;
    let mut out = vec![0.0; n * o * ohw];
    let pointwise = kh == 1 && kw == 1 && pad == 0;
    let mut col = if pointwise { Vec::new() } else { vec![0.0; ckk * ohw] };
    let x = input.data();
    for b in 0..n {
        let xs = &x[b * c * h * w..(b + 1) * c * h * w];
        let cols: &[f32] = if pointwise {
            xs
        } else {
            im2col(xs, c, h, w, kh, kw, pad, &mut col);
            &col
        };
        gemm(o, ckk, ohw, weight.data(), ckk, 1, cols, ohw, 1, &mut out[b * o * ohw..(b + 1) * o * ohw], ohw, 0.0);
    }
    (out, vec![n, o, oh, ow])
}

pub(crate) fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    pad: usize,
    g: &[f32],
    want_input: bool,
    want_weight: bool,
) -> (Option<Vec<f32>>, Option<Vec<f32>>) {
    let (n, c, h, w) = input.dims4();
    let (o, _, kh, kw) = weight.dims4();
    let (oh, ow) = (out_size(h, kh, pad), out_size(w, kw, pad));
    let ckk = c * kh * kw;
    let ohw = oh * ow;
    let pointwise = kh == 1 && kw == 1 && pad == 0;
    let x = input.data();
    let mut gw = want_weight.then(|| vec![0.0; o * ckk]);
    let mut gi = want_input.then(|| vec![0.0; n * c * h * w]);
    let mut col = if pointwise { Vec::new() } else { vec![0.0; ckk * ohw] };
    let mut gcol = if pointwise || !want_input { Vec::new() } else { vec![0.0; ckk * ohw] };
    for b in 0..n {
        let gs = &g[b * o * ohw..(b + 1) * o * ohw];
        if let Some(gw) = gw.as_mut() {
            let xs = &x[b * c * h * w..(b + 1) * c * h * w];
            let cols: &[f32] = if pointwise {
                xs
            } else {
                im2col(xs, c, h, w, kh, kw, pad, &mut col);
                &col
            };
            // gw[o, ckk] += g[o, ohw] * cols^T
            gemm(o, ohw, ckk, gs, ohw, 1, cols, 1, ohw, gw, ckk, 1.0);
        }
        if let Some(gi) = gi.as_mut() {
            let dst = &mut gi[b * c * h * w..(b + 1) * c * h * w];
            if pointwise {
                // dst[c, hw] = W^T[c, o] * g[o, hw]
                gemm(c, o, ohw, weight.data(), 1, ckk, gs, ohw, 1, dst, ohw, 0.0);
            } else {
                gemm(ckk, o, ohw, weight.data(), 1, ckk, gs, ohw, 1, &mut gcol, ohw, 0.0);
                col2im(&gcol, c, h, w, kh, kw, pad, dst);
            }
        }
    }
    (gi, gw)
}
