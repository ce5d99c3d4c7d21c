//! Forward and vector-Jacobian products for the handful of ops the weight
//! extractor uses. Feature maps are `[channels, height, width]`, row-major.

use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;

/// Stride-1 convolution with zero "same" padding; odd kernel sizes only.
///
/// `input`: `[cin, h, w]`, `kernel`: `[cout, cin, kh, kw]`, `bias`: `[cout]`.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Tensor {
    let (cin, h, w) = chw(input);
    let (cout, kcin, kh, kw) = (
        kernel.dims[0],
        kernel.dims[1],
        kernel.dims[2],
        kernel.dims[3],
    );
    debug_assert_eq!(cin, kcin);
    let (ph, pw) = (kh / 2, kw / 2);
    let mut out = vec![0.0; cout * h * w];
    for co in 0..cout {
        let plane = &mut out[co * h * w..(co + 1) * h * w];
        plane.iter_mut().for_each(|v| *v = bias.data[co]);
        for ci in 0..cin {
            let src = &input.data[ci * h * w..(ci + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = kernel.data[((co * cin + ci) * kh + ky) * kw + kx];
                    let (y0, y1) = valid_range(ky, ph, h);
                    let (x0, x1) = valid_range(kx, pw, w);
                    for y in y0..y1 {
                        let sy = y + ky - ph;
                        let dst = &mut plane[y * w + x0..y * w + x1];
                        let s = &src[sy * w + x0 + kx - pw..sy * w + x1 + kx - pw];
                        for (d, &v) in dst.iter_mut().zip(s) {
                            *d += wv * v;
                        }
                    }
                }
            }
        }
    }
    Tensor {
        dims: vec![cout, h, w],
        data: out,
    }
}

/// Output rows/cols `[lo, hi)` for which the tap at offset `t` lands inside.
#[inline]
fn valid_range(t: usize, pad: usize, n: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(t);
    let hi = (n + pad).saturating_sub(t).min(n);
    (lo, hi.max(lo))
}

/// Returns `(d_input, d_kernel, d_bias)`.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (cin, h, w) = chw(input);
    let (cout, _, kh, kw) = (
        kernel.dims[0],
        kernel.dims[1],
        kernel.dims[2],
        kernel.dims[3],
    );
    let (ph, pw) = (kh / 2, kw / 2);
    let mut d_in = vec![0.0; cin * h * w];
    let mut d_k = vec![0.0; kernel.data.len()];
    let mut d_b = vec![0.0; cout];
    for co in 0..cout {
        let g = &grad_out.data[co * h * w..(co + 1) * h * w];
        d_b[co] = g.iter().sum();
        for ci in 0..cin {
            let src = &input.data[ci * h * w..(ci + 1) * h * w];
            let dsrc = &mut d_in[ci * h * w..(ci + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let ki = ((co * cin + ci) * kh + ky) * kw + kx;
                    let wv = kernel.data[ki];
                    let (y0, y1) = valid_range(ky, ph, h);
                    let (x0, x1) = valid_range(kx, pw, w);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = y + ky - ph;
                        let gr = &g[y * w + x0..y * w + x1];
                        let off = sy * w + x0 + kx - pw;
                        let s = &src[off..off + (x1 - x0)];
                        let ds = &mut dsrc[off..off + (x1 - x0)];
                        for ((&gv, &sv), dv) in gr.iter().zip(s).zip(ds.iter_mut()) {
                            acc += gv * sv;
                            *dv += gv * wv;
                        }
                    }
                    d_k[ki] += acc;
                }
            }
        }
    }
    (
        Tensor {
            dims: input.dims.clone(),
            data: d_in,
        },
        Tensor {
            dims: kernel.dims.clone(),
            data: d_k,
        },
        Tensor {
            dims: vec![cout],
            data: d_b,
        },
    )
}

/// Non-overlapping `f`×`f` average pooling; `h` and `w` must be multiples of `f`.
pub fn avg_pool(input: &Tensor, f: usize) -> Tensor {
    let (c, h, w) = chw(input);
    let (oh, ow) = (h / f, w / f);
    let scale = 1.0 / (f * f) as f64;
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[(ch * oh + y / f) * ow + x / f] += input.data[(ch * h + y) * w + x];
            }
        }
    }
    out.iter_mut().for_each(|v| *v *= scale);
    Tensor {
        dims: vec![c, oh, ow],
        data: out,
    }
}

pub fn avg_pool_backward(input_dims: &[usize], f: usize, grad_out: &Tensor) -> Tensor {
    let (c, h, w) = (input_dims[0], input_dims[1], input_dims[2]);
    let (oh, ow) = (h / f, w / f);
    let scale = 1.0 / (f * f) as f64;
    let mut d = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                d[(ch * h + y) * w + x] = grad_out.data[(ch * oh + y / f) * ow + x / f] * scale;
            }
        }
    }
    Tensor {
        dims: input_dims.to_vec(),
        data: d,
    }
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    input.zip_map(grad_out, |x, g| if x > 0.0 { g } else { 0.0 })
}

/// `y = W·x + b` with `W`: `[out, in]`.
pub fn linear(weight: &Tensor, bias: &Tensor, x: &[f64]) -> Vec<f64> {
    let (out, inp) = (weight.dims[0], weight.dims[1]);
    (0..out)
        .map(|o| {
            let row = &weight.data[o * inp..(o + 1) * inp];
            bias.data[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Returns `(d_weight, d_bias, d_x)`.
pub fn linear_backward(weight: &Tensor, x: &[f64], grad_out: &[f64]) -> (Tensor, Tensor, Vec<f64>) {
    let (out, inp) = (weight.dims[0], weight.dims[1]);
    let mut dw = vec![0.0; out * inp];
    let mut dx = vec![0.0; inp];
    for o in 0..out {
        let g = grad_out[o];
        if g == 0.0 {
            continue;
        }
        let row = &weight.data[o * inp..(o + 1) * inp];
        for i in 0..inp {
            dw[o * inp + i] = g * x[i];
            dx[i] += g * row[i];
        }
    }
    (
        Tensor {
            dims: weight.dims.clone(),
            data: dw,
        },
        Tensor {
            dims: vec![out],
            data: grad_out.to_vec(),
        },
        dx,
    )
}

/// `ln(1 + eᶻ)`, overflow-safe.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

/// `d softplus / dz` is the logistic function.
#[inline]
pub fn softplus_backward(z: f64, grad: f64) -> f64 {
    grad * logistic(z)
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[inline]
pub fn logistic_backward(z: f64, grad: f64) -> f64 {
    let s = logistic(z);
    grad * s * (1.0 - s)
}

fn chw(t: &Tensor) -> (usize, usize, usize) {
    debug_assert_eq!(t.dims.len(), 3);
    (t.dims[0], t.dims[1], t.dims[2])
}
