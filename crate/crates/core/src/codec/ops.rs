//! Convolutional building blocks on `H×W×C` tensors.

use rayon::prelude::*;

use super::archive::Tensor;
use crate::error::{Error, Result};
use crate::linalg::{matmul, View};
use crate::tensor::FeatureTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Mirror without repeating the edge sample; falls back to the edge on
    /// inputs too small to mirror.
    Reflect,
    Zero,
}

/// Upper bound on im2col scratch per band, in floats.
const SCRATCH: usize = 1 << 21;

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 { -i } else if i >= n { 2 * n - 2 - i } else { i };
    r.clamp(0, n - 1) as usize
}

/// Stride-1 cross-correlation with `kernel` shaped `[out, in, kh, kw]`.
pub fn conv2d(input: &FeatureTensor, kernel: &Tensor, bias: &[f32], padding: Padding) -> Result<FeatureTensor> {
    let &[cout, cin, kh, kw] = kernel.shape() else {
        return Err(Error::dim(format!("kernel must be 4-D, got shape {:?}", kernel.shape())));
    };
    if cin != input.channels() {
        return Err(Error::dim(format!("kernel expects {cin} input channels, tensor has {}", input.channels())));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::dim(format!("kernel {kh}x{kw} must have odd sides")));
    }
    if bias.len() != cout {
        return Err(Error::dim(format!("bias has {} entries for {cout} outputs", bias.len())));
    }
    let (h, w) = (input.height(), input.width());
    let k = cin * kh * kw;
    let weights = View::new(kernel.data(), cout, k).t();
    let mut out = vec![0.0f32; h * w * cout];
    if h * w == 0 || cout == 0 {
        return FeatureTensor::new(h, w, cout, out);
    }
    let band = (SCRATCH / (w * k).max(1)).clamp(1, h);
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let src = input.data();
    out.par_chunks_mut(band * w * cout).enumerate().for_each(|(b, dst)| {
        let y0 = b * band;
        let rows = dst.len() / (w * cout);
        let product = if kh == 1 && kw == 1 {
            matmul(View::new(&src[y0 * w * cin..(y0 + rows) * w * cin], rows * w, k), weights)
        } else {
            let mut cols = vec![0.0f32; rows * w * k];
            for (p, col) in cols.chunks_exact_mut(k).enumerate() {
                let (y, x) = ((y0 + p / w) as isize, (p % w) as isize);
                for dy in 0..kh {
                    let sy = y + dy as isize - ph;
                    let row_ok = sy >= 0 && sy < h as isize;
                    for dx in 0..kw {
                        let sx = x + dx as isize - pw;
                        let inside = row_ok && sx >= 0 && sx < w as isize;
                        let at = if inside {
                            Some((sy as usize, sx as usize))
                        } else if padding == Padding::Reflect {
                            Some((reflect(sy, h), reflect(sx, w)))
                        } else {
                            None
                        };
                        for c in 0..cin {
                            col[c * kh * kw + dy * kw + dx] = at.map_or(0.0, |(yy, xx)| src[(yy * w + xx) * cin + c]);
                        }
                    }
                }
            }
            matmul(View::new(&cols, rows * w, k), weights)
        };
        for (d, p) in dst.chunks_exact_mut(cout).zip(product.chunks_exact(cout)) {
            for ((o, v), bv) in d.iter_mut().zip(p).zip(bias) {
                *o = v + bv;
            }
        }
    });
    FeatureTensor::new(h, w, cout, out)
}

pub fn relu(mut t: FeatureTensor) -> FeatureTensor {
    t.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    t
}

/// 2×2 max pooling with stride 2. Odd trailing rows and columns pool over
/// the partial window, so the output is `ceil(h/2) × ceil(w/2)`.
pub fn max_pool2(t: &FeatureTensor) -> FeatureTensor {
    let (h, w, c) = (t.height(), t.width(), t.channels());
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = FeatureTensor::zeros(oh, ow, c);
    for y in 0..oh {
        for x in 0..ow {
            let dst = out.at_mut(y, x);
            dst.fill(f32::NEG_INFINITY);
            for sy in 2 * y..(2 * y + 2).min(h) {
                for sx in 2 * x..(2 * x + 2).min(w) {
                    for (d, s) in dst.iter_mut().zip(t.at(sy, sx)) {
                        *d = d.max(*s);
                    }
                }
            }
        }
    }
    out
}

pub fn upsample_nn2(t: &FeatureTensor) -> FeatureTensor {
    let (h, w) = (t.height(), t.width());
    let mut out = FeatureTensor::zeros(2 * h, 2 * w, t.channels());
    for y in 0..2 * h {
        for x in 0..2 * w {
            out.at_mut(y, x).copy_from_slice(t.at(y / 2, x / 2));
        }
    }
    out
}
