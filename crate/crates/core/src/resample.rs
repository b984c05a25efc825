//! Image resampling, padding and cropping.

use crate::error::{Error, Result};
use crate::tensor::ImageRgb;

/// Area-averaging downscale. Each output pixel is the mean of the source
/// region it covers, with fractional edge weights when sizes do not divide.
pub fn downscale_box(img: &ImageRgb, width: usize, height: usize) -> Result<ImageRgb> {
    let (sw, sh) = img.dims();
    if width == 0 || height == 0 || width > sw || height > sh {
        return Err(Error::dim(format!("cannot box-downscale {sw}x{sh} to {width}x{height}")));
    }
    let xs = coverage(sw, width);
    let ys = coverage(sh, height);
    let mut out = ImageRgb::filled(width, height, [0.0; 3]);
    for (y, yw) in ys.iter().enumerate() {
        for (x, xw) in xs.iter().enumerate() {
            let mut acc = [0.0f64; 3];
            let mut total = 0.0f64;
            for &(sy, wy) in yw {
                for &(sx, wx) in xw {
                    let p = img.pixel(sx, sy);
                    let w = wy * wx;
                    for c in 0..3 {
                        acc[c] += f64::from(p[c]) * w;
                    }
                    total += w;
                }
            }
            out.set_pixel(x, y, acc.map(|v| (v / total) as f32));
        }
    }
    Ok(out)
}

/// For each destination cell, the source indices it overlaps and by how much.
fn coverage(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let step = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (lo, hi) = (i as f64 * step, (i + 1) as f64 * step);
            (lo.floor() as usize..(hi.ceil() as usize).min(src))
                .map(|s| (s, (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect()
}

/// Catmull-Rom kernel (`a = −0.5`).
pub fn catmull_rom(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (A + 2.0) * x.powi(3) - (A + 3.0) * x.powi(2) + 1.0
    } else if x < 2.0 {
        A * x.powi(3) - 5.0 * A * x.powi(2) + 8.0 * A * x - 4.0 * A
    } else {
        0.0
    }
}

/// Per destination index, four `(source index, weight)` taps with clamped edges.
fn taps(src: usize, dst: usize) -> Vec<[(usize, f32); 4]> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = (i as f64 + 0.5) * scale - 0.5;
            let base = pos.floor();
            let frac = pos - base;
            let mut t = [(0usize, 0.0f32); 4];
            for (k, tap) in t.iter_mut().enumerate() {
                let offset = k as f64 - 1.0;
                let idx = (base + offset).clamp(0.0, (src - 1) as f64) as usize;
                *tap = (idx, catmull_rom(frac - offset) as f32);
            }
            t
        })
        .collect()
}

/// Separable Catmull-Rom upscale with clamped edges.
pub fn upscale_bicubic(img: &ImageRgb, width: usize, height: usize) -> Result<ImageRgb> {
    let (sw, sh) = img.dims();
    if width < sw || height < sh {
        return Err(Error::dim(format!("cannot upscale {sw}x{sh} to smaller {width}x{height}")));
    }
    let tx = taps(sw, width);
    let ty = taps(sh, height);
    // horizontal pass into a width × sh buffer
    let mut rows = vec![0.0f32; width * sh * 3];
    for y in 0..sh {
        for (x, t) in tx.iter().enumerate() {
            let mut acc = [0.0f32; 3];
            for &(sx, w) in t {
                let p = img.pixel(sx, y);
                for c in 0..3 {
                    acc[c] += w * p[c];
                }
            }
            rows[(y * width + x) * 3..][..3].copy_from_slice(&acc);
        }
    }
    let mut out = vec![0.0f32; width * height * 3];
    for (y, t) in ty.iter().enumerate() {
        for x in 0..width {
            let mut acc = [0.0f32; 3];
            for &(sy, w) in t {
                let p = &rows[(sy * width + x) * 3..][..3];
                for c in 0..3 {
                    acc[c] += w * p[c];
                }
            }
            out[(y * width + x) * 3..][..3].copy_from_slice(&acc);
        }
    }
    ImageRgb::new(width, height, out)
}

/// Padding that brings each side up to a multiple of `align`, split as
/// evenly as possible with the extra pixel on the trailing edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pad {
    pub left: usize,
    pub top: usize,
    pub width: usize,
    pub height: usize,
}

impl Pad {
    pub fn to_multiple(width: usize, height: usize, align: usize) -> Self {
        let (pw, ph) = (width.next_multiple_of(align) - width, height.next_multiple_of(align) - height);
        Self { left: pw / 2, top: ph / 2, width: width + pw, height: height + ph }
    }

    pub fn is_identity(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

pub(crate) fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    // reflect without repeating the edge, periodic with period 2n−2
    let period = 2 * n - 2;
    let r = i.rem_euclid(period);
    (if r < n { r } else { period - r }) as usize
}

/// Reflects `values` (row-major `width × height`) outward into `pad`.
pub fn pad_reflect<T: Copy>(values: &[T], width: usize, height: usize, pad: Pad, channels: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(pad.width * pad.height * channels);
    for y in 0..pad.height {
        let sy = mirror(y as isize - pad.top as isize, height);
        for x in 0..pad.width {
            let sx = mirror(x as isize - pad.left as isize, width);
            out.extend_from_slice(&values[(sy * width + sx) * channels..][..channels]);
        }
    }
    out
}

pub fn pad_image(img: &ImageRgb, pad: Pad) -> Result<ImageRgb> {
    ImageRgb::new(pad.width, pad.height, pad_reflect(img.data(), img.width(), img.height(), pad, 3))
}

/// Undoes [`pad_image`].
pub fn crop_image(img: &ImageRgb, pad: Pad, width: usize, height: usize) -> Result<ImageRgb> {
    if img.dims() != (pad.width, pad.height) {
        return Err(Error::dim(format!("expected a {}x{} padded image, got {:?}", pad.width, pad.height, img.dims())));
    }
    Ok(ImageRgb::from_fn(width, height, |x, y| img.pixel(x + pad.left, y + pad.top)))
}
