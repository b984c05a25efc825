//! Weight-free, exactly invertible multi-band codec.
//!
//! Layer `l` applies `l − 1` rounds of a 2×2 Haar split to the image. Each
//! output location covers a `2^(l−1)` square block and stacks, in channel
//! order:
//!
//! - the 3 block averages, i.e. the box-downsampled image;
//! - then each detail band from coarsest to finest, moved into channels by
//!   space-to-depth. A band holds 3 orientations for each of the 3 colors.
//!
//! That gives `3·4^(l−1)` channels. Every coefficient is an average or a
//! half-difference of averages, so all bands stay in pixel units and no
//! scale dominates the feature variance by construction.

use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, ImageRgb};

/// Planar `h×w×c` buffer used between Haar rounds.
struct Grid {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f32>,
}

impl Grid {
    fn at(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.w + x) * self.c;
        &self.data[i..i + self.c]
    }
}

/// One Haar round: `(average, detail)` at half resolution. `detail` has
/// `3·c` channels ordered `[horizontal, vertical, diagonal]` per input channel.
fn split(g: &Grid) -> (Grid, Grid) {
    let (h, w, c) = (g.h / 2, g.w / 2, g.c);
    let mut avg = Vec::with_capacity(h * w * c);
    let mut det = Vec::with_capacity(h * w * c * 3);
    for y in 0..h {
        for x in 0..w {
            let (a, b, cc, d) = (g.at(2 * y, 2 * x), g.at(2 * y, 2 * x + 1), g.at(2 * y + 1, 2 * x), g.at(2 * y + 1, 2 * x + 1));
            for k in 0..c {
                avg.push((a[k] + b[k] + cc[k] + d[k]) * 0.25);
            }
            for k in 0..c {
                det.push((a[k] + b[k] - cc[k] - d[k]) * 0.25);
                det.push((a[k] - b[k] + cc[k] - d[k]) * 0.25);
                det.push((a[k] - b[k] - cc[k] + d[k]) * 0.25);
            }
        }
    }
    (Grid { h, w, c, data: avg }, Grid { h, w, c: 3 * c, data: det })
}

fn merge(avg: &Grid, det: &Grid) -> Grid {
    let (h, w, c) = (avg.h * 2, avg.w * 2, avg.c);
    let mut data = vec![0.0f32; h * w * c];
    for y in 0..avg.h {
        for x in 0..avg.w {
            let (m, d) = (avg.at(y, x), det.at(y, x));
            for k in 0..c {
                let (s, hz, vt, dg) = (m[k], d[3 * k], d[3 * k + 1], d[3 * k + 2]);
                let corners = [
                    (2 * y, 2 * x, s + hz + vt + dg),
                    (2 * y, 2 * x + 1, s + hz - vt - dg),
                    (2 * y + 1, 2 * x, s - hz + vt - dg),
                    (2 * y + 1, 2 * x + 1, s - hz - vt + dg),
                ];
                for (yy, xx, v) in corners {
                    data[(yy * w + xx) * c + k] = v;
                }
            }
        }
    }
    Grid { h, w, c, data }
}

pub fn channels(layer: usize) -> usize {
    3 << (2 * (layer - 1))
}

fn check_layer(layer: usize) -> Result<()> {
    if (1..=5).contains(&layer) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("codec layer {layer} outside 1..5")))
    }
}

pub fn encode(img: &ImageRgb, layer: usize) -> Result<FeatureTensor> {
    check_layer(layer)?;
    let f = 1usize << (layer - 1);
    let (w, h) = img.dims();
    if w % f != 0 || h % f != 0 || w == 0 || h == 0 {
        return Err(Error::Size(format!("{w}x{h} image is not divisible by {f}")));
    }
    let mut current = Grid { h, w, c: 3, data: img.data().to_vec() };
    let mut details = Vec::with_capacity(layer - 1);
    for _ in 1..layer {
        let (avg, det) = split(&current);
        details.push(det);
        current = avg;
    }
    let (oh, ow, n) = (h / f, w / f, channels(layer));
    let mut out = FeatureTensor::zeros(oh, ow, n);
    for y in 0..oh {
        for x in 0..ow {
            let dst = out.at_mut(y, x);
            dst[..3].copy_from_slice(current.at(y, x));
            let mut ch = 3;
            // coarsest band first; band k sits at s×s positions per block
            for det in details.iter().rev() {
                let s = det.h / oh;
                for dy in 0..s {
                    for dx in 0..s {
                        dst[ch..ch + 9].copy_from_slice(det.at(y * s + dy, x * s + dx));
                        ch += 9;
                    }
                }
            }
            debug_assert_eq!(ch, n);
        }
    }
    Ok(out)
}

pub fn decode(features: &FeatureTensor, layer: usize) -> Result<ImageRgb> {
    check_layer(layer)?;
    let n = channels(layer);
    if features.channels() != n {
        return Err(Error::dim(format!("layer {layer} expects {n} channels, got {}", features.channels())));
    }
    let (oh, ow) = (features.height(), features.width());
    let mut current = Grid { h: oh, w: ow, c: 3, data: Vec::with_capacity(oh * ow * 3) };
    for y in 0..oh {
        for x in 0..ow {
            current.data.extend_from_slice(&features.at(y, x)[..3]);
        }
    }
    let mut offset = 3;
    for round in 0..layer - 1 {
        let s = 1usize << round;
        let mut det = Grid { h: oh * s, w: ow * s, c: 9, data: vec![0.0; oh * ow * s * s * 9] };
        for y in 0..oh {
            for x in 0..ow {
                let src = features.at(y, x);
                let mut ch = offset;
                for dy in 0..s {
                    for dx in 0..s {
                        let i = ((y * s + dy) * det.w + x * s + dx) * 9;
                        det.data[i..i + 9].copy_from_slice(&src[ch..ch + 9]);
                        ch += 9;
                    }
                }
            }
        }
        offset += 9 * s * s;
        current = merge(&current, &det);
    }
    ImageRgb::new(current.w, current.h, current.data)
}
