//! Color transfer, texture mixing and mask-guided painting.

pub mod color;
pub mod guided;
pub mod mixing;

use crate::codec::ALIGNMENT;
use crate::resample::{pad_reflect, Pad};

/// Applies `reduce` to every `f×f` block of a row-major `w×h` map, row by
/// row. Trailing pixels that do not fill a whole block are ignored.
pub(crate) fn blocks<T: Copy, U>(values: &[T], w: usize, h: usize, f: usize, mut reduce: impl FnMut(&[T]) -> U) -> Vec<U> {
    let (bw, bh) = (w / f, h / f);
    let mut block = Vec::with_capacity(f * f);
    let mut out = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            block.clear();
            for y in by * f..(by + 1) * f {
                block.extend_from_slice(&values[y * w + bx * f..y * w + (bx + 1) * f]);
            }
            out.push(reduce(&block));
        }
    }
    out
}

/// Per-cell values of a level-resolution map on the feature grid of `layer`
/// with downsample `factor`, after the same alignment padding the pipeline
/// applies to images. Cell order matches flattened features.
pub(crate) fn feature_cells<T: Copy, U>(level: &[T], w: usize, h: usize, factor: usize, reduce: impl FnMut(&[T]) -> U) -> Vec<U> {
    let pad = Pad::to_multiple(w, h, ALIGNMENT);
    let padded = pad_reflect(level, w, h, pad, 1);
    blocks(&padded, pad.width, pad.height, factor, reduce)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_visit_row_major() {
        let v: Vec<u32> = (0..12).collect();
        // 4×3 map, 2×2 blocks; the last row is dropped
        assert_eq!(blocks(&v, 4, 3, 2, |b| b.to_vec()), vec![vec![0, 1, 4, 5], vec![2, 3, 6, 7]]);
    }

    #[test]
    fn feature_cells_cover_padded_grid() {
        let v: Vec<u32> = (0..20 * 8).collect();
        let cells = feature_cells(&v, 20, 8, 16, |b| b.len());
        // padded to 32×16
        assert_eq!(cells, vec![256, 256]);
    }
}
