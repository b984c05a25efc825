//! Row-major dense matrix products.
//!
//! Work is split into fixed-size blocks of output rows or columns, never of
//! the reduction axis, so every output element is accumulated in the same
//! order no matter how many threads run.

use rayon::prelude::*;

const BLOCK: usize = 128;

pub(crate) trait Scalar: Copy + Default + Send + Sync {
    /// `C = A·B` with arbitrary strides.
    ///
    /// # Safety
    /// Same contract as `matrixmultiply::sgemm` with `alpha = 1`, `beta = 0`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize, k: usize, n: usize,
        a: *const Self, rsa: isize, csa: isize,
        b: *const Self, rsb: isize, csb: isize,
        c: *mut Self, rsc: isize, csc: isize,
    );
}

impl Scalar for f32 {
    unsafe fn gemm(
        m: usize, k: usize, n: usize,
        a: *const f32, rsa: isize, csa: isize,
        b: *const f32, rsb: isize, csb: isize,
        c: *mut f32, rsc: isize, csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 0.0, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm(
        m: usize, k: usize, n: usize,
        a: *const f64, rsa: isize, csa: isize,
        b: *const f64, rsb: isize, csb: isize,
        c: *mut f64, rsc: isize, csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 0.0, c, rsc, csc)
    }
}

/// Strided read-only view of a matrix.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, T = f32> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: isize,
    pub col_stride: isize,
}

impl<'a, T> View<'a, T> {
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Self { data, rows, cols, row_stride: cols as isize, col_stride: 1 }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    fn offset(&self, r: usize, c: usize) -> usize {
        (r as isize * self.row_stride + c as isize * self.col_stride) as usize
    }
}

struct SendPtr<T>(*mut T);
unsafe impl<T> Send for SendPtr<T> {}
unsafe impl<T> Sync for SendPtr<T> {}

/// `A × B`, returned row-major.
pub(crate) fn matmul<T: Scalar>(a: View<'_, T>, b: View<'_, T>) -> Vec<T> {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut c = vec![T::default(); m * n];
    if m == 0 || n == 0 {
        return c;
    }
    if k == 0 {
        return c;
    }
    let out = SendPtr(c.as_mut_ptr());
    let out = &out;
    let split_rows = m >= n;
    let blocks = if split_rows { m.div_ceil(BLOCK) } else { n.div_ceil(BLOCK) };
    (0..blocks).into_par_iter().for_each(|blk| {
        let start = blk * BLOCK;
        let (r0, rn, c0, cn) = if split_rows {
            (start, BLOCK.min(m - start), 0, n)
        } else {
            (0, m, start, BLOCK.min(n - start))
        };
        // SAFETY: views are in bounds by construction, and each block writes a
        // disjoint rectangle of `c`.
        unsafe {
            T::gemm(
                rn,
                k,
                cn,
                a.data.as_ptr().add(a.offset(r0, 0)),
                a.row_stride,
                a.col_stride,
                b.data.as_ptr().add(b.offset(0, c0)),
                b.row_stride,
                b.col_stride,
                out.0.add(r0 * n + c0),
                n as isize,
                1,
            );
        }
    });
    c
}

pub(crate) fn transpose<T: Copy + Default>(data: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::default(); data.len()];
    const TILE: usize = 32;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    out[c * rows + r] = data[r * cols + c];
                }
            }
        }
    }
    out
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        for l in 0..8 {
            acc[l] += a[i * 8 + l] * b[i * 8 + l];
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    acc.iter().sum::<f32>() + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f32], m: usize, k: usize, b: &[f32], n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| f64::from(a[i * k + p]) * f64::from(b[p * n + j])).sum();
            }
        }
        c
    }

    fn fill(len: usize, seed: u32) -> Vec<f32> {
        (0..len as u32).map(|i| ((i.wrapping_mul(2654435761) ^ seed) % 1000) as f32 / 500.0 - 1.0).collect()
    }

    #[test]
    fn matches_naive_product() {
        let (m, k, n) = (300, 70, 45);
        let a = fill(m * k, 1);
        let b = fill(k * n, 2);
        let got = matmul(View::new(&a, m, k), View::new(&b, k, n));
        for (g, e) in got.iter().zip(naive(&a, m, k, &b, n)) {
            assert!((f64::from(*g) - e).abs() < 1e-3);
        }
    }

    #[test]
    fn transposed_views() {
        let (m, k, n) = (20, 300, 9);
        let at = fill(k * m, 3);
        let b = fill(k * n, 4);
        let a = transpose(&at, k, m);
        let via_view = matmul(View::new(&at, k, m).t(), View::new(&b, k, n));
        let direct = matmul(View::new(&a, m, k), View::new(&b, k, n));
        assert_eq!(via_view, direct);
    }

    #[test]
    fn result_independent_of_thread_count() {
        let (m, k, n) = (700, 64, 200);
        let a = fill(m * k, 5);
        let b = fill(k * n, 6);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let x = one.install(|| matmul(View::new(&a, m, k), View::new(&b, k, n)));
        let y = many.install(|| matmul(View::new(&a, m, k), View::new(&b, k, n)));
        assert_eq!(x, y);
    }
}
