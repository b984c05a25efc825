//! Sliced optimal transport between N-dimensional sample sets.
//!
//! One *slice* rotates both distributions by a random orthonormal basis,
//! matches every 1-D marginal of the output to the target's, and rotates
//! back. Iterating over many random bases moves the whole joint
//! distribution, not only the axis-aligned marginals.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hist::{match_histogram, DEFAULT_BINS};
use crate::linalg::{dot, matmul, transpose, View};
use crate::seed::SeedStream;
use crate::tensor::SampleMatrix;

/// `N×N` rotation; column `j` is the `j`-th projection direction.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    dims: usize,
    matrix: Vec<f32>,
}

impl OrthonormalBasis {
    pub fn identity(dims: usize) -> Self {
        let mut matrix = vec![0.0; dims * dims];
        (0..dims).for_each(|i| matrix[i * dims + i] = 1.0);
        Self { dims, matrix }
    }

    /// Wraps a row-major matrix, checking `B·Bᵀ = I` within `1e-4`.
    pub fn from_matrix(dims: usize, matrix: Vec<f32>) -> Result<Self> {
        if matrix.len() != dims * dims {
            return Err(Error::dim(format!("basis needs {} entries", dims * dims)));
        }
        let basis = Self { dims, matrix };
        if basis.orthonormality_error() > 1e-4 {
            return Err(Error::Numeric("matrix is not orthonormal".into()));
        }
        Ok(basis)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Row-major entries.
    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    /// Largest absolute entry of `B·Bᵀ − I`.
    pub fn orthonormality_error(&self) -> f32 {
        let n = self.dims;
        let v = View::new(&self.matrix, n, n);
        let g = matmul(v, v.t());
        g.iter()
            .enumerate()
            .map(|(i, &x)| (x - if i / n == i % n { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f32::max)
    }

    fn view(&self) -> View<'_> {
        View::new(&self.matrix, self.dims, self.dims)
    }
}

const GS_LEAF: usize = 16;

/// Draws a random rotation: i.i.d. standard normals orthonormalized column by
/// column (recursive block classical Gram–Schmidt, each projection applied
/// twice), then each column's sign flipped so the diagonal is non-negative.
pub fn random_basis<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<OrthonormalBasis> {
    if n == 0 {
        return Err(Error::dim("basis of dimension 0"));
    }
    // row j of `q` holds column j of the basis
    let mut q: Vec<f32> = (0..n * n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    orthonormalize_rows(&mut q, n, 0, n)?;
    Ok(OrthonormalBasis { dims: n, matrix: transpose(&q, n, n) })
}

/// Orthonormalizes rows `lo..hi` among themselves. They must already be
/// orthogonal to rows `0..lo`.
fn orthonormalize_rows(q: &mut [f32], n: usize, lo: usize, hi: usize) -> Result<()> {
    if hi - lo <= GS_LEAF {
        for j in lo..hi {
            let (head, tail) = q.split_at_mut(j * n);
            let v = &mut tail[..n];
            for _ in 0..2 {
                for i in lo..j {
                    let qi = &head[i * n..(i + 1) * n];
                    let c = dot(qi, v);
                    v.iter_mut().zip(qi).for_each(|(x, &y)| *x -= c * y);
                }
            }
            let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
            if !(norm > 1e-6) {
                return Err(Error::Numeric("degenerate random basis".into()));
            }
            let scale = if v[j] < 0.0 { -norm } else { norm };
            v.iter_mut().for_each(|x| *x = (f64::from(*x) / scale) as f32);
        }
        return Ok(());
    }
    let mid = lo + (hi - lo) / 2;
    orthonormalize_rows(q, n, lo, mid)?;
    for _ in 0..2 {
        let (done, rest) = q.split_at_mut(mid * n);
        let left = View::new(&done[lo * n..], mid - lo, n);
        let right = &mut rest[..(hi - mid) * n];
        let coeffs = matmul(View::new(right, hi - mid, n), left.t());
        let correction = matmul(View::new(&coeffs, hi - mid, mid - lo), left);
        right.iter_mut().zip(&correction).for_each(|(x, c)| *x -= c);
    }
    orthonormalize_rows(q, n, mid, hi)
}

fn check_dims(basis: &OrthonormalBasis, m: &SampleMatrix) -> Result<()> {
    if m.dims() != basis.dims {
        return Err(Error::dim(format!("samples have {} dims, basis {}", m.dims(), basis.dims)));
    }
    Ok(())
}

/// Rotates every row into the basis: `m × B`.
pub fn project(basis: &OrthonormalBasis, m: &SampleMatrix) -> Result<SampleMatrix> {
    check_dims(basis, m)?;
    let data = matmul(View::new(m.data(), m.samples(), m.dims()), basis.view());
    SampleMatrix::new(m.samples(), m.dims(), data)
}

/// Inverse of [`project`]: `m × Bᵀ`.
pub fn deproject(basis: &OrthonormalBasis, m: &SampleMatrix) -> Result<SampleMatrix> {
    check_dims(basis, m)?;
    let data = matmul(View::new(m.data(), m.samples(), m.dims()), basis.view().t());
    SampleMatrix::new(m.samples(), m.dims(), data)
}

fn check_pair(o: &SampleMatrix, s: &SampleMatrix) -> Result<()> {
    if o.dims() != s.dims() {
        return Err(Error::dim(format!("output has {} dims, target {}", o.dims(), s.dims())));
    }
    if o.samples() == 0 {
        return Err(Error::EmptyDistribution("output samples"));
    }
    if s.samples() == 0 {
        return Err(Error::EmptyDistribution("target samples"));
    }
    Ok(())
}

/// Matches each column of `o` to the same column of `s`, independently.
pub fn match_slice(o: &SampleMatrix, s: &SampleMatrix, bins: usize) -> Result<SampleMatrix> {
    check_pair(o, s)?;
    let n = o.dims();
    let ot = transpose(o.data(), o.samples(), n);
    let st = transpose(s.data(), s.samples(), n);
    let matched = match_columns(&ot, o.samples(), &st, s.samples(), n, bins)?;
    SampleMatrix::new(o.samples(), n, transpose(&matched, n, o.samples()))
}

/// Column-major matching: `ot` is `n × mo`, `st` is `n × ms`.
fn match_columns(ot: &[f32], mo: usize, st: &[f32], ms: usize, n: usize, bins: usize) -> Result<Vec<f32>> {
    let cols: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|d| match_histogram(&ot[d * mo..(d + 1) * mo], &st[d * ms..(d + 1) * ms], bins))
        .collect::<Result<_>>()?;
    Ok(cols.concat())
}

/// Settings for one transport call.
#[derive(Debug, Clone, PartialEq)]
pub struct OtParams {
    pub global_passes: usize,
    pub bins: usize,
    pub seed: u64,
    /// Weight pulling the output toward a content distribution after every
    /// slice; `0` disables content matching.
    pub content_strength: f32,
}

impl Default for OtParams {
    fn default() -> Self {
        Self { global_passes: 5, bins: DEFAULT_BINS, seed: 0, content_strength: 0.0 }
    }
}

impl OtParams {
    pub fn validate(&self) -> Result<()> {
        if self.global_passes == 0 {
            return Err(Error::InvalidParameter("global_passes must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::InvalidParameter("bins must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.content_strength) {
            return Err(Error::InvalidParameter(format!(
                "content_strength {} outside [0, 1]",
                self.content_strength
            )));
        }
        Ok(())
    }

    pub fn root_seeds(&self) -> SeedStream {
        SeedStream::new(self.seed)
    }
}

/// Slices per call when the total budget of `dims` slices is spread over
/// `passes` global passes.
pub fn slice_count(dims: usize, passes: usize) -> usize {
    (dims / passes.max(1)).max(1)
}

/// Transports `o` toward `s` with [`slice_count`]`(N, passes)` random slices.
///
/// Slice `k` draws its basis from `seeds.child(k)`. The target is only read.
pub fn optimal_transport(
    o: &SampleMatrix,
    s: &SampleMatrix,
    passes: usize,
    params: &OtParams,
    seeds: &SeedStream,
) -> Result<SampleMatrix> {
    transport(o, s, None, slice_count(o.dims(), passes), params, seeds, None)
}

/// Like [`optimal_transport`], but after every slice the output is blended
/// toward `content` with `params.content_strength`.
pub fn optimal_transport_with_content(
    o: &SampleMatrix,
    s: &SampleMatrix,
    content: &SampleMatrix,
    passes: usize,
    params: &OtParams,
    seeds: &SeedStream,
) -> Result<SampleMatrix> {
    transport(o, s, Some(content), slice_count(o.dims(), passes), params, seeds, None)
}

/// Runs exactly `slices` slices and reports the output after each one.
pub fn optimal_transport_observed(
    o: &SampleMatrix,
    s: &SampleMatrix,
    content: Option<&SampleMatrix>,
    slices: usize,
    params: &OtParams,
    seeds: &SeedStream,
    observer: &mut dyn FnMut(usize, &SampleMatrix),
) -> Result<SampleMatrix> {
    transport(o, s, content, slices, params, seeds, Some(observer))
}

fn transport(
    o: &SampleMatrix,
    s: &SampleMatrix,
    content: Option<&SampleMatrix>,
    slices: usize,
    params: &OtParams,
    seeds: &SeedStream,
    mut observer: Option<&mut dyn FnMut(usize, &SampleMatrix)>,
) -> Result<SampleMatrix> {
    params.validate()?;
    check_pair(o, s)?;
    let n = o.dims();
    let (mo, ms) = (o.samples(), s.samples());
    let strength = params.content_strength;
    let content_t = match content {
        Some(c) if strength > 0.0 => {
            if c.samples() != mo || c.dims() != n {
                return Err(Error::dim("content must have the output's shape"));
            }
            Some(transpose(c.data(), mo, n))
        }
        _ => None,
    };

    let mut ot = transpose(o.data(), mo, n);
    let st = transpose(s.data(), ms, n);
    for k in 0..slices {
        if ms == 1 {
            // every marginal of a single point is constant, so any basis maps
            // all of `o` onto that point
            ot.chunks_exact_mut(mo).zip(&st).for_each(|(col, &v)| col.fill(v));
        } else {
            let basis = random_basis(n, &mut seeds.child(k as u64).rng())?;
            let bt = basis.view().t();
            let rot_s = matmul(bt, View::new(&st, n, ms));
            let rot_o = matmul(bt, View::new(&ot, n, mo));
            let matched = match_columns(&rot_o, mo, &rot_s, ms, n, params.bins)?;
            ot = matmul(basis.view(), View::new(&matched, n, mo));
        }
        if let Some(ct) = &content_t {
            ot.par_chunks_mut(4096).zip(ct.par_chunks(4096)).for_each(|(x, c)| {
                x.iter_mut().zip(c).for_each(|(x, &c)| *x = *x * (1.0 - strength) + c * strength);
            });
        }
        if let Some(obs) = observer.as_mut() {
            obs(k, &SampleMatrix::new(mo, n, transpose(&ot, n, mo))?);
        }
    }
    SampleMatrix::new(mo, n, transpose(&ot, n, mo))
}

/// Element-wise `o·(1 − strength) + c·strength`, pairing rows by position.
/// Both endpoints reproduce their input exactly.
pub fn blend_content(o: &SampleMatrix, c: &SampleMatrix, strength: f32) -> Result<SampleMatrix> {
    if o.samples() != c.samples() || o.dims() != c.dims() {
        return Err(Error::dim("blend_content needs identical shapes"));
    }
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::InvalidParameter(format!("strength {strength} outside [0, 1]")));
    }
    let data = o.data().iter().zip(c.data()).map(|(&x, &y)| x * (1.0 - strength) + y * strength).collect();
    SampleMatrix::new(o.samples(), o.dims(), data)
}

/// Shifts `c` so its per-dimension mean equals that of `s`.
pub fn align_mean(c: &SampleMatrix, s: &SampleMatrix) -> Result<SampleMatrix> {
    if c.dims() != s.dims() {
        return Err(Error::dim("align_mean needs equal dims"));
    }
    let shift: Vec<f32> = c.mean().iter().zip(s.mean()).map(|(mc, ms)| (ms - mc) as f32).collect();
    let mut out = c.clone();
    out.data_mut().par_chunks_mut(c.dims().max(1)).for_each(|row| {
        row.iter_mut().zip(&shift).for_each(|(x, d)| *x += d);
    });
    Ok(out)
}

/// Mean over `slices` random unit directions of the 1-D 2-Wasserstein
/// distance between the projected samples.
pub fn sliced_wasserstein<R: Rng + ?Sized>(
    a: &SampleMatrix,
    b: &SampleMatrix,
    slices: usize,
    rng: &mut R,
) -> Result<f64> {
    if a.dims() != b.dims() || a.samples() != b.samples() {
        return Err(Error::dim("sliced_wasserstein needs identical shapes"));
    }
    if a.samples() == 0 || slices == 0 {
        return Ok(0.0);
    }
    let n = a.dims();
    let mut dirs = vec![0.0f32; n * slices];
    for j in 0..slices {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|x| *x /= norm);
        for (i, x) in v.into_iter().enumerate() {
            dirs[i * slices + j] = x as f32;
        }
    }
    let m = a.samples();
    let dv = View::new(&dirs, n, slices);
    let pa = transpose(&matmul(View::new(a.data(), m, n), dv), m, slices);
    let pb = transpose(&matmul(View::new(b.data(), m, n), dv), m, slices);
    let total: f64 = (0..slices)
        .into_par_iter()
        .map(|j| {
            let mut x = pa[j * m..(j + 1) * m].to_vec();
            let mut y = pb[j * m..(j + 1) * m].to_vec();
            x.sort_unstable_by(f32::total_cmp);
            y.sort_unstable_by(f32::total_cmp);
            let sq: f64 = x.iter().zip(&y).map(|(p, q)| (f64::from(*p) - f64::from(*q)).powi(2)).sum();
            (sq / m as f64).sqrt()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(total / slices as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hist::match_sorted;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng, m: usize, mean: &[f32], sd: &[f32]) -> SampleMatrix {
        let rows: Vec<Vec<f32>> = (0..m)
            .map(|_| mean.iter().zip(sd).map(|(mu, s)| mu + s * rng.sample::<f32, _>(StandardNormal)).collect())
            .collect();
        SampleMatrix::from_rows(&rows).unwrap()
    }

    fn det(m: &[f32], n: usize) -> f64 {
        let mut a: Vec<f64> = m.iter().map(|&x| f64::from(x)).collect();
        let mut d = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
            if p != c {
                for k in 0..n {
                    a.swap(c * n + k, p * n + k);
                }
                d = -d;
            }
            d *= a[c * n + c];
            for r in c + 1..n {
                let f = a[r * n + c] / a[c * n + c];
                for k in c..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
            }
        }
        d
    }

    #[test]
    fn one_dimensional_basis_is_unit() {
        for seed in 0..5 {
            let b = random_basis(1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(b.matrix(), &[1.0]);
        }
        assert!(matches!(random_basis(0, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::Dimension(_))));
    }

    #[test]
    fn random_basis_is_orthonormal_and_reproducible() {
        for n in [3usize, 8, 33, 100] {
            let b = random_basis(n, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            assert!(b.orthonormality_error() < 1e-4, "n={n}");
            assert!((det(b.matrix(), n).abs() - 1.0).abs() < 1e-3);
            for j in 0..n {
                assert!(b.matrix()[j * n + j] >= 0.0);
            }
            let again = random_basis(n, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            assert_eq!(b, again);
        }
    }

    #[test]
    fn project_with_identity_and_rotation() {
        let m = SampleMatrix::from_rows(&[[1.0f32, 0.0], [0.3, -2.0]]).unwrap();
        assert_eq!(project(&OrthonormalBasis::identity(2), &m).unwrap(), m);

        // columns are the images of the axes: e1 -> e2
        let rot = OrthonormalBasis::from_matrix(2, vec![0.0, 1.0, -1.0, 0.0]).unwrap();
        let e1 = SampleMatrix::from_rows(&[[1.0f32, 0.0]]).unwrap();
        let p = project(&rot, &e1).unwrap();
        assert_eq!(p.row(0), &[0.0, 1.0]);
        assert_eq!(deproject(&rot, &p).unwrap(), e1);

        let wrong = SampleMatrix::zeros(2, 3);
        assert!(matches!(project(&rot, &wrong), Err(Error::Dimension(_))));
    }

    #[test]
    fn projection_round_trip_preserves_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gaussian(&mut rng, 200, &[0.0; 12], &[2.0; 12]);
        let b = random_basis(12, &mut rng).unwrap();
        let p = project(&b, &m).unwrap();
        let back = deproject(&b, &p).unwrap();
        for (x, y) in back.data().iter().zip(m.data()) {
            assert!((x - y).abs() < 1e-4 * (1.0 + y.abs()));
        }
        for k in 0..m.samples() {
            let n0 = dot(m.row(k), m.row(k)).sqrt();
            let n1 = dot(p.row(k), p.row(k)).sqrt();
            assert!((n0 - n1).abs() < 1e-4 * (1.0 + n0));
        }
    }

    #[test]
    fn match_slice_is_per_column_matching() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let o = gaussian(&mut rng, 500, &[0.0, 1.0], &[1.0, 3.0]);
        let s = gaussian(&mut rng, 500, &[5.0, -2.0], &[0.5, 1.0]);
        let out = match_slice(&o, &s, 128).unwrap();
        for d in 0..2 {
            let exact = match_sorted(&o.column(d), &s.column(d)).unwrap();
            let t = s.column(d);
            let w = (t.iter().cloned().fold(f32::MIN, f32::max) - t.iter().cloned().fold(f32::MAX, f32::min)) / 128.0;
            for (g, e) in out.column(d).iter().zip(&exact) {
                assert!((g - e).abs() <= w * 1.0001);
            }
        }
        let one = SampleMatrix::new(500, 1, o.column(0)).unwrap();
        let tgt = SampleMatrix::new(500, 1, s.column(0)).unwrap();
        assert_eq!(
            match_slice(&one, &tgt, 128).unwrap().data(),
            &match_histogram(&o.column(0), &s.column(0), 128).unwrap()[..]
        );
    }

    #[test]
    fn one_dimensional_transport_reduces_to_histogram_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let o = gaussian(&mut rng, 300, &[0.0], &[1.0]);
        let s = gaussian(&mut rng, 300, &[4.0], &[2.0]);
        let out = optimal_transport(&o, &s, 5, &OtParams::default(), &SeedStream::new(1)).unwrap();
        assert_eq!(out.data(), &match_histogram(o.data(), s.data(), 128).unwrap()[..]);
    }

    #[test]
    fn single_point_target_collapses_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let o = gaussian(&mut rng, 50, &[0.0; 4], &[1.0; 4]);
        let s = SampleMatrix::from_rows(&[[1.0f32, -2.0, 3.0, 0.5]]).unwrap();
        let out = optimal_transport(&o, &s, 1, &OtParams::default(), &SeedStream::new(1)).unwrap();
        assert!(out.rows().all(|r| r == s.row(0)));
        // blending after the last slice leaves t + (c − t)·strength
        let c = SampleMatrix::zeros(50, 4);
        let params = OtParams { content_strength: 0.5, ..OtParams::default() };
        let out = optimal_transport_with_content(&o, &s, &c, 1, &params, &SeedStream::new(1)).unwrap();
        assert!(out.rows().all(|r| r == [0.5, -1.0, 1.5, 0.25]));
    }

    #[test]
    fn transport_leaves_target_untouched_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let o = gaussian(&mut rng, 400, &[0.0; 6], &[1.0; 6]);
        let s = gaussian(&mut rng, 300, &[2.0; 6], &[0.5; 6]);
        let s_copy = s.clone();
        let a = optimal_transport(&o, &s, 1, &OtParams::default(), &SeedStream::new(11)).unwrap();
        let b = optimal_transport(&o, &s, 1, &OtParams::default(), &SeedStream::new(11)).unwrap();
        assert_eq!(s, s_copy);
        assert_eq!(a, b);
    }

    #[test]
    fn slice_is_marginal_exact_in_its_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let o = gaussian(&mut rng, 1000, &[0.0; 4], &[1.0; 4]);
        let s = gaussian(&mut rng, 1000, &[1.0, -1.0, 0.0, 3.0], &[0.5, 2.0, 1.0, 1.0]);
        let seeds = SeedStream::new(21);
        let out = optimal_transport_observed(&o, &s, None, 1, &OtParams::default(), &seeds, &mut |_, _| {}).unwrap();
        let basis = random_basis(4, &mut seeds.child(0).rng()).unwrap();
        let po = project(&basis, &out).unwrap();
        let ps = project(&basis, &s).unwrap();
        for d in 0..4 {
            let mut x = po.column(d);
            let mut y = ps.column(d);
            x.sort_by(f32::total_cmp);
            y.sort_by(f32::total_cmp);
            let w = (y[y.len() - 1] - y[0]) / 128.0;
            let worst = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
            // one bin plus f32 rotation round-off
            assert!(worst <= w + 1e-4, "dim {d}: {worst} > {w}");
        }
    }

    #[test]
    fn blend_and_align_arithmetic() {
        let o = SampleMatrix::from_rows(&[[0.0f32, 0.0]]).unwrap();
        let c = SampleMatrix::from_rows(&[[2.0f32, 4.0]]).unwrap();
        assert_eq!(blend_content(&o, &c, 0.5).unwrap().row(0), &[1.0, 2.0]);
        assert_eq!(blend_content(&o, &c, 0.0).unwrap(), o);
        assert_eq!(blend_content(&o, &c, 1.0).unwrap(), c);
        assert!(blend_content(&o, &SampleMatrix::zeros(2, 2), 0.5).is_err());

        let c = SampleMatrix::from_rows(&[[0.0f32, 1.0], [2.0, 1.0]]).unwrap();
        let s = SampleMatrix::from_rows(&[[3.0f32, 5.0], [3.0, 5.0], [3.0, 5.0]]).unwrap();
        let a = align_mean(&c, &s).unwrap();
        assert_eq!(a.row(0), &[2.0, 5.0]);
        assert_eq!(a.row(1), &[4.0, 5.0]);
        assert_eq!(align_mean(&c, &c).unwrap(), c);
    }

    #[test]
    fn align_mean_hits_target_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = gaussian(&mut rng, 300, &[1.0, 2.0, 3.0], &[1.0; 3]);
        let s = gaussian(&mut rng, 200, &[-4.0, 0.5, 9.0], &[2.0; 3]);
        let a = align_mean(&c, &s).unwrap();
        for (x, y) in a.mean().iter().zip(s.mean()) {
            assert!((x - y).abs() < 1e-4);
        }
    }

    #[test]
    fn sliced_wasserstein_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = gaussian(&mut rng, 100, &[0.0; 3], &[1.0; 3]);
        assert!(sliced_wasserstein(&a, &a, 16, &mut rng).unwrap() < 1e-5);
        let zero = SampleMatrix::new(4, 1, vec![0.0; 4]).unwrap();
        let three = SampleMatrix::new(4, 1, vec![3.0; 4]).unwrap();
        let d = sliced_wasserstein(&zero, &three, 8, &mut rng).unwrap();
        assert!((d - 3.0).abs() < 1e-6);
        assert!(sliced_wasserstein(&zero, &SampleMatrix::zeros(3, 1), 8, &mut rng).is_err());
    }
}
