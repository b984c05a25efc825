//! Principal-component subspaces for reduced-dimension transport.
//!
//! The basis is always fitted on the target (style) distribution. Both the
//! output and the target are then moved into the subspace, transported
//! there, and the output is mapped back.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{matmul, View};
use crate::tensor::SampleMatrix;

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.9;

/// Eigenvalues below this fraction of the total variance count as zero.
const NEGLIGIBLE: f64 = 1e-10;

/// Mean, leading components and their variance shares.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    input_dims: usize,
    mean: Vec<f32>,
    /// `kept_dims × input_dims`, row-major, rows orthonormal.
    components: Vec<f32>,
    eigenvalues: Vec<f64>,
    variance_fractions: Vec<f64>,
    total_variance: f64,
}

impl PcaBasis {
    pub fn input_dims(&self) -> usize {
        self.input_dims
    }

    pub fn kept_dims(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn components(&self) -> &[f32] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f32] {
        &self.components[i * self.input_dims..(i + 1) * self.input_dims]
    }

    /// Variance along each kept component (descending).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn variance_fractions(&self) -> &[f64] {
        &self.variance_fractions
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Variance not captured by the kept components.
    pub fn discarded_variance(&self) -> f64 {
        (self.total_variance - self.eigenvalues.iter().sum::<f64>()).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    /// Eigendecomposition of the `N×N` covariance.
    Covariance,
    /// Eigendecomposition of the `M×M` Gram matrix, used when samples are
    /// fewer than dimensions.
    Gram,
}

/// Fits a PCA basis keeping the fewest leading components whose cumulative
/// variance reaches `variance_threshold`.
pub fn fit_pca(s: &SampleMatrix, variance_threshold: f64) -> Result<PcaBasis> {
    let route = if s.samples() > s.dims() { Route::Covariance } else { Route::Gram };
    fit_with(s, variance_threshold, route)
}

fn fit_with(s: &SampleMatrix, variance_threshold: f64, route: Route) -> Result<PcaBasis> {
    let (m, n) = (s.samples(), s.dims());
    if m < 2 {
        return Err(Error::InsufficientData(format!("PCA needs at least 2 samples, got {m}")));
    }
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!("variance threshold {variance_threshold} outside (0, 1]")));
    }
    let mean = s.mean();
    let mut centered = Vec::with_capacity(m * n);
    for row in s.rows() {
        centered.extend(row.iter().zip(&mean).map(|(&v, mu)| f64::from(v) - mu));
    }
    let x = View::new(&centered, m, n);
    let denom = (m - 1) as f64;
    let side = if route == Route::Covariance { n } else { m };
    let mut scatter = if route == Route::Covariance { matmul(x.t(), x) } else { matmul(x, x.t()) };
    scatter.iter_mut().for_each(|v| *v /= denom);
    if scatter.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite covariance".into()));
    }
    let total_variance: f64 = (0..side).map(|i| scatter[i * side + i]).sum();

    let eig = SymmetricEigen::new(DMatrix::from_row_slice(side, side, &scatter));
    let mut order: Vec<usize> = (0..side).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let floor = NEGLIGIBLE * total_variance;
    let significant = order.iter().take_while(|&&i| eig.eigenvalues[i] > floor).count();
    let mut kept = significant;
    let mut running = 0.0;
    for (k, &i) in order.iter().take(significant).enumerate() {
        running += eig.eigenvalues[i];
        if running >= variance_threshold * total_variance * (1.0 - 1e-12) {
            kept = k + 1;
            break;
        }
    }
    let kept = kept.max(1);

    let mut components = Vec::with_capacity(kept * n);
    let mut eigenvalues = Vec::with_capacity(kept);
    for &i in order.iter().take(kept) {
        let lambda = eig.eigenvalues[i].max(0.0);
        let column = eig.eigenvectors.column(i);
        let mut v: Vec<f64> = match route {
            Route::Covariance => column.iter().copied().collect(),
            // v = Xᵀu, normalized
            Route::Gram => (0..n).map(|d| (0..m).map(|k| centered[k * n + d] * column[k]).sum()).collect(),
        };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            // only reachable for constant data, where any unit axis will do
            v = (0..n).map(|d| if d == 0 { 1.0 } else { 0.0 }).collect();
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        let pivot = v.iter().enumerate().fold(0, |best, (d, x)| if x.abs() > v[best].abs() { d } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        components.extend(v.iter().map(|x| (x * sign) as f32));
        eigenvalues.push(lambda);
    }
    let variance_fractions = eigenvalues
        .iter()
        .map(|l| if total_variance > 0.0 { l / total_variance } else { 0.0 })
        .collect();
    Ok(PcaBasis {
        input_dims: n,
        mean: mean.iter().map(|&v| v as f32).collect(),
        components,
        eigenvalues,
        variance_fractions,
        total_variance,
    })
}

/// `(m − mean) × componentsᵀ`.
pub fn to_subspace(b: &PcaBasis, m: &SampleMatrix) -> Result<SampleMatrix> {
    if m.dims() != b.input_dims {
        return Err(Error::dim(format!("expected {} dims, got {}", b.input_dims, m.dims())));
    }
    let mut centered = m.data().to_vec();
    for row in centered.chunks_exact_mut(b.input_dims) {
        row.iter_mut().zip(&b.mean).for_each(|(x, mu)| *x -= mu);
    }
    let k = b.kept_dims();
    let data = matmul(
        View::new(&centered, m.samples(), b.input_dims),
        View::new(&b.components, k, b.input_dims).t(),
    );
    SampleMatrix::new(m.samples(), k, data)
}

/// `m × components + mean`.
pub fn from_subspace(b: &PcaBasis, m: &SampleMatrix) -> Result<SampleMatrix> {
    let k = b.kept_dims();
    if m.dims() != k {
        return Err(Error::dim(format!("expected {k} subspace dims, got {}", m.dims())));
    }
    let mut data = matmul(View::new(m.data(), m.samples(), k), View::new(&b.components, k, b.input_dims));
    for row in data.chunks_exact_mut(b.input_dims) {
        row.iter_mut().zip(&b.mean).for_each(|(x, mu)| *x += mu);
    }
    SampleMatrix::new(m.samples(), b.input_dims, data)
}
