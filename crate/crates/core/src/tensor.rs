//! Dense containers shared by every stage of the engine.
//!
//! All storage is row-major `f32`. A [`FeatureTensor`] of shape `H×W×N` and a
//! [`SampleMatrix`] of shape `(H·W)×N` share the same memory layout, so
//! [`FeatureTensor::flatten`] and [`SampleMatrix::unflatten`] only move the
//! buffer.

use std::path::Path;

use crate::error::{Error, Result};

/// RGB image with channel values nominally in `[0, 1]`.
///
/// Values outside the unit range are kept as-is between pipeline stages and
/// only clamped on export.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::dim(format!(
                "image {width}x{height} needs {} values, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reads an 8-bit PNG, mapping bytes to `v / 255`.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(|v| f32::from(v) / 255.0).collect();
        Self::new(w as usize, h as usize, data)
    }

    /// Clamps to `[0, 1]` and quantizes to 8 bits.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )?;
        Ok(())
    }
}

/// `H×W×N` activation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::dim(format!(
                "tensor {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Channel vector at spatial location `(y, x)`.
    pub fn at(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn at_mut(&mut self, y: usize, x: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reinterprets the grid as one sample row per spatial location.
    pub fn flatten(self) -> SampleMatrix {
        SampleMatrix { samples: self.height * self.width, dims: self.channels, data: self.data }
    }

    /// Views a 3-channel image as a tensor without any value change.
    pub fn from_image(img: &ImageRgb) -> Self {
        Self { height: img.height, width: img.width, channels: 3, data: img.data.clone() }
    }

    /// Exports a 3-channel tensor as an image, clamping to `[0, 1]`.
    pub fn to_image(&self) -> Result<ImageRgb> {
        if self.channels != 3 {
            return Err(Error::dim(format!("expected 3 channels, got {}", self.channels)));
        }
        let data = self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        ImageRgb::new(self.width, self.height, data)
    }
}

/// `M×N` matrix with one sample (row) per spatial location.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    samples: usize,
    dims: usize,
    data: Vec<f32>,
}

impl SampleMatrix {
    pub fn new(samples: usize, dims: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != samples * dims {
            return Err(Error::dim(format!(
                "matrix {samples}x{dims} needs {} values, got {}",
                samples * dims,
                data.len()
            )));
        }
        Ok(Self { samples, dims, data })
    }

    pub fn zeros(samples: usize, dims: usize) -> Self {
        Self { samples, dims, data: vec![0.0; samples * dims] }
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dims);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dims {
                return Err(Error::dim("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { samples: rows.len(), dims, data })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row(&self, k: usize) -> &[f32] {
        &self.data[k * self.dims..(k + 1) * self.dims]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f32] {
        &mut self.data[k * self.dims..(k + 1) * self.dims]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dims.max(1))
    }

    pub fn column(&self, d: usize) -> Vec<f32> {
        self.rows().map(|r| r[d]).collect()
    }

    pub fn set_column(&mut self, d: usize, values: &[f32]) {
        let dims = self.dims;
        for (row, &v) in self.data.chunks_exact_mut(dims).zip(values) {
            row[d] = v;
        }
    }

    /// Per-dimension mean over rows, accumulated in `f64`.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.dims];
        for r in self.rows() {
            for (a, &v) in acc.iter_mut().zip(r) {
                *a += f64::from(v);
            }
        }
        let n = self.samples.max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Restores the spatial grid; `samples` must equal `height × width`.
    pub fn unflatten(self, height: usize, width: usize) -> Result<FeatureTensor> {
        if self.samples != height * width {
            return Err(Error::dim(format!(
                "{} samples cannot fill a {height}x{width} grid",
                self.samples
            )));
        }
        Ok(FeatureTensor { height, width, channels: self.dims, data: self.data })
    }

    /// Selects rows by index, allowing repeats.
    pub fn gather(&self, indices: &[usize]) -> SampleMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dims);
        for &k in indices {
            data.extend_from_slice(self.row(k));
        }
        SampleMatrix { samples: indices.len(), dims: self.dims, data }
    }

    /// Stacks the rows of `other` below the rows of `self`.
    pub fn vstack(&self, other: &SampleMatrix) -> Result<SampleMatrix> {
        if self.dims != other.dims {
            return Err(Error::dim(format!("cannot stack {} and {} dims", self.dims, other.dims)));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(SampleMatrix { samples: self.samples + other.samples, dims: self.dims, data })
    }
}
