//! Texture mixing through bidirectional feature mappings and a random
//! per-pixel mask.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use super::feature_cells;
use crate::codec::FeatureCodec;
use crate::error::{Error, Result};
use crate::pca::{fit_pca, from_subspace, to_subspace};
use crate::pipeline::{encode_samples, level_image, synthesize_with, LayerTarget, LevelInfo, LevelPlanner, Mode, Synthesis, SynthesisConfig};
use crate::seed::SeedStream;
use crate::sliced_ot::optimal_transport;
use crate::tensor::{ImageRgb, SampleMatrix};

/// Transports `a` onto the distribution of `b`. Row `k` of the result is
/// where row `k` of `a` moved.
///
/// Runs `global_passes` transport calls; with PCA enabled they run in the
/// principal subspace of `b`.
pub fn compute_mapping(a: &SampleMatrix, b: &SampleMatrix, cfg: &SynthesisConfig, seeds: &SeedStream) -> Result<SampleMatrix> {
    if a.dims() != b.dims() {
        return Err(Error::dim(format!("mapping {} dims onto {}", a.dims(), b.dims())));
    }
    let basis = if cfg.use_pca && b.samples() >= 2 { Some(fit_pca(b, cfg.pca_threshold)?) } else { None };
    let (mut o, target) = match &basis {
        Some(p) => (to_subspace(p, a)?, to_subspace(p, b)?),
        None => (a.clone(), b.clone()),
    };
    let params = cfg.ot_params(0.0);
    for pass in 0..cfg.global_passes {
        o = optimal_transport(&o, &target, cfg.global_passes, &params, &seeds.child(pass as u64))?;
    }
    match &basis {
        Some(p) => from_subspace(p, &o),
        None => Ok(o),
    }
}

/// `ceil(mask − i)` restricted to `{0, 1}`.
fn takes_a(mask: f32, ratio: f32) -> bool {
    (mask - ratio).ceil() >= 1.0
}

/// Mixed target: A-side rows whose mask selects A, blended
/// `A·(1−i) + A_B·i`, followed by B-side rows whose mask selects B, blended
/// `B_A·(1−i) + B·i`.
pub fn mix_distributions(
    a: &SampleMatrix,
    a_b: &SampleMatrix,
    b: &SampleMatrix,
    b_a: &SampleMatrix,
    ratio: f32,
    mask_a: &[f32],
    mask_b: &[f32],
) -> Result<SampleMatrix> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!("mixing ratio {ratio} outside [0, 1]")));
    }
    let shape = |m: &SampleMatrix| (m.samples(), m.dims());
    if shape(a) != shape(a_b) || shape(b) != shape(b_a) || a.dims() != b.dims() {
        return Err(Error::dim(format!(
            "mixing A {:?} / A_B {:?} with B {:?} / B_A {:?}",
            shape(a),
            shape(a_b),
            shape(b),
            shape(b_a)
        )));
    }
    if mask_a.len() != a.samples() || mask_b.len() != b.samples() {
        return Err(Error::dim(format!(
            "masks of {} and {} values for {} and {} rows",
            mask_a.len(),
            mask_b.len(),
            a.samples(),
            b.samples()
        )));
    }
    let keep = 1.0 - ratio;
    let mut data = Vec::new();
    for (k, &m) in mask_a.iter().enumerate() {
        if takes_a(m, ratio) {
            data.extend(a.row(k).iter().zip(a_b.row(k)).map(|(&x, &y)| x * keep + y * ratio));
        }
    }
    for (k, &m) in mask_b.iter().enumerate() {
        if !takes_a(m, ratio) {
            data.extend(b_a.row(k).iter().zip(b.row(k)).map(|(&x, &y)| x * keep + y * ratio));
        }
    }
    SampleMatrix::new(data.len() / a.dims().max(1), a.dims(), data)
}

/// Per-pixel interpolation values in `[0, 1]` over the output image.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMask {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl MixingMask {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::dim(format!("{width}x{height} mask needs {} values", width * height)));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("mixing mask value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    /// Uniform values in `(0, 1]`, so ratio 0 always selects A.
    pub fn random(width: usize, height: usize, seeds: &SeedStream) -> Self {
        let mut rng = seeds.rng();
        let values = (0..width * height).map(|_| 1.0 - rng.random::<f32>()).collect();
        Self { width, height, values }
    }

    /// 8-bit greyscale, `v / 255`.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Self::new(w, h, img.into_raw().into_iter().map(|v| f32::from(v) / 255.0).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Mask values on the feature grid of an exemplar of `dims`. The mask is
    /// stretched over the exemplar, then every level pixel and feature cell
    /// takes the value at its top-left corner.
    fn cells(&self, dims: (usize, usize), halvings: usize, factor: usize) -> Vec<f32> {
        let (lw, lh) = (dims.0 >> halvings, dims.1 >> halvings);
        let mut level = Vec::with_capacity(lw * lh);
        for y in 0..lh {
            let my = ((y << halvings) * self.height / dims.1).min(self.height - 1);
            for x in 0..lw {
                let mx = ((x << halvings) * self.width / dims.0).min(self.width - 1);
                level.push(self.values[my * self.width + mx]);
            }
        }
        feature_cells(&level, lw, lh, factor, |b| b[0])
    }
}

/// Two exemplars, the interpolation ratio and an optional fixed mask.
#[derive(Debug, Clone)]
pub struct MixSpec<'a> {
    pub texture_a: &'a ImageRgb,
    pub texture_b: &'a ImageRgb,
    pub ratio: f32,
    /// Generated from the run seed when absent.
    pub mask: Option<MixingMask>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    #[serde(rename = "A_B")]
    AToB,
    #[serde(rename = "B_A")]
    BToA,
}

/// One feature mapping computed while building mixed targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingEvent {
    pub level: usize,
    pub layer: usize,
    pub direction: Direction,
    pub samples: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Mixture {
    pub synthesis: Synthesis,
    pub mappings: Vec<MappingEvent>,
    /// Number of mixed target rows per `(level, layer)` visit plan.
    pub target_rows: Vec<(usize, usize, usize)>,
}

struct MixPlanner<'a> {
    spec: &'a MixSpec<'a>,
    mask: MixingMask,
    cfg: &'a SynthesisConfig,
    root: SeedStream,
    cache: Option<(usize, ImageRgb, ImageRgb)>,
    mappings: Vec<MappingEvent>,
    target_rows: Vec<(usize, usize, usize)>,
}

impl MixPlanner<'_> {
    fn map(&mut self, from: &SampleMatrix, to: &SampleMatrix, level: usize, layer: usize, direction: Direction) -> Result<SampleMatrix> {
        let start = Instant::now();
        let seeds = self.root.named("mapping", level as u64).child(layer as u64).child(direction as u64);
        let mapped = compute_mapping(from, to, self.cfg, &seeds)?;
        self.mappings.push(MappingEvent { level, layer, direction, samples: from.samples(), seconds: start.elapsed().as_secs_f64() });
        Ok(mapped)
    }
}

impl LevelPlanner for MixPlanner<'_> {
    fn plan(&mut self, level: &LevelInfo, layer: usize, codec: &dyn FeatureCodec) -> Result<LayerTarget> {
        if self.cache.as_ref().map(|c| c.0) != Some(level.halvings) {
            let a = level_image(self.spec.texture_a, level.halvings)?;
            let b = level_image(self.spec.texture_b, level.halvings)?;
            self.cache = Some((level.halvings, a, b));
        }
        let (_, a_img, b_img) = self.cache.as_ref().expect("cache filled above");
        let a = encode_samples(codec, a_img, layer)?.samples;
        let b = encode_samples(codec, b_img, layer)?.samples;
        let ratio = self.spec.ratio;
        let factor = codec.layer(layer)?.downsample_factor;
        let mask_a = self.mask.cells(self.spec.texture_a.dims(), level.halvings, factor);
        let mask_b = self.mask.cells(self.spec.texture_b.dims(), level.halvings, factor);
        // a mapping is only computed when a selected row gives it non-zero weight
        let a_b = if ratio > 0.0 && mask_a.iter().any(|&m| takes_a(m, ratio)) {
            self.map(&a, &b, level.index, layer, Direction::AToB)?
        } else {
            a.clone()
        };
        let b_a = if ratio < 1.0 && mask_b.iter().any(|&m| !takes_a(m, ratio)) {
            self.map(&b, &a, level.index, layer, Direction::BToA)?
        } else {
            b.clone()
        };
        let target = mix_distributions(&a, &a_b, &b, &b_a, ratio, &mask_a, &mask_b)?;
        if target.samples() == 0 {
            return Err(Error::EmptyDistribution("mixed target"));
        }
        self.target_rows.push((level.index, layer, target.samples()));
        Ok(LayerTarget::plain(target))
    }
}

/// Synthesizes a texture whose features interpolate between two exemplars.
pub fn synthesize_mixture(spec: &MixSpec<'_>, cfg: &SynthesisConfig, codec: &dyn FeatureCodec) -> Result<Mixture> {
    cfg.validate()?;
    if cfg.mode != Mode::Texture {
        return Err(Error::InvalidParameter("mixing runs in texture mode".into()));
    }
    if !(0.0..=1.0).contains(&spec.ratio) {
        return Err(Error::InvalidParameter(format!("mixing ratio {} outside [0, 1]", spec.ratio)));
    }
    let out = (cfg.output_width, cfg.output_height);
    let root = SeedStream::new(cfg.seed);
    let mask = match &spec.mask {
        Some(m) if (m.width, m.height) != out => {
            return Err(Error::InvalidParameter(format!("mixing mask {}x{} must match output {}x{}", m.width, m.height, out.0, out.1)));
        }
        Some(m) => m.clone(),
        None => MixingMask::random(out.0, out.1, &root.named("mix-mask", 0)),
    };
    let mut planner = MixPlanner { spec, mask, cfg, root, cache: None, mappings: Vec::new(), target_rows: Vec::new() };
    let synthesis = synthesize_with(cfg, codec, &[spec.texture_a.dims(), spec.texture_b.dims()], None, &mut planner)?;
    Ok(Mixture { synthesis, mappings: planner.mappings, target_rows: planner.target_rows })
}
