//! Multi-layer, multi-resolution synthesis.
//!
//! Each pyramid level runs `global_passes` sweeps over the codec layers from
//! deepest (5) to shallowest (1). A layer visit encodes the current output,
//! transports its features toward that layer's target distribution, and
//! decodes back to an image. Level outputs are upscaled to seed the next,
//! finer level.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{FeatureCodec, ALIGNMENT, LAYERS};
use crate::error::{Error, Result};
use crate::pca::{fit_pca, from_subspace, to_subspace, PcaBasis, DEFAULT_VARIANCE_THRESHOLD};
use crate::resample::{crop_image, downscale_box, pad_image, upscale_bicubic, Pad};
use crate::seed::SeedStream;
use crate::sliced_ot::{align_mean, optimal_transport, optimal_transport_with_content, slice_count, OtParams};
use crate::tensor::{ImageRgb, SampleMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Texture,
    Style,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub mode: Mode,
    pub output_width: usize,
    pub output_height: usize,
    pub global_passes: usize,
    pub bins: usize,
    /// Pull toward the content features, in `[0, 1]`; must be 0 for textures.
    pub content_strength: f32,
    pub use_pca: bool,
    pub pca_threshold: f64,
    /// Pyramid levels stop before any image side drops below this.
    pub min_pyramid_size: usize,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Texture,
            output_width: 256,
            output_height: 256,
            global_passes: 5,
            bins: crate::hist::DEFAULT_BINS,
            content_strength: 0.0,
            use_pca: true,
            pca_threshold: DEFAULT_VARIANCE_THRESHOLD,
            min_pyramid_size: 256,
            seed: 0,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.output_width < ALIGNMENT || self.output_height < ALIGNMENT {
            return bad(format!(
                "output {}x{} is smaller than {ALIGNMENT} pixels",
                self.output_width, self.output_height
            ));
        }
        if self.global_passes == 0 || self.bins == 0 {
            return bad("global_passes and bins must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.content_strength) {
            return bad(format!("content_strength {} outside [0, 1]", self.content_strength));
        }
        if self.mode == Mode::Texture && self.content_strength != 0.0 {
            return bad("content_strength must be 0 in texture mode".into());
        }
        if !(self.pca_threshold > 0.0 && self.pca_threshold <= 1.0) {
            return bad(format!("pca_threshold {} outside (0, 1]", self.pca_threshold));
        }
        if self.min_pyramid_size == 0 {
            return bad("min_pyramid_size must be at least 1".into());
        }
        Ok(())
    }

    pub(crate) fn ot_params(&self, content_strength: f32) -> OtParams {
        OtParams { global_passes: self.global_passes, bins: self.bins, seed: self.seed, content_strength }
    }
}

/// Content weight at each layer in style mode: full at 5, halved at 4,
/// quartered at 3, absent below.
pub fn content_schedule(layer: usize, strength: f32) -> f32 {
    match layer {
        5 => strength,
        4 => strength / 2.0,
        3 => strength / 4.0,
        _ => 0.0,
    }
}

/// Number of halvings that keep every size at or above `min_size`.
pub fn pyramid_halvings(sizes: &[(usize, usize)], min_size: usize) -> usize {
    let min_size = min_size.max(1);
    let mut k = 0;
    while sizes.iter().all(|&(w, h)| (w >> (k + 1)) >= min_size && (h >> (k + 1)) >= min_size) {
        k += 1;
    }
    k
}

/// `img` box-filtered down by `2^halvings` (integer-halved dims).
pub fn level_image(img: &ImageRgb, halvings: usize) -> Result<ImageRgb> {
    if halvings == 0 {
        return Ok(img.clone());
    }
    downscale_box(img, img.width() >> halvings, img.height() >> halvings)
}

#[derive(Debug, Clone)]
pub struct PyramidLevel {
    /// 0 is the coarsest.
    pub level_index: usize,
    pub width: usize,
    pub height: usize,
    pub style_image: ImageRgb,
    pub content_image: Option<ImageRgb>,
}

/// Levels from coarse to fine. Every level's inputs are box-filtered from
/// the full-resolution images rather than from the next finer level.
pub fn build_pyramid(
    style: &ImageRgb,
    content: Option<&ImageRgb>,
    target: (usize, usize),
    min_size: usize,
) -> Result<Vec<PyramidLevel>> {
    let mut sizes = vec![style.dims(), target];
    sizes.extend(content.map(ImageRgb::dims));
    if sizes.iter().any(|&(w, h)| w == 0 || h == 0) {
        return Err(Error::Size("pyramid inputs must be non-empty".into()));
    }
    let halvings = pyramid_halvings(&sizes, min_size);
    (0..=halvings)
        .map(|level_index| {
            let k = halvings - level_index;
            Ok(PyramidLevel {
                level_index,
                width: target.0 >> k,
                height: target.1 >> k,
                style_image: level_image(style, k)?,
                content_image: content.map(|c| level_image(c, k)).transpose()?,
            })
        })
        .collect()
}

/// Feature samples of `img` at `layer`, with the padding that made the
/// image codec-aligned and the feature grid size.
pub struct Encoded {
    pub samples: SampleMatrix,
    pub grid: (usize, usize),
    pub pad: Pad,
}

pub fn encode_samples(codec: &dyn FeatureCodec, img: &ImageRgb, layer: usize) -> Result<Encoded> {
    let pad = Pad::to_multiple(img.width(), img.height(), ALIGNMENT);
    let features = if pad.is_identity(img.width(), img.height()) {
        codec.encode(img, layer)?
    } else {
        codec.encode(&pad_image(img, pad)?, layer)?
    };
    let grid = (features.height(), features.width());
    Ok(Encoded { samples: features.flatten(), grid, pad })
}

fn decode_samples(
    codec: &dyn FeatureCodec,
    samples: SampleMatrix,
    like: &Encoded,
    layer: usize,
    dims: (usize, usize),
) -> Result<ImageRgb> {
    let img = codec.decode(&samples.unflatten(like.grid.0, like.grid.1)?, layer)?;
    if like.pad.is_identity(dims.0, dims.1) {
        Ok(img)
    } else {
        crop_image(&img, like.pad, dims.0, dims.1)
    }
}

/// Hook applied to the output features before every transport call.
pub type Adjust = Box<dyn Fn(SampleMatrix) -> Result<SampleMatrix> + Send + Sync>;

/// What one layer transports toward at one pyramid level.
pub struct LayerTarget {
    pub target: SampleMatrix,
    /// Row-aligned with the output features; mean-aligned to `target` here.
    pub content: Option<SampleMatrix>,
    pub content_strength: f32,
    pub adjust: Option<Adjust>,
}

impl LayerTarget {
    pub fn plain(target: SampleMatrix) -> Self {
        Self { target, content: None, content_strength: 0.0, adjust: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelInfo {
    pub index: usize,
    /// Halvings between this level and full resolution.
    pub halvings: usize,
    pub width: usize,
    pub height: usize,
}

/// Supplies per-layer targets; called once per (level, layer).
pub trait LevelPlanner {
    fn plan(&mut self, level: &LevelInfo, layer: usize, codec: &dyn FeatureCodec) -> Result<LayerTarget>;
}

/// Targets from a style image and, in style mode, a content image.
pub struct StylePlanner<'a> {
    pub style: &'a ImageRgb,
    pub content: Option<&'a ImageRgb>,
    pub content_strength: f32,
    cache: Option<(usize, ImageRgb, Option<ImageRgb>)>,
}

impl<'a> StylePlanner<'a> {
    pub fn new(style: &'a ImageRgb, content: Option<&'a ImageRgb>, content_strength: f32) -> Self {
        Self { style, content, content_strength, cache: None }
    }
}

impl LevelPlanner for StylePlanner<'_> {
    fn plan(&mut self, level: &LevelInfo, layer: usize, codec: &dyn FeatureCodec) -> Result<LayerTarget> {
        if self.cache.as_ref().map(|c| c.0) != Some(level.halvings) {
            let style = level_image(self.style, level.halvings)?;
            let content = self.content.map(|c| level_image(c, level.halvings)).transpose()?;
            self.cache = Some((level.halvings, style, content));
        }
        let (_, style, content) = self.cache.as_ref().expect("cache filled above");
        let target = encode_samples(codec, style, layer)?.samples;
        let strength = content_schedule(layer, self.content_strength);
        let content = match content {
            Some(c) if strength > 0.0 => Some(encode_samples(codec, c, layer)?.samples),
            _ => None,
        };
        Ok(LayerTarget { target, content, content_strength: strength, adjust: None })
    }
}

/// One layer visit, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerVisit {
    pub level: usize,
    pub pass: usize,
    pub layer: usize,
    pub samples: usize,
    pub dims: usize,
    /// Dimensions transport ran in (after PCA).
    pub kept_dims: usize,
    pub slices: usize,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub image: ImageRgb,
    /// Level sizes from coarse to fine.
    pub levels: Vec<(usize, usize)>,
    pub trace: Vec<LayerVisit>,
    pub level_seconds: Vec<f64>,
}

struct Prepared {
    target: SampleMatrix,
    content: Option<SampleMatrix>,
    strength: f32,
    pca: Option<PcaBasis>,
    adjust: Option<Adjust>,
}

fn prepare(t: LayerTarget, cfg: &SynthesisConfig) -> Result<Prepared> {
    let content = match t.content {
        Some(c) if t.content_strength > 0.0 => Some(align_mean(&c, &t.target)?),
        _ => None,
    };
    let pca = if cfg.use_pca && t.target.samples() >= 2 { Some(fit_pca(&t.target, cfg.pca_threshold)?) } else { None };
    let (target, content) = match &pca {
        Some(b) => (to_subspace(b, &t.target)?, content.map(|c| to_subspace(b, &c)).transpose()?),
        None => (t.target, content),
    };
    Ok(Prepared { target, content, strength: t.content_strength, pca, adjust: t.adjust })
}

/// Seeds for the visit of `layer` during `pass` at a level.
fn visit_seeds(level: &SeedStream, pass: usize, layer: usize) -> SeedStream {
    level.child(pass as u64).child(layer as u64)
}

fn run_prepared(
    layers: &[Prepared],
    init: ImageRgb,
    cfg: &SynthesisConfig,
    codec: &dyn FeatureCodec,
    seeds: &SeedStream,
    level: usize,
    trace: &mut Vec<LayerVisit>,
) -> Result<ImageRgb> {
    let dims = init.dims();
    let mut current = init;
    for pass in 0..cfg.global_passes {
        for layer in (1..=LAYERS).rev() {
            let plan = &layers[layer - 1];
            let encoded = encode_samples(codec, &current, layer)?;
            let mut o = encoded.samples.clone();
            if let Some(adjust) = &plan.adjust {
                o = adjust(o)?;
            }
            if let Some(b) = &plan.pca {
                o = to_subspace(b, &o)?;
            }
            let slices = slice_count(o.dims(), cfg.global_passes);
            let params = cfg.ot_params(plan.strength);
            let visit = visit_seeds(seeds, pass, layer);
            let mut moved = match &plan.content {
                Some(c) => optimal_transport_with_content(&o, &plan.target, c, cfg.global_passes, &params, &visit)?,
                None => optimal_transport(&o, &plan.target, cfg.global_passes, &params, &visit)?,
            };
            trace.push(LayerVisit {
                level,
                pass,
                layer,
                samples: o.samples(),
                dims: encoded.samples.dims(),
                kept_dims: o.dims(),
                slices,
            });
            if let Some(b) = &plan.pca {
                moved = from_subspace(b, &moved)?;
            }
            if !moved.is_finite() {
                return Err(Error::Numeric(format!("non-finite features at level {level}, pass {pass}, layer {layer}")));
            }
            current = decode_samples(codec, moved, &encoded, layer, dims)?;
        }
    }
    Ok(current)
}

/// Runs one pyramid level from `init`, taking targets from `planner`.
pub fn run_level(
    planner: &mut dyn LevelPlanner,
    level: &LevelInfo,
    init: ImageRgb,
    cfg: &SynthesisConfig,
    codec: &dyn FeatureCodec,
    seeds: &SeedStream,
    trace: &mut Vec<LayerVisit>,
) -> Result<ImageRgb> {
    if init.dims() != (level.width, level.height) {
        return Err(Error::dim(format!("init is {:?}, level is {}x{}", init.dims(), level.width, level.height)));
    }
    let layers = (1..=LAYERS)
        .map(|layer| prepare(planner.plan(level, layer, codec)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    run_prepared(&layers, init, cfg, codec, seeds, level.index, trace)
}

/// Single-level synthesis starting from `init`.
pub fn synthesize_level(
    style: &ImageRgb,
    content: Option<&ImageRgb>,
    init: ImageRgb,
    cfg: &SynthesisConfig,
    codec: &dyn FeatureCodec,
    seeds: &SeedStream,
) -> Result<ImageRgb> {
    cfg.validate()?;
    let level = LevelInfo { index: 0, halvings: 0, width: init.width(), height: init.height() };
    let mut planner = StylePlanner::new(style, content, cfg.content_strength);
    run_level(&mut planner, &level, init, cfg, codec, seeds, &mut Vec::new())
}

/// Uniform `[0, 1)` noise per channel.
pub fn noise_image(width: usize, height: usize, seeds: &SeedStream) -> ImageRgb {
    let mut rng = seeds.rng();
    ImageRgb::from_fn(width, height, |_, _| [rng.random(), rng.random(), rng.random()])
}

/// Coarse-to-fine driver shared by every application.
///
/// `sizes` lists the input image sizes that bound the pyramid depth (the
/// output size is always included). The coarsest level starts from `init`
/// box-filtered down, or from seeded noise when `init` is `None`.
pub fn synthesize_with(
    cfg: &SynthesisConfig,
    codec: &dyn FeatureCodec,
    sizes: &[(usize, usize)],
    init: Option<&ImageRgb>,
    planner: &mut dyn LevelPlanner,
) -> Result<Synthesis> {
    cfg.validate()?;
    let out = (cfg.output_width, cfg.output_height);
    let mut all = sizes.to_vec();
    all.push(out);
    let halvings = pyramid_halvings(&all, cfg.min_pyramid_size.max(ALIGNMENT));
    let root = SeedStream::new(cfg.seed);
    let mut trace = Vec::new();
    let mut levels = Vec::new();
    let mut level_seconds = Vec::new();
    let mut current: Option<ImageRgb> = None;
    for index in 0..=halvings {
        let k = halvings - index;
        let info = LevelInfo { index, halvings: k, width: out.0 >> k, height: out.1 >> k };
        let start = Instant::now();
        let init_img = match current.take() {
            Some(prev) => upscale_bicubic(&prev, info.width, info.height)?,
            None => match init {
                Some(img) => downscale_box(img, info.width, info.height)?,
                None => noise_image(info.width, info.height, &root.named("noise", 0)),
            },
        };
        let img = run_level(planner, &info, init_img, cfg, codec, &root.named("level", index as u64), &mut trace)?;
        current = Some(img);
        levels.push((info.width, info.height));
        level_seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(Synthesis { image: current.expect("at least one level"), levels, trace, level_seconds })
}

/// Texture synthesis (`content = None`) or style transfer.
pub fn synthesize(
    style: &ImageRgb,
    content: Option<&ImageRgb>,
    cfg: &SynthesisConfig,
    codec: &dyn FeatureCodec,
) -> Result<Synthesis> {
    cfg.validate()?;
    match (cfg.mode, content) {
        (Mode::Style, None) => return Err(Error::InvalidParameter("style mode needs a content image".into())),
        (Mode::Style, Some(c)) if c.dims() != (cfg.output_width, cfg.output_height) => {
            return Err(Error::InvalidParameter(format!(
                "style mode output {}x{} must match content {:?}",
                cfg.output_width,
                cfg.output_height,
                c.dims()
            )));
        }
        _ => {}
    }
    let content = if cfg.mode == Mode::Style { content } else { None };
    let mut sizes = vec![style.dims()];
    sizes.extend(content.map(ImageRgb::dims));
    let mut planner = StylePlanner::new(style, content, cfg.content_strength);
    synthesize_with(cfg, codec, &sizes, content, &mut planner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::PyramidCodec;

    fn stripes(w: usize, h: usize) -> ImageRgb {
        ImageRgb::from_fn(w, h, |x, y| {
            let t = ((x / 3 + y / 5) % 4) as f32 / 3.0;
            [t, 0.5 * t + 0.2, 1.0 - t]
        })
    }

    fn small_cfg() -> SynthesisConfig {
        SynthesisConfig { output_width: 32, output_height: 32, min_pyramid_size: 16, global_passes: 2, ..Default::default() }
    }

    #[test]
    fn halving_rule() {
        assert_eq!(pyramid_halvings(&[(1024, 1024)], 256), 2);
        assert_eq!(pyramid_halvings(&[(256, 256)], 256), 0);
        assert_eq!(pyramid_halvings(&[(200, 900)], 256), 0);
        assert_eq!(pyramid_halvings(&[(1024, 1024), (300, 1024)], 256), 0);
        assert_eq!(pyramid_halvings(&[(1024, 1024), (600, 1024)], 256), 1);
    }

    #[test]
    fn pyramid_levels_halve() {
        let style = stripes(1024, 1024);
        let levels = build_pyramid(&style, None, (1024, 1024), 256).unwrap();
        let dims: Vec<_> = levels.iter().map(|l| (l.width, l.height)).collect();
        assert_eq!(dims, vec![(256, 256), (512, 512), (1024, 1024)]);
        assert_eq!(levels[0].style_image.dims(), (256, 256));
        let odd = build_pyramid(&stripes(600, 520), None, (1030, 1030), 256).unwrap();
        assert_eq!(odd.iter().map(|l| l.width).collect::<Vec<_>>(), vec![515, 1030]);
        assert_eq!(odd[0].style_image.dims(), (300, 260));
    }

    #[test]
    fn config_validation() {
        let ok = SynthesisConfig::default();
        ok.validate().unwrap();
        for bad in [
            SynthesisConfig { content_strength: 0.5, ..ok.clone() },
            SynthesisConfig { mode: Mode::Style, content_strength: 1.5, ..ok.clone() },
            SynthesisConfig { output_width: 8, ..ok.clone() },
            SynthesisConfig { global_passes: 0, ..ok.clone() },
            SynthesisConfig { pca_threshold: 0.0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn visits_layers_deep_to_shallow_each_pass() {
        let style = stripes(32, 32);
        let result = synthesize(&style, None, &small_cfg(), &PyramidCodec).unwrap();
        assert_eq!(result.levels, vec![(16, 16), (32, 32)]);
        let order: Vec<(usize, usize, usize)> = result.trace.iter().map(|v| (v.level, v.pass, v.layer)).collect();
        let mut expected = Vec::new();
        for level in 0..2 {
            for pass in 0..2 {
                for layer in (1..=5).rev() {
                    expected.push((level, pass, layer));
                }
            }
        }
        assert_eq!(order, expected);
        for v in &result.trace {
            assert_eq!(v.slices, (v.kept_dims / 2).max(1));
        }
    }

    #[test]
    fn deterministic_and_sized() {
        let style = stripes(40, 24);
        let cfg = SynthesisConfig { output_width: 36, output_height: 20, ..small_cfg() };
        let a = synthesize(&style, None, &cfg, &PyramidCodec).unwrap();
        let b = synthesize(&style, None, &cfg, &PyramidCodec).unwrap();
        assert_eq!(a.image.dims(), (36, 20));
        assert_eq!(a.image, b.image);
        let c = synthesize(&style, None, &SynthesisConfig { seed: 1, ..cfg }, &PyramidCodec).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn full_content_strength_reproduces_content() {
        let content = stripes(32, 32);
        let cfg = SynthesisConfig { mode: Mode::Style, content_strength: 1.0, min_pyramid_size: 32, pca_threshold: 1.0, ..small_cfg() };
        let out = synthesize(&content, Some(&content), &cfg, &PyramidCodec).unwrap().image;
        let mse: f32 = out.data().iter().zip(content.data()).map(|(a, b)| (a - b).powi(2)).sum::<f32>() / out.data().len() as f32;
        assert!(mse < 1e-4, "mse {mse}");
    }

    #[test]
    fn style_mode_requires_matching_content() {
        let img = stripes(32, 32);
        let cfg = SynthesisConfig { mode: Mode::Style, content_strength: 0.5, ..small_cfg() };
        assert!(synthesize(&img, None, &cfg, &PyramidCodec).is_err());
        assert!(synthesize(&img, Some(&stripes(48, 32)), &cfg, &PyramidCodec).is_err());
    }
}
