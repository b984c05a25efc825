//! Color transfer: luminance anchoring in HSL and transport on raw RGB.

use crate::error::{Error, Result};
use crate::seed::SeedStream;
use crate::sliced_ot::{optimal_transport, optimal_transport_with_content, OtParams};
use crate::tensor::{FeatureTensor, ImageRgb, SampleMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsl {
    /// Degrees in `[0, 360)`; 0 for greys.
    pub hue: f32,
    pub saturation: f32,
    pub lightness: f32,
}

/// Bi-hexcone HSL; inputs are clamped to `[0, 1]`.
pub fn rgb_to_hsl(rgb: [f32; 3]) -> Hsl {
    let [r, g, b] = rgb.map(|v| v.clamp(0.0, 1.0));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let lightness = (max + min) / 2.0;
    let chroma = max - min;
    if chroma <= 0.0 {
        return Hsl { hue: 0.0, saturation: 0.0, lightness };
    }
    let saturation = chroma / (1.0 - (2.0 * lightness - 1.0).abs());
    let sector = if max == r {
        ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    let hue = (sector * 60.0).rem_euclid(360.0);
    Hsl { hue, saturation: saturation.min(1.0), lightness }
}

pub fn hsl_to_rgb(p: Hsl) -> [f32; 3] {
    let s = p.saturation.clamp(0.0, 1.0);
    let l = p.lightness.clamp(0.0, 1.0);
    let chroma = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let sector = p.hue.rem_euclid(360.0) / 60.0;
    let x = chroma * (1.0 - (sector.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match sector as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let m = l - chroma / 2.0;
    [r + m, g + m, b + m]
}

/// Hue and saturation from `content`, lightness from `stylized`.
pub fn luminance_transfer(content: &ImageRgb, stylized: &ImageRgb) -> Result<ImageRgb> {
    if content.dims() != stylized.dims() {
        return Err(Error::dim(format!("content {:?} vs stylized {:?}", content.dims(), stylized.dims())));
    }
    Ok(ImageRgb::from_fn(content.width(), content.height(), |x, y| {
        let c = rgb_to_hsl(content.pixel(x, y));
        let s = rgb_to_hsl(stylized.pixel(x, y));
        hsl_to_rgb(Hsl { lightness: s.lightness, ..c })
    }))
}

/// Settings for RGB-space transport.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorConfig {
    pub global_passes: usize,
    pub bins: usize,
    pub content_strength: f32,
    pub seed: u64,
}

impl Default for ColorConfig {
    fn default() -> Self {
        Self { global_passes: 5, bins: crate::hist::DEFAULT_BINS, content_strength: 0.5, seed: 0 }
    }
}

fn samples(img: &ImageRgb) -> SampleMatrix {
    FeatureTensor::from_image(img).flatten()
}

fn to_image(m: SampleMatrix, like: &ImageRgb) -> Result<ImageRgb> {
    ImageRgb::new(like.width(), like.height(), m.data().to_vec())
}

/// Global passes of RGB transport of `start` toward `palette`, blended
/// toward `anchor` after every slice when one is given.
fn rgb_transport(start: &ImageRgb, palette: &ImageRgb, anchor: Option<&ImageRgb>, cfg: &ColorConfig) -> Result<ImageRgb> {
    let params = OtParams {
        global_passes: cfg.global_passes,
        bins: cfg.bins,
        seed: cfg.seed,
        content_strength: if anchor.is_some() { cfg.content_strength } else { 0.0 },
    };
    params.validate()?;
    let s = samples(palette);
    let c = anchor.map(samples);
    let seeds = SeedStream::new(cfg.seed).named("color", 0);
    let mut o = samples(start);
    for pass in 0..cfg.global_passes {
        let visit = seeds.child(pass as u64);
        o = match &c {
            Some(c) => optimal_transport_with_content(&o, &s, c, cfg.global_passes, &params, &visit)?,
            None => optimal_transport(&o, &s, cfg.global_passes, &params, &visit)?,
        };
    }
    if !o.is_finite() {
        return Err(Error::Numeric("non-finite colors".into()));
    }
    to_image(o, start)
}

/// Moves the RGB distribution of `stylized` onto that of `content`.
pub fn color_transfer_global(stylized: &ImageRgb, content: &ImageRgb, cfg: &ColorConfig) -> Result<ImageRgb> {
    rgb_transport(stylized, content, None, cfg)
}

/// RGB transport of `stylized` toward the content palette, anchored to the
/// luminance-transfer image so colors stay tied to their regions.
pub fn color_transfer_combined(stylized: &ImageRgb, content: &ImageRgb, cfg: &ColorConfig) -> Result<ImageRgb> {
    if content.dims() != stylized.dims() {
        return Err(Error::dim(format!("content {:?} vs stylized {:?}", content.dims(), stylized.dims())));
    }
    let anchor = luminance_transfer(content, stylized)?;
    rgb_transport(stylized, content, Some(&anchor), cfg)
}
