//! Image ↔ feature codecs.
//!
//! Two implementations share one interface: a VGG-19 auto-encoder driven by
//! archived weights, and an exact multi-band pyramid that needs no weights.

pub mod archive;
pub mod ops;
pub mod pyramid;
pub mod vgg;

pub use archive::{ArchiveMetadata, LayerManifest, Preprocessing, Tensor, WeightArchive};
pub use vgg::VggCodec;

use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, ImageRgb};

/// Number of target layers; layer 5 is the deepest.
pub const LAYERS: usize = 5;

/// Image sides must be multiples of this for every layer to round-trip.
pub const ALIGNMENT: usize = 1 << (LAYERS - 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecLayer {
    pub index: usize,
    pub downsample_factor: usize,
    pub channels: usize,
}

impl CodecLayer {
    fn new(index: usize, channels: usize) -> Self {
        Self { index, downsample_factor: 1 << (index - 1), channels }
    }
}

fn check_index(index: usize) -> Result<()> {
    if (1..=LAYERS).contains(&index) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("codec layer {index} outside 1..{LAYERS}")))
    }
}

pub trait FeatureCodec: Send + Sync {
    /// Short identifier recorded in run manifests.
    fn identity(&self) -> String;

    fn layer(&self, index: usize) -> Result<CodecLayer>;

    fn encode(&self, img: &ImageRgb, layer: usize) -> Result<FeatureTensor>;

    fn decode(&self, features: &FeatureTensor, layer: usize) -> Result<ImageRgb>;
}

/// The exact band codec of [`pyramid`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PyramidCodec;

impl FeatureCodec for PyramidCodec {
    fn identity(&self) -> String {
        "pyramid".into()
    }

    fn layer(&self, index: usize) -> Result<CodecLayer> {
        check_index(index)?;
        Ok(CodecLayer::new(index, pyramid::channels(index)))
    }

    fn encode(&self, img: &ImageRgb, layer: usize) -> Result<FeatureTensor> {
        pyramid::encode(img, layer)
    }

    fn decode(&self, features: &FeatureTensor, layer: usize) -> Result<ImageRgb> {
        pyramid::decode(features, layer)
    }
}

impl FeatureCodec for VggCodec {
    fn identity(&self) -> String {
        "vgg19".into()
    }

    fn layer(&self, index: usize) -> Result<CodecLayer> {
        check_index(index)?;
        Ok(CodecLayer::new(index, vgg::CHANNELS[index - 1]))
    }

    fn encode(&self, img: &ImageRgb, layer: usize) -> Result<FeatureTensor> {
        VggCodec::encode(self, img, layer)
    }

    fn decode(&self, features: &FeatureTensor, layer: usize) -> Result<ImageRgb> {
        VggCodec::decode(self, features, layer)
    }
}
