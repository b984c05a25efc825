//! VGG-19 prefix encoder and mirrored decoders driven by an OTWA archive.
//!
//! Tensor naming: the encoder conv `convB_I` is stored as
//! `encoder.convB_I.{weight,bias}`. The decoder for target layer `L` has one
//! conv per encoder conv it inverts, stored as `decoderL.convB_I.{weight,bias}`
//! with input and output channels swapped. All kernels are 3×3.

use super::archive::{LayerManifest, Preprocessing, Tensor, WeightArchive};
use super::ops::{conv2d, max_pool2, relu, upsample_nn2, Padding};
use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, ImageRgb};

pub const KERNEL: usize = 3;

/// Output channels of `reluL_1` for L = 1..5.
pub const CHANNELS: [usize; 5] = [64, 128, 256, 512, 512];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Conv { name: &'static str, cin: usize, cout: usize },
    Pool,
}

const fn conv(name: &'static str, cin: usize, cout: usize) -> Step {
    Step::Conv { name, cin, cout }
}

/// Encoder steps up to `relu5_1`.
const ENCODER: [Step; 17] = [
    conv("conv1_1", 3, 64),
    conv("conv1_2", 64, 64),
    Step::Pool,
    conv("conv2_1", 64, 128),
    conv("conv2_2", 128, 128),
    Step::Pool,
    conv("conv3_1", 128, 256),
    conv("conv3_2", 256, 256),
    conv("conv3_3", 256, 256),
    conv("conv3_4", 256, 256),
    Step::Pool,
    conv("conv4_1", 256, 512),
    conv("conv4_2", 512, 512),
    conv("conv4_3", 512, 512),
    conv("conv4_4", 512, 512),
    Step::Pool,
    conv("conv5_1", 512, 512),
];

/// Steps through `reluL_1`.
fn encoder_steps(layer: usize) -> Vec<Step> {
    let target = ["conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1"][layer - 1];
    let mut steps = Vec::new();
    for step in ENCODER.iter() {
        steps.push(*step);
        if matches!(step, Step::Conv { name, .. } if *name == target) {
            break;
        }
    }
    steps
}

fn check_layer(layer: usize) -> Result<()> {
    if (1..=5).contains(&layer) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("codec layer {layer} outside 1..5")))
    }
}

fn names(prefix: &str, name: &str) -> (String, String) {
    (format!("{prefix}.{name}.weight"), format!("{prefix}.{name}.bias"))
}

/// Every tensor the given target layer needs, with its expected shape.
pub fn required_tensors(layer: usize) -> Vec<(String, Vec<usize>)> {
    let manifest = layer_manifest(layer);
    let shapes = encoder_steps(layer).into_iter().filter_map(|s| match s {
        Step::Conv { cin, cout, .. } => Some((cin, cout)),
        Step::Pool => None,
    });
    let mut out = Vec::new();
    let enc: Vec<_> = shapes.collect();
    for (pair, &(cin, cout)) in manifest.encoder.chunks(2).zip(&enc) {
        out.push((pair[0].clone(), vec![cout, cin, KERNEL, KERNEL]));
        out.push((pair[1].clone(), vec![cout]));
    }
    for (pair, &(cin, cout)) in manifest.decoder.chunks(2).zip(enc.iter().rev()) {
        out.push((pair[0].clone(), vec![cin, cout, KERNEL, KERNEL]));
        out.push((pair[1].clone(), vec![cin]));
    }
    out
}

/// Manifest entry listing the tensor names of a target layer.
pub fn layer_manifest(layer: usize) -> LayerManifest {
    let convs: Vec<&str> = encoder_steps(layer)
        .into_iter()
        .filter_map(|s| match s {
            Step::Conv { name, .. } => Some(name),
            Step::Pool => None,
        })
        .collect();
    let pairs = |prefix: &str, order: Vec<&str>| -> Vec<String> {
        order.into_iter().flat_map(|n| <[String; 2]>::from(names(prefix, n))).collect()
    };
    let reversed = convs.iter().rev().copied().collect();
    LayerManifest { encoder: pairs("encoder", convs), decoder: pairs(&format!("decoder{layer}"), reversed) }
}

/// Encoder and decoders backed by a weight archive.
#[derive(Debug, Clone)]
pub struct VggCodec {
    archive: WeightArchive,
    preprocessing: Preprocessing,
}

impl VggCodec {
    pub fn new(archive: WeightArchive) -> Result<Self> {
        let preprocessing = archive
            .metadata()
            .preprocessing
            .clone()
            .ok_or_else(|| Error::IncompleteArchive("metadata lacks preprocessing means".into()))?;
        if !(preprocessing.scale.is_finite() && preprocessing.scale != 0.0) {
            return Err(Error::Format(format!("preprocessing scale {} unusable", preprocessing.scale)));
        }
        Ok(Self { archive, preprocessing })
    }

    pub fn archive(&self) -> &WeightArchive {
        &self.archive
    }

    fn weights(&self, prefix: &str, name: &str, cin: usize, cout: usize) -> Result<(&Tensor, &[f32])> {
        let (wn, bn) = names(prefix, name);
        let w = self.archive.require(&wn)?;
        let b = self.archive.require(&bn)?;
        if w.shape() != [cout, cin, KERNEL, KERNEL] || b.shape() != [cout] {
            return Err(Error::dim(format!("{wn}: shape {:?} / bias {:?}, expected [{cout}, {cin}, 3, 3]", w.shape(), b.shape())));
        }
        Ok((w, b.data()))
    }

    /// Fails early if any tensor for `layer` is missing or misshaped.
    pub fn check_layer(&self, layer: usize) -> Result<()> {
        check_layer(layer)?;
        for step in encoder_steps(layer) {
            if let Step::Conv { name, cin, cout } = step {
                self.weights("encoder", name, cin, cout)?;
                self.weights(&format!("decoder{layer}"), name, cout, cin)?;
            }
        }
        Ok(())
    }

    pub fn encode(&self, img: &ImageRgb, layer: usize) -> Result<FeatureTensor> {
        check_layer(layer)?;
        let f = 1usize << (layer - 1);
        if img.width() < f || img.height() < f {
            return Err(Error::Size(format!("{}x{} image is smaller than factor {f}", img.width(), img.height())));
        }
        let Preprocessing { mean, scale } = self.preprocessing;
        let mut t = FeatureTensor::from_image(img);
        for px in t.data_mut().chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = (px[c] - mean[c]) * scale;
            }
        }
        for step in encoder_steps(layer) {
            t = match step {
                Step::Conv { name, cin, cout } => {
                    let (w, b) = self.weights("encoder", name, cin, cout)?;
                    relu(conv2d(&t, w, b, Padding::Reflect)?)
                }
                Step::Pool => max_pool2(&t),
            };
        }
        Ok(t)
    }

    pub fn decode(&self, features: &FeatureTensor, layer: usize) -> Result<ImageRgb> {
        check_layer(layer)?;
        if features.channels() != CHANNELS[layer - 1] {
            return Err(Error::dim(format!(
                "layer {layer} expects {} channels, got {}",
                CHANNELS[layer - 1],
                features.channels()
            )));
        }
        let prefix = format!("decoder{layer}");
        let steps = encoder_steps(layer);
        let mut t = features.clone();
        for (i, step) in steps.iter().rev().enumerate() {
            t = match *step {
                Step::Conv { name, cin, cout } => {
                    let (w, b) = self.weights(&prefix, name, cout, cin)?;
                    let y = conv2d(&t, w, b, Padding::Reflect)?;
                    if i + 1 == steps.len() { y } else { relu(y) }
                }
                Step::Pool => upsample_nn2(&t),
            };
        }
        let Preprocessing { mean, scale } = self.preprocessing;
        let mut data = t.into_data();
        for px in data.chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = px[c] / scale + mean[c];
            }
        }
        ImageRgb::new(features.width() * (1 << (layer - 1)), features.height() * (1 << (layer - 1)), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::archive::ArchiveMetadata;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn archive(layers: &[usize], zero_bias: bool, seed: u64) -> WeightArchive {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut meta = ArchiveMetadata { preprocessing: Some(Preprocessing::default()), ..Default::default() };
        let mut tensors: Vec<(String, Tensor)> = Vec::new();
        for &l in layers {
            meta.layers.insert(l.to_string(), layer_manifest(l));
            for (name, shape) in required_tensors(l) {
                if tensors.iter().any(|(n, _)| *n == name) {
                    continue;
                }
                let len: usize = shape.iter().product();
                let fan_in: usize = shape.iter().skip(1).product();
                let std = if shape.len() == 4 { (2.0 / fan_in as f32).sqrt() } else { 0.1 };
                let data = (0..len)
                    .map(|_| if shape.len() == 1 && zero_bias { 0.0 } else { std * rng.sample::<f32, _>(StandardNormal) })
                    .collect();
                tensors.push((name, Tensor::new(shape, data).unwrap()));
            }
        }
        WeightArchive::with_metadata(&meta, tensors).unwrap()
    }

    fn noise(w: usize, h: usize, seed: u64) -> ImageRgb {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageRgb::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    #[test]
    fn topology_tables() {
        let m5 = layer_manifest(5);
        assert_eq!(m5.encoder.len(), 2 * 13);
        assert_eq!(m5.decoder.first().unwrap(), "decoder5.conv5_1.weight");
        assert_eq!(m5.decoder.last().unwrap(), "decoder5.conv1_1.bias");
        assert_eq!(layer_manifest(1).encoder, vec!["encoder.conv1_1.weight", "encoder.conv1_1.bias"]);
        let req = required_tensors(2);
        assert!(req.contains(&("decoder2.conv1_1.weight".to_string(), vec![3, 64, 3, 3])));
        assert!(req.contains(&("encoder.conv2_1.weight".to_string(), vec![128, 64, 3, 3])));
    }

    #[test]
    fn encoded_shapes_follow_channel_table() {
        let codec = VggCodec::new(archive(&[1, 2, 3, 4, 5], false, 1)).unwrap();
        let img = noise(32, 48, 2);
        for l in 1..=5 {
            let f = codec.encode(&img, l).unwrap();
            let k = 1 << (l - 1);
            assert_eq!((f.height(), f.width(), f.channels()), (48 / k, 32 / k, CHANNELS[l - 1]));
            let back = codec.decode(&f, l).unwrap();
            assert_eq!(back.dims(), img.dims());
            assert!(back.is_finite());
        }
        assert_eq!(codec.encode(&img, 5).unwrap().channels(), 512);
    }

    #[test]
    fn zero_in_zero_out() {
        let codec = VggCodec::new(archive(&[3], true, 3)).unwrap();
        let f = codec.encode(&ImageRgb::filled(16, 16, [0.0; 3]), 3).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
        let img = codec.decode(&FeatureTensor::zeros(2, 3, 256), 3).unwrap();
        assert_eq!(img.dims(), (12, 8));
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_translation_covariant_inside() {
        let codec = VggCodec::new(archive(&[3], false, 4)).unwrap();
        let img = noise(64, 64, 5);
        let a = codec.encode(&img, 3).unwrap();
        assert_eq!(a, codec.encode(&img, 3).unwrap());
        let shifted = ImageRgb::from_fn(60, 60, |x, y| img.pixel(x + 4, y + 4));
        let b = codec.encode(&shifted, 3).unwrap();
        // receptive field radius is 16 px, i.e. 4 feature cells
        for y in 5..b.height() - 5 {
            for x in 5..b.width() - 5 {
                for (p, q) in b.at(y, x).iter().zip(a.at(y + 1, x + 1)) {
                    assert!((p - q).abs() <= 1e-3 * q.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn errors() {
        let partial = VggCodec::new(archive(&[1], false, 6)).unwrap();
        assert!(matches!(partial.encode(&noise(16, 16, 1), 2), Err(Error::IncompleteArchive(_))));
        assert!(matches!(partial.check_layer(2), Err(Error::IncompleteArchive(_))));
        partial.check_layer(1).unwrap();
        let codec = VggCodec::new(archive(&[4], false, 6)).unwrap();
        assert!(matches!(codec.encode(&noise(4, 16, 1), 4), Err(Error::Size(_))));
        assert!(matches!(codec.decode(&FeatureTensor::zeros(1, 1, 64), 4), Err(Error::Dimension(_))));
        let bare = WeightArchive::new("{}".into(), vec![]).unwrap();
        assert!(matches!(VggCodec::new(bare), Err(Error::IncompleteArchive(_))));
    }
}
