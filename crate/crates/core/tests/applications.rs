use otsynth::applications::color::{color_transfer_combined, luminance_transfer, rgb_to_hsl, ColorConfig};
use otsynth::applications::guided::{guided_synthesize, GuidanceMasks, IdMask};
use otsynth::applications::mixing::{synthesize_mixture, MixSpec, MixingMask};
use otsynth::codec::vgg::{layer_manifest, required_tensors};
use otsynth::codec::{ArchiveMetadata, FeatureCodec, Preprocessing, PyramidCodec, Tensor, VggCodec, WeightArchive};
use otsynth::pipeline::{synthesize, Mode, SynthesisConfig};
use otsynth::seed::SeedStream;
use otsynth::sliced_ot::sliced_wasserstein;
use otsynth::tensor::{FeatureTensor, ImageRgb};
use otsynth::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn stripes(w: usize, h: usize, phase: usize) -> ImageRgb {
    ImageRgb::from_fn(w, h, |x, y| {
        let t = ((x + 2 * y + phase) % 8) as f32 / 7.0;
        [t, 1.0 - t, if (x / 3 + y / 5) % 2 == 0 { 0.2 } else { 0.8 }]
    })
}

fn small(w: usize, h: usize) -> SynthesisConfig {
    SynthesisConfig { output_width: w, output_height: h, global_passes: 2, min_pyramid_size: 16, seed: 12, ..SynthesisConfig::default() }
}

fn rgb_distance(a: &ImageRgb, b: &ImageRgb) -> f64 {
    let fa = FeatureTensor::from_image(a).flatten();
    let fb = FeatureTensor::from_image(b).flatten();
    sliced_wasserstein(&fa, &fb, 32, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
}

#[test]
fn texture_synthesis_is_seeded_and_approaches_the_exemplar() {
    let style = stripes(32, 32, 0);
    let cfg = small(32, 32);
    let first = synthesize(&style, None, &cfg, &PyramidCodec).unwrap();
    let again = synthesize(&style, None, &cfg, &PyramidCodec).unwrap();
    assert_eq!(first.image, again.image);
    let noise = otsynth::pipeline::noise_image(32, 32, &SeedStream::new(12).named("noise", 0));
    assert!(rgb_distance(&first.image, &style) < 0.5 * rgb_distance(&noise, &style));
    let other = synthesize(&style, None, &SynthesisConfig { seed: 13, ..cfg }, &PyramidCodec).unwrap();
    assert_ne!(first.image, other.image);
}

#[test]
fn style_transfer_keeps_the_content_frame_and_colour_modes_compose() {
    let style = stripes(32, 32, 3);
    let content = ImageRgb::from_fn(32, 32, |x, y| [x as f32 / 31.0, y as f32 / 31.0, 0.5]);
    let cfg = SynthesisConfig { mode: Mode::Style, content_strength: 0.6, ..small(32, 32) };
    let out = synthesize(&style, Some(&content), &cfg, &PyramidCodec).unwrap();
    assert_eq!(out.image.dims(), (32, 32));
    assert!(out.image.is_finite());

    let lum = luminance_transfer(&content, &out.image).unwrap();
    // lightness comes from the stylized result
    for (a, b) in lum.data().chunks(3).zip(out.image.data().chunks(3)) {
        if b.iter().all(|v| (0.0..=1.0).contains(v)) {
            let (ha, hb) = (rgb_to_hsl([a[0], a[1], a[2]]), rgb_to_hsl([b[0], b[1], b[2]]));
            assert!((ha.lightness - hb.lightness).abs() < 1e-4);
        }
    }
    let combined = color_transfer_combined(&out.image, &content, &ColorConfig::default()).unwrap();
    assert!(rgb_distance(&combined, &content) < rgb_distance(&out.image, &content));
}

#[test]
fn mixing_endpoints_reproduce_single_texture_synthesis() {
    let (a, b) = (stripes(32, 32, 0), stripes(32, 32, 5));
    let cfg = small(32, 32);
    let plain_a = synthesize(&a, None, &cfg, &PyramidCodec).unwrap().image;
    let plain_b = synthesize(&b, None, &cfg, &PyramidCodec).unwrap().image;
    let mix = |ratio: f32, mask: Option<MixingMask>| synthesize_mixture(&MixSpec { texture_a: &a, texture_b: &b, ratio, mask }, &cfg, &PyramidCodec).unwrap();
    assert_eq!(mix(0.0, None).synthesis.image, plain_a);
    assert_eq!(mix(1.0, None).synthesis.image, plain_b);
    let half = mix(0.5, Some(MixingMask::random(32, 32, &SeedStream::new(2))));
    assert!(!half.mappings.is_empty());
    assert!(half.synthesis.image.is_finite());
}

#[test]
fn guided_painting_honours_the_target_layout() {
    let style = ImageRgb::from_fn(32, 32, |x, _| if x < 16 { [0.9, 0.1, 0.1] } else { [0.1, 0.1, 0.9] });
    let style_ids = IdMask::new(32, 32, (0..32 * 32).map(|k| if k % 32 < 16 { 1 } else { 2 }).collect()).unwrap();
    let target_ids = IdMask::new(32, 32, (0..32 * 32).map(|k| if k / 32 < 16 { 2 } else { 1 }).collect()).unwrap();
    let masks = GuidanceMasks::new(style_ids, target_ids).unwrap();
    let out = guided_synthesize(&style, &masks, &small(32, 32), &PyramidCodec).unwrap();
    let img = &out.synthesis.image;
    let mean_red = |rows: std::ops::Range<usize>| rows.clone().flat_map(|y| (0..32).map(move |x| (x, y))).map(|(x, y)| img.pixel(x, y)[0]).sum::<f32>() / (rows.len() * 32) as f32;
    assert!(mean_red(20..32) > mean_red(0..12) + 0.3, "red half {} blue half {}", mean_red(20..32), mean_red(0..12));
    assert!(!out.rebalances.is_empty());

    let foreign = IdMask::new(32, 32, vec![7; 32 * 32]).unwrap();
    let style_ids = IdMask::new(32, 32, vec![1; 32 * 32]).unwrap();
    assert!(GuidanceMasks::new(style_ids, foreign).is_err());
}

/// Random He-initialised weights for every layer, written as an archive.
fn random_archive(seed: u64) -> WeightArchive {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meta = ArchiveMetadata { preprocessing: Some(Preprocessing { mean: [0.4, 0.45, 0.5], scale: 1.0 }), ..Default::default() };
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    for layer in 1..=5 {
        meta.layers.insert(layer.to_string(), layer_manifest(layer));
        for (name, shape) in required_tensors(layer) {
            if tensors.iter().any(|(n, _)| *n == name) {
                continue;
            }
            let fan_in: usize = shape.iter().skip(1).product();
            let std = if shape.len() == 4 { (2.0 / fan_in as f32).sqrt() } else { 0.01 };
            let data = (0..shape.iter().product()).map(|_| std * rng.sample::<f32, _>(StandardNormal)).collect();
            tensors.push((name, Tensor::new(shape, data).unwrap()));
        }
    }
    WeightArchive::with_metadata(&meta, tensors).unwrap()
}

#[test]
fn vgg_codec_runs_from_an_archive_file() {
    let path = std::env::temp_dir().join(format!("otsynth-vgg-{}.otwa", std::process::id()));
    random_archive(5).save(&path).unwrap();
    let archive = WeightArchive::load(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(archive.to_bytes(), random_archive(5).to_bytes());

    let codec = VggCodec::new(archive).unwrap();
    for layer in 1..=5 {
        let info = codec.layer(layer).unwrap();
        let f = codec.encode(&stripes(32, 16, 1), layer).unwrap();
        assert_eq!((f.height(), f.width(), f.channels()), (16 / info.downsample_factor, 32 / info.downsample_factor, info.channels));
        assert_eq!(codec.decode(&f, layer).unwrap().dims(), (32, 16));
    }
    let out = synthesize(&stripes(16, 16, 2), None, &SynthesisConfig { global_passes: 1, ..small(16, 16) }, &codec).unwrap();
    assert!(out.image.is_finite());
    assert_eq!(out.trace.iter().map(|v| v.dims).collect::<Vec<_>>(), vec![512, 512, 256, 128, 64]);
}

#[test]
fn archives_without_preprocessing_are_rejected() {
    let bare = WeightArchive::with_metadata(&ArchiveMetadata::default(), Vec::new()).unwrap();
    assert!(matches!(VggCodec::new(bare), Err(Error::IncompleteArchive(_))));
    assert!(WeightArchive::from_bytes(b"OTWB\x01\x00\x00\x00").is_err());
}
