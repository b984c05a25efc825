mod manifest;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use otsynth::applications::color::{color_transfer_combined, color_transfer_global, luminance_transfer, ColorConfig};
use otsynth::applications::guided::{guided_synthesize, GuidanceMasks, IdMask};
use otsynth::applications::mixing::{synthesize_mixture, MixSpec, MixingMask};
use otsynth::codec::{FeatureCodec, PyramidCodec, VggCodec, WeightArchive};
use otsynth::pipeline::{synthesize, Mode, Synthesis, SynthesisConfig};
use otsynth::tensor::ImageRgb;

use manifest::{Input, Manifest};
use settings::{Cli, CodecKind, ColorMode, Command, Resolved, Size};

/// Failure with its process exit code: 2 for bad usage or input, 3 for
/// numeric or runtime failures.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<otsynth::Error> for CliError {
    fn from(e: otsynth::Error) -> Self {
        use otsynth::Error as E;
        match e {
            E::Numeric(_) | E::InsufficientData(_) | E::EmptyDistribution(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn load_image(path: &Path, role: &'static str, inputs: &mut Vec<Input>) -> Result<ImageRgb, CliError> {
    inputs.push(Input::hash(role, path)?);
    ImageRgb::load_png(path).map_err(|e| CliError::usage(format!("{role} image {}: {e}", path.display())))
}

fn make_codec(r: &Resolved, inputs: &mut Vec<Input>) -> Result<Box<dyn FeatureCodec>, CliError> {
    match r.codec {
        CodecKind::Pyramid => Ok(Box::new(PyramidCodec)),
        CodecKind::Vgg => {
            let path = r.weights.as_ref().ok_or_else(|| CliError::usage("the vgg codec needs --weights or OTSYNTH_WEIGHTS"))?;
            inputs.push(Input::hash("weights", path)?);
            let archive = WeightArchive::load(path).map_err(|e| CliError::usage(format!("weights {}: {e}", path.display())))?;
            Ok(Box::new(VggCodec::new(archive)?))
        }
    }
}

fn synthesis_config(r: &Resolved, mode: Mode, size: Size) -> SynthesisConfig {
    SynthesisConfig {
        mode,
        output_width: size.0,
        output_height: size.1,
        global_passes: r.passes,
        bins: r.bins,
        content_strength: if mode == Mode::Style { r.content_strength.unwrap_or(0.0) } else { 0.0 },
        use_pca: r.pca,
        pca_threshold: r.pca_threshold,
        min_pyramid_size: r.min_pyramid_size,
        seed: r.seed,
    }
}

/// `--size` when given, else `natural`; `fixed` sizes must agree with it.
fn output_size(r: &Resolved, natural: (usize, usize), fixed: bool) -> Result<Size, CliError> {
    match r.size() {
        Some(s) if fixed && (s.0, s.1) != natural => {
            Err(CliError::usage(format!("--size {s} must match the {}x{} input it is tied to", natural.0, natural.1)))
        }
        Some(s) => Ok(s),
        None => Ok(Size(natural.0, natural.1)),
    }
}

fn execute(cmd: &Command, r: &Resolved, m: &mut Manifest) -> Result<ImageRgb, CliError> {
    let start = Instant::now();
    let codec = make_codec(r, &mut m.inputs)?;
    m.codec = codec.identity();
    let out = match cmd {
        Command::Synth { style, .. } => {
            let style = load_image(style, "style", &mut m.inputs)?;
            let cfg = synthesis_config(r, Mode::Texture, output_size(r, style.dims(), false)?);
            m.stage("load", start);
            let s = synthesize(&style, None, &cfg, codec.as_ref())?;
            record(m, &cfg, &s);
            s.image
        }
        Command::Style { style, content, .. } => {
            let style = load_image(style, "style", &mut m.inputs)?;
            let content = load_image(content, "content", &mut m.inputs)?;
            let cfg = synthesis_config(r, Mode::Style, output_size(r, content.dims(), true)?);
            m.stage("load", start);
            let s = synthesize(&style, Some(&content), &cfg, codec.as_ref())?;
            record(m, &cfg, &s);
            let color_start = Instant::now();
            let color_cfg = ColorConfig {
                global_passes: r.passes,
                bins: r.bins,
                content_strength: r.color_strength.unwrap_or(0.5),
                seed: r.seed,
            };
            let image = match r.color.unwrap_or(ColorMode::None) {
                ColorMode::None => s.image,
                ColorMode::Global => color_transfer_global(&s.image, &content, &color_cfg)?,
                ColorMode::Luminance => luminance_transfer(&content, &s.image)?,
                ColorMode::Combined => color_transfer_combined(&s.image, &content, &color_cfg)?,
            };
            m.stage("color", color_start);
            image
        }
        Command::Mix { a, b, mix_mask, .. } => {
            let a = load_image(a, "a", &mut m.inputs)?;
            let b = load_image(b, "b", &mut m.inputs)?;
            let mask = match mix_mask {
                Some(p) => {
                    m.inputs.push(Input::hash("mix-mask", p)?);
                    Some(MixingMask::load_png(p)?)
                }
                None => None,
            };
            let natural = mask.as_ref().map_or(a.dims(), |mk| (mk.width(), mk.height()));
            let cfg = synthesis_config(r, Mode::Texture, output_size(r, natural, mask.is_some())?);
            m.stage("load", start);
            let spec = MixSpec { texture_a: &a, texture_b: &b, ratio: r.ratio.unwrap_or(0.5), mask };
            let mixture = synthesize_mixture(&spec, &cfg, codec.as_ref())?;
            record(m, &cfg, &mixture.synthesis);
            m.events = serde_json::json!({ "mappings": mixture.mappings, "target_rows": mixture.target_rows });
            mixture.synthesis.image
        }
        Command::Paint { style, style_mask, target_mask, .. } => {
            let style = load_image(style, "style", &mut m.inputs)?;
            m.inputs.push(Input::hash("style-mask", style_mask)?);
            m.inputs.push(Input::hash("target-mask", target_mask)?);
            let masks = GuidanceMasks::new(IdMask::load_png(style_mask)?, IdMask::load_png(target_mask)?)?;
            let cfg = synthesis_config(r, Mode::Texture, output_size(r, masks.content_mask.dims(), true)?);
            m.stage("load", start);
            let guided = guided_synthesize(&style, &masks, &cfg, codec.as_ref())?;
            record(m, &cfg, &guided.synthesis);
            let rebalances: Vec<_> = guided
                .rebalances
                .iter()
                .map(|e| serde_json::json!({ "level": e.level, "layer": e.layer, "histogram": e.histogram }))
                .collect();
            m.events = serde_json::json!({ "rebalances": rebalances });
            guided.synthesis.image
        }
    };
    Ok(out)
}

fn record(m: &mut Manifest, cfg: &SynthesisConfig, s: &Synthesis) {
    m.synthesis = Some(cfg.clone());
    m.levels = s.levels.clone();
    m.timings.level_seconds = s.level_seconds.clone();
    m.visits = s.trace.len();
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cmd = &cli.command;
    let resolved = Resolved::from_command(cmd)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolved.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let mut m = Manifest::new(cmd.name(), resolved.clone());
    m.threads = pool.current_num_threads();
    let total = Instant::now();
    let image = pool.install(|| execute(cmd, &resolved, &mut m))?;
    if !image.is_finite() {
        return Err(CliError::Runtime("output contains non-finite values".into()));
    }
    let out = &cmd.common().out;
    let save = Instant::now();
    image.save_png(out).map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
    m.stage("save", save);
    m.timings.total_seconds = total.elapsed().as_secs_f64();
    m.save(&manifest_path(out))
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help / --version
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("otsynth: {e}");
            ExitCode::from(e.code())
        }
    }
}
