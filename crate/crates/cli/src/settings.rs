//! Command-line flags, the optional `key=value` config file, and their merge.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "otsynth", version, about = "Texture synthesis, style transfer, mixing and guided painting by sliced optimal transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a texture from an exemplar.
    Synth {
        /// Exemplar texture (PNG).
        #[arg(long)]
        style: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Transfer the style of one image onto a content image.
    Style {
        #[arg(long)]
        style: PathBuf,
        /// Fixes the output size.
        #[arg(long)]
        content: PathBuf,
        /// Pull toward the content features in [0, 1]; default 0.5.
        #[arg(long)]
        content_strength: Option<f32>,
        /// Post-process colours; default none.
        #[arg(long, value_enum)]
        color: Option<ColorMode>,
        /// Anchor weight of the combined color stage.
        #[arg(long)]
        color_strength: Option<f32>,
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize a texture between two exemplars.
    Mix {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Required; 0 reproduces A, 1 reproduces B.
        #[arg(long)]
        ratio: Option<f32>,
        /// 8-bit greyscale mask over the output; generated from the seed if absent.
        #[arg(long)]
        mix_mask: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize a texture laid out by a texture-ID mask.
    Paint {
        #[arg(long)]
        style: PathBuf,
        /// Greyscale ID mask over the style image; each grey level is one texture.
        #[arg(long)]
        style_mask: PathBuf,
        /// Greyscale ID layout of the output; fixes the output size.
        #[arg(long)]
        target_mask: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Style { .. } => "style",
            Command::Mix { .. } => "mix",
            Command::Paint { .. } => "paint",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Synth { common, .. }
            | Command::Style { common, .. }
            | Command::Mix { common, .. }
            | Command::Paint { common, .. } => common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecKind {
    Pyramid,
    Vgg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    None,
    Global,
    Luminance,
    Combined,
}

/// `WIDTHxHEIGHT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size(pub usize, pub usize);

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("size {s:?} is not WIDTHxHEIGHT"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("size {s:?} is not WIDTHxHEIGHT"));
        Ok(Size(parse(w)?, parse(h)?))
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output PNG; the manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// `key=value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output `WIDTHxHEIGHT`; defaults to the size of the input it is tied to.
    #[arg(long)]
    pub size: Option<Size>,
    /// Root seed; default 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Global passes over layers 5..1; default 5.
    #[arg(long)]
    pub passes: Option<usize>,
    /// Histogram bins per slice; default 128.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Coarsest pyramid side; default 256.
    #[arg(long)]
    pub min_pyramid_size: Option<usize>,
    /// Transport in a PCA subspace of the style features (default).
    #[arg(long, overrides_with = "no_pca")]
    pub pca: bool,
    /// Transport in full feature dimension (much slower).
    #[arg(long, overrides_with = "pca")]
    pub no_pca: bool,
    /// Fraction of style variance the PCA subspace keeps; default 0.9.
    #[arg(long)]
    pub pca_threshold: Option<f64>,
    /// Feature codec; default pyramid (no weights needed).
    #[arg(long, value_enum)]
    pub codec: Option<CodecKind>,
    /// Weight archive for the vgg codec; defaults to `$OTSYNTH_WEIGHTS`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Common {
    fn pca_flag(&self) -> Option<bool> {
        match (self.pca, self.no_pca) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "size",
    "seed",
    "passes",
    "bins",
    "min-pyramid-size",
    "pca",
    "pca-threshold",
    "codec",
    "weights",
    "threads",
    "content-strength",
    "color",
    "color-strength",
    "ratio",
];

/// Parsed `key=value` lines; `#` starts a comment.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", n + 1)))?;
            let key = k.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `flag` if given, else the parsed config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::usage(format!("config {key}={v}: {e}"))))
            .transpose()
    }
}

fn parse_enum<T: ValueEnum>(v: &str) -> Result<T, String> {
    T::from_str(v, true)
}

/// Every knob after merging flags, config file and defaults.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub size: Option<String>,
    pub seed: u64,
    pub passes: usize,
    pub bins: usize,
    pub min_pyramid_size: usize,
    pub pca: bool,
    pub pca_threshold: f64,
    pub codec: CodecKind,
    pub weights: Option<PathBuf>,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content_strength: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<ColorMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color_strength: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f32>,
}

impl Resolved {
    pub fn from_command(cmd: &Command) -> Result<Self, CliError> {
        let c = cmd.common();
        let file = match &c.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let defaults = otsynth::pipeline::SynthesisConfig::default();
        let codec = match c.codec {
            Some(k) => k,
            None => file.values.get("codec").map(|v| parse_enum(v)).transpose().map_err(CliError::usage)?.unwrap_or(CodecKind::Pyramid),
        };
        let weights = file.pick(c.weights.clone(), "weights")?.or_else(|| std::env::var_os("OTSYNTH_WEIGHTS").map(PathBuf::from));
        let mut r = Resolved {
            size: file.pick(c.size, "size")?.map(|s| s.to_string()),
            seed: file.pick(c.seed, "seed")?.unwrap_or(defaults.seed),
            passes: file.pick(c.passes, "passes")?.unwrap_or(defaults.global_passes),
            bins: file.pick(c.bins, "bins")?.unwrap_or(defaults.bins),
            min_pyramid_size: file.pick(c.min_pyramid_size, "min-pyramid-size")?.unwrap_or(defaults.min_pyramid_size),
            pca: file.pick(c.pca_flag(), "pca")?.unwrap_or(defaults.use_pca),
            pca_threshold: file.pick(c.pca_threshold, "pca-threshold")?.unwrap_or(defaults.pca_threshold),
            codec,
            weights: if codec == CodecKind::Vgg { weights } else { None },
            threads: file.pick(c.threads, "threads")?.unwrap_or(0),
            content_strength: None,
            color: None,
            color_strength: None,
            ratio: None,
        };
        match cmd {
            Command::Style { content_strength, color, color_strength, .. } => {
                r.content_strength = Some(file.pick(*content_strength, "content-strength")?.unwrap_or(0.5));
                let color = match color {
                    Some(m) => *m,
                    None => file.values.get("color").map(|v| parse_enum(v)).transpose().map_err(CliError::usage)?.unwrap_or(ColorMode::None),
                };
                r.color = Some(color);
                r.color_strength = Some(file.pick(*color_strength, "color-strength")?.unwrap_or(0.5));
            }
            Command::Mix { ratio, .. } => {
                r.ratio = Some(file.pick(*ratio, "ratio")?.ok_or_else(|| CliError::usage("mix needs --ratio"))?);
            }
            _ => {}
        }
        Ok(r)
    }

    pub fn size(&self) -> Option<Size> {
        self.size.as_deref().map(|s| s.parse().expect("stored from a parsed size"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!("512x256".parse::<Size>().unwrap(), Size(512, 256));
        assert!("512".parse::<Size>().is_err());
        assert!("ax2".parse::<Size>().is_err());
    }

    #[test]
    fn config_file_rules() {
        let f = ConfigFile::parse("# run\nseed = 7\npca_threshold=0.95  # keep more\n\n").unwrap();
        assert_eq!(f.pick::<u64>(None, "seed").unwrap(), Some(7));
        assert_eq!(f.pick::<u64>(Some(3), "seed").unwrap(), Some(3));
        assert_eq!(f.pick::<f64>(None, "pca-threshold").unwrap(), Some(0.95));
        assert!(ConfigFile::parse("colour=none").is_err());
        assert!(ConfigFile::parse("seed").is_err());
        assert!(f.pick::<usize>(None, "passes").unwrap().is_none());
        assert!(ConfigFile::parse("seed=x").unwrap().pick::<u64>(None, "seed").is_err());
    }
}
