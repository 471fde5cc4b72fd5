//! Run configuration: built-in defaults, then an optional flat `key = value`
//! file, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use avt_core::caption::{CaptionerKind, CaptionerSpec, WordBounds};
use avt_core::ingest::DecoderSpec;
use avt_core::media::FilterConfig;
use avt_core::packer::{ImageFormat, ShardOptions};

use crate::CliError;

/// Which decoder commands to run for an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecoderChoice {
    /// Synthetic container for `.avtsyn` files, ffmpeg for everything else.
    Auto,
    Ffmpeg,
    Synthetic,
    Custom(DecoderSpec),
}

impl DecoderChoice {
    pub fn spec_for(&self, path: &Path) -> DecoderSpec {
        match self {
            Self::Auto if path.extension().is_some_and(|e| e == "avtsyn") => {
                DecoderSpec::synthetic()
            }
            Self::Auto | Self::Ffmpeg => DecoderSpec::default(),
            Self::Synthetic => DecoderSpec::synthetic(),
            Self::Custom(spec) => spec.clone(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Ffmpeg => "ffmpeg",
            Self::Synthetic => "synthetic",
            Self::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub filter: FilterConfig,
    pub decoder: DecoderChoice,
    pub captioner: CaptionerSpec,
    pub word_bounds: WordBounds,
    pub shards: ShardOptions,
    pub jpeg_quality: u8,
    pub amp_bins: usize,
    pub adi_bins: usize,
    pub top_words: usize,
    pub stoplist: Option<PathBuf>,
    pub workers: usize,
    /// Reserved; the pipeline itself is deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            out: PathBuf::from("avt_out"),
            filter: FilterConfig::default(),
            decoder: DecoderChoice::Auto,
            captioner: CaptionerSpec::default(),
            word_bounds: WordBounds::default(),
            shards: ShardOptions::default(),
            jpeg_quality: 90,
            amp_bins: 256,
            adi_bins: 32,
            top_words: 20,
            stoplist: None,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "invalid value {value:?} for {key}"
        ))),
    }
}

impl RunConfig {
    pub fn image_format(&self) -> ImageFormat {
        ImageFormat::Jpeg {
            quality: self.jpeg_quality,
        }
    }

    /// Applies one setting. Keys match the long flag names with `-` written as `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        let f = &mut self.filter;
        match key {
            "input" => self.inputs.extend(
                value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from),
            ),
            "out" => self.out = PathBuf::from(value),
            "border_threshold" => f.border_threshold = parse(key, value)?,
            "cut_threshold" => f.cut_threshold = parse(key, value)?,
            "silence_amp" => f.silence_amp = parse(key, value)?,
            "silence_dur" => f.silence_dur = parse(key, value)?,
            "dark_mean" => f.dark_mean = parse(key, value)?,
            "keep_every" => f.keep_every = parse(key, value)?,
            "size" => f.out_size = parse(key, value)?,
            "min_crop_dim" => f.min_crop_dim = parse(key, value)?,
            "fade_lookahead" => f.fade_lookahead = parse(key, value)?,
            "decoder" => {
                self.decoder = match value {
                    "auto" => DecoderChoice::Auto,
                    "ffmpeg" => DecoderChoice::Ffmpeg,
                    "synthetic" => DecoderChoice::Synthetic,
                    "custom" => DecoderChoice::Custom(match &self.decoder {
                        DecoderChoice::Custom(spec) => spec.clone(),
                        _ => DecoderSpec::default(),
                    }),
                    _ => return Err(CliError::Usage(format!("unknown decoder {value:?}"))),
                }
            }
            "decoder_probe" | "decoder_video" | "decoder_audio" => {
                let mut spec = match &self.decoder {
                    DecoderChoice::Custom(spec) => spec.clone(),
                    _ => DecoderSpec::default(),
                };
                match key {
                    "decoder_probe" => spec.probe = value.to_string(),
                    "decoder_video" => spec.video = value.to_string(),
                    _ => spec.audio = value.to_string(),
                }
                self.decoder = DecoderChoice::Custom(spec);
            }
            "captioner" => {
                self.captioner.kind = match value {
                    "mock" => CaptionerKind::Mock,
                    "external" => CaptionerKind::External,
                    _ => return Err(CliError::Usage(format!("unknown captioner {value:?}"))),
                }
            }
            "captioner_command" => {
                self.captioner.command = Some(value.to_string());
                self.captioner.kind = CaptionerKind::External;
            }
            "min_tokens" => self.captioner.min_tokens = parse(key, value)?,
            "max_tokens" => self.captioner.max_tokens = parse(key, value)?,
            "beams" => self.captioner.beams = parse(key, value)?,
            "min_words" => self.word_bounds.min_words = parse(key, value)?,
            "max_words" => self.word_bounds.max_words = parse(key, value)?,
            "rows_per_csv" => self.shards.rows_per_csv = parse(key, value)?,
            "csvs_per_zip" => self.shards.csvs_per_zip = parse(key, value)?,
            "audio_as_path" => self.shards.audio_as_path = parse_bool(key, value)?,
            "jpeg_quality" => self.jpeg_quality = parse(key, value)?,
            "amp_bins" => self.amp_bins = parse(key, value)?,
            "adi_bins" => self.adi_bins = parse(key, value)?,
            "top_words" => self.top_words = parse(key, value)?,
            "stoplist" => self.stoplist = Some(PathBuf::from(value)),
            "workers" => self.workers = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Parses the flat config format: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", n + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    /// Every setting as text, in stable key order.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        let f = &self.filter;
        if !self.inputs.is_empty() {
            let joined: Vec<String> = self
                .inputs
                .iter()
                .map(|p| p.display().to_string())
                .collect();
            put("input", joined.join(","));
        }
        put("out", self.out.display().to_string());
        put("border_threshold", f.border_threshold.to_string());
        put("cut_threshold", f.cut_threshold.to_string());
        put("silence_amp", f.silence_amp.to_string());
        put("silence_dur", f.silence_dur.to_string());
        put("dark_mean", f.dark_mean.to_string());
        put("keep_every", f.keep_every.to_string());
        put("size", f.out_size.to_string());
        put("min_crop_dim", f.min_crop_dim.to_string());
        put("fade_lookahead", f.fade_lookahead.to_string());
        put("decoder", self.decoder.name().to_string());
        if let DecoderChoice::Custom(spec) = &self.decoder {
            put("decoder_probe", spec.probe.clone());
            put("decoder_video", spec.video.clone());
            put("decoder_audio", spec.audio.clone());
        }
        let kind = match self.captioner.kind {
            CaptionerKind::Mock => "mock",
            CaptionerKind::External => "external",
        };
        put("captioner", kind.to_string());
        if let Some(cmd) = &self.captioner.command {
            put("captioner_command", cmd.clone());
        }
        put("min_tokens", self.captioner.min_tokens.to_string());
        put("max_tokens", self.captioner.max_tokens.to_string());
        put("beams", self.captioner.beams.to_string());
        put("min_words", self.word_bounds.min_words.to_string());
        put("max_words", self.word_bounds.max_words.to_string());
        put("rows_per_csv", self.shards.rows_per_csv.to_string());
        put("csvs_per_zip", self.shards.csvs_per_zip.to_string());
        put("audio_as_path", self.shards.audio_as_path.to_string());
        put("jpeg_quality", self.jpeg_quality.to_string());
        put("amp_bins", self.amp_bins.to_string());
        put("adi_bins", self.adi_bins.to_string());
        put("top_words", self.top_words.to_string());
        if let Some(s) = &self.stoplist {
            put("stoplist", s.display().to_string());
        }
        put("workers", self.workers.to_string());
        put("seed", self.seed.to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.to_map()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Settings that influence output bytes. Location and scheduling keys
    /// (`out`, `input`, `workers`) are left out so reruns elsewhere match.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = self.to_map();
        for k in ["out", "input", "workers"] {
            m.remove(k);
        }
        m
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.filter
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.captioner
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.workers == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        if !(1..=100).contains(&self.jpeg_quality) {
            return Err(CliError::Usage("jpeg_quality must be in 1..=100".into()));
        }
        if self.word_bounds.min_words > self.word_bounds.max_words {
            return Err(CliError::Usage("min_words exceeds max_words".into()));
        }
        if self.shards.rows_per_csv == 0 || self.shards.csvs_per_zip == 0 {
            return Err(CliError::Usage("shard sizes must be positive".into()));
        }
        Ok(())
    }
}
