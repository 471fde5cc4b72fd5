use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use avt::stages::{self, StatsKind, StatsReport, StatsSource};
use avt::{CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "avt",
    version,
    about = "Build audio-image-text datasets from videos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode videos and write filtered one-second pairs to the store.
    Extract(Common),
    /// Caption every pair in the store.
    Caption(Common),
    /// Pack captioned pairs into CSV/zip shards with a manifest.
    Pack(Common),
    /// Compute a dataset report.
    Stats {
        #[arg(value_enum)]
        which: StatsKind,
        #[arg(long, value_enum, default_value = "auto")]
        from: StatsSource,
        #[command(flatten)]
        common: Common,
    },
    /// Write a small synthetic video corpus.
    MakeFixtures { dir: PathBuf },
    /// Decoder for the built-in synthetic container.
    #[command(hide = true)]
    SynthDecode {
        #[arg(value_parser = ["probe", "video", "audio"])]
        what: String,
        path: PathBuf,
    },
}

/// Every flag mirrors a config-file key; flags win over the file.
#[derive(Args)]
struct Common {
    /// Input videos or directories.
    inputs: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    border_threshold: Option<u8>,
    #[arg(long)]
    cut_threshold: Option<f64>,
    #[arg(long)]
    silence_amp: Option<u16>,
    #[arg(long)]
    silence_dur: Option<f64>,
    #[arg(long)]
    dark_mean: Option<f64>,
    #[arg(long)]
    keep_every: Option<usize>,
    #[arg(long)]
    size: Option<u32>,
    #[arg(long)]
    min_crop_dim: Option<u32>,
    #[arg(long)]
    fade_lookahead: Option<usize>,
    /// auto, ffmpeg, synthetic or custom.
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long)]
    decoder_probe: Option<String>,
    #[arg(long)]
    decoder_video: Option<String>,
    #[arg(long)]
    decoder_audio: Option<String>,
    /// mock or external.
    #[arg(long)]
    captioner: Option<String>,
    #[arg(long)]
    captioner_command: Option<String>,
    #[arg(long)]
    min_tokens: Option<u32>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    beams: Option<u32>,
    #[arg(long)]
    min_words: Option<usize>,
    #[arg(long)]
    max_words: Option<usize>,
    #[arg(long)]
    rows_per_csv: Option<usize>,
    #[arg(long)]
    csvs_per_zip: Option<usize>,
    #[arg(long)]
    audio_as_path: bool,
    #[arg(long)]
    jpeg_quality: Option<u8>,
    #[arg(long)]
    amp_bins: Option<usize>,
    #[arg(long)]
    adi_bins: Option<usize>,
    #[arg(long)]
    top_words: Option<usize>,
    #[arg(long)]
    stoplist: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if !self.inputs.is_empty() {
            config.inputs = self.inputs.clone();
        }
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        };
        let s = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
        put("out", s(&self.out));
        put(
            "border_threshold",
            self.border_threshold.map(|v| v.to_string()),
        );
        put("cut_threshold", self.cut_threshold.map(|v| v.to_string()));
        put("silence_amp", self.silence_amp.map(|v| v.to_string()));
        put("silence_dur", self.silence_dur.map(|v| v.to_string()));
        put("dark_mean", self.dark_mean.map(|v| v.to_string()));
        put("keep_every", self.keep_every.map(|v| v.to_string()));
        put("size", self.size.map(|v| v.to_string()));
        put("min_crop_dim", self.min_crop_dim.map(|v| v.to_string()));
        put("fade_lookahead", self.fade_lookahead.map(|v| v.to_string()));
        put("decoder", self.decoder.clone());
        put("decoder_probe", self.decoder_probe.clone());
        put("decoder_video", self.decoder_video.clone());
        put("decoder_audio", self.decoder_audio.clone());
        put("captioner", self.captioner.clone());
        put("captioner_command", self.captioner_command.clone());
        put("min_tokens", self.min_tokens.map(|v| v.to_string()));
        put("max_tokens", self.max_tokens.map(|v| v.to_string()));
        put("beams", self.beams.map(|v| v.to_string()));
        put("min_words", self.min_words.map(|v| v.to_string()));
        put("max_words", self.max_words.map(|v| v.to_string()));
        put("rows_per_csv", self.rows_per_csv.map(|v| v.to_string()));
        put("csvs_per_zip", self.csvs_per_zip.map(|v| v.to_string()));
        put(
            "audio_as_path",
            self.audio_as_path.then(|| "true".to_string()),
        );
        put("jpeg_quality", self.jpeg_quality.map(|v| v.to_string()));
        put("amp_bins", self.amp_bins.map(|v| v.to_string()));
        put("adi_bins", self.adi_bins.map(|v| v.to_string()));
        put("top_words", self.top_words.map(|v| v.to_string()));
        put("stoplist", s(&self.stoplist));
        put("workers", self.workers.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        for (k, v) in pairs {
            config.set(k, &v)?;
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract(common) => {
            let s = stages::run_extract(&common.resolve()?)?;
            let t = &s.totals;
            println!(
                "videos {} ok {} failed {} | windows {} silent {} dark {} no-frame {} subsampled {} emitted {}",
                s.videos_found,
                s.videos.len(),
                s.failed.len(),
                t.windows,
                t.silence_dropped,
                t.dark_dropped,
                t.no_frame_dropped,
                t.subsample_dropped,
                t.emitted
            );
        }
        Command::Caption(common) => {
            let s = stages::run_caption(&common.resolve()?)?;
            println!("captioned {} dropped {}", s.captioned, s.dropped);
        }
        Command::Pack(common) => {
            let m = stages::run_pack(&common.resolve()?)?;
            println!(
                "records {} csv {} zip {}",
                m.total_records,
                m.csv_shards.len(),
                m.zip_shards.len()
            );
        }
        Command::Stats {
            which,
            from,
            common,
        } => match stages::run_stats(&common.resolve()?, which, from)? {
            StatsReport::Words(r) => println!(
                "captions {} mean {:.2} std {:.2} distinct {} after stoplist {}",
                r.captions, r.mean_words, r.std_words, r.distinct_words, r.distinct_after_stoplist
            ),
            StatsReport::Amplitude(r) => {
                println!("clips {} bins {} max {}", r.clips, r.bins, r.max_count)
            }
            StatsReport::Adi(r) => {
                println!("adi {:.4} ({:?}) over {} clips", r.adi, r.class, r.clips)
            }
        },
        Command::MakeFixtures { dir } => {
            for p in avt::demo::write_demo_corpus(&dir)? {
                println!("{}", p.display());
            }
        }
        Command::SynthDecode { what, path } => {
            let stdout = std::io::stdout();
            let mut out = std::io::BufWriter::new(stdout.lock());
            match what.as_str() {
                "probe" => out.write_all(avt_core::synth::probe_report(&path)?.as_bytes())?,
                "video" => avt_core::synth::emit_video(&path, &mut out)?,
                _ => avt_core::synth::emit_audio(&path, &mut out)?,
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("avt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
