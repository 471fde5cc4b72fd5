use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use avt_core::analytics::{
    self, AdiReport, AmplitudeMatrix, GroupedPower, WordCounter, WordStatsReport,
};
use avt_core::caption::{caption_all, CaptionJob};
use avt_core::ingest::{extract_video, video_id_for};
use avt_core::media::AudioClip;
use avt_core::packer::{
    self, decode_wav, encode_image, encode_wav, CaptionedRecord, EncodedImage, ShardManifest,
};
use avt_core::pair_extract::{FragmentSummary, VideoSummary};
use serde::{Deserialize, Serialize};

use crate::store::{reset_dir, IndexEntry, Store};
use crate::{CliError, RunConfig};

/// Clips are analysed in batches of this size to bound memory.
const STATS_BATCH: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedVideo {
    pub video_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub videos_found: usize,
    pub pairs: u64,
    pub totals: FragmentSummary,
    pub failed: Vec<FailedVideo>,
    pub videos: Vec<VideoSummary>,
}

/// Expands directories (one level, sorted) and keeps files as given.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .filter(|p| {
                    !p.file_name()
                        .is_some_and(|n| n.to_string_lossy().starts_with('.'))
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            log::warn!("{}: not found, skipped", input.display());
        }
    }
    Ok(files)
}

struct LocalPair {
    fragment_index: usize,
    window_index: usize,
    start_sample: u64,
    stem: PathBuf,
}

/// Decodes every input, filters windows and writes the pair store.
///
/// Videos are processed concurrently; global ids follow input order, then
/// fragment and window order, so the store does not depend on scheduling.
pub fn run_extract(config: &RunConfig) -> Result<ExtractSummary, CliError> {
    config.validate()?;
    let files = collect_inputs(&config.inputs)?;
    if files.is_empty() {
        return Err(CliError::NoInput("no input videos".into()));
    }
    let store = Store::new(&config.out);
    let pairs_dir = store.pairs_dir();
    reset_dir(&pairs_dir)?;
    let work = pairs_dir.join(".work");
    fs::create_dir_all(&work)?;

    let indexed: Vec<(usize, PathBuf)> = files.iter().cloned().enumerate().collect();
    let results = crate::with_workers(config.workers, || {
        avt_core::par::map(&indexed, |(n, path)| extract_one(config, *n, path, &work))
    });

    let mut summary = ExtractSummary {
        videos_found: files.len(),
        pairs: 0,
        totals: FragmentSummary::default(),
        failed: Vec::new(),
        videos: Vec::new(),
    };
    let mut index = Vec::new();
    for (path, result) in files.iter().zip(results) {
        match result {
            Ok((video, pairs)) => {
                for p in pairs {
                    let id = index.len() as u64;
                    fs::rename(p.stem.with_extension("jpg"), store.image(id))?;
                    fs::rename(p.stem.with_extension("wav"), store.wav(id))?;
                    index.push(IndexEntry {
                        id,
                        video_id: video.video_id.clone(),
                        fragment_index: p.fragment_index,
                        window_index: p.window_index,
                        start_sample: p.start_sample,
                    });
                }
                summary.videos.push(video);
            }
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                summary.failed.push(FailedVideo {
                    video_id: video_id_for(path),
                    reason: e.to_string(),
                });
            }
        }
    }
    fs::remove_dir_all(&work)?;
    store.write_index(&index)?;

    summary.pairs = index.len() as u64;
    summary.totals = summary
        .videos
        .iter()
        .fold(FragmentSummary::default(), |mut acc, v| {
            let t = v.total();
            acc.windows += t.windows;
            acc.silence_dropped += t.silence_dropped;
            acc.dark_dropped += t.dark_dropped;
            acc.no_frame_dropped += t.no_frame_dropped;
            acc.subsample_dropped += t.subsample_dropped;
            acc.emitted += t.emitted;
            acc
        });
    let text = toml::to_string(&summary)
        .map_err(|e| CliError::Usage(format!("summary serialization: {e}")))?;
    fs::write(store.extract_summary(), text)?;

    if summary.videos.is_empty() {
        return Err(CliError::NoInput(format!(
            "all {} videos failed",
            files.len()
        )));
    }
    log::info!(
        "extracted {} pairs from {} videos",
        summary.pairs,
        summary.videos.len()
    );
    Ok(summary)
}

fn extract_one(
    config: &RunConfig,
    n: usize,
    path: &Path,
    work: &Path,
) -> Result<(VideoSummary, Vec<LocalPair>), CliError> {
    let spec = config.decoder.spec_for(path);
    let mut pairs = Vec::new();
    let format = config.image_format();
    let result = extract_video(path, &spec, &config.filter, |pair| {
        let stem = work.join(format!("v{n:06}_{:06}", pairs.len()));
        fs::write(
            stem.with_extension("jpg"),
            encode_image(&pair.image, format)?,
        )?;
        fs::write(stem.with_extension("wav"), encode_wav(&pair.audio))?;
        pairs.push(LocalPair {
            fragment_index: pair.fragment_index,
            window_index: pair.window_index,
            start_sample: pair.audio.start_sample(),
            stem,
        });
        Ok(())
    });
    match result {
        Ok(summary) => Ok((summary, pairs)),
        Err(e) => {
            for p in &pairs {
                let _ = fs::remove_file(p.stem.with_extension("jpg"));
                let _ = fs::remove_file(p.stem.with_extension("wav"));
            }
            Err(e.into())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionSummary {
    pub captioned: usize,
    pub dropped: usize,
}

/// Captions every pair in the store; failures after one retry go to the drop log.
pub fn run_caption(config: &RunConfig) -> Result<CaptionSummary, CliError> {
    config.validate()?;
    let store = Store::new(&config.out);
    let index = store.read_index()?;
    let pairs_dir = store.pairs_dir().canonicalize()?;
    let jobs: Vec<CaptionJob> = index
        .iter()
        .map(|e| CaptionJob {
            id: e.id,
            image: pairs_dir.join(format!("{}.jpg", e.id)),
        })
        .collect();
    let outcomes = caption_all(&jobs, &config.captioner, config.word_bounds, config.workers)?;
    let mut captions = Vec::new();
    let mut drops = Vec::new();
    for o in outcomes {
        match o.result {
            Ok(text) => captions.push((o.id, text)),
            Err(reason) => drops.push((o.id, reason)),
        }
    }
    store.write_tsv(&store.captions(), "text", &captions)?;
    store.write_tsv(&store.caption_drops(), "reason", &drops)?;
    if captions.is_empty() {
        return Err(CliError::AllDropped(format!(
            "0 of {} pairs captioned",
            jobs.len()
        )));
    }
    log::info!(
        "captioned {} pairs, dropped {}",
        captions.len(),
        drops.len()
    );
    Ok(CaptionSummary {
        captioned: captions.len(),
        dropped: drops.len(),
    })
}

/// Packs captioned pairs into zip shards and writes the manifest.
pub fn run_pack(config: &RunConfig) -> Result<ShardManifest, CliError> {
    config.validate()?;
    let store = Store::new(&config.out);
    let captions = store.read_tsv(&store.captions())?;
    let shards_dir = store.shards_dir();
    reset_dir(&shards_dir)?;

    let records = captions
        .iter()
        .map(|(id, text)| -> avt_core::Result<CaptionedRecord> {
            let audio = decode_wav(&fs::read(store.wav(*id))?)?;
            let bytes = fs::read(store.image(*id))?;
            Ok(CaptionedRecord {
                id: *id,
                text: text.clone(),
                audio,
                image: Some(EncodedImage {
                    extension: "jpg".into(),
                    bytes,
                }),
            })
        });
    let mut manifest = packer::write_csv_shards(records, &config.shards, &shards_dir)?;
    manifest.config = config.echo();
    manifest.dropped = dropped_counts(&store)?;
    manifest.check()?;
    fs::write(store.manifest(), manifest.to_toml()?)?;
    log::info!(
        "packed {} records into {} zip files",
        manifest.total_records,
        manifest.zip_shards.len()
    );
    Ok(manifest)
}

fn dropped_counts(store: &Store) -> Result<BTreeMap<String, u64>, CliError> {
    let mut dropped = BTreeMap::new();
    if let Ok(text) = fs::read_to_string(store.extract_summary()) {
        let summary: ExtractSummary =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("extract summary: {e}")))?;
        let t = summary.totals;
        dropped.insert("silence".to_string(), t.silence_dropped);
        dropped.insert("dark".to_string(), t.dark_dropped);
        dropped.insert("no_frame".to_string(), t.no_frame_dropped);
        dropped.insert("subsample".to_string(), t.subsample_dropped);
    }
    if store.caption_drops().exists() {
        dropped.insert(
            "caption".to_string(),
            store.read_tsv(&store.caption_drops())?.len() as u64,
        );
    }
    Ok(dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StatsKind {
    Words,
    Amplitude,
    Adi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StatsSource {
    /// Shards when a manifest exists, otherwise the pair store.
    Auto,
    Pairs,
    Shards,
}

/// Where analytics read captions and clips from.
enum Corpus {
    Pairs { store: Store, ids: Vec<u64> },
    Shards { rows: Vec<packer::PackedRow> },
}

impl Corpus {
    fn open(store: &Store, source: StatsSource, need_captions: bool) -> Result<Self, CliError> {
        let use_shards = match source {
            StatsSource::Shards => true,
            StatsSource::Pairs => false,
            StatsSource::Auto => store.manifest().exists(),
        };
        if use_shards {
            store.require(&store.manifest())?;
            let manifest = ShardManifest::from_toml(&fs::read_to_string(store.manifest())?)?;
            let rows = packer::read_shards(&store.shards_dir(), &manifest)?;
            return Ok(Self::Shards { rows });
        }
        let ids = if need_captions {
            store
                .read_tsv(&store.captions())?
                .into_iter()
                .map(|(id, _)| id)
                .collect()
        } else {
            store.read_index()?.into_iter().map(|e| e.id).collect()
        };
        Ok(Self::Pairs {
            store: store.clone(),
            ids,
        })
    }

    fn captions(&self) -> Result<Vec<String>, CliError> {
        match self {
            Self::Shards { rows } => Ok(rows.iter().map(|r| r.text.clone()).collect()),
            Self::Pairs { store, .. } => Ok(store
                .read_tsv(&store.captions())?
                .into_iter()
                .map(|(_, t)| t)
                .collect()),
        }
    }

    /// Hands clips to `f` in batches, in id order.
    fn for_each_batch(
        &self,
        mut f: impl FnMut(&[AudioClip]) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        match self {
            Self::Shards { rows } => {
                for chunk in rows.chunks(STATS_BATCH) {
                    let clips: Vec<AudioClip> = chunk.iter().map(|r| r.audio.clone()).collect();
                    f(&clips)?;
                }
            }
            Self::Pairs { store, ids } => {
                for chunk in ids.chunks(STATS_BATCH) {
                    let clips = chunk
                        .iter()
                        .map(|id| Ok(decode_wav(&fs::read(store.wav(*id))?)?))
                        .collect::<Result<Vec<_>, CliError>>()?;
                    f(&clips)?;
                }
            }
        }
        Ok(())
    }
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = toml::to_string(value)
        .map_err(|e| CliError::Usage(format!("report serialization: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

fn load_stoplist(config: &RunConfig) -> Result<BTreeSet<String>, CliError> {
    match &config.stoplist {
        None => Ok(analytics::default_stoplist()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read stoplist {}: {e}", path.display()))
            })?;
            Ok(text.split_whitespace().map(str::to_lowercase).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSummary {
    pub bins: usize,
    pub clips: u64,
    pub max_count: u64,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatsReport {
    Words(WordStatsReport),
    Amplitude(AmplitudeSummary),
    Adi(AdiReport),
}

/// Computes one report and writes it under `reports/`.
pub fn run_stats(
    config: &RunConfig,
    kind: StatsKind,
    source: StatsSource,
) -> Result<StatsReport, CliError> {
    config.validate()?;
    let store = Store::new(&config.out);
    let corpus = Corpus::open(&store, source, kind == StatsKind::Words)?;
    fs::create_dir_all(store.reports_dir())?;
    crate::with_workers(config.workers, || {
        compute_stats(config, &store, &corpus, kind)
    })
}

fn compute_stats(
    config: &RunConfig,
    store: &Store,
    corpus: &Corpus,
    kind: StatsKind,
) -> Result<StatsReport, CliError> {
    match kind {
        StatsKind::Words => {
            let captions = corpus.captions()?;
            let counter: WordCounter = analytics::count_words(&captions);
            let report = counter.report(&load_stoplist(config)?, config.top_words)?;
            write_toml(&store.reports_dir().join("words.toml"), &report)?;
            Ok(StatsReport::Words(report))
        }
        StatsKind::Amplitude => {
            let mut total: Option<AmplitudeMatrix> = None;
            corpus.for_each_batch(|clips| {
                let part = analytics::amplitude_matrix(clips, config.amp_bins)?;
                total = Some(match total.take() {
                    Some(t) => t.merge(part),
                    None => part,
                });
                Ok(())
            })?;
            let total = total.ok_or(avt_core::Error::EmptyCorpus)?;
            let image = "amplitude.pgm";
            let mut out =
                std::io::BufWriter::new(fs::File::create(store.reports_dir().join(image))?);
            total.write_pgm(&mut out)?;
            std::io::Write::flush(&mut out)?;
            let summary = AmplitudeSummary {
                bins: total.bins(),
                clips: total.clips(),
                max_count: total.max_count(),
                image: image.to_string(),
            };
            write_toml(&store.reports_dir().join("amplitude.toml"), &summary)?;
            Ok(StatsReport::Amplitude(summary))
        }
        StatsKind::Adi => {
            let mut total = GroupedPower::new(config.adi_bins);
            corpus.for_each_batch(|clips| {
                let part = analytics::grouped_power(clips, config.adi_bins)?;
                total = std::mem::replace(&mut total, GroupedPower::new(0)).merge(part);
                Ok(())
            })?;
            let report = total.report()?;
            write_toml(&store.reports_dir().join("adi.toml"), &report)?;
            Ok(StatsReport::Adi(report))
        }
    }
}
