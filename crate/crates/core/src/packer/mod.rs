//! Dataset serialization: WAV and image files, CSV data tables grouped into
//! zip shards, and a manifest describing the shard layout.
//!
//! Each CSV has the header `id,text,audio`. The audio column holds the
//! clip's 16,000 samples as space-separated integers, or in path mode the
//! zip-relative path of the clip's WAV file. A zip holds up to
//! `csvs_per_zip` CSVs plus the images (and, in path mode, WAVs) of their rows.

mod image;
mod wav;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::error::{Error, Result};
use crate::media::{AudioClip, CLIP_SAMPLES};

pub use self::image::{decode_image, encode_image, EncodedImage, ImageFormat};
pub use self::wav::{decode_wav, encode_wav, HEADER_LEN as WAV_HEADER_LEN, WAV_FILE_LEN};

/// One row of the final data table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionedRecord {
    pub id: u64,
    pub text: String,
    pub audio: AudioClip,
    pub image: Option<EncodedImage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardOptions {
    pub rows_per_csv: usize,
    pub csvs_per_zip: usize,
    pub audio_as_path: bool,
}

impl Default for ShardOptions {
    fn default() -> Self {
        Self {
            rows_per_csv: 2_500,
            csvs_per_zip: 4,
            audio_as_path: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvShard {
    pub file: String,
    pub zip: String,
    pub first_id: u64,
    pub last_id: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZipShard {
    pub file: String,
    pub csv_files: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub total_records: usize,
    pub audio_as_path: bool,
    /// Echo of the run configuration that produced the shards.
    pub config: BTreeMap<String, String>,
    /// Observations removed before packing, keyed by reason.
    pub dropped: BTreeMap<String, u64>,
    pub csv_shards: Vec<CsvShard>,
    pub zip_shards: Vec<ZipShard>,
}

impl ShardManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| Error::InvalidConfig(format!("manifest serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::MalformedShard(format!("manifest: {e}")))
    }

    /// Checks row conservation and that id ranges are disjoint and ascending.
    /// Gaps are allowed: dropped captions leave holes in the id sequence.
    pub fn check(&self) -> Result<()> {
        let rows: usize = self.csv_shards.iter().map(|c| c.rows).sum();
        if rows != self.total_records {
            return Err(Error::MalformedShard(format!(
                "{rows} rows listed, {} records",
                self.total_records
            )));
        }
        if let Some(c) = self
            .csv_shards
            .iter()
            .find(|c| c.first_id > c.last_id || c.rows == 0)
        {
            return Err(Error::MalformedShard(format!(
                "{} has an empty id range",
                c.file
            )));
        }
        for pair in self.csv_shards.windows(2) {
            if pair[1].first_id <= pair[0].last_id {
                return Err(Error::MalformedShard(format!(
                    "{} ends at {} but {} starts at {}",
                    pair[0].file, pair[0].last_id, pair[1].file, pair[1].first_id
                )));
            }
        }
        Ok(())
    }
}

fn audio_field(clip: &AudioClip) -> String {
    let mut s = String::with_capacity(CLIP_SAMPLES * 6);
    for (i, v) in clip.samples().iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&v.to_string());
    }
    s
}

fn parse_audio_field(field: &str) -> Result<AudioClip> {
    let samples = field
        .split(' ')
        .map(|t| {
            t.parse::<i16>()
                .map_err(|_| Error::MalformedShard(format!("bad sample {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    AudioClip::new(samples, 0).map_err(|e| Error::MalformedShard(e.to_string()))
}

fn zip_options() -> SimpleFileOptions {
    SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644)
}

fn stored_options() -> SimpleFileOptions {
    zip_options().compression_method(CompressionMethod::Stored)
}

struct ZipInProgress {
    final_path: PathBuf,
    partial_path: PathBuf,
    writer: ZipWriter<BufWriter<File>>,
    shard: ZipShard,
}

fn csv_bytes(rows: &[CaptionedRecord], audio_as_path: bool) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(["id", "text", "audio"])?;
    for r in rows {
        let audio = if audio_as_path {
            format!("audio/{}.wav", r.id)
        } else {
            audio_field(&r.audio)
        };
        w.write_record([r.id.to_string().as_str(), r.text.as_str(), audio.as_str()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes records (sorted by id) into CSV tables of `rows_per_csv` rows,
/// grouped into zip files of `csvs_per_zip` tables, under `dir`.
///
/// On failure every shard written by this call is removed.
pub fn write_csv_shards<I>(records: I, options: &ShardOptions, dir: &Path) -> Result<ShardManifest>
where
    I: IntoIterator<Item = Result<CaptionedRecord>>,
{
    let mut written = Vec::new();
    let result = write_shards_inner(records, options, dir, &mut written);
    if result.is_err() {
        for path in written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn write_shards_inner<I>(
    records: I,
    options: &ShardOptions,
    dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<ShardManifest>
where
    I: IntoIterator<Item = Result<CaptionedRecord>>,
{
    if options.rows_per_csv == 0 || options.csvs_per_zip == 0 {
        return Err(Error::InvalidConfig("shard sizes must be positive".into()));
    }
    fs::create_dir_all(dir)?;
    let mut manifest = ShardManifest {
        audio_as_path: options.audio_as_path,
        ..Default::default()
    };
    let mut batch: Vec<CaptionedRecord> = Vec::with_capacity(options.rows_per_csv.min(4096));
    let mut current: Option<ZipInProgress> = None;
    let mut last_id: Option<u64> = None;

    let flush = |batch: &mut Vec<CaptionedRecord>,
                 current: &mut Option<ZipInProgress>,
                 manifest: &mut ShardManifest,
                 written: &mut Vec<PathBuf>|
     -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        if current.is_none() {
            let name = format!("shard_{:05}.zip", manifest.zip_shards.len());
            let final_path = dir.join(&name);
            let partial_path = dir.join(format!("{name}.partial"));
            written.push(partial_path.clone());
            let writer = ZipWriter::new(BufWriter::new(File::create(&partial_path)?));
            *current = Some(ZipInProgress {
                final_path,
                partial_path,
                writer,
                shard: ZipShard {
                    file: name,
                    csv_files: Vec::new(),
                    rows: 0,
                },
            });
        }
        let zip = current.as_mut().expect("opened above");
        let csv_name = format!("data_{:05}.csv", manifest.csv_shards.len());
        zip.writer.start_file(csv_name.as_str(), zip_options())?;
        zip.writer
            .write_all(&csv_bytes(batch, options.audio_as_path)?)?;
        for r in batch.iter() {
            if let Some(img) = &r.image {
                zip.writer.start_file(
                    format!("images/{}.{}", r.id, img.extension),
                    stored_options(),
                )?;
                zip.writer.write_all(&img.bytes)?;
            }
            if options.audio_as_path {
                zip.writer
                    .start_file(format!("audio/{}.wav", r.id), stored_options())?;
                zip.writer.write_all(&encode_wav(&r.audio))?;
            }
        }
        manifest.csv_shards.push(CsvShard {
            file: csv_name.clone(),
            zip: zip.shard.file.clone(),
            first_id: batch[0].id,
            last_id: batch[batch.len() - 1].id,
            rows: batch.len(),
        });
        manifest.total_records += batch.len();
        zip.shard.csv_files.push(csv_name);
        zip.shard.rows += batch.len();
        batch.clear();
        if zip.shard.csv_files.len() == options.csvs_per_zip {
            close_zip(current.take().expect("checked above"), manifest, written)?;
        }
        Ok(())
    };

    for record in records {
        let record = record?;
        if last_id.is_some_and(|prev| record.id <= prev) {
            return Err(Error::InvalidConfig(format!(
                "records not sorted by id at {}",
                record.id
            )));
        }
        last_id = Some(record.id);
        batch.push(record);
        if batch.len() == options.rows_per_csv {
            flush(&mut batch, &mut current, &mut manifest, written)?;
        }
    }
    flush(&mut batch, &mut current, &mut manifest, written)?;
    if let Some(zip) = current.take() {
        close_zip(zip, &mut manifest, written)?;
    }
    Ok(manifest)
}

fn close_zip(
    zip: ZipInProgress,
    manifest: &mut ShardManifest,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut inner = zip.writer.finish()?;
    inner.flush()?;
    drop(inner);
    fs::rename(&zip.partial_path, &zip.final_path)?;
    written.push(zip.final_path);
    manifest.zip_shards.push(zip.shard);
    Ok(())
}

/// A row read back from the shards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedRow {
    pub id: u64,
    pub text: String,
    pub audio: AudioClip,
}

/// Reads every row of every CSV listed in the manifest, in manifest order.
pub fn read_shards(dir: &Path, manifest: &ShardManifest) -> Result<Vec<PackedRow>> {
    let mut rows = Vec::with_capacity(manifest.total_records);
    for zip_shard in &manifest.zip_shards {
        let mut archive = ZipArchive::new(File::open(dir.join(&zip_shard.file))?)?;
        for csv_name in &zip_shard.csv_files {
            let mut bytes = Vec::new();
            archive.by_name(csv_name)?.read_to_end(&mut bytes)?;
            let mut reader = csv::Reader::from_reader(&bytes[..]);
            let headers = reader.headers()?.clone();
            if headers.iter().collect::<Vec<_>>() != ["id", "text", "audio"] {
                return Err(Error::MalformedShard(format!(
                    "{csv_name}: unexpected header {headers:?}"
                )));
            }
            for record in reader.records() {
                let record = record?;
                let id: u64 = record[0].parse().map_err(|_| {
                    Error::MalformedShard(format!("{csv_name}: bad id {:?}", &record[0]))
                })?;
                let audio = if manifest.audio_as_path {
                    let mut wav = Vec::new();
                    archive.by_name(&record[2])?.read_to_end(&mut wav)?;
                    decode_wav(&wav)?
                } else {
                    parse_audio_field(&record[2])?
                };
                rows.push(PackedRow {
                    id,
                    text: record[1].to_string(),
                    audio,
                });
            }
        }
    }
    Ok(rows)
}

/// Reads an image stored in a zip shard.
pub fn read_shard_image(dir: &Path, zip_file: &str, name: &str) -> Result<Vec<u8>> {
    let mut archive = ZipArchive::new(File::open(dir.join(zip_file))?)?;
    let mut bytes = Vec::new();
    archive.by_name(name)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}
