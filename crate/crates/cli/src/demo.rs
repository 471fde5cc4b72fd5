//! A small synthetic corpus in the built-in container format, used by
//! `make-fixtures` and the integration tests.

use std::path::{Path, PathBuf};

use avt_core::media::Fps;
use avt_core::synth::fixtures::{busy_audio, letterbox, scene_frame};
use avt_core::synth::{write_synth, SynthHeader};

use crate::CliError;

const W: u32 = 96;
const H: u32 = 72;

fn header(width: u32, height: u32, frames: u64, samples: u64) -> SynthHeader {
    SynthHeader {
        width,
        height,
        fps: Fps::integer(30).expect("30 fps is valid"),
        frames,
        samples,
        has_video: true,
        has_audio: true,
    }
}

/// Writes four short videos into `dir` and returns their paths in sorted order:
///
/// * `a_scene`: 10.7 s, one scene, never silent
/// * `b_cut`: two 4 s scenes separated by a hard cut
/// * `c_quiet`: 10 s with 3 s of digital silence in the middle
/// * `d_letterbox`: 5 s scene inside 8-pixel black bars
pub fn write_demo_corpus(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();

    let path = dir.join("a_scene.avtsyn");
    let frame = scene_frame(W, H, 0);
    write_synth(
        &path,
        &header(W, H, 321, 171_200),
        |_| frame.clone(),
        &busy_audio(171_200, 3_000),
    )?;
    paths.push(path);

    let path = dir.join("b_cut.avtsyn");
    let (first, second) = (scene_frame(W, H, 1), scene_frame(W, H, 5));
    write_synth(
        &path,
        &header(W, H, 240, 128_000),
        |k| {
            if k < 120 {
                first.clone()
            } else {
                second.clone()
            }
        },
        &busy_audio(128_000, 2_000),
    )?;
    paths.push(path);

    let path = dir.join("c_quiet.avtsyn");
    let mut audio = busy_audio(160_000, 4_000);
    audio[56_000..104_000].fill(0);
    let frame = scene_frame(W, H, 2);
    write_synth(
        &path,
        &header(W, H, 300, 160_000),
        |_| frame.clone(),
        &audio,
    )?;
    paths.push(path);

    let path = dir.join("d_letterbox.avtsyn");
    let boxed = letterbox(&scene_frame(W, H, 3), W, H, 8);
    let audio: Vec<i16> = (0..80_000)
        .map(|t| {
            (6_000.0 * (2.0 * std::f64::consts::PI * 440.0 * t as f64 / 16_000.0).sin()) as i16
        })
        .collect();
    write_synth(
        &path,
        &header(W + 16, H + 16, 150, 80_000),
        |_| boxed.clone(),
        &audio,
    )?;
    paths.push(path);

    Ok(paths)
}
