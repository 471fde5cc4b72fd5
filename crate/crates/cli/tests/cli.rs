use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn avt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avt"))
        .args(args)
        .output()
        .expect("avt runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn corpus(dir: &Path) -> String {
    let corpus = dir.join("corpus");
    avt::demo::write_demo_corpus(&corpus).unwrap();
    corpus.to_string_lossy().into_owned()
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(code(&avt(&["extract", "--no-such-flag"])), 1);
    assert_eq!(code(&avt(&["stats", "entropy"])), 1);
}

#[test]
fn empty_input_dir_means_no_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = dir.path().join("out");
    let r = avt(&[
        "extract",
        empty.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 2, "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn unreadable_videos_are_skipped_and_all_failing_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.avtsyn");
    fs::write(&bad, b"not a video").unwrap();
    let out = dir.path().join("out");
    let r = avt(&[
        "extract",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 2);
    let summary = fs::read_to_string(out.join("extract_summary.toml")).unwrap();
    assert!(summary.contains("video_id = \"bad\""), "{summary}");

    let corpus = corpus(dir.path());
    let r = avt(&[
        "extract",
        &corpus,
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn stages_without_a_store_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nothing");
    let out = out.to_str().unwrap();
    assert_eq!(code(&avt(&["caption", "--out", out])), 2);
    assert_eq!(code(&avt(&["pack", "--out", out])), 2);
    assert_eq!(code(&avt(&["stats", "adi", "--out", out])), 2);
}

#[test]
fn extract_reports_per_video_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let out = dir.path().join("out");
    let r = avt(&[
        "extract",
        &corpus,
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let summary: toml::Value =
        toml::from_str(&fs::read_to_string(out.join("extract_summary.toml")).unwrap()).unwrap();
    let videos = summary["videos"].as_array().unwrap();
    assert_eq!(videos.len(), 4);
    let windows = |v: &toml::Value| -> Vec<i64> {
        v["fragments"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| f["windows"].as_integer().unwrap())
            .collect()
    };
    // 10.7 s scene, two 4 s scenes, 10 s with silence, 5 s letterboxed
    assert_eq!(windows(&videos[0]), vec![10]);
    assert_eq!(windows(&videos[1]), vec![4, 4]);
    assert_eq!(windows(&videos[2]), vec![10]);
    assert_eq!(windows(&videos[3]), vec![5]);
    for v in videos {
        for f in v["fragments"].as_array().unwrap() {
            let n = |k: &str| f[k].as_integer().unwrap();
            assert_eq!(
                n("windows"),
                n("silence_dropped")
                    + n("dark_dropped")
                    + n("no_frame_dropped")
                    + n("subsample_dropped")
                    + n("emitted")
            );
        }
    }
    let quiet = &videos[2]["fragments"][0];
    assert_eq!(quiet["silence_dropped"].as_integer(), Some(4));
    let index = fs::read_to_string(out.join("pairs/index.tsv")).unwrap();
    assert_eq!(
        index.lines().count() as i64 - 1,
        summary["pairs"].as_integer().unwrap()
    );
    for id in 0..summary["pairs"].as_integer().unwrap() {
        assert_eq!(
            fs::metadata(out.join(format!("pairs/{id}.wav")))
                .unwrap()
                .len(),
            32_044
        );
        let img = image_dims(&out.join(format!("pairs/{id}.jpg")));
        assert_eq!(img, (512, 512));
    }
}

fn image_dims(path: &Path) -> (u32, u32) {
    let f = avt_core::packer::decode_image(&fs::read(path).unwrap()).unwrap();
    (f.width(), f.height())
}

#[test]
fn flags_override_config_file_and_manifest_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        format!(
            "input = {corpus}\nout = {}\nkeep_every = 1\nrows_per_csv = 4\nsize = 128\n",
            out.display()
        ),
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(
        code(&avt(&["extract", "--config", cfg, "--keep-every", "2"])),
        0
    );
    assert_eq!(code(&avt(&["caption", "--config", cfg])), 0);
    assert_eq!(
        code(&avt(&["pack", "--config", cfg, "--keep-every", "2"])),
        0
    );
    assert_eq!(image_dims(&out.join("pairs/0.jpg")), (128, 128));

    let manifest = avt_core::packer::ShardManifest::from_toml(
        &fs::read_to_string(out.join("shards/manifest.toml")).unwrap(),
    )
    .unwrap();
    manifest.check().unwrap();
    assert_eq!(manifest.config["keep_every"], "2");
    assert_eq!(manifest.config["rows_per_csv"], "4");
    assert!(!manifest.config.contains_key("out"));
    assert!(manifest.csv_shards.iter().all(|c| c.rows <= 4));
    let captions = fs::read_to_string(out.join("captions.tsv")).unwrap();
    assert_eq!(manifest.total_records, captions.lines().count() - 1);
    // keep-every 2 over 29 surviving windows split across 5 fragments
    assert_eq!(manifest.dropped["silence"], 4);
    assert_eq!(
        manifest.total_records as u64 + manifest.dropped["subsample"],
        29
    );
}

#[test]
fn stats_agree_between_pair_store_and_shards() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    for step in [
        vec!["extract", corpus.as_str()],
        vec!["caption"],
        vec!["pack", "--audio-as-path"],
    ] {
        let mut args = step.clone();
        args.extend(["--out", o]);
        assert_eq!(code(&avt(&args)), 0, "{step:?}");
    }
    for which in ["words", "amplitude", "adi"] {
        assert_eq!(
            code(&avt(&["stats", which, "--from", "pairs", "--out", o])),
            0
        );
    }
    let from_pairs: Vec<Vec<u8>> = ["words.toml", "amplitude.pgm", "adi.toml"]
        .iter()
        .map(|f| fs::read(out.join("reports").join(f)).unwrap())
        .collect();
    for which in ["words", "amplitude", "adi"] {
        assert_eq!(
            code(&avt(&["stats", which, "--from", "shards", "--out", o])),
            0
        );
    }
    let from_shards: Vec<Vec<u8>> = ["words.toml", "amplitude.pgm", "adi.toml"]
        .iter()
        .map(|f| fs::read(out.join("reports").join(f)).unwrap())
        .collect();
    assert_eq!(from_pairs, from_shards);

    let adi: toml::Value =
        toml::from_str(&String::from_utf8(from_pairs[2].clone()).unwrap()).unwrap();
    let adi_value = adi["adi"].as_float().unwrap();
    assert!((0.0..=32f64.ln()).contains(&adi_value));
    assert_eq!(adi["probabilities"].as_array().unwrap().len(), 32);
    assert!(["low", "medium", "high"].contains(&adi["class"].as_str().unwrap()));
}

#[test]
fn external_captioner_failures_are_logged_and_total_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(code(&avt(&["extract", &corpus, "--out", o])), 0);

    // captions every image except those whose id ends in 1
    let plugin = dir.path().join("plugin.sh");
    fs::write(
        &plugin,
        "#!/bin/sh\nwhile read cmd path; do\n  id=$(basename \"$path\" .jpg)\n  case \"$id\" in\n    *1) echo \"ERR refused\" ;;\n    *) echo \"OK a photo of item $id with $AVT_BEAMS beams\" ;;\n  esac\ndone\n",
    )
    .unwrap();
    let cmd = format!("sh {}", plugin.display());
    let r = avt(&[
        "caption",
        "--out",
        o,
        "--captioner-command",
        &cmd,
        "--beams",
        "3",
        "--workers",
        "2",
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let captions = fs::read_to_string(out.join("captions.tsv")).unwrap();
    assert!(
        captions.contains("0\ta photo of item 0 with 3 beams"),
        "{captions}"
    );
    let drops = fs::read_to_string(out.join("caption_drops.tsv")).unwrap();
    assert!(
        drops
            .lines()
            .skip(1)
            .all(|l| l.split('\t').next().unwrap().ends_with('1')),
        "{drops}"
    );
    assert!(drops.lines().count() > 1);

    let failing = dir.path().join("fail.sh");
    fs::write(
        &failing,
        "#!/bin/sh\nwhile read line; do echo \"ERR no model\"; done\n",
    )
    .unwrap();
    let cmd = format!("sh {}", failing.display());
    assert_eq!(
        code(&avt(&["caption", "--out", o, "--captioner-command", &cmd])),
        3
    );
}

#[test]
fn all_silent_corpus_fails_adi_with_exit_3() {
    use avt_core::media::Fps;
    use avt_core::synth::fixtures::scene_frame;
    use avt_core::synth::{write_synth, SynthHeader};
    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("mute.avtsyn");
    let header = SynthHeader {
        width: 96,
        height: 72,
        fps: Fps::integer(30).unwrap(),
        frames: 90,
        samples: 48_000,
        has_video: true,
        has_audio: true,
    };
    let frame = scene_frame(96, 72, 4);
    write_synth(&video, &header, |_| frame.clone(), &vec![0; 48_000]).unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    // a silence run longer than a clip can never be found, so muted clips survive
    let r = avt(&[
        "extract",
        video.to_str().unwrap(),
        "--out",
        o,
        "--silence-dur",
        "2",
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(code(&avt(&["stats", "adi", "--out", o])), 3);
}

#[test]
fn synth_decode_serves_the_container() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(dir.path());
    let video = Path::new(&corpus).join("a_scene.avtsyn");
    let probe = avt(&["synth-decode", "probe", video.to_str().unwrap()]);
    let text = String::from_utf8(probe.stdout).unwrap();
    assert!(
        text.contains("width=96") && text.contains("r_frame_rate=30/1"),
        "{text}"
    );
    let audio = avt(&["synth-decode", "audio", video.to_str().unwrap()]);
    assert_eq!(audio.stdout.len(), 171_200 * 2);
}
