//! Captioning through a pluggable image-to-text process.
//!
//! Plugins speak a line protocol over stdin/stdout: each request is
//! `CAPTION <absolute image path>` and each response is `OK <caption>` or
//! `ERR <message>`. Generation settings are passed as the environment
//! variables `AVT_MIN_TOKENS`, `AVT_MAX_TOKENS` and `AVT_BEAMS`.
//!
//! A response line that is neither `OK` nor `ERR` means the plugin wrote
//! more (or other) than one line per request; it fails the current request
//! and the previous one, and the plugin is restarted. Output left over when
//! the plugin shuts down fails the last request. Failed requests are retried
//! once on a fresh process and dropped if they fail again.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionerKind {
    Mock,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionerSpec {
    pub kind: CaptionerKind,
    /// Plugin command line, split on whitespace (external kind only).
    pub command: Option<String>,
    pub min_tokens: u32,
    pub max_tokens: u32,
    pub beams: u32,
}

impl Default for CaptionerSpec {
    fn default() -> Self {
        Self {
            kind: CaptionerKind::Mock,
            command: None,
            min_tokens: 10,
            max_tokens: 20,
            beams: 2,
        }
    }
}

impl CaptionerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.min_tokens > self.max_tokens {
            return Err(Error::InvalidConfig("min_tokens exceeds max_tokens".into()));
        }
        if self.kind == CaptionerKind::External
            && self
                .command
                .as_deref()
                .map_or(true, |c| c.trim().is_empty())
        {
            return Err(Error::InvalidConfig(
                "external captioner needs a command".into(),
            ));
        }
        Ok(())
    }
}

/// Accepted caption length in whitespace-separated words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordBounds {
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for WordBounds {
    fn default() -> Self {
        Self {
            min_words: 1,
            max_words: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaptionViolation {
    Empty,
    MultiLine,
    ContainsTab,
    TooShort { words: usize, min: usize },
    TooLong { words: usize, max: usize },
}

impl fmt::Display for CaptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "empty"),
            Self::MultiLine => write!(f, "multi-line"),
            Self::ContainsTab => write!(f, "contains tab"),
            Self::TooShort { words, min } => write!(f, "too short ({words} < {min} words)"),
            Self::TooLong { words, max } => write!(f, "too long ({words} > {max} words)"),
        }
    }
}

/// Checks that `text` is a non-empty single line within the word bounds.
pub fn validate_caption(
    text: &str,
    bounds: WordBounds,
) -> std::result::Result<(), CaptionViolation> {
    if text.contains(['\n', '\r']) {
        return Err(CaptionViolation::MultiLine);
    }
    if text.contains('\t') {
        return Err(CaptionViolation::ContainsTab);
    }
    let words = text.split_whitespace().count();
    if words == 0 {
        return Err(CaptionViolation::Empty);
    }
    if words < bounds.min_words {
        return Err(CaptionViolation::TooShort {
            words,
            min: bounds.min_words,
        });
    }
    if words > bounds.max_words {
        return Err(CaptionViolation::TooLong {
            words,
            max: bounds.max_words,
        });
    }
    Ok(())
}

/// Deterministic stand-in caption: depends only on the image bytes and the id.
pub fn mock_caption(image_bytes: &[u8], id: u64) -> String {
    let digest = Sha256::digest(image_bytes);
    let hex: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    format!("synthetic caption for pair {id} hash {hex}")
}

/// One image to caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionJob {
    pub id: u64,
    pub image: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionOutcome {
    pub id: u64,
    pub result: std::result::Result<String, String>,
}

/// Maps images to captions. One instance is used by one worker thread.
pub trait Captioner {
    fn caption(&mut self, job: &CaptionJob) -> Result<String>;

    /// Whether the caption returned for the previous job turned out to be invalid.
    /// Reading the flag clears it.
    fn take_previous_invalidated(&mut self) -> bool {
        false
    }

    /// Called once after the last job; may retroactively fail the last caption.
    fn shutdown(&mut self) -> Result<()> {
        Ok(())
    }
}

pub struct MockCaptioner;

impl Captioner for MockCaptioner {
    fn caption(&mut self, job: &CaptionJob) -> Result<String> {
        let bytes = std::fs::read(&job.image)
            .map_err(|e| Error::CaptionerFailure(format!("{}: {e}", job.image.display())))?;
        Ok(mock_caption(&bytes, job.id))
    }
}

struct PluginProcess {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl PluginProcess {
    fn spawn(spec: &CaptionerSpec) -> Result<Self> {
        let command = spec.command.as_deref().unwrap_or_default();
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty captioner command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .env("AVT_MIN_TOKENS", spec.min_tokens.to_string())
            .env("AVT_MAX_TOKENS", spec.max_tokens.to_string())
            .env("AVT_BEAMS", spec.beams.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| {
                Error::CaptionerFailure(format!("cannot start plugin {program:?}: {e}"))
            })?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(Self {
            child,
            stdin,
            stdout,
        })
    }

    fn request(&mut self, image: &Path) -> std::io::Result<Option<String>> {
        let stdin = self.stdin.as_mut().expect("stdin open while serving");
        writeln!(stdin, "CAPTION {}", image.display())?;
        stdin.flush()?;
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
    }

    /// Closes stdin and returns whatever the plugin still printed.
    fn close(mut self) -> Vec<u8> {
        drop(self.stdin.take());
        let mut rest = Vec::new();
        let _ = self.stdout.read_to_end(&mut rest);
        let _ = self.child.wait();
        rest
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Talks to an external captioner plugin, restarting it after protocol errors.
pub struct PluginCaptioner {
    spec: CaptionerSpec,
    bounds: WordBounds,
    process: Option<PluginProcess>,
    /// Set when a later protocol violation shows the previous response was bogus.
    previous_invalidated: bool,
}

impl PluginCaptioner {
    pub fn new(spec: CaptionerSpec, bounds: WordBounds) -> Self {
        Self {
            spec,
            bounds,
            process: None,
            previous_invalidated: false,
        }
    }

    fn restart(&mut self) {
        if let Some(p) = self.process.take() {
            p.kill();
        }
    }
}

impl Captioner for PluginCaptioner {
    fn caption(&mut self, job: &CaptionJob) -> Result<String> {
        if self.process.is_none() {
            self.process = Some(PluginProcess::spawn(&self.spec)?);
        }
        let image = std::fs::canonicalize(&job.image).unwrap_or_else(|_| job.image.clone());
        let process = self.process.as_mut().expect("spawned above");
        let line = match process.request(&image) {
            Ok(Some(line)) => line,
            Ok(None) => {
                self.restart();
                return Err(Error::CaptionerFailure("plugin closed its output".into()));
            }
            Err(e) => {
                self.restart();
                return Err(Error::CaptionerFailure(format!("plugin i/o: {e}")));
            }
        };
        if let Some(text) = line.strip_prefix("OK ") {
            let text = text.trim();
            return validate_caption(text, self.bounds)
                .map(|()| text.to_string())
                .map_err(|v| Error::CaptionerFailure(format!("invalid caption: {v}")));
        }
        if let Some(msg) = line.strip_prefix("ERR") {
            return Err(Error::CaptionerFailure(format!(
                "plugin error: {}",
                msg.trim()
            )));
        }
        self.previous_invalidated = true;
        self.restart();
        Err(Error::CaptionerFailure(format!(
            "malformed plugin response {line:?}"
        )))
    }

    fn take_previous_invalidated(&mut self) -> bool {
        std::mem::take(&mut self.previous_invalidated)
    }

    fn shutdown(&mut self) -> Result<()> {
        if let Some(p) = self.process.take() {
            let rest = p.close();
            if !rest.iter().all(u8::is_ascii_whitespace) {
                return Err(Error::CaptionerFailure(
                    "plugin wrote extra output after its last response".into(),
                ));
            }
        }
        Ok(())
    }
}

fn run_worker(
    captioner: &mut dyn Captioner,
    jobs: &[CaptionJob],
    next: &AtomicUsize,
) -> Vec<CaptionOutcome> {
    let mut outcomes: Vec<CaptionOutcome> = Vec::new();
    loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(job) = jobs.get(i) else {
            break;
        };
        let result = captioner.caption(job).map_err(|e| e.to_string());
        if captioner.take_previous_invalidated() {
            if let Some(prev) = outcomes.last_mut() {
                if prev.result.is_ok() {
                    prev.result = Err("plugin wrote more than one line for this request".into());
                }
            }
        }
        outcomes.push(CaptionOutcome { id: job.id, result });
    }
    if let Err(e) = captioner.shutdown() {
        if let Some(last) = outcomes.last_mut() {
            if last.result.is_ok() {
                last.result = Err(e.to_string());
            }
        }
    }
    outcomes
}

/// Captions every job with up to `workers` captioner instances, retrying
/// failures once. The result is sorted by id and independent of scheduling.
pub fn caption_all(
    jobs: &[CaptionJob],
    spec: &CaptionerSpec,
    bounds: WordBounds,
    workers: usize,
) -> Result<Vec<CaptionOutcome>> {
    spec.validate()?;
    let first = caption_pass(jobs, spec, bounds, workers);
    let failed: Vec<CaptionJob> = first
        .iter()
        .filter(|o| o.result.is_err())
        .filter_map(|o| jobs.iter().find(|j| j.id == o.id).cloned())
        .collect();
    if failed.is_empty() {
        return Ok(first);
    }
    log::info!("retrying {} failed captions", failed.len());
    let retried = caption_pass(&failed, spec, bounds, workers);
    let mut merged: Vec<CaptionOutcome> = first.into_iter().filter(|o| o.result.is_ok()).collect();
    merged.extend(retried);
    merged.sort_by_key(|o| o.id);
    Ok(merged)
}

fn caption_pass(
    jobs: &[CaptionJob],
    spec: &CaptionerSpec,
    bounds: WordBounds,
    workers: usize,
) -> Vec<CaptionOutcome> {
    let next = AtomicUsize::new(0);
    let collected = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut captioner: Box<dyn Captioner> = match spec.kind {
                    CaptionerKind::Mock => Box::new(MockCaptioner),
                    CaptionerKind::External => Box::new(PluginCaptioner::new(spec.clone(), bounds)),
                };
                let outcomes = run_worker(captioner.as_mut(), jobs, &next);
                collected
                    .lock()
                    .expect("no worker panics while holding the lock")
                    .extend(outcomes);
            });
        }
    });
    let mut outcomes = collected.into_inner().expect("workers finished");
    for o in &mut outcomes {
        if let Ok(text) = &o.result {
            if let Err(v) = validate_caption(text, bounds) {
                o.result = Err(format!("invalid caption: {v}"));
            }
        }
    }
    outcomes.sort_by_key(|o| o.id);
    outcomes
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn validation_examples() {
        let b = WordBounds::default();
        assert_eq!(
            validate_caption("a man playing a guitar on stage", b),
            Ok(())
        );
        assert_eq!(validate_caption("", b), Err(CaptionViolation::Empty));
        assert_eq!(validate_caption("   ", b), Err(CaptionViolation::Empty));
        let long = vec!["word"; 21].join(" ");
        assert_eq!(
            validate_caption(&long, b),
            Err(CaptionViolation::TooLong { words: 21, max: 20 })
        );
        assert_eq!(
            validate_caption("two\nlines", b),
            Err(CaptionViolation::MultiLine)
        );
        assert_eq!(
            validate_caption("a\tb", b),
            Err(CaptionViolation::ContainsTab)
        );
        let tight = WordBounds {
            min_words: 3,
            max_words: 5,
        };
        assert_eq!(
            validate_caption("a b", tight),
            Err(CaptionViolation::TooShort { words: 2, min: 3 })
        );
    }

    #[test]
    fn mock_caption_shape() {
        let text = mock_caption(b"pixels", 42);
        assert!(text.starts_with("synthetic caption for pair 42 hash "));
        let hash = text.rsplit(' ').next().unwrap();
        assert_eq!(hash.len(), 8);
        assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(text, mock_caption(b"pixels", 42));
        assert_ne!(text, mock_caption(b"pixelz", 42));
        assert_eq!(validate_caption(&text, WordBounds::default()), Ok(()));
    }

    #[test]
    fn spec_validation() {
        assert!(CaptionerSpec::default().validate().is_ok());
        let bad = CaptionerSpec {
            min_tokens: 30,
            ..CaptionerSpec::default()
        };
        assert!(bad.validate().is_err());
        let no_cmd = CaptionerSpec {
            kind: CaptionerKind::External,
            ..CaptionerSpec::default()
        };
        assert!(no_cmd.validate().is_err());
    }

    fn jobs(dir: &Path, n: u64) -> Vec<CaptionJob> {
        (0..n)
            .map(|id| {
                let image = dir.join(format!("{id}.jpg"));
                fs::write(&image, format!("image {id}")).unwrap();
                CaptionJob { id, image }
            })
            .collect()
    }

    fn plugin(dir: &Path, body: &str) -> CaptionerSpec {
        let script = dir.join("plugin.sh");
        fs::write(&script, format!("#!/bin/sh\n{body}\n")).unwrap();
        CaptionerSpec {
            kind: CaptionerKind::External,
            command: Some(format!("sh {}", script.display())),
            ..CaptionerSpec::default()
        }
    }

    #[test]
    fn mock_pool_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let jobs = jobs(dir.path(), 9);
        let a = caption_all(&jobs, &CaptionerSpec::default(), WordBounds::default(), 4).unwrap();
        let b = caption_all(&jobs, &CaptionerSpec::default(), WordBounds::default(), 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 9);
        assert!(a.iter().all(|o| o.result.is_ok()));
    }

    #[test]
    fn plugin_protocol_and_env() {
        let dir = tempfile::tempdir().unwrap();
        let jobs = jobs(dir.path(), 5);
        let spec = plugin(
            dir.path(),
            r#"while read -r verb path; do
  [ "$verb" = CAPTION ] || { echo "ERR bad verb"; continue; }
  echo "OK a photo of $(basename "$path") min $AVT_MIN_TOKENS max $AVT_MAX_TOKENS beams $AVT_BEAMS"
done"#,
        );
        let out = caption_all(&jobs, &spec, WordBounds::default(), 2).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(
            out[3].result.as_deref(),
            Ok("a photo of 3.jpg min 10 max 20 beams 2")
        );
    }

    #[test]
    fn plugin_errors_are_dropped_after_retry() {
        let dir = tempfile::tempdir().unwrap();
        let jobs = jobs(dir.path(), 3);
        let spec = plugin(
            dir.path(),
            r#"while read -r verb path; do echo "ERR no model"; done"#,
        );
        let out = caption_all(&jobs, &spec, WordBounds::default(), 2).unwrap();
        assert!(out
            .iter()
            .all(|o| o.result.as_ref().unwrap_err().contains("no model")));
    }

    #[test]
    fn two_line_responses_fail() {
        let dir = tempfile::tempdir().unwrap();
        let jobs = jobs(dir.path(), 4);
        let spec = plugin(
            dir.path(),
            r#"while read -r verb path; do echo "OK first line"; echo "second line"; done"#,
        );
        let out = caption_all(&jobs, &spec, WordBounds::default(), 1).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|o| o.result.is_err()), "{out:?}");
        let single = caption_all(&jobs[..1], &spec, WordBounds::default(), 1).unwrap();
        assert!(single[0].result.is_err());
    }

    #[test]
    fn overlong_captions_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        let jobs = jobs(dir.path(), 2);
        let words = vec!["w"; 25].join(" ");
        let spec = plugin(
            dir.path(),
            &format!(r#"while read -r verb path; do echo "OK {words}"; done"#),
        );
        let out = caption_all(&jobs, &spec, WordBounds::default(), 1).unwrap();
        assert!(out
            .iter()
            .all(|o| o.result.as_ref().unwrap_err().contains("too long")));
    }

    #[test]
    fn flaky_plugin_recovers_on_retry() {
        let dir = tempfile::tempdir().unwrap();
        let jobs = jobs(dir.path(), 4);
        let marker = dir.path().join("seen");
        // the first process fails every request; restarted processes succeed
        let spec = plugin(
            dir.path(),
            &format!(
                r#"if [ -e {m} ]; then ok=1; else ok=0; touch {m}; fi
while read -r verb path; do
  if [ $ok = 1 ]; then echo "OK fine"; else echo "ERR warming up"; fi
done"#,
                m = marker.display()
            ),
        );
        let out = caption_all(&jobs, &spec, WordBounds::default(), 1).unwrap();
        assert!(
            out.iter().all(|o| o.result.as_deref() == Ok("fine")),
            "{out:?}"
        );
    }

    #[test]
    fn missing_plugin_binary_fails_every_job() {
        let dir = tempfile::tempdir().unwrap();
        let jobs = jobs(dir.path(), 2);
        let spec = CaptionerSpec {
            kind: CaptionerKind::External,
            command: Some("/nonexistent/captioner".into()),
            ..CaptionerSpec::default()
        };
        let out = caption_all(&jobs, &spec, WordBounds::default(), 1).unwrap();
        assert!(out.iter().all(|o| o.result.is_err()));
    }
}
