//! Stage drivers behind the `avt` binary: extract, caption, pack and stats
//! over an on-disk store.

pub mod config;
pub mod demo;
pub mod stages;
pub mod store;

pub use config::{DecoderChoice, RunConfig};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("no usable input: {0}")]
    NoInput(String),
    #[error("store not found: {}", .0.display())]
    MissingStore(PathBuf),
    #[error("every observation was dropped: {0}")]
    AllDropped(String),
    #[error(transparent)]
    Core(#[from] avt_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 usage, 2 no usable input, 3 stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::NoInput(_) | Self::MissingStore(_) => 2,
            Self::AllDropped(_) | Self::Core(_) | Self::Io(_) => 3,
        }
    }
}

/// Runs `f` on a pool of `workers` threads (or inline without the `parallel` feature).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
        {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}), running on the current thread");
                f()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}
