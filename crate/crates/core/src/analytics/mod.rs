//! Dataset statistics: caption vocabulary, amplitude-by-time counts and the
//! acoustic diversity index. Every accumulator merges exactly, so results do
//! not depend on how clips were split across threads.

pub mod adi;
pub mod amplitude;
pub mod spectrum;
pub mod words;

pub use adi::{
    adi, classify_adi, grouped_power, shannon, AdiClass, AdiReport, GroupedPower, MelBinning,
};
pub use amplitude::{amplitude_matrix, AmplitudeMatrix};
pub use spectrum::{hann, SpectrumAnalyzer};
pub use words::{
    count_words, default_stoplist, tokenize, word_stats, WordCounter, WordStatsReport,
};
