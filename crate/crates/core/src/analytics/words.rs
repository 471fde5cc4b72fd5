use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Prepositions, pronouns, conjunctions and determiners.
pub const DEFAULT_STOPLIST: &[&str] = &[
    // determiners
    "a",
    "an",
    "the",
    "this",
    "that",
    "these",
    "those",
    "my",
    "your",
    "his",
    "her",
    "its",
    "our",
    "their",
    "some",
    "any",
    "each",
    "every",
    "either",
    "neither",
    "no",
    "all",
    "both",
    "another",
    "such",
    "what",
    "which",
    "whose",
    "much",
    "many",
    "few",
    "several",
    "enough",
    // pronouns
    "i",
    "me",
    "mine",
    "myself",
    "you",
    "yours",
    "yourself",
    "yourselves",
    "he",
    "him",
    "himself",
    "she",
    "hers",
    "herself",
    "it",
    "itself",
    "we",
    "us",
    "ours",
    "ourselves",
    "they",
    "them",
    "theirs",
    "themselves",
    "who",
    "whom",
    "someone",
    "somebody",
    "something",
    "anyone",
    "anybody",
    "anything",
    "everyone",
    "everybody",
    "everything",
    "nobody",
    "nothing",
    "one",
    "ones",
    // prepositions
    "about",
    "above",
    "across",
    "after",
    "against",
    "along",
    "amid",
    "among",
    "around",
    "as",
    "at",
    "before",
    "behind",
    "below",
    "beneath",
    "beside",
    "besides",
    "between",
    "beyond",
    "by",
    "despite",
    "down",
    "during",
    "except",
    "for",
    "from",
    "in",
    "inside",
    "into",
    "like",
    "near",
    "of",
    "off",
    "on",
    "onto",
    "out",
    "outside",
    "over",
    "past",
    "per",
    "since",
    "through",
    "throughout",
    "till",
    "to",
    "toward",
    "towards",
    "under",
    "underneath",
    "until",
    "up",
    "upon",
    "via",
    "with",
    "within",
    "without",
    // conjunctions
    "and",
    "but",
    "or",
    "nor",
    "so",
    "yet",
    "because",
    "although",
    "though",
    "while",
    "whereas",
    "if",
    "unless",
    "whether",
    "than",
    "once",
    "when",
    "whenever",
    "where",
    "wherever",
];

pub fn default_stoplist() -> BTreeSet<String> {
    DEFAULT_STOPLIST.iter().map(|s| s.to_string()).collect()
}

/// Mergeable caption statistics: integer sums only, so merge order never
/// changes the result.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordCounter {
    pub captions: u64,
    pub word_sum: u64,
    pub word_sq_sum: u128,
    /// Number of captions each word appears in (at least once).
    pub presence: BTreeMap<String, u64>,
}

impl WordCounter {
    pub fn add_caption(&mut self, text: &str) {
        let tokens = tokenize(text);
        let n = tokens.len() as u64;
        self.captions += 1;
        self.word_sum += n;
        self.word_sq_sum += (n as u128) * (n as u128);
        let distinct: BTreeSet<String> = tokens.into_iter().collect();
        for word in distinct {
            *self.presence.entry(word).or_insert(0) += 1;
        }
    }

    pub fn merge(mut self, other: WordCounter) -> WordCounter {
        self.captions += other.captions;
        self.word_sum += other.word_sum;
        self.word_sq_sum += other.word_sq_sum;
        for (word, count) in other.presence {
            *self.presence.entry(word).or_insert(0) += count;
        }
        self
    }

    pub fn report(&self, stoplist: &BTreeSet<String>, top_k: usize) -> Result<WordStatsReport> {
        if self.captions == 0 {
            return Err(Error::EmptyCorpus);
        }
        let n = self.captions as f64;
        let mean = self.word_sum as f64 / n;
        // population variance from exact integer moments: (n * sum_sq - sum^2) / n^2
        let spread = self.captions as u128 * self.word_sq_sum - (self.word_sum as u128).pow(2);
        let std = (spread as f64).sqrt() / n;

        let mut kept: Vec<(&String, u64)> = self
            .presence
            .iter()
            .filter(|(w, _)| !stoplist.contains(*w))
            .map(|(w, &c)| (w, c))
            .collect();
        let distinct_after_stoplist = kept.len();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let top = kept
            .into_iter()
            .take(top_k)
            .map(|(w, c)| WordPresence {
                word: w.clone(),
                count: c,
                percent: c as f64 / n * 100.0,
            })
            .collect();
        Ok(WordStatsReport {
            captions: self.captions,
            mean_words: mean,
            std_words: std,
            distinct_words: self.presence.len(),
            distinct_after_stoplist,
            top,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordPresence {
    pub word: String,
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStatsReport {
    pub captions: u64,
    pub mean_words: f64,
    /// Population standard deviation of words per caption.
    pub std_words: f64,
    pub distinct_words: usize,
    pub distinct_after_stoplist: usize,
    pub top: Vec<WordPresence>,
}

/// Folds captions into a [`WordCounter`].
pub fn count_words<S: AsRef<str> + Sync>(captions: &[S]) -> WordCounter {
    crate::par::fold_reduce(
        captions,
        WordCounter::default,
        |mut acc, c| {
            acc.add_caption(c.as_ref());
            acc
        },
        WordCounter::merge,
    )
}

/// Word-count moments, vocabulary sizes and the `top_k` most present
/// non-stoplist words over a set of captions.
pub fn word_stats<S: AsRef<str> + Sync>(
    captions: &[S],
    stoplist: &BTreeSet<String>,
    top_k: usize,
) -> Result<WordStatsReport> {
    count_words(captions).report(stoplist, top_k)
}
