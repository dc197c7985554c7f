//! Seeded two-class corpus generator used by the benchmark and tests.
//!
//! Every document mixes three kinds of tokens:
//!
//! * stopwords (`stop00`, …) drawn from a Zipf-like law, the bulk of every
//!   document regardless of label;
//! * topic terms (`classa00`, `classb00`, …) of the document's class, each
//!   used about once, with a fraction leaking from the other class;
//! * label-independent noise terms (`noise000`, …). The first
//!   `bursty_terms` of them are bursty: when a document uses one it repeats
//!   it many times. The rest are filler words used once each.
//!
//! Bursty terms occur in few documents, so IDF rates them highly although
//! they carry no label information. Their total mass exceeds that of the
//! topic terms, which is what a volume-based metric looks at.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RawDocument;
use crate::error::{Error, Result};

pub const LABELS: [&str; 2] = ["a", "b"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub docs_per_class: usize,
    pub stopwords: usize,
    pub topic_terms_per_class: usize,
    pub noise_terms: usize,
    /// Leading noise terms that occur in bursts.
    pub bursty_terms: usize,
    /// Stopword tokens per document.
    pub stop_tokens: usize,
    /// Distinct topic terms per document.
    pub topic_tokens: usize,
    /// Repetitions of each chosen topic term (inclusive range).
    pub topic_repeats: (usize, usize),
    /// Chance that a topic token comes from the other class.
    pub leak: f64,
    /// Filler tokens per document, drawn uniformly from the non-bursty noise
    /// terms.
    pub filler_tokens: usize,
    /// Distinct bursty terms per document (inclusive range).
    pub bursts_per_doc: (usize, usize),
    /// Repetitions of each chosen bursty term (inclusive range).
    pub burst: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            docs_per_class: 200,
            stopwords: 20,
            topic_terms_per_class: 20,
            noise_terms: 140,
            stop_tokens: 100,
            topic_tokens: 8,
            topic_repeats: (1, 1),
            leak: 0.2,
            bursty_terms: 10,
            filler_tokens: 10,
            bursts_per_doc: (1, 1),
            burst: (4, 8),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn vocabulary_size(&self) -> usize {
        self.stopwords + 2 * self.topic_terms_per_class + self.noise_terms
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.docs_per_class == 0 || self.stopwords == 0 || self.topic_terms_per_class == 0 {
            return bad("document, stopword and topic counts must be positive");
        }
        if self.topic_tokens == 0 || self.topic_tokens > self.topic_terms_per_class {
            return bad("topic tokens per document must lie in 1..=topic terms per class");
        }
        if !(0.0..=1.0).contains(&self.leak) {
            return bad("leak must lie in [0, 1]");
        }
        if self.bursty_terms > self.noise_terms {
            return bad("more bursty terms than noise terms");
        }
        let (lo, hi) = self.bursts_per_doc;
        if lo > hi || hi > self.bursty_terms {
            return bad("invalid bursty terms per document");
        }
        if self.filler_tokens > 0 && self.bursty_terms == self.noise_terms {
            return bad("filler tokens need non-bursty noise terms");
        }
        if self.topic_repeats.0 == 0 || self.topic_repeats.0 > self.topic_repeats.1 {
            return bad("invalid topic repeat range");
        }
        if self.burst.0 == 0 || self.burst.0 > self.burst.1 {
            return bad("invalid burst range");
        }
        Ok(())
    }
}

fn stopword(i: usize) -> String {
    format!("stop{i:02}")
}

fn topic(class: usize, i: usize) -> String {
    format!("class{}{i:02}", LABELS[class])
}

fn noise(i: usize) -> String {
    format!("noise{i:03}")
}

/// Generates the corpus, classes interleaved (`a`, `b`, `a`, …).
///
/// Each stopword, topic term and noise term is forced into at least one
/// document whenever there are enough documents, so the vocabulary has
/// exactly [`SyntheticConfig::vocabulary_size`] terms.
pub fn generate(cfg: &SyntheticConfig) -> Result<Vec<RawDocument>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zipf = WeightedIndex::new((1..=cfg.stopwords).map(|r| 1.0 / r as f64))
        .map_err(|e| Error::Config(e.to_string()))?;
    let topic_ids: Vec<usize> = (0..cfg.topic_terms_per_class).collect();
    let total = 2 * cfg.docs_per_class;
    let mut docs = Vec::with_capacity(total);

    for d in 0..total {
        let class = d % 2;
        let mut tokens: Vec<String> = Vec::new();

        tokens.push(stopword(d % cfg.stopwords));
        for _ in 1..cfg.stop_tokens {
            tokens.push(stopword(zipf.sample(&mut rng)));
        }

        let first = (d / 2) % cfg.topic_terms_per_class;
        let mut chosen = vec![first];
        chosen.extend(
            topic_ids
                .choose_multiple(&mut rng, cfg.topic_tokens)
                .copied()
                .filter(|&t| t != first)
                .take(cfg.topic_tokens - 1),
        );
        for (j, &t) in chosen.iter().enumerate() {
            let from = if j > 0 && rng.random_bool(cfg.leak) { 1 - class } else { class };
            for _ in 0..rng.random_range(cfg.topic_repeats.0..=cfg.topic_repeats.1) {
                tokens.push(topic(from, t));
            }
        }

        let fillers = cfg.noise_terms - cfg.bursty_terms;
        for j in 0..cfg.filler_tokens {
            let t = if j == 0 { d % fillers } else { rng.random_range(0..fillers) };
            tokens.push(noise(cfg.bursty_terms + t));
        }

        let count = rng.random_range(cfg.bursts_per_doc.0..=cfg.bursts_per_doc.1);
        let mut picked: Vec<usize> = Vec::with_capacity(count + 1);
        if d < cfg.bursty_terms {
            picked.push(d);
        }
        while picked.len() < count {
            let t = rng.random_range(0..cfg.bursty_terms);
            if !picked.contains(&t) {
                picked.push(t);
            }
        }
        for t in picked {
            for _ in 0..rng.random_range(cfg.burst.0..=cfg.burst.1) {
                tokens.push(noise(t));
            }
        }

        tokens.shuffle(&mut rng);
        docs.push(RawDocument { id: format!("doc{d:04}"), label: LABELS[class].into(), text: tokens.join(" ") });
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dataset, PipelineConfig};

    #[test]
    fn default_corpus_shape() {
        let cfg = SyntheticConfig::default();
        let docs = generate(&cfg).unwrap();
        assert_eq!(docs.len(), 400);
        assert_eq!(docs.iter().filter(|d| d.label == "a").count(), 200);
        let data = Dataset::build(&docs, &PipelineConfig::default()).unwrap();
        assert_eq!(data.vocab.len(), 200);
        assert_eq!(cfg.vocabulary_size(), 200);
        assert!(!data.vocab.is_padded());
        assert!(data.rejected.is_empty());
    }

    #[test]
    fn stopwords_dominate() {
        let docs = generate(&SyntheticConfig::default()).unwrap();
        for d in &docs {
            let toks: Vec<&str> = d.text.split(' ').collect();
            let stops = toks.iter().filter(|t| t.starts_with("stop")).count();
            assert!(stops * 2 > toks.len(), "{}", d.id);
        }
    }

    #[test]
    fn seeded_and_reproducible() {
        let cfg = SyntheticConfig { seed: 3, ..Default::default() };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SyntheticConfig { seed: 4, ..Default::default() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SyntheticConfig { leak: 1.5, ..Default::default() };
        assert!(generate(&cfg).is_err());
        let cfg = SyntheticConfig { topic_tokens: 21, ..Default::default() };
        assert!(generate(&cfg).is_err());
    }
}
