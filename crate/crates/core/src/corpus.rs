//! From labeled text to simplex points and baseline representations.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// Appended to odd-sized vocabularies. Contains non-alphanumeric characters,
/// so no token can ever equal it.
pub const PAD_TERM: &str = "<pad>";

/// Default MAP pseudocount.
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// `<root>/<label>/<docid>.txt`
    Dir,
    /// One `{"id", "label", "text"}` object per line.
    Jsonl,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dir" => Ok(CorpusFormat::Dir),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::Config(format!("unknown corpus format '{other}'"))),
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<RawDocument>> {
    let docs = match format {
        CorpusFormat::Dir => load_dir(path)?,
        CorpusFormat::Jsonl => parse_jsonl(&fs::read_to_string(path)?)?,
    };
    if docs.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    Ok(docs)
}

fn sorted_entries(path: &Path) -> Result<Vec<fs::DirEntry>> {
    let mut entries = fs::read_dir(path)?.collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

fn load_dir(root: &Path) -> Result<Vec<RawDocument>> {
    let mut docs = Vec::new();
    for label_dir in sorted_entries(root)? {
        if !label_dir.file_type()?.is_dir() {
            continue;
        }
        let label = label_dir.file_name().to_string_lossy().into_owned();
        for file in sorted_entries(&label_dir.path())? {
            let path = file.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let bytes = fs::read(&path)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Io(format!("{} is not valid UTF-8", path.display())))?;
            let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            docs.push(RawDocument { id, label: label.clone(), text });
        }
    }
    Ok(docs)
}

/// Parses JSONL; blank lines are skipped, errors carry 1-based line numbers.
pub fn parse_jsonl(content: &str) -> Result<Vec<RawDocument>> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    padded: bool,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its ordered term list, e.g. from a model
    /// file. A trailing [`PAD_TERM`] marks it as padded.
    pub fn from_terms(terms: Vec<String>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Empty("vocabulary"));
        }
        let padded = terms.last().map(String::as_str) == Some(PAD_TERM);
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary term '{t}'")));
            }
        }
        Ok(Self { terms, index, padded })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_padded(&self) -> bool {
        self.padded
    }

    pub fn is_padding(&self, i: usize) -> bool {
        self.padded && i + 1 == self.terms.len()
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }
}

/// Terms with corpus frequency `≥ min_count`, sorted; a dummy term is
/// appended when `pad` is set and the size is odd.
pub fn build_vocabulary(corpus: &[Vec<String>], min_count: usize, pad: bool) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        for t in doc {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut terms: Vec<String> = freq
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .map(|(t, _)| t.to_string())
        .collect();
    if terms.is_empty() {
        return Err(Error::Empty("vocabulary after frequency filtering"));
    }
    terms.sort();
    if pad && terms.len() % 2 == 1 {
        terms.push(PAD_TERM.to_string());
    }
    Vocabulary::from_terms(terms)
}

/// Sparse in-vocabulary term counts of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentVector {
    pub counts: BTreeMap<usize, u64>,
    pub label: String,
    pub id: String,
}

impl DocumentVector {
    /// Counts tokens found in `vocab`; out-of-vocabulary tokens are dropped.
    pub fn from_tokens(tokens: &[String], vocab: &Vocabulary, id: impl Into<String>, label: impl Into<String>) -> Self {
        let mut counts = BTreeMap::new();
        for t in tokens {
            if let Some(i) = vocab.get(t) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        Self { counts, label: label.into(), id: id.into() }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub alpha: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("pseudocount {} must be positive", self.alpha)))
        }
    }
}

/// MAP estimate `x_i = (count_i + α) / (total + α V)`.
pub fn embed_document(doc: &DocumentVector, vocab: &Vocabulary, cfg: &EmbeddingConfig) -> Result<SimplexPoint> {
    cfg.validate()?;
    let total = doc.total();
    if total == 0 {
        return Err(Error::domain(format!("document '{}' has no in-vocabulary tokens", doc.id)));
    }
    if let Some((&max_index, _)) = doc.counts.iter().next_back() {
        if max_index >= vocab.len() {
            return Err(Error::DimensionMismatch { expected: vocab.len(), found: max_index + 1 });
        }
    }
    let denom = total as f64 + cfg.alpha * vocab.len() as f64;
    let mut coords = vec![cfg.alpha / denom; vocab.len()];
    for (&i, &c) in &doc.counts {
        coords[i] = (c as f64 + cfg.alpha) / denom;
    }
    SimplexPoint::new(coords)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfWeights {
    pub weights: Vec<f64>,
}

/// `IDF_k = ln(N / df_k)`; terms in no document (the dummy term) get 0.
pub fn idf_weights(docs: &[DocumentVector], vocab: &Vocabulary) -> Result<IdfWeights> {
    if docs.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let mut df = vec![0usize; vocab.len()];
    for doc in docs {
        for &i in doc.counts.keys() {
            if i >= vocab.len() {
                return Err(Error::DimensionMismatch { expected: vocab.len(), found: i + 1 });
            }
            df[i] += 1;
        }
    }
    let n = docs.len() as f64;
    let weights = df
        .iter()
        .enumerate()
        .map(|(i, &d)| if d == 0 || vocab.is_padding(i) { 0.0 } else { (n / d as f64).ln() })
        .collect();
    Ok(IdfWeights { weights })
}

/// Unit-length TF·IDF vector as sorted `(index, value)` pairs.
pub fn tfidf_unit_vector(doc: &DocumentVector, idf: &IdfWeights) -> Result<Vec<(usize, f64)>> {
    let mut v = Vec::with_capacity(doc.counts.len());
    for (&i, &c) in &doc.counts {
        let w = idf
            .weights
            .get(i)
            .ok_or(Error::DimensionMismatch { expected: idf.weights.len(), found: i + 1 })?;
        if *w != 0.0 {
            v.push((i, c as f64 * w));
        }
    }
    let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::domain(format!("document '{}' has a zero TFIDF vector", doc.id)));
    }
    v.iter_mut().for_each(|(_, x)| *x /= norm);
    Ok(v)
}

pub(crate) fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Distance between unit TF·IDF vectors: `1 − cos`, clamped to `[0, 1]`.
pub fn tfidf_cosine_from_units(u: &[(usize, f64)], v: &[(usize, f64)]) -> f64 {
    (1.0 - sparse_dot(u, v)).clamp(0.0, 1.0)
}

pub fn tfidf_cosine_distance(a: &DocumentVector, b: &DocumentVector, idf: &IdfWeights) -> Result<f64> {
    let u = tfidf_unit_vector(a, idf)?;
    let v = tfidf_unit_vector(b, idf)?;
    Ok(tfidf_cosine_from_units(&u, &v))
}

/// Euclidean distance between TF embeddings.
pub fn tf_l2_distance(a: &SimplexPoint, b: &SimplexPoint) -> Result<f64> {
    Error::check_dims(a.len(), b.len())?;
    Ok(a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub rank: usize,
    pub term: String,
    pub score: f64,
}

/// Terms sorted by descending score, ties broken lexicographically; ranks
/// start at 1. The padding term is dropped unless `include_padding`.
pub fn export_ranked_scores(scores: &[f64], vocab: &Vocabulary, include_padding: bool) -> Result<Vec<RankedRow>> {
    Error::check_dims(vocab.len(), scores.len())?;
    let mut idx: Vec<usize> = (0..scores.len())
        .filter(|&i| include_padding || !vocab.is_padding(i))
        .collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| vocab.term(a).cmp(vocab.term(b))));
    Ok(idx
        .into_iter()
        .enumerate()
        .map(|(r, i)| RankedRow { rank: r + 1, term: vocab.term(i).to_string(), score: scores[i] })
        .collect())
}

/// A document together with its TF embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub doc: DocumentVector,
    pub point: SimplexPoint,
}

impl Sample {
    pub fn label(&self) -> &str {
        &self.doc.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub min_count: usize,
    pub pad: bool,
    pub embedding: EmbeddingConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { min_count: 1, pad: true, embedding: EmbeddingConfig::default() }
    }
}

/// A tokenized, embedded corpus.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub samples: Vec<Sample>,
    /// Ids of documents dropped for having no in-vocabulary tokens.
    pub rejected: Vec<String>,
}

impl Dataset {
    pub fn build(raw: &[RawDocument], cfg: &PipelineConfig) -> Result<Self> {
        cfg.embedding.validate()?;
        let tokens: Vec<Vec<String>> = raw.par_iter().map(|d| tokenize(&d.text)).collect();
        let vocab = build_vocabulary(&tokens, cfg.min_count, cfg.pad)?;
        Self::with_vocabulary(raw, &tokens, vocab, &cfg.embedding)
    }

    /// Embeds `raw` against an existing vocabulary.
    pub fn build_with_vocabulary(raw: &[RawDocument], vocab: Vocabulary, cfg: &EmbeddingConfig) -> Result<Self> {
        cfg.validate()?;
        let tokens: Vec<Vec<String>> = raw.par_iter().map(|d| tokenize(&d.text)).collect();
        Self::with_vocabulary(raw, &tokens, vocab, cfg)
    }

    fn with_vocabulary(
        raw: &[RawDocument],
        tokens: &[Vec<String>],
        vocab: Vocabulary,
        cfg: &EmbeddingConfig,
    ) -> Result<Self> {
        let embedded: Vec<Option<Sample>> = raw
            .par_iter()
            .zip(tokens.par_iter())
            .map(|(d, t)| {
                let doc = DocumentVector::from_tokens(t, &vocab, d.id.clone(), d.label.clone());
                if doc.total() == 0 {
                    return Ok(None);
                }
                let point = embed_document(&doc, &vocab, cfg)?;
                Ok(Some(Sample { doc, point }))
            })
            .collect::<Result<_>>()?;
        let mut samples = Vec::with_capacity(raw.len());
        let mut rejected = Vec::new();
        for (d, s) in raw.iter().zip(embedded) {
            match s {
                Some(s) => samples.push(s),
                None => rejected.push(d.id.clone()),
            }
        }
        if samples.is_empty() {
            return Err(Error::Empty("corpus after tokenization"));
        }
        Ok(Self { vocab, samples, rejected })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn documents(&self) -> Vec<DocumentVector> {
        self.samples.iter().map(|s| s.doc.clone()).collect()
    }

    pub fn points(&self) -> Vec<SimplexPoint> {
        self.samples.iter().map(|s| s.point.clone()).collect()
    }

    pub fn idf(&self) -> Result<IdfWeights> {
        let docs: Vec<DocumentVector> = self.documents();
        idf_weights(&docs, &self.vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn vocab_of(terms: &[&str]) -> Vocabulary {
        Vocabulary::from_terms(terms.iter().map(|t| t.to_string()).collect()).unwrap()
    }

    fn doc(counts: &[(usize, u64)], id: &str) -> DocumentVector {
        DocumentVector { counts: counts.iter().cloned().collect(), label: "x".into(), id: id.into() }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(toks("The cat, the hat."), ["the", "cat", "the", "hat"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("C3PO-unit"), ["c3po", "unit"]);
        assert_eq!(toks("  Ünïcode\tWORDS\n"), ["ünïcode", "words"]);
    }

    #[test]
    fn vocabulary_rules() {
        let corpus = vec![toks("b a c"), toks("a b")];
        let v = build_vocabulary(&corpus, 1, true).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c", PAD_TERM]);
        assert!(v.is_padded() && v.is_padding(3) && !v.is_padding(2));
        assert_eq!(v.get(PAD_TERM), Some(3));
        assert!(tokenize(PAD_TERM).iter().all(|t| t != PAD_TERM));

        let v = build_vocabulary(&corpus, 2, true).unwrap();
        assert_eq!(v.terms(), ["a", "b"]);
        assert!(!v.is_padded());

        let v = build_vocabulary(&corpus, 1, false).unwrap();
        assert_eq!(v.len(), 3);
        assert!(!v.is_padded());

        assert_eq!(build_vocabulary(&corpus, 5, true), Err(Error::Empty("vocabulary after frequency filtering")));
        assert_eq!(build_vocabulary(&[], 1, true), Err(Error::Empty("corpus")));
        assert_eq!(build_vocabulary(&corpus, 1, true).unwrap(), build_vocabulary(&corpus, 1, true).unwrap());
    }

    #[test]
    fn embedding_examples() {
        let v = vocab_of(&["a", "b"]);
        let p = embed_document(&doc(&[(0, 2), (1, 2)], "d"), &v, &EmbeddingConfig { alpha: 1.0 }).unwrap();
        assert_eq!(p.coords(), &[0.5, 0.5]);

        let v = vocab_of(&["a", "b", "c", "d"]);
        let p = embed_document(&doc(&[(0, 3)], "d"), &v, &EmbeddingConfig { alpha: 0.01 }).unwrap();
        let expected = [3.01 / 3.04, 0.01 / 3.04, 0.01 / 3.04, 0.01 / 3.04];
        for (a, b) in p.coords().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(p.is_interior());

        let p = embed_document(&doc(&[(0, 3), (2, 1)], "d"), &v, &EmbeddingConfig { alpha: 1e-12 }).unwrap();
        assert!((p.coords()[0] - 0.75).abs() < 1e-9 && (p.coords()[2] - 0.25).abs() < 1e-9);

        assert!(matches!(embed_document(&doc(&[], "e"), &v, &EmbeddingConfig::default()), Err(Error::Domain(_))));
        assert!(embed_document(&doc(&[(0, 1)], "d"), &v, &EmbeddingConfig { alpha: 0.0 }).is_err());
    }

    #[test]
    fn out_of_vocabulary_tokens_are_dropped() {
        let v = vocab_of(&["a", "b"]);
        let d = DocumentVector::from_tokens(&toks("a zz a b qq"), &v, "1", "l");
        assert_eq!(d.total(), 3);
        assert_eq!(d.counts[&0], 2);
    }

    #[test]
    fn idf_examples() {
        let v = vocab_of(&["common", "rare", "mid"]);
        let mut docs: Vec<DocumentVector> = (0..100).map(|i| doc(&[(0, 1)], &i.to_string())).collect();
        docs[0].counts.insert(1, 4);
        for d in docs.iter_mut().take(10) {
            d.counts.insert(2, 1);
        }
        let idf = idf_weights(&docs, &v).unwrap();
        assert_eq!(idf.weights[0], 0.0);
        assert!((idf.weights[1] - 100f64.ln()).abs() < 1e-12);
        assert!((idf.weights[1] - 4.60517).abs() < 1e-5);
        assert!(idf.weights[0] <= idf.weights[2] && idf.weights[2] <= idf.weights[1]);

        let padded = build_vocabulary(&[toks("a b c")], 1, true).unwrap();
        let pdocs = vec![DocumentVector::from_tokens(&toks("a b"), &padded, "1", "l")];
        assert_eq!(idf_weights(&pdocs, &padded).unwrap().weights[3], 0.0);
    }

    #[test]
    fn tfidf_cosine_examples() {
        let idf = IdfWeights { weights: vec![0.0, 1.0, 2.0, 0.5] };
        let a = doc(&[(1, 2), (2, 1)], "a");
        let b = doc(&[(3, 5)], "b");
        assert!(tfidf_cosine_distance(&a, &a, &idf).unwrap().abs() < 1e-15);
        assert_eq!(tfidf_cosine_distance(&a, &b, &idf).unwrap(), 1.0);
        let a2 = doc(&[(1, 4), (2, 2)], "a2");
        let c = doc(&[(1, 1), (3, 3)], "c");
        let d1 = tfidf_cosine_distance(&a, &c, &idf).unwrap();
        let d2 = tfidf_cosine_distance(&a2, &c, &idf).unwrap();
        assert!((d1 - d2).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&d1));
        let zero = doc(&[(0, 7)], "z");
        assert!(matches!(tfidf_cosine_distance(&zero, &a, &idf), Err(Error::Domain(_))));
    }

    #[test]
    fn l2_examples() {
        let a = SimplexPoint::new(vec![1.0, 0.0]).unwrap();
        let b = SimplexPoint::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(tf_l2_distance(&a, &a).unwrap(), 0.0);
        assert!((tf_l2_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(tf_l2_distance(&a, &b).unwrap(), tf_l2_distance(&b, &a).unwrap());
    }

    #[test]
    fn ranking_examples() {
        let v = vocab_of(&["b", "a", "c"]);
        let rows = export_ranked_scores(&[1.0, 1.0, 1.0], &v, true).unwrap();
        assert_eq!(rows.iter().map(|r| r.term.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
        let rows = export_ranked_scores(&[0.1, 0.7, 0.2], &v, true).unwrap();
        assert_eq!(rows[0].term, "a");
        assert_eq!(rows[0].rank, 1);
        assert_eq!(rows.len(), 3);
        assert!(export_ranked_scores(&[0.1], &v, true).is_err());

        let padded = build_vocabulary(&[toks("x y z")], 1, true).unwrap();
        assert_eq!(export_ranked_scores(&[0.1, 0.2, 0.3, 0.4], &padded, false).unwrap().len(), 3);
        assert_eq!(export_ranked_scores(&[0.1, 0.2, 0.3, 0.4], &padded, true).unwrap().len(), 4);
    }

    #[test]
    fn jsonl_errors_name_the_line() {
        let ok = "{\"id\":\"1\",\"label\":\"a\",\"text\":\"hi\"}\n\n{\"id\":\"2\",\"label\":\"b\",\"text\":\"yo\"}\n";
        assert_eq!(parse_jsonl(ok).unwrap().len(), 2);
        let bad = "{\"id\":\"1\",\"label\":\"a\",\"text\":\"hi\"}\n{\"id\": 3\n";
        match parse_jsonl(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dataset_pipeline_is_padded_and_interior() {
        let raw = vec![
            RawDocument { id: "1".into(), label: "a".into(), text: "alpha beta beta".into() },
            RawDocument { id: "2".into(), label: "b".into(), text: "gamma alpha".into() },
            RawDocument { id: "3".into(), label: "b".into(), text: "!!!".into() },
        ];
        let ds = Dataset::build(&raw, &PipelineConfig::default()).unwrap();
        assert_eq!(ds.vocab.len() % 2, 0);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.rejected, ["3"]);
        for s in &ds.samples {
            assert!(s.point.is_interior());
            assert!((s.point.coords().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
