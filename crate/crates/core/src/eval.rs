//! Nearest-neighbor classification under pluggable distances and the
//! repeated random split protocol.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    export_ranked_scores, tf_l2_distance, tfidf_cosine_from_units, tfidf_unit_vector, Dataset, IdfWeights,
    RankedRow, Sample, Vocabulary,
};
use crate::error::{Error, Result};
use crate::optimizer::{estimate_theta, learned_metric_param, OptimizerConfig};
use crate::simplex::{apply_transform, fisher_distance, MetricParam, SimplexPoint};

/// Which distance to evaluate. The order of the variants is the order of
/// rows in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    LearnedGeodesic,
    Fisher,
    TfidfCosine,
    TfL2,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 4] =
        [DistanceKind::LearnedGeodesic, DistanceKind::Fisher, DistanceKind::TfidfCosine, DistanceKind::TfL2];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::LearnedGeodesic => "learned_geodesic",
            DistanceKind::Fisher => "fisher",
            DistanceKind::TfidfCosine => "tfidf_cosine",
            DistanceKind::TfL2 => "tf_l2",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned_geodesic" | "learned" => Ok(DistanceKind::LearnedGeodesic),
            "fisher" => Ok(DistanceKind::Fisher),
            "tfidf_cosine" | "tfidf" => Ok(DistanceKind::TfidfCosine),
            "tf_l2" | "l2" => Ok(DistanceKind::TfL2),
            other => Err(Error::Config(format!("unknown distance kind '{other}'"))),
        }
    }
}

/// A distance with everything it needs to be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Distance {
    LearnedGeodesic(MetricParam),
    Fisher,
    TfidfCosine(IdfWeights),
    TfL2,
}

/// Per-document representation a [`Distance`] compares.
#[derive(Debug, Clone, PartialEq)]
pub enum Prepared {
    Point(SimplexPoint),
    Sparse(Vec<(usize, f64)>),
}

impl Distance {
    pub fn kind(&self) -> DistanceKind {
        match self {
            Distance::LearnedGeodesic(_) => DistanceKind::LearnedGeodesic,
            Distance::Fisher => DistanceKind::Fisher,
            Distance::TfidfCosine(_) => DistanceKind::TfidfCosine,
            Distance::TfL2 => DistanceKind::TfL2,
        }
    }

    /// Learned geodesics compare `F_λ(x)` under the Fisher distance, which is
    /// exactly how [`crate::simplex::geodesic_distance`] evaluates them.
    pub fn prepare(&self, sample: &Sample) -> Result<Prepared> {
        match self {
            Distance::LearnedGeodesic(lam) => Ok(Prepared::Point(apply_transform(lam, &sample.point)?)),
            Distance::Fisher | Distance::TfL2 => Ok(Prepared::Point(sample.point.clone())),
            Distance::TfidfCosine(idf) => Ok(Prepared::Sparse(tfidf_unit_vector(&sample.doc, idf)?)),
        }
    }

    pub fn between_prepared(&self, a: &Prepared, b: &Prepared) -> Result<f64> {
        match (self, a, b) {
            (Distance::LearnedGeodesic(_) | Distance::Fisher, Prepared::Point(x), Prepared::Point(y)) => {
                fisher_distance(x, y)
            }
            (Distance::TfL2, Prepared::Point(x), Prepared::Point(y)) => tf_l2_distance(x, y),
            (Distance::TfidfCosine(_), Prepared::Sparse(u), Prepared::Sparse(v)) => Ok(tfidf_cosine_from_units(u, v)),
            _ => Err(Error::domain("representation does not match the distance")),
        }
    }

    pub fn between(&self, a: &Sample, b: &Sample) -> Result<f64> {
        self.between_prepared(&self.prepare(a)?, &self.prepare(b)?)
    }
}

/// Majority label among the `k` nearest training items.
///
/// Neighbors are ordered by distance, then by training index. Vote ties go to
/// the label whose best neighbor ranks first.
pub fn knn_vote<'a>(distances: &[(f64, &'a str)], k: usize) -> Result<&'a str> {
    if distances.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if distances.iter().any(|(d, _)| d.is_nan()) {
        return Err(Error::NonFinite("distance".into()));
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].0.total_cmp(&distances[b].0).then(a.cmp(&b)));
    let k = k.clamp(1, distances.len());
    // label -> (votes, best rank)
    let mut votes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (rank, &i) in order[..k].iter().enumerate() {
        let e = votes.entry(distances[i].1).or_insert((0, rank));
        e.0 += 1;
    }
    let (label, _) = votes
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .expect("k >= 1");
    Ok(label)
}

/// 1-nearest-neighbor label; ties go to the smallest training index.
pub fn nn_classify<'a>(train: &[&'a Sample], query: &Sample, dist: &Distance) -> Result<&'a str> {
    knn_classify(train, query, dist, 1)
}

pub fn knn_classify<'a>(train: &[&'a Sample], query: &Sample, dist: &Distance, k: usize) -> Result<&'a str> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let q = dist.prepare(query)?;
    let distances = train
        .iter()
        .map(|s| Ok((dist.between_prepared(&dist.prepare(s)?, &q)?, s.label())))
        .collect::<Result<Vec<_>>>()?;
    knn_vote(&distances, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub kinds: Vec<DistanceKind>,
    /// Neighbors voting in the classifier.
    pub neighbors: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sizes: vec![20, 40, 80],
            repeats: 20,
            seed: 0,
            kinds: DistanceKind::ALL.to_vec(),
            neighbors: 1,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub size: usize,
    pub kind: DistanceKind,
    pub mean_error: f64,
    pub std_error: f64,
    pub repeats: usize,
    /// Per-repeat test error, in repeat order.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    pub const CSV_HEADER: &'static str = "size,kind,mean_error,std_error,repeats,seed";

    pub fn row(&self, size: usize, kind: DistanceKind) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.size == size && r.kind == kind)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.size, r.kind, r.mean_error, r.std_error, r.repeats, self.seed
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-label training quotas summing to `size`, proportional to label
/// frequency with at least one item per label.
fn stratified_quotas(class_sizes: &[usize], size: usize) -> Result<Vec<usize>> {
    let total: usize = class_sizes.iter().sum();
    if size < class_sizes.len() {
        return Err(Error::Config(format!(
            "training size {size} cannot represent all {} labels",
            class_sizes.len()
        )));
    }
    if size >= total {
        return Err(Error::Config(format!("training size {size} leaves no test documents out of {total}")));
    }
    let exact: Vec<f64> = class_sizes.iter().map(|&c| size as f64 * c as f64 / total as f64).collect();
    let mut quotas: Vec<usize> =
        exact.iter().zip(class_sizes).map(|(&e, &c)| (e.floor() as usize).max(1).min(c)).collect();
    let mut assigned: usize = quotas.iter().sum();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    by_remainder.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    while assigned < size {
        let before = assigned;
        for &i in &by_remainder {
            if assigned < size && quotas[i] < class_sizes[i] {
                quotas[i] += 1;
                assigned += 1;
            }
        }
        if assigned == before {
            break;
        }
    }
    while assigned > size {
        let i = (0..quotas.len()).max_by_key(|&i| (quotas[i], std::cmp::Reverse(i))).expect("labels");
        if quotas[i] <= 1 {
            break;
        }
        quotas[i] -= 1;
        assigned -= 1;
    }
    if assigned != size {
        return Err(Error::Config(format!("cannot draw a stratified training set of size {size}")));
    }
    Ok(quotas)
}

/// Stratified training indices (sorted) for one split.
pub fn stratified_split(labels: &[&str], size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let class_sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let quotas = stratified_quotas(&class_sizes, size)?;
    let mut train = Vec::with_capacity(size);
    for (members, quota) in groups.values().zip(quotas) {
        train.extend(sample_indices(rng, members.len(), quota).into_iter().map(|j| members[j]));
    }
    train.sort_unstable();
    Ok(train)
}

fn split_rng(seed: u64, size: usize, repeat: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(repeat as u64));
    rng.set_stream(size as u64);
    rng
}

fn error_rate(dist: &Distance, train: &[&Sample], test: &[&Sample], neighbors: usize) -> Result<f64> {
    let train_prep = train.iter().map(|s| dist.prepare(s)).collect::<Result<Vec<_>>>()?;
    let mut wrong = 0usize;
    for q in test {
        let qp = dist.prepare(q)?;
        let distances = train_prep
            .iter()
            .zip(train)
            .map(|(p, s)| Ok((dist.between_prepared(p, &qp)?, s.label())))
            .collect::<Result<Vec<_>>>()?;
        if knn_vote(&distances, neighbors)? != q.label() {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / test.len() as f64)
}

/// Test errors of every requested kind on one random split.
fn run_split(
    data: &Dataset,
    idf: Option<&IdfWeights>,
    kinds: &[DistanceKind],
    cfg: &ExperimentConfig,
    size: usize,
    repeat: usize,
    fixed_metric: Option<&MetricParam>,
) -> Result<Vec<f64>> {
    let labels: Vec<&str> = data.samples.iter().map(Sample::label).collect();
    let mut rng = split_rng(cfg.seed, size, repeat);
    let train_idx = stratified_split(&labels, size, &mut rng)?;
    let in_train: HashSet<usize> = train_idx.iter().copied().collect();
    let train: Vec<&Sample> = train_idx.iter().map(|&i| &data.samples[i]).collect();
    let test: Vec<&Sample> =
        (0..data.len()).filter(|i| !in_train.contains(i)).map(|i| &data.samples[i]).collect();

    kinds
        .iter()
        .map(|kind| {
            let dist = match kind {
                DistanceKind::LearnedGeodesic => match fixed_metric {
                    Some(lam) => Distance::LearnedGeodesic(lam.clone()),
                    None => {
                        let points: Vec<SimplexPoint> = train.iter().map(|s| s.point.clone()).collect();
                        let fit = estimate_theta(&points, &cfg.optimizer)?;
                        Distance::LearnedGeodesic(learned_metric_param(&fit))
                    }
                },
                DistanceKind::Fisher => Distance::Fisher,
                DistanceKind::TfidfCosine => Distance::TfidfCosine(idf.expect("idf computed").clone()),
                DistanceKind::TfL2 => Distance::TfL2,
            };
            error_rate(&dist, &train, &test, cfg.neighbors)
        })
        .collect()
}

/// Repeated random-split nearest-neighbor evaluation.
///
/// For each training size and repeat a stratified training set is drawn with
/// a generator seeded by `seed + repeat` (stream = size); the rest is the test
/// set. The learned metric is refit on every training set. IDF weights come
/// from the whole corpus.
pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_metric(data, cfg, None)
}

/// Like [`run_experiment`], but with a fixed learned metric instead of
/// refitting per split.
pub fn run_experiment_with_metric(
    data: &Dataset,
    cfg: &ExperimentConfig,
    fixed_metric: Option<&MetricParam>,
) -> Result<ExperimentReport> {
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    if cfg.sizes.is_empty() {
        return Err(Error::Config("no training sizes given".into()));
    }
    if cfg.kinds.is_empty() {
        return Err(Error::Config("no distance kinds given".into()));
    }
    cfg.optimizer.validate()?;
    if let Some(lam) = fixed_metric {
        Error::check_dims(data.vocab.len(), lam.len())?;
    }
    let mut kinds = cfg.kinds.clone();
    kinds.sort();
    kinds.dedup();
    let idf = if kinds.contains(&DistanceKind::TfidfCosine) { Some(data.idf()?) } else { None };

    let jobs: Vec<(usize, usize)> =
        cfg.sizes.iter().flat_map(|&s| (0..cfg.repeats).map(move |r| (s, r))).collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(size, repeat)| run_split(data, idf.as_ref(), &kinds, cfg, size, repeat, fixed_metric))
        .collect::<Result<_>>()?;

    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut rows = Vec::new();
    for &size in &sizes {
        for (ki, &kind) in kinds.iter().enumerate() {
            let errors: Vec<f64> = jobs
                .iter()
                .zip(&results)
                .filter(|((s, _), _)| *s == size)
                .map(|(_, errs)| errs[ki])
                .take(cfg.repeats)
                .collect();
            let (mean_error, std_error) = mean_std(&errors);
            rows.push(ReportRow { size, kind, mean_error, std_error, repeats: errors.len(), errors });
        }
    }
    Ok(ExperimentReport { rows, seed: cfg.seed, config: ExperimentConfig { kinds, ..cfg.clone() } })
}

/// Side-by-side top/bottom terms under the learned metric parameter and IDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreComparison {
    pub top_lambda: Vec<RankedRow>,
    pub top_idf: Vec<RankedRow>,
    pub bottom_lambda: Vec<RankedRow>,
    pub bottom_idf: Vec<RankedRow>,
    pub top_jaccard: f64,
    pub bottom_jaccard: f64,
}

fn jaccard(a: &[RankedRow], b: &[RankedRow]) -> f64 {
    let sa: HashSet<&str> = a.iter().map(|r| r.term.as_str()).collect();
    let sb: HashSet<&str> = b.iter().map(|r| r.term.as_str()).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Top-`k` and bottom-`k` terms under each score (padding excluded) and the
/// Jaccard overlap of the corresponding sets.
pub fn score_comparison(
    lambda_metric: &MetricParam,
    idf: &IdfWeights,
    vocab: &Vocabulary,
    top_k: usize,
) -> Result<ScoreComparison> {
    Error::check_dims(vocab.len(), lambda_metric.len())?;
    Error::check_dims(vocab.len(), idf.weights.len())?;
    let lam = export_ranked_scores(lambda_metric.coords(), vocab, false)?;
    let idf_rows = export_ranked_scores(&idf.weights, vocab, false)?;
    if top_k == 0 || top_k > lam.len() {
        return Err(Error::Config(format!("top_k = {top_k} must lie in 1..={}", lam.len())));
    }
    let bottom = |rows: &[RankedRow]| rows[rows.len() - top_k..].to_vec();
    let top_lambda = lam[..top_k].to_vec();
    let top_idf = idf_rows[..top_k].to_vec();
    let bottom_lambda = bottom(&lam);
    let bottom_idf = bottom(&idf_rows);
    Ok(ScoreComparison {
        top_jaccard: jaccard(&top_lambda, &top_idf),
        bottom_jaccard: jaccard(&bottom_lambda, &bottom_idf),
        top_lambda,
        top_idf,
        bottom_lambda,
        bottom_idf,
    })
}
