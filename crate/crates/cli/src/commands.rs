use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simplex_metric::corpus::{
    build_vocabulary, embed_document, export_ranked_scores, load_corpus, tokenize, Dataset,
    DocumentVector, EmbeddingConfig, PipelineConfig, RankedRow, Sample, Vocabulary,
};
use simplex_metric::eval::{run_experiment_with_metric, score_comparison, Distance, DistanceKind, ExperimentConfig};
use simplex_metric::likelihood::{half_degree, log_partition, log_partition_gradient};
use simplex_metric::optimizer::estimate_theta;
use simplex_metric::{Error, MetricParam};

use crate::{BenchArgs, CliError, CorpusArgs, DistArgs, EvalArgs, LearnArgs, ModelFile, ScoresArgs, VocabArgs};

fn pipeline(args: &CorpusArgs) -> PipelineConfig {
    PipelineConfig { min_count: args.min_count, pad: !args.no_pad, embedding: EmbeddingConfig { alpha: args.alpha } }
}

fn load_dataset(args: &CorpusArgs) -> Result<Dataset, CliError> {
    let raw = load_corpus(&args.corpus, args.format)?;
    let data = Dataset::build(&raw, &pipeline(args))?;
    report_rejected(&data);
    Ok(data)
}

fn report_rejected(data: &Dataset) {
    if !data.rejected.is_empty() {
        eprintln!("skipped {} documents without vocabulary terms", data.rejected.len());
    }
}

/// Standard output when `path` is absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let mut out = sink(path)?;
    out.write_all(text.as_bytes()).map_err(|e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e))
}

/// `%.{digits}g`-style formatting.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        return sci;
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let fixed = format!("{x:.decimals$}");
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

pub fn learn(args: &LearnArgs) -> Result<(), CliError> {
    let data = load_dataset(&args.corpus)?;
    let cfg = args.optimizer.config(args.seed);
    let fit = estimate_theta(&data.points(), &cfg)?;
    let model = ModelFile::new(&data.vocab, &fit, EmbeddingConfig { alpha: args.corpus.alpha }, cfg);
    model.write(&args.out)?;
    println!(
        "documents {} vocabulary {} iterations {} converged {} loglikelihood {}",
        data.len(),
        data.vocab.len(),
        fit.iterations,
        fit.converged,
        format_significant(fit.final_loglikelihood(), 12)
    );
    Ok(())
}

fn read_document(path: &Path, vocab: &Vocabulary, embedding: &EmbeddingConfig) -> Result<Sample, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc = DocumentVector::from_tokens(&tokenize(&text), vocab, path.display().to_string(), "");
    if doc.total() == 0 {
        return Err(Error::Empty("document has no vocabulary terms").into());
    }
    let point = embed_document(&doc, vocab, embedding)?;
    Ok(Sample { doc, point })
}

pub fn dist(args: &DistArgs) -> Result<(), CliError> {
    let model = ModelFile::read(&args.model)?;
    let vocab = model.vocabulary()?;
    let a = read_document(&args.a, &vocab, &model.embedding)?;
    let b = read_document(&args.b, &vocab, &model.embedding)?;
    let distance = match args.kind {
        DistanceKind::LearnedGeodesic => Distance::LearnedGeodesic(model.lambda()?),
        DistanceKind::Fisher => Distance::Fisher,
        DistanceKind::TfL2 => Distance::TfL2,
        DistanceKind::TfidfCosine => {
            let corpus = args
                .corpus
                .as_ref()
                .ok_or_else(|| CliError::Usage("tfidf_cosine needs --corpus for IDF weights".into()))?;
            let raw = load_corpus(corpus, args.format)?;
            let data = Dataset::build_with_vocabulary(&raw, vocab.clone(), &model.embedding)?;
            Distance::TfidfCosine(data.idf()?)
        }
    };
    println!("{}", format_significant(distance.between(&a, &b)?, 12));
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let cfg = ExperimentConfig {
        sizes: args.sizes.clone(),
        repeats: args.repeats,
        seed: args.seed,
        kinds: args.kinds.clone(),
        neighbors: args.neighbors,
        optimizer: args.optimizer.config(args.seed),
    };
    let report = match &args.model {
        Some(path) => {
            let model = ModelFile::read(path)?;
            let raw = load_corpus(&args.corpus.corpus, args.corpus.format)?;
            let data = Dataset::build_with_vocabulary(&raw, model.vocabulary()?, &model.embedding)?;
            report_rejected(&data);
            run_experiment_with_metric(&data, &cfg, Some(&model.lambda()?))?
        }
        None => run_experiment_with_metric(&load_dataset(&args.corpus)?, &cfg, None)?,
    };
    write_text(args.out.as_deref(), &report.to_csv())?;
    if let Some(path) = &args.json {
        write_text(Some(path), &(report.to_json()? + "\n"))?;
    }
    Ok(())
}

fn write_ranking(path: &Path, rows: &[RankedRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rank", "term", "score"])?;
    for r in rows {
        w.write_record([r.rank.to_string(), r.term.clone(), r.score.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn scores(args: &ScoresArgs) -> Result<(), CliError> {
    let model = ModelFile::read(&args.model)?;
    let vocab = model.vocabulary()?;
    let raw = load_corpus(&args.corpus, args.format)?;
    let data = Dataset::build_with_vocabulary(&raw, vocab.clone(), &model.embedding)?;
    report_rejected(&data);
    let idf = data.idf()?;
    let lambda = model.lambda()?;
    let comparison = score_comparison(&lambda, &idf, &vocab, args.top_k)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    write_ranking(&args.out.join("lambda_scores.csv"), &export_ranked_scores(lambda.coords(), &vocab, false)?)?;
    write_ranking(&args.out.join("idf_scores.csv"), &export_ranked_scores(&idf.weights, &vocab, false)?)?;
    let json = serde_json::to_string_pretty(&comparison)? + "\n";
    write_text(Some(&args.out.join("comparison.json")), &json)?;

    println!("top-{k} jaccard {}", format_significant(comparison.top_jaccard, 12), k = args.top_k);
    println!("bottom-{k} jaccard {}", format_significant(comparison.bottom_jaccard, 12), k = args.top_k);
    println!("{:>4}  {:<24} {:<24}", "rank", "lambda", "idf");
    for (i, (l, f)) in comparison.top_lambda.iter().zip(&comparison.top_idf).enumerate() {
        println!("{:>4}  {:<24} {:<24}", i + 1, l.term, f.term);
    }
    Ok(())
}

/// Mean wall time of `f` in milliseconds, repeating until at least 1 ms has
/// elapsed.
fn time_ms(mut f: impl FnMut() -> Result<(), Error>) -> Result<f64, Error> {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        f()?;
        calls += 1;
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= 1e-3 {
            return Ok(elapsed * 1e3 / calls as f64);
        }
    }
}

pub fn bench_z(args: &BenchArgs) -> Result<(), CliError> {
    if args.n.is_empty() {
        return Err(CliError::Usage("no dimensions given".into()));
    }
    for &n in &args.n {
        if n == 0 || half_degree(n).is_err() {
            return Err(CliError::Usage(format!("n = {n} must be odd")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut w = csv::Writer::from_writer(sink(args.out.as_deref())?);
    w.write_record(["n", "partition_ms", "gradient_ms"])?;
    for &n in &args.n {
        let lam = MetricParam::from_weights((0..=n).map(|_| rng.random_range(0.05..1.0)).collect())?;
        let z = time_ms(|| {
            let v = log_partition(&lam)?.value;
            if v.is_finite() { Ok(()) } else { Err(Error::NonFinite("log partition".into())) }
        })?;
        let g = time_ms(|| log_partition_gradient(&lam).map(|_| ()))?;
        w.write_record([n.to_string(), format!("{z:.6}"), format!("{g:.6}")])?;
    }
    w.flush().map_err(|e| CliError::io(Path::new("<output>"), e))
}

pub fn vocab(args: &VocabArgs) -> Result<(), CliError> {
    let raw = load_corpus(&args.corpus.corpus, args.corpus.format)?;
    let tokens: Vec<Vec<String>> = raw.iter().map(|d| tokenize(&d.text)).collect();
    let vocab = build_vocabulary(&tokens, args.corpus.min_count, !args.corpus.no_pad)?;
    let mut count: HashMap<&str, (u64, u64)> = HashMap::new();
    for doc in &tokens {
        let mut seen = std::collections::HashSet::new();
        for t in doc {
            let e = count.entry(t.as_str()).or_default();
            e.0 += 1;
            if seen.insert(t.as_str()) {
                e.1 += 1;
            }
        }
    }
    let mut w = csv::Writer::from_writer(sink(args.out.as_deref())?);
    w.write_record(["index", "term", "count", "document_frequency"])?;
    for (i, term) in vocab.terms().iter().enumerate() {
        let (c, df) = count.get(term.as_str()).copied().unwrap_or_default();
        w.write_record([i.to_string(), term.clone(), c.to_string(), df.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(Path::new("<output>"), e))?;
    eprintln!("{} terms{}", vocab.len(), if vocab.is_padded() { " (padded)" } else { "" });
    Ok(())
}
