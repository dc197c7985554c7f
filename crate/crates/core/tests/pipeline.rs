//! End-to-end runs on the synthetic benchmark corpus.

use simplex_metric::corpus::{Dataset, PipelineConfig};
use simplex_metric::eval::{run_experiment, score_comparison, DistanceKind, ExperimentConfig};
use simplex_metric::optimizer::{estimate_theta, OptimizerConfig};
use simplex_metric::synthetic::{generate, SyntheticConfig};

fn dataset() -> Dataset {
    Dataset::build(&generate(&SyntheticConfig::default()).unwrap(), &PipelineConfig::default()).unwrap()
}

#[test]
fn errors_shrink_with_training_size() {
    let data = dataset();
    let cfg = ExperimentConfig { sizes: vec![20, 80], repeats: 6, seed: 11, ..Default::default() };
    let report = run_experiment(&data, &cfg).unwrap();
    for kind in DistanceKind::ALL {
        let small = report.row(20, kind).unwrap();
        let large = report.row(80, kind).unwrap();
        assert!(
            large.mean_error <= small.mean_error + small.std_error.max(large.std_error),
            "{kind}: {} at 20 vs {} at 80",
            small.mean_error,
            large.mean_error
        );
    }
    let learned = report.row(80, DistanceKind::LearnedGeodesic).unwrap().mean_error;
    let tfidf = report.row(80, DistanceKind::TfidfCosine).unwrap().mean_error;
    assert!(learned <= tfidf, "{learned} vs {tfidf}");
}

#[test]
fn reports_are_reproducible() {
    let data = dataset();
    let cfg = ExperimentConfig { sizes: vec![10], repeats: 1, seed: 3, ..Default::default() };
    let a = run_experiment(&data, &cfg).unwrap();
    let b = run_experiment(&data, &cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn common_terms_agree_more_than_rare_terms() {
    let data = dataset();
    let fit = estimate_theta(&data.points(), &OptimizerConfig::default()).unwrap();
    let cmp = score_comparison(&fit.lambda_metric, &data.idf().unwrap(), &data.vocab, 20).unwrap();
    assert!(cmp.bottom_jaccard > cmp.top_jaccard, "{} vs {}", cmp.bottom_jaccard, cmp.top_jaccard);
    assert!(cmp.bottom_lambda.iter().all(|r| r.term.starts_with("stop")));
}
