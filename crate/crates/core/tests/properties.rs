use proptest::prelude::*;

use simplex_metric::corpus::{tokenize, tfidf_cosine_distance, DocumentVector, IdfWeights, Vocabulary};
use simplex_metric::likelihood::{log_partition, log_partition_gradient};
use simplex_metric::simplex::{
    apply_transform, compose_params, fisher_distance, geodesic_distance, invert_param, log_volume_element,
};
use simplex_metric::{MetricParam, SimplexPoint};

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len)
}

fn point(len: usize) -> impl Strategy<Value = SimplexPoint> {
    weights(len).prop_map(|w| SimplexPoint::from_weights(w).unwrap())
}

fn param(len: usize) -> impl Strategy<Value = MetricParam> {
    weights(len).prop_map(|w| MetricParam::from_weights(w).unwrap())
}

/// Parameter and three points of a common random length.
fn setup() -> impl Strategy<Value = (MetricParam, MetricParam, SimplexPoint, SimplexPoint, SimplexPoint)> {
    (2usize..12).prop_flat_map(|len| (param(len), param(len), point(len), point(len), point(len)))
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn transform_stays_on_simplex((lam, _mu, x, _y, _z) in setup()) {
        let fx = apply_transform(&lam, &x).unwrap();
        prop_assert!((fx.coords().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(fx.is_interior());
    }

    #[test]
    fn group_laws((lam, mu, x, _y, _z) in setup()) {
        let back = apply_transform(&invert_param(&lam), &apply_transform(&lam, &x).unwrap()).unwrap();
        prop_assert!(close(back.coords(), x.coords(), 1e-12));
        let nu = compose_params(&lam, &mu).unwrap();
        let chained = apply_transform(&lam, &apply_transform(&mu, &x).unwrap()).unwrap();
        prop_assert!(close(apply_transform(&nu, &x).unwrap().coords(), chained.coords(), 1e-12));
        prop_assert!(close(invert_param(&invert_param(&lam)).coords(), lam.coords(), 1e-12));
    }

    #[test]
    fn geodesic_is_a_metric((lam, _mu, x, y, z) in setup()) {
        let d = |a: &SimplexPoint, b: &SimplexPoint| geodesic_distance(&lam, a, b).unwrap();
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &y) >= 0.0 && d(&x, &y) <= std::f64::consts::FRAC_PI_2 + 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
    }

    #[test]
    fn transform_is_an_isometry_between_metrics((lam, mu, x, y, _z) in setup()) {
        // F_μ is an isometry from F_{λμ}* J to F_λ* J
        let nu = compose_params(&lam, &mu).unwrap();
        let fx = apply_transform(&mu, &x).unwrap();
        let fy = apply_transform(&mu, &y).unwrap();
        let a = geodesic_distance(&nu, &x, &y).unwrap();
        let b = geodesic_distance(&lam, &fx, &fy).unwrap();
        prop_assert!((a - b).abs() < 1e-7, "{} vs {}", a, b);
        prop_assert!((fisher_distance(&x, &y).unwrap()
            - geodesic_distance(&MetricParam::uniform(x.len()), &x, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn volume_element_transforms_like_a_density((lam, _mu, x, y, _z) in setup()) {
        // ratio of volume elements depends on x only through (x·λ) and Π x_i
        let a = log_volume_element(&lam, &x).unwrap() - log_volume_element(&lam, &y).unwrap();
        let n = x.dim() as f64;
        let sx = x.dot(&lam);
        let sy = y.dot(&lam);
        let lx: f64 = x.coords().iter().map(|v| v.ln()).sum();
        let ly: f64 = y.coords().iter().map(|v| v.ln()).sum();
        let b = 0.5 * (-(lx - ly) - (n + 1.0) * (sx.ln() - sy.ln()));
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn partition_is_symmetric_and_euler(len in (1usize..8).prop_map(|h| 2 * h), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..1.0)).collect();
        let lam = MetricParam::from_weights(w).unwrap();
        let mut rev = lam.coords().to_vec();
        rev.reverse();
        let a = log_partition(&lam).unwrap();
        let b = log_partition(&MetricParam::new(rev).unwrap()).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-12 * a.value.abs().max(1.0));
        let g = log_partition_gradient(&lam).unwrap();
        let euler: f64 = g.iter().zip(lam.coords()).map(|(g, l)| g * l).sum();
        prop_assert!((euler - a.k as f64).abs() < 1e-9 * a.k as f64);
    }

    #[test]
    fn tfidf_distance_bounds(a in prop::collection::vec(0u64..5, 6), b in prop::collection::vec(0u64..5, 6)) {
        let vocab = Vocabulary::from_terms((0..6).map(|i| format!("t{i}")).collect()).unwrap();
        let idf = IdfWeights { weights: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0] };
        let doc = |c: &[u64]| {
            let tokens: Vec<String> = c.iter().enumerate()
                .flat_map(|(i, &n)| std::iter::repeat_n(format!("t{i}"), n as usize)).collect();
            DocumentVector::from_tokens(&tokens, &vocab, "d", "l")
        };
        let (da, db) = (doc(&a), doc(&b));
        if let Ok(d) = tfidf_cosine_distance(&da, &db, &idf) {
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, tfidf_cosine_distance(&db, &da, &idf).unwrap());
        }
    }

    #[test]
    fn tokens_are_lowercase_alphanumeric(text in ".{0,80}") {
        for t in tokenize(&text) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphanumeric));
            prop_assert_eq!(t.to_lowercase(), t.clone());
        }
    }
}
