use proptest::prelude::*;
use proxtext::data::positivity;
use proxtext::io::{read_dataset, write_dataset, ColumnRoles};
use proxtext::proxies::{classifier_scores, load_external_predictions, predict, train_logistic_proxy, ProxyModel};
use proxtext::proximal::{completeness_check, estimate_ace_proximal_with_split, split_halves, Stage1};
use proxtext::regress::ols_fit;
use proxtext::synth::{generate_fully_synthetic, SynthParams};
use proxtext::{ace_ci, estimate_ace_backdoor, estimate_ace_proximal, AceMethod, Dataset, DesignMatrix, Error};

fn with_design(seed: u64, n: usize, same: bool) -> Dataset {
    let d = generate_fully_synthetic(&SynthParams::new(n, seed)).unwrap();
    let m = train_logistic_proxy(&d, ("train1", "train2")).unwrap();
    let w = predict(&m, &d, Some(if same { "inf1" } else { "inf2" })).unwrap();
    let z = predict(&m, &d, Some("inf1")).unwrap();
    d.with_proxies(w, z).unwrap()
}

#[test]
fn replications_separate_valid_from_same_text() {
    let mut valid = 0.0;
    let mut same = 0.0;
    let reps = 50;
    for seed in 0..reps {
        valid += estimate_ace_proximal(&with_design(seed, 5000, false), seed, Stage1::Logistic).unwrap().ace;
        same += estimate_ace_proximal(&with_design(seed, 5000, true), seed, Stage1::Logistic).unwrap().ace;
    }
    let valid_bias = valid / reps as f64 - 1.3;
    let same_bias = same / reps as f64 - 1.3;
    assert!(valid_bias.abs() < 0.05, "{valid_bias}");
    assert!(same_bias > 0.05, "{same_bias}");
}

#[test]
fn swapping_halves_stays_within_noise() {
    let mut diffs = Vec::new();
    for seed in 0..30 {
        let d = with_design(100 + seed, 4000, false);
        let (a, b) = split_halves(d.n(), seed);
        let fwd = estimate_ace_proximal_with_split(&d, &a, &b, Stage1::Logistic).unwrap().ace;
        let rev = estimate_ace_proximal_with_split(&d, &b, &a, Stage1::Logistic).unwrap().ace;
        diffs.push(fwd - rev);
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
    // the mean difference is centred on zero
    assert!(mean.abs() < 3.0 * sd / (diffs.len() as f64).sqrt(), "{mean} {sd}");
}

#[test]
fn same_text_ci_misses_truth() {
    let d = with_design(7, 10_000, true);
    let est = ace_ci(&d, AceMethod::Proximal { stage1: Stage1::Logistic }, 100, 3).unwrap();
    assert!(!est.covers(1.3), "{est:?}");
    assert_eq!(est, ace_ci(&d, AceMethod::Proximal { stage1: Stage1::Logistic }, 100, 3).unwrap());
}

#[test]
fn backdoor_with_proxy_is_biased() {
    let d = with_design(5, 100_000, false);
    let proxy = estimate_ace_backdoor(&d, &["W", "C"]).unwrap();
    let oracle = estimate_ace_backdoor(&d, &["U", "C"]).unwrap();
    assert!((proxy - 1.3).abs() > 0.05, "{proxy}");
    assert!((oracle - 1.3).abs() < 0.03, "{oracle}");
}

#[test]
fn training_realizations_are_conditionally_independent() {
    let d = generate_fully_synthetic(&SynthParams::new(20_000, 17)).unwrap();
    let t1 = d.block("train1").unwrap().features.column("X1").unwrap().to_vec();
    let t2 = d.block("train2").unwrap().features.column("X1").unwrap().to_vec();
    let x = DesignMatrix::new(
        vec!["t2".into(), "U".into(), "C".into()],
        vec![t2.clone(), d.resolve("U").unwrap(), d.resolve("C").unwrap()],
    )
    .unwrap();
    let fit = ols_fit(&x, &t1).unwrap();
    let resid: Vec<f64> = t1.iter().zip(fit.predict(&x).unwrap()).map(|(a, b)| a - b).collect();
    let sigma2 = resid.iter().map(|r| r * r).sum::<f64>() / (t1.len() - 4) as f64;
    // standard error of t2's coefficient from its residual variance given U, C
    let aux = ols_fit(&DesignMatrix::new(vec!["U".into(), "C".into()], vec![d.resolve("U").unwrap(), d.resolve("C").unwrap()]).unwrap(), &t2).unwrap();
    let aux_x = DesignMatrix::new(vec!["U".into(), "C".into()], vec![d.resolve("U").unwrap(), d.resolve("C").unwrap()]).unwrap();
    let ssr: f64 = t2.iter().zip(aux.predict(&aux_x).unwrap()).map(|(a, b)| (a - b).powi(2)).sum();
    let se = (sigma2 / ssr).sqrt();
    let coef = fit.coefficient("t2").unwrap();
    assert!(coef.abs() < 3.0 * se, "{coef} vs se {se}");
}

#[test]
fn csv_round_trip_gives_identical_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let d = with_design(2, 3000, false);
    write_dataset(&path, &d).unwrap();
    let back = read_dataset(&path, &ColumnRoles::default()).unwrap();
    let m = AceMethod::Proximal { stage1: Stage1::Logistic };
    assert_eq!(ace_ci(&d, m, 30, 4).unwrap(), ace_ci(&back, m, 30, 4).unwrap());
}

#[test]
fn external_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    std::fs::write(&path, "W,Z\n0,1\n1,1\n1,0\n0,0\n").unwrap();
    let (w, z) = load_external_predictions(&path, "W", "Z", Some(4)).unwrap();
    assert_eq!(w, vec![0, 1, 1, 0]);
    assert_eq!(z, vec![1, 1, 0, 0]);
    assert!(matches!(load_external_predictions(&path, "W", "Z", Some(5)), Err(Error::LengthMismatch(_))));

    std::fs::write(&path, "W,Z\n0,1\n2,1\n1,0\n").unwrap();
    assert!(matches!(load_external_predictions(&path, "W", "Z", None), Err(Error::NotBinary(..))));
    std::fs::write(&path, "W,Z\n1,1\n1,0\n1,0\n").unwrap();
    assert!(matches!(load_external_predictions(&path, "W", "Z", None), Err(Error::DegenerateProxy(_))));
}

#[test]
fn threshold_prediction_is_idempotent() {
    let d = generate_fully_synthetic(&SynthParams::new(500, 1)).unwrap();
    let m = ProxyModel::Threshold { feature: "X1".into(), cutoff: 1.1 };
    let a = predict(&m, &d, Some("inf1")).unwrap();
    let mut d2 = d.clone();
    // changing other features leaves the prediction alone
    d2.feature_blocks.iter_mut().find(|b| b.name == "inf1").unwrap().features =
        d.block("inf1").unwrap().features.clone().with_column("X9", vec![0.0; 500]).unwrap();
    assert_eq!(a, predict(&m, &d2, Some("inf1")).unwrap());
    assert_eq!(a, predict(&m, &d, Some("inf1")).unwrap());
    assert!(positivity(&a) > 0.0 && positivity(&a) < 1.0);
}

#[test]
fn completeness_examples() {
    assert!(completeness_check(&[0.0, 1.0], &[0.0, 1.0], 2));
    assert!(!completeness_check(&[1.0, 1.0], &[0.0, 1.0], 2));
}

proptest! {
    #[test]
    fn f1_identity(pred in proptest::collection::vec(0u8..2, 1..200), truth_seed in 0u64..1000) {
        let mut r = proxtext::rng::stream(truth_seed);
        let truth: Vec<u8> = pred.iter().map(|_| proxtext::rng::bernoulli(&mut r, 0.5)).collect();
        let s = classifier_scores(&pred, &truth);
        let tp = pred.iter().zip(&truth).filter(|(p, t)| **p == 1 && **t == 1).count() as f64;
        let fp = pred.iter().zip(&truth).filter(|(p, t)| **p == 1 && **t == 0).count() as f64;
        let fneg = pred.iter().zip(&truth).filter(|(p, t)| **p == 0 && **t == 1).count() as f64;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
        prop_assert!((s.f1 - f1).abs() < 1e-12);
        for v in [s.accuracy, s.precision, s.recall, s.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
