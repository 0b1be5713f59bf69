use proptest::prelude::*;
use proxtext::regress::{expit, logistic_fit, logistic_log_likelihood, logistic_score, ols_fit, standardize};
use proxtext::rng;
use proxtext::{ClassWeighting, DesignMatrix};

/// Solves the normal equations `(XᵀX) b = Xᵀy` by Gauss-Jordan elimination
/// with partial pivoting; intercept first.
fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut full: Vec<Vec<f64>> = vec![vec![1.0; n]];
    full.extend(cols.iter().cloned());
    let k = full.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = (0..n).map(|r| full[i][r] * full[j][r]).sum();
        }
        a[i][k] = (0..n).map(|r| full[i][r] * y[r]).sum();
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, pivot);
        for row in 0..k {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..=k {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}

#[test]
fn ols_matches_normal_equations() {
    let mut r = rng::stream(50);
    let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..50).map(|_| rng::normal(&mut r)).collect()).collect();
    let y: Vec<f64> = (0..50).map(|i| 0.5 - cols[0][i] + 2.0 * cols[2][i] + rng::normal(&mut r)).collect();
    let x = DesignMatrix::new(vec!["a".into(), "b".into(), "c".into()], cols.clone()).unwrap();
    let fit = ols_fit(&x, &y).unwrap();
    let oracle = normal_equations(&cols, &y);
    assert!((fit.intercept - oracle[0]).abs() < 1e-9);
    for (got, want) in fit.coefficients.iter().zip(&oracle[1..]) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn standardize_four_points() {
    let s = standardize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    let sd = 1.25f64.sqrt();
    let expected = [-1.5 / sd, -0.5 / sd, 0.5 / sd, 1.5 / sd];
    for (a, b) in s.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((s[0] + 1.3416).abs() < 1e-4);
    assert_eq!(standardize(&[2.0, 4.0]).unwrap(), vec![-1.0, 1.0]);
}

fn problem(seed: u64, n: usize) -> (DesignMatrix, Vec<u8>) {
    let mut r = rng::stream(seed);
    let x1: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng::uniform(&mut r) * 4.0 - 2.0).collect();
    let y = (0..n).map(|i| rng::bernoulli(&mut r, expit(-0.4 + 0.9 * x1[i] - 0.6 * x2[i]))).collect();
    (DesignMatrix::new(vec!["x1".into(), "x2".into()], vec![x1, x2]).unwrap(), y)
}

#[test]
fn score_matches_finite_differences_off_optimum() {
    for seed in 0..10 {
        let (x, y) = problem(seed, 120);
        for weighting in [ClassWeighting::None, ClassWeighting::Balanced] {
            let (b0, b) = (0.3, [-0.2, 0.7]);
            let g = logistic_score(b0, &b, &x, &y, weighting);
            let h = 1e-6;
            let ll = |b0: f64, b: &[f64]| logistic_log_likelihood(b0, b, &x, &y, weighting);
            let fd0 = (ll(b0 + h, &b) - ll(b0 - h, &b)) / (2.0 * h);
            assert!((g[0] - fd0).abs() / fd0.abs().max(1.0) < 1e-5);
            for k in 0..2 {
                let (mut up, mut down) = (b, b);
                up[k] += h;
                down[k] -= h;
                let fd = (ll(b0, &up) - ll(b0, &down)) / (2.0 * h);
                assert!((g[k + 1] - fd).abs() / fd.abs().max(1.0) < 1e-5);
            }
        }
    }
}

#[test]
fn fitted_model_is_a_stationary_point() {
    for seed in 0..10 {
        let (x, y) = problem(seed, 400);
        for weighting in [ClassWeighting::None, ClassWeighting::Balanced] {
            let m = logistic_fit(&x, &y, weighting).unwrap();
            assert!(m.converged && !m.separation_detected);
            let s = logistic_score(m.intercept, &m.coefficients, &x, &y, weighting);
            assert!(s.iter().all(|v| v.abs() <= 1e-8), "{s:?}");
        }
    }
}

#[test]
fn ols_residuals_are_orthogonal() {
    let (x, _) = problem(3, 200);
    let mut r = rng::stream(4);
    let y: Vec<f64> = x.columns()[0].iter().map(|v| 3.0 * v + rng::normal(&mut r)).collect();
    let fit = ols_fit(&x, &y).unwrap();
    let resid: Vec<f64> = y.iter().zip(fit.predict(&x).unwrap()).map(|(a, b)| a - b).collect();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(resid.iter().sum::<f64>().abs() <= 1e-8 * norm);
    for col in x.columns() {
        let dot: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum();
        assert!(dot.abs() <= 1e-8 * norm);
    }
}

proptest! {
    #[test]
    fn expit_is_symmetric(x in -700.0f64..700.0) {
        prop_assert!((expit(x) + expit(-x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn balanced_weights_equal_rebalanced_replication(seed in 0u64..500, n1 in 3usize..12, n0 in 3usize..12) {
        prop_assume!(n1 != n0);
        let mut r = rng::stream(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        // overlapping classes keep the fit finite
        for i in 0..n1 + n0 {
            let yi = u8::from(i < n1);
            xs.push(rng::normal(&mut r) + 0.8 * f64::from(yi));
            ys.push(yi);
        }
        prop_assume!(xs[..n1].iter().cloned().fold(f64::INFINITY, f64::min) < xs[n1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let base = DesignMatrix::new(vec!["x".into()], vec![xs.clone()]).unwrap();
        let balanced = logistic_fit(&base, &ys, ClassWeighting::Balanced).unwrap();

        // class 1 rows repeated n0 times and class 0 rows n1 times
        let mut rx = Vec::new();
        let mut ry = Vec::new();
        for (x, y) in xs.iter().zip(&ys) {
            let copies = if *y == 1 { n0 } else { n1 };
            for _ in 0..copies {
                rx.push(*x);
                ry.push(*y);
            }
        }
        let replicated = DesignMatrix::new(vec!["x".into()], vec![rx]).unwrap();
        let plain = logistic_fit(&replicated, &ry, ClassWeighting::None).unwrap();
        prop_assert!((balanced.intercept - plain.intercept).abs() < 1e-6);
        prop_assert!((balanced.coefficients[0] - plain.coefficients[0]).abs() < 1e-6);
    }
}
