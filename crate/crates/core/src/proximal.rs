//! ACE estimators: the two-stage proximal estimator with a single 50/50
//! sample split, linear backdoor baselines, and bootstrap intervals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bootstrap;
use crate::data::{is_constant, to_real, Dataset};
use crate::error::{Error, Result};
use crate::oddsratio::{weighting_for, MAX_FAILED_SHARE};
use crate::regress::{logistic_fit, ols_fit, predict_proba, ClassWeighting, DesignMatrix};
use crate::rng;

/// Smallest sample the proximal estimator accepts.
pub const MIN_ROWS: usize = 200;

const W_HAT: &str = "W_hat";

/// Model for `E[W | A, Z, C]` in the first stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage1 {
    #[default]
    Logistic,
    Linear,
}

impl std::str::FromStr for Stage1 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Stage1::Logistic),
            "linear" => Ok(Stage1::Linear),
            other => Err(Error::InvalidParams(format!("unknown stage-1 model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximalEstimate {
    pub ace: f64,
    pub stage1: Stage1,
    /// Class weighting of a logistic first stage; `None` for a linear one.
    pub weighting: ClassWeighting,
    pub stage1_converged: bool,
    pub warnings: Vec<String>,
}

/// Shuffles `0..n` with `seed` and cuts it into halves of `n / 2` and
/// `n - n / 2` rows.
pub fn split_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut perm = rng::permutation(&mut rng::stream(seed), n);
    let second = perm.split_off(n / 2);
    (perm, second)
}

fn design(data: &Dataset, rows: &[usize], second: (&str, Vec<f64>)) -> Result<DesignMatrix> {
    let mut x = DesignMatrix::empty(rows.len());
    x.push_column("A", rows.iter().map(|&i| f64::from(data.a[i])).collect())?;
    x.push_column(second.0, second.1)?;
    for c in &data.covariates {
        x.push_column(c.name.clone(), rows.iter().map(|&i| c.values[i]).collect())?;
    }
    Ok(x)
}

fn check_proxies(data: &Dataset) -> Result<(&[u8], &[u8])> {
    let w = data.w()?;
    let z = data.z()?;
    if is_constant(w) {
        return Err(Error::DegenerateProxy("W".into()));
    }
    if is_constant(z) {
        return Err(Error::DegenerateProxy("Z".into()));
    }
    Ok((w, z))
}

/// Two-stage estimate on a random 50/50 split drawn from `seed`.
pub fn estimate_ace_proximal(data: &Dataset, seed: u64, stage1: Stage1) -> Result<ProximalEstimate> {
    if data.n() < MIN_ROWS {
        return Err(Error::SplitTooSmall(format!("{} rows, need at least {MIN_ROWS}", data.n())));
    }
    let (s1, s2) = split_halves(data.n(), seed);
    estimate_ace_proximal_with_split(data, &s1, &s2, stage1)
}

/// Two-stage estimate with the first stage fit on rows `split1` and the
/// second on rows `split2`.
pub fn estimate_ace_proximal_with_split(
    data: &Dataset,
    split1: &[usize],
    split2: &[usize],
    stage1: Stage1,
) -> Result<ProximalEstimate> {
    let (w, z) = check_proxies(data)?;
    let pick = |v: &[u8], rows: &[usize]| rows.iter().map(|&i| v[i]).collect::<Vec<u8>>();

    let w1 = pick(w, split1);
    if is_constant(&w1) {
        return Err(Error::DegenerateProxy("W within split 1".into()));
    }
    let x1 = design(data, split1, ("Z", to_real(&pick(z, split1))))?;
    let x2_z = design(data, split2, ("Z", to_real(&pick(z, split2))))?;

    let mut warnings = Vec::new();
    let (w_hat, weighting, stage1_converged) = match stage1 {
        Stage1::Logistic => {
            let weighting = weighting_for(&w1);
            let m = logistic_fit(&x1, &w1, weighting)?;
            if m.separation_detected {
                warnings.push("stage-1 logistic fit hit separation; coefficients clamped".to_string());
            } else if !m.converged {
                warnings.push(format!("stage-1 logistic fit did not converge in {} iterations", m.iterations));
            }
            (predict_proba(&m, &x2_z)?, weighting, m.converged)
        }
        Stage1::Linear => {
            let m = ols_fit(&x1, &to_real(&w1))?;
            (m.predict(&x2_z)?, ClassWeighting::None, true)
        }
    };

    let x2 = design(data, split2, (W_HAT, w_hat))?;
    let y2: Vec<f64> = split2.iter().map(|&i| data.y[i]).collect();
    let fit = ols_fit(&x2, &y2)?;
    Ok(ProximalEstimate {
        ace: fit.coefficient("A").expect("A is in the design"),
        stage1,
        weighting,
        stage1_converged,
        warnings,
    })
}

/// A-coefficient of the OLS fit `Y ~ A + adjust` on all rows.
pub fn estimate_ace_backdoor<S: AsRef<str>>(data: &Dataset, adjust: &[S]) -> Result<f64> {
    let mut x = DesignMatrix::empty(data.n()).with_column("A", to_real(&data.a))?;
    for name in adjust {
        let name = name.as_ref();
        x.push_column(name, data.resolve(name)?)?;
    }
    let fit = ols_fit(&x, &data.y)?;
    Ok(fit.coefficient("A").expect("A is in the design"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AceMethod {
    Proximal { stage1: Stage1 },
    /// Backdoor adjustment for `W` and the covariates.
    BackdoorProxy,
    /// Backdoor adjustment for the oracle `U` and the covariates.
    BackdoorOracle,
}

impl AceMethod {
    pub fn name(self) -> &'static str {
        match self {
            AceMethod::Proximal { .. } => "proximal",
            AceMethod::BackdoorProxy => "backdoor_proxy",
            AceMethod::BackdoorOracle => "backdoor_oracle",
        }
    }

    fn adjustment_set(self, data: &Dataset) -> Vec<String> {
        let first = match self {
            AceMethod::BackdoorOracle => "U",
            _ => "W",
        };
        std::iter::once(first.to_string()).chain(data.covariate_names()).collect()
    }

    /// Point estimate; `split_seed` only matters for the proximal method.
    pub fn estimate(self, data: &Dataset, split_seed: u64) -> Result<(f64, Vec<String>)> {
        match self {
            AceMethod::Proximal { stage1 } => {
                let e = estimate_ace_proximal(data, split_seed, stage1)?;
                Ok((e.ace, e.warnings))
            }
            AceMethod::BackdoorProxy | AceMethod::BackdoorOracle => {
                Ok((estimate_ace_backdoor(data, &self.adjustment_set(data))?, Vec::new()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AceEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: AceMethod,
    pub n_boot: usize,
    pub n_failed: usize,
    /// Seed of the split behind the point estimate.
    pub split_seed: u64,
    pub warnings: Vec<String>,
}

impl AceEstimate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Point estimate plus a bootstrap percentile interval. Each replicate
/// resamples rows and, for the proximal method, draws a fresh split.
pub fn ace_ci(data: &Dataset, method: AceMethod, n_boot: usize, seed: u64) -> Result<AceEstimate> {
    if n_boot < 2 {
        return Err(Error::InvalidParams(format!("n_boot = {n_boot}, need at least 2")));
    }
    let (point, mut warnings) = method.estimate(data, seed)?;
    let replicates = bootstrap::run_replicates(data.n(), n_boot, seed, |rows, r| {
        let split_seed: u64 = r.gen();
        method.estimate(&data.select_rows(rows), split_seed)
    });

    let mut values = Vec::with_capacity(n_boot);
    let mut n_failed = 0;
    let mut n_warned = 0;
    for r in replicates {
        match r {
            Ok((v, w)) => {
                n_warned += usize::from(!w.is_empty());
                values.push(v);
            }
            Err(_) => n_failed += 1,
        }
    }
    if n_failed as f64 > MAX_FAILED_SHARE * n_boot as f64 {
        return Err(Error::TooManyFailedReplicates { failed: n_failed, total: n_boot });
    }
    if n_warned > 0 {
        warnings.push(format!("{n_warned} of {n_boot} bootstrap replicates had stage-1 warnings"));
    }
    let (ci_low, ci_high) = bootstrap::percentile_interval(&values);
    Ok(AceEstimate { point, ci_low, ci_high, method, n_boot, n_failed, split_seed: seed, warnings })
}

/// Sufficient completeness condition: both proxies take at least
/// `u_cardinality` distinct values.
pub fn completeness_check(w: &[f64], z: &[f64], u_cardinality: usize) -> bool {
    let distinct = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s.len()
    };
    distinct(w).min(distinct(z)) >= u_cardinality
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_fully_synthetic, SynthParams};

    fn synthetic(n: usize, seed: u64) -> Dataset {
        generate_fully_synthetic(&SynthParams::new(n, seed)).unwrap()
    }

    #[test]
    fn split_is_a_partition() {
        let (a, b) = split_halves(101, 4);
        assert_eq!((a.len(), b.len()), (50, 51));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_eq!(split_halves(101, 4), (a, b));
    }

    #[test]
    fn backdoor_recovers_effect_with_oracle() {
        let d = synthetic(100_000, 21);
        let oracle = estimate_ace_backdoor(&d, &["U", "C"]).unwrap();
        assert!((oracle - 1.3).abs() < 0.03, "{oracle}");
        let naive = estimate_ace_backdoor(&d, &["C"]).unwrap();
        assert!((naive - 1.3).abs() > 0.1, "{naive}");
    }

    #[test]
    fn perfect_proxy_matches_oracle_adjustment() {
        let d = synthetic(20_000, 3);
        let u = d.u().unwrap().to_vec();
        // an independent noisy copy of U keeps Z relevant without touching Y
        let mut r = rng::stream(99);
        let z: Vec<u8> = u.iter().map(|&v| if rng::uniform(&mut r) < 0.8 { v } else { 1 - v }).collect();
        let d = d.with_proxies(u, z).unwrap();
        let prox = estimate_ace_proximal(&d, 1, Stage1::Logistic).unwrap();
        let oracle = estimate_ace_backdoor(&d, &["U", "C"]).unwrap();
        assert!((prox.ace - oracle).abs() < 0.08, "{} vs {oracle}", prox.ace);
    }

    #[test]
    fn row_order_does_not_matter_given_membership() {
        let d = synthetic(1000, 8);
        let u = d.u().unwrap().to_vec();
        let z: Vec<u8> = d.block("inf1").unwrap().features.column("X1").unwrap().iter().map(|&x| u8::from(x > 1.1)).collect();
        let d = d.with_proxies(u, z).unwrap();
        let (s1, s2) = split_halves(1000, 2);
        let a = estimate_ace_proximal_with_split(&d, &s1, &s2, Stage1::Linear).unwrap();
        let mut s1r = s1.clone();
        s1r.reverse();
        let mut s2r = s2.clone();
        s2r.rotate_left(17);
        let b = estimate_ace_proximal_with_split(&d, &s1r, &s2r, Stage1::Linear).unwrap();
        assert!((a.ace - b.ace).abs() < 1e-9);
    }

    #[test]
    fn preconditions() {
        let d = synthetic(150, 1);
        assert!(matches!(estimate_ace_proximal(&d, 1, Stage1::Logistic), Err(Error::SplitTooSmall(_))));
        let d = synthetic(400, 1);
        assert!(matches!(estimate_ace_proximal(&d, 1, Stage1::Logistic), Err(Error::MissingProxy("W"))));
        let mut d2 = d.clone();
        d2.w = Some(vec![1; 400]);
        d2.z = Some((0..400).map(|i| (i % 2) as u8).collect());
        assert!(matches!(estimate_ace_proximal(&d2, 1, Stage1::Logistic), Err(Error::DegenerateProxy(_))));
        assert!(ace_ci(&d2, AceMethod::BackdoorOracle, 1, 0).is_err());
        assert!("quadratic".parse::<Stage1>().is_err());
    }

    #[test]
    fn ci_is_deterministic() {
        let d = synthetic(2000, 12);
        let a = ace_ci(&d, AceMethod::BackdoorOracle, 40, 5).unwrap();
        let b = ace_ci(&d, AceMethod::BackdoorOracle, 40, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.ci_high);
        assert!(a.covers(1.3), "{a:?}");
    }

    #[test]
    fn completeness() {
        assert!(completeness_check(&[0.0, 1.0, 1.0], &[1.0, 0.0, 0.0], 2));
        assert!(!completeness_check(&[1.0, 1.0, 1.0], &[1.0, 0.0, 0.0], 2));
        assert!(completeness_check(&[0.0, 1.0], &[0.0, 1.0, 2.0], 2));
        assert!(!completeness_check(&[0.0, 1.0], &[0.0, 1.0, 2.0], 3));
    }
}
