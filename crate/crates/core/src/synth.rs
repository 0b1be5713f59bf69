//! Seeded data-generating processes.
//!
//! The fully synthetic process draws, per row and in this order:
//!
//! 1. `U ~ Bernoulli(0.48)`
//! 2. `C ~ N(0, 1)`
//! 3. for each block `train1, train2, inf1, inf2`, the noise terms of
//!    `X1, X2, X3, X4`:
//!    * `X1 = N(0,1) + 1.95·U + 3·C`
//!    * `X2 = N(0,1) + exp(X1) + U + 3·C`
//!    * `X3 = N(0,1) + 1.25·U + 3·C`
//!    * `X4 = N(0,1) + X3² + 0.5·X3³ + U + 3·C`
//! 4. `A ~ Bernoulli(expit(0.8·U + C − 0.3))`
//! 5. `Y = N(0,1) + 1.3·A + 0.8·U + C`
//!
//! The four blocks share the row's `U` and `C` but have independent noise,
//! so any two of them are independent given `(U, C)`.
//!
//! The semi-synthetic overlay keeps real covariates and an oracle `U`, and
//! draws per row `A ~ Bernoulli(expit(U + Σ 0.9·cov))` then
//! `Y = N(0,1) + 1.3·A + U + Σ 0.9·cov`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{is_constant, Column, Dataset, FeatureBlock};
use crate::error::{Error, Result};
use crate::regress::{expit, mean_sd, DesignMatrix};
use crate::rng;

/// Feature-block names in draw order.
pub const BLOCKS: [&str; 4] = ["train1", "train2", "inf1", "inf2"];
/// Feature names inside every block.
pub const FEATURES: [&str; 4] = ["X1", "X2", "X3", "X4"];
/// Minimum sample size accepted by the generators.
pub const MIN_N: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FullSynthCoefficients {
    pub u_prob: f64,
    /// Shared coefficient of `C` in every `X` feature.
    pub x_c: f64,
    pub x1_u: f64,
    pub x2_exp_x1: f64,
    pub x2_u: f64,
    pub x3_u: f64,
    pub x4_square: f64,
    pub x4_cube: f64,
    pub x4_u: f64,
    pub a_intercept: f64,
    pub a_u: f64,
    pub a_c: f64,
    pub y_u: f64,
    pub y_c: f64,
}

impl Default for FullSynthCoefficients {
    fn default() -> Self {
        FullSynthCoefficients {
            u_prob: 0.48,
            x_c: 3.0,
            x1_u: 1.95,
            x2_exp_x1: 1.0,
            x2_u: 1.0,
            x3_u: 1.25,
            x4_square: 1.0,
            x4_cube: 0.5,
            x4_u: 1.0,
            a_intercept: -0.3,
            a_u: 0.8,
            a_c: 1.0,
            y_u: 0.8,
            y_c: 1.0,
        }
    }
}

impl FullSynthCoefficients {
    fn values(&self) -> [f64; 14] {
        [
            self.u_prob,
            self.x_c,
            self.x1_u,
            self.x2_exp_x1,
            self.x2_u,
            self.x3_u,
            self.x4_square,
            self.x4_cube,
            self.x4_u,
            self.a_intercept,
            self.a_u,
            self.a_c,
            self.y_u,
            self.y_c,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_ace")]
    pub true_ace: f64,
    #[serde(default)]
    pub coefficients: FullSynthCoefficients,
}

fn default_ace() -> f64 {
    crate::DEFAULT_TRUE_ACE
}

impl SynthParams {
    pub fn new(n: usize, seed: u64) -> Self {
        SynthParams { n, seed, true_ace: crate::DEFAULT_TRUE_ACE, coefficients: FullSynthCoefficients::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_N {
            return Err(Error::InvalidParams(format!("n = {} is below the minimum {MIN_N}", self.n)));
        }
        if !self.true_ace.is_finite() || self.coefficients.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("coefficients must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.coefficients.u_prob) {
            return Err(Error::InvalidParams("u_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub fn generate_fully_synthetic(params: &SynthParams) -> Result<Dataset> {
    params.validate()?;
    let k = &params.coefficients;
    let n = params.n;
    let mut r = rng::stream(params.seed);

    let mut u = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    // blocks[b][f][row]
    let mut blocks = vec![vec![Vec::with_capacity(n); FEATURES.len()]; BLOCKS.len()];

    for _ in 0..n {
        let ui = rng::bernoulli(&mut r, k.u_prob);
        let uf = f64::from(ui);
        let ci = rng::normal(&mut r);
        for block in blocks.iter_mut() {
            let x1 = rng::normal(&mut r) + k.x1_u * uf + k.x_c * ci;
            let x2 = rng::normal(&mut r) + k.x2_exp_x1 * x1.exp() + k.x2_u * uf + k.x_c * ci;
            let x3 = rng::normal(&mut r) + k.x3_u * uf + k.x_c * ci;
            let x4 = rng::normal(&mut r)
                + k.x4_square * x3 * x3
                + k.x4_cube * x3 * x3 * x3
                + k.x4_u * uf
                + k.x_c * ci;
            for (f, v) in [x1, x2, x3, x4].into_iter().enumerate() {
                block[f].push(v);
            }
        }
        let ai = rng::bernoulli(&mut r, expit(k.a_u * uf + k.a_c * ci + k.a_intercept));
        let yi = rng::normal(&mut r) + params.true_ace * f64::from(ai) + k.y_u * uf + k.y_c * ci;
        u.push(ui);
        c.push(ci);
        a.push(ai);
        y.push(yi);
    }

    let mut feature_blocks = Vec::with_capacity(BLOCKS.len());
    for (name, cols) in BLOCKS.iter().zip(blocks) {
        let features = DesignMatrix::new(FEATURES.iter().map(|s| s.to_string()).collect(), cols)
            // exp(X1) can overflow for extreme coefficient overrides
            .map_err(|e| Error::InvalidParams(format!("block {name}: {e}")))?;
        feature_blocks.push(FeatureBlock { name: name.to_string(), features });
    }

    let data = Dataset {
        a,
        y,
        covariates: vec![Column::new("C", c)],
        u: Some(u),
        feature_blocks,
        ..Default::default()
    };
    data.validate()?;
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemiSynthCoefficients {
    pub true_ace: f64,
    pub a_intercept: f64,
    pub a_u: f64,
    pub y_u: f64,
    /// Coefficient for any covariate without an explicit override, used in
    /// both the treatment and the outcome equation.
    pub default_covariate: f64,
    pub covariate: BTreeMap<String, f64>,
}

impl Default for SemiSynthCoefficients {
    fn default() -> Self {
        SemiSynthCoefficients {
            true_ace: crate::DEFAULT_TRUE_ACE,
            a_intercept: 0.0,
            a_u: 1.0,
            y_u: 1.0,
            default_covariate: 0.9,
            covariate: BTreeMap::new(),
        }
    }
}

impl SemiSynthCoefficients {
    pub fn for_covariate(&self, name: &str) -> f64 {
        self.covariate.get(name).copied().unwrap_or(self.default_covariate)
    }
}

fn is_binary_column(values: &[f64]) -> bool {
    values.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Probability of treatment for one row of the semi-synthetic overlay.
pub fn semi_synthetic_propensity(u: u8, covariates: &[(f64, f64)], coeffs: &SemiSynthCoefficients) -> f64 {
    let lin = coeffs.a_intercept
        + coeffs.a_u * f64::from(u)
        + covariates.iter().map(|(coef, v)| coef * v).sum::<f64>();
    expit(lin)
}

/// Draws synthetic `A` and `Y` on top of real covariates and an oracle `U`.
///
/// Continuous covariates (anything not coded 0/1) must already be
/// standardized; see [`crate::regress::standardize`].
pub fn overlay_semi_synthetic(
    covariates: &[Column],
    u: &[u8],
    seed: u64,
    coeffs: &SemiSynthCoefficients,
) -> Result<Dataset> {
    let n = u.len();
    if n < MIN_N {
        return Err(Error::InvalidParams(format!("n = {n} is below the minimum {MIN_N}")));
    }
    if let Some(&bad) = u.iter().find(|&&v| v > 1) {
        return Err(Error::NotBinary("U".into(), f64::from(bad)));
    }
    for c in covariates {
        if c.values.len() != n {
            return Err(Error::LengthMismatch(format!(
                "covariate `{}` has {} rows, U has {n}",
                c.name,
                c.values.len()
            )));
        }
        if c.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(c.name.clone()));
        }
        if !is_binary_column(&c.values) {
            let (mean, sd) = mean_sd(&c.values);
            if mean.abs() > 0.1 || !(0.9..=1.1).contains(&sd) {
                return Err(Error::Unstandardized { name: c.name.clone(), mean, sd });
            }
        }
    }
    let values = [coeffs.true_ace, coeffs.a_intercept, coeffs.a_u, coeffs.y_u, coeffs.default_covariate];
    if values.iter().chain(coeffs.covariate.values()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("coefficients must be finite".into()));
    }
    if is_constant(u) {
        return Err(Error::ConstantColumn("U".into()));
    }

    let betas: Vec<f64> = covariates.iter().map(|c| coeffs.for_covariate(&c.name)).collect();
    let mut r = rng::stream(seed);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(covariates.len());
    for i in 0..n {
        row.clear();
        row.extend(betas.iter().zip(covariates).map(|(b, c)| (*b, c.values[i])));
        let ai = rng::bernoulli(&mut r, semi_synthetic_propensity(u[i], &row, coeffs));
        let cov_effect: f64 = row.iter().map(|(b, v)| b * v).sum();
        let yi = rng::normal(&mut r) + coeffs.true_ace * f64::from(ai) + coeffs.y_u * f64::from(u[i]) + cov_effect;
        a.push(ai);
        y.push(yi);
    }

    let data = Dataset { a, y, covariates: covariates.to_vec(), u: Some(u.to_vec()), ..Default::default() };
    data.validate()?;
    Ok(data)
}
