//! Least squares and unpenalized logistic regression.
//!
//! Both fitters add an intercept themselves and work internally on centred,
//! unit-variance copies of the feature columns; coefficients are mapped back
//! to the caller's scale before they are returned. Neither fitter penalizes
//! anything, so the rescaling does not change the optimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Newton iteration cap for [`logistic_fit`].
pub const MAX_ITER: usize = 100;
/// Max-abs score at which a logistic fit counts as converged.
pub const SCORE_TOL: f64 = 1e-8;
/// Newton step norm at which a logistic fit counts as converged.
pub const STEP_TOL: f64 = 1e-10;
/// Coefficient magnitude treated as evidence of (quasi-)separation.
pub const SEPARATION_CLAMP: f64 = 30.0;

/// Named real feature columns sharing one row count. The intercept is not a
/// column; fitters add it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl DesignMatrix {
    /// An intercept-only design with `n_rows` rows.
    pub fn empty(n_rows: usize) -> Self {
        DesignMatrix { names: Vec::new(), columns: Vec::new(), n_rows }
    }

    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut m = DesignMatrix::empty(n_rows);
        for (name, col) in names.into_iter().zip(columns) {
            m.push_column(name, col)?;
        }
        Ok(m)
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.n_rows {
            return Err(Error::LengthMismatch(format!(
                "column `{name}` has {} rows, expected {}",
                values.len(),
                self.n_rows
            )));
        }
        if self.names.contains(&name) {
            return Err(Error::InvalidParams(format!("duplicate feature `{name}`")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name));
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(())
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.push_column(name, values)?;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Rows `idx` in the given order (repeats allowed).
    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
            n_rows: idx.len(),
        }
    }

    fn check_rows(&self, needed: usize) -> Result<()> {
        if self.n_rows < needed {
            Err(Error::TooFewRows { rows: self.n_rows, needed })
        } else {
            Ok(())
        }
    }

    /// Centred and scaled copy with a leading column of ones, plus the
    /// per-column `(mean, sd)` used.
    fn standardized_with_intercept(&self) -> Result<(DMatrix<f64>, Vec<(f64, f64)>)> {
        let n = self.n_rows;
        let k = self.n_cols() + 1;
        let mut m = DMatrix::<f64>::zeros(n, k);
        m.column_mut(0).fill(1.0);
        let mut scales = Vec::with_capacity(self.n_cols());
        for (j, (col, name)) in self.columns.iter().zip(&self.names).enumerate() {
            let (mean, sd) = mean_sd(col);
            if sd == 0.0 || !sd.is_finite() {
                // collinear with the intercept
                return Err(if sd == 0.0 { Error::RankDeficient } else { Error::NonFinite(name.clone()) });
            }
            for (i, &v) in col.iter().enumerate() {
                m[(i, j + 1)] = (v - mean) / sd;
            }
            scales.push((mean, sd));
        }
        Ok((m, scales))
    }
}

/// Population mean and standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `(x - mean) / sd` with the population standard deviation.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("standardize input".into()));
    }
    let first = values.first().copied();
    if values.len() < 2 || values.iter().all(|&v| Some(v) == first) {
        return Err(Error::ConstantColumn("standardize input".into()));
    }
    let (mean, sd) = mean_sd(values);
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Logistic sigmoid, evaluated without overflow for any finite input.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Maps standardized-scale coefficients back to the caller's scale.
fn unscale(beta: &[f64], scales: &[(f64, f64)]) -> (f64, Vec<f64>) {
    let coefs: Vec<f64> = beta[1..].iter().zip(scales).map(|(b, (_, sd))| b / sd).collect();
    let intercept = beta[0] - coefs.iter().zip(scales).map(|(c, (m, _))| c * m).sum::<f64>();
    (intercept, coefs)
}

fn linear_predictor(intercept: f64, coefs: &[f64], x: &DesignMatrix) -> Vec<f64> {
    let mut eta = vec![intercept; x.n_rows()];
    for (c, col) in coefs.iter().zip(x.columns()) {
        for (e, v) in eta.iter_mut().zip(col) {
            *e += c * v;
        }
    }
    eta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        check_names(&self.names, x)?;
        Ok(linear_predictor(self.intercept, &self.coefficients, x))
    }
}

fn check_names(expected: &[String], x: &DesignMatrix) -> Result<()> {
    if expected != x.names() {
        return Err(Error::NameMismatch { expected: expected.to_vec(), got: x.names().to_vec() });
    }
    Ok(())
}

/// Ordinary least squares of `y` on `x` plus an intercept, solved by
/// Householder QR.
pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<LinearModel> {
    if y.len() != x.n_rows() {
        return Err(Error::LengthMismatch(format!("y has {} rows, design has {}", y.len(), x.n_rows())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("y".into()));
    }
    let k = x.n_cols() + 1;
    x.check_rows(k.max(2))?;
    let (m, scales) = x.standardized_with_intercept()?;
    let qr = m.qr();
    let r = qr.r();
    let scale = (x.n_rows() as f64).sqrt();
    if (0..k).any(|i| r[(i, i)].abs() < 1e-10 * scale) {
        return Err(Error::RankDeficient);
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let beta = r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient)?;
    let (intercept, coefficients) = unscale(beta.as_slice(), &scales);
    Ok(LinearModel { intercept, names: x.names().to_vec(), coefficients })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    None,
    /// Each class weighted by `n / (2 · n_class)`.
    Balanced,
}

impl ClassWeighting {
    /// Per-row weights for binary labels `y`.
    pub fn weights(self, y: &[u8]) -> Vec<f64> {
        match self {
            ClassWeighting::None => vec![1.0; y.len()],
            ClassWeighting::Balanced => {
                let n = y.len() as f64;
                let n1 = y.iter().filter(|&&v| v == 1).count() as f64;
                let n0 = n - n1;
                let (w0, w1) = (n / (2.0 * n0), n / (2.0 * n1));
                y.iter().map(|&v| if v == 1 { w1 } else { w0 }).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub separation_detected: bool,
    pub iterations: usize,
    pub weighting: ClassWeighting,
}

impl LogisticModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    /// A model with every parameter zero; predicts 0.5 everywhere.
    pub fn zero(names: Vec<String>) -> Self {
        let coefficients = vec![0.0; names.len()];
        LogisticModel {
            intercept: 0.0,
            names,
            coefficients,
            converged: true,
            separation_detected: false,
            iterations: 0,
            weighting: ClassWeighting::None,
        }
    }
}

fn check_binary(y: &[u8]) -> Result<()> {
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::NotBinary("y".into(), f64::from(bad)));
    }
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Weighted Bernoulli log-likelihood at the given parameters.
pub fn logistic_log_likelihood(
    intercept: f64,
    coefs: &[f64],
    x: &DesignMatrix,
    y: &[u8],
    weighting: ClassWeighting,
) -> f64 {
    let eta = linear_predictor(intercept, coefs, x);
    let w = weighting.weights(y);
    eta.iter()
        .zip(y)
        .zip(&w)
        .map(|((&e, &yi), &wi)| wi * (f64::from(yi) * e - softplus(e)))
        .sum()
}

/// Gradient of [`logistic_log_likelihood`] with respect to
/// `(intercept, coefficients...)`.
pub fn logistic_score(
    intercept: f64,
    coefs: &[f64],
    x: &DesignMatrix,
    y: &[u8],
    weighting: ClassWeighting,
) -> Vec<f64> {
    let eta = linear_predictor(intercept, coefs, x);
    let w = weighting.weights(y);
    let resid: Vec<f64> = eta
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((&e, &yi), &wi)| wi * (f64::from(yi) - expit(e)))
        .collect();
    let mut g = Vec::with_capacity(coefs.len() + 1);
    g.push(resid.iter().sum());
    for col in x.columns() {
        g.push(col.iter().zip(&resid).map(|(v, r)| v * r).sum());
    }
    g
}

/// Maximum-likelihood logistic regression of binary `y` on `x` with an
/// unpenalized intercept.
///
/// Damped Newton: each step is halved until the weighted log-likelihood
/// does not decrease. The fit is converged once the max-abs score on the
/// caller's scale is at most [`SCORE_TOL`] with a vanishing Newton step, or
/// once the step norm drops to [`STEP_TOL`]. If any slope exceeds
/// [`SEPARATION_CLAMP`] in magnitude the data are treated as separated: the
/// iteration stops, `separation_detected` is set and the slopes are clamped.
pub fn logistic_fit(x: &DesignMatrix, y: &[u8], weighting: ClassWeighting) -> Result<LogisticModel> {
    if y.len() != x.n_rows() {
        return Err(Error::LengthMismatch(format!("y has {} rows, design has {}", y.len(), x.n_rows())));
    }
    check_binary(y)?;
    let k = x.n_cols() + 1;
    x.check_rows(k.max(2))?;
    let (m, scales) = x.standardized_with_intercept()?;
    {
        let r = m.clone().qr().r();
        let scale = (x.n_rows() as f64).sqrt();
        if (0..k).any(|i| r[(i, i)].abs() < 1e-10 * scale) {
            return Err(Error::RankDeficient);
        }
    }
    let w = weighting.weights(y);
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let n = x.n_rows();

    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = &m * beta;
        (0..n).map(|i| w[i] * (yf[i] * eta[i] - softplus(eta[i]))).sum()
    };

    let mut beta = DVector::<f64>::zeros(k);
    let mut ll = loglik(&beta);
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let eta = &m * &beta;
        let mut grad = DVector::<f64>::zeros(k);
        let mut hess = DMatrix::<f64>::zeros(k, k);
        let mut resid = vec![0.0; n];
        for i in 0..n {
            let p = expit(eta[i]);
            resid[i] = w[i] * (yf[i] - p);
            let h = w[i] * p * (1.0 - p);
            let row = m.row(i);
            for a in 0..k {
                grad[a] += row[a] * resid[i];
                let ha = h * row[a];
                for b in 0..=a {
                    hess[(a, b)] += ha * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }

        let step = match hess.clone().cholesky() {
            Some(ch) => Some(ch.solve(&grad)),
            None => hess.clone().lu().solve(&grad),
        };
        let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
            // singular curvature: only possible when probabilities saturate
            separation = true;
            break;
        };

        let score_max = original_scale_score(x, &resid);
        if score_max <= SCORE_TOL && step.norm() <= 1e-6 {
            beta += step;
            converged = true;
            break;
        }

        // differences below this are summation noise, not descent
        let noise = 1e-12 * (ll.abs() + n as f64);
        let mut t = 1.0;
        let mut candidate = &beta + &step;
        let mut cand_ll = loglik(&candidate);
        let mut halvings = 0;
        while !(cand_ll >= ll - noise) && halvings < 50 {
            t *= 0.5;
            halvings += 1;
            candidate = &beta + &step * t;
            cand_ll = loglik(&candidate);
        }
        if !(cand_ll >= ll - noise) {
            // no ascent direction left at working precision
            converged = true;
            break;
        }
        let step_norm = step.norm() * t;
        beta = candidate;
        ll = cand_ll;

        let (_, coefs) = unscale(beta.as_slice(), &scales);
        if coefs.iter().any(|c| c.abs() > SEPARATION_CLAMP) {
            separation = true;
            break;
        }
        if step_norm <= STEP_TOL {
            converged = true;
            break;
        }
    }

    let (intercept, mut coefficients) = unscale(beta.as_slice(), &scales);
    if separation {
        converged = false;
        for c in &mut coefficients {
            *c = c.clamp(-SEPARATION_CLAMP, SEPARATION_CLAMP);
        }
    }
    Ok(LogisticModel {
        intercept,
        names: x.names().to_vec(),
        coefficients,
        converged,
        separation_detected: separation,
        iterations,
        weighting,
    })
}

fn original_scale_score(x: &DesignMatrix, resid: &[f64]) -> f64 {
    let mut max = resid.iter().sum::<f64>().abs();
    for col in x.columns() {
        let g: f64 = col.iter().zip(resid).map(|(v, r)| v * r).sum();
        max = max.max(g.abs());
    }
    max
}

/// `expit(intercept + x · coefficients)` row by row.
pub fn predict_proba(model: &LogisticModel, x: &DesignMatrix) -> Result<Vec<f64>> {
    check_names(&model.names, x)?;
    Ok(linear_predictor(model.intercept, &model.coefficients, x)
        .into_iter()
        .map(expit)
        .collect())
}
