//! Proxy sources for `W` and `Z`, external prediction ingestion, and
//! diagnostics against an oracle `U`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{is_constant, positivity, to_binary, Dataset};
use crate::error::{Error, Result};
use crate::io;
use crate::oddsratio::{gamma_point, GammaFit};
use crate::regress::{logistic_fit, predict_proba, ClassWeighting, DesignMatrix, LogisticModel};

/// Probability above which a trained proxy predicts 1.
pub const HARD_LABEL_CUTOFF: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxyModel {
    TrainedLogistic { model: LogisticModel, trained_on: [String; 2] },
    Threshold { feature: String, cutoff: f64 },
    External { column: String },
}

/// Element-wise average of two feature blocks.
pub fn average_blocks(data: &Dataset, b1: &str, b2: &str) -> Result<DesignMatrix> {
    let x1 = &data.block(b1)?.features;
    let x2 = &data.block(b2)?.features;
    if x1.names() != x2.names() {
        return Err(Error::NameMismatch { expected: x1.names().to_vec(), got: x2.names().to_vec() });
    }
    let cols = x1
        .columns()
        .iter()
        .zip(x2.columns())
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p + q) / 2.0).collect())
        .collect();
    DesignMatrix::new(x1.names().to_vec(), cols)
}

/// Unweighted logistic regression of the oracle `U` on the average of two
/// feature blocks.
pub fn train_logistic_proxy(train: &Dataset, blocks: (&str, &str)) -> Result<ProxyModel> {
    let u = train.u()?;
    let x = average_blocks(train, blocks.0, blocks.1)?;
    let model = logistic_fit(&x, u, ClassWeighting::None)?;
    Ok(ProxyModel::TrainedLogistic { model, trained_on: [blocks.0.to_string(), blocks.1.to_string()] })
}

/// Hard labels from `model`. `block` names the feature block for trained
/// and threshold models and is ignored for external columns.
pub fn predict(model: &ProxyModel, data: &Dataset, block: Option<&str>) -> Result<Vec<u8>> {
    let need_block = || block.ok_or_else(|| Error::InvalidParams("a feature block is required".into()));
    match model {
        ProxyModel::TrainedLogistic { model, .. } => {
            let x = &data.block(need_block()?)?.features;
            Ok(predict_proba(model, x)?.into_iter().map(|p| u8::from(p > HARD_LABEL_CUTOFF)).collect())
        }
        ProxyModel::Threshold { feature, cutoff } => {
            if !cutoff.is_finite() {
                return Err(Error::InvalidParams(format!("threshold cutoff {cutoff}")));
            }
            let name = need_block()?;
            let col = data
                .block(name)?
                .features
                .column(feature)
                .ok_or_else(|| Error::MissingColumn(format!("{feature} in block {name}")))?;
            Ok(col.iter().map(|&v| u8::from(v > *cutoff)).collect())
        }
        ProxyModel::External { column } => {
            let col = data
                .extra
                .iter()
                .chain(&data.covariates)
                .find(|c| &c.name == column)
                .ok_or_else(|| Error::MissingColumn(column.clone()))?;
            to_binary(column, &col.values)
        }
    }
}

fn binary_proxy_column(name: &str, values: &[f64]) -> Result<Vec<u8>> {
    let col = to_binary(name, values)?;
    if is_constant(&col) {
        return Err(Error::DegenerateProxy(name.to_string()));
    }
    Ok(col)
}

/// Reads pre-binarized `W` and `Z` columns from a CSV file.
pub fn load_external_predictions(
    path: &Path,
    w_col: &str,
    z_col: &str,
    expected_rows: Option<usize>,
) -> Result<(Vec<u8>, Vec<u8>)> {
    let table = io::read_table(path)?;
    if let Some(n) = expected_rows {
        if table.n_rows() != n {
            return Err(Error::LengthMismatch(format!(
                "{} has {} rows, the dataset has {n}",
                path.display(),
                table.n_rows()
            )));
        }
    }
    let w = binary_proxy_column(w_col, table.column(w_col)?)?;
    let z = binary_proxy_column(z_col, table.column(z_col)?)?;
    Ok((w, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores of `pred` against `truth`. Undefined ratios are reported as 0.
pub fn classifier_scores(pred: &[u8], truth: &[u8]) -> ClassifierScores {
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    ClassifierScores { accuracy: ratio(tp + tn, pred.len()), precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub w: ClassifierScores,
    pub z: ClassifierScores,
    pub positivity_w: f64,
    pub positivity_z: f64,
    pub positivity_u: f64,
    pub agreement: f64,
    pub gamma_wu_c: GammaFit,
    pub gamma_zu_c: GammaFit,
}

pub fn proxy_diagnostics(data: &Dataset) -> Result<DiagnosticsReport> {
    let u = data.u()?;
    let w = data.w()?;
    let z = data.z()?;
    if is_constant(u) {
        return Err(Error::SingleClass);
    }
    let c = data.covariate_matrix();
    let agreement = w.iter().zip(z).filter(|(a, b)| a == b).count() as f64 / w.len() as f64;
    Ok(DiagnosticsReport {
        w: classifier_scores(w, u),
        z: classifier_scores(z, u),
        positivity_w: positivity(w),
        positivity_z: positivity(z),
        positivity_u: positivity(u),
        agreement,
        gamma_wu_c: gamma_point(w, u, &c)?,
        gamma_zu_c: gamma_point(z, u, &c)?,
    })
}
