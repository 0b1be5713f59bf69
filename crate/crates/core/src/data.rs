//! The column-role table shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column { name: name.into(), values }
    }
}

/// A named real-valued matrix standing in for one text instance, e.g. the
/// `X1..X4` realization `inf1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub name: String,
    pub features: DesignMatrix,
}

/// Treatment, outcome, covariates, optional proxies and oracle, and optional
/// feature blocks, all with the same row count.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub a: Vec<u8>,
    pub y: Vec<f64>,
    pub covariates: Vec<Column>,
    pub w: Option<Vec<u8>>,
    pub z: Option<Vec<u8>>,
    pub u: Option<Vec<u8>>,
    pub feature_blocks: Vec<FeatureBlock>,
    /// Columns loaded alongside the data that have no role yet (external
    /// predictions, unused covariates).
    pub extra: Vec<Column>,
}

pub fn is_constant<T: PartialEq>(values: &[T]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

pub fn positivity(values: &[u8]) -> f64 {
    values.iter().filter(|&&v| v == 1).count() as f64 / values.len() as f64
}

/// Converts a 0/1 real column to bytes, rejecting anything else.
pub fn to_binary(name: &str, values: &[f64]) -> Result<Vec<u8>> {
    values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::NotBinary(name.to_string(), v))
            }
        })
        .collect()
}

pub fn to_real(values: &[u8]) -> Vec<f64> {
    values.iter().map(|&v| f64::from(v)).collect()
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Checks lengths, binary coding, finiteness, and that proxies are not
    /// constant.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let len_err = |what: &str, len: usize| Error::LengthMismatch(format!("`{what}` has {len} rows, expected {n}"));
        if self.y.len() != n {
            return Err(len_err("Y", self.y.len()));
        }
        if let Some(&bad) = self.a.iter().find(|&&v| v > 1) {
            return Err(Error::NotBinary("A".into(), f64::from(bad)));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Y".into()));
        }
        for c in self.covariates.iter().chain(&self.extra) {
            if c.values.len() != n {
                return Err(len_err(&c.name, c.values.len()));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(c.name.clone()));
            }
        }
        for b in &self.feature_blocks {
            if b.features.n_rows() != n {
                return Err(len_err(&b.name, b.features.n_rows()));
            }
        }
        for (name, col) in [("U", &self.u), ("W", &self.w), ("Z", &self.z)] {
            if let Some(col) = col {
                if col.len() != n {
                    return Err(len_err(name, col.len()));
                }
                if let Some(&bad) = col.iter().find(|&&v| v > 1) {
                    return Err(Error::NotBinary(name.into(), f64::from(bad)));
                }
            }
        }
        for (name, col) in [("W", &self.w), ("Z", &self.z)] {
            if let Some(col) = col {
                if is_constant(col) {
                    return Err(Error::DegenerateProxy(name.into()));
                }
            }
        }
        Ok(())
    }

    /// Attaches proxy columns, rejecting constant or mis-sized ones.
    pub fn with_proxies(mut self, w: Vec<u8>, z: Vec<u8>) -> Result<Self> {
        self.w = Some(w);
        self.z = Some(z);
        self.validate()?;
        Ok(self)
    }

    pub fn block(&self, name: &str) -> Result<&FeatureBlock> {
        self.feature_blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::MissingBlock(name.to_string()))
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.covariates.iter().map(|c| c.name.clone()).collect()
    }

    pub fn w(&self) -> Result<&[u8]> {
        self.w.as_deref().ok_or(Error::MissingProxy("W"))
    }

    pub fn z(&self) -> Result<&[u8]> {
        self.z.as_deref().ok_or(Error::MissingProxy("Z"))
    }

    pub fn u(&self) -> Result<&[u8]> {
        self.u.as_deref().ok_or(Error::MissingOracle)
    }

    /// Looks up a real column by name: covariates, then extra columns, then
    /// the role columns `A`, `Y`, `U`, `W`, `Z`.
    pub fn resolve(&self, name: &str) -> Result<Vec<f64>> {
        if let Some(c) = self.covariates.iter().chain(&self.extra).find(|c| c.name == name) {
            return Ok(c.values.clone());
        }
        match name {
            "A" => Ok(to_real(&self.a)),
            "Y" => Ok(self.y.clone()),
            "U" => self.u().map(to_real),
            "W" => self.w().map(to_real),
            "Z" => self.z().map(to_real),
            _ => Err(Error::MissingColumn(name.to_string())),
        }
    }

    /// Design matrix of all covariates.
    pub fn covariate_matrix(&self) -> DesignMatrix {
        let mut m = DesignMatrix::empty(self.n());
        for c in &self.covariates {
            m.push_column(c.name.clone(), c.values.clone())
                .expect("validated covariates");
        }
        m
    }

    /// Rows `idx` in order, repeats allowed.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let pick_u8 = |v: &[u8]| idx.iter().map(|&i| v[i]).collect::<Vec<u8>>();
        let pick_col = |c: &Column| Column::new(c.name.clone(), idx.iter().map(|&i| c.values[i]).collect());
        Dataset {
            a: pick_u8(&self.a),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            covariates: self.covariates.iter().map(pick_col).collect(),
            w: self.w.as_deref().map(pick_u8),
            z: self.z.as_deref().map(pick_u8),
            u: self.u.as_deref().map(pick_u8),
            feature_blocks: self
                .feature_blocks
                .iter()
                .map(|b| FeatureBlock { name: b.name.clone(), features: b.features.select_rows(idx) })
                .collect(),
            extra: self.extra.iter().map(pick_col).collect(),
        }
    }
}
