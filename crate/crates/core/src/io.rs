//! CSV ingestion and dataset files.
//!
//! Dataset files start with a schema line,
//! `# proxtext-dataset v1 covariates=C,...`, followed by a header and one
//! row per unit. Feature-block columns are named `X{k}_{block}`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::data::{to_binary, Column, Dataset, FeatureBlock};
use crate::error::{Error, Result};
use crate::regress::DesignMatrix;

pub const DATASET_SCHEMA: &str = "proxtext-dataset v1";

/// Named real columns read from a CSV file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    /// Text of a leading `#` line, if any.
    pub schema: Option<String>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }
}

fn leading_comment(path: &Path) -> Result<Option<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first).map_err(|e| Error::io(path, e))?;
    Ok(first.strip_prefix('#').map(|s| s.trim().to_string()))
}

/// Reads a headed CSV of numeric cells. Lines starting with `#` are skipped.
pub fn read_table(path: &Path) -> Result<Table> {
    let schema = leading_comment(path)?;
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let names: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n) {
            return Err(Error::InvalidParams(format!("duplicate column `{n}`")));
        }
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        for ((cell, col), name) in record.iter().zip(&mut columns).zip(&names) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: row + 1,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            col.push(v);
        }
    }
    Ok(Table { names, columns, schema })
}

/// Which table columns play which role. `None` for an optional role means
/// "use the conventional name if the table has it".
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRoles {
    pub treatment: String,
    pub outcome: String,
    /// `None` takes the covariate list from the schema line, if any.
    pub covariates: Option<Vec<String>>,
    pub oracle: Option<String>,
    pub w: Option<String>,
    pub z: Option<String>,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        ColumnRoles {
            treatment: "A".into(),
            outcome: "Y".into(),
            covariates: None,
            oracle: None,
            w: None,
            z: None,
        }
    }
}

fn block_column(name: &str) -> Option<(&str, &str)> {
    let (feature, block) = name.split_once('_')?;
    let digits = feature.strip_prefix('X')?;
    (!digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) && !block.is_empty()).then_some((feature, block))
}

fn schema_covariates(schema: &Option<String>) -> Vec<String> {
    schema
        .as_deref()
        .and_then(|s| s.strip_prefix(DATASET_SCHEMA))
        .and_then(|rest| rest.split_whitespace().find_map(|kv| kv.strip_prefix("covariates=")))
        .map(|list| list.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect())
        .unwrap_or_default()
}

impl Dataset {
    /// Assigns the columns of `table` to roles. Columns named `X{k}_{block}`
    /// become feature blocks and everything unassigned lands in `extra`.
    pub fn from_table(table: &Table, roles: &ColumnRoles) -> Result<Dataset> {
        let mut used: HashSet<String> = HashSet::new();
        let mut take = |name: &str| -> Result<Vec<f64>> {
            used.insert(name.to_string());
            table.column(name).map(<[f64]>::to_vec)
        };
        let a = to_binary(&roles.treatment, &take(&roles.treatment)?)?;
        let y = take(&roles.outcome)?;

        let optional = |role: &Option<String>, default: &str| -> Option<String> {
            match role {
                Some(name) => Some(name.clone()),
                None => table.has(default).then(|| default.to_string()),
            }
        };
        let mut binary = |role: &Option<String>, default: &str| -> Result<Option<Vec<u8>>> {
            match optional(role, default) {
                Some(name) => Ok(Some(to_binary(&name, &take(&name)?)?)),
                None => Ok(None),
            }
        };
        let u = binary(&roles.oracle, "U")?;
        let w = binary(&roles.w, "W")?;
        let z = binary(&roles.z, "Z")?;

        let cov_names = roles.covariates.clone().unwrap_or_else(|| schema_covariates(&table.schema));
        let mut covariates = Vec::with_capacity(cov_names.len());
        for name in cov_names {
            covariates.push(Column::new(name.clone(), take(&name)?));
        }

        let mut feature_blocks: Vec<FeatureBlock> = Vec::new();
        let mut extra = Vec::new();
        for (name, values) in table.names.iter().zip(&table.columns) {
            if used.contains(name) {
                continue;
            }
            match block_column(name) {
                Some((feature, block)) => {
                    let pos = match feature_blocks.iter().position(|b| b.name == block) {
                        Some(p) => p,
                        None => {
                            feature_blocks.push(FeatureBlock {
                                name: block.to_string(),
                                features: DesignMatrix::empty(table.n_rows()),
                            });
                            feature_blocks.len() - 1
                        }
                    };
                    feature_blocks[pos].features.push_column(feature, values.clone())?;
                }
                None => extra.push(Column::new(name.clone(), values.clone())),
            }
        }

        let data = Dataset { a, y, covariates, w, z, u, feature_blocks, extra };
        data.validate()?;
        Ok(data)
    }
}

pub fn read_dataset(path: &Path, roles: &ColumnRoles) -> Result<Dataset> {
    Dataset::from_table(&read_table(path)?, roles)
}

/// Writes `data` with a schema line. Reals use the shortest representation
/// that parses back to the same value.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    data.validate()?;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "# {DATASET_SCHEMA} covariates={}", data.covariate_names().join(","))
        .map_err(|e| Error::io(path, e))?;

    let mut names: Vec<String> = vec!["A".into(), "Y".into()];
    let mut cols: Vec<Vec<f64>> = vec![crate::data::to_real(&data.a), data.y.clone()];
    if let Some(u) = &data.u {
        names.push("U".into());
        cols.push(crate::data::to_real(u));
    }
    for c in &data.covariates {
        names.push(c.name.clone());
        cols.push(c.values.clone());
    }
    for b in &data.feature_blocks {
        for (f, col) in b.features.names().iter().zip(b.features.columns()) {
            names.push(format!("{f}_{}", b.name));
            cols.push(col.clone());
        }
    }
    for (name, col) in [("W", &data.w), ("Z", &data.z)] {
        if let Some(col) = col {
            names.push(name.into());
            cols.push(crate::data::to_real(col));
        }
    }
    for c in &data.extra {
        names.push(c.name.clone());
        cols.push(c.values.clone());
    }

    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(&names).map_err(csv_err)?;
    let mut row = Vec::with_capacity(cols.len());
    for i in 0..data.n() {
        row.clear();
        row.extend(cols.iter().map(|c| c[i].to_string()));
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
