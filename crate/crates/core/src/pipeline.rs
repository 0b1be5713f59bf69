//! End-to-end analysis: load or simulate data, attach proxies, gate on the
//! odds-ratio interval and estimate the ACE only when the gate passes.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dag::{builtin_graph, check_proximal_structure, BuiltinGraph, CausalDag, ConditionReport, RoleAssignment};
use crate::data::{is_constant, to_binary, Dataset};
use crate::error::{Error, Result};
use crate::io::{self, ColumnRoles};
use crate::oddsratio::{gamma_ci, gate, GateDecision, OddsRatioResult};
use crate::proxies::{predict, proxy_diagnostics, train_logistic_proxy, DiagnosticsReport, ProxyModel};
use crate::proximal::{ace_ci, AceEstimate, AceMethod, Stage1};
use crate::rng::derive_seed;
use crate::synth::{generate_fully_synthetic, FullSynthCoefficients, SynthParams};

pub const CONFIG_SCHEMA: &str = "proxtext.pipeline-config/v1";
pub const REPORT_SCHEMA: &str = "proxtext.pipeline-report/v1";

fn config_schema() -> String {
    CONFIG_SCHEMA.to_string()
}

fn default_gamma_high() -> f64 {
    crate::DEFAULT_GAMMA_HIGH
}

fn default_n_boot() -> usize {
    crate::DEFAULT_N_BOOT
}

fn default_train_blocks() -> [String; 2] {
    ["train1".into(), "train2".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Fully synthetic data drawn with the master seed.
    Synthetic {
        n: usize,
        #[serde(default = "default_true_ace")]
        true_ace: f64,
        #[serde(default)]
        coefficients: FullSynthCoefficients,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        roles: RoleMap,
    },
}

fn default_true_ace() -> f64 {
    crate::DEFAULT_TRUE_ACE
}

/// Column names for a CSV source; see [`ColumnRoles`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoleMap {
    pub treatment: String,
    pub outcome: String,
    pub covariates: Option<Vec<String>>,
    pub oracle: Option<String>,
}

impl Default for RoleMap {
    fn default() -> Self {
        RoleMap { treatment: "A".into(), outcome: "Y".into(), covariates: None, oracle: None }
    }
}

impl From<&RoleMap> for ColumnRoles {
    fn from(r: &RoleMap) -> Self {
        ColumnRoles {
            treatment: r.treatment.clone(),
            outcome: r.outcome.clone(),
            covariates: r.covariates.clone(),
            oracle: r.oracle.clone(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxySource {
    /// Logistic model of the oracle on the average of the training blocks,
    /// applied to `block`.
    Logistic {
        block: String,
        #[serde(default = "default_train_blocks")]
        train_blocks: [String; 2],
    },
    Threshold { block: String, feature: String, cutoff: f64 },
    /// A 0/1 column of the loaded data.
    Column { name: String },
    /// A 0/1 column of a separate predictions file.
    External { path: PathBuf, column: String },
}

impl ProxySource {
    /// The text instance the proxy is read from. Two proxies with the same
    /// key come from the same source.
    pub fn source_key(&self) -> String {
        match self {
            ProxySource::Logistic { block, .. } | ProxySource::Threshold { block, .. } => format!("block:{block}"),
            ProxySource::Column { name } => format!("column:{name}"),
            ProxySource::External { path, column } => format!("file:{}#{column}", path.display()),
        }
    }

    fn materialize(&self, data: &Dataset) -> Result<Vec<u8>> {
        match self {
            ProxySource::Logistic { block, train_blocks } => {
                let model = train_logistic_proxy(data, (&train_blocks[0], &train_blocks[1]))?;
                predict(&model, data, Some(block))
            }
            ProxySource::Threshold { block, feature, cutoff } => {
                let model = ProxyModel::Threshold { feature: feature.clone(), cutoff: *cutoff };
                predict(&model, data, Some(block))
            }
            ProxySource::Column { name } => to_binary(name, &data.resolve(name)?),
            ProxySource::External { path, column } => {
                let table = io::read_table(path)?;
                if table.n_rows() != data.n() {
                    return Err(Error::LengthMismatch(format!(
                        "{} has {} rows, the dataset has {}",
                        path.display(),
                        table.n_rows(),
                        data.n()
                    )));
                }
                to_binary(column, table.column(column)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DagSource {
    Builtin {
        graph: BuiltinGraph,
        #[serde(default = "RoleAssignment::standard")]
        roles: RoleAssignment,
    },
    EdgeList {
        path: PathBuf,
        #[serde(default = "RoleAssignment::standard")]
        roles: RoleAssignment,
    },
}

impl DagSource {
    fn check(&self) -> Result<ConditionReport> {
        let (g, roles) = match self {
            DagSource::Builtin { graph, roles } => (builtin_graph(*graph), roles),
            DagSource::EdgeList { path, roles } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                (CausalDag::parse_edge_list(&text)?, roles)
            }
        };
        check_proximal_structure(&g, roles)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "config_schema")]
    pub schema: String,
    pub data: DataSource,
    pub w: ProxySource,
    pub z: ProxySource,
    #[serde(default = "default_gamma_high")]
    pub gamma_high: f64,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default)]
    pub seed: u64,
    /// Permits `W` and `Z` from the same source, for demonstrating the
    /// failure mode on purpose.
    #[serde(default)]
    pub allow_same_source: bool,
    #[serde(default)]
    pub stage1: Stage1,
    #[serde(default)]
    pub dag: Option<DagSource>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(data: DataSource, w: ProxySource, z: ProxySource) -> Self {
        PipelineConfig {
            schema: config_schema(),
            data,
            w,
            z,
            gamma_high: default_gamma_high(),
            n_boot: default_n_boot(),
            seed: 0,
            allow_same_source: false,
            stage1: Stage1::default(),
            dag: None,
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::InvalidParams(format!("unsupported config schema `{}`", self.schema)));
        }
        if !(self.gamma_high > 1.0) {
            return Err(Error::InvalidParams(format!("gamma_high = {} must exceed 1", self.gamma_high)));
        }
        if self.n_boot < 2 {
            return Err(Error::InvalidParams(format!("n_boot = {}, need at least 2", self.n_boot)));
        }
        if !self.allow_same_source && self.w.source_key() == self.z.source_key() {
            return Err(Error::SameProxySource(self.w.source_key()));
        }
        Ok(())
    }

    /// SHA-256 of the config's canonical JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Dag,
    Data,
    Proxies,
    OddsRatio,
    Estimate,
    Diagnostics,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Dag => "dag",
            Stage::Data => "data",
            Stage::Proxies => "proxies",
            Stage::OddsRatio => "odds ratio",
            Stage::Estimate => "estimate",
            Stage::Diagnostics => "diagnostics",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub n_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema: String,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionReport>,
    /// Absent when a proxy was rejected as degenerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub odds_ratio: Option<OddsRatioResult>,
    pub gate: GateDecision,
    /// Present only when the gate proceeds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ace: Option<AceEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsReport>,
}

fn load_data(config: &PipelineConfig) -> Result<Dataset> {
    match &config.data {
        DataSource::Synthetic { n, true_ace, coefficients } => generate_fully_synthetic(&SynthParams {
            n: *n,
            seed: config.seed,
            true_ace: *true_ace,
            coefficients: coefficients.clone(),
        }),
        DataSource::Csv { path, roles } => io::read_dataset(path, &roles.into()),
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineReport, PipelineError> {
    config.validate().at(Stage::Config)?;
    let conditions = config.dag.as_ref().map(DagSource::check).transpose().at(Stage::Dag)?;
    let data = load_data(config).at(Stage::Data)?;
    let w = config.w.materialize(&data).at(Stage::Proxies)?;
    let z = config.z.materialize(&data).at(Stage::Proxies)?;

    let provenance = Provenance {
        seed: config.seed,
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        n_rows: data.n(),
    };
    let mut report = PipelineReport {
        schema: REPORT_SCHEMA.to_string(),
        provenance,
        conditions,
        odds_ratio: None,
        gate: GateDecision::degenerate_proxy(config.gamma_high),
        ace: None,
        diagnostics: None,
    };

    if !(is_constant(&w) || is_constant(&z)) {
        let data = data.with_proxies(w, z).at(Stage::Proxies)?;
        let or = gamma_ci(data.w().at(Stage::OddsRatio)?, data.z().at(Stage::OddsRatio)?, &data.covariate_matrix(), config.n_boot, derive_seed(config.seed, 0))
            .at(Stage::OddsRatio)?;
        report.gate = gate(&or, config.gamma_high);
        report.odds_ratio = Some(or);
        if report.gate.proceeds() {
            let method = AceMethod::Proximal { stage1: config.stage1 };
            report.ace = Some(ace_ci(&data, method, config.n_boot, derive_seed(config.seed, 1)).at(Stage::Estimate)?);
        }
        if data.u.is_some() {
            report.diagnostics = Some(proxy_diagnostics(&data).at(Stage::Diagnostics)?);
        }
    }

    if let Some(path) = &config.output {
        let json = serde_json::to_string_pretty(&report).map_err(Error::from).at(Stage::Output)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e)).at(Stage::Output)?;
    }
    Ok(report)
}
