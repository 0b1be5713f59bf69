use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use proxtext::dag::{check_proximal_structure, Cardinality, RoleAssignment};
use proxtext::experiments::{run_gotcha_bench, run_table1_bench, BenchOptions, DEFAULT_BENCH_ROWS};
use proxtext::io::{read_dataset, read_table, write_dataset, ColumnRoles};
use proxtext::pipeline::{run_pipeline, PipelineConfig};
use proxtext::proxies::{load_external_predictions, proxy_diagnostics};
use proxtext::proximal::Stage1;
use proxtext::regress::standardize;
use proxtext::synth::{generate_fully_synthetic, overlay_semi_synthetic, SemiSynthCoefficients, SynthParams};
use proxtext::{ace_ci, builtin_graph, gamma_ci, gate, AceMethod, GateDecision, BuiltinGraph, CausalDag, Column, Dataset, Verdict};

const SEED_ENV: &str = "PROXTEXT_SEED";

const EXIT_PROCEED: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_STOP: u8 = 2;

#[derive(Parser)]
#[command(name = "proxtext", version, about = "Proximal causal inference with text-derived proxies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset
    Simulate(SimulateArgs),
    /// Causal graph checks
    #[command(subcommand)]
    Dag(DagCommand),
    /// Bootstrap the proxy odds ratio and apply the gate
    Gate(GateArgs),
    /// Estimate the average causal effect
    Estimate(EstimateArgs),
    /// Score proxies against an oracle column
    Diagnostics(DiagnosticsArgs),
    /// Run the full analysis from a JSON config
    Pipeline(PipelineArgs),
    /// Replication benchmarks on synthetic data
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dgp {
    Full,
    Semi,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "full")]
    dgp: Dgp,
    #[arg(long, default_value_t = DEFAULT_BENCH_ROWS)]
    n: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = proxtext::DEFAULT_TRUE_ACE)]
    true_ace: f64,
    /// Covariate CSV for the semi-synthetic overlay
    #[arg(long, required_if_eq("dgp", "semi"))]
    covariates: Option<PathBuf>,
    /// Oracle column of the covariate file
    #[arg(long, default_value = "U")]
    u_col: String,
    /// Covariates to standardize before the overlay
    #[arg(long, value_delimiter = ',')]
    standardize: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DagCommand {
    /// Check the proximal conditions on a graph
    Check(DagCheckArgs),
}

#[derive(Args)]
struct DagCheckArgs {
    /// Edge-list file, one `parent -> child` per line
    #[arg(conflicts_with = "builtin", required_unless_present = "builtin")]
    graph: Option<PathBuf>,
    #[arg(long)]
    builtin: Option<BuiltinGraph>,
    #[arg(long, default_value = "A")]
    treatment: String,
    #[arg(long, default_value = "Y")]
    outcome: String,
    #[arg(long, default_value = "U")]
    unmeasured: String,
    #[arg(long, value_delimiter = ',', default_value = "C")]
    covariates: Vec<String>,
    #[arg(long, default_value = "W")]
    proxy_w: String,
    #[arg(long, default_value = "Z")]
    proxy_z: String,
    #[arg(long, default_value_t = 2)]
    card_w: usize,
    #[arg(long, default_value_t = 2)]
    card_z: usize,
    #[arg(long, default_value_t = 2)]
    card_u: usize,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "A")]
    treatment: String,
    #[arg(long, default_value = "Y")]
    outcome: String,
    /// Covariate columns; defaults to those recorded in the file header
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long, default_value = "W")]
    w_col: String,
    #[arg(long, default_value = "Z")]
    z_col: String,
    /// Read the proxy columns from this file instead of the data file
    #[arg(long)]
    predictions: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let mut roles = ColumnRoles {
            treatment: self.treatment.clone(),
            outcome: self.outcome.clone(),
            covariates: self.covariates.clone(),
            oracle: self.oracle.clone(),
            ..Default::default()
        };
        if self.predictions.is_none() {
            roles.w = Some(self.w_col.clone());
            roles.z = Some(self.z_col.clone());
        }
        let data = read_dataset(&self.data, &roles).with_context(|| format!("loading {}", self.data.display()))?;
        match &self.predictions {
            Some(path) => {
                let (w, z) = load_external_predictions(path, &self.w_col, &self.z_col, Some(data.n()))
                    .with_context(|| format!("loading {}", path.display()))?;
                Ok(data.with_proxies(w, z)?)
            }
            None => Ok(data),
        }
    }
}

#[derive(Args)]
struct GateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = proxtext::DEFAULT_GAMMA_HIGH)]
    gamma_high: f64,
    #[arg(long, default_value_t = proxtext::DEFAULT_N_BOOT)]
    boot: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Two-stage proximal estimator
    Proximal,
    /// Backdoor adjustment for W and the covariates
    Backdoor,
    /// Backdoor adjustment for the oracle and the covariates
    BackdoorOracle,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "proximal")]
    method: MethodArg,
    #[arg(long, default_value = "logistic")]
    stage1: Stage1,
    #[arg(long, default_value_t = proxtext::DEFAULT_N_BOOT)]
    boot: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnosticsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Gate verdicts and ACE intervals for the four proxy designs
    Table1(Table1Args),
    /// Backdoor and proximal bias side by side
    Gotchas(GotchaArgs),
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = DEFAULT_BENCH_ROWS)]
    n: usize,
    /// Number of seeds, counting up from `--seed`
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = proxtext::DEFAULT_N_BOOT)]
    boot: usize,
    #[arg(long, default_value_t = proxtext::DEFAULT_GAMMA_HIGH)]
    gamma_high: f64,
    #[arg(long, default_value = "logistic")]
    stage1: Stage1,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GotchaArgs {
    #[arg(long, default_value_t = DEFAULT_BENCH_ROWS)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(path) = out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    print_out(&text)
}

fn print_out(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Proceed => EXIT_PROCEED,
        Verdict::Stop => EXIT_STOP,
    }
}

fn simulate(args: SimulateArgs) -> Result<u8> {
    let data = match args.dgp {
        Dgp::Full => {
            let mut params = SynthParams::new(args.n, args.seed);
            params.true_ace = args.true_ace;
            generate_fully_synthetic(&params)?
        }
        Dgp::Semi => {
            let path = args.covariates.as_deref().expect("clap enforces --covariates");
            let table = read_table(path).with_context(|| format!("loading {}", path.display()))?;
            let u = proxtext::data::to_binary(&args.u_col, table.column(&args.u_col)?)?;
            let mut covariates = Vec::new();
            for (name, values) in table.names.iter().zip(&table.columns) {
                if *name == args.u_col {
                    continue;
                }
                let values = if args.standardize.contains(name) { standardize(values)? } else { values.clone() };
                covariates.push(Column::new(name.clone(), values));
            }
            let coeffs = SemiSynthCoefficients { true_ace: args.true_ace, ..Default::default() };
            overlay_semi_synthetic(&covariates, &u, args.seed, &coeffs)?
        }
    };
    write_dataset(&args.out, &data)?;
    eprintln!("wrote {} rows to {}", data.n(), args.out.display());
    Ok(EXIT_PROCEED)
}

fn dag_check(args: DagCheckArgs) -> Result<u8> {
    let graph = match (&args.graph, args.builtin) {
        (_, Some(b)) => builtin_graph(b),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            CausalDag::parse_edge_list(&text)?
        }
        (None, None) => bail!("a graph file or --builtin is required"),
    };
    let roles = RoleAssignment {
        treatment: args.treatment,
        outcome: args.outcome,
        unmeasured: args.unmeasured,
        observed_covariates: args.covariates,
        proxy_w: args.proxy_w,
        proxy_z: args.proxy_z,
        cardinality: Cardinality { w: args.card_w, z: args.card_z, u: args.card_u },
    };
    let report = check_proximal_structure(&graph, &roles)?;
    emit(&serde_json::to_value(&report)?, None)?;
    Ok(EXIT_PROCEED)
}

fn gate_cmd(args: GateArgs) -> Result<u8> {
    if !(args.gamma_high > 1.0) {
        bail!("--gamma-high must exceed 1");
    }
    let data = match args.data.load() {
        Err(e) if matches!(e.downcast_ref(), Some(proxtext::Error::DegenerateProxy(_))) => {
            eprintln!("warning: {e:#}");
            let decision = GateDecision::degenerate_proxy(args.gamma_high);
            emit(&json!({ "gate": decision, "seed": args.seed }), args.out.as_deref())?;
            return Ok(EXIT_STOP);
        }
        other => other?,
    };
    let result = gamma_ci(data.w()?, data.z()?, &data.covariate_matrix(), args.boot, args.seed)?;
    let decision = gate(&result, args.gamma_high);
    emit(&json!({ "odds_ratio": result, "gate": decision, "seed": args.seed }), args.out.as_deref())?;
    Ok(verdict_code(decision.verdict))
}

fn estimate(args: EstimateArgs) -> Result<u8> {
    let data = args.data.load()?;
    let method = match args.method {
        MethodArg::Proximal => AceMethod::Proximal { stage1: args.stage1 },
        MethodArg::Backdoor => AceMethod::BackdoorProxy,
        MethodArg::BackdoorOracle => AceMethod::BackdoorOracle,
    };
    let est = ace_ci(&data, method, args.boot, args.seed)?;
    emit(&serde_json::to_value(&est)?, args.out.as_deref())?;
    Ok(EXIT_PROCEED)
}

fn diagnostics(args: DiagnosticsArgs) -> Result<u8> {
    let mut data_args = args.data;
    data_args.oracle.get_or_insert_with(|| "U".to_string());
    let data = data_args.load()?;
    let report = proxy_diagnostics(&data)?;
    emit(&serde_json::to_value(&report)?, args.out.as_deref())?;
    Ok(EXIT_PROCEED)
}

fn pipeline(args: PipelineArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut raw: Value = serde_json::from_str(&text).context("parsing config")?;
    if let (None, Some(obj)) = (args.seed, raw.as_object_mut()) {
        if !obj.contains_key("seed") {
            if let Ok(s) = std::env::var(SEED_ENV) {
                let seed: u64 = s.parse().with_context(|| format!("{SEED_ENV}={s}"))?;
                obj.insert("seed".into(), json!(seed));
            }
        }
    }
    let mut config: PipelineConfig = serde_json::from_value(raw).context("parsing config")?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.out.is_some() {
        config.output = args.out;
    }
    let report = run_pipeline(&config)?;
    print_out(&serde_json::to_string_pretty(&report)?)?;
    Ok(verdict_code(report.gate.verdict))
}

fn bench_table1(args: Table1Args) -> Result<u8> {
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
    let opts = BenchOptions { n_boot: args.boot, gamma_high: args.gamma_high, stage1: args.stage1 };
    let (reports, summary) = run_table1_bench(&seeds, args.n, &opts)?;
    emit(&json!({ "summary": summary, "runs": reports }), args.out.as_deref())?;
    Ok(EXIT_PROCEED)
}

fn bench_gotchas(args: GotchaArgs) -> Result<u8> {
    let reports = (args.seed..args.seed + args.seeds)
        .map(|s| run_gotcha_bench(s, args.n))
        .collect::<proxtext::Result<Vec<_>>>()?;
    emit(&serde_json::to_value(&reports)?, args.out.as_deref())?;
    Ok(EXIT_PROCEED)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Dag(DagCommand::Check(a)) => dag_check(a),
        Command::Gate(a) => gate_cmd(a),
        Command::Estimate(a) => estimate(a),
        Command::Diagnostics(a) => diagnostics(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Bench(BenchCommand::Table1(a)) => bench_table1(a),
        Command::Bench(BenchCommand::Gotchas(a)) => bench_gotchas(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
