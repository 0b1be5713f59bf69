//! Replication benchmarks on the fully synthetic DGP: the four proxy
//! designs with their gate verdicts and ACE intervals, and the side-by-side
//! bias comparison of backdoor and proximal estimators.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oddsratio::{gamma_ci, gate, GateDecision, OddsRatioResult, Verdict};
use crate::proxies::{predict, train_logistic_proxy, ProxyModel};
use crate::proximal::{ace_ci, AceEstimate, AceMethod, Stage1};
use crate::rng::derive_seed;
use crate::synth::{generate_fully_synthetic, SynthParams};

pub const MIN_BENCH_ROWS: usize = 1000;
pub const DEFAULT_BENCH_ROWS: usize = 10_000;

/// Feature and cutoff of the heuristic proxy.
pub const THRESHOLD_FEATURE: &str = "X1";
pub const THRESHOLD_CUTOFF: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProxyDesign {
    /// One trained model applied to two distinct inference blocks.
    P1M,
    /// One trained model applied twice to the same block.
    P1MSame,
    /// Trained model for `W` on one block, heuristic for `Z` on another.
    P2M,
    /// Trained model and heuristic on the same block.
    P2MSame,
}

impl ProxyDesign {
    pub const ALL: [ProxyDesign; 4] = [ProxyDesign::P1M, ProxyDesign::P1MSame, ProxyDesign::P2M, ProxyDesign::P2MSame];

    pub fn label(self) -> &'static str {
        match self {
            ProxyDesign::P1M => "P1M",
            ProxyDesign::P1MSame => "P1M, same",
            ProxyDesign::P2M => "P2M",
            ProxyDesign::P2MSame => "P2M, same",
        }
    }

    pub fn same_text(self) -> bool {
        matches!(self, ProxyDesign::P1MSame | ProxyDesign::P2MSame)
    }

    /// Gate verdict the design is expected to receive.
    pub fn expected_verdict(self) -> Verdict {
        if self.same_text() {
            Verdict::Stop
        } else {
            Verdict::Proceed
        }
    }

    /// `(W, Z)` for this design. `W` always comes from the trained model;
    /// `Z` is read from the first inference block.
    pub fn proxies(self, data: &Dataset, trained: &ProxyModel) -> Result<(Vec<u8>, Vec<u8>)> {
        let heuristic = ProxyModel::Threshold { feature: THRESHOLD_FEATURE.into(), cutoff: THRESHOLD_CUTOFF };
        let w_block = if self.same_text() { "inf1" } else { "inf2" };
        let w = predict(trained, data, Some(w_block))?;
        let z = match self {
            ProxyDesign::P1M | ProxyDesign::P1MSame => predict(trained, data, Some("inf1"))?,
            ProxyDesign::P2M | ProxyDesign::P2MSame => predict(&heuristic, data, Some("inf1"))?,
        };
        Ok((w, z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub n_boot: usize,
    pub gamma_high: f64,
    pub stage1: Stage1,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { n_boot: crate::DEFAULT_N_BOOT, gamma_high: crate::DEFAULT_GAMMA_HIGH, stage1: Stage1::Logistic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub design: ProxyDesign,
    pub label: String,
    pub odds_ratio: OddsRatioResult,
    pub gate: GateDecision,
    pub ace: AceEstimate,
    pub bias: f64,
    pub ci_covers_truth: bool,
}

impl Table1Row {
    pub fn verdict_as_expected(&self) -> bool {
        self.gate.verdict == self.design.expected_verdict()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub seed: u64,
    pub n: usize,
    pub true_ace: f64,
    pub options: BenchOptions,
    pub rows: Vec<Table1Row>,
}

impl Table1Report {
    pub fn row(&self, design: ProxyDesign) -> &Table1Row {
        self.rows.iter().find(|r| r.design == design).expect("every design is run")
    }

    pub fn verdicts_match(&self) -> bool {
        self.rows.iter().all(Table1Row::verdict_as_expected)
    }
}

fn check_rows(n: usize) -> Result<()> {
    if n < MIN_BENCH_ROWS {
        return Err(Error::InvalidParams(format!("n = {n}, benchmarks need at least {MIN_BENCH_ROWS}")));
    }
    Ok(())
}

/// All four designs on one dataset. The ACE is estimated for every design,
/// including those the gate stops, so the table shows what stopping avoids.
pub fn run_table1_experiment(seed: u64, n: usize, opts: &BenchOptions) -> Result<Table1Report> {
    check_rows(n)?;
    let params = SynthParams::new(n, seed);
    let data = generate_fully_synthetic(&params)?;
    let trained = train_logistic_proxy(&data, ("train1", "train2"))?;
    let c = data.covariate_matrix();

    let mut rows = Vec::with_capacity(ProxyDesign::ALL.len());
    for (i, design) in ProxyDesign::ALL.into_iter().enumerate() {
        let (w, z) = design.proxies(&data, &trained)?;
        let odds_ratio = gamma_ci(&w, &z, &c, opts.n_boot, derive_seed(seed, 2 * i as u64))?;
        let decision = gate(&odds_ratio, opts.gamma_high);
        let with_proxies = data.clone().with_proxies(w, z)?;
        let ace = ace_ci(
            &with_proxies,
            AceMethod::Proximal { stage1: opts.stage1 },
            opts.n_boot,
            derive_seed(seed, 2 * i as u64 + 1),
        )?;
        rows.push(Table1Row {
            design,
            label: design.label().to_string(),
            odds_ratio,
            gate: decision,
            bias: ace.point - params.true_ace,
            ci_covers_truth: ace.covers(params.true_ace),
            ace,
        });
    }
    Ok(Table1Report { seed, n, true_ace: params.true_ace, options: opts.clone(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub design: ProxyDesign,
    pub label: String,
    pub verdict_matches: usize,
    pub mean_abs_bias: f64,
    pub ci_covers_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Summary {
    pub n_seeds: usize,
    /// Seeds on which all four verdicts match the expected pattern.
    pub seeds_with_matching_verdicts: usize,
    pub designs: Vec<DesignSummary>,
}

impl Table1Summary {
    pub fn from_reports(reports: &[Table1Report]) -> Self {
        let designs = ProxyDesign::ALL
            .into_iter()
            .map(|design| {
                let rows: Vec<&Table1Row> = reports.iter().map(|r| r.row(design)).collect();
                DesignSummary {
                    design,
                    label: design.label().to_string(),
                    verdict_matches: rows.iter().filter(|r| r.verdict_as_expected()).count(),
                    mean_abs_bias: rows.iter().map(|r| r.bias.abs()).sum::<f64>() / rows.len().max(1) as f64,
                    ci_covers_truth: rows.iter().filter(|r| r.ci_covers_truth).count(),
                }
            })
            .collect();
        Table1Summary {
            n_seeds: reports.len(),
            seeds_with_matching_verdicts: reports.iter().filter(|r| r.verdicts_match()).count(),
            designs,
        }
    }

    pub fn design(&self, design: ProxyDesign) -> &DesignSummary {
        self.designs.iter().find(|d| d.design == design).expect("every design is summarized")
    }
}

pub fn run_table1_bench(seeds: &[u64], n: usize, opts: &BenchOptions) -> Result<(Vec<Table1Report>, Table1Summary)> {
    let reports = seeds
        .iter()
        .map(|&s| run_table1_experiment(s, n, opts))
        .collect::<Result<Vec<_>>>()?;
    let summary = Table1Summary::from_reports(&reports);
    Ok((reports, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GotchaArm {
    pub name: String,
    pub estimate: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GotchaReport {
    pub seed: u64,
    pub n: usize,
    pub true_ace: f64,
    pub arms: Vec<GotchaArm>,
}

impl GotchaReport {
    pub fn arm(&self, name: &str) -> Option<&GotchaArm> {
        self.arms.iter().find(|a| a.name == name)
    }
}

/// Point estimates of four estimators on one dataset: backdoor with the
/// trained proxy, backdoor with the oracle, and proximal with distinct and
/// with same-block proxies.
pub fn run_gotcha_bench(seed: u64, n: usize) -> Result<GotchaReport> {
    check_rows(n)?;
    let params = SynthParams::new(n, seed);
    let data = generate_fully_synthetic(&params)?;
    let trained = train_logistic_proxy(&data, ("train1", "train2"))?;
    let split_seed = derive_seed(seed, 0);

    let mut arms = Vec::new();
    let mut push = |name: &str, estimate: f64| {
        arms.push(GotchaArm { name: name.to_string(), estimate, bias: estimate - params.true_ace });
    };

    let (w, z) = ProxyDesign::P1M.proxies(&data, &trained)?;
    let valid = data.clone().with_proxies(w, z)?;
    push("backdoor_proxy", AceMethod::BackdoorProxy.estimate(&valid, split_seed)?.0);
    push("backdoor_oracle", AceMethod::BackdoorOracle.estimate(&valid, split_seed)?.0);
    let proximal = AceMethod::Proximal { stage1: Stage1::Logistic };
    push("proximal_valid", proximal.estimate(&valid, split_seed)?.0);
    let (w, z) = ProxyDesign::P1MSame.proxies(&data, &trained)?;
    let same = data.with_proxies(w, z)?;
    push("proximal_same", proximal.estimate(&same, split_seed)?.0);

    Ok(GotchaReport { seed, n, true_ace: params.true_ace, arms })
}
