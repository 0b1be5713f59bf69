//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture`
//! doubles as a report.

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proxtext::dag::check_proximal_structure;
use proxtext::experiments::{run_gotcha_bench, run_table1_bench, BenchOptions, ProxyDesign, Table1Report, Table1Summary};
use proxtext::oddsratio::{crosstab_odds_ratio, gamma_point_with, gate_interval, GateReason};
use proxtext::pipeline::{run_pipeline, DagSource, DataSource, PipelineConfig, ProxySource};
use proxtext::regress::{logistic_fit, logistic_log_likelihood, logistic_score, ols_fit};
use proxtext::rng::{self, StreamRng};
use proxtext::synth::FullSynthCoefficients;
use proxtext::{builtin_graph, BuiltinGraph, CausalDag, ClassWeighting, DesignMatrix, RoleAssignment, Verdict};
use rand::Rng;

fn report(criterion: u32, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

const TABLE1_SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
const TABLE1_N: usize = 10_000;

fn table1() -> &'static (Vec<Table1Report>, Table1Summary, Duration) {
    static RUN: OnceLock<(Vec<Table1Report>, Table1Summary, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let (reports, summary) = run_table1_bench(&TABLE1_SEEDS, TABLE1_N, &BenchOptions::default()).unwrap();
        (reports, summary, start.elapsed())
    })
}

#[test]
fn criterion_1_table1_gate_verdicts() {
    let (reports, summary, elapsed) = table1();
    let per_design: Vec<String> = summary
        .designs
        .iter()
        .map(|d| format!("{} {}/{}", d.label, d.verdict_matches, summary.n_seeds))
        .collect();
    let matching = summary.seeds_with_matching_verdicts;
    let pass = matching >= 9 && *elapsed < Duration::from_secs(180);
    let p2m_highs: Vec<String> = reports
        .iter()
        .map(|r| format!("{:.2}", r.row(ProxyDesign::P2M).odds_ratio.ci_high))
        .collect();
    report(
        1,
        pass,
        &format!(
            "{matching}/10 seeds match the full pattern; {}; P2M CI highs [{}]; {:.1}s",
            per_design.join(", "),
            p2m_highs.join(", "),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_table1_bias_and_coverage() {
    let (_, summary, _) = table1();
    let mut checks = Vec::new();
    let mut pass = true;
    for design in ProxyDesign::ALL {
        let d = summary.design(design);
        let ok = if design.same_text() {
            d.mean_abs_bias > 0.05 && summary.n_seeds - d.ci_covers_truth >= 8
        } else {
            d.mean_abs_bias < 0.05 && d.ci_covers_truth >= 8
        };
        pass &= ok;
        checks.push(format!(
            "{} mean|bias| {:.4} covers {}/{}{}",
            d.label,
            d.mean_abs_bias,
            d.ci_covers_truth,
            summary.n_seeds,
            if ok { "" } else { " <-" }
        ));
    }
    report(2, pass, &checks.join("; "));
    assert!(pass);
}

#[test]
fn criterion_3_backdoor_with_proxy_is_biased() {
    let mut pass = true;
    let mut lines = Vec::new();
    for seed in 0..5 {
        let r = run_gotcha_bench(seed, 100_000).unwrap();
        let proxy = r.arm("backdoor_proxy").unwrap().bias.abs();
        let oracle = r.arm("backdoor_oracle").unwrap().bias.abs();
        pass &= proxy > 0.05 && oracle < 0.03;
        lines.push(format!("seed {seed}: proxy {proxy:.3} oracle {oracle:.4}"));
    }
    report(3, pass, &lines.join("; "));
    assert!(pass);
}

/// All simple paths between `x` and `y` in the skeleton, checked one by one
/// against the blocking rules.
fn brute_force_separated(g: &CausalDag, x: &str, y: &str, given: &BTreeSet<String>) -> bool {
    let nodes = g.nodes().to_vec();
    let descendants = |n: &str| {
        let mut seen = BTreeSet::new();
        let mut stack = vec![n.to_string()];
        while let Some(v) = stack.pop() {
            for c in g.children_of(&v).unwrap() {
                if seen.insert(c.to_string()) {
                    stack.push(c.to_string());
                }
            }
        }
        seen
    };
    let adjacent = |a: &str, b: &str| g.has_edge(a, b) || g.has_edge(b, a);

    fn extend(
        path: &mut Vec<String>,
        y: &str,
        nodes: &[String],
        adjacent: &dyn Fn(&str, &str) -> bool,
        out: &mut Vec<Vec<String>>,
    ) {
        let last = path.last().unwrap().clone();
        if last == y {
            out.push(path.clone());
            return;
        }
        for n in nodes {
            if !path.contains(n) && adjacent(&last, n) {
                path.push(n.clone());
                extend(path, y, nodes, adjacent, out);
                path.pop();
            }
        }
    }
    let mut paths = Vec::new();
    extend(&mut vec![x.to_string()], y, &nodes, &adjacent, &mut paths);

    let open = |p: &Vec<String>| {
        (1..p.len() - 1).all(|i| {
            let (a, m, b) = (&p[i - 1], &p[i], &p[i + 1]);
            let collider = g.has_edge(a, m) && g.has_edge(b, m);
            if collider {
                given.contains(m) || descendants(m).iter().any(|d| given.contains(d))
            } else {
                !given.contains(m)
            }
        })
    };
    !paths.iter().any(open)
}

fn random_dag(r: &mut StreamRng) -> CausalDag {
    let k = r.gen_range(2..=6);
    let names: Vec<String> = (0..k).map(|i| format!("v{i}")).collect();
    let order = rng::permutation(r, k);
    let density = r.gen_range(0.2..0.7);
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if rng::uniform(r) < density {
                edges.push((names[order[i]].clone(), names[order[j]].clone()));
            }
        }
    }
    CausalDag::new(names.clone(), edges).unwrap()
}

#[test]
fn criterion_4_d_separation_matches_brute_force_and_figures() {
    let mut r = rng::stream(2024);
    let mut queries = 0usize;
    let mut disagreements = 0usize;
    for _ in 0..200 {
        let g = random_dag(&mut r);
        let nodes = g.nodes().to_vec();
        for x in &nodes {
            for y in &nodes {
                if x == y {
                    continue;
                }
                let rest: Vec<&String> = nodes.iter().filter(|n| *n != x && *n != y).collect();
                for mask in 0..(1u32 << rest.len()) {
                    let given: BTreeSet<String> =
                        rest.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, n)| (*n).clone()).collect();
                    let z: Vec<&str> = given.iter().map(String::as_str).collect();
                    let fast = g.d_separated(&[x.as_str()], &[y.as_str()], &z).unwrap();
                    queries += 1;
                    if fast != brute_force_separated(&g, x, y, &given) {
                        disagreements += 1;
                    }
                }
            }
        }
    }

    let roles = RoleAssignment::standard();
    let check = |b| check_proximal_structure(&builtin_graph(b), &roles).unwrap();
    let mut verdicts = Vec::new();
    // proxy used for backdoor adjustment leaves the confounding path open
    let fig2b = builtin_graph(BuiltinGraph::Fig2b);
    let no_effect: Vec<(&str, &str)> = fig2b.edges().filter(|e| *e != ("A", "Y")).collect();
    let backdoor = CausalDag::new(fig2b.nodes().to_vec(), no_effect).unwrap();
    verdicts.push((
        "proxy backdoor",
        !backdoor.d_separated(&["A"], &["Y"], &["W", "C"]).unwrap() && backdoor.d_separated(&["A"], &["Y"], &["U", "C"]).unwrap(),
    ));
    let post = check(BuiltinGraph::Fig3a);
    verdicts.push(("post-treatment text", !post.p2_holds && !post.p3_holds));
    let same = check(BuiltinGraph::Fig3b);
    verdicts.push(("same text", !same.p1_holds && same.p2_holds && same.p3_holds));
    verdicts.push(("split text, one model", check(BuiltinGraph::Fig3c).all_hold()));
    verdicts.push(("split text, two models", check(BuiltinGraph::Fig3d).all_hold()));
    verdicts.push(("post-treatment Z", check(BuiltinGraph::Fig5Posttreat).all_hold()));
    verdicts.push(("actionable Z", check(BuiltinGraph::Fig6Actionable).all_hold()));

    let failed: Vec<&str> = verdicts.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let pass = disagreements == 0 && failed.is_empty();
    report(
        4,
        pass,
        &format!("{disagreements} disagreements in {queries} queries; figure verdicts failing: {failed:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_odds_ratio_closed_form() {
    let mut r = rng::stream(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let cells: Vec<usize> = (0..4).map(|_| r.gen_range(1..60)).collect();
        let mut w = Vec::new();
        let mut z = Vec::new();
        for (k, (wi, zi)) in [(1u8, 1u8), (1, 0), (0, 1), (0, 0)].into_iter().enumerate() {
            w.extend(std::iter::repeat(wi).take(cells[k]));
            z.extend(std::iter::repeat(zi).take(cells[k]));
        }
        let closed = crosstab_odds_ratio(&w, &z).unwrap();
        let fit = gamma_point_with(&w, &z, &DesignMatrix::empty(w.len()), ClassWeighting::None).unwrap();
        worst = worst.max((fit.gamma - closed).abs() / closed);
    }
    let pass = worst <= 1e-6;
    report(5, pass, &format!("worst relative error {worst:.2e} over 1000 tables"));
    assert!(pass);
}

fn random_problem(r: &mut StreamRng, n: usize, p: usize) -> (DesignMatrix, Vec<u8>, Vec<f64>) {
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|_| rng::normal(r) * (1.0 + j as f64)).collect()).collect();
    let beta: Vec<f64> = (0..p).map(|_| rng::normal(r) * 0.5).collect();
    let intercept = rng::normal(r) * 0.5;
    let mut y_bin = Vec::with_capacity(n);
    let mut y_real = Vec::with_capacity(n);
    for i in 0..n {
        let eta: f64 = intercept + (0..p).map(|j| beta[j] * cols[j][i]).sum::<f64>();
        y_bin.push(rng::bernoulli(r, proxtext::regress::expit(eta)));
        y_real.push(eta + rng::normal(r));
    }
    (DesignMatrix::new(names, cols).unwrap(), y_bin, y_real)
}

#[test]
fn criterion_6_numerical_core() {
    let mut r = rng::stream(6);
    let mut worst_score = 0.0f64;
    let mut worst_fd = 0.0f64;
    let mut worst_orth = 0.0f64;
    let mut problems = 0;
    while problems < 100 {
        let n = r.gen_range(60..300);
        let p = r.gen_range(1..5);
        let (x, y, yr) = random_problem(&mut r, n, p);
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        problems += 1;
        let weighting = if problems % 2 == 0 { ClassWeighting::Balanced } else { ClassWeighting::None };
        let fit = logistic_fit(&x, &y, weighting).unwrap();
        if fit.converged {
            let s = logistic_score(fit.intercept, &fit.coefficients, &x, &y, weighting);
            worst_score = worst_score.max(s.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        } else {
            worst_score = f64::INFINITY;
        }

        // finite differences at a random parameter point
        let b0 = rng::normal(&mut r) * 0.3;
        let b: Vec<f64> = (0..p).map(|_| rng::normal(&mut r) * 0.3).collect();
        let analytic = logistic_score(b0, &b, &x, &y, weighting);
        let ll = |b0: f64, b: &[f64]| logistic_log_likelihood(b0, b, &x, &y, weighting);
        let h = 1e-5;
        for k in 0..=p {
            let numeric = if k == 0 {
                (ll(b0 + h, &b) - ll(b0 - h, &b)) / (2.0 * h)
            } else {
                let mut up = b.clone();
                let mut down = b.clone();
                up[k - 1] += h;
                down[k - 1] -= h;
                (ll(b0, &up) - ll(b0, &down)) / (2.0 * h)
            };
            let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(1.0);
            worst_fd = worst_fd.max(rel);
        }

        let lm = ols_fit(&x, &yr).unwrap();
        let pred = lm.predict(&x).unwrap();
        let resid: Vec<f64> = yr.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let norm_y = yr.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ones = vec![1.0; n];
        for col in std::iter::once(&ones).chain(x.columns()) {
            let dot: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum();
            worst_orth = worst_orth.max(dot.abs() / norm_y);
        }
    }
    let pass = worst_score <= 1e-8 && worst_fd <= 1e-5 && worst_orth <= 1e-8;
    report(
        6,
        pass,
        &format!("max score {worst_score:.2e}, max FD rel err {worst_fd:.2e}, max residual dot / |y| {worst_orth:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_gate_branches() {
    let cases = [
        ((1.35, 1.42), Verdict::Proceed, GateReason::Passed),
        ((7.9, 8.41), Verdict::Stop, GateReason::CiHighExceedsGammaHigh),
        ((0.9, 1.5), Verdict::Stop, GateReason::CiLowNotAboveOne),
    ];
    let pass = cases.iter().all(|&((lo, hi), v, reason)| {
        let d = gate_interval(lo, hi, 2.0);
        d.verdict == v && d.reason == reason && d.gamma_high_used == 2.0
    });
    report(7, pass, "(1.35, 1.42) proceed; (7.9, 8.41) stop high; (0.9, 1.5) stop low");
    assert!(pass);
}

#[test]
fn criterion_8_determinism_under_parallelism() {
    let mut cfg = PipelineConfig::new(
        DataSource::Synthetic { n: 3000, true_ace: 1.3, coefficients: FullSynthCoefficients::default() },
        ProxySource::Logistic { block: "inf2".into(), train_blocks: ["train1".into(), "train2".into()] },
        ProxySource::Logistic { block: "inf1".into(), train_blocks: ["train1".into(), "train2".into()] },
    );
    cfg.seed = 77;
    cfg.n_boot = 60;
    cfg.dag = Some(DagSource::Builtin { graph: BuiltinGraph::Fig3c, roles: RoleAssignment::standard() });

    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| run_pipeline(&cfg)).unwrap();
        serde_json::to_string(&report).unwrap()
    };
    let serial = run_with(1);
    let parallel = run_with(8);
    let again = run_with(8);
    let has_ace = serial.contains("\"ace\"");
    let pass = serial == parallel && parallel == again && has_ace;
    report(8, pass, &format!("1 vs 8 threads identical: {}; repeat identical: {}", serial == parallel, parallel == again));
    assert!(pass);
}
