//! The conditional odds ratio `γ_WZ.C` between the two proxies and the
//! falsification gate built on its bootstrap interval.
//!
//! `γ_WZ.C` is `exp` of the `Z` coefficient in a main-effects logistic
//! regression of `W` on `Z` and the covariates, with reference values
//! `w₀ = z₀ = 0`. Balanced class weights are used whenever the positivity of
//! `W` falls outside `[0.2, 0.8]`.

use serde::{Deserialize, Serialize};

use crate::bootstrap;
use crate::data::is_constant;
use crate::data::positivity;
use crate::data::to_real;
use crate::error::{Error, Result};
use crate::regress::{logistic_fit, ClassWeighting, DesignMatrix};

/// Positivity band of `W` outside which balanced class weighting is used.
pub const POSITIVITY_BAND: (f64, f64) = (0.2, 0.8);
/// Largest tolerated share of failed bootstrap replicates.
pub const MAX_FAILED_SHARE: f64 = 0.10;

const Z_FEATURE: &str = "Z";

/// Class weighting for a logistic fit whose target is `target`.
pub fn weighting_for(target: &[u8]) -> ClassWeighting {
    let p = positivity(target);
    if p < POSITIVITY_BAND.0 || p > POSITIVITY_BAND.1 {
        ClassWeighting::Balanced
    } else {
        ClassWeighting::None
    }
}

/// A single `γ_WZ.C` estimate with its fitting diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub log_gamma: f64,
    pub weighting: ClassWeighting,
    pub converged: bool,
    pub separation_detected: bool,
}

fn check_proxy_pair(w: &[u8], z: &[u8], c: &DesignMatrix) -> Result<()> {
    if w.len() != z.len() || w.len() != c.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "W has {} rows, Z has {}, covariates have {}",
            w.len(),
            z.len(),
            c.n_rows()
        )));
    }
    if is_constant(w) {
        return Err(Error::DegenerateProxy("W".into()));
    }
    if is_constant(z) {
        return Err(Error::DegenerateProxy("Z".into()));
    }
    Ok(())
}

/// `γ_WZ.C` with the weighting chosen from `W`'s positivity.
pub fn gamma_point(w: &[u8], z: &[u8], c: &DesignMatrix) -> Result<GammaFit> {
    check_proxy_pair(w, z, c)?;
    gamma_point_with(w, z, c, weighting_for(w))
}

/// `γ_WZ.C` with an explicit weighting.
pub fn gamma_point_with(w: &[u8], z: &[u8], c: &DesignMatrix, weighting: ClassWeighting) -> Result<GammaFit> {
    check_proxy_pair(w, z, c)?;
    let mut x = DesignMatrix::empty(w.len());
    x.push_column(Z_FEATURE, to_real(z))?;
    for (name, col) in c.names().iter().zip(c.columns()) {
        x.push_column(name.clone(), col.clone())?;
    }
    let fit = logistic_fit(&x, w, weighting)?;
    let log_gamma = fit.coefficient(Z_FEATURE).expect("Z is the first feature");
    Ok(GammaFit {
        gamma: log_gamma.exp(),
        log_gamma,
        weighting,
        converged: fit.converged,
        separation_detected: fit.separation_detected,
    })
}

/// Cross-product ratio `(n11·n00)/(n10·n01)` of the 2×2 table of `w`
/// against `z`.
pub fn crosstab_odds_ratio(w: &[u8], z: &[u8]) -> Result<f64> {
    if w.len() != z.len() {
        return Err(Error::LengthMismatch(format!("W has {} rows, Z has {}", w.len(), z.len())));
    }
    let mut counts = [[0usize; 2]; 2];
    for (&wi, &zi) in w.iter().zip(z) {
        if wi > 1 || zi > 1 {
            return Err(Error::NotBinary(if wi > 1 { "W" } else { "Z" }.into(), f64::from(wi.max(zi))));
        }
        counts[wi as usize][zi as usize] += 1;
    }
    let [[n00, n01], [n10, n11]] = counts;
    if n00 == 0 || n01 == 0 || n10 == 0 || n11 == 0 {
        return Err(Error::ZeroCell { n11, n10, n01, n00 });
    }
    Ok((n11 as f64 * n00 as f64) / (n10 as f64 * n01 as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioResult {
    pub gamma_point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_boot: usize,
    /// Replicates whose fit hit separation or the iteration cap, plus the
    /// excluded ones.
    pub n_nonconverged: usize,
    /// Replicates dropped from the percentiles because a resample made a
    /// proxy constant or the fit impossible.
    pub n_excluded: usize,
    pub weighting_used: ClassWeighting,
    pub point_separation: bool,
}

/// Bootstrap percentile interval for `γ_WZ.C`. Each replicate re-decides
/// the class weighting from its own `W`.
pub fn gamma_ci(w: &[u8], z: &[u8], c: &DesignMatrix, n_boot: usize, seed: u64) -> Result<OddsRatioResult> {
    if n_boot < 2 {
        return Err(Error::InvalidParams(format!("n_boot = {n_boot}, need at least 2")));
    }
    let point = gamma_point(w, z, c)?;
    let replicates = bootstrap::run_replicates(w.len(), n_boot, seed, |rows, _| {
        let wb: Vec<u8> = rows.iter().map(|&i| w[i]).collect();
        let zb: Vec<u8> = rows.iter().map(|&i| z[i]).collect();
        gamma_point(&wb, &zb, &c.select_rows(rows))
    });

    let mut gammas = Vec::with_capacity(n_boot);
    let mut n_nonconverged = 0;
    let mut n_excluded = 0;
    for r in replicates {
        match r {
            Ok(fit) => {
                if !fit.converged || fit.separation_detected {
                    n_nonconverged += 1;
                }
                gammas.push(fit.gamma);
            }
            Err(_) => {
                n_excluded += 1;
                n_nonconverged += 1;
            }
        }
    }
    if n_excluded as f64 > MAX_FAILED_SHARE * n_boot as f64 {
        return Err(Error::TooManyFailedReplicates { failed: n_excluded, total: n_boot });
    }
    let (ci_low, ci_high) = bootstrap::percentile_interval(&gammas);
    Ok(OddsRatioResult {
        gamma_point: point.gamma,
        ci_low,
        ci_high,
        n_boot,
        n_nonconverged,
        n_excluded,
        weighting_used: point.weighting,
        point_separation: point.separation_detected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proceed,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    Passed,
    CiLowNotAboveOne,
    CiHighExceedsGammaHigh,
    DegenerateProxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub verdict: Verdict,
    pub reason: GateReason,
    pub gamma_high_used: f64,
}

impl GateDecision {
    /// Stop verdict for proxies rejected before any odds ratio was computed.
    pub fn degenerate_proxy(gamma_high: f64) -> Self {
        GateDecision { verdict: Verdict::Stop, reason: GateReason::DegenerateProxy, gamma_high_used: gamma_high }
    }

    pub fn proceeds(&self) -> bool {
        self.verdict == Verdict::Proceed
    }
}

/// Proceed iff `1 < ci_low` and `ci_high < gamma_high`; the lower bound is
/// checked first.
pub fn gate_interval(ci_low: f64, ci_high: f64, gamma_high: f64) -> GateDecision {
    let (verdict, reason) = if !(1.0 < ci_low) {
        (Verdict::Stop, GateReason::CiLowNotAboveOne)
    } else if !(ci_high < gamma_high) {
        (Verdict::Stop, GateReason::CiHighExceedsGammaHigh)
    } else {
        (Verdict::Proceed, GateReason::Passed)
    };
    GateDecision { verdict, reason, gamma_high_used: gamma_high }
}

pub fn gate(result: &OddsRatioResult, gamma_high: f64) -> GateDecision {
    gate_interval(result.ci_low, result.ci_high, gamma_high)
}
