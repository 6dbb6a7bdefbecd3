//! Effect of adding redundant packets on the stationary loss probability,
//! including break-even analysis between the corruption gain and the extra
//! offered load.
//!
//! Adding `k` redundant packets to an `l`-packet message lets up to `k`
//! corrupted packets be recovered (MDS-code semantics by default), dropping
//! the corruption probability from `P{Bin(l, q) > 0}` to
//! `P{Bin(l+k, q) > k}` — at the price of scaling the offered load by
//! `(l+k)/l` and shrinking the waiting-place count ζ(N).

use crate::asymptotics::{
    classify_regime, loss_asymptote, BufferLaw, TrafficRegime,
};
use crate::busy_period::{loss_probability, mixture_characteristics};
use crate::error::{Error, Result};
use crate::packetization::{zeta_pmf, PacketLaw};
use crate::service::ServiceDistribution;
use crate::tauberian::CRITICAL_TOL;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Overloads up to `ρ = 1 + HT_EPSILON_MAX` are viewed through the
/// heavy-traffic expansion; larger ones through the fixed supercritical
/// formulas.
pub const HT_EPSILON_MAX: f64 = 0.25;

/// Relative tolerance for calling a loss ratio neutral.
const NEUTRAL_REL_TOL: f64 = 1e-12;

/// `P{Binomial(l+k, q) > k}`: the message is lost despite `k` recoverable
/// packets. `k = 0` reduces to `1 − (1−q)^l`.
pub fn message_corruption_prob(q: f64, l: u32, k: u32) -> Result<f64> {
    corruption_prob_with_threshold(q, l, k, k)
}

/// `P{Binomial(l+k, q) > threshold}` for a recovery threshold that may
/// differ from `k`.
pub fn corruption_prob_with_threshold(q: f64, l: u32, k: u32, threshold: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!(
            "corruption probability must lie in [0, 1], got {q}"
        )));
    }
    if l == 0 {
        return Err(Error::Domain("messages need at least one packet".into()));
    }
    let n = l + k;
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(if n > threshold { 1.0 } else { 0.0 });
    }
    // upper binomial tail, summed term by term from j = threshold + 1
    let mut term = (1.0 - q).powi(n as i32); // j = 0
    let mut tail = 0.0;
    for j in 0..=n {
        if j > threshold {
            tail += term;
        }
        if j < n {
            term *= (f64::from(n - j) / f64::from(j + 1)) * (q / (1.0 - q));
        }
    }
    Ok(tail.min(1.0))
}

/// A redundancy what-if: the base system plus the corruption model and the
/// number of redundant packets to add.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyScenario {
    /// Per-packet corruption probability.
    pub q: f64,
    /// Packets per message before redundancy (corruption model).
    pub base_packets: u32,
    /// Redundant packets added.
    pub redundant_packets: u32,
    /// Max corrupted packets recoverable; `None` means `redundant_packets`.
    pub recover_threshold: Option<u32>,
    pub lambda: f64,
    /// Service law of the base (k = 0) system; redundancy scales its mean
    /// by `(l+k)/l`.
    pub dist: ServiceDistribution,
    pub buffer_packets: u32,
    /// Packet law of the base system; redundancy shifts it by `k`.
    pub nu: PacketLaw,
}

impl RedundancyScenario {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::Validation(format!(
                "corruption probability must lie in [0, 1], got {}",
                self.q
            )));
        }
        if self.base_packets == 0 {
            return Err(Error::Validation("base_packets must be >= 1".into()));
        }
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::Validation(format!(
                "arrival rate must be > 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Corruption probability of the base system (`k = 0`).
    pub fn p_before(&self) -> Result<f64> {
        message_corruption_prob(self.q, self.base_packets, 0)
    }

    /// Corruption probability with `k` redundant packets.
    pub fn p_after(&self, k: u32) -> Result<f64> {
        let threshold = self.recover_threshold.unwrap_or(k).min(k);
        corruption_prob_with_threshold(self.q, self.base_packets, k, threshold)
    }

    /// Offered load after adding `k` packets: `ρ (l+k)/l`.
    pub fn rho_after(&self, k: u32) -> f64 {
        self.lambda * self.dist.mean() * self.load_factor(k)
    }

    fn load_factor(&self, k: u32) -> f64 {
        f64::from(self.base_packets + k) / f64::from(self.base_packets)
    }

    fn dist_after(&self, k: u32) -> Result<ServiceDistribution> {
        self.dist.scaled(self.load_factor(k))
    }
}

/// Which pair of regimes the before/after systems fall into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimePair {
    /// Both loads at most 1: loss probabilities reduce to p and p̆.
    BothSubOrCritical,
    /// Both loads above 1, at least one beyond the heavy-traffic window.
    BothSupercritical,
    /// Both loads in (1, 1 + HT_EPSILON_MAX]: compared via the exponent
    /// formula.
    BothHeavyTraffic,
    /// Straddles the critical point; the outcome depends on how the small
    /// overload compares to p and 1/ζ(N), so no single ratio is asserted
    /// and both candidate predictions are surfaced instead.
    Mixed,
}

/// Direction of the loss-probability change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decrease,
    Neutral,
    Increase,
    RequiresCaseAnalysis,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Decrease => "decrease",
            Verdict::Neutral => "neutral",
            Verdict::Increase => "increase",
            Verdict::RequiresCaseAnalysis => "requires-case-analysis",
        }
    }
}

/// The two candidate predictions for a mixed-regime after-system, printed
/// side by side without asserting either.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseAnalysis {
    /// Bounded-exponent prediction `(D + e^x/(e^x−1))·ε`.
    pub bounded_exponent_pi: f64,
    /// Vanishing-exponent prediction `p̆ + ρ̆₂/(2Eζ̆)`.
    pub vanishing_exponent_pi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvaluation {
    pub regime_pair: RegimePair,
    pub p_before: f64,
    pub p_after: f64,
    pub rho_before: f64,
    pub rho_after: f64,
    /// Predicted `Π_after / Π_before`; absent in the mixed case.
    pub loss_ratio: Option<f64>,
    pub verdict: Verdict,
    pub case_analysis: Option<CaseAnalysis>,
}

fn verdict_from_ratio(ratio: f64) -> Verdict {
    if (ratio - 1.0).abs() <= NEUTRAL_REL_TOL {
        Verdict::Neutral
    } else if ratio < 1.0 {
        Verdict::Decrease
    } else {
        Verdict::Increase
    }
}

/// Evaluates the scenario: classifies the before/after regime pair and
/// predicts the multiplicative change of the stationary loss probability.
pub fn scenario_eval(scenario: &RedundancyScenario) -> Result<ScenarioEvaluation> {
    scenario.validate()?;
    let k = scenario.redundant_packets;
    let p = scenario.p_before()?;
    let p_breve = scenario.p_after(k)?;
    let rho = scenario.lambda * scenario.dist.mean();
    let rho_breve = scenario.rho_after(k);
    let eps = rho - 1.0;
    let eps_breve = rho_breve - 1.0;
    let before_super = eps > CRITICAL_TOL;
    let after_super = eps_breve > CRITICAL_TOL;

    let finish = |pair, ratio: Option<f64>, verdict, case| ScenarioEvaluation {
        regime_pair: pair,
        p_before: p,
        p_after: p_breve,
        rho_before: rho,
        rho_after: rho_breve,
        loss_ratio: ratio,
        verdict,
        case_analysis: case,
    };

    if !before_super && !after_super {
        // both limits are the corruption probabilities themselves
        let (ratio, verdict) = if p == 0.0 && p_breve == 0.0 {
            (1.0, Verdict::Neutral)
        } else if p == 0.0 {
            (f64::INFINITY, Verdict::Increase)
        } else {
            let r = p_breve / p;
            (r, verdict_from_ratio(r))
        };
        return Ok(finish(RegimePair::BothSubOrCritical, Some(ratio), verdict, None));
    }

    if before_super && after_super {
        let exponents = heavy_traffic_exponents(scenario, k);
        if eps <= HT_EPSILON_MAX && eps_breve <= HT_EPSILON_MAX {
            if let Ok((x, x_breve)) = exponents {
                // Pi_after / Pi_before with both systems in the bounded-
                // exponent case: (e^x-1)/(e^x̆-1) ·
                // [(e^x̆-1)p̆ + e^x̆ ε̆] / [(e^x-1)p + e^x ε]
                let ex = x.exp();
                let exb = x_breve.exp();
                let ratio = (ex - 1.0) / (exb - 1.0)
                    * ((exb - 1.0) * p_breve + exb * eps_breve)
                    / ((ex - 1.0) * p + ex * eps);
                return Ok(finish(
                    RegimePair::BothHeavyTraffic,
                    Some(ratio),
                    verdict_from_ratio(ratio),
                    None,
                ));
            }
        }
        let ratio = rho * (p_breve + rho_breve - 1.0) / (rho_breve * (p + rho - 1.0));
        return Ok(finish(
            RegimePair::BothSupercritical,
            Some(ratio),
            verdict_from_ratio(ratio),
            None,
        ));
    }

    // straddling the critical point: present both candidate predictions
    // for the overloaded side, asserting neither
    let case = mixed_case_analysis(scenario, k, p_breve, eps_breve).ok();
    Ok(finish(RegimePair::Mixed, None, Verdict::RequiresCaseAnalysis, case))
}

/// Heavy-traffic exponents `x = 2C/ρ₂` for the before and after systems.
fn heavy_traffic_exponents(scenario: &RedundancyScenario, k: u32) -> Result<(f64, f64)> {
    let eps = scenario.lambda * scenario.dist.mean() - 1.0;
    let eps_breve = scenario.rho_after(k) - 1.0;
    let zeta = zeta_pmf(&scenario.nu, scenario.buffer_packets)?;
    let zeta_breve = zeta_pmf(&scenario.nu.shifted(k), scenario.buffer_packets)?;
    let rho2 = scenario.dist.traffic_moments(scenario.lambda, 2)?.rho_j(2);
    let rho2_breve = scenario
        .dist_after(k)?
        .traffic_moments(scenario.lambda, 2)?
        .rho_j(2);
    Ok((
        2.0 * eps * zeta.mean() / rho2,
        2.0 * eps_breve * zeta_breve.mean() / rho2_breve,
    ))
}

fn mixed_case_analysis(
    scenario: &RedundancyScenario,
    k: u32,
    p_breve: f64,
    eps_breve: f64,
) -> Result<CaseAnalysis> {
    if eps_breve <= CRITICAL_TOL {
        return Err(Error::Regime(
            "case analysis applies to the overloaded side only".into(),
        ));
    }
    let zeta_breve = zeta_pmf(&scenario.nu.shifted(k), scenario.buffer_packets)?;
    let rho2_breve = scenario
        .dist_after(k)?
        .traffic_moments(scenario.lambda, 2)?
        .rho_j(2);
    let x = 2.0 * eps_breve * zeta_breve.mean() / rho2_breve;
    let ex = x.exp();
    let d = p_breve / eps_breve;
    Ok(CaseAnalysis {
        bounded_exponent_pi: (d + ex / (ex - 1.0)) * eps_breve,
        vanishing_exponent_pi: p_breve + rho2_breve / (2.0 * zeta_breve.mean()),
    })
}

/// Break-even for the bounded-exponent heavy-traffic case:
/// `(p − p̆) − (e^x/(e^x−1))·(ε̆ − ε)` with `x = 2C/ρ̃₂`. Positive means
/// the redundant packet lowers the loss probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakEvenGap {
    pub gap: f64,
    /// Set when `ε̆ <= ε`: adding packets should raise the load.
    pub load_warning: bool,
}

pub fn break_even_gap(
    p: f64,
    p_breve: f64,
    eps: f64,
    eps_breve: f64,
    c: f64,
    rho2_tilde: f64,
) -> Result<BreakEvenGap> {
    for (name, v) in [("p", p), ("p_breve", p_breve)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    if c.is_nan() || c <= 0.0 || rho2_tilde.is_nan() || rho2_tilde <= 0.0 {
        return Err(Error::Domain(format!(
            "break-even needs C > 0 and rho2_tilde > 0, got C = {c}, rho2_tilde = {rho2_tilde}"
        )));
    }
    let x = (2.0 * c / rho2_tilde).exp();
    let coeff = x / (x - 1.0);
    Ok(BreakEvenGap {
        gap: (p - p_breve) - coeff * (eps_breve - eps),
        load_warning: eps_breve <= eps,
    })
}

/// One row of the redundancy sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: u32,
    pub p_breve: f64,
    pub rho_breve: f64,
    pub regime: TrafficRegime,
    /// Asymptotic loss prediction; absent when the prediction needs a ζ law
    /// that the shifted packet sizes no longer admit.
    pub pi_predicted: Option<f64>,
    /// Exact loss probability from the busy-period recurrence, where the
    /// buffer still fits a message.
    pub pi_exact: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// k minimizing the predicted loss (smallest k on ties).
    pub argmin_k: Option<u32>,
}

fn sweep_row(base: &RedundancyScenario, k: u32) -> Result<SweepRow> {
    let scenario = RedundancyScenario {
        redundant_packets: k,
        ..base.clone()
    };
    let p_breve = scenario.p_after(k)?;
    let rho_breve = scenario.rho_after(k);
    let dist_after = scenario.dist_after(k)?;
    let verdict = scenario_eval(&scenario)?.verdict;
    match zeta_pmf(&scenario.nu.shifted(k), scenario.buffer_packets) {
        Ok(zeta) => {
            let buffer = BufferLaw::Zeta(&zeta);
            let report = classify_regime(scenario.lambda, &dist_after, buffer, p_breve)?;
            let pi_predicted =
                loss_asymptote(&report, p_breve, scenario.lambda, &dist_after, buffer)?;
            let chars =
                mixture_characteristics(&zeta, scenario.lambda, &dist_after, p_breve)?;
            Ok(SweepRow {
                k,
                p_breve,
                rho_breve,
                regime: report.regime,
                pi_predicted: Some(pi_predicted),
                pi_exact: Some(loss_probability(&chars)),
                verdict,
            })
        }
        Err(_) => {
            // buffer no longer fits one message; only the load-free
            // subcritical limit is still meaningful
            let regime = if rho_breve < 1.0 - CRITICAL_TOL {
                TrafficRegime::Subcritical
            } else if rho_breve > 1.0 + CRITICAL_TOL {
                TrafficRegime::Supercritical
            } else {
                TrafficRegime::Critical
            };
            let pi_predicted =
                (regime == TrafficRegime::Subcritical).then_some(p_breve);
            Ok(SweepRow {
                k,
                p_breve,
                rho_breve,
                regime,
                pi_predicted,
                pi_exact: None,
                verdict,
            })
        }
    }
}

/// Evaluates every `k` in the range against the `k = 0` baseline.
/// Rows are independent and evaluated in parallel when available.
pub fn sweep(base: &RedundancyScenario, k_values: &[u32]) -> Result<SweepTable> {
    base.validate()?;
    if k_values.is_empty() {
        return Err(Error::Validation("sweep needs a nonempty k range".into()));
    }
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<SweepRow>> =
        k_values.par_iter().map(|&k| sweep_row(base, k)).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<SweepRow>> = k_values.iter().map(|&k| sweep_row(base, k)).collect();
    let rows = rows?;
    let argmin_k = rows
        .iter()
        .filter_map(|r| r.pi_predicted.map(|pi| (r.k, pi)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        .map(|(k, _)| k);
    Ok(SweepTable { rows, argmin_k })
}
