//! Asymptotic predictions for the busy-period characteristics and the loss
//! probability in every traffic regime, each returned together with the
//! moment conditions that back it.
//!
//! The supercritical regime is governed by the least root `φ ∈ (0, 1)` of
//! `z = β(λ − λz)` and the factor `1 + λβ'(λ − λφ)`; the near-critical
//! (heavy-traffic) regime couples `ρ = 1 + ε` to buffer growth through
//! `C = lim ε·Eζ(N)`, where the expansions
//! `φ = 1 − 2ε/ρ̃₂ + O(ε²)` and `1 + λβ' = ε + O(ε²)` apply.

use crate::error::{Error, Result};
use crate::packetization::ZetaPmf;
use crate::service::ServiceDistribution;
use crate::tauberian::{bisect_then_newton, CRITICAL_TOL};

/// Below this value of `C = ε·Eζ` the heavy-traffic exponent is treated as
/// vanishing and the `E R → 1` branch applies.
pub const C_ZERO_TOL: f64 = 1e-9;

/// Traffic regime of a configuration. The two heavy-traffic variants are
/// explicit refinements of `Supercritical` for `ρ = 1 + ε` with small ε,
/// split on whether `ε·Eζ` stays away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficRegime {
    Subcritical,
    Critical,
    Supercritical,
    HeavyTrafficC,
    HeavyTrafficZero,
}

impl TrafficRegime {
    pub fn name(self) -> &'static str {
        match self {
            TrafficRegime::Subcritical => "subcritical",
            TrafficRegime::Critical => "critical",
            TrafficRegime::Supercritical => "supercritical",
            TrafficRegime::HeavyTrafficC => "heavy_traffic_C",
            TrafficRegime::HeavyTrafficZero => "heavy_traffic_zero",
        }
    }
}

/// Which moment conditions were verified when the report was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApplicabilityFlags {
    pub rho2_finite: bool,
    pub rho3_finite: bool,
}

/// Least root of `z = β(λ − λz)` with the derivative factor the theorems
/// divide by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiRoot {
    pub phi: f64,
    /// `1 + λ β'(λ − λφ)`.
    pub derivative_term: f64,
}

/// Regime classification of one concrete configuration. The limit theory
/// couples ε → 0 to N → ∞; for a finite system the coupling constants are
/// instantiated pointwise as `c = ε·Eζ(N)` and `d = p/ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: TrafficRegime,
    /// `ε = ρ − 1`.
    pub epsilon: f64,
    /// `c = ε·Eζ` (meaningful when ε > 0).
    pub c: f64,
    /// `d = p/ε`; infinite when ε vanishes but p does not.
    pub d: f64,
    /// Supercritical root, present iff `ρ > 1`.
    pub phi: Option<PhiRoot>,
    pub flags: ApplicabilityFlags,
}

/// Effective buffer description: a fixed capacity n or the ζ(N) law.
#[derive(Debug, Clone, Copy)]
pub enum BufferLaw<'a> {
    Fixed(u32),
    Zeta(&'a ZetaPmf),
}

impl BufferLaw<'_> {
    pub fn e_zeta(&self) -> f64 {
        match self {
            BufferLaw::Fixed(n) => f64::from(*n),
            BufferLaw::Zeta(z) => z.mean(),
        }
    }

    /// `E[φ^{−ζ}]`, exact from the pmf rather than approximated.
    ///
    /// This is the factor the supercritical limits carry: the per-capacity
    /// growth term `1/(φ^K u)` is averaged over the ζ law, so the mixture
    /// prediction needs the expectation of the reciprocal power, which
    /// matches `1/(φ^n u)` only in the fixed-capacity special case.
    pub fn mean_inv_pow(&self, phi: f64) -> f64 {
        match self {
            BufferLaw::Fixed(n) => phi.powi(-(*n as i32)),
            BufferLaw::Zeta(z) => z.expected_pow(1.0 / phi),
        }
    }
}

/// Least (absolute) root `φ ∈ (0, 1)` of `z − β(λ − λz) = 0`, which exists
/// iff `ρ > 1`. Bracketed bisection to 1e-13 plus one Newton polish.
pub fn phi_root(lambda: f64, dist: &ServiceDistribution) -> Result<PhiRoot> {
    let rho = lambda * dist.mean();
    if rho.is_nan() || rho <= 1.0 + CRITICAL_TOL {
        return Err(Error::Regime(format!(
            "phi root requires rho > 1, got rho = {rho}"
        )));
    }
    let g = |z: f64| dist.lst(lambda - lambda * z).unwrap_or(f64::NAN) - z;
    let g_prime = |z: f64| {
        -lambda * dist.lst_deriv(lambda - lambda * z, 1).unwrap_or(f64::NAN) - 1.0
    };
    // g(0) = beta(lambda) > 0 and g(1-) < 0 because g(1) = 0 with
    // slope rho - 1 > 0 from the left.
    let mut hi = f64::NAN;
    let mut u = 0.5;
    while u > 1e-12 {
        if g(1.0 - u) < 0.0 {
            hi = 1.0 - u;
            break;
        }
        u *= 0.5;
    }
    if hi.is_nan() {
        return Err(Error::Bracket(
            "no sign change of z - beta(lambda - lambda z) on (0, 1)".into(),
        ));
    }
    let phi = bisect_then_newton(&g, &g_prime, 0.0, hi, 1e-13);
    let derivative_term = 1.0 + lambda * dist.lst_deriv(lambda - lambda * phi, 1)?;
    Ok(PhiRoot {
        phi,
        derivative_term,
    })
}

/// Classifies the configuration by offered load (tie tolerance 1e-9 around
/// the critical point) and records the pointwise heavy-traffic quantities.
pub fn classify_regime(
    lambda: f64,
    dist: &ServiceDistribution,
    buffer: BufferLaw<'_>,
    p_mark: f64,
) -> Result<RegimeReport> {
    let tm = dist.traffic_moments(lambda, 3)?;
    let epsilon = tm.rho - 1.0;
    let flags = ApplicabilityFlags {
        rho2_finite: tm.rho_j(2).is_finite(),
        rho3_finite: tm.rho_j(3).is_finite(),
    };
    let (regime, phi) = if epsilon.abs() < CRITICAL_TOL {
        (TrafficRegime::Critical, None)
    } else if epsilon < 0.0 {
        (TrafficRegime::Subcritical, None)
    } else {
        (TrafficRegime::Supercritical, Some(phi_root(lambda, dist)?))
    };
    let c = epsilon.max(0.0) * buffer.e_zeta();
    let d = if epsilon > CRITICAL_TOL {
        p_mark / epsilon
    } else if p_mark == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(RegimeReport {
        regime,
        epsilon,
        c,
        d,
        phi,
        flags,
    })
}

/// Like [`classify_regime`] but viewing a slightly overloaded system
/// through the heavy-traffic lens: the regime becomes `HeavyTrafficC` or
/// `HeavyTrafficZero` depending on whether `c = ε·Eζ` is bounded away
/// from zero.
pub fn classify_heavy_traffic(
    lambda: f64,
    dist: &ServiceDistribution,
    buffer: BufferLaw<'_>,
    p_mark: f64,
) -> Result<RegimeReport> {
    let mut report = classify_regime(lambda, dist, buffer, p_mark)?;
    if report.epsilon <= CRITICAL_TOL {
        return Err(Error::Regime(format!(
            "heavy-traffic view requires rho = 1 + eps with eps > 0, got eps = {}",
            report.epsilon
        )));
    }
    report.regime = if report.c > C_ZERO_TOL {
        TrafficRegime::HeavyTrafficC
    } else {
        TrafficRegime::HeavyTrafficZero
    };
    Ok(report)
}

/// Limit prediction for the expected number of processed messages:
/// `1/(1−ρ)` below saturation, `(2/ρ₂)·Eζ` at it, and
/// `E[φ^{−ζ}]/(1+λβ') + 1/(1−ρ)` above it.
pub fn ep_asymptote(
    lambda: f64,
    dist: &ServiceDistribution,
    buffer: BufferLaw<'_>,
) -> Result<f64> {
    let tm = dist.traffic_moments(lambda, 2)?;
    let rho = tm.rho;
    if (rho - 1.0).abs() < CRITICAL_TOL {
        Ok((2.0 / tm.rho_j(2)) * buffer.e_zeta())
    } else if rho < 1.0 {
        Ok(1.0 / (1.0 - rho))
    } else {
        let root = phi_root(lambda, dist)?;
        Ok(buffer.mean_inv_pow(root.phi) / root.derivative_term + 1.0 / (1.0 - rho))
    }
}

/// Limit prediction for the expected number of refused messages:
/// `0`, exactly `1`, or `(ρ−1)·E[φ^{−ζ}]/(1+λβ')` by regime.
pub fn er_asymptote(
    lambda: f64,
    dist: &ServiceDistribution,
    buffer: BufferLaw<'_>,
) -> Result<f64> {
    let rho = lambda * dist.mean();
    if (rho - 1.0).abs() < CRITICAL_TOL {
        Ok(1.0)
    } else if rho < 1.0 {
        Ok(0.0)
    } else {
        let root = phi_root(lambda, dist)?;
        Ok((rho - 1.0) * buffer.mean_inv_pow(root.phi) / root.derivative_term)
    }
}

/// Heavy-traffic expansion outputs for `ρ = 1 + ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTraffic {
    pub e_p: f64,
    pub e_r: f64,
    /// First-order root expansion `φ ≈ 1 − 2ε/ρ̃₂`.
    pub phi_expansion: f64,
    /// First-order factor expansion `1 + λβ' ≈ ε`.
    pub derivative_term_expansion: f64,
}

/// Heavy-traffic predictions with exponent `C`. When `C` is below
/// [`C_ZERO_TOL`] the vanishing-exponent branch applies and `e_zeta` must
/// be supplied (the prediction `E P ≈ (2/ρ̃₂)·Eζ` needs it).
pub fn heavy_traffic(
    epsilon: f64,
    c: f64,
    rho2_tilde: f64,
    e_zeta: Option<f64>,
) -> Result<HeavyTraffic> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Regime(format!(
            "heavy traffic requires eps > 0, got {epsilon}"
        )));
    }
    if rho2_tilde.is_nan() || rho2_tilde <= 0.0 || c.is_nan() || c < 0.0 {
        return Err(Error::Domain(format!(
            "need rho2_tilde > 0 and C >= 0, got rho2_tilde = {rho2_tilde}, C = {c}"
        )));
    }
    let (e_p, e_r) = if c > C_ZERO_TOL {
        let x = (2.0 * c / rho2_tilde).exp();
        ((x - 1.0) / epsilon, x)
    } else {
        let e_zeta = e_zeta.ok_or_else(|| {
            Error::Domain("vanishing-C heavy traffic needs E[zeta] for E P".into())
        })?;
        ((2.0 / rho2_tilde) * e_zeta, 1.0)
    };
    Ok(HeavyTraffic {
        e_p,
        e_r,
        phi_expansion: 1.0 - 2.0 * epsilon / rho2_tilde,
        derivative_term_expansion: epsilon,
    })
}

/// Loss-probability prediction for the classified regime.
///
/// * `ρ < 1` (and the critical leading term): `Π ≈ p`
/// * critical with correction: `Π ≈ p + (1−p)ρ₂/(2Eζ)`
/// * `ρ > 1`: the renewal ratio `(E R + p E P)/(E R + E P)` of the
///   φ-based predictions, which tends to `(p + ρ − 1)/ρ`
/// * heavy traffic, `p/ε → D`: `Π ≈ (D + e^x/(e^x−1))·ε` with `x = 2C/ρ̃₂`
/// * heavy traffic, `p/ε → ∞`: `Π ≈ p`
/// * heavy traffic with vanishing exponent: `Π ≈ p + ρ̃₂/(2Eζ)`
pub fn loss_asymptote(
    report: &RegimeReport,
    p_mark: f64,
    lambda: f64,
    dist: &ServiceDistribution,
    buffer: BufferLaw<'_>,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_mark) {
        return Err(Error::Domain(format!(
            "marking probability must lie in [0, 1], got {p_mark}"
        )));
    }
    match report.regime {
        TrafficRegime::Subcritical => Ok(p_mark),
        TrafficRegime::Critical => {
            let tm = dist.traffic_moments(lambda, 2)?;
            Ok(p_mark + (1.0 - p_mark) * tm.rho_j(2) / (2.0 * buffer.e_zeta()))
        }
        TrafficRegime::Supercritical => {
            let e_p = ep_asymptote(lambda, dist, buffer)?;
            let e_r = er_asymptote(lambda, dist, buffer)?;
            Ok((e_r + p_mark * e_p) / (e_r + e_p))
        }
        TrafficRegime::HeavyTrafficC => {
            if report.d.is_infinite() {
                return Ok(p_mark);
            }
            // consistency of the (D, p, eps) triple
            let implied = report.d * report.epsilon;
            if (implied - p_mark).abs() > 1e-9 * p_mark.max(implied).max(1e-12) {
                return Err(Error::Validation(format!(
                    "inconsistent heavy-traffic triple: D*eps = {implied} but p = {p_mark}"
                )));
            }
            let tm = dist.traffic_moments(lambda, 2)?;
            let x = (2.0 * report.c / tm.rho_j(2)).exp();
            Ok((report.d + x / (x - 1.0)) * report.epsilon)
        }
        TrafficRegime::HeavyTrafficZero => {
            if report.d.is_infinite() {
                return Ok(p_mark);
            }
            let tm = dist.traffic_moments(lambda, 2)?;
            Ok(p_mark + tm.rho_j(2) / (2.0 * buffer.e_zeta()))
        }
    }
}

/// Per-step increments at the critical load for the fixed-capacity system:
/// `E P_{n+1} − E P_n → 2/ρ₂` and the matching loss-probability step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityIncrements {
    pub d_p: f64,
    pub d_pi: f64,
}

pub fn fixed_capacity_increments(
    n: u32,
    lambda: f64,
    dist: &ServiceDistribution,
    p_mark: f64,
) -> Result<CapacityIncrements> {
    let tm = dist.traffic_moments(lambda, 2)?;
    if (tm.rho - 1.0).abs() >= CRITICAL_TOL {
        return Err(Error::Regime(format!(
            "capacity increments require rho = 1, got {}",
            tm.rho
        )));
    }
    if n == 0 {
        return Err(Error::Domain("capacity increment needs n >= 1".into()));
    }
    let g = 2.0 / tm.rho_j(2);
    let nf = f64::from(n);
    let d_pi = (g * (p_mark - 1.0) / (nf * (nf + 1.0)))
        / ((g + 1.0 / (nf + 1.0)) * (g + 1.0 / nf));
    Ok(CapacityIncrements { d_p: g, d_pi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::busy_period::{fixed_characteristics, loss_probability};

    fn mm1() -> ServiceDistribution {
        ServiceDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn phi_root_mm1_quadratic() {
        // For M/M/1 the functional equation is quadratic with root 1/rho,
        // and 1 + lambda beta'(lambda - lambda phi) = (rho - 1)/rho.
        let root = phi_root(2.0, &mm1()).unwrap();
        assert!((root.phi - 0.5).abs() < 1e-13);
        assert!((root.derivative_term - 0.5).abs() < 1e-12);

        let root = phi_root(4.0, &mm1()).unwrap();
        assert!((root.phi - 0.25).abs() < 1e-13);
    }

    #[test]
    fn phi_root_rejects_critical_load() {
        assert!(matches!(phi_root(1.0, &mm1()), Err(Error::Regime(_))));
        assert!(matches!(phi_root(0.5, &mm1()), Err(Error::Regime(_))));
    }

    #[test]
    fn phi_root_satisfies_fixed_point() {
        for dist in [
            mm1(),
            ServiceDistribution::deterministic(1.0).unwrap(),
            ServiceDistribution::erlang(3, 1.0).unwrap(),
            ServiceDistribution::uniform(0.2, 1.8).unwrap(),
        ] {
            for &lambda in &[1.3, 2.0, 3.5] {
                let root = phi_root(lambda, &dist).unwrap();
                let resid =
                    (root.phi - dist.lst(lambda - lambda * root.phi).unwrap()).abs();
                assert!(
                    resid < 1e-12,
                    "{} lambda={lambda}: residual {resid}",
                    dist.kind_name()
                );
                assert!(root.phi > 0.0 && root.phi < 1.0);
            }
        }
    }

    #[test]
    fn ep_asymptote_by_regime() {
        // rho = 1/2: limit 1/(1 - rho) = 2.
        let v = ep_asymptote(0.5, &mm1(), BufferLaw::Fixed(50)).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        // rho = 1 with E zeta = 100: (2/rho_2) E zeta = 100 for M/M/1.
        let v = ep_asymptote(1.0, &mm1(), BufferLaw::Fixed(100)).unwrap();
        assert!((v - 100.0).abs() < 1e-12);
        // rho = 2, fixed n: 2^{n+1} - 1 after substituting phi = 1/2.
        for n in [3u32, 6, 10] {
            let v = ep_asymptote(2.0, &mm1(), BufferLaw::Fixed(n)).unwrap();
            let expected = 2f64.powi(n as i32 + 1) - 1.0;
            assert!((v - expected).abs() < 1e-9 * expected, "n={n}: {v}");
        }
    }

    #[test]
    fn er_asymptote_by_regime() {
        assert_eq!(er_asymptote(0.5, &mm1(), BufferLaw::Fixed(10)).unwrap(), 0.0);
        assert_eq!(er_asymptote(1.0, &mm1(), BufferLaw::Fixed(10)).unwrap(), 1.0);
        for n in [2u32, 5, 12] {
            let v = er_asymptote(2.0, &mm1(), BufferLaw::Fixed(n)).unwrap();
            let expected = 2f64.powi(n as i32 + 1);
            assert!((v - expected).abs() < 1e-9 * expected, "n={n}: {v}");
        }
    }

    #[test]
    fn supercritical_asymptote_matches_exact_recurrence_mm1() {
        // For exponential service the main term is exact: the recurrence
        // and the phi formula agree to rounding error (the generic
        // remainder decays like (2 phi/(1+phi))^n and is identically zero
        // here).
        for &rho in &[1.5f64, 2.0, 4.0] {
            for n in 1..=40u32 {
                let exact = fixed_characteristics(n, rho, &mm1(), 0.0).unwrap().e_r;
                let pred = er_asymptote(rho, &mm1(), BufferLaw::Fixed(n)).unwrap();
                assert!(
                    (exact - pred).abs() < 1e-9 * pred,
                    "rho={rho} n={n}: exact {exact} vs pred {pred}"
                );
            }
        }
    }

    #[test]
    fn supercritical_asymptote_error_decays_geometrically() {
        // Erlang-2 service keeps a genuine remainder; it must shrink
        // monotonically (to rounding) and respect the geometric envelope.
        let dist = ServiceDistribution::erlang(2, 1.0).unwrap();
        let lambda = 1.6;
        let root = phi_root(lambda, &dist).unwrap();
        let ratio = 2.0 * root.phi / (1.0 + root.phi);
        let mut prev_rel = f64::INFINITY;
        for n in 2..=30u32 {
            let exact = fixed_characteristics(n, lambda, &dist, 0.0).unwrap().e_r;
            let pred = er_asymptote(lambda, &dist, BufferLaw::Fixed(n)).unwrap();
            let rel = (exact - pred).abs() / pred;
            assert!(
                rel <= prev_rel + 1e-13,
                "n={n}: relative error {rel} grew past {prev_rel}"
            );
            if n >= 5 {
                assert!(
                    rel < 10.0 * ratio.powi(n as i32),
                    "n={n}: {rel} outside geometric envelope {}",
                    ratio.powi(n as i32)
                );
            }
            prev_rel = rel.max(1e-15);
        }
    }

    #[test]
    fn heavy_traffic_examples() {
        let ht = heavy_traffic(0.01, 1.0, 2.0, None).unwrap();
        assert!((ht.e_r - 1f64.exp()).abs() < 1e-12);
        assert!((ht.e_p - (1f64.exp() - 1.0) / 0.01).abs() < 1e-9);
        assert!((ht.phi_expansion - 0.99).abs() < 1e-15);
        assert!((ht.derivative_term_expansion - 0.01).abs() < 1e-15);

        // C -> 0 continuity: E R -> 1.
        let ht = heavy_traffic(0.01, 1e-12, 2.0, Some(40.0)).unwrap();
        assert_eq!(ht.e_r, 1.0);
        assert!((ht.e_p - 40.0).abs() < 1e-12);

        assert!(heavy_traffic(0.0, 1.0, 2.0, None).is_err());
        assert!(heavy_traffic(0.01, 0.0, 2.0, None).is_err());
    }

    #[test]
    fn phi_expansion_gap_is_second_order() {
        // M/M/1 at eps = 0.05: exact phi = 1/1.05 vs expansion 0.95.
        let lambda = 1.05;
        let root = phi_root(lambda, &mm1()).unwrap();
        assert!((root.phi - 1.0 / 1.05).abs() < 1e-12);
        let tm = mm1().traffic_moments(lambda, 2).unwrap();
        let expansion = 1.0 - 2.0 * 0.05 / tm.rho_j(2);
        let gap = (root.phi - expansion).abs();
        assert!(gap < 0.05 * 0.05, "gap {gap} not O(eps^2)");
    }

    #[test]
    fn expansion_ratio_stable_over_epsilon_grid() {
        // |phi_exact - (1 - 2 eps / rho2_tilde)| / eps^2 within a factor 2
        // across eps in {0.1, 0.05, 0.025, 0.0125}. rho2_tilde is the
        // critical-point limit of rho_2, which is 2 for M/M/1.
        let mut ratios = Vec::new();
        for &eps in &[0.1f64, 0.05, 0.025, 0.0125] {
            let lambda = 1.0 + eps;
            let root = phi_root(lambda, &mm1()).unwrap();
            let expansion = 1.0 - 2.0 * eps / 2.0;
            ratios.push((root.phi - expansion).abs() / (eps * eps));
        }
        let max = ratios.iter().fold(0.0f64, |a, &b| a.max(b));
        let min = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(
            max / min < 2.0,
            "ratio spread {ratios:?} exceeds a factor 2"
        );
    }

    #[test]
    fn classify_regime_basics() {
        let report = classify_regime(0.8, &mm1(), BufferLaw::Fixed(10), 0.05).unwrap();
        assert_eq!(report.regime, TrafficRegime::Subcritical);
        assert!(report.phi.is_none());

        let report = classify_regime(1.0, &mm1(), BufferLaw::Fixed(10), 0.0).unwrap();
        assert_eq!(report.regime, TrafficRegime::Critical);
        assert_eq!(report.d, 0.0);

        let report = classify_regime(1.3, &mm1(), BufferLaw::Fixed(10), 0.06).unwrap();
        assert_eq!(report.regime, TrafficRegime::Supercritical);
        assert!((report.epsilon - 0.3).abs() < 1e-12);
        assert!((report.c - 3.0).abs() < 1e-10);
        assert!((report.d - 0.2).abs() < 1e-10);
        assert!(report.phi.is_some());
        assert!(report.flags.rho2_finite && report.flags.rho3_finite);
    }

    #[test]
    fn classify_heavy_traffic_splits_on_c() {
        let report = classify_heavy_traffic(1.05, &mm1(), BufferLaw::Fixed(40), 0.0).unwrap();
        assert_eq!(report.regime, TrafficRegime::HeavyTrafficC);
        assert!(classify_heavy_traffic(0.9, &mm1(), BufferLaw::Fixed(40), 0.0).is_err());
    }

    #[test]
    fn loss_asymptote_subcritical_is_p() {
        let report = classify_regime(0.8, &mm1(), BufferLaw::Fixed(30), 0.05).unwrap();
        let pi = loss_asymptote(&report, 0.05, 0.8, &mm1(), BufferLaw::Fixed(30)).unwrap();
        assert_eq!(pi, 0.05);
    }

    #[test]
    fn loss_asymptote_critical_correction() {
        // rho = 1, p = 0, rho_2 = 2, E zeta = 50 -> 0.02; exact M/M/1 value
        // is 1/52, the gap being the higher-order remainder.
        let report = classify_regime(1.0, &mm1(), BufferLaw::Fixed(50), 0.0).unwrap();
        let pi = loss_asymptote(&report, 0.0, 1.0, &mm1(), BufferLaw::Fixed(50)).unwrap();
        assert!((pi - 0.02).abs() < 1e-15);
        let exact = loss_probability(&fixed_characteristics(50, 1.0, &mm1(), 0.0).unwrap());
        assert!((exact - 1.0 / 52.0).abs() < 1e-10);
        assert!((pi - exact).abs() < 2.0 / (50.0f64 * 50.0));
    }

    #[test]
    fn loss_asymptote_heavy_traffic_large_c_tends_to_eps() {
        // D = 0 and large C: the coefficient e^x/(e^x - 1) -> 1.
        let dist = mm1();
        let lambda = 1.01;
        let report = classify_heavy_traffic(lambda, &dist, BufferLaw::Fixed(2000), 0.0).unwrap();
        let pi = loss_asymptote(&report, 0.0, lambda, &dist, BufferLaw::Fixed(2000)).unwrap();
        assert!((pi - 0.01).abs() < 1e-6, "pi = {pi}");
    }

    #[test]
    fn loss_asymptote_rejects_inconsistent_triple() {
        let mut report =
            classify_heavy_traffic(1.05, &mm1(), BufferLaw::Fixed(40), 0.02).unwrap();
        report.d = 1.0; // claims p/eps = 1, but p = 0.02 and eps = 0.05
        assert!(matches!(
            loss_asymptote(&report, 0.02, 1.05, &mm1(), BufferLaw::Fixed(40)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn subcritical_exact_loss_converges_to_p() {
        for &p in &[0.0, 0.01, 0.1] {
            let mut prev_gap = f64::INFINITY;
            for k in [5u32, 10, 20, 40, 80] {
                let pi =
                    loss_probability(&fixed_characteristics(k, 0.8, &mm1(), p).unwrap());
                let gap = (pi - p).abs();
                assert!(gap <= prev_gap + 1e-14, "gap grew at K={k}");
                prev_gap = gap;
            }
            assert!(prev_gap < 1e-3, "p={p}: residual gap {prev_gap}");
        }
    }

    #[test]
    fn critical_leading_term_ratio_tends_to_one() {
        // (Pi_exact - p) * 2 E zeta / ((1-p) rho_2) -> 1 as N grows.
        let p = 0.01;
        let mut last_ratio = 0.0;
        for n in [50u32, 100, 200, 400] {
            let pi = loss_probability(&fixed_characteristics(n, 1.0, &mm1(), p).unwrap());
            last_ratio = (pi - p) * 2.0 * f64::from(n) / ((1.0 - p) * 2.0);
        }
        assert!((last_ratio - 1.0).abs() < 0.02, "ratio {last_ratio}");
    }

    #[test]
    fn capacity_increments_critical_mm1() {
        // dP = 2/rho_2 = 1 and the exact recurrence steps E P by exactly 1.
        let inc = fixed_capacity_increments(10, 1.0, &mm1(), 0.0).unwrap();
        assert!((inc.d_p - 1.0).abs() < 1e-12);
        let p10 = fixed_characteristics(10, 1.0, &mm1(), 0.0).unwrap().e_p;
        let p11 = fixed_characteristics(11, 1.0, &mm1(), 0.0).unwrap().e_p;
        assert!((p11 - p10 - 1.0).abs() < 1e-9);

        // displayed formula at n = 10, p = 0: -1/132.
        assert!(
            (inc.d_pi - (-1.0 / 132.0)).abs() < 1e-12,
            "d_pi = {}",
            inc.d_pi
        );
        // sign: any p < 1 gives a negative step for all n >= 1
        for n in 1..20u32 {
            let inc = fixed_capacity_increments(n, 1.0, &mm1(), 0.4).unwrap();
            assert!(inc.d_pi < 0.0);
        }
        // exact difference for comparison: 1/13 - 1/12, approached as o(1/n^2)
        let pi10 = loss_probability(&fixed_characteristics(10, 1.0, &mm1(), 0.0).unwrap());
        let pi11 = loss_probability(&fixed_characteristics(11, 1.0, &mm1(), 0.0).unwrap());
        let exact_step = pi11 - pi10;
        assert!((exact_step - (1.0 / 13.0 - 1.0 / 12.0)).abs() < 1e-12);
        assert!((inc.d_pi - exact_step).abs() < 0.2 * exact_step.abs());
    }

    #[test]
    fn capacity_increments_reject_off_critical() {
        assert!(matches!(
            fixed_capacity_increments(5, 1.2, &mm1(), 0.0),
            Err(Error::Regime(_))
        ));
    }
}
