//! Exact busy-period characteristics for fixed capacity K and for the
//! ζ-mixture, plus the exact stationary loss probability.
//!
//! The expected busy period of the capacity-K system satisfies
//! `E T_K = Σ_{j=0}^{K} π_j E T_{K-j+1}` with `E T_0 = b`; the remaining
//! expectations follow from Wald-type identities:
//! `E P = (λ/ρ) E T`, `E M = p E P`, `E R = (ρ−1) E P + 1`.

use crate::error::{Error, Result};
use crate::packetization::ZetaPmf;
use crate::service::ServiceDistribution;
use crate::tauberian::{solve_q, KernelDistribution};

/// Tail tolerance used when the π kernel feeds the forward recurrence.
/// The solver divides by π_0 every step, so the kernel mass must be 1 to
/// near machine precision for the solution to stay accurate over hundreds
/// of steps.
pub const KERNEL_TAIL_TOL: f64 = 1e-15;

/// Expected busy-period characteristics: duration, processed, marked and
/// refused messages, for one busy cycle of the loss system.
#[derive(Debug, Clone, PartialEq)]
pub struct BusyPeriodCharacteristics {
    /// Expected busy period duration `E T`.
    pub e_t: f64,
    /// Expected processed (served) messages `E P`.
    pub e_p: f64,
    /// Expected marked messages `E M = p E P`.
    pub e_m: f64,
    /// Expected refused messages `E R = (ρ−1) E P + 1`.
    pub e_r: f64,
    /// Marking probability used for `E M`.
    pub p_mark: f64,
}

impl BusyPeriodCharacteristics {
    fn from_e_t(e_t: f64, b: f64, rho: f64, p_mark: f64) -> Self {
        // marking hides a message but it still occupies the server, so
        // E T and E P do not depend on p; E M is derived afterwards.
        let e_p = e_t / b;
        Self {
            e_t,
            e_p,
            e_m: p_mark * e_p,
            // a refusal count cannot be negative; deep in the subcritical
            // regime the identity lands within rounding error of zero
            e_r: ((rho - 1.0) * e_p + 1.0).max(0.0),
            p_mark,
        }
    }
}

fn check_inputs(lambda: f64, p_mark: f64) -> Result<()> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Domain(format!(
            "arrival rate must be > 0, got {lambda}"
        )));
    }
    if !(0.0..=1.0).contains(&p_mark) {
        return Err(Error::Domain(format!(
            "marking probability must lie in [0, 1], got {p_mark}"
        )));
    }
    Ok(())
}

/// Characteristics of the M/GI/1/K busy period (capacity K waiting places).
pub fn fixed_characteristics(
    capacity: u32,
    lambda: f64,
    dist: &ServiceDistribution,
    p_mark: f64,
) -> Result<BusyPeriodCharacteristics> {
    check_inputs(lambda, p_mark)?;
    let b = dist.mean();
    let rho = lambda * b;
    if capacity == 0 {
        return Ok(BusyPeriodCharacteristics::from_e_t(b, b, rho, p_mark));
    }
    let kernel = KernelDistribution::from_pi(&dist.pi_probs(lambda, KERNEL_TAIL_TOL)?)?;
    let sol = solve_q(&kernel, b, capacity as usize)?;
    Ok(BusyPeriodCharacteristics::from_e_t(
        sol.last(),
        b,
        rho,
        p_mark,
    ))
}

/// Characteristics mixed over the ζ law: each expectation is the
/// ζ-weighted average of the fixed-capacity value.
pub fn mixture_characteristics(
    zeta: &ZetaPmf,
    lambda: f64,
    dist: &ServiceDistribution,
    p_mark: f64,
) -> Result<BusyPeriodCharacteristics> {
    check_inputs(lambda, p_mark)?;
    let b = dist.mean();
    let rho = lambda * b;
    let e_t = if zeta.upper() == 0 {
        b
    } else {
        let kernel = KernelDistribution::from_pi(&dist.pi_probs(lambda, KERNEL_TAIL_TOL)?)?;
        let sol = solve_q(&kernel, b, zeta.upper() as usize)?;
        zeta.support()
            .map(|(k, prob)| prob * sol.values()[k as usize])
            .sum()
    };
    Ok(BusyPeriodCharacteristics::from_e_t(e_t, b, rho, p_mark))
}

/// Stationary loss probability by renewal reward:
/// `Π = (E R + p E P) / (E R + E P)`.
pub fn loss_probability(chars: &BusyPeriodCharacteristics) -> f64 {
    let lost = chars.e_r + chars.p_mark * chars.e_p;
    let pi = lost / (chars.e_r + chars.e_p);
    pi.clamp(0.0, 1.0)
}
