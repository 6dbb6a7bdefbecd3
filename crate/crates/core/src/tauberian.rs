//! Forward solver and asymptotic predictor for the renewal-type recurrence
//!
//! ```text
//! Q_k = sum_{i=0}^{k} r_i Q_{k-i+1},    r_0 > 0,  sum r_i = 1,
//! ```
//!
//! which underlies every busy-period quantity. The generating function is
//! `Q(z) = Q_0 r(z) / (r(z) - z)`, and the limit behavior splits on the
//! kernel mean `γ₁ = r'(1)`:
//!
//! * `γ₁ < 1`: `Q_k → Q₀ / (1 − γ₁)`
//! * `γ₁ = 1`: `Q_k ~ 2Q₀k / γ₂`, increments `→ 2Q₀/γ₂` when `r₀+r₁ < 1`
//! * `γ₁ > 1`: `Q_k − Q₀/(δ^k (1 − r'(δ))) → Q₀/(1 − γ₁)` with `δ` the
//!   least root of `r(z) = z` in `(0, 1)`
//!
//! References: Takács (1967), *Combinatorial Methods in the Theory of
//! Stochastic Processes*, ch. 1; Postnikov (1980), *Tauberian Theory and
//! Its Applications*, §25 for the critical-regime remainder and increment.

use crate::error::{Error, Result};
use crate::service::PiVector;

/// Kernels with `γ₁` within this distance of 1 are treated as critical,
/// matching the numerical resolution of the moment sums.
pub const CRITICAL_TOL: f64 = 1e-9;

/// Forward solves abort once values leave the comfortably representable
/// range; supercritical growth past this point should use
/// [`solve_q_damped`] on the normalized scale `Q_k δ^k` instead.
pub const OVERFLOW_GUARD: f64 = 1e300;

const MIN_R0: f64 = 1e-14;

/// Nonnegative kernel `r_0..r_imax` with its residual tail kept explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDistribution {
    r: Vec<f64>,
    tail_mass: f64,
}

impl KernelDistribution {
    pub fn new(r: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if r.is_empty() || r[0] <= 0.0 {
            return Err(Error::Validation("kernel requires r_0 > 0".into()));
        }
        if r.iter().any(|&x| !x.is_finite() || x < 0.0) || tail_mass < 0.0 {
            return Err(Error::Validation("kernel terms must be nonnegative".into()));
        }
        let total: f64 = r.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "kernel mass must be 1 within 1e-12, got {total}"
            )));
        }
        Ok(Self { r, tail_mass })
    }

    /// Exact finite kernel (tail mass zero).
    pub fn exact(r: Vec<f64>) -> Result<Self> {
        Self::new(r, 0.0)
    }

    /// The π vector of a service distribution, reused as recurrence kernel.
    pub fn from_pi(pi: &PiVector) -> Result<Self> {
        Self::new(pi.probs().to_vec(), pi.tail_mass())
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `r(z) = Σ r_i z^i` evaluated by Horner's rule.
    pub fn gen_fn(&self, z: f64) -> f64 {
        self.r.iter().rev().fold(0.0, |acc, &ri| acc * z + ri)
    }

    /// `r'(z) = Σ i r_i z^{i−1}`.
    pub fn gen_fn_deriv(&self, z: f64) -> f64 {
        self.r
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, &ri)| acc * z + i as f64 * ri)
    }
}

/// Factorial moments `γ_m = r^{(m)}(1−0)` of the kernel. The truncated tail
/// contributes an unknown amount; its mass is carried along so callers can
/// judge how much to trust γ₂ and γ₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMoments {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub tail_mass: f64,
}

/// Asymptotic classification of a kernel by γ₁.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelRegime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Prediction for `Q_k` from the Tauberian limit theorems.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub regime: KernelRegime,
    /// Predicted value of `Q_k` (the limit itself when subcritical).
    pub value: f64,
    /// Predicted increment `Q_{k+1} − Q_k`, available in the critical
    /// regime when `r₀ + r₁ < 1`.
    pub increment: Option<f64>,
    /// Critical regime only: the `O(log k)` remainder of the linear-growth
    /// law applies because γ₃ is finite.
    pub log_remainder: bool,
}

/// Solution vector `Q_0..Q_kmax` of the forward recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceSolution {
    q: Vec<f64>,
}

impl RecurrenceSolution {
    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn last(&self) -> f64 {
        *self.q.last().expect("solution never empty")
    }
}

/// Solves the recurrence forward from `Q_0 = q0`, returning `Q_0..Q_kmax`.
///
/// Kernel terms beyond the stored length act as zero; the tail mass is the
/// caller's responsibility to keep small.
pub fn solve_q(kernel: &KernelDistribution, q0: f64, k_max: usize) -> Result<RecurrenceSolution> {
    if q0 <= 0.0 || !q0.is_finite() {
        return Err(Error::Domain(format!("seed Q_0 must be > 0, got {q0}")));
    }
    if k_max < 1 {
        return Err(Error::Domain("k_max must be >= 1".into()));
    }
    solve_scaled(kernel, q0, 1.0, k_max)
}

/// Solves on the normalized scale `S_k = Q_k δ^k` for a damping factor
/// `δ ∈ (0, 1]`. With δ the least root of `r(z) = z` the values stay
/// bounded in the supercritical regime where the raw `Q_k` grow
/// geometrically.
pub fn solve_q_damped(
    kernel: &KernelDistribution,
    q0: f64,
    damp: f64,
    k_max: usize,
) -> Result<RecurrenceSolution> {
    if q0 <= 0.0 || !q0.is_finite() {
        return Err(Error::Domain(format!("seed Q_0 must be > 0, got {q0}")));
    }
    if !(damp > 0.0 && damp <= 1.0) {
        return Err(Error::Domain(format!(
            "damping factor must lie in (0, 1], got {damp}"
        )));
    }
    solve_scaled(kernel, q0, damp, k_max)
}

/// Shared core: with `S_k = Q_k δ^k` the recurrence becomes
/// `δ S_k = Σ_i (r_i δ^i) S_{k+1-i}`, solved for `S_{k+1}`.
fn solve_scaled(
    kernel: &KernelDistribution,
    q0: f64,
    damp: f64,
    k_max: usize,
) -> Result<RecurrenceSolution> {
    let r = kernel.r();
    if r[0] < MIN_R0 {
        return Err(Error::IllConditioned(format!(
            "r_0 = {:.3e} below {MIN_R0:.0e}; forward solve would amplify noise",
            r[0]
        )));
    }
    // scaled kernel coefficients r_i damp^i
    let rs: Vec<f64> = r
        .iter()
        .enumerate()
        .map(|(i, &ri)| ri * damp.powi(i as i32))
        .collect();
    let mut q = Vec::with_capacity(k_max + 1);
    q.push(q0);
    for k in 0..k_max {
        let mut acc = damp * q[k];
        for i in 1..=k.min(rs.len() - 1) {
            acc -= rs[i] * q[k + 1 - i];
        }
        let next = acc / rs[0];
        if !next.is_finite() || next.abs() > OVERFLOW_GUARD {
            return Err(Error::IllConditioned(format!(
                "Q_{} left the representable range ({next:.3e}); \
                 solve on the normalized scale via solve_q_damped",
                k + 1
            )));
        }
        q.push(next);
    }
    Ok(RecurrenceSolution { q })
}

/// Factorial moments of the kernel: `γ₁ = Σ i r_i`, `γ₂ = Σ i(i−1) r_i`,
/// `γ₃ = Σ i(i−1)(i−2) r_i`.
pub fn gamma_moments(kernel: &KernelDistribution) -> GammaMoments {
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    let mut g3 = 0.0;
    for (i, &ri) in kernel.r().iter().enumerate() {
        let x = i as f64;
        g1 += x * ri;
        g2 += x * (x - 1.0) * ri;
        g3 += x * (x - 1.0) * (x - 2.0) * ri;
    }
    GammaMoments {
        gamma1: g1,
        gamma2: g2,
        gamma3: g3,
        tail_mass: kernel.tail_mass(),
    }
}

/// Least root `δ ∈ (0, 1)` of `r(z) = z`, which exists iff `γ₁ > 1`.
/// Bracketed bisection to 1e-13 followed by one Newton polish.
pub fn least_root(kernel: &KernelDistribution) -> Result<f64> {
    let gm = gamma_moments(kernel);
    if gm.gamma1 <= 1.0 + CRITICAL_TOL {
        return Err(Error::Regime(format!(
            "least root in (0,1) requires gamma_1 > 1, got {}",
            gm.gamma1
        )));
    }
    let g = |z: f64| kernel.gen_fn(z) - z;
    // g(0) = r_0 > 0, g(1-) < 0 near 1 since g(1) ~ 0 with slope gamma_1 - 1.
    let lo = 0.0;
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
            "no sign change of r(z) - z found on (0, 1)".into(),
        ));
    }
    let root = bisect_then_newton(&g, &|z| kernel.gen_fn_deriv(z) - 1.0, lo, hi, 1e-13);
    Ok(root)
}

/// Bisection to `tol` then a single Newton step, clamped back into the
/// bracket if Newton overshoots.
pub(crate) fn bisect_then_newton(
    g: &dyn Fn(f64) -> f64,
    g_prime: &dyn Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    // invariant: g(lo) > 0 >= g(hi)
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    let d = g_prime(z);
    if d != 0.0 {
        let polished = z - g(z) / d;
        if polished > lo - tol && polished < hi + tol {
            return polished;
        }
    }
    z
}

/// Predicted `Q_k` (plus increment where available) from the limit
/// theorems in the module docs. The critical tie-break is `|γ₁ − 1| < 1e-9`.
pub fn predict(kernel: &KernelDistribution, q0: f64, k: usize) -> Result<Prediction> {
    if q0 <= 0.0 || !q0.is_finite() {
        return Err(Error::Domain(format!("seed Q_0 must be > 0, got {q0}")));
    }
    let gm = gamma_moments(kernel);
    if (gm.gamma1 - 1.0).abs() < CRITICAL_TOL {
        if gm.gamma2 <= 0.0 {
            return Err(Error::Regime(
                "critical kernel with gamma_2 = 0 is degenerate (identity kernel)".into(),
            ));
        }
        let r = kernel.r();
        let r01 = r[0] + r.get(1).copied().unwrap_or(0.0);
        let increment = if r01 < 1.0 - 1e-12 {
            Some(2.0 * q0 / gm.gamma2)
        } else {
            None
        };
        Ok(Prediction {
            regime: KernelRegime::Critical,
            value: 2.0 * q0 * k as f64 / gm.gamma2,
            increment,
            log_remainder: gm.gamma3.is_finite(),
        })
    } else if gm.gamma1 < 1.0 {
        Ok(Prediction {
            regime: KernelRegime::Subcritical,
            value: q0 / (1.0 - gm.gamma1),
            increment: None,
            log_remainder: false,
        })
    } else {
        let delta = least_root(kernel)?;
        let slope = kernel.gen_fn_deriv(delta);
        let value = q0 / (delta.powi(k as i32) * (1.0 - slope)) + q0 / (1.0 - gm.gamma1);
        Ok(Prediction {
            regime: KernelRegime::Supercritical,
            value,
            increment: None,
            log_remainder: false,
        })
    }
}
