//! Service-time distributions and the transform/moment quantities the
//! analytic formulas consume.
//!
//! Five parametric families are supported, each with closed-form
//! Laplace–Stieltjes transform `β(s) = ∫ e^{−sx} dB(x)`, derivatives,
//! raw moments, and the Poisson-mixture probabilities
//! `π_i = ∫ e^{−λx} (λx)^i / i! dB(x)` that drive the busy-period
//! recurrence:
//!
//! | kind             | parameters            | π_i closed form          |
//! |------------------|-----------------------|--------------------------|
//! | deterministic    | value b               | Poisson(λb)              |
//! | exponential      | mean b                | geometric                |
//! | erlang           | shape k, mean b       | negative binomial        |
//! | hyperexponential | (weight, mean) pairs  | geometric mixture        |
//! | uniform          | bounds [lo, hi]       | incomplete-gamma terms   |

use crate::error::{Error, Result};
use statrs::function::gamma::gamma_lr;

/// Hard cap on the number of π_i terms before giving up on the tail.
pub const PI_INDEX_CAP: usize = 1_000_000;

/// A parametric service-time law with mean `b > 0`.
///
/// The degenerate point mass at zero is rejected: every transform identity
/// used downstream (in particular `β(λ) − λβ'(λ) < 1`) fails only in that
/// trivial case.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceDistribution {
    Deterministic { value: f64 },
    Exponential { mean: f64 },
    Erlang { shape: u32, mean: f64 },
    Hyperexponential { components: Vec<(f64, f64)> },
    Uniform { lo: f64, hi: f64 },
}

impl ServiceDistribution {
    pub fn deterministic(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::Validation(format!(
                "deterministic service requires value > 0, got {value}"
            )));
        }
        Ok(Self::Deterministic { value })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::Validation(format!(
                "exponential service requires mean > 0, got {mean}"
            )));
        }
        Ok(Self::Exponential { mean })
    }

    pub fn erlang(shape: u32, mean: f64) -> Result<Self> {
        if shape == 0 {
            return Err(Error::Validation("erlang shape must be >= 1".into()));
        }
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::Validation(format!(
                "erlang service requires mean > 0, got {mean}"
            )));
        }
        Ok(Self::Erlang { shape, mean })
    }

    /// Mixture of exponentials given as `(weight, mean)` pairs.
    /// Weights must be positive and sum to 1 within 1e-12.
    pub fn hyperexponential(components: &[(f64, f64)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Validation(
                "hyperexponential needs at least one component".into(),
            ));
        }
        let mut wsum = 0.0;
        for &(w, m) in components {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::Validation(format!(
                    "hyperexponential weight must be > 0, got {w}"
                )));
            }
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::Validation(format!(
                    "hyperexponential component mean must be > 0, got {m}"
                )));
            }
            wsum += w;
        }
        if (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "hyperexponential weights must sum to 1, got {wsum}"
            )));
        }
        Ok(Self::Hyperexponential {
            components: components.to_vec(),
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || lo >= hi {
            return Err(Error::Validation(format!(
                "uniform service requires 0 <= lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Deterministic { .. } => "deterministic",
            Self::Exponential { .. } => "exponential",
            Self::Erlang { .. } => "erlang",
            Self::Hyperexponential { .. } => "hyperexponential",
            Self::Uniform { .. } => "uniform",
        }
    }

    /// Mean service time `b`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Deterministic { value } => *value,
            Self::Exponential { mean } => *mean,
            Self::Erlang { mean, .. } => *mean,
            Self::Hyperexponential { components } => {
                components.iter().map(|&(w, m)| w * m).sum()
            }
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// Raw moment `E[X^j]`, `j >= 0`.
    pub fn raw_moment(&self, j: u32) -> f64 {
        match self {
            Self::Deterministic { value } => value.powi(j as i32),
            Self::Exponential { mean } => factorial(j) * mean.powi(j as i32),
            Self::Erlang { shape, mean } => {
                // E[X^j] = k(k+1)...(k+j-1) / theta^j, theta = k / b
                let theta = f64::from(*shape) / mean;
                let mut acc = 1.0;
                for i in 0..j {
                    acc *= f64::from(*shape) + f64::from(i);
                }
                acc / theta.powi(j as i32)
            }
            Self::Hyperexponential { components } => components
                .iter()
                .map(|&(w, m)| w * factorial(j) * m.powi(j as i32))
                .sum(),
            Self::Uniform { lo, hi } => {
                let jp = j as i32 + 1;
                (hi.powi(jp) - lo.powi(jp)) / (f64::from(j + 1) * (hi - lo))
            }
        }
    }

    /// Rescales the distribution so the mean becomes `factor * b`,
    /// preserving the shape (used when redundant packets stretch
    /// transmission effort).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(Error::Validation(format!(
                "scale factor must be > 0, got {factor}"
            )));
        }
        Ok(match self {
            Self::Deterministic { value } => Self::Deterministic {
                value: value * factor,
            },
            Self::Exponential { mean } => Self::Exponential {
                mean: mean * factor,
            },
            Self::Erlang { shape, mean } => Self::Erlang {
                shape: *shape,
                mean: mean * factor,
            },
            Self::Hyperexponential { components } => Self::Hyperexponential {
                components: components.iter().map(|&(w, m)| (w, m * factor)).collect(),
            },
            Self::Uniform { lo, hi } => Self::Uniform {
                lo: lo * factor,
                hi: hi * factor,
            },
        })
    }

    /// Laplace–Stieltjes transform `β(s)`, exact at `s = 0` where it is 1.
    pub fn lst(&self, s: f64) -> Result<f64> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Domain(format!("lst requires s >= 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok(match self {
            Self::Deterministic { value } => (-s * value).exp(),
            Self::Exponential { mean } => 1.0 / (1.0 + mean * s),
            Self::Erlang { shape, mean } => {
                let theta = f64::from(*shape) / mean;
                (theta / (theta + s)).powi(*shape as i32)
            }
            Self::Hyperexponential { components } => components
                .iter()
                .map(|&(w, m)| w / (1.0 + m * s))
                .sum(),
            Self::Uniform { lo, hi } => {
                // (e^{-s lo} - e^{-s hi}) / (s (hi - lo)), written through
                // expm1 so the s -> 0 cancellation is avoided.
                let width = hi - lo;
                (-s * lo).exp() * (-f64::exp_m1(-s * width)) / (s * width)
            }
        })
    }

    /// `order`-th derivative `β^{(order)}(s) = (−1)^order E[X^order e^{−sX}]`.
    ///
    /// Uniform is limited to orders 1..=3; higher derivatives have no
    /// numeric fallback and return an error.
    pub fn lst_deriv(&self, s: f64, order: u32) -> Result<f64> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Domain(format!(
                "lst_deriv requires s >= 0, got {s}"
            )));
        }
        if order == 0 {
            return self.lst(s);
        }
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(match self {
            Self::Deterministic { value } => {
                sign * value.powi(order as i32) * (-s * value).exp()
            }
            Self::Exponential { mean } => {
                sign * factorial(order) * mean.powi(order as i32)
                    / (1.0 + mean * s).powi(order as i32 + 1)
            }
            Self::Erlang { shape, mean } => {
                // beta(s) = theta^k (theta + s)^{-k}; successive derivatives
                // pick up the rising factorial k (k+1) ... (k+m-1).
                let theta = f64::from(*shape) / mean;
                let k = f64::from(*shape);
                let mut rising = 1.0;
                for i in 0..order {
                    rising *= k + f64::from(i);
                }
                sign * rising * theta.powi(*shape as i32)
                    / (theta + s).powi((*shape + order) as i32)
            }
            Self::Hyperexponential { components } => {
                sign * factorial(order)
                    * components
                        .iter()
                        .map(|&(w, m)| {
                            w * m.powi(order as i32) / (1.0 + m * s).powi(order as i32 + 1)
                        })
                        .sum::<f64>()
            }
            Self::Uniform { lo, hi } => {
                if order > 3 {
                    return Err(Error::Unsupported(format!(
                        "uniform service lst derivative of order {order} \
                         (closed forms implemented up to order 3)"
                    )));
                }
                sign * uniform_weighted_moment(*lo, *hi, s, order)
            }
        })
    }

    /// Traffic moments `ρ_j = λ^j E[X^j]` for `j = 1..=j_max`.
    pub fn traffic_moments(&self, lambda: f64, j_max: u32) -> Result<TrafficMoments> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Domain(format!(
                "arrival rate must be > 0, got {lambda}"
            )));
        }
        if j_max < 2 {
            return Err(Error::Domain(format!("j_max must be >= 2, got {j_max}")));
        }
        let rho_j: Vec<f64> = (1..=j_max)
            .map(|j| lambda.powi(j as i32) * self.raw_moment(j))
            .collect();
        Ok(TrafficMoments {
            lambda,
            rho: rho_j[0],
            rho_j,
        })
    }

    /// Probabilities `π_i` of `i` Poisson(λ) arrivals during one service,
    /// truncated once the residual mass drops to `tail_tol`.
    pub fn pi_probs(&self, lambda: f64, tail_tol: f64) -> Result<PiVector> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Domain(format!(
                "arrival rate must be > 0, got {lambda}"
            )));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::Domain(format!(
                "tail_tol must lie in (0, 1), got {tail_tol}"
            )));
        }
        let mut probs = Vec::new();
        let mut acc = 0.0_f64;
        let mut state = PiState::new(self, lambda);
        for i in 0..=PI_INDEX_CAP {
            let p = state.next_term(self, lambda, i);
            probs.push(p);
            acc += p;
            if 1.0 - acc <= tail_tol {
                return Ok(PiVector {
                    probs,
                    tail_mass: (1.0 - acc).max(0.0),
                });
            }
        }
        Err(Error::Truncation(format!(
            "pi tail still {:.3e} after {PI_INDEX_CAP} terms (tolerance {tail_tol:.3e})",
            1.0 - acc
        )))
    }
}

/// Incremental evaluation state for the π_i sequence of one distribution.
enum PiState {
    /// Poisson pmf recurrence: value of the previous term.
    Poisson { term: f64 },
    /// Negative binomial / geometric mixture: one running term per component
    /// (weight already folded in).
    Mixture { terms: Vec<f64>, ratios: Vec<f64>, shapes: Vec<f64> },
    /// Uniform service: evaluated per index from incomplete-gamma terms.
    Gamma,
}

impl PiState {
    fn new(dist: &ServiceDistribution, lambda: f64) -> Self {
        match dist {
            ServiceDistribution::Deterministic { value } => PiState::Poisson {
                term: (-lambda * value).exp(),
            },
            ServiceDistribution::Exponential { mean } => {
                let rho = lambda * mean;
                PiState::Mixture {
                    terms: vec![1.0 / (1.0 + rho)],
                    ratios: vec![rho / (1.0 + rho)],
                    shapes: vec![1.0],
                }
            }
            ServiceDistribution::Erlang { shape, mean } => {
                let theta = f64::from(*shape) / mean;
                PiState::Mixture {
                    terms: vec![(theta / (lambda + theta)).powi(*shape as i32)],
                    ratios: vec![lambda / (lambda + theta)],
                    shapes: vec![f64::from(*shape)],
                }
            }
            ServiceDistribution::Hyperexponential { components } => {
                let mut terms = Vec::with_capacity(components.len());
                let mut ratios = Vec::with_capacity(components.len());
                for &(w, m) in components {
                    let rho = lambda * m;
                    terms.push(w / (1.0 + rho));
                    ratios.push(rho / (1.0 + rho));
                }
                PiState::Mixture {
                    terms,
                    ratios,
                    shapes: vec![1.0; components.len()],
                }
            }
            ServiceDistribution::Uniform { .. } => PiState::Gamma,
        }
    }

    fn next_term(&mut self, dist: &ServiceDistribution, lambda: f64, i: usize) -> f64 {
        match self {
            PiState::Poisson { term } => {
                let out = *term;
                let rate = match dist {
                    ServiceDistribution::Deterministic { value } => lambda * value,
                    _ => unreachable!(),
                };
                *term *= rate / (i as f64 + 1.0);
                out
            }
            PiState::Mixture { terms, ratios, shapes } => {
                let out = terms.iter().sum();
                for ((t, &r), &k) in terms.iter_mut().zip(ratios.iter()).zip(shapes.iter()) {
                    // negative binomial step: C(i+k, i+1) = C(i+k-1, i) * (i+k)/(i+1)
                    *t *= r * (i as f64 + k) / (i as f64 + 1.0);
                }
                out
            }
            PiState::Gamma => match dist {
                ServiceDistribution::Uniform { lo, hi } => {
                    // pi_i = [P(i+1, lambda hi) - P(i+1, lambda lo)] / (lambda (hi - lo))
                    let a = (i + 1) as f64;
                    let upper = gamma_lr(a, lambda * hi);
                    let lower = if *lo > 0.0 { gamma_lr(a, lambda * lo) } else { 0.0 };
                    ((upper - lower) / (lambda * (hi - lo))).max(0.0)
                }
                _ => unreachable!(),
            },
        }
    }
}

/// `∫_lo^hi x^m e^{−sx} dx / (hi − lo)`, i.e. `E[X^m e^{−sX}]` for the
/// uniform law. Integration by parts for moderate `s`, power series for
/// small `s` where the parts formula cancels catastrophically.
fn uniform_weighted_moment(lo: f64, hi: f64, s: f64, m: u32) -> f64 {
    let width = hi - lo;
    if s * hi <= 0.5 {
        // sum_j (-s)^j / j! * E[X^{m+j}]
        let mut sum = 0.0;
        let mut coeff = 1.0; // (-s)^j / j!
        for j in 0..200u32 {
            let mj = m + j;
            let raw = (hi.powi(mj as i32 + 1) - lo.powi(mj as i32 + 1))
                / (f64::from(mj + 1) * width);
            let term = coeff * raw;
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
            coeff *= -s / f64::from(j + 1);
        }
        sum
    } else {
        // antiderivative -e^{-sx} sum_{j=0}^m m!/(m-j)! x^{m-j} / s^{j+1}
        let eval = |x: f64| -> f64 {
            let mut inner = 0.0;
            let mut fall = 1.0; // m! / (m-j)!
            for j in 0..=m {
                inner += fall * x.powi((m - j) as i32) / s.powi(j as i32 + 1);
                if j < m {
                    fall *= f64::from(m - j);
                }
            }
            -(-s * x).exp() * inner
        };
        (eval(hi) - eval(lo)) / width
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * f64::from(i))
}

/// Offered-load moments `ρ_j = λ^j E[X^j]`; `rho == rho_j(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMoments {
    pub lambda: f64,
    pub rho: f64,
    rho_j: Vec<f64>,
}

impl TrafficMoments {
    /// `ρ_j` for `1 <= j <= j_max`.
    pub fn rho_j(&self, j: u32) -> f64 {
        self.rho_j[(j - 1) as usize]
    }

    pub fn j_max(&self) -> u32 {
        self.rho_j.len() as u32
    }
}

/// Truncated vector of π_i with the residual mass kept explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct PiVector {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl PiVector {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// First factorial moment `Σ i π_i` of the truncated vector.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }

    /// Second factorial moment `Σ i (i−1) π_i` of the truncated vector.
    pub fn factorial_moment_2(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i * i.saturating_sub(1)) as f64 * p)
            .sum()
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_dist() -> impl Strategy<Value = ServiceDistribution> {
        prop_oneof![
            (0.05f64..5.0).prop_map(|b| ServiceDistribution::deterministic(b).unwrap()),
            (0.05f64..5.0).prop_map(|b| ServiceDistribution::exponential(b).unwrap()),
            ((1u32..6), (0.05f64..5.0))
                .prop_map(|(k, b)| ServiceDistribution::erlang(k, b).unwrap()),
            ((0.05f64..0.95), (0.05f64..3.0), (0.05f64..3.0)).prop_map(|(w, m1, m2)| {
                ServiceDistribution::hyperexponential(&[(w, m1), (1.0 - w, m2)]).unwrap()
            }),
            ((0.0f64..2.0), (0.05f64..3.0))
                .prop_map(|(lo, width)| ServiceDistribution::uniform(lo, lo + width).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn lst_in_unit_interval(dist in arb_dist(), s in 0.0f64..20.0) {
            let beta = dist.lst(s).unwrap();
            prop_assert!(beta > 0.0 && beta <= 1.0);
        }

        #[test]
        fn lst_nonincreasing_in_s(dist in arb_dist(), s in 0.0f64..10.0, ds in 0.01f64..5.0) {
            let a = dist.lst(s).unwrap();
            let b = dist.lst(s + ds).unwrap();
            prop_assert!(b <= a + 1e-15);
        }

        #[test]
        fn pi_sums_to_one(dist in arb_dist(), lambda in 0.05f64..4.0) {
            let pi = dist.pi_probs(lambda, 1e-12).unwrap();
            let total: f64 = pi.probs().iter().sum::<f64>() + pi.tail_mass();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(pi.tail_mass() <= 1e-12);
        }

        #[test]
        fn first_derivative_negative(dist in arb_dist(), s in 0.0f64..8.0) {
            prop_assert!(dist.lst_deriv(s, 1).unwrap() < 0.0);
        }
    }
}
