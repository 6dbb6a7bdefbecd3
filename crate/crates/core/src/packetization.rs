//! Distribution of the random waiting-place count ζ(N) induced by packing
//! messages of a random packet count ν into an N-packet buffer:
//! `ζ = sup{m : ν₁ + ... + ν_m <= N}`.

use crate::error::{Error, Result};

/// Law of the packets-per-message count ν, given as explicit
/// `(value, probability)` pairs with `value >= 1` and positive weights
/// summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketLaw {
    values: Vec<u32>,
    probs: Vec<f64>,
}

impl PacketLaw {
    pub fn new(pairs: &[(u32, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Validation("packet law needs at least one atom".into()));
        }
        let mut sorted: Vec<(u32, f64)> = pairs.to_vec();
        sorted.sort_by_key(|&(v, _)| v);
        let mut total = 0.0;
        for window in sorted.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::Validation(format!(
                    "duplicate packet-count atom {}",
                    window[0].0
                )));
            }
        }
        for &(v, p) in &sorted {
            if v == 0 {
                return Err(Error::Validation("packet count must be >= 1".into()));
            }
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::Validation(format!(
                    "packet-count probability must be > 0, got {p} at value {v}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "packet-count probabilities must sum to 1 within 1e-12, got {total}"
            )));
        }
        let (values, probs) = sorted.into_iter().unzip();
        Ok(Self { values, probs })
    }

    /// Fixed packet count per message.
    pub fn deterministic(packets: u32) -> Result<Self> {
        Self::new(&[(packets, 1.0)])
    }

    pub fn atoms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn min_packets(&self) -> u32 {
        self.values[0]
    }

    pub fn max_packets(&self) -> u32 {
        *self.values.last().unwrap()
    }

    /// `P{ν > x}`.
    pub fn tail_gt(&self, x: u32) -> f64 {
        self.atoms()
            .filter(|&(v, _)| v > x)
            .map(|(_, p)| p)
            .sum()
    }

    /// The law of ν + k, used when k redundant packets join every message.
    pub fn shifted(&self, k: u32) -> Self {
        Self {
            values: self.values.iter().map(|&v| v + k).collect(),
            probs: self.probs.clone(),
        }
    }
}

/// Probability mass function of ζ(N), supported on
/// `floor(N/ν_upper) ..= floor(N/ν_lower)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaPmf {
    buffer_packets: u32,
    lower: u32,
    upper: u32,
    probs: Vec<f64>,
    mean: f64,
}

impl ZetaPmf {
    /// Point mass at `k` (the fixed-capacity special case).
    pub fn degenerate(k: u32) -> Self {
        Self {
            buffer_packets: k,
            lower: k,
            upper: k,
            probs: vec![1.0],
            mean: f64::from(k),
        }
    }

    pub fn buffer_packets(&self) -> u32 {
        self.buffer_packets
    }

    pub fn lower(&self) -> u32 {
        self.lower
    }

    pub fn upper(&self) -> u32 {
        self.upper
    }

    /// `P{ζ = k}` (zero outside the support).
    pub fn prob(&self, k: u32) -> f64 {
        if k < self.lower || k > self.upper {
            0.0
        } else {
            self.probs[(k - self.lower) as usize]
        }
    }

    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        (self.lower..=self.upper).map(move |k| (k, self.prob(k)))
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `E[φ^ζ] = Σ φ^k P{ζ = k}` for the supercritical asymptotics.
    pub fn expected_pow(&self, phi: f64) -> f64 {
        self.support()
            .map(|(k, p)| phi.powi(k as i32) * p)
            .sum()
    }

    /// Some(k) when the pmf is a point mass at k.
    pub fn as_degenerate(&self) -> Option<u32> {
        if self.lower == self.upper {
            Some(self.lower)
        } else {
            None
        }
    }
}

/// `(floor(N/ν_upper), floor(N/ν_lower))`, the fixed bounds of ζ(N).
pub fn zeta_bounds(nu: &PacketLaw, buffer_packets: u32) -> Result<(u32, u32)> {
    if buffer_packets < nu.min_packets() {
        return Err(Error::Validation(format!(
            "buffer of {buffer_packets} packets cannot hold a single message \
             (minimum message size {})",
            nu.min_packets()
        )));
    }
    Ok((
        buffer_packets / nu.max_packets(),
        buffer_packets / nu.min_packets(),
    ))
}

/// Exact pmf of ζ(N) by dynamic programming over partial-sum distributions:
/// `f_m(s) = P{ν₁+..+ν_m = s, s <= N}` and
/// `P{ζ = m} = Σ_s f_m(s) P{ν > N − s}`.
pub fn zeta_pmf(nu: &PacketLaw, buffer_packets: u32) -> Result<ZetaPmf> {
    let (lower, upper) = zeta_bounds(nu, buffer_packets)?;
    let n = buffer_packets as usize;
    // dense partial-sum distribution over 0..=N
    let mut partial = vec![0.0f64; n + 1];
    partial[0] = 1.0;
    let mut probs = vec![0.0f64; (upper - lower + 1) as usize];
    for m in 0..=upper {
        if m >= lower {
            let p_stop: f64 = partial
                .iter()
                .enumerate()
                .filter(|&(_, &f)| f > 0.0)
                .map(|(s, &f)| f * nu.tail_gt((n - s) as u32))
                .sum();
            probs[(m - lower) as usize] = p_stop;
        }
        if m == upper {
            break;
        }
        let mut next = vec![0.0f64; n + 1];
        for (s, &f) in partial.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            for (v, p) in nu.atoms() {
                let t = s + v as usize;
                if t <= n {
                    next[t] += f * p;
                }
            }
        }
        partial = next;
    }
    let total: f64 = probs.iter().sum();
    debug_assert!((total - 1.0).abs() < 1e-9, "zeta pmf mass {total}");
    // renormalize the accumulated rounding so downstream mixtures stay exact
    for p in &mut probs {
        *p /= total;
    }
    let mean = probs
        .iter()
        .enumerate()
        .map(|(i, p)| (lower as f64 + i as f64) * p)
        .sum();
    Ok(ZetaPmf {
        buffer_packets,
        lower,
        upper,
        probs,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: expand every ν-sequence until its partial sum
    /// exceeds N, accumulating the probability of each ζ value.
    pub(super) fn zeta_by_enumeration(nu: &PacketLaw, n: u32) -> Vec<f64> {
        let (lower, upper) = zeta_bounds(nu, n).unwrap();
        let mut out = vec![0.0f64; (upper - lower + 1) as usize];
        let mut stack = vec![(0u32, 0u32, 1.0f64)]; // (count, sum, prob)
        while let Some((count, sum, prob)) = stack.pop() {
            for (v, p) in nu.atoms() {
                let t = sum + v;
                if t > n {
                    out[(count - lower) as usize] += prob * p;
                } else {
                    stack.push((count + 1, t, prob * p));
                }
            }
        }
        out
    }

    #[test]
    fn uniform_two_atom_example() {
        // nu uniform on {1, 2}, N = 3: P{zeta=1} = 1/4, P{zeta=2} = 5/8,
        // P{zeta=3} = 1/8 (enumeration over all 2^3 sequences).
        let nu = PacketLaw::new(&[(1, 0.5), (2, 0.5)]).unwrap();
        let pmf = zeta_pmf(&nu, 3).unwrap();
        assert_eq!((pmf.lower(), pmf.upper()), (1, 3));
        assert!((pmf.prob(1) - 0.25).abs() < 1e-15);
        assert!((pmf.prob(2) - 0.625).abs() < 1e-15);
        assert!((pmf.prob(3) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn deterministic_packets_floor() {
        let nu = PacketLaw::deterministic(5).unwrap();
        let pmf = zeta_pmf(&nu, 12).unwrap();
        assert_eq!(pmf.as_degenerate(), Some(2));
        assert_eq!(pmf.prob(2), 1.0);
    }

    #[test]
    fn unit_packets_fill_buffer() {
        let nu = PacketLaw::deterministic(1).unwrap();
        let pmf = zeta_pmf(&nu, 7).unwrap();
        assert_eq!(pmf.as_degenerate(), Some(7));
    }

    #[test]
    fn bounds_examples() {
        let nu = PacketLaw::new(&[(1, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(zeta_bounds(&nu, 3).unwrap(), (1, 3));
        let nu = PacketLaw::deterministic(5).unwrap();
        assert_eq!(zeta_bounds(&nu, 12).unwrap(), (2, 2));
        let nu = PacketLaw::new(&[(2, 0.5), (4, 0.5)]).unwrap();
        assert_eq!(zeta_bounds(&nu, 8).unwrap(), (2, 4));
    }

    #[test]
    fn buffer_too_small_is_rejected() {
        let nu = PacketLaw::new(&[(3, 0.5), (4, 0.5)]).unwrap();
        assert!(matches!(zeta_pmf(&nu, 2), Err(Error::Validation(_))));
    }

    #[test]
    fn dp_matches_enumeration_small_cases() {
        let laws = [
            PacketLaw::new(&[(1, 0.5), (2, 0.5)]).unwrap(),
            PacketLaw::new(&[(1, 0.2), (3, 0.8)]).unwrap(),
            PacketLaw::new(&[(1, 0.3), (2, 0.3), (3, 0.4)]).unwrap(),
            PacketLaw::new(&[(2, 0.6), (3, 0.4)]).unwrap(),
        ];
        for nu in &laws {
            for n in nu.min_packets()..=12 {
                let pmf = zeta_pmf(nu, n).unwrap();
                let oracle = zeta_by_enumeration(nu, n);
                for (i, &expected) in oracle.iter().enumerate() {
                    let k = pmf.lower() + i as u32;
                    assert!(
                        (pmf.prob(k) - expected).abs() < 1e-12,
                        "N={n} zeta={k}: {} vs {expected}",
                        pmf.prob(k)
                    );
                }
            }
        }
    }

    #[test]
    fn mean_monotone_in_buffer_size() {
        let nu = PacketLaw::new(&[(1, 0.3), (2, 0.5), (3, 0.2)]).unwrap();
        let mut prev = 0.0;
        for n in 1..=25 {
            let pmf = zeta_pmf(&nu, n).unwrap();
            assert!(
                pmf.mean() >= prev - 1e-12,
                "mean decreased at N={n}: {} < {prev}",
                pmf.mean()
            );
            prev = pmf.mean();
        }
    }

    #[test]
    fn law_validation() {
        assert!(PacketLaw::new(&[]).is_err());
        assert!(PacketLaw::new(&[(0, 1.0)]).is_err());
        assert!(PacketLaw::new(&[(1, 0.5), (2, 0.4)]).is_err());
        assert!(PacketLaw::new(&[(1, 0.5), (1, 0.5)]).is_err());
        assert!(PacketLaw::new(&[(1, -0.5), (2, 1.5)]).is_err());
    }
}
