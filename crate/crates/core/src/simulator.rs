//! Regenerative Monte Carlo simulation of the loss system, the independent
//! check on every analytic expectation.
//!
//! One busy cycle is simulated event by event: idle until a Poisson(λ)
//! arrival opens the busy period, each arrival draws its waiting-place
//! count ζ_i (per arrival or once per replication), joins iff the current
//! message count does not exceed ζ_i, is marked lost with probability p but
//! served anyway, and the cycle closes when the system empties. Estimates
//! are cycle averages; the loss probability is the renewal-reward ratio
//! `(R̂ + M̂)/Â` with a batch-means delta-method standard error.
//!
//! Reproducibility: every replication owns four disjoint ChaCha8 streams
//! (interarrivals, services, ζ draws, marking) keyed by `(seed,
//! replication, role)`, and aggregation folds replications in index order,
//! so equal seeds give bitwise-identical output whether the replications
//! ran in parallel or not.

use crate::busy_period::{loss_probability, BusyPeriodCharacteristics};
use crate::error::{Error, Result};
use crate::packetization::{zeta_pmf, PacketLaw, ZetaPmf};
use crate::service::ServiceDistribution;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Events allowed in one busy cycle before the run is declared runaway.
pub const EVENT_CAP: u64 = 1_000_000_000;

/// Batches per replication for the ratio-estimator standard error.
const BATCHES: u64 = 32;

/// How ζ_i is attached to arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZetaMode {
    /// Fresh ζ per arrival (iid member of the equivalence class).
    IidPerArrival,
    /// One ζ drawn at replication start and shared by every arrival.
    FixedPerRun,
}

impl ZetaMode {
    pub fn name(self) -> &'static str {
        match self {
            ZetaMode::IidPerArrival => "iid_per_arrival",
            ZetaMode::FixedPerRun => "fixed_per_run",
        }
    }
}

/// Full description of one simulation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub lambda: f64,
    pub dist: ServiceDistribution,
    pub nu: PacketLaw,
    pub buffer_packets: u32,
    pub p_mark: f64,
    pub zeta_mode: ZetaMode,
    pub n_busy_periods: u64,
    pub replications: u32,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::Validation(format!(
                "arrival rate must be > 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.p_mark) {
            return Err(Error::Validation(format!(
                "marking probability must lie in [0, 1], got {}",
                self.p_mark
            )));
        }
        if self.n_busy_periods == 0 {
            return Err(Error::Validation("n_busy_periods must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Validation("replications must be >= 1".into()));
        }
        Ok(())
    }
}

/// Point estimates with standard errors for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationEstimate {
    pub replication: u32,
    pub n_cycles: u64,
    pub e_t: f64,
    pub e_p: f64,
    pub e_m: f64,
    pub e_r: f64,
    pub pi_hat: f64,
    pub se_t: f64,
    pub se_p: f64,
    pub se_m: f64,
    pub se_r: f64,
    pub se_pi: f64,
}

/// Pooled estimates over all replications, with the exact event totals
/// retained (arrivals equal served plus refused on every path).
#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub e_t: f64,
    pub e_p: f64,
    pub e_m: f64,
    pub e_r: f64,
    pub pi_hat: f64,
    pub se_t: f64,
    pub se_p: f64,
    pub se_m: f64,
    pub se_r: f64,
    pub se_pi: f64,
    pub n_cycles: u64,
    pub total_arrivals: u64,
    pub total_served: u64,
    pub total_refused: u64,
    pub total_marked: u64,
    pub per_replication: Vec<ReplicationEstimate>,
}

/// Per-replication accumulator; merging is associative and performed in
/// replication order so the result does not depend on scheduling.
#[derive(Debug, Clone)]
struct CycleSums {
    n: u64,
    st: f64,
    st2: f64,
    sp: f64,
    sp2: f64,
    sm: f64,
    sm2: f64,
    sr: f64,
    sr2: f64,
    arrivals: u64,
    served: u64,
    refused: u64,
    marked: u64,
    /// (lost, arrivals) sums per batch for the ratio-estimator SE.
    batches: Vec<(f64, f64)>,
}

impl CycleSums {
    fn new() -> Self {
        Self {
            n: 0,
            st: 0.0,
            st2: 0.0,
            sp: 0.0,
            sp2: 0.0,
            sm: 0.0,
            sm2: 0.0,
            sr: 0.0,
            sr2: 0.0,
            arrivals: 0,
            served: 0,
            refused: 0,
            marked: 0,
            batches: Vec::new(),
        }
    }

    fn merge(&mut self, other: &CycleSums) {
        self.n += other.n;
        self.st += other.st;
        self.st2 += other.st2;
        self.sp += other.sp;
        self.sp2 += other.sp2;
        self.sm += other.sm;
        self.sm2 += other.sm2;
        self.sr += other.sr;
        self.sr2 += other.sr2;
        self.arrivals += other.arrivals;
        self.served += other.served;
        self.refused += other.refused;
        self.marked += other.marked;
        self.batches.extend_from_slice(&other.batches);
    }

    fn mean_se(&self, sum: f64, sum2: f64) -> (f64, f64) {
        let n = self.n as f64;
        let mean = sum / n;
        if self.n < 2 {
            return (mean, 0.0);
        }
        let var = ((sum2 - sum * sum / n) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }

    /// Renewal-reward ratio (R + M)/A with batch-means delta-method SE.
    fn ratio_estimate(&self) -> (f64, f64) {
        let lost = (self.refused + self.marked) as f64;
        let arr = self.arrivals as f64;
        let pi = lost / arr;
        if self.batches.len() < 2 {
            return (pi, 0.0);
        }
        let nb = self.batches.len() as f64;
        let ss: f64 = self
            .batches
            .iter()
            .map(|&(l, a)| {
                let z = l - pi * a;
                z * z
            })
            .sum();
        (pi, (nb / (nb - 1.0) * ss).sqrt() / arr)
    }

    fn estimate(&self, replication: u32) -> ReplicationEstimate {
        let (e_t, se_t) = self.mean_se(self.st, self.st2);
        let (e_p, se_p) = self.mean_se(self.sp, self.sp2);
        let (e_m, se_m) = self.mean_se(self.sm, self.sm2);
        let (e_r, se_r) = self.mean_se(self.sr, self.sr2);
        let (pi_hat, se_pi) = self.ratio_estimate();
        ReplicationEstimate {
            replication,
            n_cycles: self.n,
            e_t,
            e_p,
            e_m,
            e_r,
            pi_hat,
            se_t,
            se_p,
            se_m,
            se_r,
            se_pi,
        }
    }
}

/// Draws from one ChaCha8 substream; 53-bit uniforms in [0, 1).
struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    fn new(seed: u64, replication: u32, role: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(replication) * 4 + role);
        Self { rng }
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Inverse-CDF exponential; `uniform() == 0` maps to 0.
    #[inline]
    fn exponential(&mut self, mean: f64) -> f64 {
        -mean * (1.0 - self.uniform()).ln()
    }
}

/// Inverse-CDF service draw for each supported kind.
fn draw_service(dist: &ServiceDistribution, stream: &mut Stream) -> f64 {
    match dist {
        ServiceDistribution::Deterministic { value } => *value,
        ServiceDistribution::Exponential { mean } => stream.exponential(*mean),
        ServiceDistribution::Erlang { shape, mean } => {
            let stage = mean / f64::from(*shape);
            (0..*shape).map(|_| stream.exponential(stage)).sum()
        }
        ServiceDistribution::Hyperexponential { components } => {
            let u = stream.uniform();
            let mut acc = 0.0;
            for &(w, m) in components {
                acc += w;
                if u < acc {
                    return stream.exponential(m);
                }
            }
            stream.exponential(components.last().unwrap().1)
        }
        ServiceDistribution::Uniform { lo, hi } => lo + stream.uniform() * (hi - lo),
    }
}

/// Inverse-CDF draw from the ζ pmf.
fn draw_zeta(zeta: &ZetaPmf, stream: &mut Stream) -> u32 {
    let u = stream.uniform();
    let mut acc = 0.0;
    for (k, p) in zeta.support() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    zeta.upper()
}

struct Cycle {
    duration: f64,
    arrivals: u64,
    served: u64,
    refused: u64,
    marked: u64,
}

struct Streams {
    interarrival: Stream,
    service: Stream,
    zeta: Stream,
    marking: Stream,
}

fn run_cycle(
    config: &SimConfig,
    zeta: &ZetaPmf,
    fixed_zeta: Option<u32>,
    streams: &mut Streams,
    event_cap: u64,
) -> Result<Cycle> {
    // the arrival opening the busy period is always accepted (count 0 <= zeta)
    let mut in_system: u64 = 1;
    let mut arrivals: u64 = 1;
    let mut served: u64 = 0;
    let mut refused: u64 = 0;
    let mut marked: u64 =
        u64::from(config.p_mark > 0.0 && streams.marking.uniform() < config.p_mark);
    let mut next_departure = draw_service(&config.dist, &mut streams.service);
    let mut next_arrival = streams.interarrival.exponential(1.0 / config.lambda);
    let mut events: u64 = 0;
    loop {
        events += 1;
        if events > event_cap {
            return Err(Error::RunawaySimulation(format!(
                "busy cycle exceeded {event_cap} events"
            )));
        }
        if next_arrival < next_departure {
            arrivals += 1;
            let cap = match fixed_zeta {
                Some(k) => k,
                None => draw_zeta(zeta, &mut streams.zeta),
            };
            if in_system <= u64::from(cap) {
                in_system += 1;
                if config.p_mark > 0.0 && streams.marking.uniform() < config.p_mark {
                    marked += 1;
                }
            } else {
                refused += 1;
            }
            next_arrival += streams.interarrival.exponential(1.0 / config.lambda);
        } else {
            in_system -= 1;
            served += 1;
            if in_system == 0 {
                break;
            }
            next_departure += draw_service(&config.dist, &mut streams.service);
        }
    }
    assert!(
        arrivals == served + refused,
        "cycle conservation violated: {arrivals} != {served} + {refused}"
    );
    Ok(Cycle {
        // the busy period runs from the opening arrival to the departure
        // that empties the system
        duration: next_departure,
        arrivals,
        served,
        refused,
        marked,
    })
}

fn run_replication(config: &SimConfig, zeta: &ZetaPmf, replication: u32) -> Result<CycleSums> {
    let mut streams = Streams {
        interarrival: Stream::new(config.seed, replication, 0),
        service: Stream::new(config.seed, replication, 1),
        zeta: Stream::new(config.seed, replication, 2),
        marking: Stream::new(config.seed, replication, 3),
    };
    let fixed_zeta = match config.zeta_mode {
        ZetaMode::IidPerArrival => None,
        ZetaMode::FixedPerRun => Some(draw_zeta(zeta, &mut streams.zeta)),
    };
    let n = config.n_busy_periods;
    let nb = n.min(BATCHES);
    let mut sums = CycleSums::new();
    sums.batches = vec![(0.0, 0.0); nb as usize];
    for cycle_idx in 0..n {
        let cycle = run_cycle(config, zeta, fixed_zeta, &mut streams, EVENT_CAP)?;
        let t = cycle.duration;
        let p = cycle.served as f64;
        let m = cycle.marked as f64;
        let r = cycle.refused as f64;
        sums.n += 1;
        sums.st += t;
        sums.st2 += t * t;
        sums.sp += p;
        sums.sp2 += p * p;
        sums.sm += m;
        sums.sm2 += m * m;
        sums.sr += r;
        sums.sr2 += r * r;
        sums.arrivals += cycle.arrivals;
        sums.served += cycle.served;
        sums.refused += cycle.refused;
        sums.marked += cycle.marked;
        let b = (cycle_idx * nb / n) as usize;
        sums.batches[b].0 += r + m;
        sums.batches[b].1 += cycle.arrivals as f64;
    }
    Ok(sums)
}

fn aggregate(mode: ZetaMode, per_rep: Vec<CycleSums>) -> SimEstimate {
    let mut pooled = CycleSums::new();
    let mut per_replication = Vec::with_capacity(per_rep.len());
    for (i, sums) in per_rep.iter().enumerate() {
        per_replication.push(sums.estimate(i as u32));
        pooled.merge(sums);
    }
    let est = match mode {
        // cycles are iid across the whole experiment: pool them
        ZetaMode::IidPerArrival => pooled.estimate(0),
        // one zeta draw per replication makes cycles within a replication
        // dependent through that draw; the replication is the iid unit and
        // the errors must come from the replication-level spread
        ZetaMode::FixedPerRun => across_replications(&per_replication),
    };
    SimEstimate {
        e_t: est.e_t,
        e_p: est.e_p,
        e_m: est.e_m,
        e_r: est.e_r,
        pi_hat: est.pi_hat,
        se_t: est.se_t,
        se_p: est.se_p,
        se_m: est.se_m,
        se_r: est.se_r,
        se_pi: est.se_pi,
        n_cycles: pooled.n,
        total_arrivals: pooled.arrivals,
        total_served: pooled.served,
        total_refused: pooled.refused,
        total_marked: pooled.marked,
        per_replication,
    }
}

/// Mean and standard error over replication-level estimates.
fn across_replications(reps: &[ReplicationEstimate]) -> ReplicationEstimate {
    let r = reps.len() as f64;
    let stat = |get: fn(&ReplicationEstimate) -> f64| -> (f64, f64) {
        let mean = reps.iter().map(get).sum::<f64>() / r;
        if reps.len() < 2 {
            return (mean, 0.0);
        }
        let ss = reps
            .iter()
            .map(|e| {
                let d = get(e) - mean;
                d * d
            })
            .sum::<f64>();
        (mean, (ss / (r * (r - 1.0))).sqrt())
    };
    let (e_t, se_t) = stat(|e| e.e_t);
    let (e_p, se_p) = stat(|e| e.e_p);
    let (e_m, se_m) = stat(|e| e.e_m);
    let (e_r, se_r) = stat(|e| e.e_r);
    let (pi_hat, se_pi) = stat(|e| e.pi_hat);
    ReplicationEstimate {
        replication: 0,
        n_cycles: reps.iter().map(|e| e.n_cycles).sum(),
        e_t,
        e_p,
        e_m,
        e_r,
        pi_hat,
        se_t,
        se_p,
        se_m,
        se_r,
        se_pi,
    }
}

/// Runs the experiment, fanning replications out to the rayon pool when the
/// `parallel` feature is enabled. Output is bitwise identical to
/// [`run_sequential`] for equal configs.
pub fn run(config: &SimConfig) -> Result<SimEstimate> {
    config.validate()?;
    let zeta = zeta_pmf(&config.nu, config.buffer_packets)?;
    #[cfg(feature = "parallel")]
    let sums: Result<Vec<CycleSums>> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, &zeta, r))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let sums: Result<Vec<CycleSums>> = (0..config.replications)
        .map(|r| run_replication(config, &zeta, r))
        .collect();
    Ok(aggregate(config.zeta_mode, sums?))
}

/// Single-threaded reference path (also the benchmark baseline).
pub fn run_sequential(config: &SimConfig) -> Result<SimEstimate> {
    config.validate()?;
    let zeta = zeta_pmf(&config.nu, config.buffer_packets)?;
    let sums: Result<Vec<CycleSums>> = (0..config.replications)
        .map(|r| run_replication(config, &zeta, r))
        .collect();
    Ok(aggregate(config.zeta_mode, sums?))
}

/// One simulated-vs-analytic z-score.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub name: &'static str,
    pub simulated: f64,
    pub se: f64,
    pub analytic: f64,
    pub z: f64,
}

/// z-scores of the pooled estimates against analytic characteristics;
/// passes when every |z| is at most 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ZScore>,
    pub pass: bool,
}

fn z_row(name: &'static str, simulated: f64, se: f64, analytic: f64) -> Result<ZScore> {
    let z = if se == 0.0 {
        if (simulated - analytic).abs() < 1e-12 {
            0.0
        } else {
            return Err(Error::DegenerateComparison(format!(
                "{name}: zero standard error with simulated {simulated} vs analytic {analytic}"
            )));
        }
    } else {
        (simulated - analytic) / se
    };
    Ok(ZScore {
        name,
        simulated,
        se,
        analytic,
        z,
    })
}

/// Compares a simulation estimate against exact busy-period characteristics
/// from a matched configuration.
pub fn compare(
    est: &SimEstimate,
    analytic: &BusyPeriodCharacteristics,
) -> Result<ComparisonReport> {
    let rows = vec![
        z_row("e_t", est.e_t, est.se_t, analytic.e_t)?,
        z_row("e_p", est.e_p, est.se_p, analytic.e_p)?,
        z_row("e_m", est.e_m, est.se_m, analytic.e_m)?,
        z_row("e_r", est.e_r, est.se_r, analytic.e_r)?,
        z_row("pi", est.pi_hat, est.se_pi, loss_probability(analytic))?,
    ];
    let pass = rows.iter().all(|r| r.z.abs() <= 3.0);
    Ok(ComparisonReport { rows, pass })
}

/// z-scores between two estimates with independent errors (the class-Σ
/// equivalence check between ζ sampling modes).
pub fn equivalence_z(a: &SimEstimate, b: &SimEstimate) -> Vec<ZScore> {
    let pair = |name: &'static str, va: f64, sa: f64, vb: f64, sb: f64| {
        let se = (sa * sa + sb * sb).sqrt();
        let z = if se == 0.0 { 0.0 } else { (va - vb) / se };
        ZScore {
            name,
            simulated: va,
            se,
            analytic: vb,
            z,
        }
    };
    vec![
        pair("e_t", a.e_t, a.se_t, b.e_t, b.se_t),
        pair("e_p", a.e_p, a.se_p, b.e_p, b.se_p),
        pair("e_r", a.e_r, a.se_r, b.e_r, b.se_r),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::busy_period::fixed_characteristics;

    fn base_config() -> SimConfig {
        SimConfig {
            lambda: 1.0,
            dist: ServiceDistribution::exponential(1.0).unwrap(),
            nu: PacketLaw::deterministic(1).unwrap(),
            buffer_packets: 4,
            p_mark: 0.0,
            zeta_mode: ZetaMode::IidPerArrival,
            n_busy_periods: 20_000,
            replications: 2,
            seed: 0xA5A5_1234,
        }
    }

    #[test]
    fn identical_seeds_are_bitwise_identical() {
        let cfg = base_config();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_and_sequential_agree_exactly() {
        let cfg = base_config();
        assert_eq!(run(&cfg).unwrap(), run_sequential(&cfg).unwrap());
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = base_config();
        let mut other = cfg.clone();
        other.seed ^= 1;
        assert_ne!(run(&cfg).unwrap().e_t, run(&other).unwrap().e_t);
    }

    #[test]
    fn conservation_and_totals() {
        let est = run(&base_config()).unwrap();
        assert_eq!(est.total_arrivals, est.total_served + est.total_refused);
        assert_eq!(est.total_marked, 0);
        assert_eq!(est.e_m, 0.0);
        assert_eq!(est.n_cycles, 40_000);
        assert_eq!(est.per_replication.len(), 2);
    }

    #[test]
    fn matches_analytic_critical_mm1() {
        // M/M/1 rho = 1, zeta = 4: E T = 5, E P = 5, E R = 1, Pi = 1/6.
        let cfg = base_config();
        let est = run(&cfg).unwrap();
        let analytic = fixed_characteristics(4, 1.0, &cfg.dist, 0.0).unwrap();
        let report = compare(&est, &analytic).unwrap();
        assert!(
            report.pass,
            "z-scores: {:?}",
            report.rows.iter().map(|r| r.z).collect::<Vec<_>>()
        );
    }

    #[test]
    fn matches_analytic_overloaded_mm1() {
        // rho = 2, zeta = 1: E T = 3, E R = 4.
        let cfg = SimConfig {
            lambda: 2.0,
            buffer_packets: 1,
            ..base_config()
        };
        let est = run(&cfg).unwrap();
        let analytic = fixed_characteristics(1, 2.0, &cfg.dist, 0.0).unwrap();
        let report = compare(&est, &analytic).unwrap();
        assert!(
            report.pass,
            "z-scores: {:?}",
            report.rows.iter().map(|r| r.z).collect::<Vec<_>>()
        );
    }

    #[test]
    fn marking_ratio_follows_p() {
        let cfg = SimConfig {
            p_mark: 0.2,
            ..base_config()
        };
        let est = run(&cfg).unwrap();
        let ratio = est.total_marked as f64 / est.total_served as f64;
        assert!((ratio - 0.2).abs() < 0.01, "M/P ratio {ratio}");
    }

    #[test]
    fn wrong_model_comparison_fails() {
        // calibration: a wrong-model oracle must be rejected
        // with |z| > 3 somewhere.
        let cfg = base_config();
        let est = run(&cfg).unwrap();
        let wrong = fixed_characteristics(4, 1.4, &cfg.dist, 0.0).unwrap();
        let report = compare(&est, &wrong).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn degenerate_comparison_detected() {
        let cfg = base_config();
        let est = run(&cfg).unwrap();
        // p = 0 gives zero SE on e_m; an analytic e_m != 0 cannot be scored
        let mut analytic = fixed_characteristics(4, 1.0, &cfg.dist, 0.0).unwrap();
        analytic.e_m = 0.5;
        assert!(matches!(
            compare(&est, &analytic),
            Err(Error::DegenerateComparison(_))
        ));
    }

    /// Expected busy period of the per-arrival-ζ system with exponential
    /// service, solved exactly from its continuous-time Markov chain:
    /// from n in system an arrival is accepted with probability
    /// P{ζ >= n}. Independent oracle for what the iid mode really
    /// estimates.
    fn iid_busy_period_chain(lambda: f64, mu: f64, zeta: &ZetaPmf) -> f64 {
        let m = (zeta.upper() + 1) as usize; // states 1..=m
        let h = 1.0 / (lambda + mu);
        let pa = lambda / (lambda + mu);
        let pd = mu / (lambda + mu);
        // rows: (1 - pa (1 - alpha_n)) a_n - pa alpha_n a_{n+1} - pd a_{n-1} = h
        let mut mat = vec![vec![0.0f64; m + 1]; m];
        for n in 1..=m {
            let alpha: f64 = zeta.support().filter(|&(k, _)| k as usize >= n).map(|(_, p)| p).sum();
            let row = &mut mat[n - 1];
            row[n - 1] = 1.0 - pa * (1.0 - alpha);
            if n < m {
                row[n] = -pa * alpha;
            }
            if n > 1 {
                row[n - 2] = -pd;
            }
            row[m] = h;
        }
        // Gaussian elimination with partial pivoting
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&a, &b| mat[a][col].abs().partial_cmp(&mat[b][col].abs()).unwrap())
                .unwrap();
            mat.swap(col, pivot);
            for r in 0..m {
                if r != col && mat[r][col] != 0.0 {
                    let f = mat[r][col] / mat[col][col];
                    let pivot_row = mat[col].clone();
                    for (x, v) in mat[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * v;
                    }
                }
            }
        }
        mat[0][m] / mat[0][0]
    }

    #[test]
    fn adjacent_support_zeta_modes_share_the_mixture_target() {
        // For zeta supported on two adjacent integers the per-arrival and
        // fixed-per-run systems have identical busy-period expectations
        // (the chain solution coincides with the mixture), so both modes
        // are validated against the same analytic characteristics.
        let nu = PacketLaw::new(&[(1, 0.5), (2, 0.5)]).unwrap();
        let zeta = zeta_pmf(&nu, 2).unwrap();
        assert_eq!((zeta.lower(), zeta.upper()), (1, 2));
        let analytic =
            crate::busy_period::mixture_characteristics(&zeta, 1.0, &base_config().dist, 0.0)
                .unwrap();
        let chain = iid_busy_period_chain(1.0, 1.0, &zeta);
        assert!(
            (chain - analytic.e_t).abs() < 1e-10,
            "chain {chain} vs mixture {}",
            analytic.e_t
        );

        let cfg = SimConfig {
            nu,
            buffer_packets: 2,
            n_busy_periods: 60_000,
            ..base_config()
        };
        let iid = run(&cfg).unwrap();
        let fixed = run(&SimConfig {
            zeta_mode: ZetaMode::FixedPerRun,
            n_busy_periods: 2_500,
            replications: 48,
            ..cfg.clone()
        })
        .unwrap();
        let iid_report = compare(&iid, &analytic).unwrap();
        assert!(iid_report.pass, "iid z-scores: {:?}", iid_report.rows);
        let fixed_report = compare(&fixed, &analytic).unwrap();
        assert!(fixed_report.pass, "fixed z-scores: {:?}", fixed_report.rows);
        for row in equivalence_z(&iid, &fixed) {
            assert!(row.z.abs() <= 3.0, "{}: z = {}", row.name, row.z);
        }
    }

    #[test]
    fn wider_support_iid_mode_follows_chain_not_mixture() {
        // With three zeta atoms the per-arrival system is NOT expectation-
        // equivalent to the fixed-zeta system: its busy period solves the
        // acceptance-probability chain instead. pmf {1: 1/4, 2: 5/8,
        // 3: 1/8} gives chain 2.84375 vs mixture 2.875.
        let nu = PacketLaw::new(&[(1, 0.5), (2, 0.5)]).unwrap();
        let zeta = zeta_pmf(&nu, 3).unwrap();
        let chain = iid_busy_period_chain(1.0, 1.0, &zeta);
        assert!((chain - 2.84375).abs() < 1e-12, "chain {chain}");
        let mixture =
            crate::busy_period::mixture_characteristics(&zeta, 1.0, &base_config().dist, 0.0)
                .unwrap();
        assert!((mixture.e_t - 2.875).abs() < 1e-10);

        let cfg = SimConfig {
            nu,
            buffer_packets: 3,
            n_busy_periods: 250_000,
            ..base_config()
        };
        let iid = run(&cfg).unwrap();
        let z_chain = (iid.e_t - chain) / iid.se_t;
        assert!(z_chain.abs() <= 3.0, "z against chain: {z_chain}");
        let z_mixture = (iid.e_t - mixture.e_t) / iid.se_t;
        assert!(
            z_mixture.abs() > 3.0,
            "iid estimate should resolve the gap to the mixture: z = {z_mixture}"
        );
    }

    #[test]
    fn event_cap_flags_runaway_cycles() {
        // rho = 5 with a huge capacity makes a short cap trip reliably
        let cfg = SimConfig {
            lambda: 5.0,
            buffer_packets: 10_000,
            ..base_config()
        };
        let zeta = zeta_pmf(&cfg.nu, cfg.buffer_packets).unwrap();
        let mut streams = Streams {
            interarrival: Stream::new(cfg.seed, 0, 0),
            service: Stream::new(cfg.seed, 0, 1),
            zeta: Stream::new(cfg.seed, 0, 2),
            marking: Stream::new(cfg.seed, 0, 3),
        };
        let result = run_cycle(&cfg, &zeta, None, &mut streams, 50);
        assert!(matches!(result, Err(Error::RunawaySimulation(_))));
    }

    #[test]
    fn rejects_invalid_configs() {
        let mut cfg = base_config();
        cfg.n_busy_periods = 0;
        assert!(run(&cfg).is_err());
        let mut cfg = base_config();
        cfg.p_mark = 1.5;
        assert!(run(&cfg).is_err());
        let mut cfg = base_config();
        cfg.lambda = 0.0;
        assert!(run(&cfg).is_err());
    }
}
