//! Command dispatch: every command computes its results through the core
//! crate and emits a deterministic CSV or JSON artifact.

use crate::config::{Command, OutputFormat, RedundancyOptions, RunConfig, SimOptions};
use crate::emit::{csv_row, fmt_f64, fmt_opt_f64, JsonObject};
use crate::CliError;
use lossq_core::asymptotics::{
    classify_regime, ep_asymptote, er_asymptote, loss_asymptote, BufferLaw,
};
use lossq_core::busy_period::{loss_probability, mixture_characteristics};
use lossq_core::packetization::zeta_pmf;
use lossq_core::redundancy::{sweep, RedundancyScenario};
use lossq_core::simulator::{compare, run, ComparisonReport, SimConfig, SimEstimate};

/// Exit status of a successfully executed command (`compare` reports
/// failure through its documented nonzero code rather than an error).
pub struct ExecOutcome {
    pub exit_code: i32,
}

const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_REGIME: i32 = 3;
pub const EXIT_COMPARISON: i32 = 4;
pub const EXIT_RUNAWAY: i32 = 5;

fn write_artifact(cfg: &RunConfig, content: &str) -> Result<(), CliError> {
    match &cfg.output.path {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Io(format!("cannot write {path}: {e}"))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<ExecOutcome, CliError> {
    match &cfg.command {
        Command::Analyze => run_analyze(cfg),
        Command::Simulate(opts) => run_simulate(cfg, opts),
        Command::Asymptote => run_asymptote(cfg),
        Command::Redundancy(opts) => run_redundancy(cfg, opts),
        Command::Compare(opts) => run_compare(cfg, opts),
    }
}

fn run_analyze(cfg: &RunConfig) -> Result<ExecOutcome, CliError> {
    let m = &cfg.model;
    let zeta = zeta_pmf(&m.nu, m.buffer_packets)?;
    let chars = mixture_characteristics(&zeta, m.lambda, &m.dist, m.p_mark)?;
    let pi = loss_probability(&chars);
    let k_or_mix = match zeta.as_degenerate() {
        Some(k) => k.to_string(),
        None => "mix".to_string(),
    };
    let content = match cfg.output.format {
        OutputFormat::Csv => {
            let mut out = String::from("k_or_mix,e_t,e_p,e_m,e_r,pi\n");
            out.push_str(&csv_row(&[
                k_or_mix,
                fmt_f64(chars.e_t),
                fmt_f64(chars.e_p),
                fmt_f64(chars.e_m),
                fmt_f64(chars.e_r),
                fmt_f64(pi),
            ]));
            out.push('\n');
            out
        }
        OutputFormat::Json => {
            let mut s = JsonObject::new()
                .field_str("command", "analyze")
                .field_str("k_or_mix", &k_or_mix)
                .field_f64("e_t", chars.e_t)
                .field_f64("e_p", chars.e_p)
                .field_f64("e_m", chars.e_m)
                .field_f64("e_r", chars.e_r)
                .field_f64("pi", pi)
                .finish();
            s.push('\n');
            s
        }
    };
    write_artifact(cfg, &content)?;
    Ok(ExecOutcome { exit_code: EXIT_OK })
}

fn sim_config(cfg: &RunConfig, opts: &SimOptions) -> SimConfig {
    let m = &cfg.model;
    SimConfig {
        lambda: m.lambda,
        dist: m.dist.clone(),
        nu: m.nu.clone(),
        buffer_packets: m.buffer_packets,
        p_mark: m.p_mark,
        zeta_mode: opts.zeta_mode,
        n_busy_periods: opts.n_busy_periods,
        replications: opts.replications,
        seed: opts.seed,
    }
}

fn replication_rows_csv(est: &SimEstimate) -> String {
    let mut out =
        String::from("replication,cycles,e_t,e_p,e_m,e_r,pi_hat,se_t,se_p,se_m,se_r,se_pi\n");
    for r in &est.per_replication {
        out.push_str(&csv_row(&[
            r.replication.to_string(),
            r.n_cycles.to_string(),
            fmt_f64(r.e_t),
            fmt_f64(r.e_p),
            fmt_f64(r.e_m),
            fmt_f64(r.e_r),
            fmt_f64(r.pi_hat),
            fmt_f64(r.se_t),
            fmt_f64(r.se_p),
            fmt_f64(r.se_m),
            fmt_f64(r.se_r),
            fmt_f64(r.se_pi),
        ]));
        out.push('\n');
    }
    out
}

fn summary_json(opts: &SimOptions, est: &SimEstimate) -> String {
    let estimates = JsonObject::new()
        .field_f64("e_t", est.e_t)
        .field_f64("e_p", est.e_p)
        .field_f64("e_m", est.e_m)
        .field_f64("e_r", est.e_r)
        .field_f64("pi_hat", est.pi_hat)
        .finish();
    let ses = JsonObject::new()
        .field_f64("e_t", est.se_t)
        .field_f64("e_p", est.se_p)
        .field_f64("e_m", est.se_m)
        .field_f64("e_r", est.se_r)
        .field_f64("pi_hat", est.se_pi)
        .finish();
    let totals = JsonObject::new()
        .field_u64("arrivals", est.total_arrivals)
        .field_u64("served", est.total_served)
        .field_u64("refused", est.total_refused)
        .field_u64("marked", est.total_marked)
        .finish();
    let reps = est.per_replication.iter().map(|r| {
        JsonObject::new()
            .field_u64("replication", u64::from(r.replication))
            .field_u64("cycles", r.n_cycles)
            .field_f64("e_t", r.e_t)
            .field_f64("e_p", r.e_p)
            .field_f64("e_m", r.e_m)
            .field_f64("e_r", r.e_r)
            .field_f64("pi_hat", r.pi_hat)
            .field_f64("se_t", r.se_t)
            .field_f64("se_p", r.se_p)
            .field_f64("se_m", r.se_m)
            .field_f64("se_r", r.se_r)
            .field_f64("se_pi", r.se_pi)
            .finish()
    });
    let mut s = JsonObject::new()
        .field_str("command", "simulate")
        .field_u64("seed", opts.seed)
        .field_u64("replications", u64::from(opts.replications))
        .field_u64("n_busy_periods", opts.n_busy_periods)
        .field_str("zeta_mode", opts.zeta_mode.name())
        .field_u64("n_cycles", est.n_cycles)
        .field_raw("estimates", &estimates)
        .field_raw("standard_errors", &ses)
        .field_raw("totals", &totals)
        .field_array("per_replication", reps)
        .finish();
    s.push('\n');
    s
}

fn run_simulate(cfg: &RunConfig, opts: &SimOptions) -> Result<ExecOutcome, CliError> {
    let est = run(&sim_config(cfg, opts))?;
    match cfg.output.format {
        OutputFormat::Csv => {
            write_artifact(cfg, &replication_rows_csv(&est))?;
            // the machine-readable summary accompanies file output
            if let Some(path) = &cfg.output.path {
                let summary_path = format!("{path}.summary.json");
                std::fs::write(&summary_path, summary_json(opts, &est))
                    .map_err(|e| CliError::Io(format!("cannot write {summary_path}: {e}")))?;
            }
        }
        OutputFormat::Json => {
            write_artifact(cfg, &summary_json(opts, &est))?;
        }
    }
    Ok(ExecOutcome { exit_code: EXIT_OK })
}

fn run_asymptote(cfg: &RunConfig) -> Result<ExecOutcome, CliError> {
    let m = &cfg.model;
    let zeta = zeta_pmf(&m.nu, m.buffer_packets)?;
    let buffer = BufferLaw::Zeta(&zeta);
    let report = classify_regime(m.lambda, &m.dist, buffer, m.p_mark)?;
    let chars = mixture_characteristics(&zeta, m.lambda, &m.dist, m.p_mark)?;
    let exact_pi = loss_probability(&chars);
    let pred_ep = ep_asymptote(m.lambda, &m.dist, buffer)?;
    let pred_er = er_asymptote(m.lambda, &m.dist, buffer)?;
    let pred_pi = loss_asymptote(&report, m.p_mark, m.lambda, &m.dist, buffer)?;
    let rows = [
        ("e_p", chars.e_p, pred_ep),
        ("e_r", chars.e_r, pred_er),
        ("pi", exact_pi, pred_pi),
    ];
    let content = match cfg.output.format {
        OutputFormat::Csv => {
            let mut out = String::from("quantity,exact,predicted,delta\n");
            for (name, exact, predicted) in rows {
                out.push_str(&csv_row(&[
                    name.to_string(),
                    fmt_f64(exact),
                    fmt_f64(predicted),
                    fmt_f64(exact - predicted),
                ]));
                out.push('\n');
            }
            out
        }
        OutputFormat::Json => {
            let row_objs = rows.iter().map(|(name, exact, predicted)| {
                JsonObject::new()
                    .field_str("quantity", name)
                    .field_f64("exact", *exact)
                    .field_f64("predicted", *predicted)
                    .field_f64("delta", exact - predicted)
                    .finish()
            });
            let regime = JsonObject::new()
                .field_str("regime", report.regime.name())
                .field_f64("epsilon", report.epsilon)
                .field_f64("c", report.c)
                .field_f64("d", report.d)
                .field_opt_f64("phi", report.phi.map(|r| r.phi))
                .field_opt_f64(
                    "derivative_term",
                    report.phi.map(|r| r.derivative_term),
                )
                .field_bool("rho2_finite", report.flags.rho2_finite)
                .field_bool("rho3_finite", report.flags.rho3_finite)
                .field_f64("e_zeta", zeta.mean())
                .finish();
            let mut s = JsonObject::new()
                .field_str("command", "asymptote")
                .field_raw("regime_report", &regime)
                .field_array("rows", row_objs)
                .finish();
            s.push('\n');
            s
        }
    };
    write_artifact(cfg, &content)?;
    Ok(ExecOutcome { exit_code: EXIT_OK })
}

fn run_redundancy(cfg: &RunConfig, opts: &RedundancyOptions) -> Result<ExecOutcome, CliError> {
    let m = &cfg.model;
    let scenario = RedundancyScenario {
        q: opts.q,
        base_packets: opts.base_packets,
        redundant_packets: 0,
        recover_threshold: opts.recover_threshold,
        lambda: m.lambda,
        dist: m.dist.clone(),
        buffer_packets: m.buffer_packets,
        nu: m.nu.clone(),
    };
    let ks: Vec<u32> = (opts.k_range.0..=opts.k_range.1).collect();
    let table = sweep(&scenario, &ks)?;
    let content = match cfg.output.format {
        OutputFormat::Csv => {
            let mut out =
                String::from("k,p_breve,rho_breve,regime,pi_predicted,pi_exact,verdict\n");
            for row in &table.rows {
                out.push_str(&csv_row(&[
                    row.k.to_string(),
                    fmt_f64(row.p_breve),
                    fmt_f64(row.rho_breve),
                    row.regime.name().to_string(),
                    fmt_opt_f64(row.pi_predicted),
                    fmt_opt_f64(row.pi_exact),
                    row.verdict.name().to_string(),
                ]));
                out.push('\n');
            }
            out
        }
        OutputFormat::Json => {
            let rows = table.rows.iter().map(|row| {
                JsonObject::new()
                    .field_u64("k", u64::from(row.k))
                    .field_f64("p_breve", row.p_breve)
                    .field_f64("rho_breve", row.rho_breve)
                    .field_str("regime", row.regime.name())
                    .field_opt_f64("pi_predicted", row.pi_predicted)
                    .field_opt_f64("pi_exact", row.pi_exact)
                    .field_str("verdict", row.verdict.name())
                    .finish()
            });
            let mut obj = JsonObject::new()
                .field_str("command", "redundancy")
                .field_array("rows", rows);
            obj = match table.argmin_k {
                Some(k) => obj.field_u64("argmin_k", u64::from(k)),
                None => obj.field_raw("argmin_k", "null"),
            };
            let mut s = obj.finish();
            s.push('\n');
            s
        }
    };
    write_artifact(cfg, &content)?;
    Ok(ExecOutcome { exit_code: EXIT_OK })
}

fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("quantity,simulated,se,analytic,z,pass\n");
    for row in &report.rows {
        out.push_str(&csv_row(&[
            row.name.to_string(),
            fmt_f64(row.simulated),
            fmt_f64(row.se),
            fmt_f64(row.analytic),
            fmt_f64(row.z),
            (row.z.abs() <= 3.0).to_string(),
        ]));
        out.push('\n');
    }
    out
}

fn run_compare(cfg: &RunConfig, opts: &SimOptions) -> Result<ExecOutcome, CliError> {
    let m = &cfg.model;
    let est = run(&sim_config(cfg, opts))?;
    let zeta = zeta_pmf(&m.nu, m.buffer_packets)?;
    let analytic = mixture_characteristics(&zeta, m.lambda, &m.dist, m.p_mark)?;
    let report = compare(&est, &analytic)?;
    let content = match cfg.output.format {
        OutputFormat::Csv => comparison_csv(&report),
        OutputFormat::Json => {
            let rows = report.rows.iter().map(|row| {
                JsonObject::new()
                    .field_str("quantity", row.name)
                    .field_f64("simulated", row.simulated)
                    .field_f64("se", row.se)
                    .field_f64("analytic", row.analytic)
                    .field_f64("z", row.z)
                    .field_bool("pass", row.z.abs() <= 3.0)
                    .finish()
            });
            let mut s = JsonObject::new()
                .field_str("command", "compare")
                .field_bool("pass", report.pass)
                .field_array("rows", rows)
                .finish();
            s.push('\n');
            s
        }
    };
    write_artifact(cfg, &content)?;
    Ok(ExecOutcome {
        exit_code: if report.pass { EXIT_OK } else { EXIT_COMPARISON },
    })
}
