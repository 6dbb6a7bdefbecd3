//! Config ingestion: a flat sectioned key-value document (TOML) with
//! sections `[model]`, `[command]`, `[output]`, parsed into a fully
//! validated [`RunConfig`] or rejected with a field-precise message.
//! Unknown keys are hard errors, as are recognized keys that do not apply
//! to the selected command.

use crate::CliError;
use lossq_core::packetization::PacketLaw;
use lossq_core::service::ServiceDistribution;
use lossq_core::simulator::ZetaMode;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_REPLICATIONS: u32 = 4;
pub const DEFAULT_BUSY_PERIODS: u64 = 100_000;
pub const DEFAULT_K_RANGE: (u32, u32) = (0, 4);

/// Raw document shape; field names are the config grammar.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    model: ModelSection,
    command: CommandSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    lambda: f64,
    service_kind: String,
    service_params: Vec<f64>,
    buffer_packets: u32,
    nu: Vec<(u32, f64)>,
    #[serde(default)]
    p: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CommandSection {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replications: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_busy_periods: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zeta_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_range: Option<(u32, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_packets: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recover_threshold: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<String>,
}

/// Validated model block.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub lambda: f64,
    pub dist: ServiceDistribution,
    pub buffer_packets: u32,
    pub nu: PacketLaw,
    pub p_mark: f64,
}

/// Options shared by the simulation-backed commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub seed: u64,
    pub replications: u32,
    pub n_busy_periods: u64,
    pub zeta_mode: ZetaMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyOptions {
    pub q: f64,
    pub base_packets: u32,
    pub k_range: (u32, u32),
    pub recover_threshold: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Analyze,
    Simulate(SimOptions),
    Asymptote,
    Redundancy(RedundancyOptions),
    Compare(SimOptions),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate(_) => "simulate",
            Command::Asymptote => "asymptote",
            Command::Redundancy(_) => "redundancy",
            Command::Compare(_) => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    /// Artifact destination; stdout when absent.
    pub path: Option<String>,
    pub format: OutputFormat,
}

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub command: Command,
    pub output: Output,
}

fn invalid(field: &str, msg: impl AsRef<str>) -> CliError {
    CliError::Config(format!("{field}: {}", msg.as_ref()))
}

fn parse_service(kind: &str, params: &[f64]) -> Result<ServiceDistribution, CliError> {
    let field = "model.service_params";
    let want = |n: usize| -> Result<(), CliError> {
        if params.len() != n {
            return Err(invalid(
                field,
                format!("kind '{kind}' takes {n} parameter(s), got {}", params.len()),
            ));
        }
        Ok(())
    };
    let built = match kind {
        "deterministic" => {
            want(1)?;
            ServiceDistribution::deterministic(params[0])
        }
        "exponential" => {
            want(1)?;
            ServiceDistribution::exponential(params[0])
        }
        "erlang" => {
            want(2)?;
            let shape = params[0];
            if shape.fract() != 0.0 || !(1.0..=1e6).contains(&shape) {
                return Err(invalid(field, format!("erlang shape must be a positive integer, got {shape}")));
            }
            ServiceDistribution::erlang(shape as u32, params[1])
        }
        "hyperexponential" => {
            if params.len() < 2 || !params.len().is_multiple_of(2) {
                return Err(invalid(
                    field,
                    "hyperexponential takes (weight, mean) pairs flattened into an even-length list",
                ));
            }
            let pairs: Vec<(f64, f64)> = params.chunks(2).map(|c| (c[0], c[1])).collect();
            ServiceDistribution::hyperexponential(&pairs)
        }
        "uniform" => {
            want(2)?;
            ServiceDistribution::uniform(params[0], params[1])
        }
        other => {
            return Err(invalid(
                "model.service_kind",
                format!(
                    "unknown kind '{other}' (expected deterministic, exponential, erlang, \
                     hyperexponential or uniform)"
                ),
            ))
        }
    };
    built.map_err(|e| invalid(field, e.to_string()))
}

fn parse_zeta_mode(s: &str) -> Result<ZetaMode, CliError> {
    match s {
        "iid_per_arrival" => Ok(ZetaMode::IidPerArrival),
        "fixed_per_run" => Ok(ZetaMode::FixedPerRun),
        other => Err(invalid(
            "command.zeta_mode",
            format!("expected iid_per_arrival or fixed_per_run, got '{other}'"),
        )),
    }
}

/// Rejects options that were set but do not belong to the command.
fn reject_inapplicable(cmd: &CommandSection, allowed: &[&str]) -> Result<(), CliError> {
    let set: [(&str, bool); 8] = [
        ("seed", cmd.seed.is_some()),
        ("replications", cmd.replications.is_some()),
        ("n_busy_periods", cmd.n_busy_periods.is_some()),
        ("zeta_mode", cmd.zeta_mode.is_some()),
        ("k_range", cmd.k_range.is_some()),
        ("q", cmd.q.is_some()),
        ("base_packets", cmd.base_packets.is_some()),
        ("recover_threshold", cmd.recover_threshold.is_some()),
    ];
    for (key, present) in set {
        if present && !allowed.contains(&key) {
            return Err(invalid(
                &format!("command.{key}"),
                format!("not applicable to '{}'", cmd.name),
            ));
        }
    }
    Ok(())
}

fn sim_options(cmd: &CommandSection) -> Result<SimOptions, CliError> {
    Ok(SimOptions {
        seed: cmd.seed.unwrap_or(DEFAULT_SEED),
        replications: cmd.replications.unwrap_or(DEFAULT_REPLICATIONS),
        n_busy_periods: cmd.n_busy_periods.unwrap_or(DEFAULT_BUSY_PERIODS),
        zeta_mode: match &cmd.zeta_mode {
            Some(s) => parse_zeta_mode(s)?,
            None => ZetaMode::IidPerArrival,
        },
    })
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let doc: ConfigDoc =
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
    let m = &doc.model;
    if !m.lambda.is_finite() || m.lambda <= 0.0 {
        return Err(invalid("model.lambda", format!("must be > 0, got {}", m.lambda)));
    }
    if !(0.0..=1.0).contains(&m.p) {
        return Err(invalid("model.p", format!("must lie in [0, 1], got {}", m.p)));
    }
    let dist = parse_service(&m.service_kind, &m.service_params)?;
    let nu = PacketLaw::new(&m.nu).map_err(|e| invalid("model.nu", e.to_string()))?;
    if m.buffer_packets < nu.min_packets() {
        return Err(invalid(
            "model.buffer_packets",
            format!(
                "buffer of {} packets cannot hold one message (minimum size {})",
                m.buffer_packets,
                nu.min_packets()
            ),
        ));
    }
    let model = Model {
        lambda: m.lambda,
        dist,
        buffer_packets: m.buffer_packets,
        nu,
        p_mark: m.p,
    };

    let c = &doc.command;
    let command = match c.name.as_str() {
        "analyze" => {
            reject_inapplicable(c, &[])?;
            Command::Analyze
        }
        "asymptote" => {
            reject_inapplicable(c, &[])?;
            Command::Asymptote
        }
        "simulate" => {
            reject_inapplicable(c, &["seed", "replications", "n_busy_periods", "zeta_mode"])?;
            Command::Simulate(sim_options(c)?)
        }
        "compare" => {
            reject_inapplicable(c, &["seed", "replications", "n_busy_periods", "zeta_mode"])?;
            Command::Compare(sim_options(c)?)
        }
        "redundancy" => {
            reject_inapplicable(c, &["k_range", "q", "base_packets", "recover_threshold"])?;
            if model.p_mark != 0.0 {
                return Err(invalid(
                    "model.p",
                    "not applicable to 'redundancy' (the marking probability is derived from q)",
                ));
            }
            let q = c
                .q
                .ok_or_else(|| invalid("command.q", "required for 'redundancy'"))?;
            if !(0.0..=1.0).contains(&q) {
                return Err(invalid("command.q", format!("must lie in [0, 1], got {q}")));
            }
            let base_packets = c
                .base_packets
                .ok_or_else(|| invalid("command.base_packets", "required for 'redundancy'"))?;
            if base_packets == 0 {
                return Err(invalid("command.base_packets", "must be >= 1"));
            }
            let k_range = c.k_range.unwrap_or(DEFAULT_K_RANGE);
            if k_range.0 > k_range.1 {
                return Err(invalid(
                    "command.k_range",
                    format!("empty range [{}, {}]", k_range.0, k_range.1),
                ));
            }
            Command::Redundancy(RedundancyOptions {
                q,
                base_packets,
                k_range,
                recover_threshold: c.recover_threshold,
            })
        }
        other => {
            return Err(invalid(
                "command.name",
                format!(
                    "unknown command '{other}' (expected analyze, simulate, asymptote, \
                     redundancy or compare)"
                ),
            ))
        }
    };

    let format = match doc.output.format.as_deref() {
        None | Some("csv") => OutputFormat::Csv,
        Some("json") => OutputFormat::Json,
        Some(other) => {
            return Err(invalid(
                "output.format",
                format!("expected csv or json, got '{other}'"),
            ))
        }
    };
    Ok(RunConfig {
        model,
        command,
        output: Output {
            path: doc.output.path.clone(),
            format,
        },
    })
}

/// Renders a validated config back to the document grammar with every
/// default made explicit; `parse_config(emit_config(cfg))` reproduces
/// `cfg` exactly.
pub fn emit_config(cfg: &RunConfig) -> String {
    let (service_kind, service_params) = match &cfg.model.dist {
        ServiceDistribution::Deterministic { value } => ("deterministic", vec![*value]),
        ServiceDistribution::Exponential { mean } => ("exponential", vec![*mean]),
        ServiceDistribution::Erlang { shape, mean } => {
            ("erlang", vec![f64::from(*shape), *mean])
        }
        ServiceDistribution::Hyperexponential { components } => (
            "hyperexponential",
            components.iter().flat_map(|&(w, m)| [w, m]).collect(),
        ),
        ServiceDistribution::Uniform { lo, hi } => ("uniform", vec![*lo, *hi]),
    };
    let mut command = CommandSection {
        name: cfg.command.name().to_string(),
        seed: None,
        replications: None,
        n_busy_periods: None,
        zeta_mode: None,
        k_range: None,
        q: None,
        base_packets: None,
        recover_threshold: None,
    };
    match &cfg.command {
        Command::Analyze | Command::Asymptote => {}
        Command::Simulate(o) | Command::Compare(o) => {
            command.seed = Some(o.seed);
            command.replications = Some(o.replications);
            command.n_busy_periods = Some(o.n_busy_periods);
            command.zeta_mode = Some(o.zeta_mode.name().to_string());
        }
        Command::Redundancy(o) => {
            command.q = Some(o.q);
            command.base_packets = Some(o.base_packets);
            command.k_range = Some(o.k_range);
            command.recover_threshold = o.recover_threshold;
        }
    }
    let doc = ConfigDoc {
        model: ModelSection {
            lambda: cfg.model.lambda,
            service_kind: service_kind.to_string(),
            service_params,
            buffer_packets: cfg.model.buffer_packets,
            nu: cfg.model.nu.atoms().collect(),
            p: cfg.model.p_mark,
        },
        command,
        output: OutputSection {
            path: cfg.output.path.clone(),
            format: Some(cfg.output.format.name().to_string()),
        },
    };
    toml::to_string(&doc).expect("config document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
lambda = 1.0
service_kind = "exponential"
service_params = [1.0]
buffer_packets = 4
nu = [[1, 1.0]]

[command]
name = "analyze"
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.command, Command::Analyze);
        assert_eq!(cfg.model.p_mark, 0.0);
        assert_eq!(cfg.output.format, OutputFormat::Csv);
        assert!(cfg.output.path.is_none());
    }

    #[test]
    fn simulate_defaults() {
        let text = MINIMAL.replace("name = \"analyze\"", "name = \"simulate\"");
        let cfg = parse_config(&text).unwrap();
        match cfg.command {
            Command::Simulate(o) => {
                assert_eq!(o.seed, DEFAULT_SEED);
                assert_eq!(o.replications, DEFAULT_REPLICATIONS);
                assert_eq!(o.n_busy_periods, DEFAULT_BUSY_PERIODS);
                assert_eq!(o.zeta_mode, ZetaMode::IidPerArrival);
            }
            other => panic!("expected simulate, got {other:?}"),
        }
    }

    #[test]
    fn nu_not_summing_to_one_names_the_field() {
        let text = MINIMAL.replace("nu = [[1, 1.0]]", "nu = [[1, 0.5], [2, 0.4]]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("model.nu"), "{err}");
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let text = MINIMAL.replace("[command]", "frobnicate = 3\n\n[command]");
        assert!(parse_config(&text).is_err());
        let text = format!("{MINIMAL}\nwhatever = 1\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn inapplicable_command_keys_are_rejected() {
        let text = MINIMAL.replace("name = \"analyze\"", "name = \"analyze\"\nseed = 7");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("command.seed"), "{err}");
    }

    #[test]
    fn erlang_round_trips_through_traffic_moments() {
        let text = MINIMAL
            .replace("service_kind = \"exponential\"", "service_kind = \"erlang\"")
            .replace("service_params = [1.0]", "service_params = [2, 1.0]");
        let cfg = parse_config(&text).unwrap();
        let tm = cfg.model.dist.traffic_moments(cfg.model.lambda, 2).unwrap();
        // shape 2, mean 1: rho_2 = lambda^2 (3/2) b^2
        assert!((tm.rho_j(2) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn bad_service_kind_and_params() {
        let text = MINIMAL.replace("exponential", "gamma");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL.replace("service_params = [1.0]", "service_params = [1.0, 2.0]");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL
            .replace("service_kind = \"exponential\"", "service_kind = \"erlang\"")
            .replace("service_params = [1.0]", "service_params = [2.5, 1.0]");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        for text in [
            MINIMAL.to_string(),
            MINIMAL.replace("name = \"analyze\"", "name = \"simulate\"\nseed = 9\nreplications = 3"),
            MINIMAL.replace(
                "name = \"analyze\"",
                "name = \"redundancy\"\nq = 0.01\nbase_packets = 10\nk_range = [0, 3]",
            ),
            MINIMAL
                .replace("service_kind = \"exponential\"", "service_kind = \"hyperexponential\"")
                .replace("service_params = [1.0]", "service_params = [0.3, 0.5, 0.7, 2.0]"),
        ] {
            let cfg = parse_config(&text).unwrap();
            let echoed = emit_config(&cfg);
            let reparsed = parse_config(&echoed).unwrap();
            assert_eq!(cfg, reparsed, "round trip changed the config:\n{echoed}");
            // a second echo is byte-stable
            assert_eq!(echoed, emit_config(&reparsed));
        }
    }

    #[test]
    fn buffer_smaller_than_any_message_is_rejected() {
        let text = MINIMAL.replace("nu = [[1, 1.0]]", "nu = [[6, 1.0]]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("model.buffer_packets"), "{err}");
    }
}
