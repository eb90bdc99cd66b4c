//! Command-line front end: scenario files, subcommand dispatch, and
//! machine-readable result emission.
//!
//! Scenario files are JSON with the shape
//! `{"names": [...], "tick_len": [...], "link_delay": [...],
//!   "wake": [{"pos": 0, "time": 0}, ...],
//!   "policy": {"kind": "power2" | "scaled" | "relative" | "table", ...},
//!   "declared_s": optional}`.
//! Every emitted record embeds a SHA-256 digest of the canonical scenario
//! JSON plus the seed, which together reproduce the run exactly. Rational
//! bounds are emitted both as `"num/den"` strings and as fixed six-place
//! decimals. Wall-clock timing is reported only when `--timing` is given so
//! that default output files are byte-identical across repeated runs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::{bound_report, render_rational, BoundReport, BoundsError};
use crate::protocol::{DelayPolicy, Name};
use crate::scenarios::{
    adversarial_config, average_case_experiment, baseline_filter_run, compare_protocols,
    ring_size_from_outcome, ScenarioError,
};
use crate::simulator::{
    run_election_traced, validate_config, Outcome, RingConfig, SimError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Fault(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Fault(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Fault(other.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::BadRange(_) | ScenarioError::NotLockstep => {
                CliError::Config(e.to_string())
            }
            ScenarioError::Sim(s) => s.into(),
            other => CliError::Fault(other.to_string()),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::Fault(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

// ---------------------------------------------------------------------------
// Scenario file format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct WakeEntry {
    pub pos: usize,
    pub time: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_num: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_den: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub names: Vec<u64>,
    pub tick_len: Vec<u64>,
    pub link_delay: Vec<u64>,
    pub wake: Vec<WakeEntry>,
    pub policy: PolicySpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_s: Option<u64>,
}

impl ScenarioFile {
    pub fn to_config(&self) -> Result<RingConfig, CliError> {
        let names = self
            .names
            .iter()
            .map(|&v| Name::new(v).map_err(|e| CliError::Config(format!("names: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let policy = match self.policy.kind.as_str() {
            "power2" => DelayPolicy::Power2,
            "scaled" => DelayPolicy::ScaledPower {
                rho_num: self.policy.rho_num.ok_or_else(|| {
                    CliError::Config("policy kind \"scaled\" requires rho_num".into())
                })?,
                rho_den: self.policy.rho_den.ok_or_else(|| {
                    CliError::Config("policy kind \"scaled\" requires rho_den".into())
                })?,
            },
            "relative" => DelayPolicy::Relative,
            "table" => {
                let raw = self.policy.map.as_ref().ok_or_else(|| {
                    CliError::Config("policy kind \"table\" requires map".into())
                })?;
                let mut map = BTreeMap::new();
                for (key, &delay) in raw {
                    let name: u64 = key.parse().map_err(|_| {
                        CliError::Config(format!("policy map: key {key:?} is not a name"))
                    })?;
                    let name = Name::new(name)
                        .map_err(|e| CliError::Config(format!("policy map: {e}")))?;
                    map.insert(name, delay);
                }
                DelayPolicy::Table(map)
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown policy kind {other:?} (expected power2, scaled, relative, or table)"
                )))
            }
        };
        Ok(RingConfig {
            names,
            tick_len: self.tick_len.clone(),
            link_delay: self.link_delay.clone(),
            wake: self.wake.iter().map(|w| (w.pos, w.time)).collect(),
            policy,
        })
    }

    pub fn from_config(config: &RingConfig, declared_s: Option<u64>) -> Self {
        let policy = match &config.policy {
            DelayPolicy::Power2 => PolicySpec {
                kind: "power2".into(),
                rho_num: None,
                rho_den: None,
                map: None,
            },
            DelayPolicy::ScaledPower { rho_num, rho_den } => PolicySpec {
                kind: "scaled".into(),
                rho_num: Some(*rho_num),
                rho_den: Some(*rho_den),
                map: None,
            },
            DelayPolicy::Relative => PolicySpec {
                kind: "relative".into(),
                rho_num: None,
                rho_den: None,
                map: None,
            },
            DelayPolicy::Table(map) => PolicySpec {
                kind: "table".into(),
                rho_num: None,
                rho_den: None,
                map: Some(
                    map.iter()
                        .map(|(name, &delay)| (name.value().to_string(), delay))
                        .collect(),
                ),
            },
        };
        ScenarioFile {
            names: config.names.iter().map(|n| n.value()).collect(),
            tick_len: config.tick_len.clone(),
            link_delay: config.link_delay.clone(),
            wake: config
                .wake
                .iter()
                .map(|&(pos, time)| WakeEntry { pos, time })
                .collect(),
            policy,
            declared_s,
        }
    }
}

/// Parses and validates a scenario file, returning the config and the
/// declared asynchronicity bound, if any.
pub fn parse_scenario(text: &str) -> Result<(RingConfig, Option<u64>), CliError> {
    let file: ScenarioFile = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("scenario parse error: {e}")))?;
    let config = file.to_config()?;
    let violations = validate_config(&config, file.declared_s);
    if !violations.is_empty() {
        let listing = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CliError::Config(format!("invalid scenario: {listing}")));
    }
    Ok((config, file.declared_s))
}

/// SHA-256 of the canonical (compact, fixed field order) scenario JSON.
pub fn scenario_digest(config: &RingConfig, declared_s: Option<u64>) -> String {
    let canonical =
        serde_json::to_string(&ScenarioFile::from_config(config, declared_s)).unwrap();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

// ---------------------------------------------------------------------------
// Result records
// ---------------------------------------------------------------------------

/// An exact rational rendered losslessly plus as a six-place decimal.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RationalValue {
    pub ratio: String,
    pub decimal: String,
}

impl RationalValue {
    fn from(r: &BigRational) -> Self {
        let (ratio, decimal) = render_rational(r);
        RationalValue { ratio, decimal }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct OutcomeSummary {
    pub winner: u64,
    pub wakeup_passes: u64,
    pub election_passes: u64,
    pub sleepwell_passes: u64,
    pub total_passes: u64,
    pub election_passes_by_origin: BTreeMap<String, u64>,
    pub framing_bits: u64,
    pub payload_bits: u64,
    pub total_bits: u64,
    pub first_wake: String,
    pub completion: String,
    pub winner_cycle_ticks: Option<String>,
    pub annihilated: u64,
    pub adopted: u64,
    pub superseded: u64,
    pub unread_at_halt: u64,
}

impl OutcomeSummary {
    pub fn from_outcome(out: &Outcome) -> Self {
        OutcomeSummary {
            winner: out.winner.value(),
            wakeup_passes: out.wakeup_passes,
            election_passes: out.election_passes,
            sleepwell_passes: out.sleepwell_passes,
            total_passes: out.total_passes(),
            election_passes_by_origin: out
                .election_passes_by_origin
                .iter()
                .map(|(name, &count)| (name.value().to_string(), count))
                .collect(),
            framing_bits: out.framing_bits,
            payload_bits: out.payload_bits,
            total_bits: out.total_bits(),
            first_wake: out.first_wake.to_string(),
            completion: out.completion.to_string(),
            winner_cycle_ticks: out.winner_cycle_ticks.as_ref().map(|t| t.to_string()),
            annihilated: out.annihilated,
            adopted: out.adopted,
            superseded: out.superseded,
            unread_at_halt: out.unread_at_halt,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct BoundsSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq2_total: Option<RationalValue>,
    pub eq2_closed: RationalValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq3_bits: Option<RationalValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq4_total: Option<RationalValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq5_expected: Option<RationalValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_total: Option<RationalValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_closed: Option<RationalValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_abs: Option<RationalValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_walk: Option<RationalValue>,
    pub time_relative_circle: RationalValue,
    pub time_relative_total: RationalValue,
}

impl BoundsSummary {
    pub fn from_report(report: &BoundReport) -> Self {
        BoundsSummary {
            eq2_total: report.eq2_total.as_ref().map(RationalValue::from),
            eq2_closed: RationalValue::from(&report.eq2_closed),
            eq3_bits: report.eq3_bits.as_ref().map(RationalValue::from),
            eq4_total: report.eq4_total.as_ref().map(RationalValue::from),
            eq5_expected: report.eq5_expected.as_ref().map(RationalValue::from),
            split_total: report.split_total.as_ref().map(RationalValue::from),
            split_closed: report.split_closed.as_ref().map(RationalValue::from),
            time_abs: report.times.time_abs.as_ref().map(RationalValue::from),
            time_walk: report.times.time_walk.as_ref().map(RationalValue::from),
            time_relative_circle: RationalValue::from(&report.times.time_relative_circle),
            time_relative_total: RationalValue::from(&report.times.time_relative_total),
        }
    }
}

/// One run's machine-readable record. `duration_ms` is present only with
/// `--timing`, keeping default emissions byte-identical run to run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ResultRecord {
    pub command: String,
    pub scenario_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub outcome: OutcomeSummary,
    pub bounds: BoundsSummary,
    /// Checks of observed counters against the evaluated bounds.
    pub flags: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<String>>,
}

fn bound_flags(out: &Outcome, report: &BoundReport) -> BTreeMap<String, bool> {
    let mut flags = BTreeMap::new();
    let total = BigRational::from_integer(out.total_passes().into());
    let bits = BigRational::from_integer(out.total_bits().into());
    if let Some(eq2) = &report.eq2_total {
        flags.insert("eq2_holds".into(), total <= *eq2);
    }
    flags.insert("eq2_closed_holds".into(), total <= report.eq2_closed);
    if let Some(eq3) = &report.eq3_bits {
        flags.insert("eq3_holds".into(), bits <= *eq3);
    }
    if let Some(eq4) = &report.eq4_total {
        flags.insert("eq4_holds".into(), total <= *eq4);
    }
    flags
}

fn build_record(
    command: &str,
    config: &RingConfig,
    declared_s: Option<u64>,
    seed: Option<u64>,
    out: &Outcome,
    duration: Option<u64>,
) -> Result<ResultRecord, CliError> {
    let report = bound_report(config)?;
    Ok(ResultRecord {
        command: command.to_string(),
        scenario_digest: scenario_digest(config, declared_s),
        seed,
        outcome: OutcomeSummary::from_outcome(out),
        bounds: BoundsSummary::from_report(&report),
        flags: bound_flags(out, &report),
        duration_ms: duration,
        trace: out.trace.clone(),
    })
}

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "ringelect",
    about = "Deterministic ring-election simulator and bound calculator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonOut {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Include wall-clock duration in the record (breaks byte-identical
    /// reruns by design).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one election described by a scenario file.
    Simulate {
        #[arg(long)]
        config: std::path::PathBuf,
        /// Embed the full event trace in the record.
        #[arg(long)]
        trace: bool,
        /// Re-run and compare against a previously emitted record.
        #[arg(long)]
        verify: Option<std::path::PathBuf>,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Run the worst-case quadratic schedule of size N.
    Adversary {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Random-permutation experiment; emits one CSV row per trial.
    Average {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "power2")]
        policy: String,
        #[arg(long, default_value_t = 2)]
        rho_num: u64,
        #[arg(long, default_value_t = 1)]
        rho_den: u64,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Mean passes for the main protocol and the filter baseline.
    Compare {
        /// Comma-separated ring sizes, e.g. 8,16,32.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Evaluate all analytic bounds on a scenario without running it.
    Bounds {
        #[arg(long)]
        config: std::path::PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Infer the ring size from a lockstep run's winner cycle time.
    Ringsize {
        #[arg(long)]
        config: std::path::PathBuf,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Run the filter baseline on a scenario file.
    Baseline {
        #[arg(long)]
        config: std::path::PathBuf,
        #[command(flatten)]
        out: CommonOut,
    },
}

fn emit(out: &CommonOut, bytes: &[u8]) -> Result<(), CliError> {
    match &out.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn to_json(value: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).unwrap();
    bytes.push(b'\n');
    bytes
}

fn parse_policy(kind: &str, rho_num: u64, rho_den: u64) -> Result<DelayPolicy, CliError> {
    match kind {
        "power2" => Ok(DelayPolicy::Power2),
        "scaled" => Ok(DelayPolicy::ScaledPower { rho_num, rho_den }),
        "relative" => Ok(DelayPolicy::Relative),
        other => Err(CliError::Config(format!(
            "unknown policy {other:?} (expected power2, scaled, or relative)"
        ))),
    }
}

fn read_scenario(path: &std::path::Path) -> Result<(RingConfig, Option<u64>), CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

fn elapsed_ms(start: Instant, timing: bool) -> Option<u64> {
    timing.then(|| start.elapsed().as_millis() as u64)
}

fn cmd_simulate(
    config_path: &std::path::Path,
    trace: bool,
    verify: Option<&std::path::Path>,
    out: &CommonOut,
) -> Result<(), CliError> {
    let start = Instant::now();
    let (config, declared_s) = read_scenario(config_path)?;
    let outcome = run_election_traced(&config, trace)?;
    let record = build_record(
        "simulate",
        &config,
        declared_s,
        None,
        &outcome,
        elapsed_ms(start, out.timing),
    )?;
    if let Some(record_path) = verify {
        let text = std::fs::read_to_string(record_path)?;
        let prior: ResultRecord = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("record parse error: {e}")))?;
        if prior.scenario_digest != record.scenario_digest {
            return Err(CliError::Fault(format!(
                "verify: scenario digest mismatch ({} vs {})",
                prior.scenario_digest, record.scenario_digest
            )));
        }
        if prior.outcome != record.outcome {
            return Err(CliError::Fault("verify: counters diverge from the record".into()));
        }
        eprintln!("verify: counters reproduced exactly");
    }
    emit(out, &to_json(&record))
}

fn cmd_adversary(n: usize, out: &CommonOut) -> Result<(), CliError> {
    if !(2..=32).contains(&n) {
        return Err(CliError::Config(format!(
            "adversary supports 2 <= n <= 32, got {n}"
        )));
    }
    let start = Instant::now();
    let config = adversarial_config(n);
    let outcome = run_election_traced(&config, false)?;
    let record = build_record(
        "adversary",
        &config,
        None,
        None,
        &outcome,
        elapsed_ms(start, out.timing),
    )?;
    emit(out, &to_json(&record))
}

/// Frozen column order of the per-trial CSV.
pub const AVERAGE_CSV_HEADER: [&str; 10] = [
    "trial",
    "seed",
    "winner",
    "election_passes",
    "total_passes",
    "total_bits",
    "completion",
    "eq5_ratio",
    "eq5_decimal",
    "eq5_ok",
];

fn cmd_average(
    n: usize,
    trials: usize,
    seed: u64,
    policy: &str,
    rho_num: u64,
    rho_den: u64,
    out: &CommonOut,
) -> Result<(), CliError> {
    let policy = parse_policy(policy, rho_num, rho_den)?;
    let stats = average_case_experiment(n, trials, seed, policy)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(AVERAGE_CSV_HEADER).unwrap();
    for trial in &stats.trials {
        let (ratio, decimal) = render_rational(&trial.eq5);
        writer
            .write_record([
                trial.trial.to_string(),
                trial.seed.to_string(),
                trial.outcome.winner.value().to_string(),
                trial.outcome.election_passes.to_string(),
                trial.outcome.total_passes().to_string(),
                trial.outcome.total_bits().to_string(),
                trial.outcome.completion.to_string(),
                ratio,
                decimal,
                trial.eq5_ok.to_string(),
            ])
            .unwrap();
    }
    emit(out, &writer.into_inner().unwrap())
}

/// Frozen column order of the comparison CSV.
pub const COMPARE_CSV_HEADER: [&str; 9] = [
    "n",
    "protocol",
    "trials",
    "mean_election_ratio",
    "mean_election_decimal",
    "mean_total_ratio",
    "mean_per_n_decimal",
    "mean_eq5_ratio",
    "mean_eq5_decimal",
];

fn cmd_compare(
    n_list: &[usize],
    trials: usize,
    seed: u64,
    out: &CommonOut,
) -> Result<(), CliError> {
    if n_list.is_empty() {
        return Err(CliError::Config("--n-list must not be empty".into()));
    }
    let rows = compare_protocols(n_list, trials, seed)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(COMPARE_CSV_HEADER).unwrap();
    for row in rows {
        let (me_r, me_d) = render_rational(&row.mean_election);
        let (mt_r, _) = render_rational(&row.mean_total);
        let (_, pn_d) = render_rational(&row.mean_per_n);
        let (e5_r, e5_d) = row
            .mean_eq5
            .as_ref()
            .map(render_rational)
            .unwrap_or_default();
        writer
            .write_record([
                row.n.to_string(),
                row.protocol.to_string(),
                row.trials.to_string(),
                me_r,
                me_d,
                mt_r,
                pn_d,
                e5_r,
                e5_d,
            ])
            .unwrap();
    }
    emit(out, &writer.into_inner().unwrap())
}

fn render_bounds_text(report: &BoundReport, digest: &str) -> String {
    let summary = BoundsSummary::from_report(report);
    let mut lines = vec![
        format!("scenario  digest={digest}"),
        format!(
            "ring      n={} l={} m={} u={} s={}",
            report.n, report.l, report.params.m, report.params.u, report.params.s
        ),
        format!(
            "walk      w={} w_s={} w_p={}",
            report.params.w, report.params.w_s, report.params.w_p
        ),
    ];
    let mut push = |label: &str, v: &Option<RationalValue>| {
        if let Some(v) = v {
            lines.push(format!("{label:<22} {} ({})", v.ratio, v.decimal));
        }
    };
    push("eq2_total", &summary.eq2_total);
    push("eq2_closed", &Some(summary.eq2_closed.clone()));
    push("eq3_bits", &summary.eq3_bits);
    push("eq4_total", &summary.eq4_total);
    push("eq5_expected", &summary.eq5_expected);
    push("split_total", &summary.split_total);
    push("split_closed", &summary.split_closed);
    push("time_abs", &summary.time_abs);
    push("time_walk", &summary.time_walk);
    push("time_relative_circle", &Some(summary.time_relative_circle.clone()));
    push("time_relative_total", &Some(summary.time_relative_total.clone()));
    lines.push(String::new());
    lines.join("\n")
}

fn cmd_bounds(
    config_path: &std::path::Path,
    format: &str,
    out: &CommonOut,
) -> Result<(), CliError> {
    let (config, declared_s) = read_scenario(config_path)?;
    let report = bound_report(&config)?;
    let digest = scenario_digest(&config, declared_s);
    let bytes = match format {
        "json" => {
            #[derive(Serialize)]
            struct BoundsRecord {
                scenario_digest: String,
                n: usize,
                l: u64,
                bounds: BoundsSummary,
            }
            to_json(&BoundsRecord {
                scenario_digest: digest,
                n: report.n,
                l: report.l.value(),
                bounds: BoundsSummary::from_report(&report),
            })
        }
        "text" => render_bounds_text(&report, &digest).into_bytes(),
        other => {
            return Err(CliError::Config(format!(
                "unknown format {other:?} (expected json or text)"
            )))
        }
    };
    emit(out, &bytes)
}

fn cmd_ringsize(config_path: &std::path::Path, out: &CommonOut) -> Result<(), CliError> {
    let (config, declared_s) = read_scenario(config_path)?;
    let outcome = run_election_traced(&config, false)?;
    let inferred = ring_size_from_outcome(&config, &outcome)?;
    #[derive(Serialize)]
    struct RingsizeRecord {
        scenario_digest: String,
        winner: u64,
        winner_cycle_ticks: String,
        inferred_n: u64,
        actual_n: usize,
    }
    emit(
        out,
        &to_json(&RingsizeRecord {
            scenario_digest: scenario_digest(&config, declared_s),
            winner: outcome.winner.value(),
            winner_cycle_ticks: outcome.winner_cycle_ticks.as_ref().unwrap().to_string(),
            inferred_n: inferred,
            actual_n: config.size(),
        }),
    )
}

fn cmd_baseline(config_path: &std::path::Path, out: &CommonOut) -> Result<(), CliError> {
    let start = Instant::now();
    let (config, declared_s) = read_scenario(config_path)?;
    let outcome = baseline_filter_run(&config)?;
    let record = build_record(
        "baseline",
        &config,
        declared_s,
        None,
        &outcome,
        elapsed_ms(start, out.timing),
    )?;
    emit(out, &to_json(&record))
}

/// Parses argv, dispatches, and returns the process exit code: 0 on
/// success, 2 on usage or config errors, 3 on invariant faults.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful terminations.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate { config, trace, verify, out } => {
            cmd_simulate(config, *trace, verify.as_deref(), out)
        }
        Command::Adversary { n, out } => cmd_adversary(*n, out),
        Command::Average { n, trials, seed, policy, rho_num, rho_den, out } => {
            cmd_average(*n, *trials, *seed, policy, *rho_num, *rho_den, out)
        }
        Command::Compare { n_list, trials, seed, out } => {
            cmd_compare(n_list, *trials, *seed, out)
        }
        Command::Bounds { config, format, out } => cmd_bounds(config, format, out),
        Command::Ringsize { config, out } => cmd_ringsize(config, out),
        Command::Baseline { config, out } => cmd_baseline(config, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "names": [2, 1],
        "tick_len": [1, 1],
        "link_delay": [0, 0],
        "wake": [{"pos": 0, "time": 0}],
        "policy": {"kind": "power2"}
    }"#;

    #[test]
    fn parse_minimal_scenario() {
        let (config, declared) = parse_scenario(MINIMAL).unwrap();
        assert_eq!(config.size(), 2);
        assert_eq!(declared, None);
        assert_eq!(config.policy, DelayPolicy::Power2);
    }

    #[test]
    fn parse_rejects_mismatched_lengths() {
        let text = MINIMAL.replace("\"tick_len\": [1, 1]", "\"tick_len\": [1]");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("tick_len"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn parse_rejects_broken_promise() {
        let text = MINIMAL
            .replace("\"tick_len\": [1, 1]", "\"tick_len\": [1, 1000]")
            .replace("\"policy\"", "\"declared_s\": 10, \"policy\"");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("asynchronicity"), "{err}");
    }

    #[test]
    fn parse_policy_kinds() {
        for (snippet, expect) in [
            (
                r#"{"kind": "scaled", "rho_num": 5, "rho_den": 2}"#,
                DelayPolicy::ScaledPower { rho_num: 5, rho_den: 2 },
            ),
            (r#"{"kind": "relative"}"#, DelayPolicy::Relative),
        ] {
            let text = MINIMAL.replace(r#"{"kind": "power2"}"#, snippet);
            let (config, _) = parse_scenario(&text).unwrap();
            assert_eq!(config.policy, expect);
        }
        let table = r#"{"kind": "table", "map": {"1": 2, "2": 4}}"#;
        let text = MINIMAL.replace(r#"{"kind": "power2"}"#, table);
        let (config, _) = parse_scenario(&text).unwrap();
        assert!(matches!(config.policy, DelayPolicy::Table(_)));
    }

    #[test]
    fn digest_is_stable_and_input_sensitive() {
        let (config, _) = parse_scenario(MINIMAL).unwrap();
        let a = scenario_digest(&config, None);
        let b = scenario_digest(&config, None);
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        let mut other = config.clone();
        other.link_delay[0] = 1;
        assert_ne!(a, scenario_digest(&other, None));
        assert_ne!(a, scenario_digest(&config, Some(1)));
    }

    #[test]
    fn scenario_round_trip() {
        let (config, _) = parse_scenario(MINIMAL).unwrap();
        let file = ScenarioFile::from_config(&config, Some(3));
        let text = serde_json::to_string(&file).unwrap();
        let (back, declared) = parse_scenario(&text).unwrap();
        assert_eq!(back, config);
        assert_eq!(declared, Some(3));
    }

    #[test]
    fn record_round_trip() {
        let (config, _) = parse_scenario(MINIMAL).unwrap();
        let outcome = crate::simulator::run_election(&config).unwrap();
        let record = build_record("simulate", &config, None, None, &outcome, None).unwrap();
        let json = serde_json::to_string(&record).unwrap();
        let back: ResultRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, record);
        assert!(record.flags["eq2_holds"]);
    }

    #[test]
    fn unknown_subcommand_exits_2() {
        assert_eq!(run_command(["ringelect", "frobnicate"]), 2);
        assert_eq!(run_command(["ringelect", "simulate", "--bogus-flag"]), 2);
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(run_command(["ringelect", "--help"]), 0);
    }
}
