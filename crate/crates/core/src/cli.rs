//! Command-line front end.
//!
//! Every option can come from a flag or from a flat `key = value` config file
//! (`--config`); flags override file values. List values are comma
//! separated. `--dump-config` prints the merged configuration in the same
//! format and exits without running anything.
//!
//! Exit codes: 0 success, 2 configuration error, 3 protocol failure (a stage
//! heralded nothing), 4 internal invariant violation.

use std::{
    collections::BTreeMap,
    fmt::Write as _,
    io::Write,
    path::PathBuf,
    str::FromStr,
};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::{
    analysis::{run_sweep, verify_basis, write_sweep_csv, SweepGrid},
    error::Error,
    herald::DetectorModel,
    protocol::{balanced_coeffs, generate, phased_coeffs, prepare_single_photon_qudit, target_state_pair, ProtocolSpec, TargetKind},
    state::{HybridState, NormMode},
};

pub const THREADS_ENV: &str = "QUBUS_FORGE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qubus-forge", version, about = "Heralded entangled-qudit generation with qubus circuits")]
struct Cli {
    /// Flat key = value configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the merged configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    /// Include the full output state in JSON results.
    #[arg(long, global = true)]
    dump_state: bool,
    /// json (default) or csv (sweep only).
    #[arg(long, global = true)]
    format: Option<String>,
    /// Write results to this path instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<CommandArgs>,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Prepare the balanced single-photon spatial qudit.
    Prepare(PrepareArgs),
    /// Run the full heralded generation protocol.
    Generate(GenerateArgs),
    /// Sweep the first-stage silent-error probability over (alpha, theta, eta).
    Sweep(SweepArgs),
    /// Check the maximally entangled two-qudit basis.
    VerifyBasis(PrepareArgs),
}

#[derive(Debug, Args)]
struct PrepareArgs {
    #[arg(long)]
    n: Option<String>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    m_parties: Option<String>,
    /// Comma-separated per-party offsets, first must be 0.
    #[arg(long)]
    shifts: Option<String>,
    #[arg(long)]
    balanced: bool,
    /// First party gets τ^{jm}/√n, the others 1/√n.
    #[arg(long)]
    balanced_phases: Option<String>,
    /// Parties separated by ';', entries by ',', each entry `re` or `re:im`.
    #[arg(long)]
    coeffs: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Detector efficiency; 1 selects the ideal PNND.
    #[arg(long)]
    eta: Option<String>,
    /// gram_exact (default) or orthogonal_approx.
    #[arg(long)]
    norm_mode: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    n: Option<String>,
}

/// One-line configuration diagnostic naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error in `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.to_string(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Prepare { n: usize },
    Generate(ProtocolSpec),
    Sweep(SweepGrid),
    VerifyBasis { n: usize },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare { .. } => "prepare",
            Command::Generate(_) => "generate",
            Command::Sweep(_) => "sweep",
            Command::VerifyBasis { .. } => "verify-basis",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub output: OutputFormat,
    pub dump_state: bool,
    pub out: Option<PathBuf>,
}

type KeyMap = BTreeMap<String, String>;

/// Parses the flat `key = value` format. `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<KeyMap, ConfigError> {
    let mut map = KeyMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(cfg_err(&format!("line {}", i + 1), format!("expected `key = value`, got `{line}`")));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(cfg_err(&format!("line {}", i + 1), "empty key"));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn parse_scalar<T: FromStr>(map: &KeyMap, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| cfg_err(key, format!("cannot parse `{v}`: {e}"))))
        .transpose()
}

fn parse_list<T: FromStr>(map: &KeyMap, key: &str) -> Result<Option<Vec<T>>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.split(',')
                .map(|item| {
                    let item = item.trim();
                    item.parse::<T>().map_err(|e| cfg_err(key, format!("cannot parse `{item}`: {e}")))
                })
                .collect()
        })
        .transpose()
}

fn parse_bool(map: &KeyMap, key: &str) -> Result<bool, ConfigError> {
    match map.get(key).map(String::as_str) {
        None | Some("false") | Some("0") => Ok(false),
        Some("true") | Some("1") | Some("") => Ok(true),
        Some(v) => Err(cfg_err(key, format!("expected true or false, got `{v}`"))),
    }
}

fn parse_complex(key: &str, s: &str) -> Result<C64, ConfigError> {
    let s = s.trim();
    let (re, im) = match s.split_once(':') {
        Some((re, im)) => (re, im),
        None => (s, "0"),
    };
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| cfg_err(key, format!("cannot parse `{s}`: {e}")));
    Ok(C64::new(p(re)?, p(im)?))
}

fn parse_coeffs(key: &str, s: &str) -> Result<Vec<Vec<C64>>, ConfigError> {
    s.split(';')
        .map(|party| party.split(',').map(|e| parse_complex(key, e)).collect())
        .collect()
}

fn format_complex(z: C64) -> String {
    if z.im == 0.0 { format!("{}", z.re) } else { format!("{}:{}", z.re, z.im) }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn require<T>(v: Option<T>, key: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| cfg_err(key, "required but missing"))
}

const PREPARE_KEYS: &[&str] = &["n"];
const GENERATE_KEYS: &[&str] =
    &["n", "m-parties", "shifts", "balanced", "balanced-phases", "coeffs", "theta", "alpha", "eta", "norm-mode"];
const SWEEP_KEYS: &[&str] = &["n", "alpha", "theta", "eta"];
const COMMON_KEYS: &[&str] = &["command", "format", "dump-state", "out"];

impl RunConfig {
    pub fn from_map(map: &KeyMap) -> Result<Self, ConfigError> {
        let command_name = require(map.get("command").cloned(), "command")?;
        let allowed: &[&str] = match command_name.as_str() {
            "prepare" | "verify-basis" => PREPARE_KEYS,
            "generate" => GENERATE_KEYS,
            "sweep" => SWEEP_KEYS,
            other => {
                return Err(cfg_err(
                    "command",
                    format!("unknown command `{other}` (expected prepare, generate, sweep or verify-basis)"),
                ))
            }
        };
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str()) && !COMMON_KEYS.contains(&k.as_str())) {
            return Err(cfg_err(k, format!("not a valid key for `{command_name}`")));
        }

        let command = match command_name.as_str() {
            "prepare" => Command::Prepare { n: require(parse_scalar(map, "n")?, "n")? },
            "verify-basis" => Command::VerifyBasis { n: require(parse_scalar(map, "n")?, "n")? },
            "generate" => Command::Generate(Self::protocol_from_map(map)?),
            _ => Command::Sweep(SweepGrid {
                alpha_values: require(parse_list(map, "alpha")?, "alpha")?,
                theta_values: require(parse_list(map, "theta")?, "theta")?,
                eta_values: parse_list(map, "eta")?.unwrap_or_else(|| vec![1.0]),
                n: parse_scalar(map, "n")?.unwrap_or(3),
            }),
        };

        let out: Option<PathBuf> = map.get("out").map(PathBuf::from);
        let output = match map.get("format").map(String::as_str) {
            None if matches!(command, Command::Sweep(_)) && out.is_some() => OutputFormat::Csv,
            None | Some("json") => OutputFormat::Json,
            Some("csv") => OutputFormat::Csv,
            Some(other) => return Err(cfg_err("format", format!("unknown format `{other}` (expected json or csv)"))),
        };
        if output == OutputFormat::Csv && !matches!(command, Command::Sweep(_)) {
            return Err(cfg_err("format", "csv output is only available for sweep"));
        }
        let cfg = RunConfig { command, output, dump_state: parse_bool(map, "dump-state")?, out };
        cfg.validate()?;
        Ok(cfg)
    }

    fn protocol_from_map(map: &KeyMap) -> Result<ProtocolSpec, ConfigError> {
        let n: usize = require(parse_scalar(map, "n")?, "n")?;
        if n < 2 {
            return Err(cfg_err("n", format!("dimension {n} < 2")));
        }
        let m_parties: Option<usize> = parse_scalar(map, "m-parties")?;
        let shifts: Vec<usize> = match (parse_list(map, "shifts")?, m_parties) {
            (Some(s), Some(m)) if s.len() != m => {
                return Err(cfg_err("shifts", format!("{} shifts given for {m} parties", s.len())))
            }
            (Some(s), _) => s,
            (None, Some(m)) => vec![0; m],
            (None, None) => vec![0; 2],
        };
        let parties = shifts.len();

        let balanced = parse_bool(map, "balanced")?;
        let phases: Option<usize> = parse_scalar(map, "balanced-phases")?;
        let explicit = map.get("coeffs");
        let chosen = usize::from(balanced) + usize::from(phases.is_some()) + usize::from(explicit.is_some());
        if chosen > 1 {
            return Err(cfg_err("coeffs", "choose only one of balanced, balanced-phases and coeffs"));
        }
        let coeffs = if let Some(text) = explicit {
            parse_coeffs("coeffs", text)?
        } else if let Some(m) = phases {
            if m >= n {
                return Err(cfg_err("balanced-phases", format!("phase index {m} not in [0, {}]", n - 1)));
            }
            let mut c = vec![balanced_coeffs(n); parties];
            if let Some(first) = c.first_mut() {
                *first = phased_coeffs(n, m);
            }
            c
        } else {
            vec![balanced_coeffs(n); parties]
        };

        let eta: f64 = parse_scalar(map, "eta")?.unwrap_or(1.0);
        let detector = if eta == 1.0 {
            DetectorModel::IdealPnnd
        } else {
            DetectorModel::on_off(eta).map_err(|e| cfg_err("eta", e.to_string()))?
        };
        let alpha = match map.get("alpha") {
            Some(v) => parse_complex("alpha", v)?,
            None => C64::new(500.0, 0.0),
        };
        let norm_mode = match map.get("norm-mode") {
            Some(v) => NormMode::from_str(v).map_err(|e| cfg_err("norm-mode", e))?,
            None => NormMode::GramExact,
        };
        Ok(ProtocolSpec {
            n,
            shifts,
            coeffs,
            theta: parse_scalar(map, "theta")?.unwrap_or(0.01),
            alpha,
            detector,
            norm_mode,
        })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let lib = |e: Error| match e {
            Error::InvalidParameter { field, reason } => cfg_err(field, reason),
            other => cfg_err("config", other.to_string()),
        };
        match &self.command {
            Command::Prepare { n } if *n < 1 => Err(cfg_err("n", "dimension must be at least 1")),
            Command::VerifyBasis { n } if !(2..=8).contains(n) => Err(cfg_err("n", format!("verify-basis supports 2 ≤ n ≤ 8, got {n}"))),
            Command::Generate(spec) => spec.validate().map_err(lib),
            Command::Sweep(grid) => grid.validate().map_err(lib),
            _ => Ok(()),
        }
    }

    /// Inverse of [`RunConfig::from_map`].
    pub fn to_map(&self) -> KeyMap {
        let mut map = KeyMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("command", self.command.name().to_string());
        match &self.command {
            Command::Prepare { n } | Command::VerifyBasis { n } => put("n", n.to_string()),
            Command::Generate(spec) => {
                put("n", spec.n.to_string());
                put("m-parties", spec.parties().to_string());
                put("shifts", join(&spec.shifts));
                put(
                    "coeffs",
                    spec.coeffs
                        .iter()
                        .map(|c| c.iter().copied().map(format_complex).collect::<Vec<_>>().join(","))
                        .collect::<Vec<_>>()
                        .join(";"),
                );
                put("theta", spec.theta.to_string());
                put("alpha", format_complex(spec.alpha));
                put("eta", spec.detector.efficiency().to_string());
                put("norm-mode", spec.norm_mode.as_str().to_string());
            }
            Command::Sweep(grid) => {
                put("n", grid.n.to_string());
                put("alpha", join(&grid.alpha_values));
                put("theta", join(&grid.theta_values));
                put("eta", join(&grid.eta_values));
            }
        }
        put("format", match self.output { OutputFormat::Json => "json", OutputFormat::Csv => "csv" }.to_string());
        put("dump-state", self.dump_state.to_string());
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        map
    }

    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_map() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Parses a config file's text into a [`RunConfig`].
pub fn parse_config_text(text: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_map(&parse_key_values(text)?)
}

fn flag_map(cli: &Cli) -> KeyMap {
    let mut map = KeyMap::new();
    let mut put = |k: &str, v: &Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v.clone());
        }
    };
    put("format", &cli.format);
    put("out", &cli.out.as_ref().map(|p| p.display().to_string()));
    match &cli.command {
        None => {}
        Some(CommandArgs::Prepare(a)) => {
            put("command", &Some("prepare".into()));
            put("n", &a.n);
        }
        Some(CommandArgs::VerifyBasis(a)) => {
            put("command", &Some("verify-basis".into()));
            put("n", &a.n);
        }
        Some(CommandArgs::Generate(a)) => {
            put("command", &Some("generate".into()));
            put("n", &a.n);
            put("m-parties", &a.m_parties);
            put("shifts", &a.shifts);
            put("balanced-phases", &a.balanced_phases);
            put("coeffs", &a.coeffs);
            put("theta", &a.theta);
            put("alpha", &a.alpha);
            put("eta", &a.eta);
            put("norm-mode", &a.norm_mode);
            if a.balanced {
                put("balanced", &Some("true".into()));
            }
        }
        Some(CommandArgs::Sweep(a)) => {
            put("command", &Some("sweep".into()));
            put("alpha", &a.alpha);
            put("theta", &a.theta);
            put("eta", &a.eta);
            put("n", &a.n);
        }
    }
    if cli.dump_state {
        map.insert("dump-state".into(), "true".into());
    }
    map
}

fn complex_pair(z: C64) -> Value {
    json!([z.re, z.im])
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() { json!(x) } else { Value::Null }
}

fn log10_or_null(p: f64) -> Value {
    if p > 0.0 { finite_or_null(p.log10()) } else { Value::Null }
}

fn prepare_json(n: usize, state: &HybridState, dump_state: bool) -> Result<Value, Error> {
    let amps: Vec<Value> = (0..n).map(|s| complex_pair(state.amplitude_of(&[s]))).collect();
    let mut v = json!({
        "command": "prepare",
        "n": n,
        "amplitudes": amps,
        "norm_sq": state.norm_sq()?,
    });
    if dump_state {
        v["state"] = state.to_json();
    }
    Ok(v)
}

fn generate_json(spec: &ProtocolSpec, dump_state: bool) -> Result<(Value, bool), Error> {
    let report = generate(spec)?;
    let stages: Vec<Value> = report
        .per_stage
        .iter()
        .map(|s| {
            json!({
                "party": s.party,
                "success_prob": s.success_prob,
                "error_prob": s.error_prob,
                "error_prob_log10": s.error_prob_log10,
                "branches": s.branch_table,
            })
        })
        .collect();
    let target = match report.target {
        TargetKind::Basis { m } => json!({ "kind": "basis", "m": m, "shifts": spec.shifts }),
        TargetKind::Ideal => json!({ "kind": "ideal" }),
    };
    let total_log10 = if report.error_prob_total > 1e-300 {
        finite_or_null(report.error_prob_total.log10())
    } else {
        let logs: Vec<f64> = report
            .per_stage
            .iter()
            .filter_map(|s| s.error_prob_log10.map(|l| l * std::f64::consts::LN_10))
            .collect();
        finite_or_null(crate::herald::log_sum_exp(logs) / std::f64::consts::LN_10)
    };
    let mut v = json!({
        "command": "generate",
        "n": spec.n,
        "m_parties": spec.parties(),
        "shifts": spec.shifts,
        "theta": spec.theta,
        "alpha": complex_pair(spec.alpha),
        "eta": spec.detector.efficiency(),
        "norm_mode": spec.norm_mode,
        "success_prob": report.success_prob,
        "success_prob_log10": log10_or_null(report.success_prob),
        "error_prob_total": report.error_prob_total,
        "error_prob_total_log10": total_log10,
        "fidelity": report.fidelity_vs_target,
        "target": target,
        "failed_stage": report.failed_stage,
        "stages": stages,
    });
    if dump_state {
        v["final_state"] = report.final_state.as_ref().map_or(Value::Null, HybridState::to_json);
    }
    Ok((v, report.failed_stage.is_none()))
}

fn verify_json(n: usize) -> Result<(Value, bool), Error> {
    let report = verify_basis(n)?;
    let mut states = Vec::new();
    for k in 0..n {
        for m in 0..n {
            let s = target_state_pair(n, m, k)?;
            let terms: Vec<Value> =
                s.terms().iter().map(|t| json!({ "labels": t.labels, "amp": complex_pair(t.amp) })).collect();
            states.push(json!({
                "m": m,
                "k": k,
                "kind": if k == 0 { "symmetric" } else { "asymmetric" },
                "terms": terms,
            }));
        }
    }
    let passed = report.passed;
    let mut v = serde_json::to_value(&report).expect("basis report serializes");
    v["command"] = json!("verify-basis");
    v["states"] = Value::Array(states);
    Ok((v, passed))
}

fn sweep_threads() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(cfg_err(THREADS_ENV, format!("expected a positive integer, got `{v}`"))),
        },
    }
}

enum Failure {
    Config(String),
    Protocol,
    Internal(String),
}

fn lib_failure(e: Error) -> Failure {
    match e {
        Error::InvalidParameter { .. } => Failure::Config(e.to_string()),
        other => Failure::Internal(other.to_string()),
    }
}

fn emit(cfg: &RunConfig, body: &[u8], stdout: &mut dyn Write) -> Result<(), Failure> {
    match &cfg.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::Config(format!("config error in `out`: cannot write {}: {e}", path.display()))),
        None => stdout.write_all(body).map_err(|e| Failure::Internal(format!("stdout: {e}"))),
    }
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

fn execute(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &cfg.command {
        Command::Prepare { n } => {
            let state = prepare_single_photon_qudit(*n).map_err(lib_failure)?;
            let v = prepare_json(*n, &state, cfg.dump_state).map_err(lib_failure)?;
            emit(cfg, &json_bytes(&v), stdout)
        }
        Command::Generate(spec) => {
            let (v, ok) = generate_json(spec, cfg.dump_state).map_err(lib_failure)?;
            emit(cfg, &json_bytes(&v), stdout)?;
            if ok { Ok(()) } else { Err(Failure::Protocol) }
        }
        Command::VerifyBasis { n } => {
            let (v, ok) = verify_json(*n).map_err(lib_failure)?;
            emit(cfg, &json_bytes(&v), stdout)?;
            if ok { Ok(()) } else { Err(Failure::Internal("basis verification failed".into())) }
        }
        Command::Sweep(grid) => {
            let threads = sweep_threads().map_err(|e| Failure::Config(e.to_string()))?;
            let rows = match threads {
                Some(k) => rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| Failure::Internal(format!("thread pool: {e}")))?
                    .install(|| run_sweep(grid)),
                None => run_sweep(grid),
            }
            .map_err(lib_failure)?;
            let body = match cfg.output {
                OutputFormat::Csv => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&rows, &mut buf).map_err(|e| Failure::Internal(format!("csv: {e}")))?;
                    buf
                }
                OutputFormat::Json => json_bytes(&json!({ "command": "sweep", "n": grid.n, "rows": rows })),
            };
            emit(cfg, &body, stdout)
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{line}");
            return EXIT_CONFIG;
        }
    };

    let mut map = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match parse_key_values(&text) {
                Ok(m) => m,
                Err(e) => {
                    let _ = writeln!(stderr, "{e}");
                    return EXIT_CONFIG;
                }
            },
            Err(e) => {
                let _ = writeln!(stderr, "config error in `config`: cannot read {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        },
        None => KeyMap::new(),
    };
    map.extend(flag_map(&cli));

    let cfg = match RunConfig::from_map(&map) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            return EXIT_CONFIG;
        }
    };
    if cli.dump_config {
        let _ = stdout.write_all(cfg.to_config_text().as_bytes());
        return EXIT_OK;
    }

    match execute(&cfg, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            let _ = writeln!(stderr, "{msg}");
            EXIT_CONFIG
        }
        Err(Failure::Protocol) => {
            let _ = writeln!(stderr, "protocol failure: a stage heralded no vacuum branch");
            EXIT_PROTOCOL
        }
        Err(Failure::Internal(msg)) => {
            let _ = writeln!(stderr, "internal error: {msg}");
            EXIT_INTERNAL
        }
    }
}
