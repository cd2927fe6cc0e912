//! `hpndss`: validate, simulate, analyze and compose nets from the shell.
//!
//! Results go to stdout as one JSON document (or CSV for `export`);
//! diagnostics go to stderr. Exit codes: 0 success, 1 validation failure,
//! 2 simulation or analysis error, 3 I/O or schema error.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use hpn_core::document::{from_json, net_from_json, net_to_json, scenario_from_json, to_json};
use hpn_core::dss::{analyze, AnalysisRequest, DssError};
use hpn_core::repository::{RepoError, Repository};
use hpn_core::{
    compose, simulate, validate, ComposeError, Exact, Fusion, HybridNet, Id, Outcome, ScenarioConfig,
    SimulationError, Trace, Violation,
};

#[derive(Parser)]
#[command(name = "hpndss", version, about = "Hybrid Petri net simulation and decision support")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where to find the net a scenario or request refers to.
#[derive(clap::Args)]
struct NetSource {
    /// Net document; defaults to `<net>.json` next to the input file.
    #[arg(long)]
    net: Option<PathBuf>,
    /// Load the net from this repository instead.
    #[arg(long, env = "HPNDSS_REPO")]
    repo: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a net document against the structural rules.
    Validate { net: PathBuf },
    /// Simulate a scenario and print the trace with its delivery time.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        source: NetSource,
        /// Also write the trace as CSV.
        #[arg(long, value_name = "OUT.csv")]
        trace: Option<PathBuf>,
    },
    /// Run the decision loop for an analysis request.
    Analyze {
        request: PathBuf,
        #[command(flatten)]
        source: NetSource,
        /// Also write the report to a file.
        #[arg(long, value_name = "OUT.json")]
        report: Option<PathBuf>,
    },
    /// Fuse nets into one; model names come from each net's `name`.
    Compose {
        #[arg(required = true)]
        nets: Vec<PathBuf>,
        /// `model.element=model.element`, repeatable.
        #[arg(long = "fuse", value_name = "A=B")]
        fusions: Vec<String>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "HPNDSS_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, env = "HPNDSS_REPO", default_value = "hpndss-repo")]
        repo: PathBuf,
    },
    /// Print a stored trace as CSV.
    Export {
        trace_id: String,
        #[arg(long, env = "HPNDSS_REPO", default_value = "hpndss-repo")]
        repo: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
    violations: Vec<Violation>,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
            violations: Vec::new(),
        }
    }

    fn invalid(violations: Vec<Violation>) -> Self {
        Failure {
            code: 1,
            message: format!("{} violations", violations.len()),
            violations,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new(3, format!("{}: {e}", path.display()))
    }
}

impl From<RepoError> for Failure {
    fn from(e: RepoError) -> Self {
        match e {
            RepoError::Invalid(v) => Failure::invalid(v),
            other => Failure::new(3, other.to_string()),
        }
    }
}

impl From<SimulationError> for Failure {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::InvalidNet(v) => Failure::invalid(v),
            SimulationError::Scenario(e) => Failure::new(1, e.to_string()),
            other => Failure::new(2, format!("{}: {other}", other.kind())),
        }
    }
}

impl From<DssError> for Failure {
    fn from(e: DssError) -> Self {
        match e {
            DssError::InvalidNet(v) => Failure::invalid(v),
            other => Failure::new(1, other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn schema<T>(path: &Path, parsed: Result<T, hpn_core::SchemaError>) -> CliResult<T> {
    parsed.map_err(|e| Failure::new(3, format!("{}: {e}", path.display())))
}

fn load_net(path: &Path) -> CliResult<HybridNet> {
    schema(path, net_from_json(&read(path)?))
}

fn resolve_net(source: &NetSource, input: &Path, name: &Id) -> CliResult<HybridNet> {
    if let Some(path) = &source.net {
        return load_net(path);
    }
    if let Some(repo) = &source.repo {
        return Ok(Repository::open(repo)?.get_model(name)?);
    }
    let beside = input.parent().unwrap_or(Path::new(".")).join(format!("{name}.json"));
    if !beside.exists() {
        return Err(Failure::new(
            3,
            format!("net `{name}` not found: pass --net or --repo, or put {} next to the input", beside.display()),
        ));
    }
    load_net(&beside)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Validation {
    net: Id,
    valid: bool,
    violations: Vec<Violation>,
}

fn cmd_validate(path: &Path) -> CliResult<String> {
    let net = load_net(path)?;
    let v = validate(&net);
    if !v.is_ok() {
        return Err(Failure::invalid(v.violations));
    }
    Ok(to_json(&Validation {
        net: net.name,
        valid: true,
        violations: Vec::new(),
    }))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimulationSummary {
    scenario: Id,
    outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    delivery_time: Option<f64>,
    /// The delivery time from a rerun in exact rational arithmetic.
    #[serde(skip_serializing_if = "Option::is_none")]
    delivery_time_exact: Option<String>,
    phases: usize,
    trace: Trace,
}

fn outcome_name<S>(outcome: &Outcome<S>) -> &'static str {
    match outcome {
        Outcome::Delivered { .. } => "delivered",
        Outcome::DeadlineMissed => "deadlineMissed",
        Outcome::HorizonReached => "horizonReached",
        Outcome::Error { .. } => "error",
    }
}

fn exact_delivery(net: &HybridNet, scenario: &ScenarioConfig) -> Option<String> {
    let trace = simulate::<Exact>(net, scenario).ok()?;
    trace.outcome.delivered_at().map(|t| t.to_string())
}

fn cmd_simulate(path: &Path, source: &NetSource, csv: Option<&Path>) -> CliResult<String> {
    let scenario: ScenarioConfig = schema(path, scenario_from_json(&read(path)?))?;
    let net = resolve_net(source, path, &scenario.net)?;
    let trace = simulate::<f64>(&net, &scenario)?;
    if let Some(out) = csv {
        write(out, &hpn_core::trace_csv(&trace))?;
    }
    let delivery_time = trace.outcome.delivered_at().copied();
    let delivery_time_exact = delivery_time.and_then(|_| exact_delivery(&net, &scenario));
    match (&delivery_time, &delivery_time_exact) {
        (Some(t), Some(q)) => eprintln!("{}: delivered at {t} ({q})", scenario.id),
        (Some(t), None) => eprintln!("{}: delivered at {t}", scenario.id),
        _ => eprintln!("{}: {}", scenario.id, outcome_name(&trace.outcome)),
    }
    Ok(to_json(&SimulationSummary {
        scenario: scenario.id.clone(),
        outcome: outcome_name(&trace.outcome),
        delivery_time,
        delivery_time_exact,
        phases: trace.phases.len(),
        trace,
    }))
}

fn cmd_analyze(path: &Path, source: &NetSource, out: Option<&Path>) -> CliResult<String> {
    let request: AnalysisRequest = schema(path, from_json(&read(path)?))?;
    let net = resolve_net(source, path, &request.net)?;
    let analysis = analyze(&net, &request)?;
    let report = match &source.repo {
        Some(repo) => Repository::open(repo)?.put_report(&analysis, &[])?,
        None => analysis.report,
    };
    for a in &report.attempts {
        let time = a.delivery_time.map_or("-".into(), |t| format!("{t:.2}"));
        let verdict = if a.meets_deadline { "meets" } else { "misses" };
        eprintln!("{time:>10}  {verdict:<6}  {}", a.configuration.summary());
    }
    match report.selected_attempt() {
        Some(a) => {
            let exact = exact_delivery(&net, &a.configuration.apply(&request.scenario));
            eprintln!("selected: {} ({})", a.configuration.summary(), exact.unwrap_or_default());
        }
        None => eprintln!("nothing meets the deadline ({:?})", report.stopped_because),
    }
    let text = to_json(&report);
    if let Some(out) = out {
        write(out, &text)?;
    }
    Ok(text)
}

fn cmd_compose(paths: &[PathBuf], fusions: &[String]) -> CliResult<String> {
    let nets = paths.iter().map(|p| load_net(p)).collect::<CliResult<Vec<_>>>()?;
    let fusions = fusions
        .iter()
        .map(|f| f.parse::<Fusion>().map_err(|e| Failure::new(3, e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    match compose(&nets, &fusions) {
        Ok(net) => Ok(net_to_json(&net)),
        Err(ComposeError::Invalid(v)) => Err(Failure::invalid(v)),
        Err(e) => Err(Failure::new(1, e.to_string())),
    }
}

fn cmd_serve(addr: SocketAddr, repo: PathBuf) -> CliResult<String> {
    let workers = std::thread::available_parallelism().map_or(2, |n| n.get());
    let config = hpn_service::Config { addr, repo, workers };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(3, e.to_string()))?;
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(hpn_service::serve(config))
        .map_err(|e| Failure::new(3, e.to_string()))?;
    Ok(String::new())
}

fn cmd_export(id: &str, repo: &Path) -> CliResult<String> {
    Ok(Repository::open(repo)?.get_trace_csv(&Id::new(id))?)
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Validate { net } => cmd_validate(&net),
        Command::Simulate { scenario, source, trace } => cmd_simulate(&scenario, &source, trace.as_deref()),
        Command::Analyze { request, source, report } => cmd_analyze(&request, &source, report.as_deref()),
        Command::Compose { nets, fusions } => cmd_compose(&nets, &fusions),
        Command::Serve { addr, repo } => cmd_serve(addr, repo),
        Command::Export { trace_id, repo } => cmd_export(&trace_id, &repo),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            for v in &f.violations {
                eprintln!("  {v}");
            }
            if !f.violations.is_empty() {
                print!(
                    "{}",
                    to_json(&serde_json::json!({ "valid": false, "violations": f.violations }))
                );
            }
            ExitCode::from(f.code)
        }
    }
}
