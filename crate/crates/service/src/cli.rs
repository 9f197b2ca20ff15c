//! Command-line subcommands. Each returns the process exit code.
//!
//! Exit codes: 0 success, 1 input error, 2 internal error, 3 (`inspect`
//! only) a critical readiness flag was raised.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::future::IntoFuture;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use readiness_core::federated::wire::{decode_frame, encode_frame, Envelope, Message};
use readiness_core::federated::{evaluate_local, ReadinessFlag};
use readiness_core::flsim::{exclusion_experiment, FedTrainConfig, SyntheticFedSpec, MIN_SEEDS};
use readiness_core::report::{canonical_json, render_html, render_json};
use readiness_core::{inspect, EvalConfig, MetricId};
use serde_json::json;
use thiserror::Error;
use tracing::info;

use crate::api::{router, router_with_limit, spawn_deadline_ticker, suppress_from_env, AppState};
use crate::store::{load_dataset, Store};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_INTERNAL: u8 = 2;
pub const EXIT_GATE: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "readiness", version, about = "Inspect tabular datasets for ML readiness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one CSV file and write reports.
    Inspect(InspectArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Host one federated run and write its report once it closes.
    FedCoordinator(CoordinatorArgs),
    /// Evaluate local data and submit the summary to a coordinator.
    FedClient(ClientArgs),
    /// Paired FedAvg experiment with and without flagged clients.
    Flsim(FlsimArgs),
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub csv: PathBuf,
    /// Metadata descriptor JSON for FAIR scoring.
    #[arg(long)]
    pub descriptor: Option<PathBuf>,
    /// Evaluation config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the HTML report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub positive_label: Option<String>,
    /// Comma-separated sensitive columns.
    #[arg(long, value_delimiter = ',')]
    pub sensitive: Vec<String>,
    /// Comma-separated quasi-identifier columns.
    #[arg(long, value_delimiter = ',')]
    pub qi: Vec<String>,
    /// Comma-separated metric ids; all applicable metrics by default.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Persist datasets and evaluations under this directory.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Request body cap in megabytes.
    #[arg(long, default_value_t = 50)]
    pub max_body_mb: usize,
}

#[derive(Debug, Args)]
pub struct CoordinatorArgs {
    /// Evaluation config JSON pushed to every client.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated expected client ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub expect: Vec<String>,
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long, default_value_t = 8090)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Close the run this many seconds after start even if clients are missing.
    #[arg(long)]
    pub deadline_secs: Option<u64>,
    /// Write the federated JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the federated HTML report here.
    #[arg(long)]
    pub html: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    /// Base URL, e.g. http://127.0.0.1:8090
    #[arg(long)]
    pub coordinator: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub client_id: String,
    /// Needed only when the coordinator hosts more than one open run.
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub descriptor: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlsimArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// First seed; seeds run from here upward.
    #[arg(long, default_value_t = 0)]
    pub seed_start: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Inspect(a) => cmd_inspect(&a),
        Command::Serve(a) => cmd_serve(a),
        Command::FedCoordinator(a) => cmd_coordinator(a),
        Command::FedClient(a) => cmd_client(&a),
        Command::Flsim(a) => cmd_flsim(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| internal(format!("cannot write {}: {e}", path.display())))
}

fn read_config(path: Option<&Path>) -> CliResult<EvalConfig> {
    match path {
        Some(p) => serde_json::from_slice(&read(p)?).map_err(|e| input(format!("invalid config {}: {e}", p.display()))),
        None => Ok(EvalConfig::default()),
    }
}

fn read_text(path: Option<&Path>) -> CliResult<Option<String>> {
    path.map(|p| String::from_utf8(read(p)?).map_err(|_| input(format!("{} is not UTF-8", p.display()))))
        .transpose()
}

/// Uploads through HTTP keep the client's file name, so the CLI uses the
/// bare file name too and both produce the same report.
fn source_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input.csv".into())
}

fn print_flags(flags: &[ReadinessFlag]) {
    for f in flags {
        let col = f.column.as_deref().map(|c| format!(" [{c}]")).unwrap_or_default();
        eprintln!("{:<8} {}{col}: {}", if f.is_critical() { "CRITICAL" } else { "WARN" }, f.code.as_str(), f.evidence);
    }
}

pub fn cmd_inspect(a: &InspectArgs) -> CliResult<u8> {
    let bytes = read(&a.csv)?;
    let descriptor = read_text(a.descriptor.as_deref())?;
    let (d, warnings) = load_dataset(&bytes, &source_name(&a.csv), descriptor.as_deref())
        .map_err(|e| input(format!("{}: {e}", a.csv.display())))?;
    for w in warnings {
        eprintln!("warning: descriptor: {w}");
    }
    let mut cfg = read_config(a.config.as_deref())?;
    if a.target.is_some() {
        cfg.roles.target = a.target.clone();
    }
    if a.positive_label.is_some() {
        cfg.roles.positive_label = a.positive_label.clone();
    }
    cfg.roles.sensitive.extend(a.sensitive.iter().cloned());
    cfg.roles.quasi_identifiers.extend(a.qi.iter().cloned());
    if !a.metrics.is_empty() {
        let ids = a
            .metrics
            .iter()
            .map(|m| serde_json::from_value::<MetricId>(json!(m)).map_err(|_| input(format!("unknown metric `{m}`"))))
            .collect::<CliResult<BTreeSet<_>>>()?;
        cfg.selected_metrics = Some(ids);
    }

    let report = inspect(&d, &cfg).map_err(input)?;
    let json_bytes = render_json(&report);
    if let Some(p) = &a.json {
        write(p, &json_bytes)?;
    }
    if let Some(p) = &a.out {
        write(p, &render_html(&report))?;
    }
    if a.json.is_none() && a.out.is_none() {
        std::io::stdout().write_all(&json_bytes).map_err(internal)?;
    }
    print_flags(&report.flags);
    Ok(if report.has_critical_flag() { EXIT_GATE } else { EXIT_OK })
}

fn runtime() -> CliResult<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(internal)
}

async fn bind(host: &str, port: u16) -> CliResult<tokio::net::TcpListener> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| input(format!("bad listen address {host}:{port}: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(internal)?;
    let local = listener.local_addr().map_err(internal)?;
    // Scripts and tests read the bound port from this line.
    println!("listening on http://{local}");
    std::io::stdout().flush().ok();
    Ok(listener)
}

pub fn cmd_serve(a: ServeArgs) -> CliResult<u8> {
    let store = match &a.data_dir {
        Some(dir) => Store::open(dir).map_err(input)?,
        None => Store::in_memory(),
    };
    let state = AppState::new(store);
    runtime()?.block_on(async move {
        let listener = bind(&a.host, a.port).await?;
        spawn_deadline_ticker(state.coordinator.clone());
        let app = router_with_limit(state, a.max_body_mb.saturating_mul(1024 * 1024));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                tokio::signal::ctrl_c().await.ok();
            })
            .await
            .map_err(internal)?;
        Ok(EXIT_OK)
    })
}

pub fn cmd_coordinator(a: CoordinatorArgs) -> CliResult<u8> {
    let mut cfg = read_config(a.config.as_deref())?;
    if let Some(id) = &a.run_id {
        cfg.run_id = id.clone();
    }
    cfg.validate().map_err(input)?;
    cfg.suppress_small_bins |= suppress_from_env();
    let expected: BTreeSet<String> = a.expect.iter().filter(|c| !c.is_empty()).cloned().collect();
    if expected.is_empty() {
        return Err(input("--expect needs at least one client id"));
    }
    let state = AppState::new(Store::in_memory());
    let deadline = a.deadline_secs.map(|s| Utc::now() + chrono::Duration::seconds(s as i64));
    state
        .coordinator
        .create_run(cfg.clone(), expected.clone(), deadline)
        .map_err(input)?;
    info!(run = %cfg.run_id, clients = expected.len(), "waiting for clients");

    let coordinator = state.coordinator.clone();
    let report = runtime()?.block_on(async move {
        let listener = bind(&a.host, a.port).await?;
        let (done_tx, done_rx) = tokio::sync::oneshot::channel();
        let server = tokio::spawn(
            axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    done_rx.await.ok();
                })
                .into_future(),
        );
        let report = loop {
            if let Ok(r) = coordinator.report(&cfg.run_id, Utc::now()) {
                break r;
            }
            tokio::time::sleep(Duration::from_millis(100)).await;
        };
        // Let the last client read its acknowledgement before shutting down.
        tokio::time::sleep(Duration::from_millis(300)).await;
        done_tx.send(()).ok();
        server.await.map_err(internal)?.map_err(internal)?;
        Ok::<_, CliError>(report)
    })?;

    if let Some(p) = &a.out {
        write(p, &canonical_json(&report))?;
    }
    if let Some(p) = &a.html {
        write(p, &render_html(&report.to_readiness_report()))?;
    }
    print_flags(&report.flag_roster);
    println!(
        "run {} closed: {} reported, {} missing, exclusion candidates: [{}]",
        report.run_id,
        report.per_client.len(),
        report.missing_clients.len(),
        report.exclusion_candidates.join(", ")
    );
    Ok(EXIT_OK)
}

fn exchange(http: &reqwest::blocking::Client, base: &str, msg: Message) -> CliResult<Message> {
    let resp = http
        .post(format!("{base}/fed/frames"))
        .header(reqwest::header::CONTENT_TYPE, "application/octet-stream")
        .body(encode_frame(&Envelope::new(msg)))
        .send()
        .map_err(|e| internal(format!("coordinator unreachable: {e}")))?;
    let bytes = resp.bytes().map_err(internal)?;
    let (env, _) = decode_frame(&bytes).map_err(|e| internal(format!("bad reply frame: {e}")))?;
    match env.message {
        Message::Error { code, message } => Err(input(format!("coordinator refused ({code}): {message}"))),
        m => Ok(m),
    }
}

fn pick_run(http: &reqwest::blocking::Client, base: &str) -> CliResult<String> {
    let runs: Vec<serde_json::Value> = http
        .get(format!("{base}/fed/runs"))
        .send()
        .and_then(|r| r.error_for_status())
        .map_err(|e| internal(format!("coordinator unreachable: {e}")))?
        .bytes()
        .map_err(internal)
        .and_then(|b| serde_json::from_slice(&b).map_err(internal))?;
    let open: Vec<String> = runs
        .iter()
        .filter(|r| r["closed"] == json!(false))
        .filter_map(|r| r["run_id"].as_str().map(str::to_string))
        .collect();
    match open.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(input("coordinator has no open run")),
        _ => Err(input(format!("several open runs ({}); pass --run-id", open.join(", ")))),
    }
}

pub fn cmd_client(a: &ClientArgs) -> CliResult<u8> {
    let base = a.coordinator.trim_end_matches('/');
    let bytes = read(&a.data)?;
    let descriptor = read_text(a.descriptor.as_deref())?;
    let (d, _) = load_dataset(&bytes, &source_name(&a.data), descriptor.as_deref())
        .map_err(|e| input(format!("{}: {e}", a.data.display())))?;
    let http = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(120))
        .build()
        .map_err(internal)?;
    let run_id = match &a.run_id {
        Some(r) => r.clone(),
        None => pick_run(&http, base)?,
    };
    let hello = Message::Hello {
        run_id: run_id.clone(),
        client_id: a.client_id.clone(),
    };
    let mut cfg = match exchange(&http, base, hello)? {
        Message::ConfigPush { config, .. } => config,
        Message::ReportReady { run_id } => return Err(input(format!("run {run_id} has already closed"))),
        other => return Err(internal(format!("unexpected reply {}", other.kind()))),
    };
    cfg.suppress_small_bins |= suppress_from_env();
    let summary = evaluate_local(&d, &cfg, &a.client_id).map_err(input)?;
    print_flags(&summary.flags);
    match exchange(&http, base, Message::SummarySubmit { summary })? {
        Message::Ack { replaced, run_closed, .. } => {
            println!(
                "submitted {} to run {run_id}{}{}",
                a.client_id,
                if replaced { " (replaced earlier summary)" } else { "" },
                if run_closed { "; run closed" } else { "" }
            );
            Ok(EXIT_OK)
        }
        other => Err(internal(format!("unexpected reply {}", other.kind()))),
    }
}

pub fn cmd_flsim(a: &FlsimArgs) -> CliResult<u8> {
    if (a.seeds as usize) < MIN_SEEDS {
        return Err(input(format!("--seeds must be at least {MIN_SEEDS}")));
    }
    let seeds: Vec<u64> = (a.seed_start..a.seed_start + a.seeds).collect();
    let (spec, train, eval) = (SyntheticFedSpec::default(), FedTrainConfig::default(), EvalConfig::default());
    let outcome = exclusion_experiment(&spec, &train, &eval, &seeds).map_err(internal)?;
    let body = canonical_json(&json!({
        "spec": spec,
        "train_config": train,
        "seeds": seeds,
        "trials": outcome.trials,
        "mean_acc_all": outcome.mean_acc_all,
        "mean_acc_excluded": outcome.mean_acc_excluded,
        "mean_difference": outcome.mean_difference(),
    }));
    match &a.out {
        Some(p) => write(p, &body)?,
        None => std::io::stdout().write_all(&body).map_err(internal)?,
    }
    eprintln!(
        "{} seeds: all clients {:.4}, flagged excluded {:.4}, difference {:+.4}",
        seeds.len(),
        outcome.mean_acc_all,
        outcome.mean_acc_excluded,
        outcome.mean_difference()
    );
    Ok(EXIT_OK)
}
