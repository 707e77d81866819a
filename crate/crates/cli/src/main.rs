//! `crowdtone`: run the service, submit and poll emails, simulate crowds,
//! and check event logs.
//!
//! Machine-readable output is JSON on stdout; logs go to stderr. Exit code
//! 0 on success, 1 on a domain error (printed as `{"code", "message"}`), 2
//! on a usage error.

mod load;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crowdtone_api::{parse_token_file, AppState, Clock, HttpBackend, ManualClock, RunningServer, SystemClock};
use crowdtone_core::orchestrator::ResultView;
use crowdtone_core::provider::{run_simulation, run_simulation_on, Backend, BackendError, SimError};
use crowdtone_core::store::{self, StoreError};
use crowdtone_core::{Iterations, Orchestrator, OrchestratorError, PipelineConfig, QualificationPolicy, TaskId};
use serde::Serialize;
use serde_json::json;
use tracing::info;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "crowdtone", version, about = "Crowd-powered email tone improvement")]
struct Cli {
    /// Log filter for stderr, e.g. `info` or `crowdtone_core=debug`.
    #[arg(long, global = true, env = "CROWDTONE_LOG", default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Submit an email from a JSON file; prints its task id.
    Submit(SubmitArgs),
    /// Print an email's pipeline status.
    Status(QueryArgs),
    /// Print an email's result; fails with `result_pending` until complete.
    Result(QueryArgs),
    /// Run emails through simulated workers and write a report.
    Simulate(SimulateArgs),
    /// Replay a store's event log and check it against its snapshot.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum IterationsArg {
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

impl From<IterationsArg> for Iterations {
    fn from(v: IterationsArg) -> Self {
        match v {
            IterationsArg::Two => Iterations::Two,
            IterationsArg::Three => Iterations::Three,
        }
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "CROWDTONE_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for the event log and snapshots; in-memory when omitted.
    #[arg(long, env = "CROWDTONE_STORE")]
    store: Option<PathBuf>,
    /// Bearer tokens, one per line. Without it the service is open.
    #[arg(long, env = "CROWDTONE_TOKEN_FILE")]
    token_file: Option<PathBuf>,
    /// Origins allowed to call the service from a browser.
    #[arg(long, env = "CROWDTONE_CORS", value_delimiter = ',')]
    cors: Vec<String>,
    /// Default iteration setting for submissions that do not override it.
    #[arg(long, env = "CROWDTONE_ITERATIONS", default_value = "2")]
    iterations: IterationsArg,
    /// Write a snapshot every N events (0 disables).
    #[arg(long, env = "CROWDTONE_SNAPSHOT_EVERY", default_value_t = 1000)]
    snapshot_every: u64,
    /// Start a clock at 0 that only moves via `PUT /v1/admin/clock`.
    #[arg(long)]
    manual_clock: bool,
}

#[derive(Args)]
#[group(id = "target", required = true, multiple = false)]
struct Target {
    /// Base URL of a running service.
    #[arg(long, env = "CROWDTONE_URL", group = "target")]
    url: Option<String>,
    /// Store directory to operate on directly.
    #[arg(long, env = "CROWDTONE_STORE", group = "target")]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct SubmitArgs {
    #[arg(long)]
    file: PathBuf,
    #[arg(long, env = "CROWDTONE_ITERATIONS", default_value = "2")]
    iterations: IterationsArg,
    #[command(flatten)]
    target: Target,
    /// Bearer token file for `--url`.
    #[arg(long, env = "CROWDTONE_TOKEN_FILE")]
    token_file: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    task_id: String,
    #[command(flatten)]
    target: Target,
    /// Bearer token file for `--url`.
    #[arg(long, env = "CROWDTONE_TOKEN_FILE")]
    token_file: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Directory of email JSON files.
    #[arg(long, env = "CROWDTONE_EMAILS")]
    emails: PathBuf,
    /// Bot roster JSON.
    #[arg(long, env = "CROWDTONE_BOTS")]
    bots: PathBuf,
    #[arg(long, env = "CROWDTONE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "CROWDTONE_ITERATIONS", default_value = "2")]
    iterations: IterationsArg,
    /// Per-assignment deadline in milliseconds of simulated time.
    #[arg(long)]
    deadline_ms: Option<u64>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drive the run through the HTTP API instead of in-process.
    #[arg(long)]
    via_http: bool,
    /// Service to use with `--via-http`; it must run with `--manual-clock`.
    /// A private local service is started when omitted.
    #[arg(long, env = "CROWDTONE_URL", requires = "via_http")]
    url: Option<String>,
    #[arg(long, env = "CROWDTONE_TOKEN_FILE", requires = "via_http")]
    token_file: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long, env = "CROWDTONE_STORE")]
    store: PathBuf,
}

/// A failure reported to the caller with a stable code.
#[derive(Debug, Serialize)]
struct Failure {
    code: String,
    message: String,
}

impl Failure {
    fn new(code: &str, message: impl ToString) -> Self {
        Self {
            code: code.to_string(),
            message: message.to_string(),
        }
    }
}

impl From<OrchestratorError> for Failure {
    fn from(e: OrchestratorError) -> Self {
        let code = e.code().to_string();
        Failure::new(&code, e)
    }
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        Failure {
            code: e.code,
            message: e.message,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = e.code().to_string();
        Failure::new(&code, e)
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::Corrupt(_) => "corrupt_log",
            StoreError::SnapshotMismatch(_) => "snapshot_mismatch",
            StoreError::Parse { .. } => "store_parse_error",
            StoreError::Io(_) => "store_error",
        };
        Failure::new(code, e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::new("invalid_input", format!("{e:#}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new("io_error", e)
    }
}

type Outcome = Result<serde_json::Value, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    let outcome = match cli.command {
        Command::Serve(a) => serve(a),
        Command::Submit(a) => submit(a),
        Command::Status(a) => status(a),
        Command::Result(a) => result(a),
        Command::Simulate(a) => simulate(a),
        Command::Replay(a) => replay(a),
    };
    match outcome {
        Ok(v) if v.is_null() => ExitCode::SUCCESS,
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            println!("{}", serde_json::to_string_pretty(&f).expect("json"));
            ExitCode::from(1)
        }
    }
}

fn to_json(v: impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("output serializes")
}

fn read_token(path: Option<&Path>) -> Result<Option<String>, Failure> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path)?;
    Ok(parse_token_file(&text).into_iter().next())
}

fn open_store(dir: &Path) -> Result<Orchestrator, Failure> {
    Ok(Orchestrator::open(dir, QualificationPolicy::default(), 0)?)
}

fn serve(a: ServeArgs) -> Outcome {
    let orch = match &a.store {
        Some(dir) => Orchestrator::open(dir, QualificationPolicy::default(), a.snapshot_every)?,
        None => Orchestrator::default(),
    };
    let clock: Arc<dyn Clock> = if a.manual_clock {
        Arc::new(ManualClock::new(0))
    } else {
        Arc::new(SystemClock)
    };
    let mut state = AppState::new(orch, clock).with_default_config(PipelineConfig::with_iterations(a.iterations.into()));
    if let Some(path) = &a.token_file {
        let tokens = parse_token_file(&std::fs::read_to_string(path)?);
        if tokens.is_empty() {
            return Err(Failure::new("invalid_input", format!("no tokens in {}", path.display())));
        }
        state = state.with_tokens(tokens);
    }
    let state = Arc::new(state);

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr).await?;
        let addr = listener.local_addr()?;
        info!(%addr, "listening");
        eprintln!("crowdtone listening on http://{addr}");
        crowdtone_api::serve(listener, state.clone(), &a.cors, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    if a.store.is_some() {
        state.orchestrator().read().snapshot()?;
    }
    Ok(serde_json::Value::Null)
}

fn submit(a: SubmitArgs) -> Outcome {
    let email = load::email_file(&a.file)?;
    let config = PipelineConfig::with_iterations(a.iterations.into());
    let task_id = match (&a.target.url, &a.target.store) {
        (Some(url), _) => {
            let token = read_token(a.token_file.as_deref())?;
            let mut http = HttpBackend::new(url).with_token(token);
            http.submit(&email, &config, 0)?
        }
        (None, Some(dir)) => open_store(dir)?.submit(email, config, SystemClock.now())?,
        (None, None) => unreachable!("clap requires a target"),
    };
    Ok(json!({ "task_id": task_id }))
}

fn status(a: QueryArgs) -> Outcome {
    let task = TaskId::from(a.task_id);
    match (&a.target.url, &a.target.store) {
        (Some(url), _) => {
            let token = read_token(a.token_file.as_deref())?;
            Ok(to_json(HttpBackend::new(url).with_token(token).status(&task)?))
        }
        (_, Some(dir)) => Ok(to_json(open_store(dir)?.status(&task)?)),
        (None, None) => unreachable!("clap requires a target"),
    }
}

fn result(a: QueryArgs) -> Outcome {
    let task = TaskId::from(a.task_id);
    let pending = |state: &str| Failure::new("result_pending", format!("task {task} is {state}"));
    match (&a.target.url, &a.target.store) {
        (Some(url), _) => {
            let token = read_token(a.token_file.as_deref())?;
            let mut http = HttpBackend::new(url).with_token(token);
            match http.result(&task)? {
                Some(r) => Ok(to_json(r)),
                None => Err(pending(http.status(&task)?.state.label())),
            }
        }
        (_, Some(dir)) => match open_store(dir)?.result(&task)? {
            ResultView::Ready(r) => Ok(to_json(r)),
            ResultView::Pending(s) => Err(pending(s.state.label())),
        },
        (None, None) => unreachable!("clap requires a target"),
    }
}

fn simulate(a: SimulateArgs) -> Outcome {
    let emails = load::email_dir(&a.emails)?;
    let (bots, lexicons) = load::roster(&a.bots)?;
    let mut config = PipelineConfig::with_iterations(a.iterations.into());
    if let Some(ms) = a.deadline_ms {
        config.task_deadline_ms = ms;
    }

    let report = if a.via_http {
        let token = read_token(a.token_file.as_deref())?;
        let local;
        let url = match &a.url {
            Some(u) => u.clone(),
            None => {
                let state = AppState::new(Orchestrator::new(config.qualification.clone()), Arc::new(ManualClock::new(0)));
                local = RunningServer::start("127.0.0.1:0".parse().expect("addr"), Arc::new(state), vec![])?;
                local.base_url()
            }
        };
        let mut http = HttpBackend::new(&url).with_token(token).driving_clock();
        run_simulation_on(&mut http, &emails, &bots, &lexicons, &config, a.seed)?
    } else {
        run_simulation(&emails, &bots, &lexicons, &config, a.seed)?
    };

    match &a.out {
        Some(path) => {
            std::fs::write(path, report.to_json() + "\n")?;
            Ok(json!({
                "out": path,
                "emails": report.emails.len(),
                "complete": report.aggregate.complete,
                "failed": report.aggregate.failed,
            }))
        }
        None => Ok(to_json(&report)),
    }
}

fn replay(a: ReplayArgs) -> Outcome {
    if !a.store.join(store::EVENTS_FILE).exists() {
        return Err(Failure::new(
            "store_error",
            format!("no {} in {}", store::EVENTS_FILE, a.store.display()),
        ));
    }
    Ok(to_json(store::validate(&a.store)?))
}
