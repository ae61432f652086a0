//! Command-line driver. Each subcommand is a thin adapter over a session
//! operation.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use causal_audit_core::chart::{render_svg, Dims};
use causal_audit_core::{Combo, EnvironmentOptions, Refinement};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::gateway::{
    Backend, Gateway, GatewayError, LiveBackend, ReplayBackend, ScriptedBackend, TranscriptStore, DEFAULT_BASE_URL,
};
use crate::ingest;
use crate::server::{self, AppState};
use crate::session::{self, ChartKind, SessionDir, SessionError, SessionOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_BACKEND: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "causal-audit", version, about = "Discover, audit and refine causal models with LLM commentary")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LlmChoice {
    Live,
    Replay,
    Scripted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    ChartData,
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Debate,
    Environment,
    Cm,
}

#[derive(Args, Debug, Clone)]
pub struct LlmArgs {
    /// Completion backend.
    #[arg(long, value_enum, default_value = "replay")]
    pub llm: LlmChoice,
    /// Transcript cache (line-delimited JSON).
    #[arg(long, default_value = "transcripts.ndlog")]
    pub cache: PathBuf,
    /// Script document for `--llm scripted`.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Model name; part of every transcript key.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = DEFAULT_BASE_URL)]
    pub base_url: String,
    /// Live request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub llm_timeout: u64,
    /// Prompts in flight at once.
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ingest a CSV and discover the version-0 graph.
    Discover {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Comma-separated subset of columns to discover over.
        #[arg(long)]
        columns: Option<String>,
        #[arg(long)]
        max_condition_size: Option<usize>,
        /// Session directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the ten-prompt debate for a pair.
    Audit {
        #[arg(long)]
        session: PathBuf,
        /// "name a,name b".
        #[arg(long)]
        pair: String,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the environment prompts for cause -> effect.
    Environment {
        #[arg(long)]
        session: PathBuf,
        /// "cause,effect".
        #[arg(long)]
        pair: String,
        /// Comma-separated combinations (general, higher-higher, ...); default all five.
        #[arg(long)]
        combos: Option<String>,
        #[arg(long, default_value = "county")]
        unit: String,
        /// Ask for a trailing "Rating: N" line.
        #[arg(long)]
        structured: bool,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit chart data or SVG for an audited pair.
    Charts {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        pair: String,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Environment chart combination; default general.
        #[arg(long)]
        combo: Option<Combo>,
        #[arg(long, value_enum, default_value = "chart-data")]
        format: OutputFormat,
        #[arg(long)]
        width: Option<i64>,
        #[arg(long)]
        height: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply one refinement and report the BIC change.
    Refine {
        #[arg(long)]
        session: PathBuf,
        /// Refinement as JSON, e.g. '{"op":"remove_edge","a":"x","b":"y"}'.
        #[arg(long, conflicts_with = "file", required_unless_present = "file")]
        refinement: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        expected_version: Option<u64>,
    },
    /// Accuracy statistics over rated queries.
    Stats {
        /// CSV with proposed_direction_correct, judged_correct, score.
        #[arg(long)]
        rows: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "sessions")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Built UI assets to host.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Session(SessionError::Gateway(_) | SessionError::IncompleteBattery { .. }) => EXIT_BACKEND,
            CliError::Gateway(GatewayError::AuthError(_) | GatewayError::InvalidRequest(_)) => EXIT_VALIDATION,
            CliError::Gateway(_) => EXIT_BACKEND,
            _ => EXIT_VALIDATION,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

/// Splits "a,b" at the first comma.
pub fn parse_pair(s: &str) -> Result<(String, String), CliError> {
    match s.split_once(',') {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim().into(), b.trim().into())),
        _ => Err(usage(format!("--pair expects \"name,name\", got {s:?}"))),
    }
}

fn parse_combos(s: &str) -> Result<Vec<Combo>, CliError> {
    s.split(',').map(|c| c.trim().parse::<Combo>().map_err(|e| usage(e.to_string()))).collect()
}

/// Builds the gateway selected by `args`.
pub fn build_gateway(args: &LlmArgs) -> Result<Gateway, CliError> {
    let (backend, model): (Arc<dyn Backend>, String) = match args.llm {
        LlmChoice::Live => {
            let live = LiveBackend::from_env(&args.base_url, Duration::from_secs(args.llm_timeout))?;
            (Arc::new(live), args.model.clone().unwrap_or_else(|| "gpt-4".into()))
        }
        LlmChoice::Scripted => {
            let path = args.script.as_ref().ok_or_else(|| usage("--llm scripted needs --script"))?;
            let scripted = ScriptedBackend::load(path)?;
            let model = args.model.clone().or_else(|| scripted.model().map(str::to_string)).unwrap_or("scripted".into());
            (Arc::new(scripted), model)
        }
        LlmChoice::Replay => {
            if !args.cache.is_file() {
                return Err(usage(format!("--llm replay needs an existing cache; {} not found", args.cache.display())));
            }
            (Arc::new(ReplayBackend), args.model.clone().unwrap_or_default())
        }
    };
    let store = TranscriptStore::open(&args.cache).map_err(io_err(&args.cache))?;
    let model = if model.is_empty() {
        let models = store.models();
        match models.len() {
            1 => models.into_iter().next().expect("one model"),
            0 => return Err(usage("transcript cache is empty")),
            _ => return Err(usage(format!("cache holds several models ({models:?}); pass --model"))),
        }
    } else {
        model
    };
    Ok(Gateway::new(backend, store, &model))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents serialize");
    s.push('\n');
    s
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            std::fs::write(p, text).map_err(io_err(p))
        }
        None => out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let stdout = Path::new("<stdout>");
    match cli.command {
        Command::Discover { data, alpha, columns, max_condition_size, out: dir } => {
            let bytes = ingest::read_file(&data).map_err(SessionError::from)?;
            let columns = columns.map(|c| c.split(',').map(|s| s.trim().to_string()).collect());
            let options = SessionOptions { alpha, columns, max_condition_size, id: None };
            let (session, _) = SessionDir::new(&dir).create(&bytes, &options)?;
            let g = session.current();
            let summary = serde_json::json!({
                "id": session.id,
                "session": dir,
                "variables": g.variables().len(),
                "edges": g.edges().len(),
                "directed": g.edges().iter().filter(|e| e.is_directed()).count(),
                "bic_total": session.bic_report(0)?.total,
                "warnings": session.discovery_warnings.len(),
            });
            emit(out, None, &json(&summary))
        }
        Command::Audit { session, pair, llm, out: path } => {
            let (a, b) = parse_pair(&pair)?;
            let gateway = build_gateway(&llm)?;
            let dir = SessionDir::new(&session);
            let (mut s, _) = dir.load()?;
            let result = s.audit_edge(&gateway, &a, &b, llm.parallelism)?;
            dir.save(&s)?;
            let v = &result.verdict;
            let line = format!(
                "verdict: winner={} sign={} consistent={}\n",
                serde_json::to_value(v.winner).expect("enum").as_str().unwrap_or_default(),
                serde_json::to_value(v.sign).expect("enum").as_str().unwrap_or_default(),
                v.consistency
            );
            emit(out, path.as_deref(), &json(&result))?;
            if path.is_some() {
                out.write_all(line.as_bytes()).map_err(io_err(stdout))?;
            } else {
                eprint!("{line}");
            }
            Ok(())
        }
        Command::Environment { session, pair, combos, unit, structured, llm, out: path } => {
            let (cause, effect) = parse_pair(&pair)?;
            let combos = match combos {
                Some(c) => parse_combos(&c)?,
                None => Combo::ALL.to_vec(),
            };
            let gateway = build_gateway(&llm)?;
            let dir = SessionDir::new(&session);
            let (mut s, _) = dir.load()?;
            let options = EnvironmentOptions { unit, structured_suffix: structured };
            let result = s.audit_environment(&gateway, &cause, &effect, &combos, &options, llm.parallelism)?;
            dir.save(&s)?;
            emit(out, path.as_deref(), &json(&result))
        }
        Command::Charts { session, pair, kind, combo, format, width, height, out: path } => {
            let (a, b) = parse_pair(&pair)?;
            let (s, _) = SessionDir::new(&session).load()?;
            let kind = match kind {
                KindArg::Debate => ChartKind::Debate,
                KindArg::Environment => ChartKind::Environment,
                KindArg::Cm => ChartKind::Cm,
            };
            let data = s.chart(kind, &a, &b, combo)?;
            let text = match format {
                OutputFormat::ChartData => json(&data),
                OutputFormat::Svg => {
                    let d = Dims::default();
                    let dims = Dims { width: width.unwrap_or(d.width), height: height.unwrap_or(d.height) };
                    render_svg(&data, dims).map_err(SessionError::from)?
                }
            };
            emit(out, path.as_deref(), &text)
        }
        Command::Refine { session, refinement, file, expected_version } => {
            let text = match (refinement, file) {
                (Some(t), _) => t,
                (None, Some(f)) => std::fs::read_to_string(&f).map_err(io_err(&f))?,
                (None, None) => return Err(usage("pass --refinement or --file")),
            };
            let r: Refinement = serde_json::from_str(&text).map_err(|e| usage(format!("invalid refinement: {e}")))?;
            let dir = SessionDir::new(&session);
            let (mut s, data) = dir.load()?;
            let outcome = s.apply_refinement(&data, &r, expected_version)?;
            dir.save(&s)?;
            emit(out, None, &json(&outcome))
        }
        Command::Stats { rows } => {
            let bytes = ingest::read_file(&rows).map_err(SessionError::from)?;
            let rows = ingest::read_accuracy_rows(&bytes).map_err(SessionError::from)?;
            emit(out, None, &json(&session::accuracy(&rows)?))
        }
        Command::Serve { data_dir, port, host, static_dir, llm } => {
            let gateway = Arc::new(build_gateway(&llm)?);
            let addr: SocketAddr =
                format!("{host}:{port}").parse().map_err(|e| usage(format!("bad listen address: {e}")))?;
            let state = Arc::new(AppState::new(&data_dir, gateway, llm.parallelism));
            let runtime = tokio::runtime::Runtime::new().map_err(io_err(Path::new("<runtime>")))?;
            runtime.block_on(server::serve(state, addr, static_dir)).map_err(io_err(&data_dir))
        }
    }
}

/// Parses `argv` and runs the subcommand. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind::*;
            let text = e.render().to_string();
            return match e.kind() {
                DisplayHelp | DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_VALIDATION
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
