//! Audit sessions: discovery, per-pair LLM audits, refinements with BIC
//! deltas, and their on-disk form.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use causal_audit_core::chart::{
    build_cm_chart, build_debate_chart, build_environment_chart, judge_dominance, ChartData, ChartError,
    DominanceVerdict, Winner,
};
use causal_audit_core::text::normalize_label;
use causal_audit_core::{
    accuracy_report, bic_graph, extract_rating, parse_environment, pc_discover_columns, render_debate,
    render_environment, replay, AccuracyError, AccuracyReport, AccuracyRow, BicReport, CausalGraph, Combo, Dataset,
    EnvironmentOptions, EnvironmentResult, GraphError, ParserConfig, PcOptions, PromptError, Refinement, RefinementOp,
    RelationRating, RenderedPrompt,
};
use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError};
use crate::ingest::{self, IngestError};

pub const SESSION_FILE: &str = "session.json";
pub const DATASET_FILE: &str = "dataset.csv";
pub const SESSION_SCHEMA: u32 = 1;
/// A battery with more failed prompts than this is rejected.
pub const MAX_FAILED_PROMPTS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("session document is invalid: {0}")]
    Corrupt(String),
    #[error("dataset digest {actual} does not match the session's {expected}")]
    FingerprintMismatch { expected: String, actual: String },
    #[error("alpha {0} must lie in (0, 1)")]
    InvalidAlpha(f64),
    #[error("dataset has no column {0:?}")]
    UnknownColumn(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error("{failed} of {total} prompts failed")]
    IncompleteBattery { failed: usize, total: usize, failures: Vec<PromptFailure> },
    #[error("expected version {expected} but the session is at version {current}")]
    VersionConflict { expected: u64, current: u64 },
    #[error("no graph version {0}")]
    NoSuchVersion(u64),
    #[error("no audit results for {0}")]
    NoSuchAudit(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Accuracy(#[from] AccuracyError),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io { path: path.display().to_string(), source }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionOptions {
    pub alpha: f64,
    /// Columns handed to discovery, by name; `None` uses all of them.
    pub columns: Option<Vec<String>>,
    pub max_condition_size: Option<usize>,
    /// Overrides the content-derived id.
    pub id: Option<String>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions { alpha: 0.05, columns: None, max_condition_size: None, id: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub rows: usize,
    pub columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementEntry {
    pub refinement: Refinement,
    /// UTC seconds.
    pub timestamp: u64,
    pub resulting_version: u64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptFailure {
    pub prompt: String,
    pub error: GatewayError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DebateResult {
    pub a: String,
    pub b: String,
    /// All ten prompts in battery order; failed prompts carry no score.
    pub ratings: Vec<RelationRating>,
    pub verdict: DominanceVerdict,
    /// Parallel to `ratings`.
    pub transcript_keys: Vec<Option<String>>,
    pub failures: Vec<PromptFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentAudit {
    pub cause: String,
    pub effect: String,
    /// Successful prompts, in combination order.
    pub results: Vec<EnvironmentResult>,
    /// Parallel to `results`.
    pub transcript_keys: Vec<String>,
    pub failures: Vec<PromptFailure>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeAudit {
    pub debate: Option<DebateResult>,
    /// Keyed by `cause -> effect`.
    pub environment: BTreeMap<String, EnvironmentAudit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementOutcome {
    pub version: u64,
    pub bic: BicReport,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Debate,
    Environment,
    Cm,
}

impl FromStr for ChartKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "debate" => Ok(ChartKind::Debate),
            "environment" => Ok(ChartKind::Environment),
            "cm" => Ok(ChartKind::Cm),
            other => Err(format!("unknown chart kind {other:?} (debate, environment, cm)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSession {
    pub schema_version: u32,
    pub id: String,
    pub fingerprint: String,
    pub dataset: DatasetInfo,
    pub alpha: f64,
    pub discovery_columns: Vec<usize>,
    pub discovery_warnings: Vec<String>,
    pub versions: Vec<CausalGraph>,
    pub refinements: Vec<RefinementEntry>,
    /// Keyed by the unordered pair.
    pub audits: BTreeMap<String, EdgeAudit>,
    pub bic: BTreeMap<u64, BicReport>,
    pub column_bindings: BTreeMap<String, usize>,
}

fn pair_key(a: &str, b: &str) -> String {
    let (a, b) = (normalize_label(a), normalize_label(b));
    if a <= b {
        format!("{a} | {b}")
    } else {
        format!("{b} | {a}")
    }
}

fn direction_key(cause: &str, effect: &str) -> String {
    format!("{} -> {}", normalize_label(cause), normalize_label(effect))
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Discovers version 0 over the selected columns and scores it.
pub fn create_session(data: &Dataset, fingerprint: &str, options: &SessionOptions) -> Result<AuditSession, SessionError> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(SessionError::InvalidAlpha(options.alpha));
    }
    let columns: Vec<usize> = match &options.columns {
        None => (0..data.n_cols()).collect(),
        Some(names) => names
            .iter()
            .map(|n| data.column_index(n).ok_or_else(|| SessionError::UnknownColumn(n.clone())))
            .collect::<Result<_, _>>()?,
    };
    let pc = PcOptions { alpha: options.alpha, max_condition_size: options.max_condition_size };
    let discovery = pc_discover_columns(data, &columns, &pc);
    let graph = discovery.graph;
    let id = options.id.clone().unwrap_or_else(|| {
        let seed = format!("{fingerprint}|{}|{columns:?}|{:?}", options.alpha, options.max_condition_size);
        ingest::sha256_hex(seed.as_bytes())[..16].to_string()
    });
    let column_bindings =
        graph.variables().iter().filter_map(|v| v.column.map(|c| (normalize_label(&v.name), c))).collect();
    let mut bic = BTreeMap::new();
    bic.insert(0, bic_graph(data, &graph));
    Ok(AuditSession {
        schema_version: SESSION_SCHEMA,
        id,
        fingerprint: fingerprint.to_string(),
        dataset: DatasetInfo { rows: data.n_rows(), columns: data.names().to_vec() },
        alpha: options.alpha,
        discovery_columns: columns,
        discovery_warnings: discovery
            .warnings
            .iter()
            .map(|w| format!("{} ~ {} | {:?}: {}", w.x, w.y, w.conditioning, w.problem))
            .collect(),
        versions: vec![graph],
        refinements: Vec::new(),
        audits: BTreeMap::new(),
        bic,
        column_bindings,
    })
}

/// Outcome of running a list of prompts: per-prompt texts or failures.
struct BatteryRun {
    texts: Vec<Option<(String, String)>>,
    failures: Vec<PromptFailure>,
}

fn run_battery(
    gateway: &Gateway,
    prompts: &[RenderedPrompt],
    parallelism: usize,
    tolerated: usize,
) -> Result<BatteryRun, SessionError> {
    let reqs: Vec<_> = prompts.iter().map(|p| gateway.request(p.clone())).collect();
    let mut texts = Vec::with_capacity(prompts.len());
    let mut failures = Vec::new();
    for item in gateway.run_batch(&reqs, parallelism) {
        match item.result {
            Ok(c) => texts.push(Some((c.key, c.text))),
            Err(error) => {
                texts.push(None);
                failures.push(PromptFailure { prompt: item.id.key(), error });
            }
        }
    }
    if !prompts.is_empty() && failures.len() == prompts.len() {
        return Err(SessionError::Gateway(failures.swap_remove(0).error));
    }
    if failures.len() > tolerated {
        return Err(SessionError::IncompleteBattery { failed: failures.len(), total: prompts.len(), failures });
    }
    Ok(BatteryRun { texts, failures })
}

impl AuditSession {
    pub fn current(&self) -> &CausalGraph {
        self.versions.last().expect("sessions always hold version 0")
    }

    pub fn current_version(&self) -> u64 {
        self.current().version()
    }

    pub fn graph(&self, version: u64) -> Result<&CausalGraph, SessionError> {
        usize::try_from(version).ok().and_then(|v| self.versions.get(v)).ok_or(SessionError::NoSuchVersion(version))
    }

    pub fn bic_report(&self, version: u64) -> Result<&BicReport, SessionError> {
        self.bic.get(&version).ok_or(SessionError::NoSuchVersion(version))
    }

    fn variable_name(&self, name: &str) -> Result<String, SessionError> {
        let g = self.current();
        Ok(g.name(g.require(name)?).to_string())
    }

    /// Runs the ten-prompt debate for `a` and `b` and stores the result.
    /// The pair need not be adjacent.
    pub fn audit_edge(
        &mut self,
        gateway: &Gateway,
        a: &str,
        b: &str,
        parallelism: usize,
    ) -> Result<DebateResult, SessionError> {
        let (a, b) = (self.variable_name(a)?, self.variable_name(b)?);
        if normalize_label(&a) == normalize_label(&b) {
            return Err(GraphError::SelfLoop(a).into());
        }
        let set = render_debate(&a, &b)?;
        let run = run_battery(gateway, &set.prompts, parallelism, MAX_FAILED_PROMPTS)?;
        let mut ratings = Vec::with_capacity(set.prompts.len());
        let mut keys = Vec::with_capacity(set.prompts.len());
        for (p, t) in set.prompts.iter().zip(run.texts) {
            match t {
                Some((key, text)) => {
                    ratings.push(extract_rating(p.id.clone(), &text));
                    keys.push(Some(key));
                }
                None => {
                    ratings.push(RelationRating { prompt_id: p.id.clone(), score: None, justification: None, raw: String::new() });
                    keys.push(None);
                }
            }
        }
        let verdict = judge_dominance(&build_debate_chart(&a, &b, &ratings)?);
        let result = DebateResult { a: a.clone(), b: b.clone(), ratings, verdict, transcript_keys: keys, failures: run.failures };
        self.audits.entry(pair_key(&a, &b)).or_default().debate = Some(result.clone());
        Ok(result)
    }

    /// Direction suggested by a stored debate for the pair: the winning side
    /// as cause, otherwise `(a, b)` as given.
    pub fn suggested_direction(&self, a: &str, b: &str) -> (String, String) {
        let debate = self.audits.get(&pair_key(a, b)).and_then(|e| e.debate.as_ref());
        match debate {
            Some(d) if d.verdict.winner == Winner::LeftCauses => (d.a.clone(), d.b.clone()),
            Some(d) if d.verdict.winner == Winner::RightCauses => (d.b.clone(), d.a.clone()),
            _ => (a.to_string(), b.to_string()),
        }
    }

    /// Runs the environment prompts of `combos` for `cause -> effect`.
    /// Results replace earlier ones for the same combinations.
    pub fn audit_environment(
        &mut self,
        gateway: &Gateway,
        cause: &str,
        effect: &str,
        combos: &[Combo],
        options: &EnvironmentOptions,
        parallelism: usize,
    ) -> Result<EnvironmentAudit, SessionError> {
        let (cause, effect) = (self.variable_name(cause)?, self.variable_name(effect)?);
        if normalize_label(&cause) == normalize_label(&effect) {
            return Err(GraphError::SelfLoop(cause).into());
        }
        let mut wanted: Vec<Combo> = Combo::ALL.iter().copied().filter(|c| combos.contains(c)).collect();
        if wanted.is_empty() {
            wanted = Combo::ALL.to_vec();
        }
        let prompts: Vec<RenderedPrompt> =
            wanted.iter().map(|&c| render_environment(&cause, &effect, c, options)).collect::<Result<_, _>>()?;
        let run = run_battery(gateway, &prompts, parallelism, MAX_FAILED_PROMPTS)?;
        let config = ParserConfig::default();
        let edge = self.audits.entry(pair_key(&cause, &effect)).or_default();
        let entry = edge.environment.entry(direction_key(&cause, &effect)).or_insert_with(|| EnvironmentAudit {
            cause: cause.clone(),
            effect: effect.clone(),
            results: Vec::new(),
            transcript_keys: Vec::new(),
            failures: Vec::new(),
        });
        let mut merged: BTreeMap<usize, (EnvironmentResult, String)> = entry
            .results
            .drain(..)
            .zip(entry.transcript_keys.drain(..))
            .map(|(r, k)| (combo_rank(r.prompt_id.combo), (r, k)))
            .collect();
        for (p, t) in prompts.iter().zip(run.texts) {
            if let Some((key, text)) = t {
                merged.insert(combo_rank(p.id.combo), (parse_environment(p.id.clone(), &text, &config), key));
            }
        }
        entry.failures.retain(|f| !prompts.iter().any(|p| p.id.key() == f.prompt));
        entry.failures.extend(run.failures);
        for (r, k) in merged.into_values() {
            entry.results.push(r);
            entry.transcript_keys.push(k);
        }
        Ok(entry.clone())
    }

    /// Applies `refinement` to the current version, scores the result and
    /// reports the change in total BIC.
    pub fn apply_refinement(
        &mut self,
        data: &Dataset,
        refinement: &Refinement,
        expected_version: Option<u64>,
    ) -> Result<RefinementOutcome, SessionError> {
        let current = self.current_version();
        if let Some(expected) = expected_version.filter(|&v| v != current) {
            return Err(SessionError::VersionConflict { expected, current });
        }
        let next = self.current().apply(refinement, data.n_cols())?;
        let report = bic_graph(data, &next);
        let delta = report.delta(self.bic_report(current)?);
        let version = next.version();
        if let RefinementOp::AttachColumn { variable, column } = &refinement.op {
            self.column_bindings.insert(normalize_label(variable), *column);
        }
        self.versions.push(next);
        self.bic.insert(version, report.clone());
        self.refinements.push(RefinementEntry {
            refinement: refinement.clone(),
            timestamp: now_secs(),
            resulting_version: version,
            delta,
        });
        Ok(RefinementOutcome { version, bic: report, delta })
    }

    /// Chart document for the pair. Environment charts default to the
    /// general combination.
    pub fn chart(&self, kind: ChartKind, a: &str, b: &str, combo: Option<Combo>) -> Result<ChartData, SessionError> {
        let edge = self.audits.get(&pair_key(a, b)).ok_or_else(|| SessionError::NoSuchAudit(pair_key(a, b)))?;
        let debate_chart = |left: &str| -> Result<Option<_>, SessionError> {
            let Some(d) = &edge.debate else { return Ok(None) };
            let (l, r) = if normalize_label(left) == normalize_label(&d.a) { (&d.a, &d.b) } else { (&d.b, &d.a) };
            Ok(Some(build_debate_chart(l, r, &d.ratings)?))
        };
        let env = || {
            edge.environment.get(&direction_key(a, b)).ok_or_else(|| SessionError::NoSuchAudit(direction_key(a, b)))
        };
        match kind {
            ChartKind::Debate => {
                debate_chart(a)?.map(ChartData::Debate).ok_or_else(|| SessionError::NoSuchAudit(pair_key(a, b)))
            }
            ChartKind::Environment => {
                let combo = combo.unwrap_or(Combo::General);
                let audit = env()?;
                let result = audit
                    .results
                    .iter()
                    .find(|r| r.prompt_id.combo == combo)
                    .ok_or_else(|| SessionError::NoSuchAudit(format!("{} ({combo})", direction_key(a, b))))?;
                let score = debate_chart(a)?.and_then(|c| c.row(combo).and_then(|r| r.left.score));
                Ok(ChartData::Environment(build_environment_chart(result, score)))
            }
            ChartKind::Cm => Ok(ChartData::Cm(build_cm_chart(&env()?.results)?)),
        }
    }

    /// Checks the structural invariants and that replaying the refinement
    /// log from version 0 reproduces every stored version.
    pub fn verify(&self, n_columns: usize) -> Result<(), SessionError> {
        let corrupt = |m: String| Err(SessionError::Corrupt(m));
        if self.versions.is_empty() {
            return corrupt("no graph versions".into());
        }
        for (i, g) in self.versions.iter().enumerate() {
            if g.version() != i as u64 {
                return corrupt(format!("version list is not dense at index {i}"));
            }
        }
        if self.refinements.len() + 1 != self.versions.len() {
            return corrupt("refinement log and version list disagree".into());
        }
        for (i, e) in self.refinements.iter().enumerate() {
            if e.resulting_version != i as u64 + 1 {
                return corrupt(format!("log entry {i} names version {}", e.resulting_version));
            }
        }
        let log: Vec<Refinement> = self.refinements.iter().map(|e| e.refinement.clone()).collect();
        match replay(&self.versions[0], &log, n_columns) {
            Ok(v) if v == self.versions => Ok(()),
            Ok(_) => corrupt("replaying the refinement log does not reproduce the stored versions".into()),
            Err(e) => corrupt(format!("refinement log does not replay: {e}")),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session serializes");
        s.push('\n');
        s
    }

    /// Writes `session.json` into `dir` atomically.
    pub fn save(&self, dir: &Path) -> Result<(), SessionError> {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        let path = dir.join(SESSION_FILE);
        let tmp = dir.join(format!(".{SESSION_FILE}.tmp"));
        std::fs::write(&tmp, self.to_json()).map_err(io_error(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(io_error(&path))
    }
}

fn combo_rank(c: Combo) -> usize {
    Combo::ALL.iter().position(|&x| x == c).expect("ALL lists every combination")
}

pub fn accuracy(rows: &[AccuracyRow]) -> Result<AccuracyReport, SessionError> {
    Ok(accuracy_report(rows)?)
}

/// A session directory: `session.json` plus the raw dataset bytes.
#[derive(Clone, Debug)]
pub struct SessionDir {
    pub path: PathBuf,
}

impl SessionDir {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SessionDir { path: path.into() }
    }

    /// Ingests `csv`, discovers version 0 and persists both.
    pub fn create(&self, csv: &[u8], options: &SessionOptions) -> Result<(AuditSession, Dataset), SessionError> {
        let data = ingest::read_dataset(csv)?;
        let session = create_session(&data, &ingest::fingerprint(csv), options)?;
        std::fs::create_dir_all(&self.path).map_err(io_error(&self.path))?;
        let path = self.path.join(DATASET_FILE);
        std::fs::write(&path, csv).map_err(io_error(&path))?;
        session.save(&self.path)?;
        Ok((session, data))
    }

    pub fn exists(&self) -> bool {
        self.path.join(SESSION_FILE).is_file()
    }

    /// Loads and verifies a session and its dataset.
    pub fn load(&self) -> Result<(AuditSession, Dataset), SessionError> {
        let path = self.path.join(SESSION_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_error(&path))?;
        let session: AuditSession = serde_json::from_str(&text).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        let data_path = self.path.join(DATASET_FILE);
        let bytes = std::fs::read(&data_path).map_err(io_error(&data_path))?;
        let actual = ingest::fingerprint(&bytes);
        if actual != session.fingerprint {
            return Err(SessionError::FingerprintMismatch { expected: session.fingerprint, actual });
        }
        let data = ingest::read_dataset(&bytes)?;
        session.verify(data.n_cols())?;
        Ok((session, data))
    }

    pub fn save(&self, session: &AuditSession) -> Result<(), SessionError> {
        session.save(&self.path)
    }
}
