mod common;

use std::sync::Arc;
use std::time::Duration;

use causal_audit::gateway::{Gateway, GatewayError, LiveBackend, TranscriptStore};
use causal_audit::ingest::{self, IngestError};
use causal_audit::session::{create_session, ChartKind, SessionDir, SessionError, SessionOptions};
use causal_audit_core::chart::{ChartData, DominanceSign, Winner};
use causal_audit_core::{Combo, Dataset, EnvironmentOptions, GraphError, Level, Refinement, RefinementOp, Strength};
use common::sem::Sem;
use common::*;

fn counties() -> (Dataset, String) {
    let bytes = counties_csv();
    (ingest::read_dataset(&bytes).unwrap(), ingest::fingerprint(&bytes))
}

fn session() -> causal_audit::AuditSession {
    let (data, fp) = counties();
    create_session(&data, &fp, &SessionOptions::default()).unwrap()
}

fn env_opts() -> EnvironmentOptions {
    EnvironmentOptions::default()
}

#[test]
fn six_variable_sem_gets_version_zero_and_score() {
    let sem = Sem { p: 6, edges: vec![(0, 2, 1.0), (1, 2, 0.9), (2, 3, 0.8), (3, 4, -1.1), (3, 5, 0.7)], noise_sd: vec![1.0; 6] };
    let data = sem.sample(1500, 3);
    let s = create_session(&data, "fp", &SessionOptions::default()).unwrap();
    assert_eq!(s.versions.len(), 1);
    assert_eq!(s.current().variables().len(), 6);
    assert_eq!(s.current().edges().len(), 5);
    let report = s.bic_report(0).unwrap();
    assert_eq!(report.per_node.len(), 6);
    assert!(report.total.is_finite());
    assert_eq!(s.column_bindings.len(), 6);
}

#[test]
fn single_variable_session_has_no_edges() {
    let data = Dataset::new(vec!["x".into()], vec![(0..20).map(f64::from).collect()]).unwrap();
    let s = create_session(&data, "fp", &SessionOptions::default()).unwrap();
    assert!(s.current().edges().is_empty());
    assert_eq!(s.bic_report(0).unwrap().per_node.len(), 1);
}

#[test]
fn non_numeric_cell_creates_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let sd = SessionDir::new(dir.path().join("s"));
    let err = sd.create(b"a,b\n1,2\n3,four\n", &SessionOptions::default()).unwrap_err();
    assert!(matches!(err, SessionError::Ingest(IngestError::NonNumeric { line: 3, .. })), "{err:?}");
    assert!(!sd.path.exists());
}

#[test]
fn bad_options_are_rejected() {
    let (data, fp) = counties();
    let alpha = SessionOptions { alpha: 1.5, ..SessionOptions::default() };
    assert!(matches!(create_session(&data, &fp, &alpha), Err(SessionError::InvalidAlpha(_))));
    let cols = SessionOptions { columns: Some(vec!["nope".into()]), ..SessionOptions::default() };
    assert!(matches!(create_session(&data, &fp, &cols), Err(SessionError::UnknownColumn(_))));
}

#[test]
fn column_subset_binds_original_columns() {
    let (data, fp) = counties();
    let opts = SessionOptions { columns: Some(vec![VCR.into(), FEI.into()]), ..SessionOptions::default() };
    let s = create_session(&data, &fp, &opts).unwrap();
    let g = s.current();
    assert_eq!(g.variables().len(), 2);
    assert_eq!(g.variable(g.lookup(VCR).unwrap()).unwrap().column, Some(3));
    assert_eq!(g.variable(g.lookup(FEI).unwrap()).unwrap().column, Some(2));
}

#[test]
fn debates_reach_the_expected_verdicts() {
    let mut s = session();
    let gw = scripted(TranscriptStore::in_memory());
    let d = s.audit_edge(&gw, PFPH, LE, 4).unwrap();
    assert_eq!(d.ratings.len(), 10);
    assert_eq!((d.verdict.winner, d.verdict.sign, d.verdict.consistency), (Winner::LeftCauses, DominanceSign::Negative, true));
    assert!(d.transcript_keys.iter().all(Option::is_some));

    // Probing the pair the other way round mirrors the verdict.
    let back = s.audit_edge(&gw, LE, PFPH, 4).unwrap();
    assert_eq!(back.verdict.winner, Winner::RightCauses);

    let weak = s.audit_edge(&gw, FEI, VCR, 4).unwrap();
    assert_eq!(weak.verdict.winner, Winner::None);
    assert_eq!(s.versions.len(), 1);
    assert_eq!(s.suggested_direction(LE, PFPH), (PFPH.to_string(), LE.to_string()));
}

#[test]
fn unknown_variable_is_reported() {
    let mut s = session();
    let gw = scripted(TranscriptStore::in_memory());
    let err = s.audit_edge(&gw, "rainfall", LE, 4).unwrap_err();
    assert!(matches!(err, SessionError::Graph(GraphError::NoSuchVariable(_))), "{err:?}");
}

#[test]
fn environment_lists_come_through() {
    let mut s = session();
    let gw = scripted(TranscriptStore::in_memory());
    let lh = Combo::leveled(Level::Lower, Level::Higher);
    let audit = s.audit_environment(&gw, FEI, VCR, &Combo::ALL, &env_opts(), 4).unwrap();
    assert_eq!(audit.results.len(), 5);
    let r = audit.results.iter().find(|r| r.prompt_id.combo == lh).unwrap();
    let pairs = |l: &[causal_audit_core::EntityMention]| -> Vec<(String, Strength)> {
        l.iter().map(|m| (m.label.clone(), m.strength)).collect()
    };
    assert_eq!(
        pairs(&r.mediators),
        [("Poverty".into(), Strength::Strong), ("Educational Attainment".into(), Strength::Medium), ("Health Outcomes".into(), Strength::Weak)]
    );
    assert_eq!(pairs(&r.confounders).len(), 3);
    assert_eq!(r.rating.score, Some(2));

    let only = s.audit_environment(&gw, PFPH, LE, &[Combo::General], &env_opts(), 4).unwrap();
    assert_eq!(only.results.len(), 1);
    // A later call adds to the stored results.
    let more = s.audit_environment(&gw, PFPH, LE, &[lh], &env_opts(), 4).unwrap();
    assert_eq!(more.results.iter().map(|r| r.prompt_id.combo).collect::<Vec<_>>(), [Combo::General, lh]);
    assert_eq!(s.versions.len(), 1);
}

#[test]
fn offline_gateway_leaves_session_unchanged() {
    let mut s = session();
    let before = s.clone();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let live = LiveBackend::new(&format!("http://127.0.0.1:{port}"), "k", Duration::from_secs(1)).unwrap();
    let gw = Gateway::new(Arc::new(live), TranscriptStore::in_memory(), "gpt-4");
    let err = s.audit_environment(&gw, FEI, VCR, &[Combo::General], &env_opts(), 2).unwrap_err();
    assert!(matches!(err, SessionError::Gateway(GatewayError::BackendUnavailable(_))), "{err:?}");
    assert_eq!(s, before);
}

#[test]
fn partial_battery_failures() {
    // The cache holds 7 of the 10 debate prompts: tolerated.
    let warm = TranscriptStore::in_memory();
    let gw = scripted(warm);
    let prompts = causal_audit_core::render_debate(PFPH, LE).unwrap().prompts;
    let store = TranscriptStore::in_memory();
    for p in &prompts[..7] {
        let c = gw.complete(&gw.request(p.clone())).unwrap();
        store.append(gw.store().get(&c.key).unwrap()).unwrap();
    }
    let mut s = session();
    let d = s.audit_edge(&replay(store), PFPH, LE, 4).unwrap();
    assert_eq!(d.failures.len(), 3);
    assert_eq!(d.ratings.iter().filter(|r| r.score.is_none()).count(), 3);
    assert!(d.transcript_keys[7..].iter().all(Option::is_none));

    // Six cached: four failures is too many.
    let store = TranscriptStore::in_memory();
    for p in &prompts[..6] {
        store.append(gw.store().get(&gw.request(p.clone()).key()).unwrap()).unwrap();
    }
    let before = s.clone();
    match s.audit_edge(&replay(store), PFPH, LE, 4) {
        Err(SessionError::IncompleteBattery { failed: 4, total: 10, failures }) => {
            assert!(failures.iter().all(|f| matches!(f.error, GatewayError::CacheMissInReplayMode { .. })));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(s, before);
}

#[test]
fn replayed_audit_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("t.ndlog");
    let mut s = session();
    s.audit_edge(&scripted(TranscriptStore::open(&cache).unwrap()), PFPH, LE, 4).unwrap();
    let gw = replay(TranscriptStore::open(&cache).unwrap());
    let a = s.audit_edge(&gw, PFPH, LE, 1).unwrap();
    let b = s.audit_edge(&gw, PFPH, LE, 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(gw.backend_calls(), 0);
}

fn op(r: RefinementOp) -> Refinement {
    Refinement::new(r)
}

#[test]
fn refinements_version_and_score() {
    let (data, fp) = counties();
    let mut s = create_session(&data, &fp, &SessionOptions { columns: Some(vec![PFPH.into(), LE.into(), FEI.into(), VCR.into()]), ..Default::default() }).unwrap();
    let base = s.bic_report(0).unwrap().total;
    let add = s
        .apply_refinement(&data, &op(RefinementOp::InsertConfounder { a: FEI.into(), b: VCR.into(), confounder: "Poverty".into() }), Some(0))
        .unwrap();
    assert_eq!(add.version, 1);
    assert!((add.delta - (add.bic.total - base)).abs() < 1e-9);
    assert!(!add.bic.warnings.is_empty(), "unbound confounder is skipped with a warning");
    let bound = s.apply_refinement(&data, &op(RefinementOp::AttachColumn { variable: "poverty".into(), column: 6 }), Some(1)).unwrap();
    assert_eq!(bound.version, 2);
    assert!(bound.delta > 0.0 || bound.bic.per_node.contains_key("Poverty"));
    assert_eq!(s.column_bindings.get("poverty"), Some(&6));
    assert_eq!(s.refinements.len(), 2);
    assert_eq!(s.refinements[1].resulting_version, 2);
    s.verify(data.n_cols()).unwrap();

    let stale = s.apply_refinement(&data, &op(RefinementOp::RemoveEdge { a: FEI.into(), b: VCR.into() }), Some(1));
    assert!(matches!(stale, Err(SessionError::VersionConflict { expected: 1, current: 2 })));
    let bad_col = s.apply_refinement(&data, &op(RefinementOp::InsertConfounder { a: PFPH.into(), b: LE.into(), confounder: "x".into() }), None).unwrap();
    assert_eq!(bad_col.version, 3);
    let err = s.apply_refinement(&data, &op(RefinementOp::AttachColumn { variable: "x".into(), column: 99 }), None).unwrap_err();
    assert!(matches!(err, SessionError::Graph(GraphError::UnboundColumn { column: 99, .. })));
    assert_eq!(s.versions.len(), 4);
}

#[test]
fn remove_then_readd_and_cycles() {
    let sem = Sem { p: 3, edges: vec![(0, 1, 1.0), (1, 2, 1.0)], noise_sd: vec![1.0; 3] };
    let data = sem.sample(800, 4);
    let mut s = create_session(&data, "fp", &SessionOptions::default()).unwrap();
    let v0 = s.bic_report(0).unwrap().total;
    // Chain discovered undirected; orient it, then remove and re-add.
    s.apply_refinement(&data, &op(RefinementOp::OrientEdge { cause: "x0".into(), effect: "x1".into() }), None).unwrap();
    let oriented = s.apply_refinement(&data, &op(RefinementOp::OrientEdge { cause: "x1".into(), effect: "x2".into() }), None).unwrap();
    assert!(oriented.bic.total > v0);
    let removed = s.apply_refinement(&data, &op(RefinementOp::RemoveEdge { a: "x1".into(), b: "x2".into() }), None).unwrap();
    assert!(removed.delta < 0.0);
    let back = s.apply_refinement(&data, &op(RefinementOp::AddEdge { source: "x1".into(), target: "x2".into() }), None).unwrap();
    assert!((back.bic.total - oriented.bic.total).abs() < 1e-9);

    let n = s.versions.len();
    let err = s.apply_refinement(&data, &op(RefinementOp::AddEdge { source: "x2".into(), target: "x0".into() }), None).unwrap_err();
    assert!(matches!(err, SessionError::Graph(GraphError::WouldCreateCycle)));
    assert_eq!(s.versions.len(), n);
}

#[test]
fn persisted_session_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let sd = SessionDir::new(dir.path().join("s"));
    let (mut s, data) = sd.create(&counties_csv(), &SessionOptions::default()).unwrap();
    s.audit_edge(&scripted(TranscriptStore::in_memory()), FEI, VCR, 4).unwrap();
    let confound = RefinementOp::InsertConfounder { a: FEI.into(), b: VCR.into(), confounder: "Poverty proxy".into() };
    s.apply_refinement(&data, &op(confound), None).unwrap();
    // Column 6 already holds the observed "poverty" variable.
    let taken = s.apply_refinement(&data, &op(RefinementOp::AttachColumn { variable: "Poverty proxy".into(), column: 6 }), None);
    assert!(matches!(taken, Err(SessionError::Graph(GraphError::ColumnAlreadyBound { column: 6, .. }))));
    sd.save(&s).unwrap();
    let (loaded, _) = sd.load().unwrap();
    assert_eq!(loaded, s);
    assert_eq!(loaded.to_json(), std::fs::read_to_string(sd.path.join("session.json")).unwrap());

    let mut tampered = s.clone();
    tampered.versions.pop();
    tampered.save(&sd.path).unwrap();
    assert!(matches!(sd.load(), Err(SessionError::Corrupt(_))));

    s.save(&sd.path).unwrap();
    std::fs::write(sd.path.join("dataset.csv"), b"a,b\n1,2\n").unwrap();
    assert!(matches!(sd.load(), Err(SessionError::FingerprintMismatch { .. })));
}

#[test]
fn charts_follow_the_requested_orientation() {
    let mut s = session();
    let gw = scripted(TranscriptStore::in_memory());
    s.audit_edge(&gw, PFPH, LE, 4).unwrap();
    s.audit_environment(&gw, PFPH, LE, &Combo::ALL, &env_opts(), 4).unwrap();
    let ChartData::Debate(d) = s.chart(ChartKind::Debate, LE, PFPH, None).unwrap() else { panic!() };
    assert_eq!((d.left_var.as_str(), d.right_var.as_str()), (LE, PFPH));
    let hh = Combo::leveled(Level::Higher, Level::Higher);
    let ChartData::Environment(e) = s.chart(ChartKind::Environment, PFPH, LE, Some(hh)).unwrap() else { panic!() };
    assert_eq!(e.debate_score, Some(1));
    assert!(matches!(s.chart(ChartKind::Cm, PFPH, LE, None).unwrap(), ChartData::Cm(_)));
    assert!(matches!(s.chart(ChartKind::Cm, LE, PFPH, None), Err(SessionError::NoSuchAudit(_))));
    assert!(matches!(s.chart(ChartKind::Debate, FEI, VCR, None), Err(SessionError::NoSuchAudit(_))));
}
