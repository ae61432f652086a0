//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use causal_audit::cli;
use causal_audit::gateway::TranscriptStore;
use causal_audit::ingest;
use causal_audit::session::{self, create_session, ChartKind, SessionOptions};
use causal_audit_core::chart::{ChartData, ColorClass, DominanceSign, Winner};
use causal_audit_core::{
    bic_graph, bic_node, extract_rating, parse_environment, pc_discover, render_debate, render_environment, Battery,
    CausalGraph, Combo, Dataset, EnvironmentOptions, GroupStats, Level, ParserConfig, PcOptions, PromptId, Provenance,
    Refinement, RefinementOp, Strength, VarId,
};
use common::sem::{discovered_skeleton, has_directed, Sem};
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SEEDS: u64 = 20;
const PC_N: usize = 2000;
const PC_ALPHA: f64 = 0.05;
const PC_MIN_SKELETON: usize = 18;
const PC_MIN_VSTRUCT: usize = 19;
const PC_BUDGET: Duration = Duration::from_secs(10);

const BIC_DRAWS: usize = 100;
const BIC_NODE_RTOL: f64 = 1e-6;
const BIC_TOTAL_RTOL: f64 = 1e-9;

const CONFOUNDER_N: usize = 2000;
const CONFOUNDER_MIN_LIFTS: usize = 18;

const REPLAY_BUDGET: Duration = Duration::from_secs(5);

const AGP: &str = "average grade performance";
const HGR: &str = "high school graduation rate";

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pc_recovery() -> Outcome {
    let start = Instant::now();
    let (mut skeleton_ok, mut v_ok) = (0, 0);
    let options = PcOptions { alpha: PC_ALPHA, max_condition_size: None };
    for seed in 0..SEEDS {
        let truth = Sem::random(seed);
        let d = pc_discover(&truth.sample(PC_N, 1000 + seed), &options);
        skeleton_ok += usize::from(discovered_skeleton(&d.graph) == truth.skeleton());
        v_ok += usize::from(
            truth.v_structures().iter().all(|&(x, z, y)| has_directed(&d.graph, x, z) && has_directed(&d.graph, y, z)),
        );
    }
    let took = start.elapsed();
    check(
        skeleton_ok >= PC_MIN_SKELETON && v_ok >= PC_MIN_VSTRUCT && took < PC_BUDGET,
        format!("skeleton {skeleton_ok}/{SEEDS}, v-structures {v_ok}/{SEEDS}, {:.2}s", took.as_secs_f64()),
    )
}

/// Gaussian BIC from the normal equations via Cholesky.
fn bic_oracle(data: &Dataset, node: usize, parents: &[usize]) -> f64 {
    let n = data.n_rows();
    let mut x = DMatrix::<f64>::from_element(n, parents.len() + 1, 1.0);
    for (j, &p) in parents.iter().enumerate() {
        for i in 0..n {
            x[(i, j + 1)] = data.column(p)[i];
        }
    }
    let y = DVector::from_column_slice(data.column(node));
    let beta = (x.transpose() * &x).cholesky().expect("full rank").solve(&(x.transpose() * &y));
    let resid = &y - &x * beta;
    let nf = n as f64;
    let sigma2 = resid.dot(&resid) / nf;
    -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) - 0.5 * (parents.len() as f64 + 2.0) * nf.ln()
}

fn bic_oracle_equivalence() -> Outcome {
    let sem = Sem {
        p: 6,
        edges: vec![(0, 2, 1.2), (1, 2, -0.7), (2, 3, 0.9), (1, 4, 1.4), (3, 5, -0.6), (4, 5, 0.8)],
        noise_sd: vec![1.0, 0.5, 2.0, 1.0, 0.7, 1.3],
    };
    let data = sem.sample(300, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_node = 0.0f64;
    for _ in 0..BIC_DRAWS {
        let node = rng.random_range(0..sem.p);
        let mut others: Vec<usize> = (0..sem.p).filter(|&c| c != node).collect();
        others.shuffle(&mut rng);
        let parents = &others[..rng.random_range(0..=others.len())];
        let ours = bic_node(&data, node, parents).map_err(|e| format!("bic_node failed: {e}"))?;
        let oracle = bic_oracle(&data, node, parents);
        worst_node = worst_node.max(((ours - oracle) / oracle).abs());
    }
    let mut worst_total = 0.0f64;
    for seed in 0..SEEDS {
        let sem = Sem::random(seed);
        let data = sem.sample(500, seed);
        let names = sem.names();
        let mut g = CausalGraph::from_observed(names.iter().map(|n| n.as_str()).zip(0..)).unwrap();
        for &(a, b, _) in &sem.edges {
            g = g.add_edge(VarId(a as u32), VarId(b as u32), Provenance::Manual).unwrap();
        }
        let r = bic_graph(&data, &g);
        let sum: f64 = r.per_node.values().sum();
        if r.per_node.len() != sem.p {
            return Err(format!("seed {seed}: {} of {} nodes scored", r.per_node.len(), sem.p));
        }
        worst_total = worst_total.max(((r.total - sum) / sum).abs());
    }
    check(
        worst_node < BIC_NODE_RTOL && worst_total < BIC_TOTAL_RTOL,
        format!("{BIC_DRAWS} draws, max node rel err {worst_node:.1e}; {SEEDS} graphs, max total rel err {worst_total:.1e}"),
    )
}

/// `c -> a`, `c -> b` with `|beta|` uniform in [1, 2], random signs, noise sd 0.5.
fn confounded(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coef = || {
        let m: f64 = rng.random_range(1.0..=2.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    };
    let (ba, bb) = (coef(), coef());
    let mut cols: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(CONFOUNDER_N)).collect();
    for _ in 0..CONFOUNDER_N {
        let c: f64 = rng.sample(StandardNormal);
        let ea: f64 = rng.sample(StandardNormal);
        let eb: f64 = rng.sample(StandardNormal);
        cols[0].push(ba * c + 0.5 * ea);
        cols[1].push(bb * c + 0.5 * eb);
        cols[2].push(c);
    }
    Dataset::new(vec!["a".into(), "b".into(), "c".into()], cols).unwrap()
}

fn confounder_lift() -> Outcome {
    let mut lifts = 0;
    let mut deltas = Vec::new();
    for seed in 0..SEEDS {
        let data = confounded(500 + seed);
        let options = SessionOptions { columns: Some(vec!["a".into(), "b".into()]), ..SessionOptions::default() };
        let mut s = create_session(&data, "synthetic", &options).map_err(|e| e.to_string())?;
        let insert = RefinementOp::InsertConfounder { a: "a".into(), b: "b".into(), confounder: "c".into() };
        s.apply_refinement(&data, &Refinement::new(insert), Some(0)).map_err(|e| e.to_string())?;
        let attach = RefinementOp::AttachColumn { variable: "c".into(), column: 2 };
        s.apply_refinement(&data, &Refinement::new(attach), Some(1)).map_err(|e| e.to_string())?;
        let delta = s.bic_report(2).unwrap().delta(s.bic_report(0).unwrap());
        lifts += usize::from(delta > 0.0);
        deltas.push(delta);
    }
    let min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    check(lifts >= CONFOUNDER_MIN_LIFTS, format!("delta > 0 in {lifts}/{SEEDS} seeds, smallest {min:.1}"))
}

fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("responses").join(name)).unwrap()
}

fn parser_golden() -> Outcome {
    let debate_id = PromptId::new(Battery::Debate, PFPH, LE, Combo::General, false);
    let env_id = PromptId::new(Battery::Environment, FEI, VCR, Combo::leveled(Level::Lower, Level::Higher), false);
    let debate = extract_rating(debate_id, &fixture_text("pfph_le_general.txt")).score;
    let env_text = fixture_text("fei_vcr_lower_higher.txt");
    let env_score = extract_rating(env_id.clone(), &env_text).score;
    let r = parse_environment(env_id, &env_text, &ParserConfig::default());
    let pairs = |l: &[causal_audit_core::EntityMention]| -> Vec<(String, Strength)> {
        l.iter().map(|m| (m.label.clone(), m.strength)).collect()
    };
    let mediators = pairs(&r.mediators);
    let confounders = pairs(&r.confounders);
    let want_m = [("Poverty", Strength::Strong), ("Educational Attainment", Strength::Medium), ("Health Outcomes", Strength::Weak)];
    let want_c = [
        ("Socioeconomic Status", Strength::Strong),
        ("Urban vs Rural Setting", Strength::Medium),
        ("Public Policy", Strength::Weak),
    ];
    let same = |got: &[(String, Strength)], want: &[(&str, Strength)]| {
        got.len() == want.len() && got.iter().zip(want).all(|(g, w)| g.0 == w.0 && g.1 == w.1)
    };
    check(
        debate == Some(4) && env_score == Some(2) && same(&mediators, &want_m) && same(&confounders, &want_c),
        format!("ratings {debate:?}/{env_score:?}, mediators {mediators:?}, confounders {confounders:?}"),
    )
}

fn debate_semantics() -> Outcome {
    let bytes = counties_csv();
    let data = ingest::read_dataset(&bytes).unwrap();
    let mut s = create_session(&data, &ingest::fingerprint(&bytes), &SessionOptions::default()).map_err(|e| e.to_string())?;
    let gw = scripted(TranscriptStore::in_memory());
    let mut seen = Vec::new();
    for (a, b) in [(PFPH, LE), (FEI, VCR), (AGP, HGR)] {
        let v = s.audit_edge(&gw, a, b, 4).map_err(|e| e.to_string())?.verdict;
        seen.push((v.winner, v.sign, v.consistency));
    }
    let verdicts_ok = matches!(seen[0], (Winner::LeftCauses, DominanceSign::Negative, true))
        && seen[1].0 == Winner::None
        && matches!(seen[2], (Winner::LeftCauses, DominanceSign::Positive, _));

    let mut colors_ok = true;
    for (a, b) in [(PFPH, LE), (FEI, VCR), (AGP, HGR)] {
        let ChartData::Debate(chart) = s.chart(ChartKind::Debate, a, b, None).map_err(|e| e.to_string())? else {
            return Err("debate chart has the wrong kind".into());
        };
        for row in &chart.rows {
            let want = match row.combo.cause_level() {
                None => ColorClass::Grey,
                Some(Level::Higher) => ColorClass::Red,
                Some(Level::Lower) => ColorClass::Blue,
            };
            colors_ok &= row.left.color == want && row.right.color == want;
        }
    }
    check(verdicts_ok && colors_ok, format!("verdicts {seen:?}, row colors {}", if colors_ok { "ok" } else { "wrong" }))
}

fn statistics() -> Outcome {
    let rows = ingest::read_accuracy_rows(&std::fs::read(fixtures().join("accuracy_rows.csv")).unwrap())
        .map_err(|e| e.to_string())?;
    let r = session::accuracy(&rows).map_err(|e| e.to_string())?;
    let ok = r.n_queries == 110
        && r.direction_correct == 103
        && r.numeric_produced == 109
        && r.inverse_group == GroupStats { n: 42, min: Some(1), max: Some(3), median: Some(1) }
        && r.correct_group == GroupStats { n: 68, min: Some(1), max: Some(4), median: Some(2) };
    check(
        ok,
        format!(
            "{}/{} direction, {}/{} numeric, inverse {:?}, correct {:?}",
            r.direction_correct, r.n_queries, r.numeric_produced, r.n_queries, r.inverse_group, r.correct_group
        ),
    )
}

fn run_cli(args: &[String]) -> Result<Vec<u8>, String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("causal-audit".to_string()).chain(args.iter().cloned());
    match cli::run(argv, &mut out, &mut err) {
        0 => Ok(out),
        code => Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err))),
    }
}

fn pipeline(root: &Path, llm: &[String]) -> Result<Vec<Vec<u8>>, String> {
    let data = fixtures().join("counties_synthetic.csv").display().to_string();
    let s = root.join("session").display().to_string();
    let cmd = |parts: &[&str]| parts.iter().map(|p| p.to_string()).collect::<Vec<_>>();
    run_cli(&cmd(&["discover", "--data", &data, "--out", &s]))?;
    let debate_pair = format!("{PFPH},{LE}");
    let env_pair = format!("{FEI},{VCR}");
    run_cli(&[cmd(&["audit", "--session", &s, "--pair", &debate_pair]), llm.to_vec()].concat())?;
    run_cli(&[cmd(&["environment", "--session", &s, "--pair", &env_pair]), llm.to_vec()].concat())?;
    let mut artifacts = vec![std::fs::read(root.join("session").join("session.json")).map_err(|e| e.to_string())?];
    for (kind, pair) in [("debate", &debate_pair), ("environment", &env_pair), ("cm", &env_pair)] {
        for format in ["chart-data", "svg"] {
            artifacts.push(run_cli(&cmd(&["charts", "--session", &s, "--pair", pair, "--kind", kind, "--format", format]))?);
        }
    }
    Ok(artifacts)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("transcripts.ndlog").display().to_string();
    let script = fixtures().join("script.json").display().to_string();
    let warm = ["--llm", "scripted", "--script", &script, "--cache", &cache].map(String::from);
    pipeline(&tmp.path().join("warm"), &warm)?;

    let replay = ["--llm", "replay", "--cache", &cache].map(String::from);
    let start = Instant::now();
    let first = pipeline(&tmp.path().join("one"), &replay)?;
    let second = pipeline(&tmp.path().join("two"), &replay)?;
    let took = start.elapsed();
    let identical = first == second;
    let bytes: usize = first.iter().map(Vec::len).sum();
    check(
        identical && took < REPLAY_BUDGET,
        format!(
            "{} artifacts ({bytes} bytes) {}, two replay runs in {:.2}s",
            first.len(),
            if identical { "identical" } else { "differ" },
            took.as_secs_f64()
        ),
    )
}

const PUBLISHED_LEVELED: &str = "On a scale from 1 to 4, where 4 represents strong or most likely, rate the \
    cause-and-effect relationship: higher percent fair or poor health causes higher life expectancy.";
const PUBLISHED_GENERAL: &str = "On a scale from 1 to 4, where 4 represents strong or most likely, rate the \
    cause-and-effect relationship: changing percent fair or poor health causes a change in life expectancy.";
const PUBLISHED_ENVIRONMENT: &str = "On a scale from 1 to 4, 4 represents strong or most likely, rate the \
    cause-and-effect relationship 'For a county, lower food environment index causes higher violent crime rate'. \
    Make a concise list of mediators in that relation and assign strengths to them (weak, medium, strong). \
    Also make a concise list of confounders in that relation and assign strengths to them (weak, medium, strong).";

fn prompt_exactness() -> Outcome {
    let set = render_debate(PFPH, LE).map_err(|e| e.to_string())?;
    let leveled = set
        .prompts
        .iter()
        .find(|p| p.id.combo == Combo::leveled(Level::Higher, Level::Higher))
        .map(|p| p.text.as_str());
    let general = set.prompts.iter().find(|p| p.id.combo == Combo::General).map(|p| p.text.as_str());
    let env = render_environment(FEI, VCR, Combo::leveled(Level::Lower, Level::Higher), &EnvironmentOptions::default())
        .map_err(|e| e.to_string())?;
    let results = [leveled == Some(PUBLISHED_LEVELED), general == Some(PUBLISHED_GENERAL), env.text == PUBLISHED_ENVIRONMENT];
    check(results.iter().all(|&b| b), format!("leveled/general/environment match: {results:?}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("pc-recovery", pc_recovery),
        ("bic-oracle", bic_oracle_equivalence),
        ("confounder-lift", confounder_lift),
        ("parser-golden", parser_golden),
        ("debate-semantics", debate_semantics),
        ("statistics", statistics),
        ("determinism", determinism),
        ("prompt-exactness", prompt_exactness),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
