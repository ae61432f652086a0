use std::path::PathBuf;

use causal_audit_core::parser::WarningKind;
use causal_audit_core::{
    extract_entities, extract_rating, normalize_entity_name, parse_environment, Battery, Combo, EntityMention, Level,
    ParserConfig, PromptId, Strength,
};
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/responses").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn debate_id() -> PromptId {
    PromptId::new(Battery::Debate, "percent fair or poor health", "life expectancy", Combo::General, false)
}

fn env_id() -> PromptId {
    PromptId::new(
        Battery::Environment,
        "food environment index",
        "violent crime rate",
        Combo::leveled(Level::Lower, Level::Higher),
        false,
    )
}

fn pairs(list: &[EntityMention]) -> Vec<(&str, Strength)> {
    list.iter().map(|m| (m.label.as_str(), m.strength)).collect()
}

#[test]
fn general_debate_response_rates_four() {
    let r = extract_rating(debate_id(), &fixture("pfph_le_general.txt"));
    assert_eq!(r.score, Some(4));
    assert!(r.justification.unwrap().ends_with("life expectancy as a 4."));
}

#[test]
fn environment_response_rates_two() {
    assert_eq!(extract_rating(env_id(), &fixture("fei_vcr_lower_higher.txt")).score, Some(2));
}

#[test]
fn environment_response_lists() {
    let r = parse_environment(env_id(), &fixture("fei_vcr_lower_higher.txt"), &ParserConfig::default());
    assert_eq!(
        pairs(&r.mediators),
        [
            ("Poverty", Strength::Strong),
            ("Educational Attainment", Strength::Medium),
            ("Health Outcomes", Strength::Weak),
        ]
    );
    assert_eq!(
        pairs(&r.confounders),
        [
            ("Socioeconomic Status", Strength::Strong),
            ("Urban vs Rural Setting", Strength::Medium),
            ("Public Policy", Strength::Weak),
        ]
    );
    let names: Vec<&str> = r.confounders.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(names, ["socioeconomic status", "urban vs rural setting", "public policy"]);
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    assert_eq!(r.caveats.len(), 1);
    assert!(r.caveats[0].starts_with("Correlation does not imply causation"));
    assert_eq!(r.rating.score, Some(2));
}

#[test]
fn rationale_is_kept() {
    let r = parse_environment(env_id(), &fixture("fei_vcr_lower_higher.txt"), &ParserConfig::default());
    assert!(r.mediators[0].rationale.starts_with("Poorer food environments (PFE) often correlate"));
    assert!(r.confounders[2].rationale.ends_with("acting as a confounding factor."));
}

#[test]
fn latex_itemize_shape() {
    let text = "Mediators:\n\\begin{itemize}\n\\item \\textbf{Poverty (Strong)}: x.\n\\end{itemize}\n";
    // \textbf{...} is not markdown; the label keeps the macro text but the
    // strength parenthesis is still found.
    let e = extract_entities(text, &ParserConfig::default());
    assert_eq!(e.mediators.len(), 1);
    assert_eq!(e.mediators[0].strength, Strength::Strong);
}

#[test]
fn malformed_responses_never_fail() {
    for text in ["", "\n\n", "Mediators:", "Rating:", "Confounders:\n- \n", "- (strong)\n", "💥 Mediators: ✓\n- ☃ (weak)"] {
        let r = parse_environment(env_id(), text, &ParserConfig::default());
        assert_eq!(r.rating.raw, text);
        for w in &r.warnings {
            assert!(w.offset + w.len <= text.len());
            assert!(text.is_char_boundary(w.offset));
        }
    }
    let missing = parse_environment(env_id(), "Mediators:\nnothing here\n", &ParserConfig::default());
    assert_eq!(missing.warnings[0].kind, WarningKind::MalformedList);
}

#[test]
fn names_normalize_across_spellings() {
    assert_eq!(normalize_entity_name("Socioeconomic  Status"), normalize_entity_name("socioeconomic status:"));
    assert_eq!(normalize_entity_name("**Poverty (Strong)**"), "poverty");
}

proptest! {
    #[test]
    fn parsing_is_total_and_repeatable(text in "(?s).{0,400}") {
        let a = parse_environment(env_id(), &text, &ParserConfig::default());
        let b = parse_environment(env_id(), &a.rating.raw, &ParserConfig::default());
        prop_assert_eq!(&a, &b);
        if let Some(s) = a.rating.score {
            prop_assert!((1..=4).contains(&s));
        }
        for w in &a.warnings {
            prop_assert!(w.offset + w.len <= text.len());
        }
    }

    #[test]
    fn listed_items_round_trip(
        items in proptest::collection::vec(("[A-Z][a-z]{2,8}( [A-Z][a-z]{2,8}){0,2}", 0usize..3), 1..6)
    ) {
        let words = ["Weak", "Medium", "Strong"];
        let mut text = String::from("Mediators:\n");
        for (name, s) in &items {
            text.push_str(&format!("- **{name} ({})**: because.\n", words[*s]));
        }
        let e = extract_entities(&text, &ParserConfig::default());
        prop_assert_eq!(e.mediators.len(), items.len());
        for (m, (name, s)) in e.mediators.iter().zip(&items) {
            prop_assert_eq!(&m.label, name);
            prop_assert_eq!(m.strength.value() as usize, s + 1);
        }
    }
}
