use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ChartError, ColorClass, SCHEMA_VERSION};
use crate::parser::{EntityKind, EnvironmentResult, Sign};
use crate::prompt::Combo;
use crate::text::normalize_label;

/// One environment prompt, drawn as a light-blue box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub combo: Combo,
    pub label: String,
    pub cause_class: ColorClass,
    pub effect_class: ColorClass,
    pub rating: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmEntity {
    /// `mediator:<name>` or `confounder:<name>`.
    pub id: String,
    pub name: String,
    /// Label from the first mention.
    pub label: String,
    pub kind: EntityKind,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmLink {
    pub question: String,
    pub entity: String,
    pub strength: u8,
    pub sign: Sign,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CMChartData {
    pub schema_version: u32,
    pub cause: String,
    pub effect: String,
    pub questions: Vec<Question>,
    /// Sorted by kind, then name.
    pub entities: Vec<CmEntity>,
    pub links: Vec<CmLink>,
    /// Entity ids by degree descending, then name.
    pub centrality_rank: Vec<String>,
}

impl CMChartData {
    /// A chart with nothing in it.
    pub fn empty(cause: &str, effect: &str) -> Self {
        CMChartData {
            schema_version: SCHEMA_VERSION,
            cause: cause.to_string(),
            effect: effect.to_string(),
            questions: Vec::new(),
            entities: Vec::new(),
            links: Vec::new(),
            centrality_rank: Vec::new(),
        }
    }

    pub fn entity(&self, id: &str) -> Option<&CmEntity> {
        self.entities.iter().find(|e| e.id == id)
    }
}

fn kind_word(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::Mediator => "mediator",
        EntityKind::Confounder => "confounder",
    }
}

/// Merges every environment result of one pair into a question/entity graph.
/// An entity named twice within one answer keeps its strongest mention.
pub fn build_cm_chart(envs: &[EnvironmentResult]) -> Result<CMChartData, ChartError> {
    let first = envs.first().ok_or(ChartError::NoEnvironmentResults)?;
    let pair = |e: &EnvironmentResult| {
        let (a, b) = (normalize_label(&e.prompt_id.cause), normalize_label(&e.prompt_id.effect));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    };
    let key = pair(first);
    if envs.iter().any(|e| pair(e) != key) {
        return Err(ChartError::MixedPairs);
    }

    let mut questions = Vec::with_capacity(envs.len());
    // (kind, name) -> label
    let mut entities: BTreeMap<(EntityKind, String), String> = BTreeMap::new();
    let mut links = Vec::new();
    for (i, env) in envs.iter().enumerate() {
        let id = &env.prompt_id;
        let qid = format!("q{i}");
        questions.push(Question {
            id: qid.clone(),
            combo: id.combo,
            label: id.combo.relation(&id.cause, &id.effect),
            cause_class: ColorClass::for_level(id.combo.cause_level()),
            effect_class: ColorClass::for_level(id.combo.effect_level()),
            rating: env.rating.score,
        });
        let mut per_question: BTreeMap<(EntityKind, String), (u8, Sign)> = BTreeMap::new();
        for m in env.mediators.iter().chain(&env.confounders) {
            entities.entry((m.kind, m.name.clone())).or_insert_with(|| m.label.clone());
            let slot = per_question.entry((m.kind, m.name.clone())).or_insert((0, Sign::Unspecified));
            slot.0 = slot.0.max(m.strength.value());
            if slot.1 == Sign::Unspecified {
                slot.1 = m.sign;
            }
        }
        for ((kind, name), (strength, sign)) in per_question {
            links.push(CmLink { question: qid.clone(), entity: format!("{}:{name}", kind_word(kind)), strength, sign });
        }
    }

    let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
    for l in &links {
        *degree.entry(l.entity.as_str()).or_default() += 1;
    }
    let entities: Vec<CmEntity> = entities
        .into_iter()
        .map(|((kind, name), label)| {
            let id = format!("{}:{name}", kind_word(kind));
            CmEntity { degree: degree.get(id.as_str()).copied().unwrap_or(0), id, name, label, kind }
        })
        .collect();
    let mut ranked: Vec<&CmEntity> = entities.iter().collect();
    ranked.sort_by(|a, b| b.degree.cmp(&a.degree).then_with(|| a.name.cmp(&b.name)).then_with(|| a.kind.cmp(&b.kind)));
    let centrality_rank = ranked.into_iter().map(|e| e.id.clone()).collect();

    Ok(CMChartData {
        schema_version: SCHEMA_VERSION,
        cause: first.prompt_id.cause.clone(),
        effect: first.prompt_id.effect.clone(),
        questions,
        entities,
        links,
        centrality_rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_environment, ParserConfig};
    use crate::prompt::{Battery, Level, PromptId};
    use alloc::vec;

    fn env(combo: Combo, text: &str) -> EnvironmentResult {
        let id = PromptId::new(Battery::Environment, "x", "y", combo, false);
        parse_environment(id, text, &ParserConfig::default())
    }

    #[test]
    fn single_result_is_a_star() {
        let c = build_cm_chart(&[env(
            Combo::General,
            "Mediators:\n- A (weak)\n- B (strong)\nConfounders:\n- C (medium)\n",
        )])
        .unwrap();
        assert_eq!(c.questions.len(), 1);
        assert!(c.entities.iter().all(|e| e.degree == 1));
        assert!(c.links.iter().all(|l| l.question == "q0"));
        assert_eq!(c.centrality_rank, vec!["mediator:a", "mediator:b", "confounder:c"]);
    }

    #[test]
    fn per_link_strengths() {
        let envs = [
            env(Combo::General, "Confounders:\n- Poverty (Strong)\n"),
            env(Combo::leveled(Level::Higher, Level::Lower), "Confounders:\n- poverty (weak)\n"),
        ];
        let c = build_cm_chart(&envs).unwrap();
        assert_eq!(c.entities.len(), 1);
        assert_eq!(c.entities[0].degree, 2);
        let widths: Vec<u8> = c.links.iter().map(|l| l.strength).collect();
        assert_eq!(widths, vec![3, 1]);
        assert_eq!(c.questions[1].cause_class, ColorClass::Red);
        assert_eq!(c.questions[1].effect_class, ColorClass::Blue);
    }

    #[test]
    fn errors() {
        assert_eq!(build_cm_chart(&[]), Err(ChartError::NoEnvironmentResults));
        let other = parse_environment(
            PromptId::new(Battery::Environment, "x", "z", Combo::General, false),
            "",
            &ParserConfig::default(),
        );
        assert_eq!(build_cm_chart(&[env(Combo::General, ""), other]), Err(ChartError::MixedPairs));
    }
}
