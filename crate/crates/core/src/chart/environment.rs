use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ColorClass, SCHEMA_VERSION};
use crate::parser::{EntityMention, EnvironmentResult, Sign};
use crate::prompt::{Combo, Level};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrow {
    Up,
    Down,
    None,
}

impl From<Sign> for Arrow {
    fn from(s: Sign) -> Self {
        match s {
            Sign::Positive => Arrow::Up,
            Sign::Negative => Arrow::Down,
            Sign::Unspecified => Arrow::None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartVariant {
    Environment,
    /// The combo was judged improbable; mediators read as intervention targets.
    Intervention,
}

impl ChartVariant {
    pub fn title(self) -> &'static str {
        match self {
            ChartVariant::Environment => "Causal Relation Environment Chart",
            ChartVariant::Intervention => "Causal Intervention Chart",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub name: String,
    pub level: Option<Level>,
    pub color: ColorClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCard {
    pub name: String,
    pub label: String,
    /// 1 weak, 2 medium, 3 strong.
    pub strength: u8,
    pub arrow: Arrow,
}

impl From<&EntityMention> for EntityCard {
    fn from(m: &EntityMention) -> Self {
        EntityCard { name: m.name.clone(), label: m.label.clone(), strength: m.strength.value(), arrow: m.sign.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentChartData {
    pub schema_version: u32,
    pub variant: ChartVariant,
    pub combo: Combo,
    pub cause: Endpoint,
    pub effect: Endpoint,
    /// Rating parsed from the environment response itself.
    pub rating: Option<u8>,
    /// Debate score of the same directed combo, when known.
    pub debate_score: Option<u8>,
    pub mediators: Vec<EntityCard>,
    pub confounders: Vec<EntityCard>,
}

/// Chart for one environment response. A leveled combo whose debate score is
/// at most 2 becomes the intervention variant.
pub fn build_environment_chart(env: &EnvironmentResult, debate_score: Option<u8>) -> EnvironmentChartData {
    let id = &env.prompt_id;
    let combo = id.combo;
    let variant = match (combo, debate_score) {
        (Combo::Leveled { .. }, Some(s)) if s <= 2 => ChartVariant::Intervention,
        _ => ChartVariant::Environment,
    };
    let endpoint = |name: &str, level: Option<Level>| Endpoint {
        name: name.to_string(),
        level,
        color: ColorClass::for_level(level),
    };
    EnvironmentChartData {
        schema_version: SCHEMA_VERSION,
        variant,
        combo,
        cause: endpoint(&id.cause, combo.cause_level()),
        effect: endpoint(&id.effect, combo.effect_level()),
        rating: env.rating.score,
        debate_score,
        mediators: env.mediators.iter().map(EntityCard::from).collect(),
        confounders: env.confounders.iter().map(EntityCard::from).collect(),
    }
}
