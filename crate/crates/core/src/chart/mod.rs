//! Renderer-independent data for the debate, environment and
//! confounder/mediator charts, plus a headless SVG renderer.

mod cm;
mod debate;
mod environment;
pub mod palette;
mod svg;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::prompt::Level;

pub use cm::{build_cm_chart, CMChartData, CmEntity, CmLink, Question};
pub use debate::{
    build_debate_chart, judge_dominance, judge_dominance_with, DebateBar, DebateChartData, DebateRow,
    DominanceConfig, DominanceSign, DominanceVerdict, Winner,
};
pub use environment::{build_environment_chart, Arrow, ChartVariant, EntityCard, Endpoint, EnvironmentChartData};
pub use svg::{render_svg, Dims};

/// Bumped whenever a chart document changes shape.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorClass {
    Grey,
    Red,
    Blue,
}

impl ColorClass {
    /// Grey without a level, red for higher, blue for lower.
    pub fn for_level(level: Option<Level>) -> Self {
        match level {
            None => ColorClass::Grey,
            Some(Level::Higher) => ColorClass::Red,
            Some(Level::Lower) => ColorClass::Blue,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub class: ColorClass,
    pub label: String,
}

pub(crate) fn level_legend() -> Vec<LegendEntry> {
    use alloc::string::ToString;
    [
        (ColorClass::Grey, "general change"),
        (ColorClass::Red, "higher cause"),
        (ColorClass::Blue, "lower cause"),
    ]
    .into_iter()
    .map(|(class, label)| LegendEntry { class, label: label.to_string() })
    .collect()
}

/// Any chart document, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChartData {
    Debate(DebateChartData),
    Environment(EnvironmentChartData),
    Cm(CMChartData),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ChartError {
    #[error("debate battery incomplete; missing {missing:?}")]
    IncompleteBattery { missing: Vec<String> },
    #[error("duplicate rating for {0}")]
    DuplicateRating(String),
    #[error("rating {0} does not belong to this debate")]
    ForeignRating(String),
    #[error("no environment results")]
    NoEnvironmentResults,
    #[error("environment results cover different pairs")]
    MixedPairs,
    #[error("chart dimensions must be positive, got {width}x{height}")]
    DegenerateDims { width: i64, height: i64 },
}
