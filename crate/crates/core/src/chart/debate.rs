use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{level_legend, ChartError, ColorClass, LegendEntry, SCHEMA_VERSION};
use crate::parser::RelationRating;
use crate::prompt::{Battery, Combo, Level, PromptId};
use crate::text::normalize_label;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateBar {
    pub score: Option<u8>,
    /// No score could be parsed; drawn as a zero-length hatched marker.
    pub missing: bool,
    pub color: ColorClass,
}

impl DebateBar {
    fn new(score: Option<u8>, combo: Combo) -> Self {
        DebateBar { score, missing: score.is_none(), color: ColorClass::for_level(combo.cause_level()) }
    }

    fn value(&self) -> u8 {
        self.score.unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateRow {
    pub combo: Combo,
    pub label: String,
    /// Left variable as cause.
    pub left: DebateBar,
    /// Right variable as cause.
    pub right: DebateBar,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateChartData {
    pub schema_version: u32,
    pub left_var: String,
    pub right_var: String,
    /// In [`Combo::ALL`] order.
    pub rows: Vec<DebateRow>,
    pub legend: Vec<LegendEntry>,
}

fn row_label(combo: Combo) -> String {
    match combo {
        Combo::General => "general change".to_string(),
        Combo::Leveled { cause, effect } => format!("{} cause, {} effect", cause.word(), effect.word()),
    }
}

/// Builds the chart from the 10 debate ratings of `left` and `right`.
pub fn build_debate_chart(left: &str, right: &str, ratings: &[RelationRating]) -> Result<DebateChartData, ChartError> {
    let (nl, nr) = (normalize_label(left), normalize_label(right));
    // (left is cause, combo) -> score
    let mut scores: BTreeMap<(bool, Combo), Option<u8>> = BTreeMap::new();
    for r in ratings {
        let id = &r.prompt_id;
        let (c, e) = (normalize_label(&id.cause), normalize_label(&id.effect));
        let left_cause = if id.battery != Battery::Debate {
            return Err(ChartError::ForeignRating(id.key()));
        } else if c == nl && e == nr {
            true
        } else if c == nr && e == nl {
            false
        } else {
            return Err(ChartError::ForeignRating(id.key()));
        };
        if scores.insert((left_cause, id.combo), r.score).is_some() {
            return Err(ChartError::DuplicateRating(id.key()));
        }
    }
    let mut missing = Vec::new();
    for left_cause in [true, false] {
        for combo in Combo::ALL {
            if !scores.contains_key(&(left_cause, combo)) {
                let (c, e) = if left_cause { (left, right) } else { (right, left) };
                missing.push(PromptId::new(Battery::Debate, c, e, combo, false).key());
            }
        }
    }
    if !missing.is_empty() {
        return Err(ChartError::IncompleteBattery { missing });
    }
    let rows = Combo::ALL
        .iter()
        .map(|&combo| DebateRow {
            combo,
            label: row_label(combo),
            left: DebateBar::new(scores[&(true, combo)], combo),
            right: DebateBar::new(scores[&(false, combo)], combo),
        })
        .collect();
    Ok(DebateChartData {
        schema_version: SCHEMA_VERSION,
        left_var: left.trim().to_string(),
        right_var: right.trim().to_string(),
        rows,
        legend: level_legend(),
    })
}

impl DebateChartData {
    pub fn row(&self, combo: Combo) -> Option<&DebateRow> {
        self.rows.iter().find(|r| r.combo == combo)
    }

    /// The same debate with the two sides exchanged.
    pub fn swapped(&self) -> Self {
        let mut out = self.clone();
        core::mem::swap(&mut out.left_var, &mut out.right_var);
        for row in &mut out.rows {
            core::mem::swap(&mut row.left, &mut row.right);
        }
        out
    }

    fn score(&self, left_side: bool, combo: Combo) -> u8 {
        self.row(combo).map_or(0, |r| if left_side { r.left.value() } else { r.right.value() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Winner {
    LeftCauses,
    RightCauses,
    None,
    Conflict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DominanceSign {
    Positive,
    Negative,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub winner: Winner,
    pub sign: DominanceSign,
    pub consistency: bool,
    pub notes: Vec<String>,
}

/// Thresholds of the dominance rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceConfig {
    /// Minimum general score of the winning side.
    pub min_general: u8,
    /// Minimum lead over the other side's general score.
    pub min_margin: u8,
}

impl Default for DominanceConfig {
    fn default() -> Self {
        DominanceConfig { min_general: 3, min_margin: 1 }
    }
}

const HH: Combo = Combo::Leveled { cause: Level::Higher, effect: Level::Higher };
const HL: Combo = Combo::Leveled { cause: Level::Higher, effect: Level::Lower };
const LH: Combo = Combo::Leveled { cause: Level::Lower, effect: Level::Higher };
const LL: Combo = Combo::Leveled { cause: Level::Lower, effect: Level::Lower };

pub fn judge_dominance(chart: &DebateChartData) -> DominanceVerdict {
    judge_dominance_with(chart, &DominanceConfig::default())
}

pub fn judge_dominance_with(chart: &DebateChartData, config: &DominanceConfig) -> DominanceVerdict {
    let general = |left: bool| chart.row(Combo::General).and_then(|r| if left { r.left.score } else { r.right.score });
    let wins = |left: bool| match general(left) {
        Some(own) => {
            let other = general(!left).unwrap_or(0);
            own >= config.min_general && i16::from(own) - i16::from(other) >= i16::from(config.min_margin)
        }
        None => false,
    };
    let (lw, rw) = (wins(true), wins(false));
    let mut notes = Vec::new();
    let side = match (lw, rw) {
        (true, true) => {
            notes.push("both directions pass the dominance test".to_string());
            return DominanceVerdict { winner: Winner::Conflict, sign: DominanceSign::Indeterminate, consistency: false, notes };
        }
        (false, false) => {
            notes.push(format!(
                "no side reaches general score {} with a lead of {}",
                config.min_general, config.min_margin
            ));
            return DominanceVerdict { winner: Winner::None, sign: DominanceSign::Indeterminate, consistency: false, notes };
        }
        (true, false) => true,
        (false, true) => false,
    };
    let (winner, cause, effect) = if side {
        (Winner::LeftCauses, &chart.left_var, &chart.right_var)
    } else {
        (Winner::RightCauses, &chart.right_var, &chart.left_var)
    };
    notes.push(format!("{cause} dominates as the cause of {effect}"));

    let s = |combo| chart.score(side, combo);
    let same = s(HH).max(s(LL));
    let opposite = s(HL).max(s(LH));
    let sign = match same.cmp(&opposite) {
        core::cmp::Ordering::Greater => DominanceSign::Positive,
        core::cmp::Ordering::Less => DominanceSign::Negative,
        core::cmp::Ordering::Equal => DominanceSign::Indeterminate,
    };
    let (concordant, discordant) = match sign {
        DominanceSign::Positive => ([HH, LL], [HL, LH]),
        DominanceSign::Negative => ([HL, LH], [HH, LL]),
        DominanceSign::Indeterminate => {
            notes.push("same-level and opposite-level rows tie".to_string());
            return DominanceVerdict { winner, sign, consistency: false, notes };
        }
    };
    let floor = concordant.iter().map(|&c| s(c)).min().unwrap_or(0);
    let ceiling = discordant
        .iter()
        .flat_map(|&c| [chart.score(true, c), chart.score(false, c)])
        .max()
        .unwrap_or(0);
    let consistency = floor >= ceiling;
    if !consistency {
        notes.push(format!("a discordant row scores {ceiling}, above the concordant minimum {floor}"));
    }
    DominanceVerdict { winner, sign, consistency, notes }
}
