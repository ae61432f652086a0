//! The two prompt batteries: the 10-prompt causal debate over a variable
//! pair and the 5-prompt mediator/confounder environment query for one
//! directed relation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Embedded in every prompt id and transcript record; bump on any template change.
pub const TEMPLATE_VERSION: &str = "causal-audit-prompts/1";

const DEBATE_PREFIX: &str =
    "On a scale from 1 to 4, where 4 represents strong or most likely, rate the cause-and-effect relationship: ";
const ENVIRONMENT_PREFIX: &str =
    "On a scale from 1 to 4, 4 represents strong or most likely, rate the cause-and-effect relationship 'For a ";
const ENVIRONMENT_TAIL: &str = "'. Make a concise list of mediators in that relation and assign strengths to them \
(weak, medium, strong). Also make a concise list of confounders in that relation and assign strengths to them \
(weak, medium, strong).";
/// Optional request for machine-friendly formatting of environment answers.
pub const STRUCTURED_SUFFIX: &str = "Format mediators and confounders as a bulleted list with the strength in \
parentheses, and state the rating as 'Rating: N'.";

pub const DEFAULT_UNIT: &str = "county";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Higher,
    Lower,
}

impl Level {
    pub fn word(self) -> &'static str {
        match self {
            Level::Higher => "higher",
            Level::Lower => "lower",
        }
    }
}

/// Level assignment for cause and effect. `General` asks about change
/// without levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Combo {
    General,
    Leveled { cause: Level, effect: Level },
}

impl Combo {
    /// General first, then (H,H), (H,L), (L,H), (L,L).
    pub const ALL: [Combo; 5] = [
        Combo::General,
        Combo::Leveled { cause: Level::Higher, effect: Level::Higher },
        Combo::Leveled { cause: Level::Higher, effect: Level::Lower },
        Combo::Leveled { cause: Level::Lower, effect: Level::Higher },
        Combo::Leveled { cause: Level::Lower, effect: Level::Lower },
    ];

    pub fn leveled(cause: Level, effect: Level) -> Self {
        Combo::Leveled { cause, effect }
    }

    pub fn cause_level(self) -> Option<Level> {
        match self {
            Combo::General => None,
            Combo::Leveled { cause, .. } => Some(cause),
        }
    }

    pub fn effect_level(self) -> Option<Level> {
        match self {
            Combo::General => None,
            Combo::Leveled { effect, .. } => Some(effect),
        }
    }

    pub fn is_general(self) -> bool {
        self == Combo::General
    }

    /// The relation phrase, e.g. `higher smoking causes lower life expectancy`.
    pub fn relation(self, cause: &str, effect: &str) -> String {
        match self {
            Combo::General => format!("changing {cause} causes a change in {effect}"),
            Combo::Leveled { cause: lc, effect: le } => {
                format!("{} {cause} causes {} {effect}", lc.word(), le.word())
            }
        }
    }
}

impl fmt::Display for Combo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combo::General => f.write_str("general"),
            Combo::Leveled { cause, effect } => write!(f, "{}-{}", cause.word(), effect.word()),
        }
    }
}

impl FromStr for Combo {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, PromptError> {
        let level = |w: &str| match w {
            "higher" => Ok(Level::Higher),
            "lower" => Ok(Level::Lower),
            _ => Err(PromptError::UnknownCombo(s.to_string())),
        };
        match s.trim().to_ascii_lowercase().as_str() {
            "general" => Ok(Combo::General),
            other => {
                let (c, e) = other.split_once('-').ok_or_else(|| PromptError::UnknownCombo(s.to_string()))?;
                Ok(Combo::Leveled { cause: level(c)?, effect: level(e)? })
            }
        }
    }
}

impl From<Combo> for String {
    fn from(c: Combo) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Combo {
    type Error = PromptError;

    fn try_from(s: String) -> Result<Self, PromptError> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Battery {
    Debate,
    Environment,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("variable name is empty")]
    EmptyVariableName,
    #[error("unknown level combination {0:?}")]
    UnknownCombo(String),
}

/// Stable identity of one rendered prompt.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PromptId {
    pub template_version: String,
    pub battery: Battery,
    pub cause: String,
    pub effect: String,
    pub combo: Combo,
    #[serde(default)]
    pub structured: bool,
}

impl PromptId {
    pub fn new(battery: Battery, cause: &str, effect: &str, combo: Combo, structured: bool) -> Self {
        PromptId {
            template_version: TEMPLATE_VERSION.to_string(),
            battery,
            cause: cause.trim().to_string(),
            effect: effect.trim().to_string(),
            combo,
            structured,
        }
    }

    /// `version|battery|cause|effect|combo[|structured]`.
    pub fn key(&self) -> String {
        let battery = match self.battery {
            Battery::Debate => "debate",
            Battery::Environment => "environment",
        };
        let mut key = format!("{}|{battery}|{}|{}|{}", self.template_version, self.cause, self.effect, self.combo);
        if self.structured {
            key.push_str("|structured");
        }
        key
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub id: PromptId,
    pub text: String,
}

impl RenderedPrompt {
    pub fn battery(&self) -> Battery {
        self.id.battery
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebatePromptSet {
    pub a: String,
    pub b: String,
    /// A as cause (5 combos), then B as cause (5 combos).
    pub prompts: Vec<RenderedPrompt>,
}

fn checked(name: &str) -> Result<&str, PromptError> {
    let t = name.trim();
    if t.is_empty() {
        Err(PromptError::EmptyVariableName)
    } else {
        Ok(t)
    }
}

fn render_debate_prompt(cause: &str, effect: &str, combo: Combo) -> RenderedPrompt {
    RenderedPrompt {
        id: PromptId::new(Battery::Debate, cause, effect, combo, false),
        text: format!("{DEBATE_PREFIX}{}.", combo.relation(cause, effect)),
    }
}

/// The 10 direct-relation prompts for the pair, both directions.
pub fn render_debate(a: &str, b: &str) -> Result<DebatePromptSet, PromptError> {
    let (a, b) = (checked(a)?, checked(b)?);
    let mut prompts = Vec::with_capacity(10);
    for (cause, effect) in [(a, b), (b, a)] {
        for combo in Combo::ALL {
            prompts.push(render_debate_prompt(cause, effect, combo));
        }
    }
    Ok(DebatePromptSet { a: a.to_string(), b: b.to_string(), prompts })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentOptions {
    /// Unit of observation named in the prompt, e.g. "county".
    pub unit: String,
    pub structured_suffix: bool,
}

impl Default for EnvironmentOptions {
    fn default() -> Self {
        EnvironmentOptions { unit: DEFAULT_UNIT.to_string(), structured_suffix: false }
    }
}

/// One mediator/confounder prompt for a directed, leveled relation.
pub fn render_environment(
    cause: &str,
    effect: &str,
    combo: Combo,
    options: &EnvironmentOptions,
) -> Result<RenderedPrompt, PromptError> {
    let (cause, effect) = (checked(cause)?, checked(effect)?);
    let mut text = format!(
        "{ENVIRONMENT_PREFIX}{}, {}{ENVIRONMENT_TAIL}",
        options.unit.trim(),
        combo.relation(cause, effect)
    );
    if options.structured_suffix {
        text.push(' ');
        text.push_str(STRUCTURED_SUFFIX);
    }
    Ok(RenderedPrompt {
        id: PromptId::new(Battery::Environment, cause, effect, combo, options.structured_suffix),
        text,
    })
}

/// All five combos for one direction.
pub fn render_environment_battery(
    cause: &str,
    effect: &str,
    options: &EnvironmentOptions,
) -> Result<Vec<RenderedPrompt>, PromptError> {
    Combo::ALL.iter().map(|&c| render_environment(cause, effect, c, options)).collect()
}

/// A prompt text recognized by [`parse_prompt`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub id: PromptId,
    /// Unit term, environment prompts only.
    pub unit: Option<String>,
}

fn parse_relation(rel: &str) -> Option<(String, String, Combo)> {
    if let Some(rest) = rel.strip_prefix("changing ") {
        let (cause, effect) = rest.split_once(" causes a change in ")?;
        return Some((cause.to_string(), effect.to_string(), Combo::General));
    }
    let (lc, rest) = if let Some(r) = rel.strip_prefix("higher ") {
        (Level::Higher, r)
    } else {
        (Level::Lower, rel.strip_prefix("lower ")?)
    };
    let hi = rest.find(" causes higher ").map(|i| (i, Level::Higher, " causes higher ".len()));
    let lo = rest.find(" causes lower ").map(|i| (i, Level::Lower, " causes lower ".len()));
    let (i, le, len) = match (hi, lo) {
        (Some(h), Some(l)) => {
            if h.0 <= l.0 {
                h
            } else {
                l
            }
        }
        (Some(h), None) => h,
        (None, Some(l)) => l,
        (None, None) => return None,
    };
    Some((rest[..i].to_string(), rest[i + len..].to_string(), Combo::leveled(lc, le)))
}

/// Template-aware matcher: recovers the id (and unit) a prompt text was
/// rendered from under the current template version.
pub fn parse_prompt(text: &str) -> Option<ParsedPrompt> {
    if let Some(rest) = text.strip_prefix(DEBATE_PREFIX) {
        let rel = rest.strip_suffix('.')?;
        let (cause, effect, combo) = parse_relation(rel)?;
        let parsed = ParsedPrompt { id: PromptId::new(Battery::Debate, &cause, &effect, combo, false), unit: None };
        return (render_debate_prompt(&cause, &effect, combo).text == text).then_some(parsed);
    }
    let rest = text.strip_prefix(ENVIRONMENT_PREFIX)?;
    let (unit, rest) = rest.split_once(", ")?;
    let (rest, structured) = match rest.strip_suffix(STRUCTURED_SUFFIX) {
        Some(r) => (r.strip_suffix(' ')?, true),
        None => (rest, false),
    };
    let rel = rest.strip_suffix(ENVIRONMENT_TAIL)?;
    let (cause, effect, combo) = parse_relation(rel)?;
    let options = EnvironmentOptions { unit: unit.to_string(), structured_suffix: structured };
    let rendered = render_environment(&cause, &effect, combo, &options).ok()?;
    (rendered.text == text).then_some(ParsedPrompt { id: rendered.id, unit: Some(options.unit) })
}
