//! Rule-based extraction of ratings, mediators and confounders from free-text
//! LLM responses.
//!
//! Every function here is total: malformed input yields absent scores, empty
//! lists and warnings, never an error. Warning offsets are byte offsets into
//! the raw response.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::prompt::PromptId;
use crate::text::normalize_label;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRating {
    pub prompt_id: PromptId,
    /// 1-4 when a rating phrase was found.
    pub score: Option<u8>,
    /// The sentence the score was read from.
    pub justification: Option<String>,
    pub raw: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Weak = 1,
    Medium = 2,
    Strong = 3,
}

impl Strength {
    pub fn value(self) -> u8 {
        self as u8
    }

    fn from_word(word: &str) -> Option<Self> {
        match word {
            "weak" | "low" => Some(Strength::Weak),
            "medium" | "moderate" => Some(Strength::Medium),
            "strong" | "high" => Some(Strength::Strong),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Unspecified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Mediator,
    Confounder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    /// Normalized name, used for merging.
    pub name: String,
    /// Name as written in the response.
    pub label: String,
    pub kind: EntityKind,
    pub strength: Strength,
    pub sign: Sign,
    pub rationale: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarningKind {
    /// A mediator/confounder section header with no parsable items.
    MalformedList,
    /// An item without a strength keyword; it was recorded as weak.
    MissingStrength,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub kind: WarningKind,
    pub offset: usize,
    pub len: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentResult {
    pub prompt_id: PromptId,
    pub rating: RelationRating,
    pub mediators: Vec<EntityMention>,
    pub confounders: Vec<EntityMention>,
    pub caveats: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<ParseWarning>,
}

/// Keyword lists driving sign inference and caveat detection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParserConfig {
    pub positive_cues: Vec<String>,
    pub negative_cues: Vec<String>,
    pub hedges: Vec<String>,
}

fn strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            positive_cues: strings(&[
                "improved", "improve", "improves", "improving", "improvement", "higher", "increased", "increasing",
                "strong", "stronger", "good", "better", "greater", "enhanced", "adequate", "abundant",
            ]),
            negative_cues: strings(&[
                "limited", "lower", "decreased", "decreasing", "reduced", "poor", "poorer", "worse", "lack",
                "lacking", "insufficient", "inadequate", "scarce", "negative",
            ]),
            hedges: strings(&[
                "correlation does not imply causation",
                "important to note",
                "does not necessarily",
                "doesn't necessarily",
                "not guarantee",
                "hypothetical",
                "counterintuitive",
                "keep in mind",
            ]),
        }
    }
}

/// Byte ranges of sentences. A sentence ends at `.`, `!` or `?` followed by
/// whitespace or end of text, or at a line break.
fn sentences(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let push = |s: usize, e: usize, out: &mut Vec<(usize, usize)>| {
        let piece = &text[s..e];
        let lead = piece.len() - piece.trim_start().len();
        let trimmed = piece.trim();
        if trimmed.chars().any(|c| c.is_alphanumeric()) {
            out.push((s + lead, s + lead + trimmed.len()));
        }
    };
    for (i, &b) in bytes.iter().enumerate() {
        let end = match b {
            b'\n' => Some(i),
            b'.' | b'!' | b'?' => {
                let next = bytes.get(i + 1);
                if next.is_none_or(|n| n.is_ascii_whitespace()) {
                    Some(i + 1)
                } else {
                    None
                }
            }
            _ => None,
        };
        if let Some(e) = end {
            push(start, e, &mut out);
            start = i + 1;
        }
    }
    if start < text.len() {
        push(start, text.len(), &mut out);
    }
    out
}

/// Reads a 1-4 digit at `pos` (after optional spaces, `*`, quotes), requiring
/// a non-numeric boundary after it.
fn digit_at(lower: &[u8], mut pos: usize) -> Option<u8> {
    while pos < lower.len() && matches!(lower[pos], b' ' | b'*' | b'"' | b'\'') {
        pos += 1;
    }
    let d = *lower.get(pos)?;
    if !(b'1'..=b'4').contains(&d) {
        return None;
    }
    match (lower.get(pos + 1), lower.get(pos + 2)) {
        (Some(n), _) if n.is_ascii_digit() => None,
        (Some(b'.' | b','), Some(n)) if n.is_ascii_digit() => None,
        _ => Some(d - b'0'),
    }
}

fn find_all<'a>(hay: &'a str, needle: &'a str) -> impl Iterator<Item = usize> + 'a {
    hay.match_indices(needle).map(|(i, _)| i)
}

fn word_start(lower: &[u8], i: usize) -> bool {
    i == 0 || !lower[i - 1].is_ascii_alphanumeric()
}

fn sentence_score(sentence: &str) -> Option<u8> {
    let lower = sentence.to_ascii_lowercase();
    let b = lower.as_bytes();
    for pat in ["rated a ", "rated as a ", "rated as ", "rated at ", "rated it a ", "rated it as a ", "rating of a ", "rating of "] {
        for i in find_all(&lower, pat) {
            if word_start(b, i) {
                if let Some(d) = digit_at(b, i + pat.len()) {
                    return Some(d);
                }
            }
        }
    }
    // "rate ... as a N" within the sentence.
    for i in find_all(&lower, "rate ") {
        if !word_start(b, i) {
            continue;
        }
        for pat in [" as a ", " as "] {
            for j in find_all(&lower[i..], pat) {
                if let Some(d) = digit_at(b, i + j + pat.len()) {
                    return Some(d);
                }
            }
        }
    }
    None
}

fn standalone_digit(sentence: &str) -> Option<u8> {
    let b = sentence.as_bytes();
    for (i, &c) in b.iter().enumerate() {
        if !(b'1'..=b'4').contains(&c) {
            continue;
        }
        let before_ok = i == 0 || !(b[i - 1].is_ascii_alphanumeric() || b[i - 1] == b'.');
        let after_ok = match (b.get(i + 1), b.get(i + 2)) {
            (Some(n), _) if n.is_ascii_alphanumeric() => false,
            (Some(b'.' | b','), Some(n)) if n.is_ascii_digit() => false,
            _ => true,
        };
        if before_ok && after_ok {
            return Some(c - b'0');
        }
    }
    None
}

/// Score plus the sentence it came from.
fn find_score(text: &str) -> Option<(u8, String)> {
    let spans = sentences(text);
    let sentence_of = |pos: usize| {
        spans
            .iter()
            .find(|(s, e)| (*s..*e).contains(&pos))
            .map(|&(s, e)| text[s..e].to_string())
            .unwrap_or_default()
    };

    // 1. "Rating: N"
    let lower = text.to_ascii_lowercase();
    for i in find_all(&lower, "rating:") {
        if let Some(d) = digit_at(lower.as_bytes(), i + "rating:".len()) {
            return Some((d, sentence_of(i)));
        }
    }
    // 2. rating phrases within one sentence.
    for &(s, e) in &spans {
        if let Some(d) = sentence_score(&text[s..e]) {
            return Some((d, text[s..e].to_string()));
        }
    }
    // 3. a bare 1-4 in the first two sentences.
    for &(s, e) in spans.iter().take(2) {
        if let Some(d) = standalone_digit(&text[s..e]) {
            return Some((d, text[s..e].to_string()));
        }
    }
    None
}

/// Pulls the 1-4 rating out of a response.
pub fn extract_rating(prompt_id: PromptId, text: &str) -> RelationRating {
    let found = find_score(text);
    RelationRating {
        prompt_id,
        score: found.as_ref().map(|f| f.0),
        justification: found.map(|f| f.1),
        raw: text.to_string(),
    }
}

const TRAILING_JUNK: &[char] = &[':', ';', ',', '.', '!', '?', '-', '\u{2013}', '\u{2014}', '*', '_', '#', '"', '\''];

fn strip_markup(s: &str) -> String {
    s.replace("**", "").replace("__", "").replace('`', "")
}

/// Removes every `(weak|medium|strong)` group.
fn strip_strength_parens(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(open) = rest.find('(') {
        let Some(close) = rest[open..].find(')').map(|c| open + c) else {
            break;
        };
        let inner = rest[open + 1..close].trim().to_ascii_lowercase();
        out.push_str(&rest[..open]);
        if Strength::from_word(&inner).is_none() {
            out.push_str(&rest[open..=close]);
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// Case-fold, trim, collapse whitespace, drop trailing punctuation and any
/// parenthesized strength.
pub fn normalize_entity_name(raw: &str) -> String {
    let s = strip_strength_parens(&strip_markup(raw));
    let s = s.trim().trim_end_matches(|c: char| TRAILING_JUNK.contains(&c) || c.is_whitespace());
    let s = s.trim_start_matches(|c: char| c == '*' || c == '_' || c == '#' || c.is_whitespace());
    normalize_label(s)
}

fn display_label(raw: &str) -> String {
    let s = strip_strength_parens(&strip_markup(raw));
    let s = s.trim().trim_end_matches(|c: char| TRAILING_JUNK.contains(&c) || c.is_whitespace());
    let mut out = String::new();
    for w in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

/// Strips a list marker, returning whether one was present.
fn strip_bullet(line: &str) -> (bool, &str) {
    for marker in ["- ", "* ", "\u{2022} ", "+ ", "\u{2013} ", "\\item "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return (true, rest.trim_start());
        }
    }
    if let Some(rest) = line.strip_prefix("\\item") {
        return (true, rest.trim_start());
    }
    let digits = line.bytes().take_while(|b| b.is_ascii_digit()).count();
    if digits > 0 && digits <= 3 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return (true, r.trim_start());
        }
    }
    (false, line)
}

struct ItemParts {
    label: String,
    name: String,
    strength: Option<Strength>,
    rationale: String,
}

fn first_word(s: &str) -> (String, &str) {
    let s = s.trim_start_matches(|c: char| c.is_whitespace() || TRAILING_JUNK.contains(&c) || c == '(');
    let end = s.find(|c: char| !c.is_alphabetic()).unwrap_or(s.len());
    (s[..end].to_ascii_lowercase(), &s[end..])
}

fn clean_rationale(s: &str) -> String {
    let s = s.trim_start_matches(|c: char| c.is_whitespace() || TRAILING_JUNK.contains(&c) || c == ')');
    s.trim().to_string()
}

fn parse_item(body: &str) -> Option<ItemParts> {
    let s = strip_markup(body);
    let colon = s.find(':');
    let head_end = colon.unwrap_or(s.len());

    // "Name (Strength) ..." with the strength group before any colon.
    let mut search = 0;
    while let Some(open) = s[search..head_end].find('(').map(|o| search + o) {
        let Some(close) = s[open..].find(')').map(|c| open + c) else {
            break;
        };
        let inner = s[open + 1..close].trim().to_ascii_lowercase();
        if let Some(strength) = Strength::from_word(&inner) {
            let name_raw = &s[..open];
            return finish(name_raw, Some(strength), &s[close + 1..]);
        }
        search = close + 1;
        if search >= head_end {
            break;
        }
    }

    let head = &s[..head_end];
    let tail = colon.map(|c| &s[c + 1..]).unwrap_or("");
    // "Name - Strong: ..."
    if let Some(dash) = head.rfind(" - ").or_else(|| head.rfind(" \u{2013} ")) {
        let (w, rest) = first_word(&head[dash..]);
        if let (Some(strength), true) = (Strength::from_word(&w), rest.trim().is_empty()) {
            return finish(&head[..dash], Some(strength), tail);
        }
    }
    // "Name: Strong. ..." / "Name: strong - ..."
    if colon.is_some() {
        let (w, rest) = first_word(tail);
        if let Some(strength) = Strength::from_word(&w) {
            let boundary_ok = rest.is_empty() || rest.starts_with(|c: char| !c.is_alphanumeric());
            if boundary_ok {
                return finish(head, Some(strength), rest);
            }
        }
        return finish(head, None, tail);
    }
    // Bare name without delimiter; long sentences are not items.
    if head.split_whitespace().count() <= 8 && !head.trim_end().ends_with('.') {
        return finish(head, None, "");
    }
    None
}

fn finish(name_raw: &str, strength: Option<Strength>, rest: &str) -> Option<ItemParts> {
    let name = normalize_entity_name(name_raw);
    if name.is_empty() || name.split_whitespace().count() > 12 {
        return None;
    }
    Some(ItemParts { label: display_label(name_raw), name, strength, rationale: clean_rationale(rest) })
}

fn header_kind(body: &str, is_bullet: bool, item: Option<&ItemParts>) -> Option<EntityKind> {
    if item.is_some_and(|i| i.strength.is_some()) {
        return None;
    }
    let lower = body.to_ascii_lowercase();
    let m = lower.find("mediator");
    let c = lower.find("confounder");
    let kind = match (m, c) {
        (Some(m), Some(c)) => {
            if m <= c {
                EntityKind::Mediator
            } else {
                EntityKind::Confounder
            }
        }
        (Some(_), None) => EntityKind::Mediator,
        (None, Some(_)) => EntityKind::Confounder,
        (None, None) => return None,
    };
    if is_bullet {
        let stripped = strip_markup(body);
        let stripped = stripped.trim().trim_end_matches(|c: char| TRAILING_JUNK.contains(&c));
        if stripped.chars().count() > 60 {
            return None;
        }
    }
    Some(kind)
}

fn infer_sign(rationale: &str, config: &ParserConfig) -> Sign {
    let lower = rationale.to_lowercase();
    for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        if config.positive_cues.iter().any(|c| c == word) {
            return Sign::Positive;
        }
        if config.negative_cues.iter().any(|c| c == word) {
            return Sign::Negative;
        }
    }
    Sign::Unspecified
}

/// Mediators, confounders and diagnostics found in a response.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Entities {
    pub mediators: Vec<EntityMention>,
    pub confounders: Vec<EntityMention>,
    pub warnings: Vec<ParseWarning>,
}

struct Section {
    kind: EntityKind,
    offset: usize,
    end: usize,
    items: usize,
}

/// Locates mediator and confounder sections and parses their list items.
pub fn extract_entities(text: &str, config: &ParserConfig) -> Entities {
    let mut out = Entities::default();
    let mut section: Option<Section> = None;
    // (kind, index) of the last item, for indented continuation lines.
    let mut last: Option<(EntityKind, usize)> = None;
    let mut prev_blank = true;

    let close = |s: Section, out: &mut Entities| {
        if s.items == 0 {
            out.warnings.push(ParseWarning {
                kind: WarningKind::MalformedList,
                offset: s.offset,
                len: s.end - s.offset,
                message: alloc::format!(
                    "{} section without parsable items",
                    match s.kind {
                        EntityKind::Mediator => "mediator",
                        EntityKind::Confounder => "confounder",
                    }
                ),
            });
        }
    };

    let mut offset = 0;
    for raw_line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += raw_line.len();
        let line = raw_line.trim_end_matches(['\n', '\r']);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            prev_blank = true;
            continue;
        }
        let lead = line.len() - line.trim_start().len();
        let (is_bullet, body) = strip_bullet(trimmed);
        let bold_lead = body.starts_with("**") || body.starts_with("__");
        let item = if is_bullet || bold_lead { parse_item(body) } else { None };

        if let Some(kind) = header_kind(body, is_bullet, item.as_ref()) {
            if let Some(s) = section.take() {
                close(s, &mut out);
            }
            section = Some(Section { kind, offset: line_start + lead, end: line_start + line.len(), items: 0 });
            last = None;
            prev_blank = false;
            continue;
        }

        match (&mut section, item) {
            (Some(s), Some(parts)) => {
                s.items += 1;
                s.end = line_start + line.len();
                let strength = match parts.strength {
                    Some(st) => st,
                    None => {
                        out.warnings.push(ParseWarning {
                            kind: WarningKind::MissingStrength,
                            offset: line_start + lead,
                            len: trimmed.len(),
                            message: alloc::format!("no strength for {:?}; recorded as weak", parts.label),
                        });
                        Strength::Weak
                    }
                };
                let mention = EntityMention {
                    sign: infer_sign(&parts.rationale, config),
                    name: parts.name,
                    label: parts.label,
                    kind: s.kind,
                    strength,
                    rationale: parts.rationale,
                };
                let list = match s.kind {
                    EntityKind::Mediator => &mut out.mediators,
                    EntityKind::Confounder => &mut out.confounders,
                };
                list.push(mention);
                last = Some((s.kind, list.len() - 1));
            }
            (Some(s), None) => {
                s.end = line_start + line.len();
                match last {
                    Some((kind, idx)) if lead > 0 && !prev_blank && !is_bullet => {
                        let list = match kind {
                            EntityKind::Mediator => &mut out.mediators,
                            EntityKind::Confounder => &mut out.confounders,
                        };
                        let m = &mut list[idx];
                        if !m.rationale.is_empty() {
                            m.rationale.push(' ');
                        }
                        m.rationale.push_str(trimmed);
                        if m.sign == Sign::Unspecified {
                            m.sign = infer_sign(&m.rationale, config);
                        }
                    }
                    _ => last = None,
                }
            }
            (None, _) => {}
        }
        prev_blank = false;
    }
    if let Some(s) = section.take() {
        close(s, &mut out);
    }
    out
}

fn caveats(text: &str, config: &ParserConfig) -> Vec<String> {
    sentences(text)
        .into_iter()
        .map(|(s, e)| &text[s..e])
        .filter(|s| {
            let lower = s.to_lowercase();
            config.hedges.iter().any(|h| lower.contains(h.as_str()))
        })
        .map(|s| s.to_string())
        .collect()
}

/// Full parse of an environment-battery response.
pub fn parse_environment(prompt_id: PromptId, text: &str, config: &ParserConfig) -> EnvironmentResult {
    let entities = extract_entities(text, config);
    EnvironmentResult {
        rating: extract_rating(prompt_id.clone(), text),
        prompt_id,
        mediators: entities.mediators,
        confounders: entities.confounders,
        caveats: caveats(text, config),
        warnings: entities.warnings,
    }
}
