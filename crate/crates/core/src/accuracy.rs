//! Summary statistics over hand-labelled rating tables.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// One labelled query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyRow {
    /// The prompt proposed the true relationship (as opposed to its inverse).
    /// Partitions the rows into the correct and inverse groups.
    pub proposed_direction_correct: bool,
    /// The model's answer was judged to give the right direction.
    pub judged_correct: bool,
    pub score: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStats {
    /// Rows in the group, scored or not.
    pub n: usize,
    /// Over present scores; `None` when the group has none.
    pub min: Option<u8>,
    pub max: Option<u8>,
    /// Lower middle for an even count.
    pub median: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n_queries: usize,
    pub direction_correct: usize,
    pub numeric_produced: usize,
    pub inverse_group: GroupStats,
    pub correct_group: GroupStats,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AccuracyError {
    #[error("no rows")]
    EmptyInput,
    #[error("row {row}: score {score} is outside 1..=4")]
    ScoreOutOfRange { row: usize, score: u8 },
}

fn group(rows: &[AccuracyRow], proposed_correct: bool) -> GroupStats {
    let members: Vec<&AccuracyRow> = rows.iter().filter(|r| r.proposed_direction_correct == proposed_correct).collect();
    let mut scores: Vec<u8> = members.iter().filter_map(|r| r.score).collect();
    scores.sort_unstable();
    GroupStats {
        n: members.len(),
        min: scores.first().copied(),
        max: scores.last().copied(),
        median: if scores.is_empty() { None } else { Some(scores[(scores.len() - 1) / 2]) },
    }
}

pub fn accuracy_report(rows: &[AccuracyRow]) -> Result<AccuracyReport, AccuracyError> {
    if rows.is_empty() {
        return Err(AccuracyError::EmptyInput);
    }
    for (i, r) in rows.iter().enumerate() {
        if let Some(s) = r.score {
            if !(1..=4).contains(&s) {
                return Err(AccuracyError::ScoreOutOfRange { row: i, score: s });
            }
        }
    }
    Ok(AccuracyReport {
        n_queries: rows.len(),
        direction_correct: rows.iter().filter(|r| r.judged_correct).count(),
        numeric_produced: rows.iter().filter(|r| r.score.is_some()).count(),
        inverse_group: group(rows, false),
        correct_group: group(rows, true),
    })
}
