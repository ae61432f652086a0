//! Linear-Gaussian BIC, per node and per graph. Higher is better.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::graph::{CausalGraph, VariableKind};
use crate::linalg::least_squares;
use crate::math;

/// Residual variance below which the node is treated as an exact copy of its parents.
pub const MIN_RESIDUAL_VARIANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BicError {
    #[error("column {0} is out of range")]
    NoSuchColumn(usize),
    #[error("a node cannot be its own parent")]
    SelfParent,
    #[error("parent design matrix is rank deficient")]
    RankDeficientParents,
    #[error("residual variance {0:e} is effectively zero (duplicated column?)")]
    ZeroResidualVariance(f64),
}

/// Regresses column `node` on `parents` plus intercept and returns
/// `LL - (k/2) ln n` with `k = |parents| + 2` and the Gaussian maximum
/// likelihood `LL = -(n/2)(ln(2 pi sigma^2) + 1)`, `sigma^2 = RSS / n`.
pub fn bic_node(data: &Dataset, node: usize, parents: &[usize]) -> Result<f64, BicError> {
    if node >= data.n_cols() {
        return Err(BicError::NoSuchColumn(node));
    }
    if let Some(&bad) = parents.iter().find(|&&p| p >= data.n_cols()) {
        return Err(BicError::NoSuchColumn(bad));
    }
    if parents.contains(&node) {
        return Err(BicError::SelfParent);
    }
    let regressors: Vec<&[f64]> = parents.iter().map(|&p| data.column(p)).collect();
    let fit = least_squares(&regressors, data.column(node), true).map_err(|_| BicError::RankDeficientParents)?;
    let n = data.n_rows() as f64;
    let sigma2 = fit.rss / n;
    if sigma2 < MIN_RESIDUAL_VARIANCE {
        return Err(BicError::ZeroResidualVariance(sigma2));
    }
    let log_lik = -(n / 2.0) * (math::ln(math::TWO_PI * sigma2) + 1.0);
    let k = (parents.len() + 2) as f64;
    Ok(log_lik - (k / 2.0) * math::ln(n))
}

/// Per-node and total BIC of one graph version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicReport {
    pub graph_version: u64,
    pub n: usize,
    /// Keyed by variable name.
    pub per_node: BTreeMap<String, f64>,
    pub total: f64,
    /// Nodes that could not be scored, with the reason.
    #[serde(default)]
    pub failures: BTreeMap<String, String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl BicReport {
    /// `total - previous.total`.
    pub fn delta(&self, previous: &BicReport) -> f64 {
        self.total - previous.total
    }
}

/// Scores every observed variable on its directed in-neighbours. Undirected
/// edges contribute no parents; variables without a bound column are skipped
/// with a warning, both as nodes and as parents.
pub fn bic_graph(data: &Dataset, graph: &CausalGraph) -> BicReport {
    let mut per_node = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut warnings = Vec::new();

    for v in graph.variables() {
        let column = match (v.kind, v.column) {
            (VariableKind::Observed, Some(c)) if c < data.n_cols() => c,
            (VariableKind::Observed, Some(c)) => {
                failures.insert(v.name.clone(), BicError::NoSuchColumn(c).to_string());
                continue;
            }
            _ => {
                warnings.push(format!("{:?} has no data column; skipped", v.name));
                continue;
            }
        };
        let mut parents = Vec::new();
        for p in graph.parents(v.id) {
            match graph.variable(p).and_then(|pv| pv.column) {
                Some(c) => parents.push(c),
                None => warnings.push(format!(
                    "parent {:?} of {:?} has no data column; left out of its parent set",
                    graph.name(p),
                    v.name
                )),
            }
        }
        match bic_node(data, column, &parents) {
            Ok(score) => {
                per_node.insert(v.name.clone(), score);
            }
            Err(e) => {
                failures.insert(v.name.clone(), e.to_string());
            }
        }
    }
    let total = per_node.values().sum();
    BicReport { graph_version: graph.version(), n: data.n_rows(), per_node, total, failures, warnings }
}
