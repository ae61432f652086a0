//! Versioned causal graph and the analyst refinements applied to it.
//!
//! A [`CausalGraph`] is an immutable snapshot. Every refinement takes `&self`
//! and returns a new snapshot whose version is one higher; a rejected
//! refinement returns an error and the original value is untouched.
//!
//! Edges are kept sorted by unordered endpoint pair, so there is at most one
//! edge per pair and serialization order is canonical.

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::text::normalize_label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Observed,
    /// An LLM-identified concept that is not yet backed by a data column.
    Virtual,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub column: Option<usize>,
    pub kind: VariableKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Directed,
    Undirected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Discovered,
    LlmAudited,
    Manual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: VarId,
    pub target: VarId,
    pub orientation: Orientation,
    pub provenance: Provenance,
}

impl Edge {
    pub fn directed(source: VarId, target: VarId, provenance: Provenance) -> Self {
        Edge { source, target, orientation: Orientation::Directed, provenance }
    }

    pub fn undirected(a: VarId, b: VarId, provenance: Provenance) -> Self {
        let (source, target) = if a <= b { (a, b) } else { (b, a) };
        Edge { source, target, orientation: Orientation::Undirected, provenance }
    }

    #[inline]
    pub fn is_directed(&self) -> bool {
        self.orientation == Orientation::Directed
    }

    fn key(&self) -> (VarId, VarId) {
        pair_key(self.source, self.target)
    }

    fn touches(&self, v: VarId) -> bool {
        self.source == v || self.target == v
    }

    fn other(&self, v: VarId) -> VarId {
        if self.source == v {
            self.target
        } else {
            self.source
        }
    }
}

fn pair_key(a: VarId, b: VarId) -> (VarId, VarId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("no variable named {0:?}")]
    NoSuchVariable(String),
    #[error("no matching edge between {0:?} and {1:?}")]
    NoSuchEdge(String, String),
    #[error("an edge already exists between {0:?} and {1:?}")]
    EdgeExists(String, String),
    #[error("refinement would create a directed cycle")]
    WouldCreateCycle,
    #[error("directed cycle detected")]
    CycleDetected,
    #[error("variable {0:?} already exists")]
    DuplicateVariable(String),
    #[error("variable name is empty")]
    EmptyName,
    #[error("self loop on {0:?}")]
    SelfLoop(String),
    #[error("column {column} is out of range for a dataset with {n_columns} columns")]
    UnboundColumn { column: usize, n_columns: usize },
    #[error("column {column} is already bound to {holder:?}")]
    ColumnAlreadyBound { column: usize, holder: String },
    #[error("variable {0:?} is already observed")]
    AlreadyObserved(String),
    #[error("invalid graph document: {0}")]
    InvalidDocument(String),
}

/// Causal graph snapshot: variables plus directed/undirected edges whose
/// directed part is acyclic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument")]
pub struct CausalGraph {
    version: u64,
    variables: Vec<Variable>,
    edges: Vec<Edge>,
}

#[derive(Deserialize)]
struct GraphDocument {
    version: u64,
    variables: Vec<Variable>,
    edges: Vec<Edge>,
}

impl TryFrom<GraphDocument> for CausalGraph {
    type Error = GraphError;

    fn try_from(doc: GraphDocument) -> Result<Self, GraphError> {
        let mut graph = CausalGraph { version: doc.version, variables: Vec::new(), edges: Vec::new() };
        for (i, v) in doc.variables.into_iter().enumerate() {
            if v.id.index() != i {
                return Err(GraphError::InvalidDocument(format!(
                    "variable ids must be dense, found {} at position {i}",
                    v.id.0
                )));
            }
            if (v.kind == VariableKind::Observed) != v.column.is_some() {
                return Err(GraphError::InvalidDocument(format!(
                    "variable {:?}: observed variables need a column, virtual ones must not have one",
                    v.name
                )));
            }
            let id = graph.push_variable(&v.name, v.column)?;
            graph.variables[id.index()].kind = v.kind;
        }
        for e in doc.edges {
            graph.push_edge(e)?;
        }
        Ok(graph)
    }
}

impl Default for CausalGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl CausalGraph {
    pub fn new() -> Self {
        CausalGraph { version: 0, variables: Vec::new(), edges: Vec::new() }
    }

    /// Builds a version-0 graph of observed variables, one per `(name, column)`.
    pub fn from_observed<'a, I>(vars: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (&'a str, usize)>,
    {
        let mut g = Self::new();
        for (name, column) in vars {
            g.push_variable(name, Some(column))?;
        }
        Ok(g)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn variable(&self, id: VarId) -> Option<&Variable> {
        self.variables.get(id.index())
    }

    pub fn name(&self, id: VarId) -> &str {
        self.variables.get(id.index()).map(|v| v.name.as_str()).unwrap_or("?")
    }

    /// Finds a variable by name under case-fold/whitespace normalization.
    pub fn lookup(&self, name: &str) -> Option<VarId> {
        let key = normalize_label(name);
        self.variables.iter().find(|v| normalize_label(&v.name) == key).map(|v| v.id)
    }

    pub fn require(&self, name: &str) -> Result<VarId, GraphError> {
        self.lookup(name).ok_or_else(|| GraphError::NoSuchVariable(name.to_string()))
    }

    /// Adds a variable during construction. Observed iff a column is given.
    /// Does not bump the version.
    pub fn push_variable(&mut self, name: &str, column: Option<usize>) -> Result<VarId, GraphError> {
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(GraphError::EmptyName);
        }
        if self.lookup(trimmed).is_some() {
            return Err(GraphError::DuplicateVariable(trimmed.to_string()));
        }
        if let Some(c) = column {
            if let Some(holder) = self.variables.iter().find(|v| v.column == Some(c)) {
                return Err(GraphError::ColumnAlreadyBound { column: c, holder: holder.name.clone() });
            }
        }
        let id = VarId(self.variables.len() as u32);
        self.variables.push(Variable {
            id,
            name: trimmed.to_string(),
            column,
            kind: if column.is_some() { VariableKind::Observed } else { VariableKind::Virtual },
        });
        Ok(id)
    }

    /// Adds an edge during construction, enforcing every graph invariant.
    /// Does not bump the version.
    pub fn push_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        self.check_id(edge.source)?;
        self.check_id(edge.target)?;
        if edge.source == edge.target {
            return Err(GraphError::SelfLoop(self.name(edge.source).to_string()));
        }
        if self.edge_between(edge.source, edge.target).is_some() {
            return Err(GraphError::EdgeExists(
                self.name(edge.source).to_string(),
                self.name(edge.target).to_string(),
            ));
        }
        let edge = if edge.is_directed() {
            if self.reaches(edge.target, edge.source) {
                return Err(GraphError::WouldCreateCycle);
            }
            edge
        } else {
            Edge::undirected(edge.source, edge.target, edge.provenance)
        };
        self.insert_sorted(edge);
        Ok(())
    }

    fn check_id(&self, id: VarId) -> Result<(), GraphError> {
        if id.index() < self.variables.len() {
            Ok(())
        } else {
            Err(GraphError::InvalidDocument(format!("edge references unknown variable id {}", id.0)))
        }
    }

    fn position(&self, a: VarId, b: VarId) -> Result<usize, usize> {
        let key = pair_key(a, b);
        self.edges.binary_search_by(|e| e.key().cmp(&key))
    }

    fn insert_sorted(&mut self, edge: Edge) {
        match self.position(edge.source, edge.target) {
            Ok(i) => self.edges[i] = edge,
            Err(i) => self.edges.insert(i, edge),
        }
    }

    pub fn edge_between(&self, a: VarId, b: VarId) -> Option<&Edge> {
        self.position(a, b).ok().map(|i| &self.edges[i])
    }

    /// Directed in-neighbours, in id order.
    pub fn parents(&self, v: VarId) -> Vec<VarId> {
        let mut out: Vec<VarId> =
            self.edges.iter().filter(|e| e.is_directed() && e.target == v).map(|e| e.source).collect();
        out.sort_unstable();
        out
    }

    pub fn children(&self, v: VarId) -> Vec<VarId> {
        let mut out: Vec<VarId> =
            self.edges.iter().filter(|e| e.is_directed() && e.source == v).map(|e| e.target).collect();
        out.sort_unstable();
        out
    }

    /// Neighbours over any edge type.
    pub fn adjacent(&self, v: VarId) -> Vec<VarId> {
        let mut out: Vec<VarId> = self.edges.iter().filter(|e| e.touches(v)).map(|e| e.other(v)).collect();
        out.sort_unstable();
        out
    }

    /// True when a directed path leads from `from` to `to` (a node reaches itself).
    pub fn reaches(&self, from: VarId, to: VarId) -> bool {
        let mut seen = vec![false; self.variables.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if core::mem::replace(&mut seen[v.index()], true) {
                continue;
            }
            for e in &self.edges {
                if e.is_directed() && e.source == v && !seen[e.target.index()] {
                    stack.push(e.target);
                }
            }
        }
        false
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_sort().is_ok()
    }

    /// Kahn's algorithm over directed edges; ties broken by smallest id.
    pub fn topological_sort(&self) -> Result<Vec<VarId>, GraphError> {
        let n = self.variables.len();
        let mut indegree = vec![0usize; n];
        for e in self.edges.iter().filter(|e| e.is_directed()) {
            indegree[e.target.index()] += 1;
        }
        let mut ready: BinaryHeap<Reverse<VarId>> =
            (0..n).filter(|&i| indegree[i] == 0).map(|i| Reverse(VarId(i as u32))).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for e in self.edges.iter().filter(|e| e.is_directed() && e.source == v) {
                let t = e.target.index();
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(Reverse(e.target));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(GraphError::CycleDetected)
        }
    }

    fn next(&self) -> Self {
        let mut g = self.clone();
        g.version += 1;
        g
    }

    fn names(&self, a: VarId, b: VarId) -> (String, String) {
        (self.name(a).to_string(), self.name(b).to_string())
    }

    fn no_edge(&self, a: VarId, b: VarId) -> GraphError {
        let (a, b) = self.names(a, b);
        GraphError::NoSuchEdge(a, b)
    }

    /// Makes `u -> v` directed, reusing or orienting any existing pair edge.
    fn set_directed(&mut self, u: VarId, v: VarId, provenance: Provenance) -> Result<(), GraphError> {
        match self.edge_between(u, v).copied() {
            Some(e) if e.is_directed() => {
                if e.source == u {
                    Ok(())
                } else {
                    Err(GraphError::WouldCreateCycle)
                }
            }
            _ => {
                self.insert_sorted(Edge::directed(u, v, provenance));
                Ok(())
            }
        }
    }

    fn resolve_new_virtual(&mut self, name: &str, exclude: &[VarId]) -> Result<VarId, GraphError> {
        match self.lookup(name) {
            Some(id) if exclude.contains(&id) => Err(GraphError::DuplicateVariable(name.trim().to_string())),
            Some(id) if self.variables[id.index()].kind == VariableKind::Virtual => Ok(id),
            Some(_) => Err(GraphError::DuplicateVariable(name.trim().to_string())),
            None => self.push_variable(name, None),
        }
    }

    fn checked(self) -> Result<Self, GraphError> {
        if self.is_acyclic() {
            Ok(self)
        } else {
            Err(GraphError::WouldCreateCycle)
        }
    }

    /// Directs the existing edge between `a` and `b` as `a -> b`.
    pub fn orient_edge(&self, a: VarId, b: VarId) -> Result<Self, GraphError> {
        if self.edge_between(a, b).is_none() {
            return Err(self.no_edge(a, b));
        }
        let mut g = self.next();
        g.insert_sorted(Edge::directed(a, b, Provenance::LlmAudited));
        g.checked()
    }

    /// Turns the directed edge `a -> b` into `b -> a`.
    pub fn reverse_edge(&self, a: VarId, b: VarId) -> Result<Self, GraphError> {
        match self.edge_between(a, b) {
            Some(e) if e.is_directed() && e.source == a => {
                let mut g = self.next();
                g.insert_sorted(Edge::directed(b, a, Provenance::LlmAudited));
                g.checked()
            }
            _ => Err(self.no_edge(a, b)),
        }
    }

    /// Removes whatever edge joins `a` and `b`.
    pub fn remove_edge(&self, a: VarId, b: VarId) -> Result<Self, GraphError> {
        let i = self.position(a, b).map_err(|_| self.no_edge(a, b))?;
        let mut g = self.next();
        g.edges.remove(i);
        Ok(g)
    }

    /// Adds a new directed edge `a -> b`.
    pub fn add_edge(&self, a: VarId, b: VarId, provenance: Provenance) -> Result<Self, GraphError> {
        let mut g = self.next();
        g.push_edge(Edge::directed(a, b, provenance))?;
        Ok(g)
    }

    /// Splices a mediator into the directed edge `a -> b`. An existing
    /// virtual variable with the same name is reused.
    pub fn insert_mediator(&self, a: VarId, b: VarId, mediator: &str, keep_direct: bool) -> Result<Self, GraphError> {
        match self.edge_between(a, b) {
            Some(e) if e.is_directed() && e.source == a => {}
            _ => return Err(self.no_edge(a, b)),
        }
        let mut g = self.next();
        let m = g.resolve_new_virtual(mediator, &[a, b])?;
        if !keep_direct {
            let i = g.position(a, b).expect("edge checked above");
            g.edges.remove(i);
        }
        g.set_directed(a, m, Provenance::LlmAudited)?;
        g.set_directed(m, b, Provenance::LlmAudited)?;
        g.checked()
    }

    /// Adds a common cause of `a` and `b`. An existing virtual variable with
    /// the same name is reused.
    pub fn insert_confounder(&self, a: VarId, b: VarId, confounder: &str) -> Result<Self, GraphError> {
        self.check_id(a)?;
        self.check_id(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(self.name(a).to_string()));
        }
        let mut g = self.next();
        let c = g.resolve_new_virtual(confounder, &[a, b])?;
        g.set_directed(c, a, Provenance::LlmAudited)?;
        g.set_directed(c, b, Provenance::LlmAudited)?;
        g.checked()
    }

    /// Binds a virtual variable to a dataset column, making it observed.
    pub fn attach_column(&self, v: VarId, column: usize, n_columns: usize) -> Result<Self, GraphError> {
        self.check_id(v)?;
        let var = &self.variables[v.index()];
        if var.kind == VariableKind::Observed {
            return Err(GraphError::AlreadyObserved(var.name.clone()));
        }
        if column >= n_columns {
            return Err(GraphError::UnboundColumn { column, n_columns });
        }
        if let Some(holder) = self.variables.iter().find(|x| x.column == Some(column)) {
            return Err(GraphError::ColumnAlreadyBound { column, holder: holder.name.clone() });
        }
        let mut g = self.next();
        let var = &mut g.variables[v.index()];
        var.column = Some(column);
        var.kind = VariableKind::Observed;
        Ok(g)
    }

    /// Applies a name-addressed refinement. `n_columns` bounds `AttachColumn`.
    pub fn apply(&self, refinement: &Refinement, n_columns: usize) -> Result<Self, GraphError> {
        use RefinementOp::*;
        match &refinement.op {
            OrientEdge { cause, effect } => self.orient_edge(self.require(cause)?, self.require(effect)?),
            ReverseEdge { source, target } => self.reverse_edge(self.require(source)?, self.require(target)?),
            RemoveEdge { a, b } => self.remove_edge(self.require(a)?, self.require(b)?),
            AddEdge { source, target } => {
                self.add_edge(self.require(source)?, self.require(target)?, Provenance::Manual)
            }
            InsertMediator { cause, effect, mediator, keep_direct } => {
                self.insert_mediator(self.require(cause)?, self.require(effect)?, mediator, *keep_direct)
            }
            InsertConfounder { a, b, confounder } => {
                self.insert_confounder(self.require(a)?, self.require(b)?, confounder)
            }
            AttachColumn { variable, column } => self.attach_column(self.require(variable)?, *column, n_columns),
        }
    }

    /// Variables whose own score can change when `refinement` is applied:
    /// nodes that gain or lose a parent, or become observed.
    pub fn touched_by(&self, refinement: &Refinement) -> BTreeSet<String> {
        use RefinementOp::*;
        let mut out = BTreeSet::new();
        let mut add = |s: &str| {
            out.insert(normalize_label(s));
        };
        match &refinement.op {
            OrientEdge { cause, effect } | ReverseEdge { source: cause, target: effect } => {
                add(cause);
                add(effect);
            }
            RemoveEdge { a, b } => {
                add(a);
                add(b);
            }
            AddEdge { target, .. } => add(target),
            InsertMediator { effect, mediator, .. } => {
                add(effect);
                add(mediator);
            }
            InsertConfounder { a, b, confounder } => {
                add(a);
                add(b);
                add(confounder);
            }
            AttachColumn { variable, .. } => {
                add(variable);
                if let Some(id) = self.lookup(variable) {
                    for c in self.children(id) {
                        add(self.name(c));
                    }
                }
            }
        }
        out
    }
}

fn default_true() -> bool {
    true
}

/// One analyst-initiated change to the model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RefinementOp {
    OrientEdge { cause: String, effect: String },
    ReverseEdge { source: String, target: String },
    RemoveEdge { a: String, b: String },
    AddEdge { source: String, target: String },
    InsertMediator {
        cause: String,
        effect: String,
        mediator: String,
        #[serde(default = "default_true")]
        keep_direct: bool,
    },
    InsertConfounder { a: String, b: String, confounder: String },
    AttachColumn { variable: String, column: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refinement {
    #[serde(flatten)]
    pub op: RefinementOp,
    #[serde(default)]
    pub note: String,
}

impl Refinement {
    pub fn new(op: RefinementOp) -> Self {
        Refinement { op, note: String::new() }
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = note.to_string();
        self
    }
}

/// Replays a refinement log from `base`, returning every version including
/// `base` itself.
pub fn replay(base: &CausalGraph, log: &[Refinement], n_columns: usize) -> Result<Vec<CausalGraph>, GraphError> {
    let mut versions = Vec::with_capacity(log.len() + 1);
    versions.push(base.clone());
    for r in log {
        let next = versions.last().expect("nonempty").apply(r, n_columns)?;
        versions.push(next);
    }
    Ok(versions)
}
