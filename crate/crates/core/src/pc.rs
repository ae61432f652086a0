//! PC causal discovery over Fisher-z partial correlation tests.
//!
//! Skeleton search uses fixed orders throughout: pairs are visited
//! lexicographically, conditioning subsets are enumerated in lexicographic
//! order of sorted adjacency lists, and adjacency sets are frozen for the
//! duration of one conditioning level. Removals found within a level are
//! applied together at its end, so the result does not depend on the order
//! tests happen to run in.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::graph::{CausalGraph, Edge, Provenance, VarId};
use crate::stats::{fisher_z_independent, partial_correlation, FisherZError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcOptions {
    pub alpha: f64,
    /// Upper bound on conditioning-set size; `None` means unbounded.
    pub max_condition_size: Option<usize>,
}

impl Default for PcOptions {
    fn default() -> Self {
        PcOptions { alpha: 0.05, max_condition_size: None }
    }
}

/// Separating sets for the removed pairs, keyed by graph variable id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SepSetTable {
    sets: BTreeMap<(VarId, VarId), Vec<VarId>>,
}

impl SepSetTable {
    pub fn get(&self, a: VarId, b: VarId) -> Option<&[VarId]> {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.sets.get(&key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, VarId, &[VarId])> {
        self.sets.iter().map(|(&(a, b), s)| (a, b, s.as_slice()))
    }

    fn insert(&mut self, a: usize, b: usize, set: &[usize]) {
        let key = (VarId(a.min(b) as u32), VarId(a.max(b) as u32));
        self.sets.insert(key, set.iter().map(|&c| VarId(c as u32)).collect());
    }
}

/// A test that could not be carried out; the pair was kept adjacent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiscoveryWarning {
    pub x: String,
    pub y: String,
    pub conditioning: Vec<String>,
    pub problem: String,
}

#[derive(Clone, Debug)]
pub struct Discovery {
    pub graph: CausalGraph,
    pub sepsets: SepSetTable,
    pub warnings: Vec<DiscoveryWarning>,
    pub tests_run: usize,
}

/// Runs PC over every column of `data`.
pub fn pc_discover(data: &Dataset, options: &PcOptions) -> Discovery {
    let columns: Vec<usize> = (0..data.n_cols()).collect();
    pc_discover_columns(data, &columns, options)
}

/// Runs PC over the listed columns. Graph variable `i` is bound to
/// `columns[i]` of `data`.
pub fn pc_discover_columns(data: &Dataset, columns: &[usize], options: &PcOptions) -> Discovery {
    let sub = data.select(columns).standardized();
    let p = columns.len();
    let n = sub.n_rows();
    let mut state = PcState::complete(p);
    let mut sepsets = SepSetTable::default();
    let mut warnings = Vec::new();
    let mut tests_run = 0usize;

    let mut level = 0usize;
    loop {
        if n <= level + 3 || options.max_condition_size.is_some_and(|m| level > m) {
            break;
        }
        let snapshot: Vec<Vec<usize>> = (0..p).map(|v| state.neighbours(v)).collect();
        let mut testable = false;
        let mut removals: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for x in 0..p {
            for y in x + 1..p {
                if !state.adj[x][y] {
                    continue;
                }
                'sides: for (s, t) in [(x, y), (y, x)] {
                    let candidates: Vec<usize> = snapshot[s].iter().copied().filter(|&c| c != t).collect();
                    if candidates.len() < level {
                        continue;
                    }
                    testable = true;
                    let mut subsets = Combinations::new(candidates.len(), level);
                    while let Some(idx) = subsets.next_indices() {
                        let cond: Vec<usize> = idx.iter().map(|&i| candidates[i]).collect();
                        tests_run += 1;
                        match independence(&sub, x, y, &cond, options.alpha) {
                            Ok(true) => {
                                removals.push((x, y, cond));
                                break 'sides;
                            }
                            Ok(false) => {}
                            Err(problem) => warnings.push(DiscoveryWarning {
                                x: sub.name(x).to_string(),
                                y: sub.name(y).to_string(),
                                conditioning: cond.iter().map(|&c| sub.name(c).to_string()).collect(),
                                problem,
                            }),
                        }
                    }
                }
            }
        }
        for (x, y, cond) in &removals {
            state.adj[*x][*y] = false;
            state.adj[*y][*x] = false;
            sepsets.insert(*x, *y, cond);
        }
        if !testable {
            break;
        }
        level += 1;
    }

    state.orient_colliders(&sepsets);
    state.apply_meek_rules();

    let mut graph = CausalGraph::new();
    for (i, &c) in columns.iter().enumerate() {
        graph.push_variable(data.name(c), Some(c)).expect("dataset names are unique and nonempty");
        debug_assert_eq!(i, graph.variables().len() - 1);
    }
    for a in 0..p {
        for b in a + 1..p {
            if !state.adj[a][b] {
                continue;
            }
            let (va, vb) = (VarId(a as u32), VarId(b as u32));
            let edge = if state.dir[a][b] {
                Edge::directed(va, vb, Provenance::Discovered)
            } else if state.dir[b][a] {
                Edge::directed(vb, va, Provenance::Discovered)
            } else {
                Edge::undirected(va, vb, Provenance::Discovered)
            };
            graph.push_edge(edge).expect("orientation phase keeps the directed part acyclic");
        }
    }
    Discovery { graph, sepsets, warnings, tests_run }
}

/// `Ok(true)` when independence is not rejected. Untestable cases are
/// reported and count as dependence.
fn independence(data: &Dataset, x: usize, y: usize, cond: &[usize], alpha: f64) -> Result<bool, String> {
    let r = partial_correlation(data, x, y, cond).map_err(|e| e.to_string())?;
    match fisher_z_independent(r, data.n_rows(), cond.len(), alpha) {
        Ok(ind) => Ok(ind),
        // |r| = 1: deterministic relation, clearly dependent.
        Err(FisherZError::DegenerateSample { r, .. }) if r.abs() >= 1.0 => Ok(false),
        Err(e) => Err(e.to_string()),
    }
}

struct PcState {
    adj: Vec<Vec<bool>>,
    /// `dir[a][b]` marks the adjacency a-b as oriented a -> b.
    dir: Vec<Vec<bool>>,
}

impl PcState {
    fn complete(p: usize) -> Self {
        let mut adj = vec![vec![true; p]; p];
        for (i, row) in adj.iter_mut().enumerate() {
            row[i] = false;
        }
        PcState { adj, dir: vec![vec![false; p]; p] }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn neighbours(&self, v: usize) -> Vec<usize> {
        (0..self.len()).filter(|&u| self.adj[v][u]).collect()
    }

    fn undirected(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] && !self.dir[a][b] && !self.dir[b][a]
    }

    fn directed(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] && self.dir[a][b]
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if core::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend((0..self.len()).filter(|&w| self.directed(v, w) && !seen[w]));
        }
        false
    }

    /// Orients an undirected a-b as a -> b unless that closes a cycle.
    fn try_orient(&mut self, a: usize, b: usize) -> bool {
        if !self.undirected(a, b) || self.reaches(b, a) {
            return false;
        }
        self.dir[a][b] = true;
        true
    }

    fn orient_colliders(&mut self, sepsets: &SepSetTable) {
        let p = self.len();
        for x in 0..p {
            for y in x + 1..p {
                if self.adj[x][y] {
                    continue;
                }
                let Some(sep) = sepsets.get(VarId(x as u32), VarId(y as u32)) else {
                    continue;
                };
                for z in 0..p {
                    if !(self.adj[x][z] && self.adj[y][z]) || sep.contains(&VarId(z as u32)) {
                        continue;
                    }
                    self.try_orient(x, z);
                    self.try_orient(y, z);
                }
            }
        }
    }

    fn apply_meek_rules(&mut self) {
        let p = self.len();
        let mut changed = true;
        while changed {
            changed = false;
            for a in 0..p {
                for b in 0..p {
                    if a != b && self.undirected(a, b) && self.meek_implies(a, b) && self.try_orient(a, b) {
                        changed = true;
                    }
                }
            }
        }
    }

    /// Whether any of Meek's rules 1-4 forces a -> b for the undirected a-b.
    fn meek_implies(&self, a: usize, b: usize) -> bool {
        let p = self.len();
        // R1: c -> a - b with c, b nonadjacent.
        if (0..p).any(|c| c != b && self.directed(c, a) && !self.adj[c][b]) {
            return true;
        }
        // R2: a -> c -> b.
        if (0..p).any(|c| self.directed(a, c) && self.directed(c, b)) {
            return true;
        }
        // R3: a - c -> b and a - d -> b with c, d nonadjacent.
        let kites: Vec<usize> = (0..p).filter(|&c| self.undirected(a, c) && self.directed(c, b)).collect();
        for (i, &c) in kites.iter().enumerate() {
            if kites[i + 1..].iter().any(|&d| !self.adj[c][d]) {
                return true;
            }
        }
        // R4: a - c -> d -> b, a adjacent d, c and b nonadjacent.
        for c in 0..p {
            if c == b || !self.undirected(a, c) || self.adj[c][b] {
                continue;
            }
            if (0..p).any(|d| d != a && self.directed(c, d) && self.directed(d, b) && self.adj[a][d]) {
                return true;
            }
        }
        false
    }
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    started: bool,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations { n, idx: (0..k).collect(), started: false, done: k > n }
    }

    fn next_indices(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.idx);
        }
        let k = self.idx.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(&self.idx);
            }
        }
        self.done = true;
        None
    }
}
