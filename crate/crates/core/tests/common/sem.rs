//! Seeded linear-Gaussian structural equation models for tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use causal_audit_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Nodes are indexed in causal order: every edge points from a lower to a
/// higher index.
pub struct Sem {
    pub p: usize,
    /// (parent, child, coefficient)
    pub edges: Vec<(usize, usize, f64)>,
    pub noise_sd: Vec<f64>,
}

impl Sem {
    /// Random polytree on 3 to 6 nodes with `|beta|` uniform in [0.5, 1.5]
    /// and unit noise. A random recursive tree gets random edge directions
    /// and is relabelled in causal order. Polytrees have a single path between
    /// any two nodes, so no parameter choice can cancel an edge out.
    pub fn random(seed: u64) -> Sem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(3..=6usize);
        let mut edges = Vec::with_capacity(p - 1);
        for child in 1..p {
            let other = rng.random_range(0..child);
            let magnitude: f64 = rng.random_range(0.5..=1.5);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (a, b) = if rng.random_bool(0.5) { (other, child) } else { (child, other) };
            edges.push((a, b, sign * magnitude));
        }
        let mut order = Vec::with_capacity(p);
        let mut left: Vec<usize> = (0..p).collect();
        while !left.is_empty() {
            let i = left
                .iter()
                .position(|&v| !edges.iter().any(|&(a, b, _)| b == v && left.contains(&a)))
                .expect("polytree is acyclic");
            order.push(left.remove(i));
        }
        let rank = |v: usize| order.iter().position(|&o| o == v).unwrap();
        for e in &mut edges {
            *e = (rank(e.0), rank(e.1), e.2);
        }
        edges.sort_by_key(|&(a, b, _)| (b, a));
        Sem { p, edges, noise_sd: vec![1.0; p] }
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.p).map(|i| format!("x{i}")).collect()
    }

    #[allow(clippy::needless_range_loop)]
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = vec![vec![0.0; n]; self.p];
        for row in 0..n {
            for v in 0..self.p {
                let noise: f64 = rng.sample(StandardNormal);
                let mut value = self.noise_sd[v] * noise;
                for &(a, b, beta) in &self.edges {
                    if b == v {
                        value += beta * cols[a][row];
                    }
                }
                cols[v][row] = value;
            }
        }
        Dataset::new(self.names(), cols).unwrap()
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|&(a, b, _)| (a.min(b), a.max(b))).collect()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.skeleton().contains(&(a.min(b), a.max(b)))
    }

    /// Unshielded colliders `(x, z, y)` with x < y: x -> z <- y, x and y
    /// nonadjacent.
    pub fn v_structures(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for z in 0..self.p {
            let parents: Vec<usize> = self.edges.iter().filter(|e| e.1 == z).map(|e| e.0).collect();
            for (i, &x) in parents.iter().enumerate() {
                for &y in &parents[i + 1..] {
                    if !self.adjacent(x, y) {
                        out.push((x.min(y), z, x.max(y)));
                    }
                }
            }
        }
        out
    }
}

/// Skeleton of a discovered graph as sorted index pairs.
pub fn discovered_skeleton(g: &causal_audit_core::CausalGraph) -> BTreeSet<(usize, usize)> {
    g.edges()
        .iter()
        .map(|e| {
            let (a, b) = (e.source.index(), e.target.index());
            (a.min(b), a.max(b))
        })
        .collect()
}

/// Whether `g` has the directed edge `a -> b`.
pub fn has_directed(g: &causal_audit_core::CausalGraph, a: usize, b: usize) -> bool {
    use causal_audit_core::VarId;
    g.edge_between(VarId(a as u32), VarId(b as u32))
        .is_some_and(|e| e.is_directed() && e.source.index() == a && e.target.index() == b)
}
