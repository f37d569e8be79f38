//! Exhaustive enumeration of small ADMGs for property sweeps.
//!
//! Graphs are enumerated over the fixed vertex order `X1 < … < Xn` and then
//! reduced to one representative per isomorphism class: relabelling the
//! vertices changes neither the graphical criteria nor the population
//! regression algebra, so checking one member of each class covers all of
//! them.

use std::collections::HashSet;

use crate::adjust::AdjustmentQuery;
use crate::graph::{Admg, VertexId, VertexSet};

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|b| (0..b).map(move |a| (a, b))).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

struct Encoder {
    pairs: Vec<(usize, usize)>,
    index: Vec<Vec<usize>>,
    perms: Vec<Vec<usize>>,
}

impl Encoder {
    fn new(n: usize) -> Self {
        let pairs = pairs(n);
        let mut index = vec![vec![usize::MAX; n]; n];
        for (k, &(a, b)) in pairs.iter().enumerate() {
            index[a][b] = k;
            index[b][a] = k;
        }
        Encoder {
            pairs,
            index,
            perms: permutations(n),
        }
    }

    /// Smallest `(directed, bidirected)` code over all relabellings that keep
    /// every directed edge pointing forward.
    fn canonical(&self, dir: u32, bi: u32) -> u64 {
        let mut best = u64::MAX;
        'perm: for p in &self.perms {
            let mut d = 0u32;
            let mut b = 0u32;
            for (k, &(x, y)) in self.pairs.iter().enumerate() {
                let (px, py) = (p[x], p[y]);
                if dir >> k & 1 == 1 {
                    if px > py {
                        continue 'perm;
                    }
                    d |= 1 << self.index[px][py];
                }
                if bi >> k & 1 == 1 {
                    b |= 1 << self.index[px][py];
                }
            }
            best = best.min((d as u64) << 32 | b as u64);
        }
        best
    }
}

fn masks(width: usize, max_ones: usize) -> impl Iterator<Item = u32> {
    (0u32..1 << width).filter(move |m| m.count_ones() as usize <= max_ones)
}

/// Number of ADMGs on `X1 < … < Xn` within the edge limits.
pub fn labeled_count(n: usize, max_directed: usize, max_bidirected: usize) -> usize {
    let w = pairs(n).len();
    masks(w, max_directed).count() * masks(w, max_bidirected).count()
}

/// One representative ADMG on `n` vertices per isomorphism class, with at
/// most `max_directed` directed and `max_bidirected` bidirected edges.
pub fn admg_classes(n: usize, max_directed: usize, max_bidirected: usize) -> Vec<Admg> {
    assert!(n <= 7, "exhaustive enumeration is limited to 7 vertices");
    let enc = Encoder::new(n);
    let w = enc.pairs.len();
    let names: Vec<String> = (1..=n).map(|k| format!("X{k}")).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for dir in masks(w, max_directed) {
        for bi in masks(w, max_bidirected) {
            let key = enc.canonical(dir, bi);
            if key != (dir as u64) << 32 | bi as u64 || !seen.insert(key) {
                continue;
            }
            let pick = |mask: u32| -> Vec<(usize, usize)> {
                enc.pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &p)| p)
                    .collect()
            };
            out.push(Admg::new(names.clone(), &pick(dir), &pick(bi)).expect("forward edges"));
        }
    }
    out
}

/// Representatives for every vertex count from 2 to `max_vertices`.
pub fn sweep_graphs(max_vertices: usize, max_directed: usize, max_bidirected: usize) -> Vec<Admg> {
    (2..=max_vertices)
        .flat_map(|n| admg_classes(n, max_directed, max_bidirected))
        .collect()
}

/// Every query `(i, j, Z)` with `i ≠ j` and `Z ⊆ V ∖ {i, j}`.
pub fn all_queries(g: &Admg) -> Vec<AdjustmentQuery> {
    let mut out = Vec::new();
    for i in g.vertices() {
        for j in g.vertices().filter(|&j| j != i) {
            let rest = g.all().without(i).without(j);
            for z in rest.subsets() {
                out.push(AdjustmentQuery::new(i, j, z));
            }
        }
    }
    out
}

/// Every `(S, i)` with `S ⊆ V ∖ {i}`.
pub fn all_regressor_sets(g: &Admg) -> Vec<(VertexSet, VertexId)> {
    g.vertices()
        .flat_map(|i| g.all().without(i).subsets().map(move |s| (s, i)))
        .collect()
}
