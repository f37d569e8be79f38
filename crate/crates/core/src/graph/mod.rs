//! Acyclic directed mixed graphs (ADMGs) and the graphical criteria defined
//! over them.
//!
//! Vertices are identified by their position in a fixed causal ordering and
//! every directed edge must point forward in that ordering, so acyclicity
//! holds by construction. Vertex sets are 64-bit masks; graphs are therefore
//! limited to [`MAX_VERTICES`] vertices, and the path-enumerating criteria
//! to a smaller configurable cap (see [`criteria::DEFAULT_PATH_VERTEX_CAP`]).

mod criteria;
mod nonlinear;
mod path;

use std::fmt;

use thiserror::Error;

pub use criteria::{
    backdoor_criterion, blocks_all_backdoor, blocks_every_path, no_confounding_equivalence,
    partition_s1_s2, selective_door_criterion, single_door_precondition, CriterionMode,
    S1S2Partition, Verdict, Witness, DEFAULT_PATH_VERTEX_CAP,
};
pub use nonlinear::{project_nonlinear, NonlinearVertex};
pub use path::{blocks, enumerate_paths, Mark, Path};

/// Hard limit imposed by the bitmask representation of vertex sets.
pub const MAX_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("directed edge {from} -> {to} violates the causal ordering")]
    CycleOrOrderViolation { from: String, to: String },
    #[error("duplicate {kind} edge between {a} and {b}")]
    DuplicateEdge {
        kind: &'static str,
        a: String,
        b: String,
    },
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("duplicate vertex name {0}")]
    DuplicateVertex(String),
    #[error("graph has {0} vertices; at most {MAX_VERTICES} are supported")]
    TooManyVertices(usize),
    #[error("graph has {size} vertices; path enumeration is capped at {cap}")]
    GraphTooLarge { size: usize, cap: usize },
    #[error("conditioning set contains an endpoint ({0})")]
    EndpointInConditioningSet(String),
    #[error("the outcome {0} belongs to the regressor set")]
    OutcomeInSet(String),
    #[error("path endpoints must differ")]
    SameEndpoints,
    #[error("nonlinear vertex {vertex} has argument {arg} that does not precede it")]
    OrderViolation { vertex: String, arg: String },
}

/// Position of a vertex in the causal ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

impl VertexId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A set of vertices stored as a bitmask over causal-order indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VertexSet(u64);

impl VertexSet {
    pub const fn empty() -> Self {
        VertexSet(0)
    }

    pub const fn from_bits(bits: u64) -> Self {
        VertexSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(v: VertexId) -> Self {
        VertexSet(1 << v.0)
    }

    pub fn contains(self, v: VertexId) -> bool {
        v.0 < MAX_VERTICES && self.0 & (1 << v.0) != 0
    }

    pub fn insert(&mut self, v: VertexId) {
        self.0 |= 1 << v.0;
    }

    pub fn remove(&mut self, v: VertexId) {
        self.0 &= !(1 << v.0);
    }

    #[must_use]
    pub fn with(self, v: VertexId) -> Self {
        VertexSet(self.0 | (1 << v.0))
    }

    #[must_use]
    pub fn without(self, v: VertexId) -> Self {
        VertexSet(self.0 & !(1 << v.0))
    }

    pub fn union(self, other: Self) -> Self {
        VertexSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        VertexSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        VertexSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Members in ascending causal order.
    pub fn iter(self) -> impl Iterator<Item = VertexId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(VertexId(i))
            }
        })
    }

    /// All subsets of `self`, in increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = VertexSet> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(VertexSet(cur))
        })
    }
}

impl FromIterator<VertexId> for VertexSet {
    fn from_iter<I: IntoIterator<Item = VertexId>>(iter: I) -> Self {
        let mut s = VertexSet::empty();
        for v in iter {
            s.insert(v);
        }
        s
    }
}

/// Acyclic directed mixed graph over causally ordered vertices.
///
/// Immutable once built; every constructor validates the edge lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admg {
    names: Vec<String>,
    directed: Vec<(VertexId, VertexId)>,
    bidirected: Vec<(VertexId, VertexId)>,
    parents: Vec<VertexSet>,
    children: Vec<VertexSet>,
    spouses: Vec<VertexSet>,
    descendants: Vec<VertexSet>,
    ancestors: Vec<VertexSet>,
    path_cap: usize,
}

impl Admg {
    /// Builds a graph from vertex names (in causal order) and index-based
    /// edge lists. Bidirected pairs may be given in either orientation.
    pub fn new(
        names: Vec<String>,
        directed: &[(usize, usize)],
        bidirected: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let n = names.len();
        if n > MAX_VERTICES {
            return Err(GraphError::TooManyVertices(n));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(GraphError::DuplicateVertex(name.clone()));
            }
        }
        let label = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));

        let mut parents = vec![VertexSet::empty(); n];
        let mut children = vec![VertexSet::empty(); n];
        let mut spouses = vec![VertexSet::empty(); n];
        let mut dir = Vec::with_capacity(directed.len());
        for &(from, to) in directed {
            if from >= n {
                return Err(GraphError::UnknownVertex(label(from)));
            }
            if to >= n {
                return Err(GraphError::UnknownVertex(label(to)));
            }
            if from == to {
                return Err(GraphError::SelfLoop(label(from)));
            }
            if from > to {
                return Err(GraphError::CycleOrOrderViolation {
                    from: label(from),
                    to: label(to),
                });
            }
            if parents[to].contains(VertexId(from)) {
                return Err(GraphError::DuplicateEdge {
                    kind: "directed",
                    a: label(from),
                    b: label(to),
                });
            }
            parents[to].insert(VertexId(from));
            children[from].insert(VertexId(to));
            dir.push((VertexId(from), VertexId(to)));
        }
        let mut bi = Vec::with_capacity(bidirected.len());
        for &(a, b) in bidirected {
            if a >= n {
                return Err(GraphError::UnknownVertex(label(a)));
            }
            if b >= n {
                return Err(GraphError::UnknownVertex(label(b)));
            }
            if a == b {
                return Err(GraphError::SelfLoop(label(a)));
            }
            let (a, b) = (a.min(b), a.max(b));
            if spouses[a].contains(VertexId(b)) {
                return Err(GraphError::DuplicateEdge {
                    kind: "bidirected",
                    a: label(a),
                    b: label(b),
                });
            }
            spouses[a].insert(VertexId(b));
            spouses[b].insert(VertexId(a));
            bi.push((VertexId(a), VertexId(b)));
        }
        dir.sort();
        bi.sort();

        // Reverse causal order: children always have larger indices.
        let mut descendants = vec![VertexSet::empty(); n];
        for v in (0..n).rev() {
            let mut d = children[v];
            for c in children[v].iter() {
                d = d.union(descendants[c.0]);
            }
            descendants[v] = d;
        }
        let mut ancestors = vec![VertexSet::empty(); n];
        for v in 0..n {
            let mut a = parents[v];
            for p in parents[v].iter() {
                a = a.union(ancestors[p.0]);
            }
            ancestors[v] = a;
        }

        Ok(Admg {
            names,
            directed: dir,
            bidirected: bi,
            parents,
            children,
            spouses,
            descendants,
            ancestors,
            path_cap: DEFAULT_PATH_VERTEX_CAP,
        })
    }

    /// Name-based constructor, mostly for tests and examples.
    pub fn from_names(
        names: &[&str],
        directed: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Self, GraphError> {
        let idx = |s: &str| {
            names
                .iter()
                .position(|n| *n == s)
                .ok_or_else(|| GraphError::UnknownVertex(s.to_string()))
        };
        let dir = directed
            .iter()
            .map(|(a, b)| Ok((idx(a)?, idx(b)?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        let bi = bidirected
            .iter()
            .map(|(a, b)| Ok((idx(a)?, idx(b)?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        Admg::new(names.iter().map(|s| s.to_string()).collect(), &dir, &bi)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    /// Largest graph on which path-enumerating criteria will run.
    pub fn path_cap(&self) -> usize {
        self.path_cap
    }

    #[must_use]
    pub fn with_path_cap(mut self, cap: usize) -> Self {
        self.path_cap = cap;
        self
    }

    pub(crate) fn check_path_cap(&self) -> Result<(), GraphError> {
        if self.len() > self.path_cap {
            Err(GraphError::GraphTooLarge {
                size: self.len(),
                cap: self.path_cap,
            })
        } else {
            Ok(())
        }
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v.0]
    }

    pub fn vertex(&self, name: &str) -> Result<VertexId, GraphError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(VertexId)
            .ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.len()).map(VertexId)
    }

    pub fn all(&self) -> VertexSet {
        if self.len() == 64 {
            VertexSet::from_bits(u64::MAX)
        } else {
            VertexSet::from_bits((1u64 << self.len()) - 1)
        }
    }

    /// Directed edges `(from, to)`, sorted.
    pub fn directed_edges(&self) -> &[(VertexId, VertexId)] {
        &self.directed
    }

    /// Bidirected edges `(a, b)` with `a < b`, sorted.
    pub fn bidirected_edges(&self) -> &[(VertexId, VertexId)] {
        &self.bidirected
    }

    pub fn has_directed(&self, from: VertexId, to: VertexId) -> bool {
        to.0 < self.len() && self.parents[to.0].contains(from)
    }

    pub fn has_bidirected(&self, a: VertexId, b: VertexId) -> bool {
        a.0 < self.len() && self.spouses[a.0].contains(b)
    }

    pub fn parents(&self, v: VertexId) -> VertexSet {
        self.parents[v.0]
    }

    pub fn children(&self, v: VertexId) -> VertexSet {
        self.children[v.0]
    }

    pub fn spouses(&self, v: VertexId) -> VertexSet {
        self.spouses[v.0]
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<(), GraphError> {
        if v.0 < self.len() {
            Ok(())
        } else {
            Err(GraphError::UnknownVertex(v.to_string()))
        }
    }

    /// Strict ancestors of `v` along directed edges.
    pub fn ancestors(&self, v: VertexId) -> Result<VertexSet, GraphError> {
        self.check_vertex(v)?;
        Ok(self.ancestors[v.0])
    }

    /// Strict descendants of `v` along directed edges.
    pub fn descendants(&self, v: VertexId) -> Result<VertexSet, GraphError> {
        self.check_vertex(v)?;
        Ok(self.descendants[v.0])
    }

    pub(crate) fn descendants_of(&self, v: VertexId) -> VertexSet {
        self.descendants[v.0]
    }

    pub(crate) fn ancestors_of(&self, v: VertexId) -> VertexSet {
        self.ancestors[v.0]
    }

    /// Union of the strict ancestors of every member of `set`.
    pub fn ancestors_of_set(&self, set: VertexSet) -> VertexSet {
        set.iter()
            .fold(VertexSet::empty(), |acc, v| acc.union(self.ancestors[v.0]))
    }

    pub fn set_names(&self, set: VertexSet) -> Vec<String> {
        set.iter().map(|v| self.names[v.0].clone()).collect()
    }

    /// Same vertices and bidirected edges, directed edges restricted by `keep`.
    pub fn filter_directed(&self, mut keep: impl FnMut(VertexId, VertexId) -> bool) -> Admg {
        let dir: Vec<_> = self
            .directed
            .iter()
            .filter(|(a, b)| keep(*a, *b))
            .map(|(a, b)| (a.0, b.0))
            .collect();
        let bi: Vec<_> = self.bidirected.iter().map(|(a, b)| (a.0, b.0)).collect();
        Admg::new(self.names.clone(), &dir, &bi)
            .expect("edge subset of a valid graph")
            .with_path_cap(self.path_cap)
    }
}

/// Re-checks the structural invariants of `g`.
///
/// Graphs can only be obtained through validating constructors, so this is
/// an audit entry point rather than a gate.
pub fn validate(g: &Admg) -> Result<(), GraphError> {
    let dir: Vec<_> = g.directed.iter().map(|(a, b)| (a.0, b.0)).collect();
    let bi: Vec<_> = g.bidirected.iter().map(|(a, b)| (a.0, b.0)).collect();
    Admg::new(g.names.clone(), &dir, &bi).map(|_| ())
}
