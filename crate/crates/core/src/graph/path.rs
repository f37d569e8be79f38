use std::fmt;
use std::ops::ControlFlow;

use super::{Admg, GraphError, VertexId, VertexSet};

/// Kind and orientation of one step along a path, read left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mark {
    /// `a -> b`
    Forward,
    /// `a <- b`
    Backward,
    /// `a <-> b`
    Bidirected,
}

impl Mark {
    /// Arrowhead at the left vertex of the step.
    fn head_at_start(self) -> bool {
        matches!(self, Mark::Backward | Mark::Bidirected)
    }

    /// Arrowhead at the right vertex of the step.
    fn head_at_end(self) -> bool {
        matches!(self, Mark::Forward | Mark::Bidirected)
    }

    fn reversed(self) -> Mark {
        match self {
            Mark::Forward => Mark::Backward,
            Mark::Backward => Mark::Forward,
            Mark::Bidirected => Mark::Bidirected,
        }
    }

    fn arrow(self) -> &'static str {
        match self {
            Mark::Forward => "->",
            Mark::Backward => "<-",
            Mark::Bidirected => "<->",
        }
    }
}

/// A simple path: distinct vertices joined by recorded edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    vertices: Vec<VertexId>,
    marks: Vec<Mark>,
}

impl Path {
    /// Builds a path after checking adjacency and distinctness against `g`.
    pub fn new(g: &Admg, vertices: Vec<VertexId>, marks: Vec<Mark>) -> Result<Self, GraphError> {
        if vertices.len() != marks.len() + 1 || vertices.len() < 2 {
            return Err(GraphError::SameEndpoints);
        }
        let mut seen = VertexSet::empty();
        for &v in &vertices {
            g.check_vertex(v)?;
            if seen.contains(v) {
                return Err(GraphError::SameEndpoints);
            }
            seen.insert(v);
        }
        for (k, m) in marks.iter().enumerate() {
            let (a, b) = (vertices[k], vertices[k + 1]);
            let ok = match m {
                Mark::Forward => g.has_directed(a, b),
                Mark::Backward => g.has_directed(b, a),
                Mark::Bidirected => g.has_bidirected(a, b),
            };
            if !ok {
                return Err(GraphError::UnknownVertex(format!(
                    "no {} edge between {} and {}",
                    m.arrow(),
                    g.name(a),
                    g.name(b)
                )));
            }
        }
        Ok(Path { vertices, marks })
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn start(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn end(&self) -> VertexId {
        *self
            .vertices
            .last()
            .expect("paths have two or more vertices")
    }

    pub fn interior(&self) -> &[VertexId] {
        &self.vertices[1..self.vertices.len() - 1]
    }

    /// First edge is bidirected or points into the start vertex.
    pub fn is_backdoor(&self) -> bool {
        self.marks[0].head_at_start()
    }

    /// Every edge is directed and oriented from start to end.
    pub fn is_directed(&self) -> bool {
        self.marks.iter().all(|m| *m == Mark::Forward)
    }

    /// Whether the interior vertex at `pos` (1-based into `vertices`) is a
    /// collider of the v-structure centred on it.
    pub fn is_collider_at(&self, pos: usize) -> bool {
        pos > 0
            && pos + 1 < self.vertices.len()
            && self.marks[pos - 1].head_at_end()
            && self.marks[pos].head_at_start()
    }

    pub fn colliders(&self) -> impl Iterator<Item = VertexId> + '_ {
        (1..self.vertices.len() - 1)
            .filter(|&k| self.is_collider_at(k))
            .map(|k| self.vertices[k])
    }

    pub fn has_collider(&self) -> bool {
        self.colliders().next().is_some()
    }

    pub fn reversed(&self) -> Path {
        Path {
            vertices: self.vertices.iter().rev().copied().collect(),
            marks: self.marks.iter().rev().map(|m| m.reversed()).collect(),
        }
    }

    pub fn display<'a>(&'a self, g: &'a Admg) -> PathDisplay<'a> {
        PathDisplay {
            path: self,
            graph: g,
        }
    }
}

pub struct PathDisplay<'a> {
    path: &'a Path,
    graph: &'a Admg,
}

impl fmt::Display for PathDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.graph.name(self.path.vertices[0]))?;
        for (k, m) in self.path.marks.iter().enumerate() {
            write!(
                f,
                " {} {}",
                m.arrow(),
                self.graph.name(self.path.vertices[k + 1])
            )?;
        }
        Ok(())
    }
}

/// Blocking test that ignores the endpoint restriction on `z`.
///
/// Only interior vertices matter. A non-collider in `z` blocks; a collider
/// blocks when neither it nor any descendant is in `z`. Single-edge paths
/// have no interior and are never blocked.
pub(crate) fn blocks_interior(g: &Admg, z: VertexSet, p: &Path) -> bool {
    (1..p.vertices.len() - 1).any(|k| {
        let v = p.vertices[k];
        if p.is_collider_at(k) {
            z.is_disjoint(g.descendants_of(v).with(v))
        } else {
            z.contains(v)
        }
    })
}

/// Whether `z` blocks `p`. `z` must not contain either endpoint.
pub fn blocks(g: &Admg, z: VertexSet, p: &Path) -> Result<bool, GraphError> {
    for end in [p.start(), p.end()] {
        if z.contains(end) {
            return Err(GraphError::EndpointInConditioningSet(
                g.name(end).to_string(),
            ));
        }
    }
    Ok(blocks_interior(g, z, p))
}

/// Depth-first walk over simple paths from `a` to `b` in lexicographic
/// order of vertex sequence (ties broken by edge mark). `first_step` limits
/// the marks allowed on the first edge. The visitor may stop the walk early.
pub(crate) fn walk_paths<F>(
    g: &Admg,
    a: VertexId,
    b: VertexId,
    first_step: &[Mark],
    mut visit: F,
) -> ControlFlow<()>
where
    F: FnMut(&Path) -> ControlFlow<()>,
{
    let mut path = Path {
        vertices: vec![a],
        marks: Vec::new(),
    };
    let mut on_path = VertexSet::singleton(a);
    dfs(g, b, first_step, &mut path, &mut on_path, &mut visit)
}

fn steps(g: &Admg, v: VertexId, w: VertexId) -> [Option<Mark>; 3] {
    [
        g.has_directed(v, w).then_some(Mark::Forward),
        g.has_directed(w, v).then_some(Mark::Backward),
        g.has_bidirected(v, w).then_some(Mark::Bidirected),
    ]
}

fn dfs<F>(
    g: &Admg,
    target: VertexId,
    first_step: &[Mark],
    path: &mut Path,
    on_path: &mut VertexSet,
    visit: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&Path) -> ControlFlow<()>,
{
    let v = path.end();
    let neighbours = g.parents(v).union(g.children(v)).union(g.spouses(v));
    for w in neighbours.difference(*on_path).iter() {
        for mark in steps(g, v, w).into_iter().flatten() {
            if path.marks.is_empty() && !first_step.contains(&mark) {
                continue;
            }
            path.vertices.push(w);
            path.marks.push(mark);
            let flow = if w == target {
                visit(path)
            } else {
                on_path.insert(w);
                let f = dfs(g, target, first_step, path, on_path, visit);
                on_path.remove(w);
                f
            };
            path.vertices.pop();
            path.marks.pop();
            flow?;
        }
    }
    ControlFlow::Continue(())
}

pub(crate) const ANY_STEP: &[Mark] = &[Mark::Forward, Mark::Backward, Mark::Bidirected];
pub(crate) const BACKDOOR_STEP: &[Mark] = &[Mark::Backward, Mark::Bidirected];
pub(crate) const FORWARD_STEP: &[Mark] = &[Mark::Forward];

/// All simple paths between `a` and `b`, lexicographically ordered by
/// vertex index sequence.
pub fn enumerate_paths(g: &Admg, a: VertexId, b: VertexId) -> Result<Vec<Path>, GraphError> {
    g.check_vertex(a)?;
    g.check_vertex(b)?;
    if a == b {
        return Err(GraphError::SameEndpoints);
    }
    let mut out = Vec::new();
    let _ = walk_paths(g, a, b, ANY_STEP, |p| {
        out.push(p.clone());
        ControlFlow::Continue(())
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(g: &Admg, names: &[&str]) -> VertexSet {
        names.iter().map(|n| g.vertex(n).unwrap()).collect()
    }

    fn fig2() -> Admg {
        Admg::from_names(
            &["X", "M1", "M2", "Y"],
            &[("X", "M1"), ("M1", "Y"), ("M1", "M2")],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn chain_has_single_path() {
        let g = Admg::from_names(&["X1", "X2", "X3"], &[("X1", "X2"), ("X2", "X3")], &[]).unwrap();
        let paths = enumerate_paths(&g, VertexId(0), VertexId(2)).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].display(&g).to_string(), "X1 -> X2 -> X3");
        assert!(paths[0].is_directed());
        assert!(!paths[0].is_backdoor());
    }

    #[test]
    fn fig2_paths_and_marks() {
        let g = fig2();
        let (x, y, m2) = (
            g.vertex("X").unwrap(),
            g.vertex("Y").unwrap(),
            g.vertex("M2").unwrap(),
        );
        let paths = enumerate_paths(&g, x, y).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].display(&g).to_string(), "X -> M1 -> Y");

        let from_m2 = enumerate_paths(&g, m2, y).unwrap();
        assert_eq!(from_m2.len(), 1);
        assert_eq!(from_m2[0].display(&g).to_string(), "M2 <- M1 -> Y");
        assert!(from_m2[0].is_backdoor());
        assert!(!from_m2[0].is_directed());
    }

    #[test]
    fn disconnected_pair_has_no_paths() {
        let g = Admg::from_names(&["A", "B", "C"], &[("A", "B")], &[]).unwrap();
        assert!(enumerate_paths(&g, VertexId(0), VertexId(2))
            .unwrap()
            .is_empty());
        assert_eq!(
            enumerate_paths(&g, VertexId(0), VertexId(0)),
            Err(GraphError::SameEndpoints)
        );
    }

    #[test]
    fn bidirected_edge_is_backdoor() {
        let g = Admg::from_names(&["X1", "X2"], &[], &[("X1", "X2")]).unwrap();
        let p = &enumerate_paths(&g, VertexId(0), VertexId(1)).unwrap()[0];
        assert!(p.is_backdoor());
        assert_eq!(p.display(&g).to_string(), "X1 <-> X2");
    }

    #[test]
    fn parallel_directed_and_bidirected_edges_give_two_paths() {
        let g = Admg::from_names(&["A", "B"], &[("A", "B")], &[("A", "B")]).unwrap();
        let paths = enumerate_paths(&g, VertexId(0), VertexId(1)).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].marks(), &[Mark::Forward]);
        assert_eq!(paths[1].marks(), &[Mark::Bidirected]);
    }

    #[test]
    fn non_collider_blocking() {
        let g = fig2();
        let p = &enumerate_paths(&g, g.vertex("X").unwrap(), g.vertex("Y").unwrap()).unwrap()[0];
        assert!(blocks(&g, ids(&g, &["M1"]), p).unwrap());
        // Conditioning on a descendant of a non-collider leaves the path open.
        assert!(!blocks(&g, ids(&g, &["M2"]), p).unwrap());
        assert!(matches!(
            blocks(&g, ids(&g, &["X"]), p),
            Err(GraphError::EndpointInConditioningSet(_))
        ));
    }

    #[test]
    fn collider_blocking() {
        let g = Admg::from_names(
            &["A", "B", "C", "D"],
            &[("A", "C"), ("B", "C"), ("C", "D")],
            &[],
        )
        .unwrap();
        let p = &enumerate_paths(&g, g.vertex("A").unwrap(), g.vertex("B").unwrap()).unwrap()[0];
        assert_eq!(p.display(&g).to_string(), "A -> C <- B");
        assert!(blocks(&g, VertexSet::empty(), p).unwrap());
        assert!(!blocks(&g, ids(&g, &["C"]), p).unwrap());
        assert!(!blocks(&g, ids(&g, &["D"]), p).unwrap());
    }

    #[test]
    fn bidirected_colliders() {
        // A <-> C <-> B: C is a collider.
        let g = Admg::from_names(&["A", "B", "C"], &[], &[("A", "C"), ("B", "C")]).unwrap();
        let p = &enumerate_paths(&g, VertexId(0), VertexId(1)).unwrap()[0];
        assert_eq!(p.colliders().collect::<Vec<_>>(), vec![VertexId(2)]);
        assert!(blocks(&g, VertexSet::empty(), p).unwrap());
        assert!(!blocks(&g, VertexSet::singleton(VertexId(2)), p).unwrap());
    }

    #[test]
    fn single_edge_is_never_blocked() {
        let g = Admg::from_names(&["A", "B", "C"], &[("A", "B")], &[]).unwrap();
        let p = &enumerate_paths(&g, VertexId(0), VertexId(1)).unwrap()[0];
        assert!(!blocks(&g, VertexSet::singleton(VertexId(2)), p).unwrap());
    }

    #[test]
    fn path_constructor_checks_adjacency() {
        let g = fig2();
        let ok = Path::new(&g, vec![VertexId(0), VertexId(1)], vec![Mark::Forward]);
        assert!(ok.is_ok());
        assert!(Path::new(&g, vec![VertexId(0), VertexId(1)], vec![Mark::Backward]).is_err());
        assert!(Path::new(&g, vec![VertexId(0), VertexId(3)], vec![Mark::Forward]).is_err());
    }
}
