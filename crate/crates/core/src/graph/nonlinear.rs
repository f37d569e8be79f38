//! Causal path diagrams for models with nonlinear terms.
//!
//! A nonlinear vertex `H = h(args)` is re-expressed as an error-driven vertex
//! (`H = u_H`): its incoming directed edges are dropped and replaced by
//! bidirected edges to every vertex whose error term may be dependent on
//! `u_H`. Outgoing edges of `H` keep their linear coefficients.

use super::{Admg, GraphError, VertexId, VertexSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonlinearVertex {
    pub vertex: VertexId,
    pub args: VertexSet,
}

/// Projects `base` onto the causal path diagram of the nonlinear model.
///
/// Without declarations every vertex whose own error (or, for another
/// nonlinear vertex, whose error support) meets the error support of `H`'s
/// arguments becomes bidirected-adjacent to `H`; the support of an argument
/// is its own error, the errors of its ancestors, and errors correlated with
/// those in `base`. Pairs in `independent` are left unconnected.
pub fn project_nonlinear(
    base: &Admg,
    nonlinear: &[NonlinearVertex],
    independent: &[(VertexId, VertexId)],
) -> Result<Admg, GraphError> {
    if nonlinear.is_empty() {
        return Ok(base.clone());
    }
    let mut nl = VertexSet::empty();
    for h in nonlinear {
        base.check_vertex(h.vertex)?;
        for a in h.args.iter() {
            base.check_vertex(a)?;
            if a >= h.vertex {
                return Err(GraphError::OrderViolation {
                    vertex: base.name(h.vertex).to_string(),
                    arg: base.name(a).to_string(),
                });
            }
        }
        nl.insert(h.vertex);
    }

    let linear_part = base.filter_directed(|_, to| !nl.contains(to));

    // Error support of every nonlinear vertex, resolved in causal order so
    // nested nonlinear arguments are already known.
    let n = base.len();
    let mut support = vec![VertexSet::empty(); n];
    let mut sorted: Vec<&NonlinearVertex> = nonlinear.iter().collect();
    sorted.sort_by_key(|h| h.vertex);
    for h in &sorted {
        let reach = h.args.union(linear_part.ancestors_of_set(h.args));
        let mut errs = reach;
        for a in reach.iter() {
            if nl.contains(a) {
                errs = errs.union(support[a.0]);
            }
        }
        let correlated = errs.iter().fold(errs, |acc, e| acc.union(base.spouses(e)));
        support[h.vertex.0] = correlated;
    }

    let declared = |a: VertexId, b: VertexId| {
        independent
            .iter()
            .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    };
    let mut bi: Vec<(usize, usize)> = base
        .bidirected_edges()
        .iter()
        .map(|(a, b)| (a.0, b.0))
        .collect();
    for h in &sorted {
        for w in base.vertices() {
            if w == h.vertex || declared(h.vertex, w) {
                continue;
            }
            let own = if nl.contains(w) {
                support[w.0].with(w)
            } else {
                VertexSet::singleton(w)
            };
            let pair = (h.vertex.0.min(w.0), h.vertex.0.max(w.0));
            if !own.is_disjoint(support[h.vertex.0]) && !bi.contains(&pair) {
                bi.push(pair);
            }
        }
    }
    let dir: Vec<(usize, usize)> = linear_part
        .directed_edges()
        .iter()
        .map(|(a, b)| (a.0, b.0))
        .collect();
    Ok(Admg::new(base.names().to_vec(), &dir, &bi)?.with_path_cap(base.path_cap()))
}
