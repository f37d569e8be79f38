//! Back-door, selective-door and single-door criteria, the S1/S2 split of a
//! regressor set, and the no-confounding equivalence check.
//!
//! All criteria are decided by exhaustive simple-path enumeration. Witnesses
//! are always the lexicographically first violating path, so reports are
//! reproducible.

use std::ops::ControlFlow;

use super::path::{blocks_interior, walk_paths, ANY_STEP, BACKDOOR_STEP, FORWARD_STEP};
use super::{Admg, GraphError, Mark, Path, VertexId, VertexSet};

pub const DEFAULT_PATH_VERTEX_CAP: usize = 16;

/// Which blocking set the post-treatment clause of the selective-door
/// criterion uses for back-door paths out of a conditioned descendant `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CriterionMode {
    /// `(Z ∪ {j}) \ {k}`: the treatment is among the blockers.
    #[default]
    Resolved,
    /// `Z \ {k}`, the definition read literally.
    Literal,
}

/// Reason a criterion failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// A conditioned vertex is a descendant of `of`.
    DescendantInSet { vertex: VertexId, of: VertexId },
    /// A back-door path left open by the conditioning set.
    UnblockedBackdoor { path: Path },
    /// A conditioned descendant reached by an open directed path whose own
    /// back-door path to the outcome stays open.
    PostTreatment {
        vertex: VertexId,
        directed: Path,
        backdoor: Path,
    },
    /// A path other than the direct edge left open (single-door).
    OpenPath { path: Path },
}

impl Witness {
    pub fn describe(&self, g: &Admg) -> String {
        match self {
            Witness::DescendantInSet { vertex, of } => {
                format!("{} is a descendant of {}", g.name(*vertex), g.name(*of))
            }
            Witness::UnblockedBackdoor { path } => path.display(g).to_string(),
            Witness::PostTreatment {
                vertex,
                directed,
                backdoor,
            } => format!(
                "{} reached by {}; open back-door {}",
                g.name(*vertex),
                directed.display(g),
                backdoor.display(g)
            ),
            Witness::OpenPath { path } => path.display(g).to_string(),
        }
    }

    /// The offending path, if the witness carries one.
    pub fn path(&self) -> Option<&Path> {
        match self {
            Witness::DescendantInSet { .. } => None,
            Witness::UnblockedBackdoor { path } | Witness::OpenPath { path } => Some(path),
            Witness::PostTreatment { backdoor, .. } => Some(backdoor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub satisfied: bool,
    pub witness: Option<Witness>,
}

impl Verdict {
    fn pass() -> Self {
        Verdict {
            satisfied: true,
            witness: None,
        }
    }

    fn fail(w: Witness) -> Self {
        Verdict {
            satisfied: false,
            witness: Some(w),
        }
    }
}

/// Split of a regressor set `S` relative to an outcome.
///
/// `s1` holds the members with a back-door path to the outcome left open by
/// the remaining regressors; `s2` the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct S1S2Partition {
    pub s1: VertexSet,
    pub s2: VertexSet,
}

fn check_query(g: &Admg, z: VertexSet, j: VertexId, i: VertexId) -> Result<(), GraphError> {
    g.check_vertex(j)?;
    g.check_vertex(i)?;
    if i == j {
        return Err(GraphError::SameEndpoints);
    }
    if !z.is_subset(g.all()) {
        return Err(GraphError::UnknownVertex(format!("set {:#x}", z.bits())));
    }
    for v in [j, i] {
        if z.contains(v) {
            return Err(GraphError::EndpointInConditioningSet(g.name(v).to_string()));
        }
    }
    g.check_path_cap()
}

/// First back-door path `from ⤎ to` that `z` leaves open.
pub(crate) fn first_open_backdoor(
    g: &Admg,
    z: VertexSet,
    from: VertexId,
    to: VertexId,
    collider_free_only: bool,
) -> Option<Path> {
    let mut found = None;
    let _ = walk_paths(g, from, to, BACKDOOR_STEP, |p| {
        if collider_free_only && p.has_collider() {
            return ControlFlow::Continue(());
        }
        if blocks_interior(g, z, p) {
            ControlFlow::Continue(())
        } else {
            found = Some(p.clone());
            ControlFlow::Break(())
        }
    });
    found
}

/// First directed path `from →→ to` with no interior vertex in `z`.
fn first_open_directed(g: &Admg, z: VertexSet, from: VertexId, to: VertexId) -> Option<Path> {
    let mut found = None;
    let _ = walk_paths(g, from, to, FORWARD_STEP, |p| {
        if p.is_directed() && p.interior().iter().all(|v| !z.contains(*v)) {
            found = Some(p.clone());
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    found
}

/// Whether `z` blocks every back-door path `from ⤎ to`; on failure the
/// witness is the first open one.
pub fn blocks_all_backdoor(
    g: &Admg,
    z: VertexSet,
    from: VertexId,
    to: VertexId,
) -> Result<Verdict, GraphError> {
    check_query(g, z, from, to)?;
    Ok(match first_open_backdoor(g, z, from, to, false) {
        Some(path) => Verdict::fail(Witness::UnblockedBackdoor { path }),
        None => Verdict::pass(),
    })
}

/// Back-door criterion for the ordered pair (treatment `j`, outcome `i`).
pub fn backdoor_criterion(
    g: &Admg,
    z: VertexSet,
    j: VertexId,
    i: VertexId,
) -> Result<Verdict, GraphError> {
    check_query(g, z, j, i)?;
    if let Some(vertex) = z.intersection(g.descendants_of(j)).iter().next() {
        return Ok(Verdict::fail(Witness::DescendantInSet { vertex, of: j }));
    }
    blocks_all_backdoor(g, z, j, i)
}

/// Selective-door criterion for the ordered pair (treatment `j`, outcome `i`).
///
/// The back-door clause on `j` is checked first, then each conditioned
/// descendant of `j` in causal order.
pub fn selective_door_criterion(
    g: &Admg,
    z: VertexSet,
    j: VertexId,
    i: VertexId,
    mode: CriterionMode,
) -> Result<Verdict, GraphError> {
    check_query(g, z, j, i)?;
    if let Some(path) = first_open_backdoor(g, z, j, i, false) {
        return Ok(Verdict::fail(Witness::UnblockedBackdoor { path }));
    }
    let with_j = z.with(j);
    for k in z.intersection(g.descendants_of(j)).iter() {
        let directed_blockers = with_j.without(k);
        let Some(directed) = first_open_directed(g, directed_blockers, j, k) else {
            continue;
        };
        let backdoor_blockers = match mode {
            CriterionMode::Resolved => with_j.without(k),
            CriterionMode::Literal => z.without(k),
        };
        if let Some(backdoor) = first_open_backdoor(g, backdoor_blockers, k, i, false) {
            return Ok(Verdict::fail(Witness::PostTreatment {
                vertex: k,
                directed,
                backdoor,
            }));
        }
    }
    Ok(Verdict::pass())
}

/// Single-door precondition: `z` avoids `i`, `j` and the descendants of `i`,
/// and blocks every path between `j` and `i` other than the edge `j -> i`.
pub fn single_door_precondition(
    g: &Admg,
    z: VertexSet,
    j: VertexId,
    i: VertexId,
) -> Result<Verdict, GraphError> {
    check_query(g, z, j, i)?;
    if let Some(vertex) = z.intersection(g.descendants_of(i)).iter().next() {
        return Ok(Verdict::fail(Witness::DescendantInSet { vertex, of: i }));
    }
    let mut open = None;
    let _ = walk_paths(g, j, i, ANY_STEP, |p| {
        let direct_edge = p.len() == 1 && p.marks()[0] == Mark::Forward;
        if direct_edge || blocks_interior(g, z, p) {
            ControlFlow::Continue(())
        } else {
            open = Some(p.clone());
            ControlFlow::Break(())
        }
    });
    Ok(match open {
        Some(path) => Verdict::fail(Witness::OpenPath { path }),
        None => Verdict::pass(),
    })
}

/// Whether `z` blocks every path between `j` and `i` (first open path as
/// witness otherwise).
pub fn blocks_every_path(
    g: &Admg,
    z: VertexSet,
    j: VertexId,
    i: VertexId,
) -> Result<Verdict, GraphError> {
    check_query(g, z, j, i)?;
    let mut open = None;
    let _ = walk_paths(g, j, i, ANY_STEP, |p| {
        if blocks_interior(g, z, p) {
            ControlFlow::Continue(())
        } else {
            open = Some(p.clone());
            ControlFlow::Break(())
        }
    });
    Ok(match open {
        Some(path) => Verdict::fail(Witness::OpenPath { path }),
        None => Verdict::pass(),
    })
}

fn check_regressors(g: &Admg, s: VertexSet, i: VertexId) -> Result<(), GraphError> {
    g.check_vertex(i)?;
    if s.contains(i) {
        return Err(GraphError::OutcomeInSet(g.name(i).to_string()));
    }
    if !s.is_subset(g.all()) {
        return Err(GraphError::UnknownVertex(format!("set {:#x}", s.bits())));
    }
    g.check_path_cap()
}

/// Splits `s` into S1 (some back-door path to `i` left open by the other
/// members) and S2 (all such paths blocked).
pub fn partition_s1_s2(g: &Admg, s: VertexSet, i: VertexId) -> Result<S1S2Partition, GraphError> {
    check_regressors(g, s, i)?;
    let s1: VertexSet = s
        .iter()
        .filter(|&k| first_open_backdoor(g, s.without(k), k, i, false).is_some())
        .collect();
    Ok(S1S2Partition {
        s1,
        s2: s.difference(s1),
    })
}

/// Evaluates the three no-confounding conditions on regressor set `s`
/// independently: (i) each member satisfies the selective-door criterion
/// given the others; (ii) the others block all of its back-door paths;
/// (iii) the others block all of its collider-free back-door paths.
pub fn no_confounding_equivalence(
    g: &Admg,
    s: VertexSet,
    i: VertexId,
) -> Result<(bool, bool, bool), GraphError> {
    check_regressors(g, s, i)?;
    let mut selective = true;
    for j in s.iter() {
        if !selective_door_criterion(g, s.without(j), j, i, CriterionMode::Resolved)?.satisfied {
            selective = false;
            break;
        }
    }
    let all_backdoor = s
        .iter()
        .all(|j| first_open_backdoor(g, s.without(j), j, i, false).is_none());
    let collider_free = s
        .iter()
        .all(|j| first_open_backdoor(g, s.without(j), j, i, true).is_none());
    Ok((selective, all_backdoor, collider_free))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(g: &Admg, names: &[&str]) -> VertexSet {
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

    fn fig1() -> Admg {
        Admg::from_names(
            &["X", "M1", "M2", "Y"],
            &[
                ("X", "M1"),
                ("X", "M2"),
                ("M1", "M2"),
                ("M1", "Y"),
                ("M2", "Y"),
            ],
            &[],
        )
        .unwrap()
    }

    fn confounder() -> Admg {
        Admg::from_names(&["C", "X", "Y"], &[("C", "X"), ("C", "Y"), ("X", "Y")], &[]).unwrap()
    }

    #[test]
    fn vacuous_backdoor_blocking() {
        let g = fig2();
        let v = blocks_all_backdoor(
            &g,
            VertexSet::empty(),
            g.vertex("X").unwrap(),
            g.vertex("Y").unwrap(),
        )
        .unwrap();
        assert!(v.satisfied);
    }

    #[test]
    fn bidirected_backdoor_witness() {
        let g = Admg::from_names(&["X1", "X2"], &[], &[("X1", "X2")]).unwrap();
        let v = blocks_all_backdoor(&g, VertexSet::empty(), VertexId(0), VertexId(1)).unwrap();
        assert!(!v.satisfied);
        assert_eq!(v.witness.unwrap().describe(&g), "X1 <-> X2");
    }

    #[test]
    fn fig2_backdoor_from_m2() {
        let g = fig2();
        let v = blocks_all_backdoor(
            &g,
            VertexSet::empty(),
            g.vertex("M2").unwrap(),
            g.vertex("Y").unwrap(),
        )
        .unwrap();
        assert!(!v.satisfied);
        assert_eq!(v.witness.unwrap().describe(&g), "M2 <- M1 -> Y");
    }

    #[test]
    fn backdoor_criterion_cases() {
        let g = fig2();
        let (x, y) = (g.vertex("X").unwrap(), g.vertex("Y").unwrap());
        assert!(
            backdoor_criterion(&g, VertexSet::empty(), x, y)
                .unwrap()
                .satisfied
        );
        let v = backdoor_criterion(&g, set(&g, &["M2"]), x, y).unwrap();
        assert!(!v.satisfied);
        assert!(matches!(v.witness, Some(Witness::DescendantInSet { .. })));

        let g = confounder();
        let (x, y) = (g.vertex("X").unwrap(), g.vertex("Y").unwrap());
        assert!(
            backdoor_criterion(&g, set(&g, &["C"]), x, y)
                .unwrap()
                .satisfied
        );
        assert!(
            !backdoor_criterion(&g, VertexSet::empty(), x, y)
                .unwrap()
                .satisfied
        );
        assert!(matches!(
            backdoor_criterion(&g, set(&g, &["X"]), x, y),
            Err(GraphError::EndpointInConditioningSet(_))
        ));
    }

    #[test]
    fn selective_door_fig2_fails_on_m2() {
        let g = fig2();
        let (x, y) = (g.vertex("X").unwrap(), g.vertex("Y").unwrap());
        let v =
            selective_door_criterion(&g, set(&g, &["M2"]), x, y, CriterionMode::Resolved).unwrap();
        assert!(!v.satisfied);
        match v.witness.unwrap() {
            Witness::PostTreatment {
                vertex,
                directed,
                backdoor,
            } => {
                assert_eq!(g.name(vertex), "M2");
                assert_eq!(directed.display(&g).to_string(), "X -> M1 -> M2");
                assert_eq!(backdoor.display(&g).to_string(), "M2 <- M1 -> Y");
            }
            other => panic!("unexpected witness {other:?}"),
        }
    }

    #[test]
    fn selective_door_fig1_passes_on_m1() {
        let g = fig1();
        let (x, y) = (g.vertex("X").unwrap(), g.vertex("Y").unwrap());
        let z = set(&g, &["M1"]);
        assert!(
            selective_door_criterion(&g, z, x, y, CriterionMode::Resolved)
                .unwrap()
                .satisfied
        );
        // Read literally, X is not among the blockers of M1 <- X -> M2 -> Y.
        assert!(
            !selective_door_criterion(&g, z, x, y, CriterionMode::Literal)
                .unwrap()
                .satisfied
        );
        assert!(!backdoor_criterion(&g, z, x, y).unwrap().satisfied);
    }

    #[test]
    fn selective_door_vacuous() {
        let g = Admg::from_names(&["J", "I"], &[("J", "I")], &[]).unwrap();
        assert!(
            selective_door_criterion(
                &g,
                VertexSet::empty(),
                VertexId(0),
                VertexId(1),
                CriterionMode::Resolved
            )
            .unwrap()
            .satisfied
        );
    }

    #[test]
    fn single_door_cases() {
        let g =
            Admg::from_names(&["X", "M", "Y"], &[("X", "M"), ("M", "Y"), ("X", "Y")], &[]).unwrap();
        let (x, y) = (g.vertex("X").unwrap(), g.vertex("Y").unwrap());
        assert!(
            single_door_precondition(&g, set(&g, &["M"]), x, y)
                .unwrap()
                .satisfied
        );
        let open = single_door_precondition(&g, VertexSet::empty(), x, y).unwrap();
        assert!(!open.satisfied);
        assert_eq!(open.witness.unwrap().describe(&g), "X -> M -> Y");

        let g = Admg::from_names(&["X", "Y", "D"], &[("X", "Y"), ("Y", "D")], &[]).unwrap();
        let v = single_door_precondition(&g, set(&g, &["D"]), VertexId(0), VertexId(1)).unwrap();
        assert!(matches!(v.witness, Some(Witness::DescendantInSet { .. })));
    }

    #[test]
    fn partition_examples() {
        let g = fig2();
        let y = g.vertex("Y").unwrap();
        let p = partition_s1_s2(&g, set(&g, &["X", "M2"]), y).unwrap();
        assert_eq!(p.s1, set(&g, &["M2"]));
        assert_eq!(p.s2, set(&g, &["X"]));

        let chain = Admg::from_names(&["A", "B", "C"], &[("A", "B"), ("B", "C")], &[]).unwrap();
        let p = partition_s1_s2(&chain, set(&chain, &["A", "B"]), VertexId(2)).unwrap();
        assert!(p.s1.is_empty());

        let g = confounder();
        let p = partition_s1_s2(&g, set(&g, &["X", "C"]), g.vertex("Y").unwrap()).unwrap();
        assert!(p.s1.is_empty());
        assert_eq!(p.s2, set(&g, &["X", "C"]));

        assert!(matches!(
            partition_s1_s2(&g, set(&g, &["Y"]), g.vertex("Y").unwrap()),
            Err(GraphError::OutcomeInSet(_))
        ));
    }

    #[test]
    fn no_confounding_examples() {
        let g = Admg::from_names(
            &["A", "B", "C", "Y"],
            &[("A", "Y"), ("B", "Y"), ("A", "C"), ("C", "Y")],
            &[],
        )
        .unwrap();
        let parents = g.parents(g.vertex("Y").unwrap());
        assert_eq!(
            no_confounding_equivalence(&g, parents, g.vertex("Y").unwrap()).unwrap(),
            (true, true, true)
        );

        let g = Admg::from_names(&["X", "Y"], &[("X", "Y")], &[("X", "Y")]).unwrap();
        assert_eq!(
            no_confounding_equivalence(&g, set(&g, &["X"]), VertexId(1)).unwrap(),
            (false, false, false)
        );
    }

    #[test]
    fn path_cap_is_enforced() {
        let g = fig2().with_path_cap(3);
        assert_eq!(
            backdoor_criterion(&g, VertexSet::empty(), VertexId(0), VertexId(3)),
            Err(GraphError::GraphTooLarge { size: 4, cap: 3 })
        );
    }
}
