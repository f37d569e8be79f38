use proptest::prelude::*;
use selective_door::adjust::{approx_eq, beta_tau, AdjustmentQuery};
use selective_door::graph::{
    backdoor_criterion, blocks, enumerate_paths, no_confounding_equivalence,
    selective_door_criterion, Admg, CriterionMode, Mark, VertexId, VertexSet,
};
use selective_door::montecarlo::{
    random_model, sample_data_with, ErrorDistribution, Execution, ParamRanges,
};
use selective_door::sem::{controlled_total_effect, moments, partial_regression};

/// ADMG on `n` ordered vertices with one directed and one bidirected flag
/// per vertex pair.
fn admg() -> impl Strategy<Value = Admg> {
    (2usize..=6).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            Just(n),
            proptest::collection::vec(proptest::bool::weighted(0.45), pairs),
            proptest::collection::vec(proptest::bool::weighted(0.2), pairs),
        )
            .prop_map(|(n, dir, bi)| {
                let pairs: Vec<(usize, usize)> =
                    (0..n).flat_map(|b| (0..b).map(move |a| (a, b))).collect();
                let pick = |flags: &[bool]| -> Vec<(usize, usize)> {
                    pairs
                        .iter()
                        .zip(flags)
                        .filter(|(_, f)| **f)
                        .map(|(p, _)| *p)
                        .collect()
                };
                let names: Vec<String> = (1..=n).map(|k| format!("V{k}")).collect();
                Admg::new(names, &pick(&dir), &pick(&bi)).unwrap()
            })
    })
}

/// A graph with a query `(i, j, Z)` drawn from it.
fn query() -> impl Strategy<Value = (Admg, AdjustmentQuery)> {
    admg().prop_flat_map(|g| {
        let n = g.len();
        (Just(g), 0..n, 0..n - 1, any::<u64>()).prop_map(|(g, i, j, zbits)| {
            let j = if j >= i { j + 1 } else { j };
            let (i, j) = (VertexId(i), VertexId(j));
            let z: VertexSet = g
                .vertices()
                .filter(|v| zbits >> v.0 & 1 == 1 && *v != i && *v != j)
                .collect();
            (g, AdjustmentQuery::new(i, j, z))
        })
    })
}

/// Number of simple paths between `a` and `b`, counting parallel edges of
/// different kinds separately.
fn count_paths(g: &Admg, cur: usize, b: usize, visited: &mut Vec<bool>) -> usize {
    if cur == b {
        return 1;
    }
    let mut total = 0;
    for w in 0..g.len() {
        if visited[w] {
            continue;
        }
        let (v, u) = (VertexId(cur), VertexId(w));
        let edges = usize::from(g.has_directed(v, u))
            + usize::from(g.has_directed(u, v))
            + usize::from(g.has_bidirected(v, u));
        if edges > 0 {
            visited[w] = true;
            total += edges * count_paths(g, w, b, visited);
            visited[w] = false;
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn path_enumeration_matches_counting_oracle((g, q) in query()) {
        let (a, b) = (q.treatment, q.outcome);
        let paths = enumerate_paths(&g, a, b).unwrap();
        let mut visited = vec![false; g.len()];
        visited[a.0] = true;
        prop_assert_eq!(paths.len(), count_paths(&g, a.0, b.0, &mut visited));
        for p in &paths {
            let mut seen = VertexSet::default();
            for &v in p.vertices() {
                prop_assert!(!seen.contains(v));
                seen.insert(v);
            }
        }
    }

    #[test]
    fn path_enumeration_is_symmetric((g, q) in query()) {
        let (a, b) = (q.treatment, q.outcome);
        let mut forward: Vec<String> = enumerate_paths(&g, a, b)
            .unwrap()
            .iter()
            .map(|p| p.reversed().display(&g).to_string())
            .collect();
        let mut backward: Vec<String> =
            enumerate_paths(&g, b, a).unwrap().iter().map(|p| p.display(&g).to_string()).collect();
        forward.sort();
        backward.sort();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn collider_free_paths_stay_blocked_when_z_grows((g, q) in query(), extra in 0usize..6) {
        let (a, b, z) = (q.treatment, q.outcome, q.adjust);
        let w = VertexId(extra % g.len());
        prop_assume!(w != a && w != b);
        for p in enumerate_paths(&g, a, b).unwrap() {
            if !p.has_collider() && blocks(&g, z, &p).unwrap() {
                prop_assert!(blocks(&g, z.with(w), &p).unwrap());
            }
        }
    }

    #[test]
    fn backdoor_implies_selective_door((g, q) in query()) {
        let (i, j, z) = (q.outcome, q.treatment, q.adjust);
        if backdoor_criterion(&g, z, j, i).unwrap().satisfied {
            prop_assert!(selective_door_criterion(&g, z, j, i, CriterionMode::Resolved).unwrap().satisfied);
        }
    }

    #[test]
    fn literal_definition_is_never_weaker((g, q) in query()) {
        let (i, j, z) = (q.outcome, q.treatment, q.adjust);
        if selective_door_criterion(&g, z, j, i, CriterionMode::Literal).unwrap().satisfied {
            prop_assert!(selective_door_criterion(&g, z, j, i, CriterionMode::Resolved).unwrap().satisfied);
        }
    }

    #[test]
    fn no_confounding_conditions_agree((g, q) in query()) {
        let s = q.regressors();
        let (a, b, c) = no_confounding_equivalence(&g, s, q.outcome).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(b, c);
    }

    #[test]
    fn regression_slopes_ignore_intercepts((g, q) in query(), seed in any::<u64>(), shift in -5.0f64..5.0) {
        let m = random_model(&g, &ParamRanges::default(), seed).unwrap();
        let shifted = m.clone().with_intercepts((0..g.len()).map(|k| shift * (k as f64 + 1.0)).collect()).unwrap();
        let base = partial_regression(&m, q.outcome, q.regressors()).unwrap();
        let moved = partial_regression(&shifted, q.outcome, q.regressors()).unwrap();
        for ((_, a), (_, b)) in base.coefficients.iter().zip(&moved.coefficients) {
            prop_assert!(approx_eq(*a, *b) || (a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
        let (b0, t0) = beta_tau(&m, &moments(&m), &q).unwrap();
        let (b1, t1) = beta_tau(&shifted, &moments(&shifted), &q).unwrap();
        prop_assert!((b0 - b1).abs() < 1e-10 * b0.abs().max(1.0));
        prop_assert_eq!(t0, t1);
    }

    #[test]
    fn uncontrolled_effect_is_total_effect((g, q) in query(), seed in any::<u64>()) {
        let m = random_model(&g, &ParamRanges::default(), seed).unwrap();
        let tau = controlled_total_effect(&m, q.outcome, q.treatment, VertexSet::default()).unwrap();
        prop_assert!(approx_eq(tau, moments(&m).b[(q.outcome.0, q.treatment.0)]));
    }

    #[test]
    fn controlling_every_mediator_leaves_direct_edge((g, q) in query(), seed in any::<u64>()) {
        let m = random_model(&g, &ParamRanges::default(), seed).unwrap();
        let (i, j) = (q.outcome, q.treatment);
        let rest = g.all().without(i).without(j);
        let tau = controlled_total_effect(&m, i, j, rest).unwrap();
        prop_assert_eq!(tau, m.coef()[(i.0, j.0)]);
    }
}

#[test]
fn parallel_and_sequential_sampling_agree() {
    let g = Admg::from_names(
        &["A", "B", "C"],
        &[("A", "B"), ("B", "C"), ("A", "C")],
        &[("A", "C")],
    )
    .unwrap();
    let m = random_model(&g, &ParamRanges::default(), 4).unwrap();
    for dist in [
        ErrorDistribution::Gaussian,
        ErrorDistribution::Uniform,
        ErrorDistribution::ShiftedExponential,
    ] {
        let par = sample_data_with(&m, 10_000, 9, dist, Execution::Parallel).unwrap();
        let seq = sample_data_with(&m, 10_000, 9, dist, Execution::Sequential).unwrap();
        for k in 0..3 {
            assert_eq!(par.column(VertexId(k)), seq.column(VertexId(k)));
        }
    }
}

#[test]
fn path_marks_have_expected_meaning() {
    let g = Admg::from_names(&["A", "B"], &[("A", "B")], &[("A", "B")]).unwrap();
    let paths = enumerate_paths(&g, VertexId(0), VertexId(1)).unwrap();
    let marks: Vec<Mark> = paths.iter().map(|p| p.marks()[0]).collect();
    assert_eq!(marks, vec![Mark::Forward, Mark::Bidirected]);
}
