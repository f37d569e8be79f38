//! Regression coefficients read against the graph: identification verdicts,
//! the classical special cases, the post-treatment bias ledger and the
//! residualised ("tilde") variables used to analyse it.

use std::ops::ControlFlow;

use thiserror::Error;

use crate::graph::{
    backdoor_criterion, blocks_all_backdoor, partition_s1_s2, selective_door_criterion,
    single_door_precondition, Admg, CriterionMode, GraphError, S1S2Partition, Verdict, VertexId,
    VertexSet, Witness,
};
use crate::linalg::{unit_lower_inverse, Matrix};
use crate::sem::{controlled_column, moments, ModelError, MomentSet, SemModel};

/// Relative tolerance for exact population identities.
pub const REL_TOL: f64 = 1e-9;
/// Absolute floor under [`REL_TOL`].
pub const ABS_FLOOR: f64 = 1e-12;

/// `|a - b| <= max(REL_TOL * max(|a|, |b|), ABS_FLOOR)`
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= (REL_TOL * a.abs().max(b.abs())).max(ABS_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("precondition not met: {detail}")]
    PreconditionNotMet {
        detail: String,
        witness: Option<Box<Witness>>,
    },
}

impl AnalysisError {
    fn precondition(g: &Admg, what: &str, verdict: Verdict) -> Self {
        let detail = match &verdict.witness {
            Some(w) => format!("{what} ({})", w.describe(g)),
            None => what.to_string(),
        };
        AnalysisError::PreconditionNotMet {
            detail,
            witness: verdict.witness.map(Box::new),
        }
    }
}

/// Regression of outcome `i` on treatment `j` and covariates `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdjustmentQuery {
    pub outcome: VertexId,
    pub treatment: VertexId,
    pub adjust: VertexSet,
}

impl AdjustmentQuery {
    pub fn new(outcome: VertexId, treatment: VertexId, adjust: VertexSet) -> Self {
        AdjustmentQuery {
            outcome,
            treatment,
            adjust,
        }
    }

    /// The full regressor set `{j} ∪ z`.
    pub fn regressors(&self) -> VertexSet {
        self.adjust.with(self.treatment)
    }

    pub fn validate(&self, g: &Admg) -> Result<(), GraphError> {
        g.check_vertex(self.outcome)?;
        g.check_vertex(self.treatment)?;
        if !self.adjust.is_subset(g.all()) {
            return Err(GraphError::UnknownVertex(format!(
                "set {:#x}",
                self.adjust.bits()
            )));
        }
        if self.outcome == self.treatment {
            return Err(GraphError::SameEndpoints);
        }
        if self.adjust.contains(self.outcome) {
            return Err(GraphError::OutcomeInSet(g.name(self.outcome).to_string()));
        }
        if self.adjust.contains(self.treatment) {
            return Err(GraphError::EndpointInConditioningSet(
                g.name(self.treatment).to_string(),
            ));
        }
        Ok(())
    }
}

/// Coefficient and controlled effect for one query, without the graph
/// verdict. This is the inner loop of the random-parameter sweeps.
pub fn beta_tau(
    m: &SemModel,
    mom: &MomentSet,
    q: &AdjustmentQuery,
) -> Result<(f64, f64), ModelError> {
    let reg = mom.regression(q.outcome, q.regressors())?;
    let beta = reg
        .coefficient(q.treatment)
        .expect("treatment is a regressor");
    let tau = controlled_column(m.coef(), q.adjust, q.treatment.0)[q.outcome.0];
    Ok((beta, tau))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectReport {
    pub criterion: Verdict,
    /// Regression coefficient on the treatment, `β_{ij|Z}`.
    pub beta: f64,
    /// Z-controlled total effect, `τ_{ij|do(Z)}`.
    pub tau: f64,
    /// `beta - tau`
    pub gamma: f64,
    /// Uncontrolled total effect of `j` on `i`.
    pub total_effect: f64,
    pub s1s2: S1S2Partition,
    /// Bias predicted from the S1 decomposition; present when `z` blocks
    /// every back-door path from `j` to `i`.
    pub bias_rhs: Option<f64>,
}

pub fn identify(m: &SemModel, q: &AdjustmentQuery) -> Result<EffectReport, AnalysisError> {
    identify_with(m, q, CriterionMode::Resolved)
}

pub fn identify_with(
    m: &SemModel,
    q: &AdjustmentQuery,
    mode: CriterionMode,
) -> Result<EffectReport, AnalysisError> {
    let g = m.graph();
    q.validate(g)?;
    let criterion = selective_door_criterion(g, q.adjust, q.treatment, q.outcome, mode)?;
    let mom = moments(m);
    let (beta, tau) = beta_tau(m, &mom, q)?;
    let total_effect = mom.b[(q.outcome.0, q.treatment.0)];
    let s1s2 = partition_s1_s2(g, q.regressors(), q.outcome)?;
    let bias_rhs = if blocks_all_backdoor(g, q.adjust, q.treatment, q.outcome)?.satisfied {
        Some(total_contribution(&bias_terms(m, &mom, q, &s1s2)?))
    } else {
        None
    };
    Ok(EffectReport {
        criterion,
        beta,
        tau,
        gamma: beta - tau,
        total_effect,
        s1s2,
        bias_rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corollary {
    /// `z` blocks every path: the coefficient vanishes.
    Zero,
    /// Single-door setting: the coefficient is the direct effect.
    SingleDoor,
    /// Back-door setting: the coefficient is the total effect.
    BackDoor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryReport {
    pub corollary: Corollary,
    pub beta: f64,
    pub expected: f64,
    pub holds: bool,
}

fn corollary_report(
    m: &SemModel,
    q: &AdjustmentQuery,
    corollary: Corollary,
    expected: f64,
) -> Result<CorollaryReport, AnalysisError> {
    let mom = moments(m);
    let (beta, _) = beta_tau(m, &mom, q)?;
    Ok(CorollaryReport {
        corollary,
        beta,
        expected,
        holds: approx_eq(beta, expected),
    })
}

/// When `z` blocks every path between `j` and `i`, `β_{ij|Z} = 0`.
pub fn corollary_zero(m: &SemModel, q: &AdjustmentQuery) -> Result<CorollaryReport, AnalysisError> {
    let g = m.graph();
    q.validate(g)?;
    let v = crate::graph::blocks_every_path(g, q.adjust, q.treatment, q.outcome)?;
    if !v.satisfied {
        return Err(AnalysisError::precondition(
            g,
            "adjustment set leaves a path open",
            v,
        ));
    }
    corollary_report(m, q, Corollary::Zero, 0.0)
}

/// Under the single-door precondition, `β_{ij|Z} = a_ij`.
pub fn corollary_single_door(
    m: &SemModel,
    q: &AdjustmentQuery,
) -> Result<CorollaryReport, AnalysisError> {
    let g = m.graph();
    q.validate(g)?;
    let v = single_door_precondition(g, q.adjust, q.treatment, q.outcome)?;
    if !v.satisfied {
        return Err(AnalysisError::precondition(
            g,
            "single-door precondition fails",
            v,
        ));
    }
    let direct = m.coef()[(q.outcome.0, q.treatment.0)];
    corollary_report(m, q, Corollary::SingleDoor, direct)
}

/// Under the back-door criterion, `β_{ij|Z}` is the total effect.
pub fn corollary_backdoor(
    m: &SemModel,
    q: &AdjustmentQuery,
) -> Result<CorollaryReport, AnalysisError> {
    let g = m.graph();
    q.validate(g)?;
    let v = backdoor_criterion(g, q.adjust, q.treatment, q.outcome)?;
    if !v.satisfied {
        return Err(AnalysisError::precondition(
            g,
            "back-door criterion fails",
            v,
        ));
    }
    let total = crate::sem::total_effect(m, q.outcome, q.treatment)?;
    corollary_report(m, q, Corollary::BackDoor, total)
}

/// One S1 member's share of the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTerm {
    pub vertex: VertexId,
    /// `γ_{ip|S∖{p}}`: the bias of the outcome's coefficient on `p`.
    pub gamma_ip: f64,
    /// `τ_{pj|do(S2∖{j})}`
    pub tau_pj: f64,
    /// `-gamma_ip * tau_pj`
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasLedger {
    pub s1s2: S1S2Partition,
    /// `beta - tau`
    pub gamma: f64,
    /// Sum of the term contributions.
    pub gamma_rhs: f64,
    pub terms: Vec<BiasTerm>,
    pub holds: bool,
}

fn bias_terms(
    m: &SemModel,
    mom: &MomentSet,
    q: &AdjustmentQuery,
    s1s2: &S1S2Partition,
) -> Result<Vec<BiasTerm>, ModelError> {
    let s = q.regressors();
    let reg = mom.regression(q.outcome, s)?;
    let do_s2 = s1s2.s2.without(q.treatment);
    let tau_from_j = controlled_column(m.coef(), do_s2, q.treatment.0);
    Ok(s1s2
        .s1
        .iter()
        .map(|p| {
            let beta_ip = reg.coefficient(p).expect("S1 is part of the regressor set");
            let tau_ip = controlled_column(m.coef(), s.without(p), p.0)[q.outcome.0];
            let gamma_ip = beta_ip - tau_ip;
            let tau_pj = tau_from_j[p.0];
            BiasTerm {
                vertex: p,
                gamma_ip,
                tau_pj,
                contribution: -gamma_ip * tau_pj,
            }
        })
        .collect())
}

fn total_contribution(terms: &[BiasTerm]) -> f64 {
    // Start from +0.0 so an empty ledger does not report -0.
    terms.iter().fold(0.0, |acc, t| acc + t.contribution)
}

/// Splits `β_{ij|Z} - τ_{ij|do(Z)}` into per-vertex contributions from S1.
///
/// Requires `z` to block every back-door path from `j` to `i`.
pub fn bias_decomposition(m: &SemModel, q: &AdjustmentQuery) -> Result<BiasLedger, AnalysisError> {
    let g = m.graph();
    q.validate(g)?;
    let v = blocks_all_backdoor(g, q.adjust, q.treatment, q.outcome)?;
    if !v.satisfied {
        return Err(AnalysisError::precondition(
            g,
            "unblocked back-door path",
            v,
        ));
    }
    let s1s2 = partition_s1_s2(g, q.regressors(), q.outcome)?;
    Ok(bias_ledger(m, &moments(m), q, s1s2)?)
}

/// The ledger from precomputed moments and partition, for callers that
/// have already checked the back-door precondition.
pub fn bias_ledger(
    m: &SemModel,
    mom: &MomentSet,
    q: &AdjustmentQuery,
    s1s2: S1S2Partition,
) -> Result<BiasLedger, ModelError> {
    let (beta, tau) = beta_tau(m, mom, q)?;
    let terms = bias_terms(m, mom, q, &s1s2)?;
    let gamma = beta - tau;
    let gamma_rhs = total_contribution(&terms);
    Ok(BiasLedger {
        s1s2,
        gamma,
        gamma_rhs,
        terms,
        holds: approx_eq(gamma, gamma_rhs),
    })
}

/// Residualised variables as weight vectors over the observed `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeSystem {
    pub outcome: VertexId,
    pub s1s2: S1S2Partition,
    /// Weights of `X̃_i`.
    pub outcome_weights: Vec<f64>,
    /// `X̃_p` for each `p ∈ S1`.
    pub s1: Vec<(VertexId, Vec<f64>)>,
    /// `X̃_q` for each `q ∈ S2`.
    pub s2: Vec<(VertexId, Vec<f64>)>,
}

/// `e_v - Σ_{k ∈ set} τ_{vk | do(set ∖ {k})} e_k`
fn residualise(coef: &Matrix, v: VertexId, set: VertexSet) -> Vec<f64> {
    let mut w = vec![0.0; coef.rows()];
    w[v.0] = 1.0;
    for k in set.iter() {
        w[k.0] -= controlled_column(coef, set.without(k), k.0)[v.0];
    }
    w
}

pub fn tilde_system(m: &SemModel, q: &AdjustmentQuery) -> Result<TildeSystem, AnalysisError> {
    q.validate(m.graph())?;
    tilde_system_for_set(m, q.outcome, q.regressors())
}

/// Tilde variables for an arbitrary regressor set `s` of outcome `i`.
pub fn tilde_system_for_set(
    m: &SemModel,
    i: VertexId,
    s: VertexSet,
) -> Result<TildeSystem, AnalysisError> {
    let s1s2 = partition_s1_s2(m.graph(), s, i)?;
    let a = m.coef();
    Ok(TildeSystem {
        outcome: i,
        s1s2,
        outcome_weights: residualise(a, i, s),
        s1: s1s2
            .s1
            .iter()
            .map(|p| (p, residualise(a, p, s1s2.s2)))
            .collect(),
        s2: s1s2
            .s2
            .iter()
            .map(|q| (q, residualise(a, q, s1s2.s1)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    /// `max_q |Cov(X̃_q, X̃_i)|`
    pub outcome_cov: f64,
    /// `max_{q,p} |Cov(X̃_q, X̃_p)|`
    pub s1_cov: f64,
    pub passed: bool,
}

/// Evaluates the two vanishing-covariance properties of a tilde system.
pub fn lemma_checks(m: &SemModel, t: &TildeSystem) -> LemmaReport {
    let cov = moments(m).cov;
    let mut outcome_cov: f64 = 0.0;
    let mut s1_cov: f64 = 0.0;
    for (_, wq) in &t.s2 {
        outcome_cov = outcome_cov.max(cov.quad(wq, &t.outcome_weights).abs());
        for (_, wp) in &t.s1 {
            s1_cov = s1_cov.max(cov.quad(wq, wp).abs());
        }
    }
    LemmaReport {
        outcome_cov,
        s1_cov,
        passed: outcome_cov <= REL_TOL && s1_cov <= REL_TOL,
    }
}

/// Result of rebuilding a coefficient matrix for the tilde variables by
/// edge deletion.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDeletionCheck {
    /// Coefficients after removing every edge into S2.
    pub step1: Matrix,
    /// Coefficients after also removing, on each directed path into the
    /// outcome, the edge entering its last S1 vertex.
    pub final_coef: Matrix,
    pub lower_triangular: bool,
    /// Error loadings of `X̃_i` equal row `i` of `(I - A')^{-1}` on every
    /// error outside the regressor set.
    pub outcome_map: bool,
    /// Error loadings of each `X̃_p` equal the rows of the S2-deleted
    /// system.
    pub s1_maps_step1: bool,
    /// Same comparison against the final matrix.
    pub s1_maps_final: bool,
}

fn loadings(weights: &[f64], b: &Matrix) -> Vec<f64> {
    (0..b.cols())
        .map(|c| weights.iter().enumerate().map(|(r, w)| w * b[(r, c)]).sum())
        .collect()
}

fn rows_match(lhs: &[f64], rhs: &[f64], skip: VertexSet) -> bool {
    lhs.iter()
        .zip(rhs)
        .enumerate()
        .filter(|(k, _)| !skip.contains(VertexId(*k)))
        .all(|(_, (a, b))| approx_eq(*a, *b))
}

pub fn edge_deletion_check(m: &SemModel, t: &TildeSystem) -> EdgeDeletionCheck {
    let g = m.graph();
    let n = g.len();
    let (s1, s2) = (t.s1s2.s1, t.s1s2.s2);
    let mut step1 = m.coef().clone();
    for q in s2.iter() {
        for c in 0..n {
            step1[(q.0, c)] = 0.0;
        }
    }
    let pruned = g.filter_directed(|_, to| !s2.contains(to));
    let mut final_coef = step1.clone();
    // Backward walk from the outcome; `stack` holds the current directed
    // path read from its start vertex towards `i`.
    let mut stack = vec![t.outcome];
    let _ = walk_back(&pruned, &mut stack, &mut |path: &[VertexId]| {
        // path[0] is the start, the last entry is i; vertex order increases
        // along the path so the last S1 vertex has the largest index.
        if let Some(pos) = path.iter().rposition(|v| s1.contains(*v)) {
            if pos > 0 {
                final_coef[(path[pos].0, path[pos - 1].0)] = 0.0;
            }
        }
        ControlFlow::<()>::Continue(())
    });

    let lower_triangular = (0..n).all(|r| (r..n).all(|c| final_coef[(r, c)] == 0.0));
    let b_orig = unit_lower_inverse(m.coef());
    let b_step1 = unit_lower_inverse(&step1);
    let b_final = unit_lower_inverse(&final_coef);
    let s = s1.union(s2);

    let out = loadings(&t.outcome_weights, &b_orig);
    let outcome_map = rows_match(&out, b_final.row(t.outcome.0), s);
    let mut s1_maps_step1 = true;
    let mut s1_maps_final = true;
    for (p, w) in &t.s1 {
        let lp = loadings(w, &b_orig);
        s1_maps_step1 &= rows_match(&lp, b_step1.row(p.0), s2);
        s1_maps_final &= rows_match(&lp, b_final.row(p.0), s2);
    }
    EdgeDeletionCheck {
        step1,
        final_coef,
        lower_triangular,
        outcome_map,
        s1_maps_step1,
        s1_maps_final,
    }
}

fn walk_back<F>(g: &Admg, stack: &mut Vec<VertexId>, visit: &mut F) -> ControlFlow<()>
where
    F: FnMut(&[VertexId]) -> ControlFlow<()>,
{
    let head = stack[0];
    for p in g.parents(head).iter() {
        stack.insert(0, p);
        let mut flow = visit(stack);
        if flow.is_continue() {
            flow = walk_back(g, stack, visit);
        }
        stack.remove(0);
        flow?;
    }
    ControlFlow::Continue(())
}
