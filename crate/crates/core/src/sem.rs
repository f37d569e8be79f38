//! Linear structural equation models over an ADMG.
//!
//! `X = A X + u` with `Var(u) = Σ`, `E[u] = c`. The coefficient matrix is
//! indexed `A[child][parent]` and is strictly lower triangular in the causal
//! ordering, so `(I - A)^{-1}` is obtained by forward substitution.
//! Everything here is exact population algebra; sampling lives in
//! [`crate::montecarlo`].

use thiserror::Error;

use crate::graph::{Admg, GraphError, VertexId, VertexSet};
use crate::linalg::{
    cholesky, cholesky_solve, solve_general, unit_lower_inverse, unit_lower_inverse_column, Matrix,
};

/// Pivot tolerance for positive-definiteness and design-matrix checks.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("expected {expected} x {expected} parameters, got {got}")]
    DimensionMismatch { expected: usize, got: String },
    #[error("coefficient A[{row}][{col}] sits on or above the diagonal")]
    NotLowerTriangular { row: String, col: String },
    #[error("error covariance is not positive definite")]
    SigmaNotPD,
    #[error("error covariance is not symmetric at ({0}, {1})")]
    SigmaNotSymmetric(String, String),
    #[error("parameter/edge mismatch: {0}")]
    EdgeCoefficientMismatch(String),
    #[error("query vertex {0} is in the intervention set")]
    QueryVertexInZ(String),
    #[error("outcome {0} is among the regressors")]
    OutcomeInSet(String),
    #[error("the total effect of a vertex on itself is undefined ({0})")]
    SameVertex(String),
    #[error("regressor covariance matrix is singular")]
    SingularDesign,
}

/// A validated linear SEM.
#[derive(Debug, Clone, PartialEq)]
pub struct SemModel {
    graph: Admg,
    coef: Matrix,
    sigma: Matrix,
    intercepts: Vec<f64>,
}

fn check_parts(g: &Admg, coef: &Matrix, sigma: &Matrix, c: &[f64]) -> Result<(), ModelError> {
    let n = g.len();
    let dims = |m: &Matrix| format!("{} x {}", m.rows(), m.cols());
    if coef.rows() != n || coef.cols() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            got: dims(coef),
        });
    }
    if sigma.rows() != n || sigma.cols() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            got: dims(sigma),
        });
    }
    if c.len() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            got: format!("{} intercepts", c.len()),
        });
    }
    let name = |i: usize| g.name(VertexId(i)).to_string();
    for r in 0..n {
        for col in r..n {
            if coef[(r, col)] != 0.0 {
                return Err(ModelError::NotLowerTriangular {
                    row: name(r),
                    col: name(col),
                });
            }
        }
    }
    for r in 0..n {
        for col in 0..r {
            let edge = g.has_directed(VertexId(col), VertexId(r));
            let value = coef[(r, col)];
            if edge && value == 0.0 {
                return Err(ModelError::EdgeCoefficientMismatch(format!(
                    "edge {} -> {} has a zero coefficient",
                    name(col),
                    name(r)
                )));
            }
            if !edge && value != 0.0 {
                return Err(ModelError::EdgeCoefficientMismatch(format!(
                    "coefficient on {} -> {} without a directed edge",
                    name(col),
                    name(r)
                )));
            }
        }
    }
    for r in 0..n {
        for col in 0..r {
            if sigma[(r, col)] != sigma[(col, r)] {
                return Err(ModelError::SigmaNotSymmetric(name(r), name(col)));
            }
            let edge = g.has_bidirected(VertexId(col), VertexId(r));
            let value = sigma[(r, col)];
            if edge && value == 0.0 {
                return Err(ModelError::EdgeCoefficientMismatch(format!(
                    "bidirected edge {} <-> {} has zero error covariance",
                    name(col),
                    name(r)
                )));
            }
            if !edge && value != 0.0 {
                return Err(ModelError::EdgeCoefficientMismatch(format!(
                    "error covariance between {} and {} without a bidirected edge",
                    name(col),
                    name(r)
                )));
            }
        }
    }
    if cholesky(sigma, PIVOT_TOL).is_none() {
        return Err(ModelError::SigmaNotPD);
    }
    Ok(())
}

impl SemModel {
    pub fn new(
        graph: Admg,
        coef: Matrix,
        sigma: Matrix,
        intercepts: Vec<f64>,
    ) -> Result<Self, ModelError> {
        check_parts(&graph, &coef, &sigma, &intercepts)?;
        Ok(SemModel {
            graph,
            coef,
            sigma,
            intercepts,
        })
    }

    /// Builds the parameter matrices from per-edge values. Directed edges
    /// take `(from, to, coef)`; bidirected edges `(a, b, cov)`.
    pub fn from_parameters(
        graph: Admg,
        coefs: &[(VertexId, VertexId, f64)],
        variances: &[f64],
        covs: &[(VertexId, VertexId, f64)],
        intercepts: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let n = graph.len();
        let mut coef = Matrix::zeros(n, n);
        for &(from, to, v) in coefs {
            graph.check_vertex(from)?;
            graph.check_vertex(to)?;
            coef[(to.0, from.0)] = v;
        }
        if variances.len() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                got: format!("{} variances", variances.len()),
            });
        }
        let mut sigma = Matrix::diag(variances);
        for &(a, b, v) in covs {
            graph.check_vertex(a)?;
            graph.check_vertex(b)?;
            sigma[(a.0, b.0)] = v;
            sigma[(b.0, a.0)] = v;
        }
        let c = intercepts.unwrap_or_else(|| vec![0.0; n]);
        SemModel::new(graph, coef, sigma, c)
    }

    pub fn graph(&self) -> &Admg {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    /// Path coefficients, `A[child][parent]`.
    pub fn coef(&self) -> &Matrix {
        &self.coef
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Same graph and coefficients with different error means.
    pub fn with_intercepts(&self, intercepts: Vec<f64>) -> Result<Self, ModelError> {
        SemModel::new(
            self.graph.clone(),
            self.coef.clone(),
            self.sigma.clone(),
            intercepts,
        )
    }

    fn name(&self, v: VertexId) -> String {
        self.graph.name(v).to_string()
    }
}

/// Re-checks every model invariant.
pub fn validate_model(m: &SemModel) -> Result<(), ModelError> {
    check_parts(&m.graph, &m.coef, &m.sigma, &m.intercepts)
}

/// Model-implied first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    /// `(I - A)^{-1}`
    pub b: Matrix,
}

pub fn moments(m: &SemModel) -> MomentSet {
    let n = m.len();
    let b = unit_lower_inverse(&m.coef);
    let bs = b.mul(&m.sigma);
    let mut cov = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..=r {
            // B is unit lower triangular: row c of B vanishes beyond column c.
            let v: f64 = (0..=c).map(|k| bs[(r, k)] * b[(c, k)]).sum();
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    let mean = b.mul_vec(&m.intercepts);
    MomentSet { mean, cov, b }
}

fn check_pair(m: &SemModel, i: VertexId, j: VertexId) -> Result<(), ModelError> {
    m.graph.check_vertex(i)?;
    m.graph.check_vertex(j)?;
    if i == j {
        return Err(ModelError::SameVertex(m.name(i)));
    }
    Ok(())
}

/// Total effect of `j` on `i`: entry `[i, j]` of `(I - A)^{-1}`.
pub fn total_effect(m: &SemModel, i: VertexId, j: VertexId) -> Result<f64, ModelError> {
    check_pair(m, i, j)?;
    Ok(unit_lower_inverse_column(&m.coef, j.0)[i.0])
}

/// Column `j` of `(I - A')^{-1}` where `A'` drops every edge into `z`.
pub(crate) fn controlled_column(coef: &Matrix, z: VertexSet, j: usize) -> Vec<f64> {
    let n = coef.rows();
    let mut x = vec![0.0; n];
    x[j] = 1.0;
    for r in j + 1..n {
        if z.contains(VertexId(r)) {
            continue;
        }
        let row = coef.row(r);
        let mut s = 0.0;
        for k in j..r {
            s += row[k] * x[k];
        }
        x[r] = s;
    }
    x
}

/// Z-controlled total effect of `j` on `i`: the total effect in the graph
/// with every edge into `z` removed.
pub fn controlled_total_effect(
    m: &SemModel,
    i: VertexId,
    j: VertexId,
    z: VertexSet,
) -> Result<f64, ModelError> {
    check_pair(m, i, j)?;
    for v in [i, j] {
        if z.contains(v) {
            return Err(ModelError::QueryVertexInZ(m.name(v)));
        }
    }
    Ok(controlled_column(&m.coef, z, j.0)[i.0])
}

/// `X_i` rewritten over a chosen set `s` plus ancestral errors.
#[derive(Debug, Clone, PartialEq)]
pub struct AncestralExpansion {
    /// `τ_{ij | do(S \ {j})}` for each `j ∈ s`.
    pub on_set: Vec<(VertexId, f64)>,
    /// `τ_{ik | do(S)}` for each ancestor `k` of `i` outside `s`.
    pub on_errors: Vec<(VertexId, f64)>,
}

impl AncestralExpansion {
    /// Right-hand side evaluated at given variable values and errors; the
    /// coefficient on `u_i` is one.
    pub fn evaluate(&self, i: VertexId, x: &[f64], u: &[f64]) -> f64 {
        let a: f64 = self.on_set.iter().map(|(v, t)| t * x[v.0]).sum();
        let b: f64 = self.on_errors.iter().map(|(v, t)| t * u[v.0]).sum();
        a + b + u[i.0]
    }
}

pub fn ancestral_expansion(
    m: &SemModel,
    i: VertexId,
    s: VertexSet,
) -> Result<AncestralExpansion, ModelError> {
    m.graph.check_vertex(i)?;
    if s.contains(i) {
        return Err(ModelError::OutcomeInSet(m.name(i)));
    }
    let on_set = s
        .iter()
        .map(|j| (j, controlled_column(&m.coef, s.without(j), j.0)[i.0]))
        .collect();
    let on_errors = m
        .graph
        .ancestors_of(i)
        .difference(s)
        .iter()
        .map(|k| (k, controlled_column(&m.coef, s, k.0)[i.0]))
        .collect();
    Ok(AncestralExpansion { on_set, on_errors })
}

/// Population least-squares regression of one variable on a set, with
/// intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub intercept: f64,
    /// Slopes in ascending causal order of the regressors.
    pub coefficients: Vec<(VertexId, f64)>,
    pub residual_variance: f64,
}

impl RegressionResult {
    pub fn coefficient(&self, v: VertexId) -> Option<f64> {
        self.coefficients
            .iter()
            .find(|(k, _)| *k == v)
            .map(|(_, b)| *b)
    }
}

impl MomentSet {
    /// Regression of `i` on `s` from these moments.
    pub fn regression(&self, i: VertexId, s: VertexSet) -> Result<RegressionResult, ModelError> {
        let idx: Vec<usize> = s.iter().map(|v| v.0).collect();
        let vss = self.cov.select(&idx, &idx);
        let vsi: Vec<f64> = idx.iter().map(|&k| self.cov[(k, i.0)]).collect();
        let beta = if idx.is_empty() {
            Vec::new()
        } else {
            let l = cholesky(&vss, PIVOT_TOL).ok_or(ModelError::SingularDesign)?;
            cholesky_solve(&l, &vsi)
        };
        let intercept = self.mean[i.0]
            - idx
                .iter()
                .zip(&beta)
                .map(|(&k, b)| b * self.mean[k])
                .sum::<f64>();
        let explained: f64 = beta.iter().zip(&vsi).map(|(b, c)| b * c).sum();
        Ok(RegressionResult {
            intercept,
            coefficients: idx.iter().map(|&k| VertexId(k)).zip(beta).collect(),
            residual_variance: self.cov[(i.0, i.0)] - explained,
        })
    }
}

/// Population regression of `X_i` on `X_s` (with intercept).
pub fn partial_regression(
    m: &SemModel,
    i: VertexId,
    s: VertexSet,
) -> Result<RegressionResult, ModelError> {
    m.graph.check_vertex(i)?;
    if s.contains(i) {
        return Err(ModelError::OutcomeInSet(m.name(i)));
    }
    if !s.is_subset(m.graph.all()) {
        return Err(GraphError::UnknownVertex(format!("set {:#x}", s.bits())).into());
    }
    moments(m).regression(i, s)
}

/// Orthogonality and uniqueness audit of a population regression.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `E[ε]`
    pub mean_residual: f64,
    /// `max_k |Cov(X_k, ε)|`
    pub max_abs_cov: f64,
    /// Largest gap between the centered solution and a solve of the
    /// uncentered, intercept-augmented normal equations.
    pub uniqueness_gap: f64,
    pub passed: bool,
}

pub const ORTHOGONALITY_TOL: f64 = 1e-10;

pub fn residual_checks(
    m: &SemModel,
    i: VertexId,
    s: VertexSet,
) -> Result<ResidualReport, ModelError> {
    let mom = moments(m);
    let reg = partial_regression(m, i, s)?;
    let fitted_mean: f64 = reg
        .coefficients
        .iter()
        .map(|(k, b)| b * mom.mean[k.0])
        .sum();
    let mean_residual = mom.mean[i.0] - reg.intercept - fitted_mean;
    let max_abs_cov = reg
        .coefficients
        .iter()
        .map(|(k, _)| {
            let fitted: f64 = reg
                .coefficients
                .iter()
                .map(|(l, b)| b * mom.cov[(k.0, l.0)])
                .sum();
            (mom.cov[(k.0, i.0)] - fitted).abs()
        })
        .fold(0.0, f64::max);

    // Uncentered route: E[X+ X+'] b = E[X+ X_i] with X+ = (1, X_s).
    let idx: Vec<usize> = s.iter().map(|v| v.0).collect();
    let p = idx.len() + 1;
    let second = |a: usize, b: usize| mom.cov[(a, b)] + mom.mean[a] * mom.mean[b];
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    gram[(0, 0)] = 1.0;
    rhs[0] = mom.mean[i.0];
    for (r, &a) in idx.iter().enumerate() {
        gram[(0, r + 1)] = mom.mean[a];
        gram[(r + 1, 0)] = mom.mean[a];
        rhs[r + 1] = second(a, i.0);
        for (c, &b) in idx.iter().enumerate() {
            gram[(r + 1, c + 1)] = second(a, b);
        }
    }
    let alt = solve_general(&gram, &rhs, PIVOT_TOL).ok_or(ModelError::SingularDesign)?;
    let scale = 1.0f64.max(reg.intercept.abs());
    let mut uniqueness_gap = (alt[0] - reg.intercept).abs() / scale;
    for ((_, b), a) in reg.coefficients.iter().zip(&alt[1..]) {
        uniqueness_gap = uniqueness_gap.max((a - b).abs() / 1.0f64.max(b.abs()));
    }
    let passed = mean_residual.abs() < ORTHOGONALITY_TOL
        && max_abs_cov < ORTHOGONALITY_TOL
        && uniqueness_gap < 1e-9;
    Ok(ResidualReport {
        mean_residual,
        max_abs_cov,
        uniqueness_gap,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> SemModel {
        let g = Admg::from_names(&["X1", "X2", "X3"], &[("X1", "X2"), ("X2", "X3")], &[]).unwrap();
        SemModel::from_parameters(
            g,
            &[
                (VertexId(0), VertexId(1), 0.5),
                (VertexId(1), VertexId(2), 2.0),
            ],
            &[1.0, 1.0, 1.0],
            &[],
            None,
        )
        .unwrap()
    }

    fn fig2_unit() -> SemModel {
        let g = Admg::from_names(
            &["X", "M1", "M2", "Y"],
            &[("X", "M1"), ("M1", "Y"), ("M1", "M2")],
            &[],
        )
        .unwrap();
        let e = |a: &str, b: &str| (g.vertex(a).unwrap(), g.vertex(b).unwrap(), 1.0);
        let coefs = [e("X", "M1"), e("M1", "Y"), e("M1", "M2")];
        SemModel::from_parameters(g.clone(), &coefs, &[1.0; 4], &[], None).unwrap()
    }

    fn set(ids: &[usize]) -> VertexSet {
        ids.iter().map(|&i| VertexId(i)).collect()
    }

    #[test]
    fn validation_errors() {
        assert!(validate_model(&chain()).is_ok());
        let g = Admg::from_names(&["A", "B", "C"], &[("A", "B")], &[]).unwrap();
        let mut sigma = Matrix::identity(3);
        sigma[(0, 2)] = 0.3;
        sigma[(2, 0)] = 0.3;
        let mut coef = Matrix::zeros(3, 3);
        coef[(1, 0)] = 1.0;
        assert!(matches!(
            SemModel::new(g.clone(), coef.clone(), sigma, vec![0.0; 3]),
            Err(ModelError::EdgeCoefficientMismatch(_))
        ));
        assert_eq!(
            SemModel::new(
                g.clone(),
                coef.clone(),
                Matrix::diag(&[1.0, -1.0, 1.0]),
                vec![0.0; 3]
            ),
            Err(ModelError::SigmaNotPD)
        );
        let mut upper = coef.clone();
        upper[(0, 1)] = 0.4;
        assert!(matches!(
            SemModel::new(g.clone(), upper, Matrix::identity(3), vec![0.0; 3]),
            Err(ModelError::NotLowerTriangular { .. })
        ));
        let mut zero_edge = coef;
        zero_edge[(1, 0)] = 0.0;
        assert!(matches!(
            SemModel::new(g, zero_edge, Matrix::identity(3), vec![0.0; 3]),
            Err(ModelError::EdgeCoefficientMismatch(_))
        ));
    }

    #[test]
    fn chain_moments() {
        // X3 = u3 + 2 u2 + 1 u1 by substitution.
        let mom = moments(&chain());
        assert_eq!(mom.cov[(0, 0)], 1.0);
        assert_eq!(mom.cov[(1, 1)], 1.25);
        assert_eq!(mom.cov[(2, 2)], 6.0);
        assert_eq!(mom.cov[(0, 2)], 1.0);
        assert!(mom.cov.is_symmetric());
        assert_eq!(mom.mean, vec![0.0; 3]);
    }

    #[test]
    fn zero_coefficients_give_sigma() {
        let g = Admg::from_names(&["A", "B"], &[], &[("A", "B")]).unwrap();
        let m = SemModel::from_parameters(
            g,
            &[],
            &[2.0, 3.0],
            &[(VertexId(0), VertexId(1), 0.7)],
            Some(vec![1.0, -2.0]),
        )
        .unwrap();
        let mom = moments(&m);
        assert_eq!(mom.cov, *m.sigma());
        assert_eq!(mom.mean, vec![1.0, -2.0]);
    }

    #[test]
    fn effects_on_chain() {
        let m = chain();
        assert_eq!(total_effect(&m, VertexId(2), VertexId(0)).unwrap(), 1.0);
        assert_eq!(total_effect(&m, VertexId(0), VertexId(2)).unwrap(), 0.0);
        assert_eq!(total_effect(&m, VertexId(1), VertexId(0)).unwrap(), 0.5);
        assert_eq!(
            controlled_total_effect(&m, VertexId(2), VertexId(0), set(&[1])).unwrap(),
            0.0
        );
        assert_eq!(
            controlled_total_effect(&m, VertexId(2), VertexId(0), VertexSet::empty()).unwrap(),
            1.0
        );
        assert!(matches!(
            controlled_total_effect(&m, VertexId(2), VertexId(0), set(&[0])),
            Err(ModelError::QueryVertexInZ(_))
        ));
    }

    #[test]
    fn fig1_controlled_effect_keeps_only_m2_route() {
        let g = Admg::from_names(
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
        .unwrap();
        let v = |s: &str| g.vertex(s).unwrap();
        let coefs = [
            (v("X"), v("M1"), 0.7),
            (v("X"), v("M2"), 1.3),
            (v("M1"), v("M2"), -0.4),
            (v("M1"), v("Y"), 0.9),
            (v("M2"), v("Y"), 0.6),
        ];
        let m = SemModel::from_parameters(g.clone(), &coefs, &[1.0; 4], &[], None).unwrap();
        let tau =
            controlled_total_effect(&m, v("Y"), v("X"), VertexSet::singleton(v("M1"))).unwrap();
        assert!((tau - 1.3 * 0.6).abs() < 1e-15);
    }

    #[test]
    fn ancestral_expansion_chain() {
        let m = chain();
        let e = ancestral_expansion(&m, VertexId(2), set(&[1])).unwrap();
        assert_eq!(e.on_set, vec![(VertexId(1), 2.0)]);
        assert_eq!(e.on_errors, vec![(VertexId(0), 0.0)]);

        let e = ancestral_expansion(&m, VertexId(2), VertexSet::empty()).unwrap();
        assert!(e.on_set.is_empty());
        assert_eq!(e.on_errors, vec![(VertexId(0), 1.0), (VertexId(1), 2.0)]);

        // Regressing on the parents reproduces row i of A.
        let e = ancestral_expansion(&m, VertexId(1), set(&[0])).unwrap();
        assert_eq!(e.on_set, vec![(VertexId(0), 0.5)]);
        assert!(e.on_errors.is_empty());
    }

    #[test]
    fn regression_examples() {
        let m = chain();
        let r = partial_regression(&m, VertexId(2), set(&[0])).unwrap();
        assert_eq!(r.coefficient(VertexId(0)), Some(1.0));
        let r = partial_regression(&m, VertexId(2), set(&[1])).unwrap();
        assert!((r.coefficient(VertexId(1)).unwrap() - 2.0).abs() < 1e-15);

        let m = fig2_unit();
        let g = m.graph();
        let (x, m2, y) = (
            g.vertex("X").unwrap(),
            g.vertex("M2").unwrap(),
            g.vertex("Y").unwrap(),
        );
        let r = partial_regression(&m, y, [x, m2].into_iter().collect()).unwrap();
        // [[1,1],[1,3]] b = [1,2]
        assert!((r.coefficient(x).unwrap() - 0.5).abs() < 1e-15);
        assert!((r.coefficient(m2).unwrap() - 0.5).abs() < 1e-15);

        assert!(matches!(
            partial_regression(&m, y, VertexSet::singleton(y)),
            Err(ModelError::OutcomeInSet(_))
        ));
        let empty = partial_regression(&m, y, VertexSet::empty()).unwrap();
        assert!(empty.coefficients.is_empty());
        assert_eq!(empty.residual_variance, 3.0);
    }

    #[test]
    fn residual_checks_pass() {
        let m = fig2_unit()
            .with_intercepts(vec![1.0, -0.5, 2.0, 0.25])
            .unwrap();
        let rep = residual_checks(&m, VertexId(3), set(&[0, 2])).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.max_abs_cov < 1e-10);
    }

    #[test]
    fn intercepts_do_not_move_slopes() {
        let m = fig2_unit();
        let shifted = m.with_intercepts(vec![3.0, -1.0, 0.5, 7.0]).unwrap();
        let s = set(&[0, 2]);
        let a = partial_regression(&m, VertexId(3), s).unwrap();
        let b = partial_regression(&shifted, VertexId(3), s).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
        assert_ne!(a.intercept, b.intercept);
    }
}
