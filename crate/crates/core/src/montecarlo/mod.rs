//! Random parameter draws, the necessity verifier, finite-sample simulation
//! and the nonlinear interaction demo.
//!
//! Every entry point is a pure function of its inputs and a `u64` seed.
//! Work item `t` (a trial, a chunk of rows) draws from its own generator
//! seeded with [`sub_seed`]`(seed, t)`, so results do not depend on how the
//! items are scheduled. With the `parallel` feature (on by default) items
//! run on the rayon pool; without it they run in order on the caller's
//! thread.

mod data;
mod nonlinear;
pub mod sweep;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adjust::{beta_tau, AdjustmentQuery, AnalysisError};
use crate::graph::{selective_door_criterion, Admg, CriterionMode, GraphError};
use crate::linalg::{cholesky, Matrix};
use crate::sem::{moments, ModelError, SemModel, PIVOT_TOL};

pub use data::{ols, sample_data, sample_data_with, Dataset, ErrorDistribution};
pub use nonlinear::{nonlinear_demo, GridPoint, NonlinearFn, NonlinearModelSpec, NonlinearReport};

pub type Rng64 = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("no positive definite error covariance after {0} attempts")]
    PDGenerationFailed(usize),
    #[error("invalid parameter ranges: {0}")]
    InvalidRanges(String),
    #[error("unsupported error distribution {0:?}")]
    UnsupportedDistribution(String),
    #[error("need more than {needed} samples, got {n}")]
    TooFewSamples { n: usize, needed: usize },
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("invalid evaluation grid: {0}")]
    InvalidGrid(String),
}

/// Sampling ranges for random model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRanges {
    /// Magnitude of each path coefficient; the sign is a fair coin.
    pub coef_magnitude: (f64, f64),
    pub error_var: (f64, f64),
    /// Magnitude of the error correlation on each bidirected edge.
    pub bidirected_corr: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            coef_magnitude: (0.2, 1.5),
            error_var: (0.5, 2.0),
            bidirected_corr: (0.1, 0.6),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let check = |name: &str, (lo, hi): (f64, f64), upper: f64| {
            if lo > 0.0 && lo <= hi && hi.is_finite() && hi < upper {
                Ok(())
            } else {
                Err(SimulationError::InvalidRanges(format!(
                    "{name} = [{lo}, {hi}]"
                )))
            }
        };
        check("coef_magnitude", self.coef_magnitude, f64::INFINITY)?;
        check("error_var", self.error_var, f64::INFINITY)?;
        check("bidirected_corr", self.bidirected_corr, 1.0)
    }
}

pub const MAX_PD_ATTEMPTS: usize = 100;

/// Seed for work item `t` under master seed `seed` (splitmix64 finaliser).
pub fn sub_seed(seed: u64, t: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(t))
}

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

fn signed(rng: &mut Rng64, (lo, hi): (f64, f64)) -> f64 {
    let mag = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Draws a linear SEM on `g`.
///
/// Coefficients are uniform on `±[lo, hi]`, error variances uniform on the
/// variance range. Each bidirected edge gets a correlation of random sign;
/// correlations are redrawn until the covariance matrix is positive
/// definite.
pub fn random_model(
    g: &Admg,
    ranges: &ParamRanges,
    seed: u64,
) -> Result<SemModel, SimulationError> {
    ranges.validate()?;
    let mut rng = rng_from_seed(seed);
    let n = g.len();
    let mut coef = Matrix::zeros(n, n);
    for &(from, to) in g.directed_edges() {
        coef[(to.0, from.0)] = signed(&mut rng, ranges.coef_magnitude);
    }
    let (vlo, vhi) = ranges.error_var;
    let var: Vec<f64> = (0..n).map(|_| rng.random_range(vlo..=vhi)).collect();
    let mut sigma = Matrix::diag(&var);
    let mut attempt = 0;
    loop {
        if attempt == MAX_PD_ATTEMPTS {
            return Err(SimulationError::PDGenerationFailed(MAX_PD_ATTEMPTS));
        }
        attempt += 1;
        for &(a, b) in g.bidirected_edges() {
            let c = signed(&mut rng, ranges.bidirected_corr) * (var[a.0] * var[b.0]).sqrt();
            sigma[(a.0, b.0)] = c;
            sigma[(b.0, a.0)] = c;
        }
        if cholesky(&sigma, PIVOT_TOL).is_some() {
            break;
        }
    }
    Ok(SemModel::new(g.clone(), coef, sigma, vec![0.0; n])?)
}

/// Random ADMG on `n` vertices `X1..Xn`: each forward pair gets a directed
/// edge with probability `p_directed` and each pair a bidirected edge with
/// probability `p_bidirected`.
pub fn random_admg(
    n: usize,
    p_directed: f64,
    p_bidirected: f64,
    seed: u64,
) -> Result<Admg, GraphError> {
    let mut rng = rng_from_seed(seed);
    let mut dir = Vec::new();
    let mut bi = Vec::new();
    for to in 0..n {
        for from in 0..to {
            if rng.random_bool(p_directed) {
                dir.push((from, to));
            }
            if rng.random_bool(p_bidirected) {
                bi.push((from, to));
            }
        }
    }
    let names = (1..=n).map(|k| format!("X{k}")).collect();
    Admg::new(names, &dir, &bi)
}

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rayon pool when the `parallel` feature is enabled, otherwise
    /// sequential.
    #[default]
    Parallel,
    Sequential,
}

pub(crate) fn run_items<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..count).map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    /// `|gamma|` at or below this counts as zero bias.
    pub tol_eq: f64,
    /// Share of criterion-false trials allowed to show zero bias.
    pub allowed_fraction: f64,
    pub ranges: ParamRanges,
    pub mode: CriterionMode,
    pub execution: Execution,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: 200,
            seed: 0,
            tol_eq: 1e-7,
            allowed_fraction: 0.01,
            ranges: ParamRanges::default(),
            mode: CriterionMode::Resolved,
            execution: Execution::Parallel,
        }
    }
}

/// A trial whose bias disagreed with the graph verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disagreement {
    pub trial: usize,
    /// Seed that regenerates the trial's model through [`random_model`].
    pub seed: u64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub criterion_verdict: bool,
    /// Trials where `|gamma| <= tol_eq` matched the verdict.
    pub agree_count: usize,
    pub disagreements: Vec<Disagreement>,
    /// Criterion true: every trial agrees. Criterion false: disagreements
    /// stay within the allowed fraction.
    pub passed: bool,
}

/// Checks the graph verdict for `q` against `cfg.trials` random
/// parameterisations of `g`.
pub fn verify_necessity(
    g: &Admg,
    q: &AdjustmentQuery,
    cfg: &VerifyConfig,
) -> Result<TrialSummary, SimulationError> {
    Ok(verify_queries(g, std::slice::from_ref(q), cfg)?.remove(0))
}

/// [`verify_necessity`] for several queries on one graph. Trial `t` draws
/// the same model for every query, so each summary equals the one the
/// single-query call would return.
pub fn verify_queries(
    g: &Admg,
    queries: &[AdjustmentQuery],
    cfg: &VerifyConfig,
) -> Result<Vec<TrialSummary>, SimulationError> {
    cfg.ranges.validate()?;
    let mut verdicts = Vec::with_capacity(queries.len());
    for q in queries {
        q.validate(g)?;
        verdicts.push(
            selective_door_criterion(g, q.adjust, q.treatment, q.outcome, cfg.mode)?.satisfied,
        );
    }
    let gammas: Vec<Result<Vec<f64>, SimulationError>> =
        run_items(cfg.execution, cfg.trials, |t| {
            let m = random_model(g, &cfg.ranges, sub_seed(cfg.seed, t as u64))?;
            let mom = moments(&m);
            queries
                .iter()
                .map(|q| {
                    beta_tau(&m, &mom, q)
                        .map(|(b, t)| b - t)
                        .map_err(SimulationError::from)
                })
                .collect()
        });
    let mut summaries: Vec<TrialSummary> = verdicts
        .iter()
        .map(|&v| TrialSummary {
            trials: cfg.trials,
            criterion_verdict: v,
            agree_count: 0,
            disagreements: Vec::new(),
            passed: true,
        })
        .collect();
    for (t, row) in gammas.into_iter().enumerate() {
        for (s, gamma) in summaries.iter_mut().zip(row?) {
            if (gamma.abs() <= cfg.tol_eq) == s.criterion_verdict {
                s.agree_count += 1;
            } else {
                s.disagreements.push(Disagreement {
                    trial: t,
                    seed: sub_seed(cfg.seed, t as u64),
                    gamma,
                });
            }
        }
    }
    let allowed = (cfg.allowed_fraction * cfg.trials as f64).floor() as usize;
    for s in &mut summaries {
        s.passed = if s.criterion_verdict {
            s.disagreements.is_empty()
        } else {
            s.disagreements.len() <= allowed
        };
    }
    Ok(summaries)
}
