//! Forward simulation of a linear SEM and least squares on the draws.

use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::{rng_from_seed, run_items, sub_seed, Execution, Rng64, SimulationError};
use crate::graph::VertexId;
use crate::linalg::{cholesky, cholesky_solve, Matrix};
use crate::sem::{RegressionResult, SemModel, PIVOT_TOL};

/// Rows generated per independently seeded chunk.
pub(crate) const CHUNK_ROWS: usize = 4096;

/// Shape of the standardised error draws (mean zero, variance one before
/// scaling by the covariance factor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorDistribution {
    #[default]
    Gaussian,
    /// Uniform on `[-√3, √3]`.
    Uniform,
    /// `Exp(1) - 1`.
    ShiftedExponential,
}

impl ErrorDistribution {
    pub fn name(self) -> &'static str {
        match self {
            ErrorDistribution::Gaussian => "gaussian",
            ErrorDistribution::Uniform => "uniform",
            ErrorDistribution::ShiftedExponential => "exponential",
        }
    }

    pub(crate) fn draw(self, rng: &mut Rng64) -> f64 {
        match self {
            ErrorDistribution::Gaussian => StandardNormal.sample(rng),
            ErrorDistribution::Uniform => (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt(),
            ErrorDistribution::ShiftedExponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
        }
    }
}

impl FromStr for ErrorDistribution {
    type Err = SimulationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" | "normal" => Ok(ErrorDistribution::Gaussian),
            "uniform" => Ok(ErrorDistribution::Uniform),
            "exponential" => Ok(ErrorDistribution::ShiftedExponential),
            other => Err(SimulationError::UnsupportedDistribution(other.to_string())),
        }
    }
}

/// Simulated samples, one column per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(names.len(), columns.len(), "one name per column");
        let n = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == n), "ragged columns");
        Dataset { names, columns }
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, v: VertexId) -> &[f64] {
        &self.columns[v.0]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Comma-separated values with a header row; numbers use the shortest
    /// decimal that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.names.join(","))?;
        let mut line = String::new();
        for r in 0..self.n() {
            line.clear();
            for (k, col) in self.columns.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:?}", col[r]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Row-major chunk of `rows` draws of `X` seeded by `seed`.
fn simulate_chunk(
    coef: &Matrix,
    chol: &Matrix,
    mean: &[f64],
    dist: ErrorDistribution,
    rows: usize,
    seed: u64,
) -> Vec<f64> {
    let p = mean.len();
    let mut rng = rng_from_seed(seed);
    let mut out = vec![0.0; rows * p];
    let mut z = vec![0.0; p];
    for r in 0..rows {
        for v in z.iter_mut() {
            *v = dist.draw(&mut rng);
        }
        let x = &mut out[r * p..(r + 1) * p];
        for v in 0..p {
            // u = c + L z, then X_v = u_v + Σ_{k<v} A[v][k] X_k.
            let lrow = chol.row(v);
            let mut s = mean[v];
            for k in 0..=v {
                s += lrow[k] * z[k];
            }
            let arow = coef.row(v);
            for k in 0..v {
                s += arow[k] * x[k];
            }
            x[v] = s;
        }
    }
    out
}

/// Draws `n` samples from `m` with errors of the given shape, mean
/// `m.intercepts()` and covariance `m.sigma()`.
pub fn sample_data(
    m: &SemModel,
    n: usize,
    seed: u64,
    dist: ErrorDistribution,
) -> Result<Dataset, SimulationError> {
    sample_data_with(m, n, seed, dist, Execution::Parallel)
}

pub fn sample_data_with(
    m: &SemModel,
    n: usize,
    seed: u64,
    dist: ErrorDistribution,
    exec: Execution,
) -> Result<Dataset, SimulationError> {
    let p = m.len();
    let chol = cholesky(m.sigma(), PIVOT_TOL).ok_or(crate::sem::ModelError::SigmaNotPD)?;
    let chunks = n.div_ceil(CHUNK_ROWS);
    let blocks = run_items(exec, chunks, |c| {
        let rows = CHUNK_ROWS.min(n - c * CHUNK_ROWS);
        simulate_chunk(
            m.coef(),
            &chol,
            m.intercepts(),
            dist,
            rows,
            sub_seed(seed, c as u64),
        )
    });
    let mut columns = vec![Vec::with_capacity(n); p];
    for block in &blocks {
        for row in block.chunks_exact(p) {
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(*v);
            }
        }
    }
    Ok(Dataset::new(m.graph().names().to_vec(), columns))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Least squares of `outcome` on `regressors` with an intercept, solved
/// from the normal equations of the centred data.
pub fn ols(
    d: &Dataset,
    outcome: VertexId,
    regressors: &[VertexId],
) -> Result<RegressionResult, SimulationError> {
    let n = d.n();
    let p = regressors.len();
    if n <= p + 1 {
        return Err(SimulationError::TooFewSamples { n, needed: p + 1 });
    }
    let y = d.column(outcome);
    let ybar = mean(y);
    let cols: Vec<&[f64]> = regressors.iter().map(|&v| d.column(v)).collect();
    let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();

    let mut xtx = Matrix::zeros(p, p);
    let mut xty = vec![0.0; p];
    let mut centred = vec![0.0; p];
    let mut syy = 0.0;
    for r in 0..n {
        for k in 0..p {
            centred[k] = cols[k][r] - means[k];
        }
        let yc = y[r] - ybar;
        syy += yc * yc;
        for a in 0..p {
            xty[a] += centred[a] * yc;
            for b in 0..=a {
                xtx[(a, b)] += centred[a] * centred[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
    }
    let scale = (0..p).map(|k| xtx[(k, k)]).fold(0.0, f64::max);
    let beta = if p == 0 {
        Vec::new()
    } else {
        let l = cholesky(&xtx, 1e-10 * scale).ok_or(SimulationError::SingularDesign)?;
        cholesky_solve(&l, &xty)
    };
    let intercept = ybar - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    let ssr = syy - beta.iter().zip(&xty).map(|(b, c)| b * c).sum::<f64>();
    Ok(RegressionResult {
        intercept,
        coefficients: regressors.iter().copied().zip(beta).collect(),
        residual_variance: ssr / (n - p - 1) as f64,
    })
}
