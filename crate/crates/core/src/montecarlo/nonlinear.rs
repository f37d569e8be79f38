//! Five-variable model with one nonlinear interaction term:
//!
//! ```text
//! Z = u_Z
//! X = a_XZ Z + u_X
//! M = a_MX X + a_MZ Z + u_M
//! H = h(X, M)
//! Y = a_YX X + a_YM M + a_YH H + a_YZ Z + u_Y
//! ```
//!
//! The linear part of the effect of `X` on `Y` is read off a regression of
//! `Y` on `{X, H, Z}`; the part that flows through `H` is the slope of
//! `x ↦ a_YH E[h(x, a_MX x + a_MZ Z + u_M)]`, estimated by plugging sample
//! residuals of `M` into `h`.

use std::str::FromStr;

use super::{
    ols, rng_from_seed, run_items, sub_seed, Dataset, ErrorDistribution, Execution, SimulationError,
};
use crate::graph::VertexId;

const Z: VertexId = VertexId(0);
const X: VertexId = VertexId(1);
const M: VertexId = VertexId(2);
const H: VertexId = VertexId(3);
const Y: VertexId = VertexId(4);

/// Batches used for the standard error of the plug-in estimates.
pub const SE_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearFn {
    /// `h(x, m) = x m`
    Product,
}

impl NonlinearFn {
    pub fn apply(self, x: f64, m: f64) -> f64 {
        match self {
            NonlinearFn::Product => x * m,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NonlinearFn::Product => "product",
        }
    }
}

impl FromStr for NonlinearFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "product" => Ok(NonlinearFn::Product),
            other => Err(format!("unknown function {other:?} (available: product)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearModelSpec {
    pub a_xz: f64,
    pub a_mx: f64,
    pub a_mz: f64,
    pub a_yx: f64,
    pub a_ym: f64,
    pub a_yh: f64,
    pub a_yz: f64,
    pub h: NonlinearFn,
    /// Shape of the independent, zero-mean, unit-variance errors.
    pub errors: ErrorDistribution,
}

impl Default for NonlinearModelSpec {
    fn default() -> Self {
        NonlinearModelSpec {
            a_xz: 0.4,
            a_mx: 0.5,
            a_mz: 0.3,
            a_yx: 0.6,
            a_ym: 0.8,
            a_yh: 0.7,
            a_yz: 0.5,
            h: NonlinearFn::Product,
            errors: ErrorDistribution::Gaussian,
        }
    }
}

impl NonlinearModelSpec {
    pub const NAMES: [&'static str; 5] = ["Z", "X", "M", "H", "Y"];

    /// Simulates `n` rows of `(Z, X, M, H, Y)`.
    pub fn simulate(&self, n: usize, seed: u64, exec: Execution) -> Dataset {
        let chunk = super::data::CHUNK_ROWS;
        let blocks = run_items(exec, n.div_ceil(chunk), |c| {
            let rows = chunk.min(n - c * chunk);
            let mut rng = rng_from_seed(sub_seed(seed, c as u64));
            let mut out = Vec::with_capacity(rows * 5);
            for _ in 0..rows {
                let z = self.errors.draw(&mut rng);
                let x = self.a_xz * z + self.errors.draw(&mut rng);
                let m = self.a_mx * x + self.a_mz * z + self.errors.draw(&mut rng);
                let h = self.h.apply(x, m);
                let y = self.a_yx * x
                    + self.a_ym * m
                    + self.a_yh * h
                    + self.a_yz * z
                    + self.errors.draw(&mut rng);
                out.extend_from_slice(&[z, x, m, h, y]);
            }
            out
        });
        let mut cols: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(n)).collect();
        for block in &blocks {
            for row in block.chunks_exact(5) {
                for (c, v) in cols.iter_mut().zip(row) {
                    c.push(*v);
                }
            }
        }
        Dataset::new(Self::NAMES.iter().map(|s| s.to_string()).collect(), cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    /// Plug-in estimate of `E[h(x, a_MX x + a_MZ Z + u_M)]`.
    pub expected_h: f64,
    /// Effect of `X` on `Y` carried by `H` at `x`.
    pub delta_hat: f64,
    /// Batch-means standard error of `delta_hat`.
    pub delta_se: f64,
    /// `tau_hat + delta_hat`
    pub total_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearReport {
    pub n: usize,
    /// Coefficient on `X` in the regression of `M` on `{X, Z}`.
    pub a_mx_hat: f64,
    /// Coefficient on `X` in the regression of `Y` on `{X, H, Z}`.
    pub tau_hat: f64,
    /// Coefficient on `H` in the same regression.
    pub a_yh_hat: f64,
    pub grid: Vec<GridPoint>,
}

struct Fit {
    a_mx: f64,
    tau: f64,
    a_yh: f64,
    /// `E[h]` at `x - Δ`, `x`, `x + Δ` for each grid point.
    eh: Vec<[f64; 3]>,
}

fn fit(
    spec: &NonlinearModelSpec,
    d: &Dataset,
    grid: &[f64],
    step: f64,
) -> Result<Fit, SimulationError> {
    let mreg = ols(d, M, &[X, Z])?;
    let a_mx = mreg.coefficient(X).expect("regressor");
    let yreg = ols(d, Y, &[X, H, Z])?;
    let tau = yreg.coefficient(X).expect("regressor");
    let a_yh = yreg.coefficient(H).expect("regressor");
    let xs = d.column(X);
    let resid: Vec<f64> = d
        .column(M)
        .iter()
        .zip(xs)
        .map(|(m, x)| m - a_mx * x)
        .collect();
    let n = resid.len() as f64;
    let eh_at = |x: f64| {
        resid
            .iter()
            .map(|r| spec.h.apply(x, a_mx * x + r))
            .sum::<f64>()
            / n
    };
    let eh = grid
        .iter()
        .map(|&x| [eh_at(x - step), eh_at(x), eh_at(x + step)])
        .collect();
    Ok(Fit {
        a_mx,
        tau,
        a_yh,
        eh,
    })
}

fn grid_step(grid: &[f64]) -> Result<f64, SimulationError> {
    if grid.len() < 2 {
        return Err(SimulationError::InvalidGrid(
            "need at least two points".into(),
        ));
    }
    let step = grid[1] - grid[0];
    if step.is_nan() || step <= 0.0 || !step.is_finite() {
        return Err(SimulationError::InvalidGrid("points must increase".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0) {
            return Err(SimulationError::InvalidGrid(
                "points must be evenly spaced".into(),
            ));
        }
    }
    Ok(step)
}

/// Simulates the model and reports the decomposed slope of
/// `E[Y | do(X = x)]` at each grid point.
pub fn nonlinear_demo(
    spec: &NonlinearModelSpec,
    x_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<NonlinearReport, SimulationError> {
    let step = grid_step(x_grid)?;
    if n < SE_BATCHES * 8 {
        return Err(SimulationError::TooFewSamples {
            n,
            needed: SE_BATCHES * 8,
        });
    }
    let d = spec.simulate(n, seed, Execution::Parallel);
    let delta = |f: &Fit, k: usize| f.a_yh * (f.eh[k][2] - f.eh[k][0]) / (2.0 * step);
    let full = fit(spec, &d, x_grid, step)?;

    let per = n / SE_BATCHES;
    let mut batch_deltas = vec![Vec::with_capacity(SE_BATCHES); x_grid.len()];
    for b in 0..SE_BATCHES {
        let rows = b * per..(b + 1) * per;
        let sub = Dataset::new(
            d.names().to_vec(),
            d.columns()
                .iter()
                .map(|c| c[rows.clone()].to_vec())
                .collect(),
        );
        let f = fit(spec, &sub, x_grid, step)?;
        for (k, acc) in batch_deltas.iter_mut().enumerate() {
            acc.push(delta(&f, k));
        }
    }

    let grid = x_grid
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let bs = &batch_deltas[k];
            let mean = bs.iter().sum::<f64>() / bs.len() as f64;
            let var =
                bs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (bs.len() - 1) as f64;
            let delta_hat = delta(&full, k);
            GridPoint {
                x,
                expected_h: full.eh[k][1],
                delta_hat,
                delta_se: (var / bs.len() as f64).sqrt(),
                total_slope: full.tau + delta_hat,
            }
        })
        .collect();
    Ok(NonlinearReport {
        n,
        a_mx_hat: full.a_mx,
        tau_hat: full.tau,
        a_yh_hat: full.a_yh,
        grid,
    })
}
